//! Dataset model, feature landscapes, CSV ingestion and seeded splitting.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("could not read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("row {row}, column {column}: {message}")]
    Value {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("invalid feature landscape: {0}")]
    Landscape(String),
    #[error("dataset is empty")]
    Empty,
    #[error("train fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("example does not conform to the landscape: {0}")]
    Nonconforming(String),
}

/// Counts of real-valued features and category counts of the ordinal and
/// nominal features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureLandscape {
    pub ell: usize,
    pub ordinal: Vec<usize>,
    pub nominal: Vec<usize>,
}

impl FeatureLandscape {
    pub fn new(ell: usize, ordinal: Vec<usize>, nominal: Vec<usize>) -> Result<Self, DataError> {
        if ordinal.iter().chain(&nominal).any(|&k| k == 0) {
            return Err(DataError::Landscape(
                "every categorical feature needs at least one category".into(),
            ));
        }
        Ok(FeatureLandscape {
            ell,
            ordinal,
            nominal,
        })
    }

    pub fn real(ell: usize) -> Self {
        FeatureLandscape {
            ell,
            ordinal: Vec::new(),
            nominal: Vec::new(),
        }
    }

    pub fn omega(&self) -> usize {
        self.ordinal.len()
    }

    pub fn nu(&self) -> usize {
        self.nominal.len()
    }

    pub fn n_features(&self) -> usize {
        self.ell + self.omega() + self.nu()
    }

    /// Conjugate of the ordinal landscape: entry `C - 1` holds the number of
    /// ordinal features with `O_i - 1 >= C`, for `C = 1 .. max O_i - 1`.
    pub fn ordinal_conjugate(&self) -> Vec<usize> {
        conjugate(&self.ordinal)
    }

    /// Clamps every categorical component at `k`.
    pub fn shrink(&self, k: usize) -> FeatureLandscape {
        assert!(k >= 1, "shrink requires k >= 1");
        FeatureLandscape {
            ell: self.ell,
            ordinal: self.ordinal.iter().map(|&o| o.min(k)).collect(),
            nominal: self.nominal.iter().map(|&n| n.min(k)).collect(),
        }
    }

    /// Component-wise order; landscapes of different shapes are incomparable.
    pub fn is_dominated_by(&self, other: &FeatureLandscape) -> bool {
        self.ell <= other.ell
            && self.ordinal.len() == other.ordinal.len()
            && self.nominal.len() == other.nominal.len()
            && self.ordinal.iter().zip(&other.ordinal).all(|(a, b)| a <= b)
            && self.nominal.iter().zip(&other.nominal).all(|(a, b)| a <= b)
    }
}

/// Free-standing `shrink`, mirroring [`FeatureLandscape::shrink`].
pub fn shrink_landscape(ls: &FeatureLandscape, k: usize) -> FeatureLandscape {
    ls.shrink(k)
}

pub(crate) fn conjugate(counts: &[usize]) -> Vec<usize> {
    let omega_max = counts.iter().copied().max().unwrap_or(1);
    (1..omega_max)
        .map(|c| counts.iter().filter(|&&o| o > c).count())
        .collect()
}

impl fmt::Display for FeatureLandscape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(
            f,
            "real={} ord=({}) nom=({})",
            self.ell,
            join(&self.ordinal),
            join(&self.nominal)
        )
    }
}

/// Feature values of one example. Categories are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub reals: Vec<f64>,
    pub ordinals: Vec<u32>,
    pub nominals: Vec<u32>,
}

impl Example {
    pub fn real(reals: Vec<f64>) -> Self {
        Example {
            reals,
            ordinals: Vec::new(),
            nominals: Vec::new(),
        }
    }

    pub fn conforms_to(&self, ls: &FeatureLandscape) -> bool {
        self.reals.len() == ls.ell
            && self.ordinals.len() == ls.omega()
            && self.nominals.len() == ls.nu()
            && self.reals.iter().all(|x| x.is_finite())
            && in_range(&self.ordinals, &ls.ordinal)
            && in_range(&self.nominals, &ls.nominal)
    }
}

fn in_range(values: &[u32], counts: &[usize]) -> bool {
    values
        .iter()
        .zip(counts)
        .all(|(&v, &k)| v >= 1 && v as usize <= k)
}

/// A labeled sample. Labels are 0-based class indices into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub landscape: FeatureLandscape,
    pub examples: Vec<Example>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        landscape: FeatureLandscape,
        examples: Vec<Example>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_class_names(landscape, examples, labels, class_names)
    }

    pub fn with_class_names(
        landscape: FeatureLandscape,
        examples: Vec<Example>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let n_classes = class_names.len();
        if examples.len() != labels.len() {
            return Err(DataError::Nonconforming(format!(
                "{} examples but {} labels",
                examples.len(),
                labels.len()
            )));
        }
        if let Some(i) = examples.iter().position(|x| !x.conforms_to(&landscape)) {
            return Err(DataError::Nonconforming(format!("example {i}")));
        }
        if let Some(i) = labels.iter().position(|&y| y >= n_classes) {
            return Err(DataError::Nonconforming(format!(
                "label of example {i} outside [0, {n_classes})"
            )));
        }
        Ok(Dataset {
            landscape,
            examples,
            labels,
            n_classes,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Sub-sample made of the given example indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            landscape: self.landscape.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut z = vec![0; self.n_classes];
        for &i in indices {
            z[self.labels[i]] += 1;
        }
        z
    }
}

/// Number of distinct values taken by each categorical feature.
pub fn empirical_landscape(d: &Dataset) -> FeatureLandscape {
    let distinct = |get: &dyn Fn(&Example) -> u32| {
        d.examples
            .iter()
            .map(get)
            .collect::<BTreeSet<_>>()
            .len()
            .max(1)
    };
    FeatureLandscape {
        ell: d.landscape.ell,
        ordinal: (0..d.landscape.omega())
            .map(|i| distinct(&|x: &Example| x.ordinals[i]))
            .collect(),
        nominal: (0..d.landscape.nu())
            .map(|i| distinct(&|x: &Example| x.nominals[i]))
            .collect(),
    }
}

/// Column type declared in the schema line of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSpec {
    Real,
    Ordinal(usize),
    Nominal(usize),
    Label,
}

impl FromStr for ColumnSpec {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let categories = |inner: &str| -> Result<usize, DataError> {
            let k: usize = inner
                .trim()
                .parse()
                .map_err(|_| DataError::Schema(format!("bad category count in `{s}`")))?;
            if k == 0 {
                return Err(DataError::Schema(format!("`{s}` declares zero categories")));
            }
            Ok(k)
        };
        match s {
            "real" => Ok(ColumnSpec::Real),
            "label" => Ok(ColumnSpec::Label),
            _ => {
                if let Some(inner) = s.strip_prefix("ord(").and_then(|r| r.strip_suffix(')')) {
                    Ok(ColumnSpec::Ordinal(categories(inner)?))
                } else if let Some(inner) = s.strip_prefix("nom(").and_then(|r| r.strip_suffix(')'))
                {
                    Ok(ColumnSpec::Nominal(categories(inner)?))
                } else {
                    Err(DataError::Schema(format!("unknown column type `{s}`")))
                }
            }
        }
    }
}

pub fn parse_schema(line: &str) -> Result<Vec<ColumnSpec>, DataError> {
    // split on commas outside parentheses is unnecessary: specs never contain commas
    let specs = line
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<ColumnSpec>, _>>()?;
    match specs.iter().filter(|s| **s == ColumnSpec::Label).count() {
        1 => Ok(specs),
        0 => Err(DataError::Schema("no label column".into())),
        _ => Err(DataError::Schema("more than one label column".into())),
    }
}

/// Loads a CSV file whose first line is the column schema
/// (`real`, `ord(K)`, `nom(K)`, `label`).
///
/// Categorical values must be integers in `1..=K`. Class names are ordered
/// numerically when every label parses as an integer, lexicographically
/// otherwise.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let schema_record = records
        .next()
        .ok_or_else(|| DataError::Schema("missing schema line".into()))??;
    let schema = parse_schema(&schema_record.iter().collect::<Vec<_>>().join(","))?;

    let mut ell = 0;
    let mut ordinal = Vec::new();
    let mut nominal = Vec::new();
    for spec in &schema {
        match *spec {
            ColumnSpec::Real => ell += 1,
            ColumnSpec::Ordinal(k) => ordinal.push(k),
            ColumnSpec::Nominal(k) => nominal.push(k),
            ColumnSpec::Label => {}
        }
    }
    let landscape = FeatureLandscape::new(ell, ordinal, nominal)?;

    let mut examples = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in records.enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if record.len() != schema.len() {
            return Err(DataError::Value {
                row,
                column: record.len().min(schema.len()) + 1,
                message: format!("expected {} fields, found {}", schema.len(), record.len()),
            });
        }
        let mut x = Example {
            reals: Vec::with_capacity(landscape.ell),
            ordinals: Vec::with_capacity(landscape.omega()),
            nominals: Vec::with_capacity(landscape.nu()),
        };
        let mut label = None;
        for (c, (spec, field)) in schema.iter().zip(record.iter()).enumerate() {
            let err = |message: String| DataError::Value {
                row,
                column: c + 1,
                message,
            };
            match *spec {
                ColumnSpec::Real => {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| err(format!("`{field}` is not a real number")))?;
                    if !v.is_finite() {
                        return Err(err(format!("`{field}` is not finite")));
                    }
                    x.reals.push(v);
                }
                ColumnSpec::Ordinal(k) | ColumnSpec::Nominal(k) => {
                    let v: u32 = field
                        .parse()
                        .map_err(|_| err(format!("`{field}` is not a category index")))?;
                    if v == 0 || v as usize > k {
                        return Err(err(format!("category {v} outside 1..={k}")));
                    }
                    if matches!(spec, ColumnSpec::Ordinal(_)) {
                        x.ordinals.push(v);
                    } else {
                        x.nominals.push(v);
                    }
                }
                ColumnSpec::Label => {
                    if field.is_empty() {
                        return Err(err("missing label".into()));
                    }
                    label = Some(field.to_string());
                }
            }
        }
        examples.push(x);
        raw_labels.push(label.expect("schema has a label column"));
    }

    let mut names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if names.iter().all(|s| s.parse::<i64>().is_ok()) {
        names.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let labels = raw_labels.iter().map(|s| index[s.as_str()]).collect();
    Dataset::with_class_names(landscape, examples, labels, names)
}

const IRIS_CSV: &str = include_str!("../data/iris.csv");

/// The bundled 150-example, 4-feature, 3-class Iris sample.
pub fn iris() -> Dataset {
    parse_dataset(IRIS_CSV).expect("bundled dataset parses")
}

/// Writes a dataset back to the schema-headed CSV format. Features are
/// emitted in type order (reals, ordinals, nominals), label last.
pub fn to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = Vec::new();
    header.extend((0..d.landscape.ell).map(|_| "real".to_string()));
    header.extend(d.landscape.ordinal.iter().map(|k| format!("ord({k})")));
    header.extend(d.landscape.nominal.iter().map(|k| format!("nom({k})")));
    header.push("label".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for (x, &y) in d.examples.iter().zip(&d.labels) {
        let mut fields: Vec<String> = x.reals.iter().map(|v| v.to_string()).collect();
        fields.extend(x.ordinals.iter().map(|v| v.to_string()));
        fields.extend(x.nominals.iter().map(|v| v.to_string()));
        fields.push(d.class_names[y].clone());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Deterministic permutation of `0..m`: Fisher–Yates driven by ChaCha8
/// seeded from `seed`.
pub fn shuffled_indices(m: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx
}

/// Number of examples the first half receives: ⌈fraction · m⌉.
pub fn train_size(m: usize, train_fraction: f64) -> usize {
    // guard against 0.85 * 100 = 85.00000000000001
    let raw = train_fraction * m as f64;
    let size = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (size as usize).min(m)
}

/// Shuffles under `seed` and returns (train, test) with ⌈fraction · m⌉
/// training examples.
pub fn split_dataset(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if d.is_empty() {
        return Err(DataError::Empty);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Fraction(train_fraction));
    }
    let idx = shuffled_indices(d.len(), seed);
    let n_train = train_size(d.len(), train_fraction);
    Ok((d.subset(&idx[..n_train]), d.subset(&idx[n_train..])))
}
