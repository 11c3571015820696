use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use treebound::bounds::{
    log_growth_func_ub, log_parti_func_ub, parti_func_ub_with, stump_vcdim_real, tree_pf_nominal, tree_pf_ordinal,
    tree_pf_real, vcdim_ub_with, BoundCache, KClamp, PriorConfig, DEFAULT_VCDIM_CAP,
};
use treebound::data::{iris, load_dataset, split_dataset, Dataset, FeatureLandscape};
use treebound::experiment::{run_experiment, run_model, ExperimentConfig, Model, ModelSummary, Stat};
use treebound::induction::{grow_greedy, GrowthConstraints};
use treebound::tree::TreeShape;
use treebound::verify;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "treebound", version, about = "Partitioning-function bounds and bound-based pruning for decision trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper bound on the VC dimension of a tree shape
    Vcdim(VcdimArgs),
    /// Upper bound on the c-partitioning function
    Bound(BoundArgs),
    /// Upper bound on the growth function (natural log and value)
    Growth(GrowthArgs),
    /// Grow a tree greedily and print it
    Grow(GrowArgs),
    /// Grow and prune a tree with one model on one seeded split
    Prune(PruneArgs),
    /// Repeated seeded runs of several models with mean/std summaries
    Experiment(ExperimentArgs),
    /// Check the bounds against enumeration and closed forms
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct LandscapeArgs {
    /// Number of real-valued features
    #[arg(long, default_value_t = 0)]
    real: usize,
    /// Category counts of the ordinal features, comma separated
    #[arg(long, value_delimiter = ',')]
    ordinal: Vec<usize>,
    /// Category counts of the nominal features, comma separated
    #[arg(long, value_delimiter = ',')]
    nominal: Vec<usize>,
}

impl LandscapeArgs {
    fn landscape(&self) -> Result<FeatureLandscape, Failure> {
        FeatureLandscape::new(self.real, self.ordinal.clone(), self.nominal.clone()).map_err(Failure::usage)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Clamp {
    Binomial,
    None,
}

impl From<Clamp> for KClamp {
    fn from(c: Clamp) -> KClamp {
        match c {
            Clamp::Binomial => KClamp::Binomial,
            Clamp::None => KClamp::None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Args)]
struct VcdimArgs {
    /// Tree shape: `.` is a leaf, `(L,R)` a node
    #[arg(long, default_value = "(.,.)")]
    shape: String,
    #[command(flatten)]
    landscape: LandscapeArgs,
    /// Print the exact stump value instead (stump shape, real features only)
    #[arg(long)]
    exact_stump: bool,
    #[arg(long, value_enum, default_value_t = Clamp::Binomial)]
    clamp: Clamp,
    /// Give up beyond this many examples
    #[arg(long, default_value_t = DEFAULT_VCDIM_CAP)]
    cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Mixed-feature recursion with exact integers
    Parti,
    /// Fast log-space bound
    Log,
    /// Real-valued features only
    Real,
    /// Ordinal features only
    Ordinal,
    /// Nominal features only
    Nominal,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value = "(.,.)")]
    shape: String,
    /// Number of examples
    #[arg(long)]
    m: usize,
    /// Number of parts
    #[arg(long, default_value_t = 2)]
    c: usize,
    #[command(flatten)]
    landscape: LandscapeArgs,
    #[arg(long, value_enum, default_value_t = Method::Parti)]
    method: Method,
    #[arg(long, value_enum, default_value_t = Clamp::Binomial)]
    clamp: Clamp,
}

#[derive(Args)]
struct GrowthArgs {
    #[arg(long, default_value = "(.,.)")]
    shape: String,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    n_classes: usize,
    #[command(flatten)]
    landscape: LandscapeArgs,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file whose first line is the schema (`real`, `ord(K)`, `nom(K)`,
    /// `label`); the bundled Iris sample when omitted
    #[arg(long)]
    data: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Failure> {
        match &self.data {
            Some(p) => load_dataset(p).map_err(Failure::data),
            None => Ok(iris()),
        }
    }
}

#[derive(Args, Clone)]
struct GrowthFlags {
    #[arg(long, default_value_t = 75)]
    max_leaves: usize,
    #[arg(long)]
    max_height: Option<usize>,
    /// Score splits by the plain sum of child Gini indices
    #[arg(long)]
    unweighted: bool,
}

impl GrowthFlags {
    fn constraints(&self) -> Result<GrowthConstraints, Failure> {
        if self.max_leaves == 0 {
            return Err(Failure::usage("--max-leaves must be at least 1"));
        }
        Ok(GrowthConstraints {
            max_leaves: self.max_leaves,
            max_height: self.max_height,
            weighted: !self.unweighted,
        })
    }
}

#[derive(Args)]
struct GrowArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    growth: GrowthFlags,
    /// Grow on a seeded split of this fraction and report test accuracy
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct ProtocolFlags {
    #[arg(long, default_value_t = 0.85)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Error prior ratio (default 2^-10.5)
    #[arg(long)]
    r: Option<f64>,
    /// Cross-validation folds for CC and KM
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// KM grid is 10^lo ..= 10^hi
    #[arg(long, default_value_t = -20, allow_hyphen_values = true)]
    km_lo: i32,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    km_hi: i32,
    /// Report zero timings so output is reproducible byte for byte
    #[arg(long)]
    no_time: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl ProtocolFlags {
    fn config(&self, growth: &GrowthFlags, seed: u64) -> Result<ExperimentConfig, Failure> {
        let prior = PriorConfig::new(self.delta, self.r.unwrap_or(PriorConfig::default().r)).map_err(Failure::usage)?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Failure::usage("--train-fraction must lie in (0, 1)"));
        }
        if self.km_lo > self.km_hi {
            return Err(Failure::usage("--km-lo must not exceed --km-hi"));
        }
        Ok(ExperimentConfig {
            train_fraction: self.train_fraction,
            growth: growth.constraints()?,
            prior,
            cc_folds: self.folds,
            km_grid: (self.km_lo..=self.km_hi).map(|e| 10f64.powi(e)).collect(),
            seed,
            ..ExperimentConfig::default()
        })
    }
}

#[derive(Args)]
struct PruneArgs {
    /// og, cc, re, km, ours or oracle
    #[arg(long)]
    model: String,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    growth: GrowthFlags,
    #[command(flatten)]
    protocol: ProtocolFlags,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 25)]
    runs: usize,
    /// Base seed; run i uses seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of og,cc,re,km,ours,oracle
    #[arg(long, value_delimiter = ',', default_value = "og,cc,re,km,ours,oracle")]
    models: Vec<String>,
    #[command(flatten)]
    growth: GrowthFlags,
    #[command(flatten)]
    protocol: ProtocolFlags,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random instances in the dominance check
    #[arg(long, default_value_t = 500)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl ToString) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn data(e: impl ToString) -> Failure {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

fn parse_shape(s: &str) -> Result<TreeShape, Failure> {
    s.parse()
        .map_err(|e| Failure::usage(format!("invalid shape `{s}`: {e}")))
}

/// Renders rows as CSV or as a right-aligned text table.
fn render(header: &[&str], rows: &[Vec<String>], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
        }
        Format::Table => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for r in rows {
                for (w, cell) in widths.iter_mut().zip(r) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(out, "{}", line(header.to_vec()));
            for r in rows {
                let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
            }
        }
    }
    out
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

fn opt3(x: Option<f64>) -> String {
    x.map(fmt3).unwrap_or_default()
}

fn cmd_vcdim(a: &VcdimArgs) -> Result<String, Failure> {
    let shape = parse_shape(&a.shape)?;
    let ls = a.landscape.landscape()?;
    if a.exact_stump {
        if shape != TreeShape::stump() || !ls.ordinal.is_empty() || !ls.nominal.is_empty() {
            return Err(Failure::usage("--exact-stump needs the stump shape and real-valued features only"));
        }
        return Ok(format!("{}\n", stump_vcdim_real(ls.ell)));
    }
    let cache = BoundCache::new();
    let d = vcdim_ub_with(&shape, &ls, a.clamp.into(), a.cap, &cache).map_err(Failure::data)?;
    Ok(format!("{d}\n"))
}

fn cmd_bound(a: &BoundArgs) -> Result<String, Failure> {
    let shape = parse_shape(&a.shape)?;
    let ls = a.landscape.landscape()?;
    let cache = BoundCache::new();
    let exact = match a.method {
        Method::Parti => parti_func_ub_with(&shape, a.c, a.m, &ls, a.clamp.into(), &cache),
        Method::Real => tree_pf_real(&shape, a.c, a.m, ls.ell, &cache),
        Method::Ordinal => tree_pf_ordinal(&shape, a.c, a.m, &ls.ordinal, &cache),
        Method::Nominal => tree_pf_nominal(&shape, a.c, a.m, &ls.nominal, &cache),
        Method::Log => {
            let v = log_parti_func_ub(&shape, a.c, a.m, &ls, &cache);
            return Ok(format!("ln={:.6} value={:e}\n", v.ln(), v.exp()));
        }
    };
    Ok(format!("{exact}\n"))
}

fn cmd_growth(a: &GrowthArgs) -> Result<String, Failure> {
    let shape = parse_shape(&a.shape)?;
    let ls = a.landscape.landscape()?;
    let cache = BoundCache::new();
    let v = log_growth_func_ub(&shape, a.n_classes, a.m, &ls, &cache);
    Ok(format!("ln={:.6} value={:.6e}\n", v.ln(), v.exp()))
}

fn cmd_grow(a: &GrowArgs) -> Result<String, Failure> {
    let d = a.data.load()?;
    let constraints = a.growth.constraints()?;
    let (train, test) = match a.train_fraction {
        Some(f) => {
            let (tr, te) = split_dataset(&d, f, a.seed).map_err(Failure::usage)?;
            (tr, Some(te))
        }
        None => (d, None),
    };
    let t = grow_greedy(&train, &constraints).map_err(Failure::data)?;
    let train_acc = t.accuracy(&train).map_err(Failure::data)?;
    let test_acc = match &test {
        Some(te) => Some(t.accuracy(te).map_err(Failure::data)?),
        None => None,
    };
    let row = vec![
        t.n_leaves().to_string(),
        t.height().to_string(),
        fmt3(train_acc),
        opt3(test_acc),
    ];
    Ok(format!(
        "# tree: {t}\n{}",
        render(&["leaves", "height", "train_acc", "test_acc"], &[row], Format::Csv)
    ))
}

fn cmd_prune(a: &PruneArgs) -> Result<String, Failure> {
    let model: Model = a.model.parse().map_err(Failure::usage)?;
    let d = a.data.load()?;
    let cfg = a.protocol.config(&a.growth, a.seed)?;
    let cache = BoundCache::new();
    let (train, test) = split_dataset(&d, cfg.train_fraction, a.seed).map_err(Failure::data)?;
    let start = Instant::now();
    let og = grow_greedy(&train, &cfg.growth).map_err(Failure::data)?;
    let rec = run_model(model, 0, &og, &train, &test, &cfg, a.seed, &cache).map_err(Failure::data)?;
    let seconds = if a.protocol.no_time {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    };
    let row = vec![
        model.name().to_string(),
        a.seed.to_string(),
        fmt3(rec.train_acc),
        opt3(rec.val_acc),
        fmt3(rec.test_acc),
        rec.leaves.to_string(),
        rec.height.to_string(),
        fmt3(seconds),
        opt3(rec.bound),
    ];
    let header = [
        "model", "seed", "train_acc", "val_acc", "test_acc", "leaves", "height", "time", "bound",
    ];
    Ok(format!("# tree: {}\n{}", rec.tree, render(&header, &[row], a.protocol.format)))
}

fn stat_cells(s: Option<Stat>) -> [String; 2] {
    match s {
        Some(s) => [fmt3(s.mean), fmt3(s.std)],
        None => [String::new(), String::new()],
    }
}

fn summary_row(s: &ModelSummary, no_time: bool) -> Vec<String> {
    let time = if no_time {
        Some(Stat { mean: 0.0, std: 0.0 })
    } else {
        Some(s.seconds)
    };
    let mut row = vec![s.model.name().to_string()];
    for st in [
        Some(s.train_acc),
        s.val_acc,
        Some(s.test_acc),
        Some(s.leaves),
        Some(s.height),
        time,
        s.bound,
    ] {
        row.extend(stat_cells(st));
    }
    row
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<String, Failure> {
    if a.runs == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    let d = a.data.load()?;
    let models = a
        .models
        .iter()
        .map(|m| m.parse::<Model>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::usage)?;
    let cfg = ExperimentConfig {
        n_runs: a.runs,
        models,
        ..a.protocol.config(&a.growth, a.seed)?
    };
    let cache = BoundCache::new();
    let result = run_experiment(&d, &cfg, &cache).map_err(Failure::data)?;
    let header = [
        "model",
        "train_acc",
        "train_acc_std",
        "val_acc",
        "val_acc_std",
        "test_acc",
        "test_acc_std",
        "leaves",
        "leaves_std",
        "height",
        "height_std",
        "time",
        "time_std",
        "bound",
        "bound_std",
    ];
    let rows: Vec<Vec<String>> = result
        .summaries
        .iter()
        .map(|s| summary_row(s, a.protocol.no_time))
        .collect();
    Ok(render(&header, &rows, a.protocol.format))
}

fn cmd_verify(a: &VerifyArgs) -> Result<String, Failure> {
    let checks = verify::run_all(a.instances, a.seed);
    let mut out = String::new();
    for c in &checks {
        let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        Ok(out)
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: out,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Vcdim(a) => cmd_vcdim(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Growth(a) => cmd_growth(a),
        Command::Grow(a) => cmd_grow(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) if f.code == EXIT_VERIFY => {
            print!("{}", f.message);
            ExitCode::from(f.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
