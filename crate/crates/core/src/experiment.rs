//! Repeated train/test runs comparing the pruning models.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{BoundCache, PriorConfig};
use crate::data::{split_dataset, DataError, Dataset};
use crate::induction::{grow_greedy, GrowthConstraints, InductionError};
use crate::pruning::{
    default_km_grid, prune_bound, prune_cc, prune_km, prune_oracle, prune_re, CvConfig, PruneError,
    PruneResult, PruneStep,
};
use crate::tree::{Tree, TreeError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("n_runs must be at least 1")]
    NoRuns,
    #[error("no models selected")]
    NoModels,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    Og,
    Cc,
    Re,
    Km,
    Ours,
    Oracle,
}

impl Model {
    pub const ALL: [Model; 6] = [Model::Og, Model::Cc, Model::Re, Model::Km, Model::Ours, Model::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Model::Og => "OG",
            Model::Cc => "CC",
            Model::Re => "RE",
            Model::Km => "KM",
            Model::Ours => "Ours",
            Model::Oracle => "Oracle",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model `{s}` (expected og, cc, re, km, ours or oracle)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_runs: usize,
    pub train_fraction: f64,
    pub growth: GrowthConstraints,
    pub models: Vec<Model>,
    pub prior: PriorConfig,
    pub cc_folds: usize,
    pub km_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_runs: 25,
            train_fraction: 0.85,
            growth: GrowthConstraints::default(),
            models: Model::ALL.to_vec(),
            prior: PriorConfig::default(),
            cc_folds: 5,
            km_grid: default_km_grid(),
            seed: 0,
        }
    }
}

/// Outcome of one model on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub model: Model,
    pub tree: Tree,
    pub train_acc: f64,
    /// Only the reduced-error model holds out a validation set.
    pub val_acc: Option<f64>,
    pub test_acc: f64,
    pub leaves: usize,
    pub height: usize,
    pub seconds: f64,
    pub bound: Option<f64>,
    pub history: Vec<PruneStep>,
}

/// Mean and population standard deviation of a metric over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Stat { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: Model,
    pub train_acc: Stat,
    pub val_acc: Option<Stat>,
    pub test_acc: Stat,
    pub leaves: Stat,
    pub height: Stat,
    pub seconds: Stat,
    pub bound: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Records in run order, then model order within a run.
    pub records: Vec<RunRecord>,
    pub summaries: Vec<ModelSummary>,
}

impl ExperimentResult {
    pub fn summary(&self, model: Model) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }

    pub fn records_of(&self, model: Model) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.model == model)
    }
}

/// Runs one model on a fixed split. `og` is the tree grown on `train`.
#[allow(clippy::too_many_arguments)]
pub fn run_model(
    model: Model,
    run: usize,
    og: &Tree,
    train: &Dataset,
    test: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
    cache: &BoundCache,
) -> Result<RunRecord, ExperimentError> {
    let cv = CvConfig {
        folds: cfg.cc_folds,
        seed,
        growth: cfg.growth,
    };
    let start = Instant::now();
    let (result, fit_set, val_acc): (PruneResult, Dataset, Option<f64>) = match model {
        Model::Og => (
            PruneResult {
                tree: og.clone(),
                final_bound: None,
                history: Vec::new(),
            },
            train.clone(),
            None,
        ),
        Model::Cc => (prune_cc(og, train, &cv)?.0, train.clone(), None),
        Model::Km => (
            prune_km(og, train, &cfg.km_grid, cfg.prior.delta, &cv, cache)?.0,
            train.clone(),
            None,
        ),
        Model::Ours => (prune_bound(og, train, &cfg.prior, cache)?, train.clone(), None),
        Model::Oracle => (prune_oracle(og, train, test)?, train.clone(), None),
        Model::Re => {
            // validation set as large as the test set, carved from train
            let frac = 1.0 - test.len() as f64 / train.len() as f64;
            let (sub, val) = split_dataset(train, frac, seed)?;
            let t = grow_greedy(&sub, &cfg.growth)?;
            let r = prune_re(&t, &sub, &val)?;
            let acc = r.tree.accuracy(&val)?;
            (r, sub, Some(acc))
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let bound = match model {
        Model::Ours => result.final_bound,
        _ => None,
    };
    Ok(RunRecord {
        run,
        model,
        train_acc: result.tree.accuracy(&fit_set)?,
        val_acc,
        test_acc: result.tree.accuracy(test)?,
        leaves: result.tree.n_leaves(),
        height: result.tree.height(),
        seconds,
        bound,
        history: result.history,
        tree: result.tree,
    })
}

/// Runs every configured model on `n_runs` seeded splits (seed `base + run`).
pub fn run_experiment(
    d: &Dataset,
    cfg: &ExperimentConfig,
    cache: &BoundCache,
) -> Result<ExperimentResult, ExperimentError> {
    if cfg.n_runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    if cfg.models.is_empty() {
        return Err(ExperimentError::NoModels);
    }
    cfg.prior.validate().map_err(PruneError::from)?;
    let per_run: Vec<Vec<RunRecord>> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.seed.wrapping_add(run as u64);
            let (train, test) = split_dataset(d, cfg.train_fraction, seed)?;
            let og = grow_greedy(&train, &cfg.growth)?;
            cfg.models
                .iter()
                .map(|&m| run_model(m, run, &og, &train, &test, cfg, seed, cache))
                .collect()
        })
        .collect::<Result<_, ExperimentError>>()?;
    let records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    let summaries = cfg
        .models
        .iter()
        .map(|&m| summarize(m, records.iter().filter(|r| r.model == m)))
        .collect();
    Ok(ExperimentResult { records, summaries })
}

fn summarize<'a>(model: Model, recs: impl Iterator<Item = &'a RunRecord>) -> ModelSummary {
    let recs: Vec<&RunRecord> = recs.collect();
    let col = |f: &dyn Fn(&RunRecord) -> f64| Stat::of(&recs.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap();
    let opt = |f: &dyn Fn(&RunRecord) -> Option<f64>| Stat::of(&recs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    ModelSummary {
        model,
        train_acc: col(&|r| r.train_acc),
        val_acc: opt(&|r| r.val_acc),
        test_acc: col(&|r| r.test_acc),
        leaves: col(&|r| r.leaves as f64),
        height: col(&|r| r.height as f64),
        seconds: col(&|r| r.seconds),
        bound: opt(&|r| r.bound),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, FeatureLandscape};

    fn toy() -> Dataset {
        let xs: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let ys: Vec<usize> = (0..60).map(|i| usize::from(i >= 30) ^ usize::from(i % 11 == 5)).collect();
        let ex = xs.iter().map(|&x| Example::real(vec![x])).collect();
        Dataset::new(FeatureLandscape::real(1), ex, ys, 2).unwrap()
    }

    #[test]
    fn model_names_round_trip() {
        for m in Model::ALL {
            assert_eq!(m.name().to_lowercase().parse::<Model>(), Ok(m));
        }
        assert!("cart".parse::<Model>().is_err());
    }

    #[test]
    fn stat_of_constant_has_zero_std() {
        let s = Stat::of(&[2.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 0.0));
        assert_eq!(Stat::of(&[]), None);
    }

    #[test]
    fn single_run_has_zero_spread() {
        let cfg = ExperimentConfig {
            n_runs: 1,
            ..Default::default()
        };
        let cache = BoundCache::new();
        let r = run_experiment(&toy(), &cfg, &cache).unwrap();
        assert_eq!(r.summaries.len(), 6);
        for s in &r.summaries {
            assert_eq!(s.test_acc.std, 0.0);
            assert_eq!(s.leaves.std, 0.0);
        }
        assert!(r.summary(Model::Ours).unwrap().bound.is_some());
        assert!(r.summary(Model::Og).unwrap().bound.is_none());
        assert!(r.summary(Model::Re).unwrap().val_acc.is_some());
        let oracle = r.summary(Model::Oracle).unwrap().test_acc.mean;
        for s in &r.summaries {
            if s.model != Model::Re {
                assert!(oracle >= s.test_acc.mean);
            }
        }
    }

    #[test]
    fn rejects_empty_config() {
        let cache = BoundCache::new();
        let cfg = ExperimentConfig {
            n_runs: 0,
            ..Default::default()
        };
        assert!(matches!(run_experiment(&toy(), &cfg, &cache), Err(ExperimentError::NoRuns)));
    }
}
