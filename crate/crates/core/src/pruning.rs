//! Pruning models: bound-based, reduced-error, oracle, cost-complexity and
//! Kearns-Mansour.

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{log_growth_func_ub, shawe_taylor_epsilon, BoundCache, BoundError, PriorConfig};
use crate::data::{shuffled_indices, Dataset};
use crate::induction::{grow_greedy, GrowthConstraints, InductionError};
use crate::tree::{majority_label, NodePath, PruneEdit, Tree, TreeError, TreeShape};

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("tree does not fit the sample's feature landscape: {0}")]
    Landscape(TreeError),
    #[error("scoring sample has a different feature landscape than the training sample")]
    LandscapeMismatch,
    #[error("{what} sample is empty")]
    EmptySample { what: &'static str },
    #[error("need at least 2 folds and at least as many examples as folds (folds = {folds}, m = {m})")]
    Folds { folds: usize, m: usize },
    #[error("the C grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// State of the tree after a pruning step (the input tree comes first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneStep {
    pub leaves: usize,
    pub train_errors: usize,
    /// Criterion value of the whole tree: ε for the bound model, scoring-set
    /// errors for reduced-error, `k + α L` for cost-complexity, training
    /// errors for Kearns-Mansour.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub tree: Tree,
    pub final_bound: Option<f64>,
    pub history: Vec<PruneStep>,
}

fn check_tree(t: &Tree, s: &Dataset) -> Result<(), PruneError> {
    if s.is_empty() {
        return Err(PruneError::EmptySample { what: "training" });
    }
    t.validate(&s.landscape).map_err(PruneError::Landscape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EditKind {
    Leaf,
    Right,
    Left,
}

struct Scored {
    tree: Tree,
    score: f64,
    kind: EditKind,
    path: NodePath,
}

/// Greedy loop shared by the bound and reduced-error models: try every
/// edit at every internal node, keep the best, accept if its score does not
/// exceed the current one. Ties prefer fewer leaves, then leaf over right
/// over left, then the shallowest node, then the leftmost.
fn greedy_prune(
    t: &Tree,
    s_train: &Dataset,
    score: impl Fn(&Tree) -> Result<f64, PruneError> + Sync,
) -> Result<(Tree, Vec<PruneStep>, f64), PruneError> {
    let mut tree = t.collapse_dead_branches(s_train)?;
    let mut current = score(&tree)?;
    let mut history = vec![PruneStep {
        leaves: tree.n_leaves(),
        train_errors: tree.errors(s_train)?,
        score: current,
    }];
    while !tree.is_leaf() {
        let candidates: Vec<(NodePath, EditKind)> = tree
            .internal_paths()
            .into_iter()
            .flat_map(|p| [EditKind::Left, EditKind::Right, EditKind::Leaf].map(|k| (p.clone(), k)))
            .collect();
        let scored = candidates
            .into_par_iter()
            .map(|(path, kind)| {
                let edit = match kind {
                    EditKind::Left => PruneEdit::ReplaceWithLeft,
                    EditKind::Right => PruneEdit::ReplaceWithRight,
                    EditKind::Leaf => PruneEdit::ReplaceWithLeaf(s_train),
                };
                let tree = tree.prune_edit(&path, edit)?;
                let score = score(&tree)?;
                Ok(Scored {
                    tree,
                    score,
                    kind,
                    path,
                })
            })
            .collect::<Result<Vec<_>, PruneError>>()?;
        let best = scored
            .into_iter()
            .min_by(|a, b| {
                a.score
                    .total_cmp(&b.score)
                    .then(a.tree.n_leaves().cmp(&b.tree.n_leaves()))
                    .then(a.kind.cmp(&b.kind))
                    .then(a.path.depth().cmp(&b.path.depth()))
                    .then(a.path.cmp(&b.path))
            })
            .expect("internal node gives candidates");
        if best.score > current {
            break;
        }
        tree = best.tree;
        current = best.score;
        history.push(PruneStep {
            leaves: tree.n_leaves(),
            train_errors: tree.errors(s_train)?,
            score: current,
        });
    }
    Ok((tree, history, current))
}

/// Risk bound of `t` on sample `s` computed on the declared landscape.
pub fn tree_bound(t: &Tree, s: &Dataset, cfg: &PriorConfig, cache: &BoundCache) -> Result<f64, PruneError> {
    let k = t.errors(s)?;
    Ok(shawe_taylor_epsilon(
        s.len(),
        k,
        &t.shape(),
        &s.landscape,
        s.n_classes,
        cfg,
        cache,
    ))
}

/// Prunes by minimizing the sample-compression-free risk bound.
pub fn prune_bound(t: &Tree, s: &Dataset, cfg: &PriorConfig, cache: &BoundCache) -> Result<PruneResult, PruneError> {
    cfg.validate()?;
    check_tree(t, s)?;
    let (tree, history, bound) = greedy_prune(t, s, |c| tree_bound(c, s, cfg, cache))?;
    Ok(PruneResult {
        tree,
        final_bound: Some(bound),
        history,
    })
}

/// Same loop as [`prune_bound`] scored by the error count on `s_val`. Leaf
/// labels come from the majority of `s_train` at the node.
pub fn prune_re(t: &Tree, s_train: &Dataset, s_val: &Dataset) -> Result<PruneResult, PruneError> {
    check_tree(t, s_train)?;
    if s_val.is_empty() {
        return Err(PruneError::EmptySample { what: "validation" });
    }
    if s_val.landscape != s_train.landscape {
        return Err(PruneError::LandscapeMismatch);
    }
    let (tree, history, _) = greedy_prune(t, s_train, |c| Ok(c.errors(s_val)? as f64))?;
    Ok(PruneResult {
        tree,
        final_bound: None,
        history,
    })
}

/// Reduced-error pruning scored on the test sample.
pub fn prune_oracle(t: &Tree, s_train: &Dataset, s_test: &Dataset) -> Result<PruneResult, PruneError> {
    prune_re(t, s_train, s_test)
}

// ------------------------------------------------------- bottom-up pruning

struct Totals {
    leaves: usize,
    errors: usize,
    history: Vec<PruneStep>,
}

/// Called with (subtree, reaching indices, depth, leaf errors, subtree errors); true prunes.
type Decide<'a> = dyn FnMut(&Tree, &[usize], usize, usize, usize) -> Result<bool, PruneError> + 'a;

/// Errors of a majority leaf on `idx` and its label.
fn leaf_errors(t: &Tree, idx: &[usize], s: &Dataset) -> (usize, usize) {
    let label = majority_label(idx.iter().map(|&i| s.labels[i]), s.n_classes).unwrap_or_else(|| t.first_label());
    let errs = idx.iter().filter(|&&i| s.labels[i] != label).count();
    (label, errs)
}

fn split_idx(t: &Tree, idx: &[usize], s: &Dataset) -> Result<(Vec<usize>, Vec<usize>), TreeError> {
    let Tree::Node { rule, .. } = t else {
        unreachable!("called on internal nodes only")
    };
    let (mut l, mut r) = (Vec::new(), Vec::new());
    for &i in idx {
        if rule.goes_left(&s.examples[i])? {
            l.push(i);
        } else {
            r.push(i);
        }
    }
    Ok((l, r))
}

/// Post-order pass: after the children are pruned, `decide(node, idx,
/// depth, k_n, k_tn)` says whether the subtree collapses to a majority leaf.
/// Returns the new subtree and its training errors.
fn bottom_up(
    t: &Tree,
    idx: &[usize],
    depth: usize,
    s: &Dataset,
    totals: &mut Totals,
    score: &dyn Fn(&Totals) -> f64,
    decide: &mut Decide<'_>,
) -> Result<(Tree, usize), PruneError> {
    let Tree::Node { rule, left, right } = t else {
        let label = t.first_label();
        let errs = idx.iter().filter(|&&i| s.labels[i] != label).count();
        return Ok((t.clone(), errs));
    };
    let (li, ri) = split_idx(t, idx, s)?;
    let (l, le) = bottom_up(left, &li, depth + 1, s, totals, score, decide)?;
    let (r, re) = bottom_up(right, &ri, depth + 1, s, totals, score, decide)?;
    let node = Tree::node(*rule, l, r);
    let k_tn = le + re;
    let (label, k_n) = leaf_errors(&node, idx, s);
    if decide(&node, idx, depth, k_n, k_tn)? {
        totals.leaves -= node.n_leaves() - 1;
        totals.errors = totals.errors + k_n - k_tn;
        totals.history.push(PruneStep {
            leaves: totals.leaves,
            train_errors: totals.errors,
            score: score(totals),
        });
        Ok((Tree::leaf(label), k_n))
    } else {
        Ok((node, k_tn))
    }
}

fn run_bottom_up(
    t: &Tree,
    s: &Dataset,
    score: &dyn Fn(&Totals) -> f64,
    decide: &mut Decide<'_>,
) -> Result<PruneResult, PruneError> {
    let all: Vec<usize> = (0..s.len()).collect();
    let mut totals = Totals {
        leaves: t.n_leaves(),
        errors: t.errors(s)?,
        history: Vec::new(),
    };
    let first = PruneStep {
        leaves: totals.leaves,
        train_errors: totals.errors,
        score: score(&totals),
    };
    totals.history.push(first);
    let (tree, _) = bottom_up(t, &all, 0, s, &mut totals, score, decide)?;
    Ok(PruneResult {
        tree,
        final_bound: None,
        history: totals.history,
    })
}

/// `(k_n - k_{t_n}) / (L_{t_n} - 1)` for an internal node.
fn critical_alpha(node: &Tree, k_n: usize, k_tn: usize) -> f64 {
    (k_n as f64 - k_tn as f64) / (node.n_leaves() - 1) as f64
}

/// Collapses, bottom-up, every subtree whose critical α is at most `alpha`.
pub fn prune_cc_alpha(t: &Tree, s: &Dataset, alpha: f64) -> Result<PruneResult, PruneError> {
    check_tree(t, s)?;
    let t = t.collapse_dead_branches(s)?;
    let score = move |tot: &Totals| tot.errors as f64 + alpha * tot.leaves as f64;
    run_bottom_up(&t, s, &score, &mut |node, _, _, k_n, k_tn| {
        Ok(critical_alpha(node, k_n, k_tn) <= alpha)
    })
}

/// Critical α of every internal node of the unpruned tree, sorted and
/// deduplicated; `[0]` for a leaf.
pub fn critical_alphas(t: &Tree, s: &Dataset) -> Result<Vec<f64>, PruneError> {
    let mut out = Vec::new();
    run_bottom_up(t, s, &|_| 0.0, &mut |node, _, _, k_n, k_tn| {
        out.push(critical_alpha(node, k_n, k_tn));
        Ok(false)
    })?;
    if out.is_empty() {
        out.push(0.0);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Fold assignment: a seeded shuffle cut into `folds` contiguous chunks.
fn folds_of(m: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let idx = shuffled_indices(m, seed);
    (0..folds)
        .map(|f| {
            let (a, b) = (f * m / folds, (f + 1) * m / folds);
            let mut v = idx[a..b].to_vec();
            v.sort_unstable();
            v
        })
        .collect()
}

fn fold_pair(s: &Dataset, val: &[usize]) -> (Dataset, Dataset) {
    let mut in_val = vec![false; s.len()];
    for &i in val {
        in_val[i] = true;
    }
    let train: Vec<usize> = (0..s.len()).filter(|&i| !in_val[i]).collect();
    (s.subset(&train), s.subset(val))
}

fn check_folds(s: &Dataset, folds: usize) -> Result<(), PruneError> {
    if folds < 2 || s.len() < folds {
        return Err(PruneError::Folds { folds, m: s.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub growth: GrowthConstraints,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            seed: 0,
            growth: GrowthConstraints::default(),
        }
    }
}

/// Runs `choose` on each fold (a tree grown on the other folds plus the
/// held-out fold) in parallel and returns the per-fold choices in order.
fn per_fold<T: Send>(
    s: &Dataset,
    cv: &CvConfig,
    choose: impl Fn(&Tree, &Dataset, &Dataset) -> Result<T, PruneError> + Sync,
) -> Result<Vec<T>, PruneError> {
    check_folds(s, cv.folds)?;
    folds_of(s.len(), cv.folds, cv.seed)
        .par_iter()
        .map(|val| {
            let (tr, va) = fold_pair(s, val);
            let t = grow_greedy(&tr, &cv.growth)?;
            choose(&t, &tr, &va)
        })
        .collect()
}

/// Value from `grid` whose pruned tree makes the fewest held-out errors;
/// ties go to the largest value.
fn best_on_fold(
    grid: &[f64],
    va: &Dataset,
    prune: impl Fn(f64) -> Result<Tree, PruneError>,
) -> Result<f64, PruneError> {
    let mut best = (usize::MAX, f64::NAN);
    for &g in grid {
        let e = prune(g)?.errors(va)?;
        if e <= best.0 {
            best = (e, g);
        }
    }
    Ok(best.1)
}

/// Cost-complexity pruning with α chosen by cross-validation: per fold the
/// critical α minimizing held-out error, averaged over folds.
pub fn prune_cc(t: &Tree, s: &Dataset, cv: &CvConfig) -> Result<(PruneResult, f64), PruneError> {
    check_tree(t, s)?;
    let chosen = per_fold(s, cv, |ft, tr, va| {
        let grid = critical_alphas(ft, tr)?;
        best_on_fold(&grid, va, |a| Ok(prune_cc_alpha(ft, tr, a)?.tree))
    })?;
    let alpha = chosen.iter().sum::<f64>() / chosen.len() as f64;
    Ok((prune_cc_alpha(t, s, alpha)?, alpha))
}

/// `10^-20, ..., 10^0`.
pub fn default_km_grid() -> Vec<f64> {
    (-20..=0).map(|e| 10f64.powi(e)).collect()
}

/// Penalty `C sqrt((ln τ_P(m_n) + ln τ_T(m_n) + ln(m/δ)) / m)` for a node at
/// `depth` whose subtree has `shape` and is reached by `m_n` of `m`
/// examples.
#[allow(clippy::too_many_arguments)]
pub fn km_alpha(
    c: f64,
    depth: usize,
    shape: &TreeShape,
    m_n: usize,
    m: usize,
    delta: f64,
    s: &Dataset,
    cache: &BoundCache,
) -> f64 {
    let ln_p = log_growth_func_ub(&TreeShape::caterpillar(depth), s.n_classes, m_n, &s.landscape, cache).ln();
    let ln_t = log_growth_func_ub(shape, s.n_classes, m_n, &s.landscape, cache).ln();
    let ln_m = (m as f64 / delta).ln();
    c * ((ln_p + ln_t + ln_m) / m as f64).sqrt()
}

/// Single bottom-up pass with a fixed constant `c`. Nodes no example
/// reaches are always pruned.
pub fn prune_km_with(t: &Tree, s: &Dataset, c: f64, delta: f64, cache: &BoundCache) -> Result<PruneResult, PruneError> {
    check_tree(t, s)?;
    let m = s.len();
    run_bottom_up(t, s, &|tot| tot.errors as f64, &mut |node, idx, depth, k_n, k_tn| {
        if idx.is_empty() {
            return Ok(true);
        }
        let a = km_alpha(c, depth, &node.shape(), idx.len(), m, delta, s, cache);
        Ok(k_tn as f64 + a >= k_n as f64)
    })
}

/// Kearns-Mansour pruning with `C` chosen by cross-validation over `grid`;
/// fold winners are averaged in log10. Returns the result and the chosen C.
pub fn prune_km(
    t: &Tree,
    s: &Dataset,
    grid: &[f64],
    delta: f64,
    cv: &CvConfig,
    cache: &BoundCache,
) -> Result<(PruneResult, f64), PruneError> {
    check_tree(t, s)?;
    if grid.is_empty() {
        return Err(PruneError::EmptyGrid);
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let chosen = per_fold(s, cv, |ft, tr, va| {
        best_on_fold(&grid, va, |c| Ok(prune_km_with(ft, tr, c, delta, cache)?.tree))
    })?;
    let c = 10f64.powf(chosen.iter().map(|c| c.log10()).sum::<f64>() / chosen.len() as f64);
    Ok((prune_km_with(t, s, c, delta, cache)?, c))
}
