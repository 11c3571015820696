//! Greedy top-down tree growth with the Gini impurity.

use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::tree::{majority_label, DecisionRule, Direction, NodePath, Tree, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum InductionError {
    #[error("cannot grow a tree on an empty sample")]
    EmptySample,
    #[error("split search needs at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("max_leaves must be at least 1")]
    InvalidConstraints,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Per-class example counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl ClassCounts {
    pub fn zeros(n_classes: usize) -> Self {
        ClassCounts {
            counts: vec![0; n_classes],
            total: 0,
        }
    }

    pub fn from_labels(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Self {
        let mut z = Self::zeros(n_classes);
        for y in labels {
            z.add(y);
        }
        z
    }

    pub fn add(&mut self, label: usize) {
        self.counts[label] += 1;
        self.total += 1;
    }

    pub fn remove(&mut self, label: usize) {
        self.counts[label] -= 1;
        self.total -= 1;
    }

    pub fn gini(&self) -> f64 {
        gini(&self.counts)
    }
}

/// `1 - Σ (z_a / m)^2`, and 0 for an empty count vector.
pub fn gini(z: &[usize]) -> f64 {
    let m: usize = z.iter().sum();
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    1.0 - z.iter().map(|&a| (a as f64 / m).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthConstraints {
    pub max_leaves: usize,
    pub max_height: Option<usize>,
    /// Score candidates by size-weighted child impurity. When false the
    /// plain sum of child impurities is used, which can stall on impure
    /// leaves whose every split has a larger summed impurity.
    pub weighted: bool,
}

impl Default for GrowthConstraints {
    fn default() -> Self {
        GrowthConstraints {
            max_leaves: 75,
            max_height: None,
            weighted: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub rule: DecisionRule,
    pub g_left: f64,
    pub g_right: f64,
    pub score: f64,
}

fn score(zl: &ClassCounts, zr: &ClassCounts, weighted: bool) -> (f64, f64, f64) {
    let (gl, gr) = (zl.gini(), zr.gini());
    let s = if weighted {
        (zl.total as f64 * gl + zr.total as f64 * gr) / (zl.total + zr.total) as f64
    } else {
        gl + gr
    };
    (gl, gr, s)
}

/// Best split of the examples `idx` of `d`, or `None` when no rule sends at
/// least one example to each side. Within a feature a later candidate wins
/// ties; across features the lowest global feature index wins.
pub fn find_best_split(d: &Dataset, idx: &[usize], weighted: bool) -> Result<Option<Split>, InductionError> {
    if idx.len() < 2 {
        return Err(InductionError::TooFewExamples(idx.len()));
    }
    let ls = &d.landscape;
    let n_features = ls.n_features();
    let per_feature: Vec<Option<Split>> = (0..n_features)
        .into_par_iter()
        .map(|f| {
            if f < ls.ell {
                best_ordered(d, idx, weighted, |i| d.examples[i].reals[f], |a, b| {
                    DecisionRule::Real {
                        feature: f,
                        threshold: 0.5 * (a + b),
                    }
                })
            } else if f < ls.ell + ls.omega() {
                let o = f - ls.ell;
                best_ordered(d, idx, weighted, |i| d.examples[i].ordinals[o] as f64, |a, _| {
                    DecisionRule::Ordinal {
                        feature: o,
                        threshold: a as u32,
                    }
                })
            } else {
                best_nominal(d, idx, weighted, f - ls.ell - ls.omega())
            }
        })
        .collect();
    let mut best: Option<Split> = None;
    for s in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| s.score < b.score) {
            best = Some(s);
        }
    }
    Ok(best)
}

fn best_ordered(
    d: &Dataset,
    idx: &[usize],
    weighted: bool,
    value: impl Fn(usize) -> f64,
    rule: impl Fn(f64, f64) -> DecisionRule,
) -> Option<Split> {
    let mut order: Vec<(f64, usize)> = idx.iter().map(|&i| (value(i), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut zl = ClassCounts::zeros(d.n_classes);
    let mut zr = ClassCounts::from_labels(idx.iter().map(|&i| d.labels[i]), d.n_classes);
    let mut best: Option<Split> = None;
    for j in 0..order.len() - 1 {
        let y = d.labels[order[j].1];
        zl.add(y);
        zr.remove(y);
        let (a, b) = (order[j].0, order[j + 1].0);
        if a == b {
            continue;
        }
        let (g_left, g_right, s) = score(&zl, &zr, weighted);
        if best.is_none_or(|bs| s <= bs.score) {
            best = Some(Split {
                rule: rule(a, b),
                g_left,
                g_right,
                score: s,
            });
        }
    }
    best
}

fn best_nominal(d: &Dataset, idx: &[usize], weighted: bool, f: usize) -> Option<Split> {
    let mut order: Vec<(u32, usize)> = idx.iter().map(|&i| (d.examples[i].nominals[f], i)).collect();
    order.sort_unstable();
    let all = ClassCounts::from_labels(idx.iter().map(|&i| d.labels[i]), d.n_classes);
    let mut best: Option<Split> = None;
    for block in order.chunk_by(|a, b| a.0 == b.0) {
        if block.len() == idx.len() {
            break;
        }
        let zl = ClassCounts::from_labels(block.iter().map(|&(_, i)| d.labels[i]), d.n_classes);
        let mut zr = all.clone();
        for &(_, i) in block {
            zr.remove(d.labels[i]);
        }
        let (g_left, g_right, s) = score(&zl, &zr, weighted);
        if best.is_none_or(|bs| s <= bs.score) {
            best = Some(Split {
                rule: DecisionRule::Nominal {
                    feature: f,
                    category: block[0].0,
                },
                g_left,
                g_right,
                score: s,
            });
        }
    }
    best
}

/// One state of the growth sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthStep {
    pub leaves: usize,
    pub train_errors: usize,
}

struct Candidate {
    path: NodePath,
    idx: Vec<usize>,
    split: Split,
    seq: usize,
}

pub fn grow_greedy(d: &Dataset, constraints: &GrowthConstraints) -> Result<Tree, InductionError> {
    grow_greedy_traced(d, constraints).map(|(t, _)| t)
}

/// Grows a tree and records the leaf count and training errors after every
/// accepted split (the initial leaf first).
pub fn grow_greedy_traced(
    d: &Dataset,
    constraints: &GrowthConstraints,
) -> Result<(Tree, Vec<GrowthStep>), InductionError> {
    if d.is_empty() {
        return Err(InductionError::EmptySample);
    }
    if constraints.max_leaves == 0 {
        return Err(InductionError::InvalidConstraints);
    }
    let all: Vec<usize> = (0..d.len()).collect();
    let label = |idx: &[usize]| majority_label(idx.iter().map(|&i| d.labels[i]), d.n_classes).unwrap_or(0);
    let mut tree = Tree::leaf(label(&all));
    let mut trace = vec![GrowthStep {
        leaves: 1,
        train_errors: tree.errors(d)?,
    }];
    let height_ok = |depth: usize| constraints.max_height.is_none_or(|h| depth < h);

    let mut open: Vec<Candidate> = Vec::new();
    let mut seq = 0;
    if all.len() >= 2 && height_ok(0) {
        if let Some(split) = find_best_split(d, &all, constraints.weighted)? {
            open.push(Candidate {
                path: NodePath::root(),
                idx: all,
                split,
                seq,
            });
            seq += 1;
        }
    }

    while !open.is_empty() && trace.last().unwrap().train_errors > 0 && tree.n_leaves() < constraints.max_leaves {
        let pos = (0..open.len())
            .min_by(|&a, &b| {
                open[a]
                    .split
                    .score
                    .total_cmp(&open[b].split.score)
                    .then(open[a].seq.cmp(&open[b].seq))
            })
            .unwrap();
        let cand = open.swap_remove(pos);
        let (mut li, mut ri) = (Vec::new(), Vec::new());
        for &i in &cand.idx {
            if cand.split.rule.goes_left(&d.examples[i])? {
                li.push(i);
            } else {
                ri.push(i);
            }
        }
        tree = tree.replace_at(
            &cand.path,
            Tree::node(cand.split.rule, Tree::leaf(label(&li)), Tree::leaf(label(&ri))),
        )?;
        trace.push(GrowthStep {
            leaves: tree.n_leaves(),
            train_errors: tree.errors(d)?,
        });
        let depth = cand.path.depth() + 1;
        for (dir, idx, g) in [
            (Direction::Left, li, cand.split.g_left),
            (Direction::Right, ri, cand.split.g_right),
        ] {
            if idx.len() < 2 || !height_ok(depth) {
                continue;
            }
            if let Some(split) = find_best_split(d, &idx, constraints.weighted)? {
                if split.score < g {
                    open.push(Candidate {
                        path: cand.path.child(dir),
                        idx,
                        split,
                        seq,
                    });
                    seq += 1;
                }
            }
        }
    }
    Ok((tree, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, FeatureLandscape};
    use approx::assert_relative_eq;

    fn real_data(xs: &[f64], ys: &[usize], n: usize) -> Dataset {
        let ex = xs.iter().map(|&x| Example::real(vec![x])).collect();
        Dataset::new(FeatureLandscape::real(1), ex, ys.to_vec(), n).unwrap()
    }

    #[test]
    fn gini_examples() {
        assert_relative_eq!(gini(&[3, 3]), 0.5);
        assert_relative_eq!(gini(&[4, 0]), 0.0);
        assert_relative_eq!(gini(&[2, 1]), 4.0 / 9.0);
        assert_eq!(gini(&[0, 0]), 0.0);
    }

    #[test]
    fn two_points_split_at_midpoint() {
        let d = real_data(&[1.0, 3.0], &[0, 1], 2);
        let s = find_best_split(&d, &[0, 1], false).unwrap().unwrap();
        assert_eq!(
            s.rule,
            DecisionRule::Real {
                feature: 0,
                threshold: 2.0
            }
        );
        assert_eq!((s.g_left, s.g_right), (0.0, 0.0));
        assert!(find_best_split(&d, &[0], false).is_err());
    }

    #[test]
    fn nominal_split_finds_pure_category() {
        let ls = FeatureLandscape::new(0, vec![], vec![3]).unwrap();
        let ex = [1, 1, 2, 2, 3, 3]
            .iter()
            .map(|&v| Example {
                reals: vec![],
                ordinals: vec![],
                nominals: vec![v],
            })
            .collect();
        let d = Dataset::new(ls, ex, vec![0, 0, 1, 1, 0, 0], 2).unwrap();
        let s = find_best_split(&d, &(0..6).collect::<Vec<_>>(), false).unwrap().unwrap();
        assert_eq!(
            s.rule,
            DecisionRule::Nominal {
                feature: 0,
                category: 2
            }
        );
        assert_eq!((s.g_left, s.g_right), (0.0, 0.0));
    }

    #[test]
    fn identical_examples_have_no_split() {
        let d = real_data(&[1.0, 1.0, 1.0], &[0, 1, 0], 2);
        assert_eq!(find_best_split(&d, &[0, 1, 2], false).unwrap(), None);
        let t = grow_greedy(&d, &GrowthConstraints::default()).unwrap();
        assert_eq!(t, Tree::leaf(0));
    }

    #[test]
    fn later_candidate_wins_within_feature() {
        // splits after x=1 and after x=3 both leave one impure side
        let d = real_data(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 1, 0], 2);
        let s = find_best_split(&d, &[0, 1, 2, 3], false).unwrap().unwrap();
        assert_eq!(
            s.rule,
            DecisionRule::Real {
                feature: 0,
                threshold: 3.5
            }
        );
    }

    #[test]
    fn growth_respects_constraints() {
        let d = real_data(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0, 1, 0, 1, 0], 2);
        let one = GrowthConstraints {
            max_leaves: 1,
            ..Default::default()
        };
        assert_eq!(grow_greedy(&d, &one).unwrap(), Tree::leaf(0));
        let (t, trace) = grow_greedy_traced(&d, &GrowthConstraints::default()).unwrap();
        assert_eq!(t.errors(&d).unwrap(), 0);
        assert_eq!(t.n_leaves(), 5);
        for w in trace.windows(2) {
            assert_eq!(w[1].leaves, w[0].leaves + 1);
            assert!(w[1].train_errors <= w[0].train_errors);
        }
        let literal = GrowthConstraints {
            weighted: false,
            ..Default::default()
        };
        // {0,1,0} has Gini 4/9 while its best split sums to 1/2
        assert!(grow_greedy(&d, &literal).unwrap().errors(&d).unwrap() > 0);
        let short = GrowthConstraints {
            max_height: Some(1),
            ..Default::default()
        };
        assert_eq!(grow_greedy(&d, &short).unwrap().height(), 1);
        assert!(grow_greedy(&real_data(&[], &[], 2), &one).is_err());
    }
}
