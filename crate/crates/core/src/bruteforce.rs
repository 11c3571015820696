//! Exhaustive enumeration of realizable partitions on tiny samples, and the
//! worst-case sample constructions for stumps on real-valued features.
//!
//! Examples are identified by bit positions in a `u64` mask. A partition is
//! stored as the sorted list of its (non-empty) block masks, which makes set
//! membership independent of example order and block order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::data::{Dataset, Example, FeatureLandscape};
use crate::tree::TreeShape;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BruteForceError {
    #[error("enumeration limited to m <= {max_m} examples and L <= {max_leaves} leaves (got m = {m}, L = {leaves})")]
    TooLarge {
        m: usize,
        leaves: usize,
        max_m: usize,
        max_leaves: usize,
    },
    #[error("no worst-case sample construction for m = {m}, ell = {ell}")]
    Unsupported { m: usize, ell: usize },
}

pub const MAX_TREE_EXAMPLES: usize = 8;
pub const MAX_TREE_LEAVES: usize = 4;
const MAX_STUMP_EXAMPLES: usize = 64;

/// Distinct partitions of a sample, each a sorted list of block masks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RealizedPartitionSet {
    partitions: BTreeSet<Vec<u64>>,
}

impl RealizedPartitionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a partition given by its blocks; empty blocks are ignored.
    pub fn insert(&mut self, blocks: &[u64]) -> bool {
        let mut p: Vec<u64> = blocks.iter().copied().filter(|&b| b != 0).collect();
        p.sort_unstable();
        self.partitions.insert(p)
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn contains(&self, blocks: &[u64]) -> bool {
        let mut p: Vec<u64> = blocks.iter().copied().filter(|&b| b != 0).collect();
        p.sort_unstable();
        self.partitions.contains(&p)
    }

    /// Number of stored partitions per part count.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for p in &self.partitions {
            *h.entry(p.len()).or_insert(0) += 1;
        }
        h
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<u64>> {
        self.partitions.iter()
    }

    /// Blocks as lists of example indices.
    pub fn as_index_blocks(&self) -> Vec<Vec<Vec<usize>>> {
        self.partitions
            .iter()
            .map(|p| {
                p.iter()
                    .map(|&b| (0..64).filter(|i| b >> i & 1 == 1).collect())
                    .collect()
            })
            .collect()
    }
}

fn full_mask(m: usize) -> u64 {
    if m == 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

/// Left-going masks of every admissible rule on the sample, both signs.
/// Real thresholds are taken below the minimum and between consecutive
/// distinct values, which covers every routing a real threshold can induce.
pub fn rule_masks(d: &Dataset) -> BTreeSet<u64> {
    let m = d.len();
    let full = full_mask(m);
    let mut masks = BTreeSet::new();
    let mut add = |mask: u64| {
        masks.insert(mask);
        masks.insert(!mask & full);
    };
    let mask_of = |pred: &dyn Fn(&Example) -> bool| {
        d.examples
            .iter()
            .enumerate()
            .filter(|(_, x)| pred(x))
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    };
    for f in 0..d.landscape.ell {
        let mut values: Vec<f64> = d.examples.iter().map(|x| x.reals[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        add(0);
        for v in values {
            add(mask_of(&|x| x.reals[f] <= v));
        }
    }
    for (f, &o) in d.landscape.ordinal.iter().enumerate() {
        for theta in 1..o as u32 {
            add(mask_of(&|x| x.ordinals[f] <= theta));
        }
    }
    for (f, &n) in d.landscape.nominal.iter().enumerate() {
        for cat in 1..=n as u32 {
            add(mask_of(&|x| x.nominals[f] == cat));
        }
    }
    masks
}

/// Every nontrivial 2-partition a single rule induces on the sample.
pub fn enumerate_stump_partitions(d: &Dataset) -> RealizedPartitionSet {
    assert!(d.len() <= MAX_STUMP_EXAMPLES, "stump enumeration supports m <= 64");
    let full = full_mask(d.len());
    let mut out = RealizedPartitionSet::new();
    for mask in rule_masks(d) {
        if mask != 0 && mask != full {
            out.insert(&[mask, !mask & full]);
        }
    }
    out
}

/// Every `c`-partition realizable by some tree of the given shape: rules
/// route examples to leaves, then leaves sharing a label merge.
pub fn enumerate_tree_partitions(
    shape: &TreeShape,
    d: &Dataset,
    c: usize,
) -> Result<RealizedPartitionSet, BruteForceError> {
    let m = d.len();
    if m > MAX_TREE_EXAMPLES || shape.leaves() > MAX_TREE_LEAVES {
        return Err(BruteForceError::TooLarge {
            m,
            leaves: shape.leaves(),
            max_m: MAX_TREE_EXAMPLES,
            max_leaves: MAX_TREE_LEAVES,
        });
    }
    let masks: Vec<u64> = rule_masks(d).into_iter().collect();
    let mut memo = HashMap::new();
    let leaf_blocks = leaf_block_sets(shape, full_mask(m), &masks, &mut memo);
    let mut out = RealizedPartitionSet::new();
    for blocks in &leaf_blocks {
        for_each_merge(blocks, c, &mut |p| {
            out.insert(p);
        });
    }
    Ok(out)
}

/// Distinct sets of non-empty leaf blocks the shape can produce on `subset`.
fn leaf_block_sets(
    shape: &TreeShape,
    subset: u64,
    masks: &[u64],
    memo: &mut HashMap<(String, u64), BTreeSet<Vec<u64>>>,
) -> BTreeSet<Vec<u64>> {
    let Some((l, r)) = shape.children() else {
        let blocks = if subset == 0 { vec![] } else { vec![subset] };
        return BTreeSet::from([blocks]);
    };
    let key = (shape.to_string(), subset);
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let lefts: BTreeSet<u64> = masks.iter().map(|&mk| mk & subset).collect();
    let mut out = BTreeSet::new();
    for left in lefts {
        let ls = leaf_block_sets(l, left, masks, memo);
        let rs = leaf_block_sets(r, subset & !left, masks, memo);
        for a in &ls {
            for b in &rs {
                let mut blocks: Vec<u64> = a.iter().chain(b).copied().collect();
                blocks.sort_unstable();
                out.insert(blocks);
            }
        }
    }
    memo.insert(key, out.clone());
    out
}

/// Calls `f` on every way of grouping `blocks` into exactly `c` unions.
fn for_each_merge(blocks: &[u64], c: usize, f: &mut impl FnMut(&[u64])) {
    fn go(blocks: &[u64], i: usize, groups: &mut Vec<u64>, c: usize, f: &mut impl FnMut(&[u64])) {
        let remaining = blocks.len() - i;
        if groups.len() + remaining < c {
            return;
        }
        if i == blocks.len() {
            if groups.len() == c {
                f(groups);
            }
            return;
        }
        for g in 0..groups.len() {
            groups[g] |= blocks[i];
            go(blocks, i + 1, groups, c, f);
            groups[g] &= !blocks[i];
        }
        if groups.len() < c {
            groups.push(blocks[i]);
            go(blocks, i + 1, groups, c, f);
            groups.pop();
        }
    }
    go(blocks, 0, &mut Vec::new(), c, f);
}

/// Permutation matrices witnessing stump tightness for m = 1..7. Row `i`
/// lists the examples (1-based) in increasing order of feature `i`.
pub fn a4_matrix(m: usize) -> Option<&'static [&'static [u8]]> {
    const M1: &[&[u8]] = &[&[1]];
    const M2: &[&[u8]] = &[&[1, 2]];
    const M3: &[&[u8]] = &[&[1, 2, 3], &[1, 3, 2]];
    const M4: &[&[u8]] = &[&[1, 2, 4, 3], &[2, 3, 1, 4], &[1, 3, 2, 4]];
    const M5: &[&[u8]] = &[
        &[1, 2, 3, 5, 4],
        &[2, 3, 4, 1, 5],
        &[3, 4, 1, 2, 5],
        &[1, 3, 5, 2, 4],
        &[1, 4, 2, 3, 5],
    ];
    const M6: &[&[u8]] = &[
        &[1, 2, 3, 6, 5, 4],
        &[2, 3, 4, 1, 6, 5],
        &[3, 4, 5, 2, 1, 6],
        &[1, 3, 6, 5, 4, 2],
        &[3, 5, 2, 1, 6, 4],
        &[5, 1, 4, 3, 2, 6],
        &[1, 4, 3, 6, 2, 5],
        &[3, 6, 5, 1, 2, 4],
        &[1, 2, 5, 3, 4, 6],
        &[1, 3, 5, 2, 4, 6],
    ];
    const M7: &[&[u8]] = &[
        &[1, 2, 3, 4, 5, 6, 7],
        &[2, 3, 4, 7, 1, 5, 6],
        &[3, 4, 7, 6, 2, 1, 5],
        &[4, 7, 6, 2, 5, 1, 3],
        &[1, 4, 3, 7, 6, 2, 5],
        &[5, 7, 4, 3, 2, 1, 6],
        &[3, 7, 5, 6, 1, 2, 4],
        &[2, 7, 4, 1, 6, 3, 5],
        &[2, 6, 3, 7, 1, 4, 5],
        &[1, 7, 3, 5, 2, 4, 6],
        &[3, 6, 7, 1, 2, 4, 5],
        &[1, 4, 7, 6, 2, 3, 5],
        &[1, 2, 7, 3, 4, 5, 6],
        &[1, 5, 7, 2, 3, 4, 6],
        &[1, 6, 7, 2, 3, 4, 5],
        &[2, 3, 7, 5, 1, 4, 6],
        &[2, 5, 7, 4, 3, 6, 1],
        &[2, 6, 7, 1, 3, 4, 5],
    ];
    match m {
        1 => Some(M1),
        2 => Some(M2),
        3 => Some(M3),
        4 => Some(M4),
        5 => Some(M5),
        6 => Some(M6),
        7 => Some(M7),
        _ => None,
    }
}

/// Real-valued sample whose feature `i` ranks the examples as row `i` of
/// `rows`: the example at position `j` (1-based) gets value `j`.
pub fn sample_from_permutations(m: usize, rows: &[Vec<usize>]) -> Dataset {
    let mut examples = vec![Example::real(vec![0.0; rows.len()]); m];
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), m, "each row must be a permutation of 1..=m");
        for (j, &e) in row.iter().enumerate() {
            examples[e - 1].reals[i] = (j + 1) as f64;
        }
    }
    Dataset::new(FeatureLandscape::real(rows.len()), examples, vec![0; m], 1)
        .expect("permutation sample is well formed")
}

/// Sample built from the first `ell` rows of the m = 1..7 matrices, padded
/// with identity permutations when `ell` exceeds the number of rows.
pub fn a4_sample(m: usize, ell: usize) -> Result<Dataset, BruteForceError> {
    let matrix = a4_matrix(m).ok_or(BruteForceError::Unsupported { m, ell })?;
    if ell == 0 {
        return Err(BruteForceError::Unsupported { m, ell });
    }
    let rows: Vec<Vec<usize>> = (0..ell)
        .map(|i| match matrix.get(i) {
            Some(row) => row.iter().map(|&v| v as usize).collect(),
            None => (1..=m).collect(),
        })
        .collect();
    Ok(sample_from_permutations(m, &rows))
}

/// Block construction for `2ℓ <= m`: row `i` is `i+1, ..., i+ℓ`, then
/// `2ℓ+1, ..., m`, then `2ℓ, ..., ℓ+1` shifted `i` steps left in the cyclic
/// sequence `1, ..., 2ℓ`.
pub fn a2_sample(m: usize, ell: usize) -> Result<Dataset, BruteForceError> {
    if ell == 0 || 2 * ell > m {
        return Err(BruteForceError::Unsupported { m, ell });
    }
    let two_l = 2 * ell;
    let rows: Vec<Vec<usize>> = (0..ell)
        .map(|i| {
            let left = (0..ell).map(|j| i + j + 1);
            let middle = two_l + 1..=m;
            let right = (0..ell).map(|j| (two_l + i - j - 1) % two_l + 1);
            left.chain(middle).chain(right).collect()
        })
        .collect();
    Ok(sample_from_permutations(m, &rows))
}

/// Worst-case sample for stumps: the block construction when `2ℓ <= m`,
/// the explicit matrices when `m <= 7`.
pub fn appendix_sample(m: usize, ell: usize) -> Result<Dataset, BruteForceError> {
    if ell >= 1 && 2 * ell <= m {
        a2_sample(m, ell)
    } else if (1..=7).contains(&m) {
        a4_sample(m, ell)
    } else {
        Err(BruteForceError::Unsupported { m, ell })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::stirling2;

    fn nominal_sample(values: &[u32], k: usize) -> Dataset {
        let ls = FeatureLandscape::new(0, vec![], vec![k]).unwrap();
        let examples = values
            .iter()
            .map(|&v| Example {
                reals: vec![],
                ordinals: vec![],
                nominals: vec![v],
            })
            .collect();
        Dataset::new(ls, examples, vec![0; values.len()], 1).unwrap()
    }

    #[test]
    fn a4_samples_are_tight() {
        assert_eq!(enumerate_stump_partitions(&a4_sample(4, 3).unwrap()).len(), 7);
        assert_eq!(enumerate_stump_partitions(&a4_sample(5, 5).unwrap()).len(), 15);
        assert!(enumerate_stump_partitions(&a4_sample(1, 1).unwrap()).is_empty());
    }

    #[test]
    fn a2_sample_matches_printed_example() {
        let d = a2_sample(9, 3).unwrap();
        // row 2 of the printed matrix: 2 3 4 7 8 9 1 6 5
        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..9).collect();
            idx.sort_by(|&a, &b| d.examples[a].reals[1].total_cmp(&d.examples[b].reals[1]));
            idx.into_iter().map(|i| i + 1).collect()
        };
        assert_eq!(order, vec![2, 3, 4, 7, 8, 9, 1, 6, 5]);
        assert_eq!(enumerate_stump_partitions(&a2_sample(6, 3).unwrap()).len(), 15);
    }

    #[test]
    fn nominal_stump_enumeration() {
        let d = nominal_sample(&[1, 1, 2, 2, 3, 3], 3);
        assert_eq!(enumerate_stump_partitions(&d).len(), 3);
        assert!(enumerate_stump_partitions(&nominal_sample(&[2, 2, 2], 3)).is_empty());
    }

    #[test]
    fn large_shapes_realize_everything() {
        let d = a4_sample(3, 1).unwrap();
        let shape: TreeShape = "((.,.),(.,.))".parse().unwrap();
        let p = enumerate_tree_partitions(&shape, &d, 2).unwrap();
        assert_eq!(p.len() as u64, stirling2(3, 2).to_u64_digits()[0]);
        let one = enumerate_tree_partitions(&TreeShape::leaf(), &d, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.contains(&[0b111]));
    }

    #[test]
    fn merge_enumeration_counts_stirling_numbers() {
        let blocks = [1u64, 2, 4, 8, 16];
        for c in 1..=5 {
            let mut n = 0u64;
            for_each_merge(&blocks, c, &mut |_| n += 1);
            assert_eq!(n, stirling2(5, c as u64).to_u64_digits().first().copied().unwrap_or(0));
        }
    }

    #[test]
    fn guards() {
        let d = a2_sample(9, 3).unwrap();
        assert!(matches!(
            enumerate_tree_partitions(&TreeShape::stump(), &d, 2),
            Err(BruteForceError::TooLarge { .. })
        ));
        assert!(appendix_sample(10, 6).is_err());
        assert!(appendix_sample(1, 1).is_ok());
    }

    #[test]
    fn example_order_does_not_matter() {
        let d = a4_sample(6, 4).unwrap();
        let reversed = d.subset(&(0..6).rev().collect::<Vec<_>>());
        assert_eq!(
            enumerate_stump_partitions(&d).len(),
            enumerate_stump_partitions(&reversed).len()
        );
        let shape: TreeShape = "((.,.),.)".parse().unwrap();
        assert_eq!(
            enumerate_tree_partitions(&shape, &d, 2).unwrap().histogram(),
            enumerate_tree_partitions(&shape, &reversed, 2).unwrap().histogram()
        );
    }
}
