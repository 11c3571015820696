//! Partitioning-function, growth-function and VC-dimension bounds, and the
//! risk bound used for pruning.
//!
//! Exact evaluators return [`BigUint`] counts; the fast evaluator used for
//! pruning works in log space. Every recursive evaluator memoizes through a
//! [`BoundCache`] keyed by the canonical shape and a canonical digest of the
//! landscape.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::combinatorics::{
    binomial, factorial, ln_biguint, ln_falling_factorial, log_sum, stirling2, stirling2_part_k,
    wedderburn_etherington, LogNumber,
};
use crate::data::{conjugate, FeatureLandscape};
use crate::tree::TreeShape;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("VC-dimension search exceeded the cap of m = {0}")]
    VcdimCap(usize),
    #[error("invalid prior configuration: {0}")]
    Prior(String),
    #[error("sample size must be positive")]
    EmptySample,
}

/// How `R_k` is clamped in [`parti_func_ub`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KClamp {
    /// `min{R_k, C(m,k)}`: at most `C(m,k)` ways to put `k` examples left.
    #[default]
    Binomial,
    /// `R_k` as printed, only the final `S(m,c)` clamp applies.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Evaluator {
    Real,
    Ordinal,
    Nominal,
    Parti(KClamp),
    LogParti,
}

type Key = (Evaluator, Arc<str>, usize, usize, Vec<usize>);

/// Memo table shared by all evaluators. Safe to share across threads.
#[derive(Default)]
pub struct BoundCache {
    exact: RwLock<HashMap<Key, BigUint>>,
    log: RwLock<HashMap<Key, f64>>,
}

impl BoundCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.exact.read().unwrap().len() + self.log.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.exact.write().unwrap().clear();
        self.log.write().unwrap().clear();
    }

    fn get_exact(&self, key: &Key) -> Option<BigUint> {
        self.exact.read().unwrap().get(key).cloned()
    }

    fn put_exact(&self, key: Key, v: &BigUint) {
        self.exact.write().unwrap().insert(key, v.clone());
    }

    fn get_log(&self, key: &Key) -> Option<f64> {
        self.log.read().unwrap().get(key).copied()
    }

    fn put_log(&self, key: Key, v: f64) {
        self.log.write().unwrap().insert(key, v);
    }
}

impl std::fmt::Debug for BoundCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BoundCache({} entries)", self.len())
    }
}

fn big(x: usize) -> BigUint {
    BigUint::from(x)
}

fn s2(m: usize, c: usize) -> BigUint {
    stirling2(m as u64, c as u64)
}

fn choose(m: usize, k: usize) -> BigUint {
    binomial(m as u64, k as u64)
}

/// Number of ways to merge an `a`-partition and a `b`-partition of disjoint
/// sets into a `c`-partition: `C(a, c-b) C(b, c-a) (a+b-c)!`.
pub fn merge_coefficient(a: usize, b: usize, c: usize) -> BigUint {
    if a + b < c || a > c || b > c {
        return BigUint::zero();
    }
    choose(a, c - b) * choose(b, c - a) * factorial((a + b - c) as u64)
}

/// `Σ_{a,b ≥ 1, a+b ≥ c} coef(a,b,c) · left[a-1] · right[b-1]`.
fn merge_sum(c: usize, left: &[BigUint], right: &[BigUint]) -> BigUint {
    let mut acc = BigUint::zero();
    for (ai, la) in left.iter().enumerate() {
        if la.is_zero() {
            continue;
        }
        let a = ai + 1;
        for (bi, rb) in right.iter().enumerate() {
            let b = bi + 1;
            if a + b < c || rb.is_zero() {
                continue;
            }
            acc += merge_coefficient(a, b, c) * la * rb;
        }
    }
    acc
}

fn halve_if_symmetric(shape: &TreeShape, total: BigUint) -> BigUint {
    if shape.delta_lr() == 1 {
        total >> 1u32
    } else {
        total
    }
}

/// Clamps categories at `m`, drops features that cannot split, and sorts in
/// decreasing order. None of the evaluators distinguish landscapes that
/// agree after this reduction.
fn canonical_counts(counts: &[usize], m: usize) -> Vec<usize> {
    let mut v: Vec<usize> = counts
        .iter()
        .map(|&k| k.min(m))
        .filter(|&k| k >= 2)
        .collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// `(ℓ, ω, ν)` counting only categorical features with at least two
/// categories.
fn effective_counts(ls: &FeatureLandscape) -> (usize, usize, usize) {
    (
        ls.ell,
        ls.ordinal.iter().filter(|&&o| o >= 2).count(),
        ls.nominal.iter().filter(|&&n| n >= 2).count(),
    )
}

/// Distinct values of a decreasing vector with multiplicities.
fn groups(v: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &x in v {
        match out.last_mut() {
            Some((y, g)) if *y == x => *g += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

fn with_one_decremented(v: &[usize], value: usize) -> Vec<usize> {
    let mut w = v.to_vec();
    let i = w.iter().position(|&x| x == value).expect("value present");
    w[i] -= 1;
    w
}

// ---------------------------------------------------------------- stumps

/// `(1/2) Σ_{k=1}^{m-1} min{2ℓ, C(m,k)}`.
pub fn stump_pf2_real(m: usize, ell: usize) -> BigUint {
    let total: BigUint = (1..m).map(|k| choose(m, k).min(big(2 * ell))).sum();
    total >> 1u32
}

/// Largest `d` with `2ℓ ≥ C(d, ⌊d/2⌋)`: the exact VC dimension of stumps on
/// `ℓ` real-valued features.
pub fn stump_vcdim_real(ell: usize) -> usize {
    let budget = big(2 * ell);
    let mut d = 0;
    while choose(d + 1, (d + 1).div_ceil(2)) <= budget {
        d += 1;
    }
    d
}

/// Greedy attribution bound for stumps on ordinal features, returning the
/// per-`k` contributions `R_1, ..., R_{⌊m/2⌋}`.
pub fn stump_pf2_ordinal_terms(m: usize, ordinal: &[usize]) -> Vec<BigUint> {
    let half = m / 2;
    let conj = conjugate(ordinal);
    if conj.is_empty() {
        return vec![BigUint::zero(); half];
    }
    let omega_max = conj.len() + 1;
    // 1-based conjugate, zero-padded so that indices up to Ω+1 are readable
    let mut ob: Vec<BigUint> = std::iter::once(BigUint::zero())
        .chain(conj.iter().map(|&x| big(x)))
        .chain(std::iter::repeat_n(BigUint::zero(), 3))
        .collect();
    let at = |ob: &Vec<BigUint>, c: usize| ob.get(c).cloned().unwrap_or_default();
    let mut terms = Vec::with_capacity(half);
    for k in 1..=half {
        if 2 * k == m {
            terms.push(at(&ob, 1).min(choose(m, k) >> 1u32));
            continue;
        }
        let r = (at(&ob, 1) + at(&ob, 2)).min(choose(m, k));
        let gamma = (1..omega_max)
            .rev()
            .find(|&c| at(&ob, c) + at(&ob, c + 1) >= r)
            .expect("C = 1 always qualifies");
        let mut next = ob.clone();
        for c in gamma..ob.len() {
            next[c] = if c == gamma {
                at(&ob, c) + at(&ob, c + 1) + at(&ob, c + 2) - &r
            } else {
                at(&ob, c + 2)
            };
        }
        ob = next;
        terms.push(r);
    }
    terms
}

pub fn stump_pf2_ordinal(m: usize, ordinal: &[usize]) -> BigUint {
    stump_pf2_ordinal_terms(m, ordinal).into_iter().sum()
}

/// Bound on the 2-partitions realizable by stumps on nominal features.
pub fn stump_pf2_nominal(m: usize, nominal: &[usize]) -> BigUint {
    let r_n = |n: usize| if n <= 2 { n - 1 } else { n.min(m) };
    let r_nk = |n: usize, k: usize| {
        if m == 2 * k && n != 1 {
            1
        } else if m > n * k {
            n - 1
        } else {
            m / k
        }
    };
    let half = m / 2;
    let feature_major: usize = nominal
        .iter()
        .map(|&n| r_n(n).min((1..=half).map(|k| r_nk(n, k)).sum()))
        .sum();
    let size_major: BigUint = (1..=half)
        .map(|k| {
            let per_feature: usize = nominal.iter().map(|&n| r_nk(n, k)).sum();
            stirling2_part_k(m as u64, k as u64).min(big(per_feature))
        })
        .sum();
    big(feature_major).min(size_major)
}

// ------------------------------------------------------------ real trees

/// Bound on the `c`-partitioning function of trees of the given shape on
/// `ℓ` real-valued features.
pub fn tree_pf_real(shape: &TreeShape, c: usize, m: usize, ell: usize, cache: &BoundCache) -> BigUint {
    let leaves = shape.leaves();
    if c == 0 || c > m || c > leaves {
        return BigUint::zero();
    }
    if c == 1 {
        return BigUint::one();
    }
    if ell == 0 {
        return BigUint::zero();
    }
    if m <= leaves {
        return s2(m, c);
    }
    let key = (Evaluator::Real, shape.key_arc(), c, m, vec![ell]);
    if let Some(v) = cache.get_exact(&key) {
        return v;
    }
    let (l, r) = shape.children().expect("leaf handled above");
    let mut total = BigUint::zero();
    for k in l.leaves()..=(m - r.leaves()) {
        let coeff = choose(m, k).min(big(2 * ell));
        let lv: Vec<BigUint> = (1..=c).map(|a| tree_pf_real(l, a, k, ell, cache)).collect();
        let rv: Vec<BigUint> = (1..=c).map(|b| tree_pf_real(r, b, m - k, ell, cache)).collect();
        total += coeff * merge_sum(c, &lv, &rv);
    }
    let value = halve_if_symmetric(shape, total).min(s2(m, c));
    cache.put_exact(key, &value);
    value
}

// --------------------------------------------------------- ordinal trees

/// Minimum of the per-feature and aggregate bounds for trees on ordinal
/// features with landscape `ordinal`.
pub fn tree_pf_ordinal(
    shape: &TreeShape,
    c: usize,
    m: usize,
    ordinal: &[usize],
    cache: &BoundCache,
) -> BigUint {
    let leaves = shape.leaves();
    if c == 0 || c > m || c > leaves {
        return BigUint::zero();
    }
    if c == 1 {
        return BigUint::one();
    }
    let o = canonical_counts(ordinal, m);
    if o.is_empty() {
        return BigUint::zero();
    }
    if c == m {
        return BigUint::one();
    }
    let key = (Evaluator::Ordinal, shape.key_arc(), c, m, o.clone());
    if let Some(v) = cache.get_exact(&key) {
        return v;
    }
    let (l, r) = shape.children().expect("c >= 2 implies an internal node");
    let children = |k: usize, left_ls: &[usize], right_ls: &[usize]| {
        let lv: Vec<BigUint> = (1..=c).map(|a| tree_pf_ordinal(l, a, k, left_ls, cache)).collect();
        let rv: Vec<BigUint> = (1..=c)
            .map(|b| tree_pf_ordinal(r, b, m - k, right_ls, cache))
            .collect();
        merge_sum(c, &lv, &rv)
    };

    let mut per_feature = BigUint::zero();
    for (value, mult) in groups(&o) {
        let child_ls = with_one_decremented(&o, value);
        for k in 1..m {
            let doubled = if 2 * k == m { 2 } else { 1 };
            let r_ik = (doubled * (value - 1)).min(2);
            per_feature += big(mult * r_ik) * children(k, &child_ls, &child_ls);
        }
    }

    let o1 = o.len();
    let o2 = o.iter().filter(|&&x| x >= 3).count();
    let mut aggregate = BigUint::zero();
    for k in 1..m {
        let j = k.min(m - k);
        let r_k = if 2 * j < m { o1 + o2 } else { 2 * o1 };
        let r_k = big(r_k).min(choose(m, k));
        aggregate += r_k * children(k, &o, &o);
    }

    let value = halve_if_symmetric(shape, per_feature)
        .min(halve_if_symmetric(shape, aggregate))
        .min(s2(m, c));
    cache.put_exact(key, &value);
    value
}

// --------------------------------------------------------- nominal trees

/// Minimum of the per-feature and aggregate bounds for trees on nominal
/// features with landscape `nominal`.
pub fn tree_pf_nominal(
    shape: &TreeShape,
    c: usize,
    m: usize,
    nominal: &[usize],
    cache: &BoundCache,
) -> BigUint {
    let leaves = shape.leaves();
    if c == 0 || c > m || c > leaves {
        return BigUint::zero();
    }
    if c == 1 {
        return BigUint::one();
    }
    let n = canonical_counts(nominal, m);
    if n.is_empty() {
        return BigUint::zero();
    }
    if c == m {
        return BigUint::one();
    }
    let key = (Evaluator::Nominal, shape.key_arc(), c, m, n.clone());
    if let Some(v) = cache.get_exact(&key) {
        return v;
    }
    let (l, r) = shape.children().expect("c >= 2 implies an internal node");
    let children = |k: usize, ls: &[usize]| {
        let lv: Vec<BigUint> = (1..=c).map(|a| tree_pf_nominal(l, a, k, ls, cache)).collect();
        let rv: Vec<BigUint> = (1..=c).map(|b| tree_pf_nominal(r, b, m - k, ls, cache)).collect();
        merge_sum(c, &lv, &rv)
    };

    let mut per_feature = BigUint::zero();
    for (value, mult) in groups(&n) {
        let child_ls = with_one_decremented(&n, value);
        for k in 1..m {
            let j = k.min(m - k);
            let r = if m > value * j { value - 1 } else { m / j };
            per_feature += big(mult * r) * children(k, &child_ls);
        }
    }

    let mut aggregate = BigUint::zero();
    for k in 1..m {
        let j = k.min(m - k);
        let r_k = stirling2_part_k(m as u64, j as u64).min(big(n.len() * (m / j)));
        aggregate += r_k * children(k, &n);
    }

    let value = halve_if_symmetric(shape, per_feature)
        .min(halve_if_symmetric(shape, aggregate))
        .min(s2(m, c));
    cache.put_exact(key, &value);
    value
}

// --------------------------------------------------------- mixed features

/// Recursive bound on the `c`-partitioning function for a mixture of
/// feature types, with `R_k` clamped at `C(m,k)`.
pub fn parti_func_ub(
    shape: &TreeShape,
    c: usize,
    m: usize,
    ls: &FeatureLandscape,
    cache: &BoundCache,
) -> BigUint {
    parti_func_ub_with(shape, c, m, ls, KClamp::Binomial, cache)
}

pub fn parti_func_ub_with(
    shape: &TreeShape,
    c: usize,
    m: usize,
    ls: &FeatureLandscape,
    clamp: KClamp,
    cache: &BoundCache,
) -> BigUint {
    parti_rec(shape, c, m, effective_counts(ls), clamp, cache)
}

fn parti_rec(
    shape: &TreeShape,
    c: usize,
    m: usize,
    counts: (usize, usize, usize),
    clamp: KClamp,
    cache: &BoundCache,
) -> BigUint {
    if c == 0 || c > m || c > shape.leaves() {
        return BigUint::zero();
    }
    if c == m || c == 1 || m == 1 {
        return BigUint::one();
    }
    let (ell, omega, nu) = counts;
    let key = (
        Evaluator::Parti(clamp),
        shape.key_arc(),
        c,
        m,
        vec![ell, omega, nu],
    );
    if let Some(v) = cache.get_exact(&key) {
        return v;
    }
    let (l, r) = shape.children().expect("c >= 2 implies an internal node");
    // shrinking to k categories keeps every feature with >= 2 categories
    // splittable unless k = 1, where the base case answers anyway
    let shrunk = |k: usize| if k >= 2 { counts } else { (ell, 0, 0) };
    let mut total = BigUint::zero();
    for k in 1..m {
        let j = k.min(m - k);
        let mut r_k = big(2 * ell + 2 * omega + (m / j) * nu);
        if clamp == KClamp::Binomial {
            r_k = r_k.min(choose(m, k));
        }
        if r_k.is_zero() {
            continue;
        }
        let lv: Vec<BigUint> = (1..=c)
            .map(|a| parti_rec(l, a, k, shrunk(k), clamp, cache))
            .collect();
        let rv: Vec<BigUint> = (1..=c)
            .map(|b| parti_rec(r, b, m - k, shrunk(m - k), clamp, cache))
            .collect();
        total += r_k * merge_sum(c, &lv, &rv);
    }
    let value = halve_if_symmetric(shape, total).min(s2(m, c));
    cache.put_exact(key, &value);
    value
}

/// Fast log-space bound: the sum over `k` is replaced by `m-1` times its
/// largest possible term.
pub fn log_parti_func_ub(
    shape: &TreeShape,
    c: usize,
    m: usize,
    ls: &FeatureLandscape,
    cache: &BoundCache,
) -> LogNumber {
    LogNumber::from_ln(log_rec(shape, c, m, effective_counts(ls), cache))
}

fn ln_s2(m: usize, c: usize) -> f64 {
    ln_biguint(&s2(m, c))
}

fn log_rec(
    shape: &TreeShape,
    c: usize,
    m: usize,
    counts: (usize, usize, usize),
    cache: &BoundCache,
) -> f64 {
    let leaves = shape.leaves();
    if c == 0 || c > m || c > leaves {
        return f64::NEG_INFINITY;
    }
    if c == m || c == 1 || m == 1 {
        return 0.0;
    }
    if m <= leaves {
        return ln_s2(m, c);
    }
    let (ell, omega, nu) = counts;
    let key = (Evaluator::LogParti, shape.key_arc(), c, m, vec![ell, omega, nu]);
    if let Some(v) = cache.get_log(&key) {
        return v;
    }
    let (l, r) = shape.children().expect("m > leaves >= 1 with c >= 2");
    let lv: Vec<f64> = (1..=c).map(|a| log_rec(l, a, m - 1, counts, cache)).collect();
    let rv: Vec<f64> = (1..=c).map(|b| log_rec(r, b, m - 1, counts, cache)).collect();
    let mut terms = Vec::with_capacity(c * c);
    for a in 1..=c {
        for b in c.saturating_sub(a).max(1)..=c {
            let coeff = ln_biguint(&merge_coefficient(a, b, c));
            terms.push(LogNumber::from_ln(coeff + lv[a - 1] + rv[b - 1]));
        }
    }
    let inner = log_sum(&terms).expect("c >= 2 gives terms").ln();
    let r_top = (2 * ell + 2 * omega + m * nu) as f64;
    let value = (-(shape.delta_lr() as f64) * LN_2 + ((m - 1) as f64).ln() + r_top.ln() + inner)
        .min(ln_s2(m, c));
    cache.put_log(key, value);
    value
}

/// Upper bound on the log of the growth function for `n_classes` labels:
/// `log Σ_{a=1}^{min(n, L, m)} (n)_a π^a(m)`.
pub fn log_growth_func_ub(
    shape: &TreeShape,
    n_classes: usize,
    m: usize,
    ls: &FeatureLandscape,
    cache: &BoundCache,
) -> LogNumber {
    let top = n_classes.min(shape.leaves()).min(m);
    if top == 0 {
        return LogNumber::ZERO;
    }
    let terms: Vec<LogNumber> = (1..=top)
        .map(|a| {
            ln_falling_factorial(n_classes as u64, a as u64) * log_parti_func_ub(shape, a, m, ls, cache)
        })
        .collect();
    log_sum(&terms).expect("at least one term")
}

pub const DEFAULT_VCDIM_CAP: usize = 10_000;

/// Largest `m` for which the 2-partitioning bound still reaches
/// `2^{m-1} - 1`.
pub fn vcdim_ub(shape: &TreeShape, ls: &FeatureLandscape, cache: &BoundCache) -> Result<usize, BoundError> {
    vcdim_ub_with(shape, ls, KClamp::Binomial, DEFAULT_VCDIM_CAP, cache)
}

pub fn vcdim_ub_with(
    shape: &TreeShape,
    ls: &FeatureLandscape,
    clamp: KClamp,
    cap: usize,
    cache: &BoundCache,
) -> Result<usize, BoundError> {
    if shape.is_leaf() {
        return Ok(1);
    }
    let mut m = 1;
    while parti_func_ub_with(shape, 2, m, ls, clamp, cache) >= s2(m, 2) {
        m += 1;
        if m > cap {
            return Err(BoundError::VcdimCap(cap));
        }
    }
    Ok(m - 1)
}

// ----------------------------------------------------------- risk bound

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    pub delta: f64,
    pub r: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            delta: 0.05,
            r: 2f64.powf(-10.5),
        }
    }
}

impl PriorConfig {
    pub fn new(delta: f64, r: f64) -> Result<Self, BoundError> {
        let cfg = PriorConfig { delta, r };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks `0 < r < 1` and `0 < δ ≤ 1`.
    pub fn validate(&self) -> Result<(), BoundError> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(BoundError::Prior(format!("r must lie in (0, 1), got {}", self.r)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(BoundError::Prior(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// `ln p_d` with `p_d = 6 / (π² L²) / WE(L)`.
pub fn ln_complexity_prior(shape: &TreeShape) -> f64 {
    let l = shape.leaves();
    6f64.ln() - 2.0 * PI.ln() - 2.0 * (l as f64).ln() - ln_biguint(&wedderburn_etherington(l as u64))
}

pub fn complexity_prior(shape: &TreeShape) -> f64 {
    ln_complexity_prior(shape).exp()
}

/// `ln q_k` with `q_k = (1 - r) r^k`.
pub fn ln_error_prior(k: usize, cfg: &PriorConfig) -> f64 {
    (1.0 - cfg.r).ln() + k as f64 * cfg.r.ln()
}

pub fn error_prior(k: usize, cfg: &PriorConfig) -> f64 {
    ln_error_prior(k, cfg).exp()
}

/// `ε = (2k + 4 ln(4 τ(2m) / (δ q_k p_d))) / m`, with `ln τ` from
/// [`log_growth_func_ub`].
#[allow(clippy::too_many_arguments)]
pub fn shawe_taylor_epsilon(
    m: usize,
    k: usize,
    shape: &TreeShape,
    ls: &FeatureLandscape,
    n_classes: usize,
    cfg: &PriorConfig,
    cache: &BoundCache,
) -> f64 {
    assert!(m >= 1, "risk bound needs at least one example");
    let ln_tau = log_growth_func_ub(shape, n_classes, 2 * m, ls, cache).ln();
    let ln_arg = 4f64.ln() + ln_tau - cfg.delta.ln() - ln_error_prior(k, cfg) - ln_complexity_prior(shape);
    (2.0 * k as f64 + 4.0 * ln_arg) / m as f64
}

/// Convenience conversion for reporting exact bounds.
pub fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}
