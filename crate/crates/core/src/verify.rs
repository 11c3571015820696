//! Self-checks of the bound evaluators against exhaustive enumeration and
//! closed forms, on instances small enough to enumerate.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{
    log_parti_func_ub, parti_func_ub, stump_pf2_ordinal, stump_pf2_ordinal_terms, stump_pf2_real, stump_vcdim_real,
    tree_pf_nominal, tree_pf_ordinal, tree_pf_real, vcdim_ub, BoundCache,
};
use crate::bruteforce::{a2_sample, a4_sample, enumerate_stump_partitions, enumerate_tree_partitions};
use crate::combinatorics::stirling2;
use crate::data::{Dataset, Example, FeatureLandscape};
use crate::tree::TreeShape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, failures: Vec<String>, ok_detail: String) -> Check {
        Check {
            name,
            passed: failures.is_empty(),
            detail: if failures.is_empty() {
                ok_detail
            } else {
                failures.join("; ")
            },
        }
    }
}

/// Rows in the explicit stump matrices for m = 1..7.
pub const A4_ROWS: [usize; 7] = [1, 1, 2, 3, 5, 10, 18];

pub fn check_a4_exactness() -> Check {
    let mut fails = Vec::new();
    let mut seen = Vec::new();
    for m in 2..=7 {
        let ell = A4_ROWS[m - 1];
        let count = enumerate_stump_partitions(&a4_sample(m, ell).expect("m <= 7")).len();
        let bound = stump_pf2_real(m, ell);
        let power = (1u64 << (m - 1)) - 1;
        if BigUint::from(count) != bound || count as u64 != power {
            fails.push(format!("m={m}: enumerated {count}, bound {bound}, 2^(m-1)-1 = {power}"));
        }
        seen.push(count.to_string());
    }
    Check::new("a4-stump-exactness", fails, format!("counts {}", seen.join(",")))
}

pub fn check_a2_equality() -> Check {
    let mut fails = Vec::new();
    let mut seen = Vec::new();
    for (m, ell) in [(6, 3), (8, 2), (9, 3)] {
        let count = enumerate_stump_partitions(&a2_sample(m, ell).expect("2ℓ <= m")).len();
        let want = ell * (m - 1);
        if count != want || BigUint::from(count) != stump_pf2_real(m, ell) {
            fails.push(format!("(m={m}, ℓ={ell}): enumerated {count}, expected {want}"));
        }
        seen.push(format!("({m},{ell})→{count}"));
    }
    Check::new("a2-stump-equality", fails, seen.join(" "))
}

/// Largest `d` whose stump bound on `d` points reaches `2^{d-1} - 1`,
/// scanning with Pascal's triangle in machine integers.
pub fn stump_vcdim_by_scan(ell: usize) -> usize {
    let mut row: Vec<u128> = vec![1];
    let mut best = 1;
    for d in 1..=100usize {
        let mut next = vec![1u128; d + 1];
        for k in 1..d {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
        let pf: u128 = (1..d).map(|k| row[k].min(2 * ell as u128)).sum::<u128>() / 2;
        if d >= 2 && pf == (1u128 << (d - 1)) - 1 {
            best = d;
        } else if d >= 2 {
            break;
        }
    }
    best
}

pub fn check_stump_vcdim(cache: &BoundCache) -> Check {
    let mut fails = Vec::new();
    let mut values = Vec::new();
    for ell in 1..=10 {
        let exact = stump_vcdim_real(ell);
        let scan = stump_vcdim_by_scan(ell);
        let ub = vcdim_ub(&TreeShape::stump(), &FeatureLandscape::real(ell), cache);
        if exact != scan || ub != Ok(exact) {
            fails.push(format!("ℓ={ell}: closed form {exact}, scan {scan}, vcdim_ub {ub:?}"));
        }
        values.push(exact.to_string());
    }
    Check::new("stump-vcdim", fails, format!("ℓ=1..10 → {}", values.join(",")))
}

pub fn check_ordinal_figure() -> Check {
    let ls = [6, 6, 6, 6, 5, 5, 5, 2, 2];
    let terms: Vec<BigUint> = stump_pf2_ordinal_terms(6, &ls);
    let total = stump_pf2_ordinal(6, &ls);
    let want: Vec<BigUint> = [6u32, 15, 8].map(BigUint::from).to_vec();
    let mut fails = Vec::new();
    if terms != want || total != BigUint::from(29u32) {
        fails.push(format!("terms {terms:?}, total {total}"));
    }
    Check::new("ordinal-figure", fails, format!("terms (6,15,8), total {total}"))
}

/// Every shape with at most four leaves, in both orientations.
pub fn small_shapes() -> Vec<TreeShape> {
    [
        ".",
        "(.,.)",
        "((.,.),.)",
        "(.,(.,.))",
        "((.,.),(.,.))",
        "(((.,.),.),.)",
        "((.,(.,.)),.)",
        "(.,((.,.),.))",
        "(.,(.,(.,.)))",
    ]
    .iter()
    .map(|s| s.parse().expect("valid shape"))
    .collect()
}

/// Which evaluators apply to a landscape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeKind {
    Real,
    Ordinal,
    Nominal,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct DominanceInstance {
    pub shape: TreeShape,
    pub sample: Dataset,
    pub c: usize,
    pub kind: LandscapeKind,
}

/// Random tiny instance: m ≤ 7, ℓ ≤ 3, categorical counts ≤ 4, at most
/// four leaves, c ≤ 3. Real values are drawn from a small grid so ties
/// occur.
pub fn random_instance(rng: &mut impl Rng) -> DominanceInstance {
    let kind = *[
        LandscapeKind::Real,
        LandscapeKind::Ordinal,
        LandscapeKind::Nominal,
        LandscapeKind::Mixed,
    ]
    .choose(rng)
    .unwrap();
    let (ell, n_ord, n_nom) = match kind {
        LandscapeKind::Real => (rng.gen_range(1..=3), 0, 0),
        LandscapeKind::Ordinal => (0, rng.gen_range(1..=2), 0),
        LandscapeKind::Nominal => (0, 0, rng.gen_range(1..=2)),
        LandscapeKind::Mixed => (rng.gen_range(0..=2), rng.gen_range(0..=2), rng.gen_range(0..=2)),
    };
    let ordinal: Vec<usize> = (0..n_ord).map(|_| rng.gen_range(1..=4)).collect();
    let nominal: Vec<usize> = (0..n_nom).map(|_| rng.gen_range(1..=4)).collect();
    let ls = FeatureLandscape::new(ell, ordinal.clone(), nominal.clone()).expect("positive counts");
    let m = rng.gen_range(1..=7);
    let examples = (0..m)
        .map(|_| Example {
            reals: (0..ell).map(|_| rng.gen_range(0..m) as f64).collect(),
            ordinals: ordinal.iter().map(|&k| rng.gen_range(1..=k as u32)).collect(),
            nominals: nominal.iter().map(|&k| rng.gen_range(1..=k as u32)).collect(),
        })
        .collect();
    let sample = Dataset::new(ls, examples, vec![0; m], 1).expect("conforming sample");
    let shape = small_shapes().choose(rng).unwrap().clone();
    let c = rng.gen_range(1..=3);
    DominanceInstance { shape, sample, c, kind }
}

/// Evaluator specialised to the instance's feature types, when one exists.
pub fn specialised_bound(inst: &DominanceInstance, cache: &BoundCache) -> Option<BigUint> {
    let ls = &inst.sample.landscape;
    let m = inst.sample.len();
    match inst.kind {
        LandscapeKind::Real => Some(tree_pf_real(&inst.shape, inst.c, m, ls.ell, cache)),
        LandscapeKind::Ordinal => Some(tree_pf_ordinal(&inst.shape, inst.c, m, &ls.ordinal, cache)),
        LandscapeKind::Nominal => Some(tree_pf_nominal(&inst.shape, inst.c, m, &ls.nominal, cache)),
        LandscapeKind::Mixed => None,
    }
}

/// Checks enumeration ≤ specialised ≤ mixed ≤ S(m,c) and
/// exp(log bound) ≥ mixed on one instance; returns a message on violation.
pub fn check_dominance_instance(inst: &DominanceInstance, cache: &BoundCache) -> Option<String> {
    let m = inst.sample.len();
    let ls = &inst.sample.landscape;
    let brute = BigUint::from(
        enumerate_tree_partitions(&inst.shape, &inst.sample, inst.c)
            .expect("instance within guards")
            .len(),
    );
    let spec = specialised_bound(inst, cache);
    let parti = parti_func_ub(&inst.shape, inst.c, m, ls, cache);
    let s = stirling2(m as u64, inst.c as u64);
    let log = log_parti_func_ub(&inst.shape, inst.c, m, ls, cache);
    let upper = spec.as_ref().unwrap_or(&parti);
    let log_ok = if parti.is_zero() {
        true
    } else {
        log.ln() >= crate::combinatorics::ln_biguint(&parti) - 1e-9
    };
    if brute > *upper || spec.as_ref().is_some_and(|b| *b > parti) || parti > s || !log_ok {
        Some(format!(
            "shape {} c={} m={} [{}]: brute {brute}, specialised {spec:?}, parti {parti}, S {s}, exp(log) {:.6}",
            inst.shape,
            inst.c,
            m,
            ls,
            log.exp()
        ))
    } else {
        None
    }
}

pub fn check_dominance(instances: usize, seed: u64, cache: &BoundCache) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fails = Vec::new();
    for _ in 0..instances {
        let inst = random_instance(&mut rng);
        if let Some(msg) = check_dominance_instance(&inst, cache) {
            fails.push(msg);
        }
    }
    Check::new("dominance", fails, format!("{instances} random instances, 0 violations"))
}

/// Random pair of landscapes with `lo` dominated by `hi` component-wise.
pub fn random_landscape_pair(rng: &mut impl Rng) -> (FeatureLandscape, FeatureLandscape) {
    let n_ord = rng.gen_range(0..=3);
    let n_nom = rng.gen_range(0..=3);
    let ell_lo = rng.gen_range(0..=3);
    let ell_hi = ell_lo + rng.gen_range(0..=2);
    let ord_lo: Vec<usize> = (0..n_ord).map(|_| rng.gen_range(1..=6)).collect();
    let ord_hi: Vec<usize> = ord_lo.iter().map(|&k| k + rng.gen_range(0..=3)).collect();
    let nom_lo: Vec<usize> = (0..n_nom).map(|_| rng.gen_range(1..=6)).collect();
    let nom_hi: Vec<usize> = nom_lo.iter().map(|&k| k + rng.gen_range(0..=3)).collect();
    (
        FeatureLandscape::new(ell_lo, ord_lo, nom_lo).expect("positive"),
        FeatureLandscape::new(ell_hi, ord_hi, nom_hi).expect("positive"),
    )
}

/// π^1 = 1, π^c = 0 above min(m, L), and monotonicity in the landscape.
pub fn check_identities(pairs: usize, seed: u64, cache: &BoundCache) -> Check {
    let mut fails = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: Vec<TreeShape> = small_shapes()
        .into_iter()
        .chain([TreeShape::balanced(6), TreeShape::caterpillar(5)])
        .collect();
    let ls = FeatureLandscape::new(2, vec![3, 5], vec![4]).expect("positive");
    for shape in &shapes {
        for m in 1..=12 {
            let one = parti_func_ub(shape, 1, m, &ls, cache);
            let tr = tree_pf_real(shape, 1, m, 2, cache);
            let to = tree_pf_ordinal(shape, 1, m, &ls.ordinal, cache);
            let tn = tree_pf_nominal(shape, 1, m, &ls.nominal, cache);
            let lg = log_parti_func_ub(shape, 1, m, &ls, cache);
            if !(one.is_one() && tr.is_one() && to.is_one() && tn.is_one() && lg.ln() == 0.0) {
                fails.push(format!("π^1 ≠ 1 for {shape} at m={m}"));
            }
            let top = m.min(shape.leaves());
            for c in top + 1..=top + 2 {
                let all_zero = parti_func_ub(shape, c, m, &ls, cache).is_zero()
                    && tree_pf_real(shape, c, m, 2, cache).is_zero()
                    && tree_pf_ordinal(shape, c, m, &ls.ordinal, cache).is_zero()
                    && tree_pf_nominal(shape, c, m, &ls.nominal, cache).is_zero()
                    && log_parti_func_ub(shape, c, m, &ls, cache).is_zero();
                if !all_zero {
                    fails.push(format!("π^{c} ≠ 0 for {shape} at m={m}"));
                }
            }
        }
    }
    for _ in 0..pairs {
        let (lo, hi) = random_landscape_pair(&mut rng);
        let shape = shapes.choose(&mut rng).unwrap();
        let m = rng.gen_range(2..=12);
        let c = rng.gen_range(2..=3);
        let a = parti_func_ub(shape, c, m, &lo, cache);
        let b = parti_func_ub(shape, c, m, &hi, cache);
        let ra = tree_pf_real(shape, c, m, lo.ell, cache);
        let rb = tree_pf_real(shape, c, m, hi.ell, cache);
        let oa = tree_pf_ordinal(shape, c, m, &lo.ordinal, cache);
        let ob = tree_pf_ordinal(shape, c, m, &hi.ordinal, cache);
        let na = tree_pf_nominal(shape, c, m, &lo.nominal, cache);
        let nb = tree_pf_nominal(shape, c, m, &hi.nominal, cache);
        let la = log_parti_func_ub(shape, c, m, &lo, cache).ln();
        let lb = log_parti_func_ub(shape, c, m, &hi, cache).ln();
        if a > b || ra > rb || oa > ob || na > nb || la > lb + 1e-9 {
            fails.push(format!("monotonicity fails for {shape}, c={c}, m={m}: [{lo}] vs [{hi}]"));
        }
    }
    Check::new(
        "identities",
        fails,
        format!("{} shapes, {pairs} landscape pairs", shapes.len()),
    )
}

/// vcdim of balanced trees with L ∈ {2, 4, 8} on 4 real features, compared
/// with L ln(Lℓ).
pub fn check_vc_scaling(cache: &BoundCache) -> Check {
    let ell = 4;
    let ls = FeatureLandscape::real(ell);
    let mut fails = Vec::new();
    let mut prev = 0;
    let mut ratios = Vec::new();
    let mut shown = Vec::new();
    for l in [2usize, 4, 8] {
        match vcdim_ub(&TreeShape::balanced(l), &ls, cache) {
            Ok(d) => {
                if d <= prev {
                    fails.push(format!("vcdim not increasing at L={l}: {d} after {prev}"));
                }
                prev = d;
                let r = d as f64 / (l as f64 * ((l * ell) as f64).ln());
                ratios.push(r);
                shown.push(format!("L={l}:{d} (ratio {r:.3})"));
            }
            Err(e) => fails.push(format!("L={l}: {e}")),
        }
    }
    if let (Some(lo), Some(hi)) = (
        ratios.iter().copied().reduce(f64::min),
        ratios.iter().copied().reduce(f64::max),
    ) {
        if hi > 10.0 * lo {
            fails.push(format!("ratio band {lo:.3}..{hi:.3} exceeds a factor 10"));
        }
    }
    Check::new("vc-scaling", fails, shown.join(" "))
}

/// All checks with the default sizes.
pub fn run_all(instances: usize, seed: u64) -> Vec<Check> {
    let cache = BoundCache::new();
    vec![
        check_a4_exactness(),
        check_a2_equality(),
        check_stump_vcdim(&cache),
        check_ordinal_figure(),
        check_dominance(instances, seed, &cache),
        check_identities(100, seed, &cache),
        check_vc_scaling(&cache),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_matches_closed_form() {
        for ell in 1..=40 {
            assert_eq!(stump_vcdim_by_scan(ell), stump_vcdim_real(ell), "ℓ={ell}");
        }
        let got: Vec<usize> = (1..=10).map(stump_vcdim_by_scan).collect();
        assert_eq!(got, vec![2, 3, 4, 4, 5, 5, 5, 5, 5, 6]);
    }

    #[test]
    fn cheap_checks_pass() {
        let cache = BoundCache::new();
        for c in [
            check_a4_exactness(),
            check_a2_equality(),
            check_stump_vcdim(&cache),
            check_ordinal_figure(),
            check_dominance(40, 7, &cache),
        ] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
