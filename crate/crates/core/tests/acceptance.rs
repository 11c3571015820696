//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treebound::bounds::{
    log_parti_func_ub, parti_func_ub, stump_pf2_ordinal, stump_pf2_ordinal_terms, stump_pf2_real, stump_vcdim_real,
    tree_pf_nominal, tree_pf_ordinal, tree_pf_real, vcdim_ub, BoundCache,
};
use treebound::bruteforce::{a2_sample, a4_sample, enumerate_stump_partitions, enumerate_tree_partitions};
use treebound::combinatorics::{ln_biguint, stirling2};
use treebound::data::{iris, FeatureLandscape};
use treebound::experiment::{run_experiment, ExperimentConfig, ExperimentResult, Model};
use treebound::verify::{random_instance, random_landscape_pair, small_shapes, LandscapeKind};
use treebound::TreeShape;

type Outcome = Result<String, String>;

fn fail_if(fails: Vec<String>, ok: String) -> Outcome {
    if fails.is_empty() {
        Ok(ok)
    } else {
        Err(fails.join("; "))
    }
}

fn c1_a4_exactness() -> Outcome {
    let rows = [1, 1, 2, 3, 5, 10, 18];
    let mut fails = Vec::new();
    let mut seen = Vec::new();
    for m in 2..=7usize {
        let ell = rows[m - 1];
        let count = enumerate_stump_partitions(&a4_sample(m, ell).unwrap()).len();
        let want = (1usize << (m - 1)) - 1;
        if count != want || stump_pf2_real(m, ell) != BigUint::from(want) {
            fails.push(format!("m={m}: enumerated {count}, bound {}, want {want}", stump_pf2_real(m, ell)));
        }
        seen.push(format!("m{m}→{count}"));
    }
    fail_if(fails, seen.join(" "))
}

fn c2_a2_equality() -> Outcome {
    let mut fails = Vec::new();
    let mut seen = Vec::new();
    for (m, ell) in [(6usize, 3usize), (8, 2), (9, 3)] {
        let count = enumerate_stump_partitions(&a2_sample(m, ell).unwrap()).len();
        if count != ell * (m - 1) || stump_pf2_real(m, ell) != BigUint::from(count) {
            fails.push(format!("(m={m},ℓ={ell}): enumerated {count}, want {}", ell * (m - 1)));
        }
        seen.push(format!("({m},{ell})→{count}"));
    }
    fail_if(fails, seen.join(" "))
}

/// Binomial coefficient by the multiplicative formula.
fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Largest d with ½ Σ_k min(2ℓ, C(d,k)) = 2^{d-1} - 1.
fn vcdim_by_inequality(ell: u64) -> usize {
    let shattered = |d: u64| (1..d).map(|k| binom(d, k).min(2 * ell)).sum::<u64>() / 2 == (1 << (d - 1)) - 1;
    let mut d = 2;
    while shattered(d + 1) {
        d += 1;
    }
    d as usize
}

fn c3_stump_vcdim(cache: &BoundCache) -> Outcome {
    let listed = [2, 3, 4, 4, 5, 5, 5, 6, 6, 6];
    let mut fails = Vec::new();
    let mut got = Vec::new();
    for ell in 1..=10usize {
        let exact = stump_vcdim_real(ell);
        let checker = vcdim_by_inequality(ell as u64);
        let ub = vcdim_ub(&TreeShape::stump(), &FeatureLandscape::real(ell), cache).unwrap();
        if exact != checker || ub != exact {
            fails.push(format!("ℓ={ell}: closed form {exact}, checker {checker}, vcdim_ub {ub}"));
        }
        // witness for the lower side: the explicit sample on d points is shattered
        if exact <= 7 {
            let count = enumerate_stump_partitions(&a4_sample(exact, ell).unwrap()).len();
            if count != (1 << (exact - 1)) - 1 {
                fails.push(format!("ℓ={ell}: sample on {exact} points not shattered ({count})"));
            }
        }
        got.push(exact);
    }
    let diff: Vec<String> = (1..=10)
        .filter(|&l| got[l - 1] != listed[l - 1])
        .map(|l| format!("ℓ={l}: computed {} vs listed {}", got[l - 1], listed[l - 1]))
        .collect();
    let note = if diff.is_empty() {
        String::new()
    } else {
        format!(" [listed tuple differs: {}]", diff.join(", "))
    };
    fail_if(fails, format!("ℓ=1..10 → {got:?}{note}"))
}

fn c4_ordinal_figure() -> Outcome {
    let ls = [6, 6, 6, 6, 5, 5, 5, 2, 2];
    let terms = stump_pf2_ordinal_terms(6, &ls);
    let total = stump_pf2_ordinal(6, &ls);
    let want: Vec<BigUint> = [6u32, 15, 8].map(BigUint::from).to_vec();
    if terms == want && total == BigUint::from(29u32) {
        Ok(format!("terms {terms:?}, total {total}"))
    } else {
        Err(format!("terms {terms:?}, total {total}"))
    }
}

fn c5_dominance(cache: &BoundCache) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 600;
    let mut fails = Vec::new();
    let mut kinds = [0usize; 4];
    for _ in 0..n {
        let inst = random_instance(&mut rng);
        let (shape, c, d) = (&inst.shape, inst.c, &inst.sample);
        let m = d.len();
        let ls = &d.landscape;
        let brute = BigUint::from(enumerate_tree_partitions(shape, d, c).unwrap().len());
        let spec = match inst.kind {
            LandscapeKind::Real => Some(tree_pf_real(shape, c, m, ls.ell, cache)),
            LandscapeKind::Ordinal => Some(tree_pf_ordinal(shape, c, m, &ls.ordinal, cache)),
            LandscapeKind::Nominal => Some(tree_pf_nominal(shape, c, m, &ls.nominal, cache)),
            LandscapeKind::Mixed => None,
        };
        kinds[inst.kind as usize] += 1;
        let parti = parti_func_ub(shape, c, m, ls, cache);
        let s = stirling2(m as u64, c as u64);
        let log = log_parti_func_ub(shape, c, m, ls, cache);
        let ok = brute <= *spec.as_ref().unwrap_or(&parti)
            && spec.as_ref().is_none_or(|b| *b <= parti)
            && parti <= s
            && (parti.is_zero() || log.ln() >= ln_biguint(&parti) - 1e-9);
        if !ok {
            fails.push(format!(
                "{shape} c={c} m={m} [{ls}]: brute {brute}, specialised {spec:?}, parti {parti}, S {s}, ln log-bound {}",
                log.ln()
            ));
        }
    }
    fail_if(
        fails,
        format!(
            "{n} instances (real {}, ordinal {}, nominal {}, mixed {}), 0 violations",
            kinds[0], kinds[1], kinds[2], kinds[3]
        ),
    )
}

fn c6_identities(cache: &BoundCache) -> Outcome {
    let mut fails = Vec::new();
    let shapes: Vec<TreeShape> = small_shapes()
        .into_iter()
        .chain([TreeShape::balanced(5), TreeShape::caterpillar(4)])
        .collect();
    let ls = FeatureLandscape::new(3, vec![4, 2], vec![3, 5]).unwrap();
    for shape in &shapes {
        for m in 1..=10 {
            if !parti_func_ub(shape, 1, m, &ls, cache).is_one()
                || !tree_pf_real(shape, 1, m, 3, cache).is_one()
                || !tree_pf_ordinal(shape, 1, m, &ls.ordinal, cache).is_one()
                || !tree_pf_nominal(shape, 1, m, &ls.nominal, cache).is_one()
                || log_parti_func_ub(shape, 1, m, &ls, cache).ln() != 0.0
            {
                fails.push(format!("π^1 ≠ 1: {shape}, m={m}"));
            }
            let top = m.min(shape.leaves());
            for c in top + 1..=top + 3 {
                if !parti_func_ub(shape, c, m, &ls, cache).is_zero()
                    || !tree_pf_real(shape, c, m, 3, cache).is_zero()
                    || !tree_pf_ordinal(shape, c, m, &ls.ordinal, cache).is_zero()
                    || !tree_pf_nominal(shape, c, m, &ls.nominal, cache).is_zero()
                    || !log_parti_func_ub(shape, c, m, &ls, cache).is_zero()
                {
                    fails.push(format!("π^{c} ≠ 0: {shape}, m={m}"));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs = 100;
    for _ in 0..pairs {
        let (lo, hi) = random_landscape_pair(&mut rng);
        assert!(lo.is_dominated_by(&hi));
        let shape = &shapes[rng.gen_range(0..shapes.len())];
        let m = rng.gen_range(2..=12);
        let c = rng.gen_range(2..=3);
        let mono = parti_func_ub(shape, c, m, &lo, cache) <= parti_func_ub(shape, c, m, &hi, cache)
            && tree_pf_real(shape, c, m, lo.ell, cache) <= tree_pf_real(shape, c, m, hi.ell, cache)
            && tree_pf_ordinal(shape, c, m, &lo.ordinal, cache) <= tree_pf_ordinal(shape, c, m, &hi.ordinal, cache)
            && tree_pf_nominal(shape, c, m, &lo.nominal, cache) <= tree_pf_nominal(shape, c, m, &hi.nominal, cache)
            && log_parti_func_ub(shape, c, m, &lo, cache).ln()
                <= log_parti_func_ub(shape, c, m, &hi, cache).ln() + 1e-9;
        if !mono {
            fails.push(format!("monotonicity: {shape} c={c} m={m} [{lo}] vs [{hi}]"));
        }
    }
    fail_if(fails, format!("{} shapes × m=1..10, {pairs} landscape pairs", shapes.len()))
}

fn c7_pruning_properties(r: &ExperimentResult) -> Outcome {
    let mut fails = Vec::new();
    let mut steps = 0;
    for rec in r.records_of(Model::Ours) {
        let h = &rec.history;
        steps += h.len().saturating_sub(1);
        for w in h.windows(2) {
            if w[1].score > w[0].score || w[1].leaves >= w[0].leaves {
                fails.push(format!("run {}: step {:?} → {:?}", rec.run, w[0], w[1]));
            }
        }
        if rec.bound.is_none_or(|b| b > h[0].score) {
            fails.push(format!("run {}: final bound {:?} above initial {}", rec.run, rec.bound, h[0].score));
        }
    }
    let mean = |m: Model| r.summary(m).unwrap().test_acc.mean;
    let oracle = mean(Model::Oracle);
    for m in Model::ALL {
        if mean(m) > oracle {
            fails.push(format!("{m} mean test acc {:.4} > Oracle {oracle:.4}", mean(m)));
        }
    }
    let cc = r.summary(Model::Cc).unwrap().leaves.mean;
    let ours = r.summary(Model::Ours).unwrap().leaves.mean;
    if cc > ours {
        fails.push(format!("CC mean leaves {cc:.2} > Ours {ours:.2}"));
    }
    fail_if(
        fails,
        format!("{steps} accepted bound steps non-increasing; Oracle test {oracle:.3}; leaves CC {cc:.2} ≤ Ours {ours:.2}"),
    )
}

fn c8_reproduction(r: &ExperimentResult) -> Outcome {
    let og = r.summary(Model::Og).unwrap().test_acc.mean;
    let ours = r.summary(Model::Ours).unwrap();
    let cc = r.summary(Model::Cc).unwrap().test_acc.mean;
    let bound = ours.bound.unwrap().mean;
    let mut fails = Vec::new();
    if !(0.88..=0.98).contains(&og) {
        fails.push(format!("OG test acc {og:.4} outside [0.88, 0.98]"));
    }
    if ours.test_acc.mean < cc {
        fails.push(format!("Ours test acc {:.4} < CC {cc:.4}", ours.test_acc.mean));
    }
    if (bound - 1.688).abs() > 0.6 {
        fails.push(format!("Ours bound {bound:.4} outside 1.688 ± 0.6"));
    }
    fail_if(
        fails,
        format!(
            "OG test {og:.3}; Ours test {:.3} ≥ CC {cc:.3}; Ours bound {bound:.3}",
            ours.test_acc.mean
        ),
    )
}

fn c9_vc_scaling(cache: &BoundCache) -> Outcome {
    let ls = FeatureLandscape::real(4);
    let mut fails = Vec::new();
    let mut dims = Vec::new();
    let mut ratios = Vec::new();
    for l in [2usize, 4, 8] {
        match vcdim_ub(&TreeShape::balanced(l), &ls, cache) {
            Ok(d) => {
                dims.push(d);
                ratios.push(d as f64 / (l as f64 * ((4 * l) as f64).ln()));
            }
            Err(e) => fails.push(format!("L={l}: {e}")),
        }
    }
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        fails.push(format!("not strictly increasing: {dims:?}"));
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    if hi > 10.0 * lo {
        fails.push(format!("ratios {ratios:?} span more than a factor 10"));
    }
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    fail_if(fails, format!("vcdim {dims:?}, ratios [{}]", shown.join(", ")))
}

fn main() {
    let cache = BoundCache::new();
    let iris = iris();
    let mut experiment: Option<ExperimentResult> = None;
    let mut run_iris = || -> ExperimentResult {
        experiment
            .get_or_insert_with(|| run_experiment(&iris, &ExperimentConfig::default(), &cache).unwrap())
            .clone()
    };
    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS criterion {id} ({name}, {secs:.2}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}, {secs:.2}s): {msg}");
            }
        }
    };
    let cache2 = BoundCache::new();
    report(1, "stump exactness m ≤ 7", &mut c1_a4_exactness);
    report(2, "stump equality 2ℓ ≤ m", &mut c2_a2_equality);
    report(3, "exact stump VC dimension", &mut || c3_stump_vcdim(&cache2));
    report(4, "ordinal stump oracle", &mut c4_ordinal_figure);
    report(5, "dominance suite", &mut || c5_dominance(&cache2));
    report(6, "consistency identities", &mut || c6_identities(&cache2));
    report(7, "pruning properties on Iris", &mut || c7_pruning_properties(&run_iris()));
    report(8, "Iris reproduction", &mut || c8_reproduction(&run_iris()));
    report(9, "VC scaling of balanced trees", &mut || c9_vc_scaling(&cache2));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
