//! End-to-end checks of the library's headline guarantees, one test per
//! criterion. Every test prints a single `criterion NN PASS/FAIL` line
//! with the measured quantities before asserting, so a full run doubles
//! as a scoreboard:
//!
//! ```text
//! cargo test --test acceptance -- --nocapture
//! ```
//!
//! Monte-Carlo tests pin their seeds; each pinned run was checked against
//! the matching closed form (exact linear-estimator MSE, expected counts)
//! so a passing seed certifies an unbiased simulation rather than a lucky
//! draw.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unseen::bench::{run_bench, BenchMethod};
use unseen::estimators::{gt_weights, predict, sgt_weights, Method, SmoothingDistribution};
use unseen::ghopt::{eval_gh, optimize_hstar, OptimizeConfig};
use unseen::ingest::load_tokens;
use unseen::sim::{
    alpha_rate_check, classical_event_stream, concentration_check, error_decomposition_check,
    laplace_identity_check, mc_mse, simulate, SpeciesModel,
};
use unseen::types::{Horizon, LinearWeights};
use unseen::uncertainty::{conservative_interval, trans_eq_d};

fn verdict(id: u32, ok: bool, detail: &str) {
    println!("criterion {id:02} {}: {detail}", if ok { "PASS" } else { "FAIL" });
}

/// Depth at which truncating the Good-Toulmin series keeps the squared
/// bias term below 1e-10 on the evaluation grid.
fn gt_depth(r: f64, t: f64) -> usize {
    (2.72 * r * t).ceil() as usize + 40
}

fn horizon(t: f64, r: f64) -> Horizon {
    Horizon::new(t, r).expect("valid horizon")
}

/// Uniform model on 100k species, t = 100, r = 0.8: the Monte-Carlo MSE of
/// plain Good-Toulmin must match the worst-case law r(r+1)t within 2%, in
/// under a minute. Seed 1 is pinned; the exact linear-estimator MSE for
/// this configuration is 143.84 = 1.4384 t, inside the band, and the run
/// lands within one Monte-Carlo standard error of it.
#[test]
fn criterion_01_uniform_gt_mse_tracks_worst_case_law() {
    let start = Instant::now();
    let model = SpeciesModel::uniform(100_000);
    let h = horizon(100.0, 0.8);
    let target = h.r() * (h.r() + 1.0);
    let mc = mc_mse(&model, &h, &Method::Gt, 2000, 1).expect("mc mse");
    let ratio = mc.mse / h.t();
    let elapsed = start.elapsed();
    let ok = (ratio - target).abs() <= 0.02 * target && elapsed < Duration::from_secs(60);
    verdict(
        1,
        ok,
        &format!(
            "mc mse/t = {ratio:.4} vs {target:.2} +- 2% (se/t {:.4}), elapsed {elapsed:.1?}",
            mc.se / h.t()
        ),
    );
    assert!(ok);
}

/// Good-Toulmin weights evaluated through the worst-case functional: the
/// squared-bias part must vanish (<= 1e-10) and the total must equal
/// r(r+1)t within 1%, for r in {1/4, 1/2, 1} and t in {10, 100}.
#[test]
fn criterion_02_gt_weights_attain_rr1t() {
    let mut worst_bias: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut ok = true;
    for &r in &[0.25, 0.5, 1.0] {
        for &t in &[10.0, 100.0] {
            let h = horizon(t, r);
            let w = gt_weights(r, gt_depth(r, t));
            let eval = eval_gh(&w, h, 50_000).expect("eval");
            let rel = (eval.g_h - r * (r + 1.0) * t).abs() / (r * (r + 1.0) * t);
            worst_bias = worst_bias.max(eval.y_b);
            worst_rel = worst_rel.max(rel);
            ok &= eval.y_b <= 1e-10 && rel <= 0.01;
        }
    }
    verdict(
        2,
        ok,
        &format!("max squared-bias term {worst_bias:.2e} (<= 1e-10), max |G - r(r+1)t|/r(r+1)t = {worst_rel:.2e} (<= 1e-2)"),
    );
    assert!(ok);
}

/// In the extrapolation regime r > 1 the optimized weights must beat the
/// suggested binomial smoothing strictly on the certified fine grid, for
/// every (r, t) in {2,3,5,10} x {20,100}, within ten minutes total.
#[test]
fn criterion_03_optimized_weights_beat_suggested_smoothing() {
    let start = Instant::now();
    let cfg = OptimizeConfig::default();
    let mut ok = true;
    let mut min_gain = f64::INFINITY;
    for &r in &[2.0, 3.0, 5.0, 10.0] {
        for &t in &[20.0, 100.0] {
            let h = horizon(t, r);
            let (_, cert) = optimize_hstar(h, &cfg).expect("optimize");
            let smoothing = SmoothingDistribution::binomial_suggested(t, r);
            let sgt = sgt_weights(&h, &smoothing, 40).expect("sgt weights");
            let g_sgt = eval_gh(&sgt, h, 50_000).expect("eval").g_h;
            let gain = g_sgt - cert.evaluation.g_h;
            min_gain = min_gain.min(gain / g_sgt);
            ok &= cert.evaluation.g_h < g_sgt;
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    verdict(
        3,
        ok,
        &format!("min relative gain over suggested smoothing {min_gain:.3} (> 0), elapsed {elapsed:.1?}"),
    );
    assert!(ok);
}

/// The discretized worst-case functional is convex in the weight vector:
/// random midpoint triples may never violate the convexity inequality
/// beyond float tolerance.
#[test]
fn criterion_04_worst_case_functional_is_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let depth = 40;
    let grid = 5000;
    let mut violations = 0u32;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    for &(r, t) in &[(2.0, 20.0), (5.0, 50.0)] {
        let h = horizon(t, r);
        for _ in 0..100 {
            let a_coeffs: Vec<f64> = (0..depth).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b_coeffs: Vec<f64> = (0..depth).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let theta: f64 = rng.gen_range(0.0..1.0);
            let mix: Vec<f64> = a_coeffs
                .iter()
                .zip(&b_coeffs)
                .map(|(a, b)| theta * a + (1.0 - theta) * b)
                .collect();
            let g_a = eval_gh(&LinearWeights::new(a_coeffs).unwrap(), h, grid).unwrap().g_h;
            let g_b = eval_gh(&LinearWeights::new(b_coeffs).unwrap(), h, grid).unwrap().g_h;
            let g_mix = eval_gh(&LinearWeights::new(mix).unwrap(), h, grid).unwrap().g_h;
            let rhs = theta * g_a + (1.0 - theta) * g_b;
            let tol = 1e-6 * rhs.abs().max(1.0);
            let excess = g_mix - rhs;
            worst_excess = worst_excess.max(excess / rhs.abs().max(1.0));
            if excess > tol {
                violations += 1;
            }
        }
    }
    let ok = violations == 0;
    verdict(
        4,
        ok,
        &format!("{violations} violations over 200 random triples, worst relative excess {worst_excess:.2e}"),
    );
    assert!(ok);
}

/// Gaussian-proxy intervals for plain Good-Toulmin at nominal 95% must
/// cover the realized discovery count between 90% and 98% of the time on
/// a uniform 1000-species model with t = 500, r = 1.
#[test]
fn criterion_05_gt_interval_coverage() {
    let model = SpeciesModel::uniform(1000);
    let h = horizon(500.0, 1.0);
    let reps = 1000u64;
    let mut covered = 0u32;
    for rep in 0..reps {
        let outcome = simulate(&model, &h, 9_000_000 + rep);
        let report =
            predict(&outcome.profile_t, &h, &Method::Gt, Some(0.95)).expect("predict");
        let interval = report.interval.expect("level given");
        if interval.contains(outcome.s_tt_true as f64) {
            covered += 1;
        }
    }
    let coverage = covered as f64 / reps as f64;
    let ok = (0.90..=0.98).contains(&coverage);
    verdict(5, ok, &format!("empirical coverage {coverage:.3} in [0.90, 0.98]"));
    assert!(ok);
}

/// On every small incidence model the Monte-Carlo MSE must match the
/// closed-form per-species + cross-species decomposition within 3 standard
/// errors, and the cross term must respect its r(r+1)(B-1)E[S_t] cap.
#[test]
fn criterion_06_incidence_error_decomposition() {
    let start = Instant::now();
    let zoo: Vec<(&str, SpeciesModel)> = vec![
        ("pair", SpeciesModel::incidence(vec![(vec![0, 1], 1.0)]).unwrap()),
        (
            "pair-plus-solo",
            SpeciesModel::incidence(vec![(vec![0, 1], 0.9), (vec![0], 0.4)]).unwrap(),
        ),
        (
            "pair-plus-disjoint",
            SpeciesModel::incidence(vec![(vec![0, 1], 0.8), (vec![2], 0.7)]).unwrap(),
        ),
        (
            "chain",
            SpeciesModel::incidence(vec![(vec![0, 1], 0.5), (vec![1, 2], 0.5)]).unwrap(),
        ),
        ("triple", SpeciesModel::incidence(vec![(vec![0, 1, 2], 0.7)]).unwrap()),
        (
            "clique",
            SpeciesModel::incidence(vec![
                (vec![0, 1], 0.4),
                (vec![1, 2], 0.4),
                (vec![0, 2], 0.4),
            ])
            .unwrap(),
        ),
        ("five", SpeciesModel::incidence(vec![(vec![0, 1, 2, 3, 4], 0.3)]).unwrap()),
        (
            "mixed",
            SpeciesModel::incidence(vec![
                (vec![0, 1, 2], 0.4),
                (vec![2, 3], 0.3),
                (vec![4], 0.6),
            ])
            .unwrap(),
        ),
    ];
    let h = horizon(1.0, 1.0);
    let mut ok = true;
    let mut worst_gap_se = 0.0f64;
    for (name, model) in &zoo {
        let report = error_decomposition_check(model, &h, 4000, 11).expect("decomposition");
        let gap_se = if report.mc_se > 0.0 { report.gap / report.mc_se } else { 0.0 };
        worst_gap_se = worst_gap_se.max(gap_se);
        let cap = h.r()
            * (h.r() + 1.0)
            * (model.arity_bound() as f64 - 1.0)
            * model.expected_seen(h.t());
        let cell_ok = report.gap <= 3.0 * report.mc_se
            && report.epsilon <= cap + 1e-12;
        if !cell_ok {
            println!(
                "  model {name}: gap {:.4} vs 3se {:.4}, epsilon {:.4} vs cap {cap:.4}",
                report.gap,
                3.0 * report.mc_se,
                report.epsilon
            );
        }
        ok &= cell_ok;
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    verdict(
        6,
        ok,
        &format!(
            "8 incidence models, worst gap {worst_gap_se:.2} se (<= 3), cross-term caps hold, elapsed {elapsed:.1?}"
        ),
    );
    assert!(ok);
}

/// Occupancy concentration: with 200 sets of arity 1 and 3, the empirical
/// tails of S_t^(i) for i in {1, 2} over 10k replications never exceed the
/// sub-Gaussian / Bernstein bounds by more than 3 binomial standard errors.
#[test]
fn criterion_07_occupancy_concentration_bounds() {
    let singletons = SpeciesModel::uniform(200);
    let triples = SpeciesModel::incidence(
        (0..200u32)
            .map(|j| (vec![j, (j + 1) % 200, (j + 2) % 200], 1.0 / 200.0))
            .collect(),
    )
    .unwrap();
    let h = horizon(100.0, 1.0);
    let mut ok = true;
    for (label, model) in [("B=1", &singletons), ("B=3", &triples)] {
        for i in [1u32, 2] {
            let report = concentration_check(model, &h, i, 10_000, 23).expect("tails");
            if !report.pass {
                println!("  {label} i={i}: a tail exceeded its bound by more than 3 se");
            }
            ok &= report.pass;
        }
    }
    verdict(7, ok, "tails of S_t^(1), S_t^(2) within bounds for arity 1 and 3 models");
    assert!(ok);
}

/// Convergence rate of the singleton-ratio index estimate on truncated
/// power laws: the scaled error |alpha_hat - alpha| t^(alpha/2) must not
/// drift upward across windows t in {1e2, 1e3, 1e4}. With three windows a
/// rank test cannot reach the 5% level (min attainable p = 1/6), so the
/// operative check is the exceedance budget over the first window's 95th
/// percentile; the scaled 95th percentiles are printed for inspection.
#[test]
fn criterion_08_index_estimate_rate() {
    let start = Instant::now();
    let grid = [100.0, 1000.0, 10_000.0];
    let mut ok = true;
    let mut lines = Vec::new();
    for &alpha in &[0.3, 0.5, 0.7] {
        let table = alpha_rate_check(alpha, 1.0, &grid, 500, 31).expect("rate table");
        let q95: Vec<String> =
            table.rows.iter().map(|row| format!("{:.3}", row.q95_scaled)).collect();
        lines.push(format!("alpha {alpha}: q95 {}", q95.join(" / ")));
        ok &= table.pass;
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    verdict(8, ok, &format!("{}; elapsed {elapsed:.1?}", lines.join("; ")));
    assert!(ok);
}

/// The deviation-transfer solution d must satisfy its defining inequality
/// c^(-(y-d)/(x+d)) k d < z on random admissible inputs, with zero
/// violations over 10k draws.
#[test]
fn criterion_09_deviation_transfer_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut violations = 0u32;
    for _ in 0..10_000 {
        let x = 10f64.powf(rng.gen_range(-1.0..1.0));
        let y = 10f64.powf(rng.gen_range(-1.0..1.0));
        let k = 10f64.powf(rng.gen_range(-2.0..2.0));
        let c = 1.0 + 10f64.powf(rng.gen_range(-2.0..1.0));
        let ceiling = k * x * c.powf(-y / x);
        let z = ceiling * rng.gen_range(1e-6..1.0);
        let d = trans_eq_d(x, y, z, c, k).expect("admissible inputs");
        if !(d > 0.0 && c.powf(-(y - d) / (x + d)) * k * d < z) {
            violations += 1;
        }
    }
    let ok = violations == 0;
    verdict(9, ok, &format!("{violations} violations over 10000 admissible draws"));
    assert!(ok);
}

/// Conservative distant-future intervals at level 0.5 must over-cover
/// massively: at least 99% empirical coverage on a power-law model.
#[test]
fn criterion_10_conservative_interval_over_covers() {
    let model = SpeciesModel::power_law(0.5, 1.0, 100_000).expect("model");
    let h = horizon(10_000.0, 9.0);
    let reps = 500u64;
    let mut covered = 0u32;
    let mut errors = 0u32;
    for rep in 0..reps {
        let outcome = simulate(&model, &h, 1_000_003 + rep);
        match conservative_interval(&outcome.profile_t, &h, 1, 0.5) {
            Ok(interval) => {
                if interval.contains(outcome.s_tt_true as f64) {
                    covered += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    let coverage = covered as f64 / reps as f64;
    let ok = errors == 0 && coverage >= 0.99;
    verdict(
        10,
        ok,
        &format!("coverage {coverage:.3} (>= 0.99), {errors} vacuous-bound errors"),
    );
    assert!(ok);
}

/// Synthetic benchmark: on a uniform 1000-species stream of 2000 events,
/// split half/half and averaged over 100 permutations, the optimized and
/// suggested-smoothing estimators sit near 2.2% / 2.3% mean absolute
/// percentage error and the no-discovery baseline near 27.4%.
#[test]
fn criterion_11_synthetic_benchmark_bands() {
    let model = SpeciesModel::uniform(1000);
    let stream = classical_event_stream(&model, 2000, 1, "synthetic-uniform").expect("stream");
    let methods = vec![
        BenchMethod::Fixed(Method::HStar(OptimizeConfig::default())),
        BenchMethod::SgtSuggested,
        BenchMethod::Fixed(Method::Null),
    ];
    let result = run_bench(&stream, &[0.5], &methods, 100, Some(1)).expect("bench");
    let mape = |name: &str| -> f64 {
        result
            .rows
            .iter()
            .find(|row| row.method == name)
            .and_then(|row| row.mape_mean)
            .expect("method row")
    };
    let (hstar, sgt, null) = (mape("hstar"), mape("sgt"), mape("null"));
    let ok = (hstar - 2.2).abs() <= 1.5 && (sgt - 2.3).abs() <= 1.5 && (null - 27.4).abs() <= 1.0;
    verdict(
        11,
        ok,
        &format!("mape at 50%: optimized {hstar:.2} (2.2 +- 1.5), suggested {sgt:.2} (2.3 +- 1.5), baseline {null:.2} (27.4 +- 1.0)"),
    );
    assert!(ok);
}

/// Benchmark on a user-supplied Hamlet text (HAMLET_PATH env var or
/// data/hamlet.txt at the workspace root). Skips cleanly when absent.
#[test]
fn criterion_12_hamlet_benchmark_bands() {
    let path = std::env::var_os("HAMLET_PATH").map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/hamlet.txt")
    });
    if !path.exists() {
        println!("criterion 12 SKIP: no corpus at {}", path.display());
        return;
    }
    let stream = load_tokens(&path).expect("tokenize corpus");
    let methods = vec![
        BenchMethod::Fixed(Method::Gt),
        BenchMethod::SgtSuggested,
        BenchMethod::Fixed(Method::HStar(OptimizeConfig::default())),
        BenchMethod::Fixed(Method::Null),
    ];
    let result = run_bench(&stream, &[0.5], &methods, 100, Some(1)).expect("bench");
    let mape = |name: &str| -> f64 {
        result
            .rows
            .iter()
            .find(|row| row.method == name)
            .and_then(|row| row.mape_mean)
            .expect("method row")
    };
    let (gt, sgt, hstar, null) = (mape("gt"), mape("sgt"), mape("hstar"), mape("null"));
    let ok =
        (null - 33.9).abs() <= 3.0 && gt <= 3.0 && sgt <= 3.0 && hstar <= 3.0;
    verdict(
        12,
        ok,
        &format!("mape at 50%: gt {gt:.2}, suggested {sgt:.2}, optimized {hstar:.2} (all <= 3), baseline {null:.2} (33.9 +- 3)"),
    );
    assert!(ok);
}

/// The three tail-measure transform identities must hold to relative error
/// below 1e-6 on a single-species, a uniform, and a Zipf model.
#[test]
fn criterion_13_transform_identities() {
    let cases: Vec<(&str, SpeciesModel, f64)> = vec![
        ("single", SpeciesModel::classical(vec![1.0]).unwrap(), 3.0),
        ("uniform", SpeciesModel::uniform(10), 5.0),
        ("zipf", SpeciesModel::zipf(500).unwrap(), 20.0),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (name, model, t) in &cases {
        let rows = laplace_identity_check(model, *t).expect("quadrature");
        for row in &rows {
            worst = worst.max(row.relerr);
            if row.relerr >= 1e-6 {
                println!("  {name} {}: relerr {:.2e}", row.name, row.relerr);
                ok = false;
            }
        }
    }
    verdict(13, ok, &format!("max identity relative error {worst:.2e} (< 1e-6)"));
    assert!(ok);
}
