//! Extrapolation benchmark on real or synthetic event streams.
//!
//! The protocol: take a stream whose true total species count `S_T` is
//! known (it is computed from the full stream), reveal a prefix, predict
//! the total as `S_t + (predicted new species)`, and score the absolute
//! percentage error `100 |S-hat_T - S_T| / S_T`. [`run_bench`] repeats this
//! over a fraction grid and, when a seed is given, over random permutations
//! of the stream, reporting mean error and its standard error per
//! (fraction, method) cell. Method failures are recorded as table gaps, not
//! run failures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{predict, Method, SmoothingDistribution};
use crate::ingest::{apply_split, profile_from_stream, ObservationStream, SplitPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    /// The stream's own order; a single deterministic split per fraction.
    Temporal,
    /// Mean over seeded random permutations of the stream.
    PermAverage,
}

/// One (fraction, method) cell. `mape_mean`/`mape_sem` are `None` when the
/// method failed on every permutation (a table gap).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub fraction_seen: f64,
    pub method: String,
    pub mape_mean: Option<f64>,
    pub mape_sem: Option<f64>,
    /// Permutations that produced a score.
    pub n_perms: u64,
    /// Resolved per-split parameters worth auditing, e.g. the smoothing
    /// distribution actually used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub dataset: String,
    pub order_mode: OrderMode,
    pub rows: Vec<BenchRow>,
}

/// A method entry in a benchmark run. Most methods are fixed up front;
/// the suggested smoothed-series variant re-derives its binomial parameters
/// from each split's `(t, r)`.
#[derive(Clone, Debug)]
pub enum BenchMethod {
    Fixed(Method),
    SgtSuggested,
}

impl BenchMethod {
    pub fn label(&self) -> &'static str {
        match self {
            BenchMethod::Fixed(m) => m.label(),
            BenchMethod::SgtSuggested => "sgt",
        }
    }
}

/// Parses a CLI method name. `sgt` selects per-split suggested binomial
/// smoothing; explicit parameters can be passed through
/// [`BenchMethod::Fixed`] instead.
pub fn parse_method(name: &str) -> Result<BenchMethod> {
    Ok(match name {
        "gt" => BenchMethod::Fixed(Method::Gt),
        "sgt" => BenchMethod::SgtSuggested,
        "hstar" => BenchMethod::Fixed(Method::HStar(crate::ghopt::OptimizeConfig::default())),
        "ratio-alpha" => BenchMethod::Fixed(Method::RatioAlpha),
        "pade" => BenchMethod::Fixed(Method::Pade {
            num_deg: crate::estimators::PADE_DEFAULT_ORDER.0,
            den_deg: crate::estimators::PADE_DEFAULT_ORDER.1,
        }),
        "null" => BenchMethod::Fixed(Method::Null),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown method {other:?}; expected gt|sgt|hstar|ratio-alpha|pade|null or custom weights"
            )))
        }
    })
}

/// Ten evenly spaced fractions in (0, 0.5].
pub fn default_fractions() -> Vec<f64> {
    parse_fractions("0.05..0.5x10").expect("default grid parses")
}

/// Parses a fraction grid spec `LO..HIxN` (N evenly spaced values from LO
/// to HI inclusive) or a comma-separated list.
pub fn parse_fractions(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::InvalidParameter(format!("fraction spec {spec:?}: {msg}"));
    if let Some((range, count)) = spec.split_once('x') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| bad("expected LO..HIxN"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad("bad lower bound"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("bad upper bound"))?;
        let n: usize = count.trim().parse().map_err(|_| bad("bad count"))?;
        if n == 0 || !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return Err(bad("need 0 < LO <= HI < 1 and N >= 1"));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let step = (hi - lo) / (n - 1) as f64;
        // Round off accumulated float error so grid points make clean
        // table keys (0.6, not 0.6000000000000001).
        return Ok((0..n)
            .map(|i| ((lo + step * i as f64) * 1e12).round() / 1e12)
            .collect());
    }
    let fractions: Vec<f64> = spec
        .split(',')
        .map(|part| part.trim().parse::<f64>().map_err(|_| bad("bad value")))
        .collect::<Result<_>>()?;
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
        return Err(bad("fractions must lie in (0,1)"));
    }
    Ok(fractions)
}

/// Stable per-cell seed derivation (splitmix64), so one master seed
/// reproduces every permutation on any platform.
fn derive_seed(master: u64, perm: u64) -> u64 {
    let mut z = master ^ perm.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the benchmark grid.
///
/// Without a seed the stream's temporal order is used and `n_perms` is
/// forced to 1; with a seed, permutation `p` shuffles the stream with a
/// seed derived from `(seed, p)` and every fraction is evaluated on that
/// shuffle. Expensive fits are resolved once per fraction (the split
/// geometry `(t, r)` does not depend on the permutation) and shared across
/// permutations. Per-cell failures become gaps.
pub fn run_bench(
    stream: &ObservationStream,
    fractions: &[f64],
    methods: &[BenchMethod],
    n_perms: u64,
    seed: Option<u64>,
) -> Result<BenchResult> {
    if fractions.is_empty() || methods.is_empty() {
        return Err(Error::InvalidParameter(
            "benchmark needs at least one fraction and one method".into(),
        ));
    }
    for &f in fractions {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractions must lie in (0,1), got {f}"
            )));
        }
    }
    let n_perms = if seed.is_some() { n_perms.max(1) } else { 1 };
    let order_mode = if seed.is_some() { OrderMode::PermAverage } else { OrderMode::Temporal };

    let s_total = profile_from_stream(stream).distinct();
    if s_total == 0 {
        return Err(Error::EmptyCorpus);
    }

    // Resolve per-fraction methods up front: the split geometry is fixed by
    // the fraction, so fit-once methods and suggested smoothing parameters
    // are shared by all permutations of that fraction.
    let resolved: Vec<Vec<(String, Option<String>, Result<Method>)>> = fractions
        .par_iter()
        .map(|&fraction| {
            let probe = apply_split(stream, &SplitPlan::temporal(fraction));
            methods
                .iter()
                .map(|method| {
                    let label = method.label().to_string();
                    let h = match &probe {
                        Ok(split) => split.h,
                        Err(e) => {
                            return (label, None, Err(Error::InvalidSplit(e.to_string())))
                        }
                    };
                    match method {
                        BenchMethod::SgtSuggested => {
                            let smoothing =
                                SmoothingDistribution::binomial_suggested(h.t(), h.r());
                            (
                                label,
                                Some(smoothing.describe()),
                                Ok(Method::Sgt(smoothing)),
                            )
                        }
                        BenchMethod::Fixed(Method::HStar(cfg)) => {
                            match crate::ghopt::optimize_hstar(h, cfg) {
                                Ok((weights, _)) => (label, None, Ok(Method::Linear(weights))),
                                Err(e) => (label, None, Err(e)),
                            }
                        }
                        BenchMethod::Fixed(m) => (label, None, Ok(m.clone())),
                    }
                })
                .collect()
        })
        .collect();

    // Score every (permutation, fraction, method) cell; cells are
    // independent, so permutations run in parallel and are reduced in index
    // order for a deterministic table.
    let scores: Vec<Vec<Vec<Option<f64>>>> = (0..n_perms)
        .into_par_iter()
        .map(|perm| {
            fractions
                .iter()
                .enumerate()
                .map(|(fi, &fraction)| {
                    let plan = SplitPlan {
                        fraction_seen: fraction,
                        permutation_seed: seed.map(|s| derive_seed(s, perm)),
                        subsample_every: 1,
                    };
                    let split = match apply_split(stream, &plan) {
                        Ok(split) => split,
                        Err(_) => return vec![None; methods.len()],
                    };
                    let profile = profile_from_stream(&split.past);
                    let s_t = profile.distinct() as f64;
                    resolved[fi]
                        .iter()
                        .map(|(_, _, method)| {
                            let method = method.as_ref().ok()?;
                            let report = predict(&profile, &split.h, method, None).ok()?;
                            let predicted_total = s_t + report.point;
                            Some(100.0 * (predicted_total - s_total as f64).abs() / s_total as f64)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(fractions.len() * methods.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        for (mi, (label, detail, _)) in resolved[fi].iter().enumerate() {
            let samples: Vec<f64> = scores
                .iter()
                .filter_map(|per_perm| per_perm[fi][mi])
                .collect();
            let n = samples.len() as u64;
            let (mean, sem) = if samples.is_empty() {
                (None, None)
            } else {
                let mean = samples.iter().sum::<f64>() / n as f64;
                let sem = if n > 1 {
                    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
                        / (n as f64 - 1.0);
                    (var / n as f64).sqrt()
                } else {
                    0.0
                };
                (Some(mean), Some(sem))
            };
            rows.push(BenchRow {
                fraction_seen: fraction,
                method: label.clone(),
                mape_mean: mean,
                mape_sem: sem,
                n_perms: n,
                detail: detail.clone(),
            });
        }
    }
    Ok(BenchResult { dataset: stream.source_label().to_string(), order_mode, rows })
}

/// CSV table with the stable column order `fraction,method,mean,sem,n`;
/// gaps leave `mean` and `sem` empty.
pub fn to_csv(result: &BenchResult) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["fraction", "method", "mean", "sem", "n"])
        .expect("in-memory write");
    for row in &result.rows {
        writer
            .write_record([
                format!("{}", row.fraction_seen),
                row.method.clone(),
                row.mape_mean.map_or(String::new(), |v| format!("{v}")),
                row.mape_sem.map_or(String::new(), |v| format!("{v}")),
                format!("{}", row.n_perms),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

pub fn to_json(result: &BenchResult) -> String {
    serde_json::to_string_pretty(result).expect("bench result serializes")
}

pub fn from_json(text: &str) -> Result<BenchResult> {
    Ok(serde_json::from_str(text)?)
}

/// LaTeX tabular in the benchmark-table shape: one row per fraction, one
/// column per method, cells `mean ± sem` and `--` for gaps.
pub fn to_latex(result: &BenchResult) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for row in &result.rows {
        if !methods.contains(&row.method.as_str()) {
            methods.push(&row.method);
        }
    }
    let mut fractions: Vec<f64> = Vec::new();
    for row in &result.rows {
        if !fractions.iter().any(|&f| f == row.fraction_seen) {
            fractions.push(row.fraction_seen);
        }
    }
    let mut out = String::new();
    out.push_str(&format!(
        "\\begin{{tabular}}{{r{}}}\n",
        "c".repeat(methods.len())
    ));
    out.push_str("\\% seen");
    for m in &methods {
        out.push_str(&format!(" & {m}"));
    }
    out.push_str(" \\\\\n\\hline\n");
    for &fraction in &fractions {
        out.push_str(&format!("{:.0}", fraction * 100.0));
        for m in &methods {
            let cell = result
                .rows
                .iter()
                .find(|row| row.fraction_seen == fraction && row.method == *m)
                .and_then(|row| {
                    row.mape_mean
                        .map(|mean| format!("${mean:.1} \\pm {:.1}$", row.mape_sem.unwrap_or(0.0)))
                });
            out.push_str(&format!(" & {}", cell.unwrap_or_else(|| "--".into())));
        }
        out.push_str(" \\\\\n");
    }
    out.push_str("\\end{tabular}\n");
    out
}
