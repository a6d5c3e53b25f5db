//! Point estimators for the number of species a future sample will add.
//!
//! Every estimator here consumes a sparse [`FrequencyProfile`] and a
//! [`Horizon`] describing how much longer the future window is than the
//! past one (`r = future/past`). The linear family scores each multiplicity
//! `i` with a weight `H(i)` and returns `sum_i H(i) * phi_i`:
//!
//! * [`good_toulmin`]: the alternating series `H(i) = -(-r)^i`, unbiased in
//!   the Poissonized model but explosive for `r > 1`.
//! * [`sgt_weights`]: the same series damped by the tail of a smoothing
//!   distribution, `H(i) = -P(L >= i) (-r)^i`, which trades a little bias
//!   for bounded variance past `r = 1`.
//! * [`crate::ghopt::optimize_hstar`]: weights tuned to minimize the
//!   worst-case mean squared error directly.
//!
//! Two non-linear alternatives round out the family: [`power_law_induced`]
//! extrapolates a power-law index estimated from the singleton share, and
//! [`pade_gt`] evaluates a rational (Padé) resummation of the alternating
//! series. [`predict`] dispatches on a [`Method`] tag and packages the
//! result with optional uncertainty from [`crate::uncertainty`].

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use statrs::distribution::DiscreteCDF;

use crate::error::{Error, Result};
use crate::pade::pade_approximant;
use crate::types::{FrequencyProfile, Horizon, LinearWeights};
use crate::uncertainty::{
    gaussian_interval, gt_variance_proxy, linear_variance_proxy, Interval, VarianceProxy,
};

/// Default rational-approximant order for [`pade_gt`].
pub const PADE_DEFAULT_ORDER: (usize, usize) = (2, 3);

/// Alternating-series estimate `-sum_i phi_i (-r)^i`, evaluated exactly over
/// the sparse profile with no truncation.
pub fn good_toulmin(profile: &FrequencyProfile, h: &Horizon) -> f64 {
    let r = h.r();
    let mut sum = 0.0;
    for (i, count) in profile.iter() {
        sum -= count as f64 * (-r).powi(i.min(i32::MAX as u32) as i32);
    }
    sum
}

/// Generic linear estimate `sum_i H(i) * phi_i`, with `H(i) = 0` beyond the
/// truncation depth of `weights`.
pub fn linear_estimate(profile: &FrequencyProfile, weights: &LinearWeights) -> f64 {
    let mut sum = 0.0;
    for (i, count) in profile.iter() {
        sum += count as f64 * weights.h(i);
    }
    sum
}

/// Alternating-series weights `H(i) = -(-r)^i` truncated at `depth`.
pub fn gt_weights(r: f64, depth: usize) -> LinearWeights {
    let coeffs = (1..=depth as u32)
        .map(|i| -(-r).powi(i as i32))
        .collect();
    LinearWeights::new(coeffs).expect("alternating-series weights are finite and nonempty")
}

/// Smoothing law for the stochastic-truncation weights: the estimator only
/// keeps the series term at multiplicity `i` with probability `P(L >= i)`.
#[derive(Clone)]
pub enum SmoothingDistribution {
    /// Point mass at `k`: tail is 1 up to `k` and 0 beyond. `u32::MAX`
    /// reads as "never truncate" and reproduces the plain alternating
    /// series; `Degenerate(0)` zeroes every weight.
    Degenerate(u32),
    Binomial { k: u32, q: f64 },
    Poisson { lambda: f64 },
    /// User-supplied tail function `i -> P(L >= i)`; must start at 1 and
    /// decrease within [0, 1].
    Custom(Arc<dyn Fn(u32) -> f64 + Send + Sync>),
}

impl fmt::Debug for SmoothingDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl SmoothingDistribution {
    /// Binomial smoothing with the published default parameters for a
    /// sample of `n` events at ratio `r`: `q = 2/(r+2)` and
    /// `k = ceil(log_3(n r^2 / (r-1)) / 2)`. The formula only makes sense
    /// for `r > 1`; at or below that the smoothing degenerates to the plain
    /// alternating series, which is already safe there.
    pub fn binomial_suggested(n: f64, r: f64) -> SmoothingDistribution {
        if r <= 1.0 || !n.is_finite() || n <= 0.0 {
            return SmoothingDistribution::Degenerate(u32::MAX);
        }
        let arg = n * r * r / (r - 1.0);
        let k = (0.5 * arg.ln() / 3.0f64.ln()).ceil().max(0.0) as u32;
        SmoothingDistribution::Binomial { k, q: 2.0 / (r + 2.0) }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SmoothingDistribution::Degenerate(_) => Ok(()),
            SmoothingDistribution::Binomial { q, .. } => {
                if (0.0..=1.0).contains(q) && q.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSmoothing(format!(
                        "binomial success probability must lie in [0,1], got {q}"
                    )))
                }
            }
            SmoothingDistribution::Poisson { lambda } => {
                if *lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSmoothing(format!(
                        "poisson rate must be non-negative, got {lambda}"
                    )))
                }
            }
            SmoothingDistribution::Custom(_) => Ok(()),
        }
    }

    /// `P(L >= i)` for a validated distribution.
    pub fn tail(&self, i: u32) -> f64 {
        if i == 0 {
            return 1.0;
        }
        match self {
            SmoothingDistribution::Degenerate(k) => {
                if i <= *k {
                    1.0
                } else {
                    0.0
                }
            }
            SmoothingDistribution::Binomial { k, q } => {
                if i > *k {
                    0.0
                } else if *q == 0.0 {
                    0.0
                } else if *q == 1.0 {
                    1.0
                } else {
                    let law = statrs::distribution::Binomial::new(*q, *k as u64)
                        .expect("validated binomial parameters");
                    1.0 - law.cdf((i - 1) as u64)
                }
            }
            SmoothingDistribution::Poisson { lambda } => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    let law = statrs::distribution::Poisson::new(*lambda)
                        .expect("validated poisson rate");
                    1.0 - law.cdf((i - 1) as u64)
                }
            }
            SmoothingDistribution::Custom(tail) => tail(i),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SmoothingDistribution::Degenerate(k) if *k == u32::MAX => {
                "degenerate(k=unbounded)".into()
            }
            SmoothingDistribution::Degenerate(k) => format!("degenerate(k={k})"),
            SmoothingDistribution::Binomial { k, q } => format!("binomial(k={k}, q={q})"),
            SmoothingDistribution::Poisson { lambda } => format!("poisson(lambda={lambda})"),
            SmoothingDistribution::Custom(_) => "custom".into(),
        }
    }
}

/// Stochastically truncated series weights `H(i) = -P(L >= i) (-r)^i` for
/// `i = 1..=depth`.
pub fn sgt_weights(
    h: &Horizon,
    smoothing: &SmoothingDistribution,
    depth: usize,
) -> Result<LinearWeights> {
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "smoothing weights need depth >= 1".into(),
        ));
    }
    smoothing.validate()?;
    let r = h.r();
    let mut prev = smoothing.tail(0);
    if (prev - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSmoothing(format!(
            "tail function must start at 1, got tail(0) = {prev}"
        )));
    }
    let mut coeffs = Vec::with_capacity(depth);
    for i in 1..=depth as u32 {
        let tail = smoothing.tail(i);
        if !(0.0..=1.0).contains(&tail) || !tail.is_finite() {
            return Err(Error::InvalidSmoothing(format!(
                "tail({i}) = {tail} leaves [0,1]"
            )));
        }
        if tail > prev + 1e-12 {
            return Err(Error::InvalidSmoothing(format!(
                "tail function must be non-increasing, but tail({i}) = {tail} > {prev}"
            )));
        }
        prev = tail;
        coeffs.push(-tail * (-r).powi(i as i32));
    }
    LinearWeights::new(coeffs)
}

/// How a power-law index estimate was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    RatioPhi1,
    Fixed,
}

/// A power-law index in [0, 1] together with how it was obtained.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    pub source: AlphaSource,
}

impl AlphaEstimate {
    /// Externally supplied index, for simulations with a known law.
    pub fn fixed(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power-law index must lie in [0,1], got {alpha}"
            )));
        }
        Ok(AlphaEstimate { alpha_hat: alpha, source: AlphaSource::Fixed })
    }
}

/// Singleton-share estimate of the power-law index, `phi_1 / S_t`.
pub fn ratio_alpha(profile: &FrequencyProfile) -> Result<AlphaEstimate> {
    let s_t = profile.distinct();
    if s_t == 0 {
        return Err(Error::Undefined(
            "power-law index is undefined on an empty profile".into(),
        ));
    }
    let alpha_hat = (profile.phi(1) as f64 / s_t as f64).clamp(0.0, 1.0);
    Ok(AlphaEstimate { alpha_hat, source: AlphaSource::RatioPhi1 })
}

/// Power-law extrapolation `S_t ((1+r)^alpha - 1)`: under an index-`alpha`
/// law the species count grows like `t^alpha`, so stretching the window by
/// `1+r` multiplies it by `(1+r)^alpha`.
pub fn power_law_induced(profile: &FrequencyProfile, h: &Horizon, alpha: &AlphaEstimate) -> f64 {
    profile.distinct() as f64 * ((1.0 + h.r()).powf(alpha.alpha_hat) - 1.0)
}

/// Rational resummation of the alternating series: fit the
/// `[num_deg/den_deg]` Padé approximant to the power series with
/// coefficients `c_i = (-1)^(i+1) phi_i` and evaluate it at `r`. Agrees
/// with [`good_toulmin`] for small `r` but stays stable far beyond the
/// series' radius of convergence.
pub fn pade_gt(profile: &FrequencyProfile, h: &Horizon, order: (usize, usize)) -> Result<f64> {
    let (num_deg, den_deg) = order;
    let mut coeffs = vec![0.0; num_deg + den_deg + 1];
    for (idx, c) in coeffs.iter_mut().enumerate().skip(1) {
        let sign = if idx % 2 == 1 { 1.0 } else { -1.0 };
        *c = sign * profile.phi(idx as u32) as f64;
    }
    pade_approximant(&coeffs, num_deg, den_deg)?.eval(h.r())
}

/// Estimator selector for [`predict`] and the command-line interface.
#[derive(Clone, Debug)]
pub enum Method {
    Gt,
    Sgt(SmoothingDistribution),
    Linear(LinearWeights),
    HStar(crate::ghopt::OptimizeConfig),
    RatioAlpha,
    Pade { num_deg: usize, den_deg: usize },
    Null,
}

impl Method {
    /// The name used in CLI arguments, config files, and benchmark tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Gt => "gt",
            Method::Sgt(_) => "sgt",
            Method::Linear(_) => "linear",
            Method::HStar(_) => "hstar",
            Method::RatioAlpha => "ratio-alpha",
            Method::Pade { .. } => "pade",
            Method::Null => "null",
        }
    }
}

/// A point estimate with optional Gaussian uncertainty.
#[derive(Clone, Debug, Serialize)]
pub struct PredictionReport {
    /// CLI name of the method that produced the point.
    pub method: String,
    /// Human-readable note on parameters actually used (smoothing law,
    /// approximant order, estimated index, ...).
    pub detail: String,
    pub point: f64,
    pub variance: Option<VarianceProxy>,
    pub interval: Option<Interval>,
    pub nominal_level: Option<f64>,
}

fn weights_report(
    profile: &FrequencyProfile,
    method: &Method,
    detail: String,
    weights: &LinearWeights,
    proxy: VarianceProxy,
    level: Option<f64>,
) -> Result<PredictionReport> {
    let point = linear_estimate(profile, weights);
    let interval = level.map(|l| gaussian_interval(point, &proxy, l)).transpose()?;
    Ok(PredictionReport {
        method: method.label().into(),
        detail,
        point,
        variance: Some(proxy),
        interval,
        nominal_level: level,
    })
}

/// Runs the selected estimator and, where the method admits one, attaches a
/// plug-in variance and a two-sided Gaussian interval at `level`.
///
/// The power-law and rational-resummation methods carry no Gaussian theory;
/// their reports leave the uncertainty fields empty. Distant-future
/// intervals for the power-law method live in
/// [`crate::uncertainty::conservative_interval`].
pub fn predict(
    profile: &FrequencyProfile,
    h: &Horizon,
    method: &Method,
    level: Option<f64>,
) -> Result<PredictionReport> {
    let depth = (profile.max_multiplicity() as usize).max(1);
    match method {
        Method::Gt => {
            let point = good_toulmin(profile, h);
            let proxy = gt_variance_proxy(profile, h);
            let interval: Option<Interval> =
                level.map(|l| gaussian_interval(point, &proxy, l)).transpose()?;
            Ok(PredictionReport {
                method: method.label().into(),
                detail: "exact alternating series over the sparse profile".into(),
                point,
                variance: Some(proxy),
                interval,
                nominal_level: level,
            })
        }
        Method::Sgt(smoothing) => {
            let weights = sgt_weights(h, smoothing, depth)?;
            let proxy = linear_variance_proxy(profile, &weights);
            weights_report(
                profile,
                method,
                format!("smoothing {}", smoothing.describe()),
                &weights,
                proxy,
                level,
            )
        }
        Method::Linear(weights) => {
            let proxy = linear_variance_proxy(profile, weights);
            weights_report(
                profile,
                method,
                format!("user weights, depth {}", weights.depth()),
                &weights.clone(),
                proxy,
                level,
            )
        }
        Method::HStar(cfg) => {
            let (weights, cert) = crate::ghopt::optimize_hstar(*h, cfg)?;
            let proxy = linear_variance_proxy(profile, &weights);
            weights_report(
                profile,
                method,
                format!(
                    "minimax weights, depth {}, guarantee {:.6e}{}",
                    weights.depth(),
                    cert.evaluation.g_h,
                    if cert.certified { "" } else { " (uncertified)" }
                ),
                &weights,
                proxy,
                level,
            )
        }
        Method::RatioAlpha => {
            let alpha = ratio_alpha(profile)?;
            Ok(PredictionReport {
                method: method.label().into(),
                detail: format!("power-law index {:.6}", alpha.alpha_hat),
                point: power_law_induced(profile, h, &alpha),
                variance: None,
                interval: None,
                nominal_level: None,
            })
        }
        Method::Pade { num_deg, den_deg } => Ok(PredictionReport {
            method: method.label().into(),
            detail: format!("rational approximant order ({num_deg}, {den_deg})"),
            point: pade_gt(profile, h, (*num_deg, *den_deg))?,
            variance: None,
            interval: None,
            nominal_level: None,
        }),
        Method::Null => {
            let weights = LinearWeights::zeros(1);
            let proxy = linear_variance_proxy(profile, &weights);
            weights_report(profile, method, "always predicts zero".into(), &weights, proxy, level)
        }
    }
}
