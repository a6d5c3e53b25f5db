//! Uncertainty quantification for unseen-species predictions.
//!
//! Three regimes, three tool families:
//!
//! * Near and intermediate futures: Gaussian prediction intervals around a
//!   linear point estimate, scaled by a plug-in variance proxy
//!   ([`gt_variance_proxy`], [`linear_variance_proxy`], [`gaussian_interval`]).
//! * Distant futures: conservative intervals derived from a six-term
//!   exponential tail bound on the deviation of the power-law induced
//!   estimate ([`far_future_tail`], [`conservative_interval`]). The bound is
//!   instantiated with observable plug-ins: the growth scale is replaced by
//!   the observed species count `S_t`, the expected future count by
//!   `S_t * (1+r)^alpha_hat`, and every smooth-part transform by zero.
//! * Incidence streams (events are sets of species): diagnostics that measure
//!   how far the stream sits from the independent-species regime
//!   ([`epsilon_hat`], [`codiscovery_diagnostic`], [`perfect_pair_bound`]).
//!
//! Variance proxies can be driven negative by sampling noise; they are
//! clamped at zero and the clamping is recorded on the returned value rather
//! than treated as an error.

use std::collections::HashMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ingest::ObservationStream;
use crate::types::{FrequencyProfile, Horizon};

/// Default occupancy split between the two halves of the distant-future
/// deviation argument. Any value in (0,1) is valid; 0.5 balances the halves.
pub const DEFAULT_OCCUPANCY_SPLIT: f64 = 0.5;

/// Which plug-in variance formula produced a [`VarianceProxy`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    GtProxy,
    LinearProxy,
}

/// A non-negative plug-in estimate of prediction variance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VarianceProxy {
    /// Clamped value, always ≥ 0.
    pub value: f64,
    pub kind: ProxyKind,
    /// True when the raw formula came out negative and was clamped to 0.
    pub clamped: bool,
}

/// A closed prediction interval. The lower endpoint is reported as computed,
/// even when negative; truncating at 0 is a display choice left to callers.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn clamped_proxy(raw: f64, kind: ProxyKind) -> VarianceProxy {
    if raw < 0.0 {
        VarianceProxy { value: 0.0, kind, clamped: true }
    } else {
        VarianceProxy { value: raw, kind, clamped: false }
    }
}

/// Variance proxy for the alternating-series estimator:
/// `sum_i phi_i r^{2i} + point estimate`.
///
/// The Gaussian limit behind this proxy holds for `r <= 1`; larger ratios
/// are accepted with a warning so exploratory use stays possible.
pub fn gt_variance_proxy(profile: &FrequencyProfile, h: &Horizon) -> VarianceProxy {
    if h.r() > 1.0 {
        log::warn!(
            "variance proxy requested at r = {} > 1, outside the Gaussian regime",
            h.r()
        );
    }
    let r = h.r();
    let mut raw = crate::estimators::good_toulmin(profile, h);
    for (i, count) in profile.iter() {
        raw += count as f64 * r.powi(2 * i as i32);
    }
    clamped_proxy(raw, ProxyKind::GtProxy)
}

/// Variance proxy for an arbitrary linear estimator with weights `H`:
/// `sum_i H(i)^2 phi_i + sum_i H(i) phi_i`.
pub fn linear_variance_proxy(
    profile: &FrequencyProfile,
    weights: &crate::types::LinearWeights,
) -> VarianceProxy {
    let mut raw = 0.0;
    for (i, count) in profile.iter() {
        let hi = weights.h(i);
        raw += count as f64 * (hi * hi + hi);
    }
    clamped_proxy(raw, ProxyKind::LinearProxy)
}

/// Two-sided Gaussian prediction interval `point ± z(level) * sqrt(proxy)`.
pub fn gaussian_interval(point: f64, proxy: &VarianceProxy, level: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal is well defined");
    let half = normal.inverse_cdf(0.5 * (1.0 + level)) * proxy.value.sqrt();
    Ok(Interval { lo: point - half, hi: point + half })
}

/// Observable plug-ins feeding the distant-future tail bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailPlugIns {
    /// Observed number of distinct species, standing in for `E[S_t]`.
    pub s_t: f64,
    /// Observed number of species seen at least twice, for `E[S_t^(2)]`.
    pub s_t2: f64,
    /// Projected future species count `S_t * (1+r)^alpha_hat`.
    pub s_future_hat: f64,
    /// Ratio estimate of the power-law index, `phi_1 / S_t`.
    pub alpha_hat: f64,
    /// Plug-in for the power-law growth scale; under the pure power-law
    /// approximation this equals the observed `S_t`.
    pub growth_scale: f64,
}

impl TailPlugIns {
    /// Build plug-ins from an observed profile and the prediction horizon.
    pub fn from_profile(profile: &FrequencyProfile, h: &Horizon) -> Result<Self> {
        let s_t = profile.distinct() as f64;
        if s_t <= 0.0 {
            return Err(Error::Undefined(
                "distant-future plug-ins need at least one observed species".into(),
            ));
        }
        let alpha_hat = profile.phi(1) as f64 / s_t;
        let s_t2 = profile.s_at_least(2)? as f64;
        Ok(TailPlugIns {
            s_t,
            s_t2,
            s_future_hat: s_t * (1.0 + h.r()).powf(alpha_hat),
            alpha_hat,
            growth_scale: s_t,
        })
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("s_t", self.s_t),
            ("s_t2", self.s_t2),
            ("s_future_hat", self.s_future_hat),
            ("alpha_hat", self.alpha_hat),
            ("growth_scale", self.growth_scale),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "tail-bound plug-in {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Largest deviation `z` the tail bound can certify: beyond
    /// `(1/p) (1+r)^alpha (1 + 2 ln(1+r)) * growth_scale` the deviation
    /// transfer between occupancy scales breaks down.
    pub fn admissible_z_max(&self, h: &Horizon, p_split: f64) -> f64 {
        (1.0 / p_split)
            * (1.0 + h.r()).powf(self.alpha_hat)
            * (1.0 + 2.0 * (1.0 + h.r()).ln())
            * self.growth_scale
    }
}

/// One evaluation point of the distant-future tail bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailBoundQuery {
    /// Deviation magnitude being bounded.
    pub z: f64,
    /// Occupancy split `p` in (0,1); the complementary share is `1 - p`.
    pub p_split: f64,
    /// Upper bound on the number of species per event.
    pub arity_bound: u32,
    pub plug_ins: TailPlugIns,
}

impl TailBoundQuery {
    fn validate(&self) -> Result<()> {
        self.plug_ins.validate()?;
        if !self.z.is_finite() || self.z < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "deviation z must be finite and non-negative, got {}",
                self.z
            )));
        }
        if !(self.p_split > 0.0 && self.p_split < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "occupancy split must lie in (0,1), got {}",
                self.p_split
            )));
        }
        if self.arity_bound == 0 {
            return Err(Error::InvalidParameter(
                "arity bound must be a positive integer".into(),
            ));
        }
        Ok(())
    }
}

/// Deviation transferred from the future occupancy scale back to the past:
///
/// ```text
///           p z G (1+r)^(-a)
/// d(z) = ------------------------------------------------
///        (1 + 2 ln(1+r)) G + p z (2-a) ln(1+r) (1+r)^(-a)
/// ```
///
/// where `G` is the growth-scale plug-in and `a` the estimated power-law
/// index. Increasing in `z` and valid only below [`TailPlugIns::admissible_z_max`].
pub fn d_of_z(q: &TailBoundQuery, h: &Horizon) -> Result<f64> {
    q.validate()?;
    let z_max = q.plug_ins.admissible_z_max(h, q.p_split);
    if q.z >= z_max {
        return Err(Error::ThresholdExceeded { z: q.z, z_max });
    }
    let a = q.plug_ins.alpha_hat;
    let g = q.plug_ins.growth_scale;
    let shrink = (1.0 + h.r()).powf(-a);
    let log_grow = (1.0 + h.r()).ln();
    let num = q.p_split * q.z * g * shrink;
    let den = (1.0 + 2.0 * log_grow) * g + q.p_split * q.z * (2.0 - a) * log_grow * shrink;
    if den <= 0.0 {
        return Err(Error::InvalidParameter(
            "deviation transfer denominator vanished; growth scale must be positive".into(),
        ));
    }
    Ok(num / den)
}

/// `exp(-num/den)` with the zero-denominator convention: a positive
/// numerator over a zero denominator is a vanishing bound, a zero numerator
/// is a vacuous one.
fn guarded_exp(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (-num / den).exp()
    } else if num > 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Six-term tail bound on `P(|future deviation| >= z)` for bounded-arity
/// incidence streams. Raw sum of the six exponentials, in [0, 6]; values
/// above 1 are vacuous but reported untrimmed so callers can see how far
/// from informative the bound is.
///
/// Term structure, with `q = 1 - p`, `d = d_of_z(z)`, `B` the arity bound:
/// sub-Gaussian and Bernstein factors in `(qz)^2` against the projected
/// future count, the same pair in `d^2` against the observed count, and a
/// second-occupancy pair in `d^2` against the twice-seen count.
pub fn far_future_tail(q: &TailBoundQuery, h: &Horizon) -> Result<f64> {
    let d = d_of_z(q, h)?;
    let b = q.arity_bound as f64;
    let qz = (1.0 - q.p_split) * q.z;
    let future = q.plug_ins.s_future_hat;
    let past = q.plug_ins.s_t;
    let twice = q.plug_ins.s_t2;

    let n_future = qz * qz;
    let n_past = d * d;
    let sum = guarded_exp(n_future, 2.0 * b * future)
        + guarded_exp(n_future, 2.0 * b * future + (2.0 / 3.0) * b * qz)
        + guarded_exp(n_past, 2.0 * b * past)
        + guarded_exp(n_past, 2.0 * b * past + (2.0 / 3.0) * b * d)
        + guarded_exp(n_past, (4.0 * b - 2.0) * twice)
        + guarded_exp(n_past, (4.0 * b - 2.0) * twice + ((4.0 * b - 2.0) / 3.0) * d);
    Ok(sum)
}

/// Conservative distant-future interval around the power-law induced
/// estimate, using the default occupancy split.
pub fn conservative_interval(
    profile: &FrequencyProfile,
    h: &Horizon,
    arity_bound: u32,
    level: f64,
) -> Result<Interval> {
    conservative_interval_with(profile, h, arity_bound, level, DEFAULT_OCCUPANCY_SPLIT)
}

/// As [`conservative_interval`], with an explicit occupancy split.
///
/// Bisects for the smallest deviation `z` whose capped tail bound
/// `min(1, far_future_tail(z))` drops to `1 - level`, and returns
/// `point ± z` around the induced estimate. When even the largest
/// admissible `z` cannot certify the requested level, the bound is vacuous
/// and an error says so.
pub fn conservative_interval_with(
    profile: &FrequencyProfile,
    h: &Horizon,
    arity_bound: u32,
    level: f64,
    p_split: f64,
) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let plug_ins = TailPlugIns::from_profile(profile, h)?;
    let alpha = crate::estimators::ratio_alpha(profile)?;
    let point = crate::estimators::power_law_induced(profile, h, &alpha);
    let z_max = plug_ins.admissible_z_max(h, p_split);
    let target = 1.0 - level;
    let capped_tail = |z: f64| -> Result<f64> {
        let query = TailBoundQuery { z, p_split, arity_bound, plug_ins };
        Ok(far_future_tail(&query, h)?.min(1.0))
    };

    let mut hi = z_max * (1.0 - 1e-9);
    if capped_tail(hi)? > target {
        return Err(Error::VacuousBound { level });
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capped_tail(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Interval { lo: point - hi, hi: point + hi })
}

/// Solves the deviation-transfer equation: given `x, y, z, k > 0`, `c > 1`
/// with `(z/(kx)) c^(y/x) < 1`, returns
///
/// ```text
/// d = x^2 z c^(y/x) / (k x^2 + (x+y) z c^(y/x) ln c)
/// ```
///
/// which satisfies `c^(-(y-d)/(x+d)) * k * d < z`.
pub fn trans_eq_d(x: f64, y: f64, z: f64, c: f64, k: f64) -> Result<f64> {
    for (name, v) in [("x", x), ("y", y), ("z", z), ("k", k)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "deviation-transfer input {name} must be positive and finite, got {v}"
            )));
        }
    }
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "deviation-transfer base c must exceed 1, got {c}"
        )));
    }
    let amplified = (z / (k * x)) * c.powf(y / x);
    if amplified >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "deviation-transfer precondition (z/(kx)) c^(y/x) < 1 fails: got {amplified}"
        )));
    }
    let grow = c.powf(y / x);
    Ok(x * x * z * grow / (k * x * x + (x + y) * z * grow * c.ln()))
}

fn pair_statistics(stream: &ObservationStream) -> (HashMap<u32, u64>, HashMap<(u32, u32), u64>) {
    let mut occurrences: HashMap<u32, u64> = HashMap::new();
    let mut co_occurrences: HashMap<(u32, u32), u64> = HashMap::new();
    for event in stream.events() {
        for &x in event {
            *occurrences.entry(x).or_insert(0) += 1;
        }
        for (idx, &x) in event.iter().enumerate() {
            for &y in &event[idx + 1..] {
                *co_occurrences.entry((x, y)).or_insert(0) += 1;
            }
        }
    }
    (occurrences, co_occurrences)
}

/// Plug-in estimate of the cross-species error term induced by events that
/// carry several species at once:
///
/// ```text
/// sum over ordered pairs (x, y) of
///   (r^(2C) - (-r)^C) * (-r)^((Nx - C) + (Ny - C))
/// ```
///
/// where `C` counts events containing both species and `Nx`, `Ny` events
/// containing each. Pairs that never co-occur contribute exactly 0, so a
/// singleton-only stream scores 0.
pub fn epsilon_hat(stream: &ObservationStream, h: &Horizon) -> f64 {
    let r = h.r();
    let (occurrences, co_occurrences) = pair_statistics(stream);
    let mut sum = 0.0;
    for (&(x, y), &c) in &co_occurrences {
        let c_i32 = c.min(i32::MAX as u64) as i32;
        let n_x = occurrences[&x];
        let n_y = occurrences[&y];
        let solo = (n_x - c) + (n_y - c);
        let first = r.powi(2 * c_i32) - (-r).powi(c_i32);
        let second = (-r).powi(solo.min(i32::MAX as u64) as i32);
        sum += 2.0 * first * second;
    }
    sum
}

/// Co-discovery counts: ordered pairs of species whose first containing
/// event was the same one.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoDiscovery {
    pub codiscovered_pairs: u64,
    pub discovered_species: u64,
    /// Pairs per discovered species; 0 when nothing was discovered.
    pub ratio: f64,
}

/// Counts ordered pairs discovered by the same event. Small counts indicate
/// the stream behaves like independent singleton observations.
pub fn codiscovery_diagnostic(stream: &ObservationStream) -> CoDiscovery {
    let mut seen: HashMap<u32, ()> = HashMap::new();
    let mut pairs = 0u64;
    for event in stream.events() {
        let mut fresh = 0u64;
        for &x in event {
            if seen.insert(x, ()).is_none() {
                fresh += 1;
            }
        }
        pairs += fresh * fresh.saturating_sub(1);
    }
    let discovered = seen.len() as u64;
    CoDiscovery {
        codiscovered_pairs: pairs,
        discovered_species: discovered,
        ratio: if discovered == 0 { 0.0 } else { pairs as f64 / discovered as f64 },
    }
}

/// Worst-case cross-species error for streams whose dependent pairs are all
/// "perfect": `r (r+1) * #(ordered pairs co-observed exactly once)`.
pub fn perfect_pair_bound(stream: &ObservationStream, h: &Horizon) -> f64 {
    let (_, co_occurrences) = pair_statistics(stream);
    let exactly_once = co_occurrences.values().filter(|&&c| c == 1).count() as f64;
    h.r() * (h.r() + 1.0) * 2.0 * exactly_once
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile(pairs: &[(u32, u64)]) -> FrequencyProfile {
        FrequencyProfile::from_counts(pairs.iter().map(|&(i, c)| (i, c as i64))).unwrap()
    }

    fn stream_of(sets: &[&[u32]]) -> ObservationStream {
        let max_id = sets.iter().flat_map(|s| s.iter()).max().copied().unwrap_or(0);
        let species = (0..=max_id).map(|i| format!("species{i}")).collect();
        ObservationStream::new(species, sets.iter().map(|s| s.to_vec()).collect(), "test")
            .unwrap()
    }

    #[test]
    fn gt_proxy_matches_hand_computed_values() {
        let h = Horizon::new(10.0, 1.0).unwrap();
        let p = profile(&[(1, 2), (2, 1)]);
        let proxy = gt_variance_proxy(&p, &h);
        assert_abs_diff_eq!(proxy.value, 4.0);
        assert!(!proxy.clamped);

        let h = Horizon::new(10.0, 0.5).unwrap();
        let p = profile(&[(1, 10)]);
        assert_abs_diff_eq!(gt_variance_proxy(&p, &h).value, 7.5);

        let empty = FrequencyProfile::from_counts(std::iter::empty()).unwrap();
        assert_abs_diff_eq!(gt_variance_proxy(&empty, &h).value, 0.0);
    }

    #[test]
    fn gt_proxy_clamps_negative_values() {
        // phi_2 = 1, r = 0.5: raw proxy is 0.0625 - 0.25 = -0.1875.
        let h = Horizon::new(10.0, 0.5).unwrap();
        let proxy = gt_variance_proxy(&profile(&[(2, 1)]), &h);
        assert_abs_diff_eq!(proxy.value, 0.0);
        assert!(proxy.clamped);
        assert_eq!(proxy.kind, ProxyKind::GtProxy);
    }

    #[test]
    fn linear_proxy_examples() {
        let w = crate::types::LinearWeights::new(vec![2.0]).unwrap();
        let proxy = linear_variance_proxy(&profile(&[(1, 3)]), &w);
        assert_abs_diff_eq!(proxy.value, 18.0);
        assert!(!proxy.clamped);

        let w = crate::types::LinearWeights::new(vec![-1.0]).unwrap();
        let proxy = linear_variance_proxy(&profile(&[(1, 2)]), &w);
        assert_abs_diff_eq!(proxy.value, 0.0);
        assert!(!proxy.clamped);
    }

    #[test]
    fn linear_proxy_with_alternating_weights_matches_gt_proxy() {
        let h = Horizon::new(10.0, 1.0).unwrap();
        let p = profile(&[(1, 4), (2, 2), (3, 1)]);
        let w = crate::estimators::gt_weights(h.r(), 10);
        assert_relative_eq!(
            linear_variance_proxy(&p, &w).value,
            gt_variance_proxy(&p, &h).value,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gaussian_interval_examples() {
        let proxy = VarianceProxy { value: 4.0, kind: ProxyKind::GtProxy, clamped: false };
        let one_sigma = 0.682_689_492_137_086;
        let iv = gaussian_interval(1.0, &proxy, one_sigma).unwrap();
        assert_abs_diff_eq!(iv.lo, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(iv.hi, 3.0, epsilon = 1e-9);

        let degenerate = VarianceProxy { value: 0.0, kind: ProxyKind::GtProxy, clamped: false };
        let iv = gaussian_interval(5.0, &degenerate, 0.95).unwrap();
        assert_abs_diff_eq!(iv.lo, 5.0);
        assert_abs_diff_eq!(iv.hi, 5.0);

        let unit = VarianceProxy { value: 1.0, kind: ProxyKind::LinearProxy, clamped: false };
        let iv = gaussian_interval(0.0, &unit, 0.95).unwrap();
        assert_abs_diff_eq!(iv.hi, 1.959_963_984_540_053_6, epsilon = 1e-6);
        assert_abs_diff_eq!(iv.lo, -iv.hi);

        assert!(matches!(
            gaussian_interval(0.0, &unit, 0.0),
            Err(Error::InvalidLevel(_))
        ));
        assert!(matches!(
            gaussian_interval(0.0, &unit, 1.0),
            Err(Error::InvalidLevel(_))
        ));
    }

    fn oracle_query(z: f64) -> (TailBoundQuery, Horizon) {
        // alpha = 0.5, growth constant 1, t = 100: growth scale is
        // Gamma(0.5) * 100^0.5 = 17.724538509055158.
        let plug_ins = TailPlugIns {
            s_t: 17.724538509055158,
            s_t2: 5.0,
            s_future_hat: 17.724538509055158 * 10f64.sqrt(),
            alpha_hat: 0.5,
            growth_scale: 17.724538509055158,
        };
        let q = TailBoundQuery { z, p_split: 0.5, arity_bound: 1, plug_ins };
        (q, Horizon::new(100.0, 9.0).unwrap())
    }

    #[test]
    fn deviation_transfer_matches_frozen_oracle() {
        let (q, h) = oracle_query(10.0);
        assert_abs_diff_eq!(d_of_z(&q, &h).unwrap(), 0.267_387_895_901_263_8, epsilon = 1e-12);
        assert_abs_diff_eq!(
            q.plug_ins.admissible_z_max(&h, q.p_split),
            628.338_593_177_575_8,
            epsilon = 1e-9
        );
    }

    #[test]
    fn deviation_transfer_is_linear_at_zero_and_respects_threshold() {
        let (q, h) = oracle_query(1e-9);
        let slope = q.p_split * (1.0 + h.r()).powf(-q.plug_ins.alpha_hat)
            / (1.0 + 2.0 * (1.0 + h.r()).ln());
        assert_relative_eq!(d_of_z(&q, &h).unwrap() / 1e-9, slope, max_relative = 1e-6);

        let (q, h) = oracle_query(1e9);
        match d_of_z(&q, &h) {
            Err(Error::ThresholdExceeded { z, z_max }) => {
                assert_abs_diff_eq!(z, 1e9);
                assert!(z_max < 1e9);
            }
            other => panic!("expected threshold error, got {other:?}"),
        }
    }

    #[test]
    fn deviation_transfer_degenerates_to_direct_share_without_growth() {
        // r -> 0+: the transfer denominator collapses to the growth scale
        // and d(z) -> p z.
        let plug_ins = TailPlugIns {
            s_t: 50.0,
            s_t2: 10.0,
            s_future_hat: 50.0,
            alpha_hat: 0.5,
            growth_scale: 50.0,
        };
        let q = TailBoundQuery { z: 3.0, p_split: 0.4, arity_bound: 2, plug_ins };
        let h = Horizon::new(10.0, 1e-12).unwrap();
        assert_relative_eq!(d_of_z(&q, &h).unwrap(), 0.4 * 3.0, max_relative = 1e-9);
    }

    #[test]
    fn tail_bound_is_six_at_zero_and_monotone_in_z() {
        let (q0, h) = oracle_query(0.0);
        assert_abs_diff_eq!(far_future_tail(&q0, &h).unwrap(), 6.0);

        let z_hi = q0.plug_ins.admissible_z_max(&h, q0.p_split) * 0.95;
        let mut prev = f64::INFINITY;
        for step in 0..=60 {
            let z = z_hi * step as f64 / 60.0;
            let (q, h) = oracle_query(z);
            let tail = far_future_tail(&q, &h).unwrap();
            assert!(
                tail <= prev + 1e-12,
                "tail bound increased at z = {z}: {tail} > {prev}"
            );
            prev = tail;
        }
    }

    #[test]
    fn tail_bound_drops_below_one_for_large_populations() {
        let plug_ins = TailPlugIns {
            s_t: 1.0e4,
            s_t2: 4.0e3,
            s_future_hat: 1.0e4 * 10f64.sqrt(),
            alpha_hat: 0.5,
            growth_scale: 1.0e4,
        };
        let h = Horizon::new(1.0e4, 9.0).unwrap();
        let z = plug_ins.admissible_z_max(&h, 0.5) * 0.5;
        let q = TailBoundQuery { z, p_split: 0.5, arity_bound: 1, plug_ins };
        assert!(far_future_tail(&q, &h).unwrap() < 1.0);
    }

    #[test]
    fn tail_bound_weakens_with_larger_arity() {
        let (mut q, h) = oracle_query(80.0);
        let narrow = far_future_tail(&q, &h).unwrap();
        q.arity_bound = 3;
        let wide = far_future_tail(&q, &h).unwrap();
        assert!(narrow <= wide + 1e-15);
    }

    #[test]
    fn conservative_interval_narrows_at_weaker_levels() {
        let p = profile(&[(1, 4000), (2, 2000), (3, 900), (4, 400)]);
        let h = Horizon::new(1000.0, 9.0).unwrap();
        let strict = conservative_interval(&p, &h, 1, 0.9).unwrap();
        let loose = conservative_interval(&p, &h, 1, 0.5).unwrap();
        assert!(loose.width() < strict.width());

        let alpha = crate::estimators::ratio_alpha(&p).unwrap();
        let point = crate::estimators::power_law_induced(&p, &h, &alpha);
        assert_relative_eq!(
            0.5 * (strict.lo + strict.hi),
            point,
            max_relative = 1e-9
        );
    }

    #[test]
    fn conservative_interval_reports_vacuous_bounds() {
        let p = profile(&[(1, 1)]);
        let h = Horizon::new(10.0, 9.0).unwrap();
        match conservative_interval(&p, &h, 1, 0.5) {
            Err(Error::VacuousBound { level }) => assert_abs_diff_eq!(level, 0.5),
            other => panic!("expected vacuous-bound error, got {other:?}"),
        }
    }

    #[test]
    fn trans_eq_matches_frozen_oracle_and_inequality() {
        // x = y = k = 1, c = 2, z = 0.4: d = 0.8 / (1 + 0.8 ln 2).
        let d = trans_eq_d(1.0, 1.0, 0.4, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(d, 0.379_320_312_157_858_9, epsilon = 1e-12);
        let lhs = 2.0f64.powf(-(1.0 - d) / (1.0 + d)) * d;
        assert!(lhs < 0.4);

        assert!(trans_eq_d(1.0, 1.0, 1e-9, 2.0, 1.0).unwrap() < 1e-8);

        assert!(trans_eq_d(1.0, 1.0, 0.6, 2.0, 1.0).is_err());
        assert!(trans_eq_d(1.0, 1.0, 0.4, 0.9, 1.0).is_err());
        assert!(trans_eq_d(-1.0, 1.0, 0.4, 2.0, 1.0).is_err());
    }

    #[test]
    fn trans_eq_postcondition_holds_on_random_admissible_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7261_6e73);
        let mut checked = 0usize;
        while checked < 10_000 {
            let x: f64 = rng.gen_range(0.1..10.0);
            let y: f64 = rng.gen_range(0.1..10.0);
            let c: f64 = rng.gen_range(1.0001..20.0);
            let k: f64 = rng.gen_range(0.1..10.0);
            let ceiling = k * x * c.powf(-y / x);
            if !ceiling.is_finite() || ceiling <= 1e-12 {
                continue;
            }
            let z = rng.gen_range(0.0..1.0) * 0.999 * ceiling;
            if z <= 0.0 {
                continue;
            }
            let d = trans_eq_d(x, y, z, c, k).unwrap();
            let lhs = c.powf(-(y - d) / (x + d)) * k * d;
            assert!(
                lhs < z,
                "postcondition failed at x={x} y={y} z={z} c={c} k={k}: {lhs} >= {z}"
            );
            checked += 1;
        }
    }

    #[test]
    fn epsilon_is_zero_for_singleton_streams() {
        let stream = stream_of(&[&[0], &[1], &[0], &[2]]);
        let h = Horizon::new(4.0, 0.7).unwrap();
        assert_abs_diff_eq!(epsilon_hat(&stream, &h), 0.0);
    }

    #[test]
    fn epsilon_matches_hand_computed_values() {
        let h = Horizon::new(1.0, 1.0).unwrap();
        let stream = stream_of(&[&[0, 1]]);
        assert_abs_diff_eq!(epsilon_hat(&stream, &h), 4.0);

        // Events {a,b} and {a} at r = 0.5: C = 1, Na = 2, Nb = 1, so each
        // ordered pair contributes (0.25 + 0.5) * (-0.5) = -0.375.
        let h = Horizon::new(2.0, 0.5).unwrap();
        let stream = stream_of(&[&[0, 1], &[0]]);
        assert_abs_diff_eq!(epsilon_hat(&stream, &h), -0.75, epsilon = 1e-12);
    }

    #[test]
    fn codiscovery_counts_pairs_found_by_the_same_event() {
        let singles = stream_of(&[&[0], &[1], &[0]]);
        let d = codiscovery_diagnostic(&singles);
        assert_eq!(d.codiscovered_pairs, 0);
        assert_eq!(d.discovered_species, 2);
        assert_abs_diff_eq!(d.ratio, 0.0);

        let pair = stream_of(&[&[0, 1]]);
        let d = codiscovery_diagnostic(&pair);
        assert_eq!(d.codiscovered_pairs, 2);
        assert_eq!(d.discovered_species, 2);
        assert_abs_diff_eq!(d.ratio, 1.0);

        let disjoint_triples = stream_of(&[&[0, 1, 2], &[3, 4, 5]]);
        let d = codiscovery_diagnostic(&disjoint_triples);
        assert_eq!(d.codiscovered_pairs, 12);
        assert_eq!(d.discovered_species, 6);

        // A revisited species is not rediscovered.
        let revisit = stream_of(&[&[0, 1], &[0, 2]]);
        assert_eq!(codiscovery_diagnostic(&revisit).codiscovered_pairs, 2);
    }

    #[test]
    fn perfect_pair_bound_counts_single_coobservations() {
        let h = Horizon::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(perfect_pair_bound(&stream_of(&[&[0, 1]]), &h), 4.0);
        assert_abs_diff_eq!(perfect_pair_bound(&stream_of(&[&[0, 1], &[0, 1]]), &h), 0.0);
        assert_abs_diff_eq!(perfect_pair_bound(&stream_of(&[&[0], &[1]]), &h), 0.0);
    }
}
