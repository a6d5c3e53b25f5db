//! Poissonized Monte-Carlo simulator and closed-form oracles.
//!
//! Observations arrive as a marked Poisson process: every set `C` in the
//! model fires `Poisson(t * intensity(C))` times in the past window and
//! `Poisson(r * t * intensity(C))` times in the future window, independently
//! across sets. A species' multiplicity is the total count over the sets
//! containing it, which makes per-species counts Poisson with the aggregated
//! intensity and lets every first- and second-moment quantity be written in
//! closed form. Those closed forms live here next to the sampler and serve
//! as oracles for the Monte-Carlo checks:
//!
//! * [`mc_mse`] estimates an estimator's mean squared error by replication;
//! * [`error_decomposition_check`] compares it against the per-species part
//!   `delta(t)` plus the cross-species part `epsilon(t)`;
//! * [`concentration_check`] and [`phi_concentration_check`] test the
//!   exponential tail bounds for `S_t^(i)` and `phi_i`;
//! * [`laplace_identity_check`] verifies the tail-measure transform
//!   identities by adaptive quadrature;
//! * [`alpha_rate_check`] measures the convergence rate of the singleton
//!   index estimate on a truncated power-law model.
//!
//! Replications derive independent ChaCha streams from one master seed, so
//! every result is reproducible from `(model, horizon, seed)`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    good_toulmin, linear_estimate, pade_gt, power_law_induced, ratio_alpha, sgt_weights, Method,
};
use crate::ingest::ObservationStream;
use crate::types::{FrequencyProfile, Horizon};

/// Below this expected total count a set cannot fire at double precision,
/// so intensity-sorted models stop sampling early and report the skipped
/// mass instead.
const NEGLIGIBLE_EXPECTED_COUNT: f64 = 1e-12;

/// Population being simulated: per-set intensities, either singletons
/// (classical) or explicit species sets (incidence).
#[derive(Clone, Debug)]
pub enum ModelKind {
    /// One intensity per species; set `s` is the singleton `{s}`.
    Classical(Vec<f64>),
    /// Explicit sets with intensities; ids are sorted and deduplicated.
    Incidence(Vec<(Vec<u32>, f64)>),
}

#[derive(Clone, Debug)]
pub struct SpeciesModel {
    kind: ModelKind,
    n_species: u32,
    arity_bound: u32,
    /// True when set intensities are non-increasing, enabling the
    /// negligible-tail early exit during sampling.
    sorted_desc: bool,
}

#[derive(Serialize, Deserialize)]
struct SetSchema {
    ids: Vec<u32>,
    intensity: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelSchema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sets: Option<Vec<SetSchema>>,
}

fn validate_intensity(v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidModel(format!(
            "intensities must be finite and non-negative, got {v}"
        )));
    }
    Ok(v)
}

impl SpeciesModel {
    pub fn classical(weights: Vec<f64>) -> Result<Self> {
        for &w in &weights {
            validate_intensity(w)?;
        }
        let sorted_desc = weights.windows(2).all(|w| w[0] >= w[1]);
        Ok(SpeciesModel {
            n_species: weights.len() as u32,
            arity_bound: 1,
            sorted_desc,
            kind: ModelKind::Classical(weights),
        })
    }

    pub fn incidence(sets: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let mut cleaned = Vec::with_capacity(sets.len());
        let mut n_species = 0u32;
        let mut arity = 0u32;
        for (ids, intensity) in sets {
            validate_intensity(intensity)?;
            let mut ids = ids;
            ids.sort_unstable();
            ids.dedup();
            if ids.is_empty() {
                return Err(Error::InvalidModel("sets must be non-empty".into()));
            }
            n_species = n_species.max(ids[ids.len() - 1] + 1);
            arity = arity.max(ids.len() as u32);
            cleaned.push((ids, intensity));
        }
        Ok(SpeciesModel {
            n_species,
            arity_bound: arity.max(1),
            sorted_desc: cleaned.windows(2).all(|w| w[0].1 >= w[1].1),
            kind: ModelKind::Incidence(cleaned),
        })
    }

    /// `k` species of equal intensity `1/k`.
    pub fn uniform(k: u32) -> Self {
        SpeciesModel::classical(vec![1.0 / k as f64; k as usize]).expect("uniform weights valid")
    }

    /// Truncated power law: species `s = 1..=k` get raw intensity
    /// `(s/c)^(-1/alpha)`, normalized to total intensity 1. The tail count
    /// function then tracks `const * x^(-alpha)` over the resolved range,
    /// which is what the index-estimation theory assumes.
    pub fn power_law(alpha: f64, c: f64, k: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidModel(format!(
                "power-law index must lie in (0,1), got {alpha}"
            )));
        }
        if !(c > 0.0 && c.is_finite()) || k == 0 {
            return Err(Error::InvalidModel(
                "power law needs a positive scale and at least one species".into(),
            ));
        }
        let mut weights = vec![0.0f64; k as usize];
        let mut total = 0.0;
        // Summed smallest-first so the normalizer is accurate.
        for s in (1..=k as usize).rev() {
            let w = (s as f64 / c).powf(-1.0 / alpha);
            weights[s - 1] = w;
            total += w;
        }
        for w in &mut weights {
            *w /= total;
        }
        SpeciesModel::classical(weights)
    }

    /// `k` species with intensity proportional to `1/s`.
    pub fn zipf(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidModel("zipf needs at least one species".into()));
        }
        let mut weights = vec![0.0f64; k as usize];
        let mut total = 0.0;
        for s in (1..=k as usize).rev() {
            let w = 1.0 / s as f64;
            weights[s - 1] = w;
            total += w;
        }
        for w in &mut weights {
            *w /= total;
        }
        SpeciesModel::classical(weights)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: ModelSchema = serde_json::from_str(text)?;
        match (schema.weights, schema.sets) {
            (Some(w), None) => SpeciesModel::classical(w),
            (None, Some(sets)) => {
                SpeciesModel::incidence(sets.into_iter().map(|s| (s.ids, s.intensity)).collect())
            }
            _ => Err(Error::InvalidModel(
                "model JSON needs exactly one of `weights` or `sets`".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        let schema = match &self.kind {
            ModelKind::Classical(w) => ModelSchema { weights: Some(w.clone()), sets: None },
            ModelKind::Incidence(sets) => ModelSchema {
                weights: None,
                sets: Some(
                    sets.iter()
                        .map(|(ids, intensity)| SetSchema {
                            ids: ids.clone(),
                            intensity: *intensity,
                        })
                        .collect(),
                ),
            },
        };
        serde_json::to_string_pretty(&schema).expect("model schema serializes")
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn species_count(&self) -> u32 {
        self.n_species
    }

    pub fn arity_bound(&self) -> u32 {
        self.arity_bound
    }

    pub fn total_intensity(&self) -> f64 {
        match &self.kind {
            ModelKind::Classical(w) => w.iter().sum(),
            ModelKind::Incidence(sets) => sets.iter().map(|(_, m)| m).sum(),
        }
    }

    /// Aggregated per-species intensity `M_x = sum of intensities of sets
    /// containing x`; per-species counts are `Poisson(M_x t)`.
    pub fn species_intensities(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::Classical(w) => w.clone(),
            ModelKind::Incidence(sets) => {
                let mut m = vec![0.0; self.n_species as usize];
                for (ids, intensity) in sets {
                    for &x in ids {
                        m[x as usize] += intensity;
                    }
                }
                m
            }
        }
    }

    /// Shared intensity `M_{x and y}` for every pair contained in some set.
    pub fn pair_intensities(&self) -> HashMap<(u32, u32), f64> {
        let mut pairs = HashMap::new();
        if let ModelKind::Incidence(sets) = &self.kind {
            for (ids, intensity) in sets {
                for (i, &x) in ids.iter().enumerate() {
                    for &y in &ids[i + 1..] {
                        *pairs.entry((x, y)).or_insert(0.0) += intensity;
                    }
                }
            }
        }
        pairs
    }

    /// `E[S_t] = sum_x (1 - e^(-M_x t))`.
    pub fn expected_seen(&self, t: f64) -> f64 {
        self.species_intensities()
            .iter()
            .map(|&m| -(-m * t).exp_m1())
            .sum()
    }

    /// `E[S_t^(i)] = sum_x P(Poisson(M_x t) >= i)`.
    pub fn expected_seen_at_least(&self, i: u32, t: f64) -> f64 {
        self.species_intensities()
            .iter()
            .map(|&m| poisson_tail_at_least(m * t, i))
            .sum()
    }

    /// `E[S_{t,T}] = sum_x e^(-M_x t)(1 - e^(-r M_x t))`.
    pub fn expected_new(&self, h: &Horizon) -> f64 {
        self.species_intensities()
            .iter()
            .map(|&m| (-m * h.t()).exp() * -(-h.r() * m * h.t()).exp_m1())
            .sum()
    }
}

/// `P(Poisson(lambda) >= i)` by direct summation of the complement.
fn poisson_tail_at_least(lambda: f64, i: u32) -> f64 {
    if i == 0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    let mut term = (-lambda).exp();
    let mut below = 0.0;
    for j in 0..i {
        below += term;
        term *= lambda / (j + 1) as f64;
    }
    (1.0 - below).max(0.0)
}

/// Poisson sampler: exact inversion for small means, the library sampler
/// otherwise.
fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 10.0 {
        let mut u: f64 = rng.gen();
        let mut p = (-lambda).exp();
        let mut n = 0u64;
        loop {
            if u < p {
                return n;
            }
            u -= p;
            n += 1;
            p *= lambda / n as f64;
            if n > 1_000 {
                return n;
            }
        }
    }
    let law = rand_distr::Poisson::new(lambda).expect("positive finite mean");
    rand_distr::Distribution::sample(&law, rng) as u64
}

/// One replication of the two-window experiment.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    /// Frequency profile of the past window.
    pub profile_t: FrequencyProfile,
    /// Species seen in the past window.
    pub s_t: u64,
    /// Species unseen in the past window but present in the future one.
    pub s_tt_true: u64,
    /// Species seen anywhere in the combined window.
    pub s_total: u64,
    /// Per-species `(id, past count, future count)` for species with any
    /// event; everything else is zero.
    pub active: Vec<(u32, u32, u32)>,
    /// Total intensity of sets skipped by the sorted-model early exit;
    /// bounds the expected number of unsimulated events.
    pub skipped_intensity: f64,
    pub seed: u64,
}

pub fn simulate(model: &SpeciesModel, h: &Horizon, seed: u64) -> SimOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcome = simulate_with_rng(model, h, &mut rng);
    outcome.seed = seed;
    outcome
}

/// As [`simulate`] with a caller-managed stream, used by the Monte-Carlo
/// drivers to derive one independent stream per replication.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &SpeciesModel,
    h: &Horizon,
    rng: &mut R,
) -> SimOutcome {
    let t = h.t();
    let r = h.r();
    let mut skipped = 0.0;
    let mut active: Vec<(u32, u32, u32)> = Vec::new();

    match &model.kind {
        ModelKind::Classical(weights) => {
            for (s, &w) in weights.iter().enumerate() {
                if model.sorted_desc && (1.0 + r) * t * w < NEGLIGIBLE_EXPECTED_COUNT {
                    skipped += weights[s..].iter().sum::<f64>();
                    break;
                }
                let past = sample_poisson(rng, t * w);
                let future = sample_poisson(rng, r * t * w);
                if past > 0 || future > 0 {
                    active.push((s as u32, past as u32, future as u32));
                }
            }
        }
        ModelKind::Incidence(sets) => {
            let mut past = vec![0u64; model.n_species as usize];
            let mut future = vec![0u64; model.n_species as usize];
            for (idx, (ids, intensity)) in sets.iter().enumerate() {
                if model.sorted_desc && (1.0 + r) * t * intensity < NEGLIGIBLE_EXPECTED_COUNT {
                    skipped += sets[idx..].iter().map(|(_, m)| m).sum::<f64>();
                    break;
                }
                let np = sample_poisson(rng, t * intensity);
                let nf = sample_poisson(rng, r * t * intensity);
                if np > 0 || nf > 0 {
                    for &x in ids {
                        past[x as usize] += np;
                        future[x as usize] += nf;
                    }
                }
            }
            for (x, (&np, &nf)) in past.iter().zip(future.iter()).enumerate() {
                if np > 0 || nf > 0 {
                    active.push((x as u32, np as u32, nf as u32));
                }
            }
        }
    }

    let mut counts: BTreeMap<u32, i64> = BTreeMap::new();
    let (mut s_t, mut s_new, mut s_total) = (0u64, 0u64, 0u64);
    for &(_, past, future) in &active {
        s_total += 1;
        if past > 0 {
            s_t += 1;
            *counts.entry(past).or_insert(0) += 1;
        } else if future > 0 {
            s_new += 1;
        }
    }
    SimOutcome {
        profile_t: FrequencyProfile::from_counts(counts).expect("simulated counts are valid"),
        s_t,
        s_tt_true: s_new,
        s_total,
        active,
        skipped_intensity: skipped,
        seed: 0,
    }
}

fn point_estimate(profile: &FrequencyProfile, h: &Horizon, method: &Method) -> Result<f64> {
    Ok(match method {
        Method::Gt => good_toulmin(profile, h),
        Method::Sgt(smoothing) => {
            let depth = (profile.max_multiplicity() as usize).max(1);
            linear_estimate(profile, &sgt_weights(h, smoothing, depth)?)
        }
        Method::Linear(w) => linear_estimate(profile, w),
        Method::HStar(cfg) => {
            let (w, _) = crate::ghopt::optimize_hstar(*h, cfg)?;
            linear_estimate(profile, &w)
        }
        Method::RatioAlpha => {
            if profile.distinct() == 0 {
                0.0
            } else {
                power_law_induced(profile, h, &ratio_alpha(profile)?)
            }
        }
        Method::Pade { num_deg, den_deg } => pade_gt(profile, h, (*num_deg, *den_deg))?,
        Method::Null => 0.0,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McMse {
    pub mse: f64,
    pub se: f64,
    pub reps: u64,
}

/// Monte-Carlo mean squared error of a method's point estimate against the
/// realized number of newly discovered species.
pub fn mc_mse(
    model: &SpeciesModel,
    h: &Horizon,
    method: &Method,
    reps: u64,
    seed: u64,
) -> Result<McMse> {
    if reps < 2 {
        return Err(Error::InvalidParameter("mc_mse needs reps >= 2".into()));
    }
    // Fitting is deterministic in (h, config), so hoist it out of the loop.
    let resolved = match method {
        Method::HStar(cfg) => Method::Linear(crate::ghopt::optimize_hstar(*h, cfg)?.0),
        other => other.clone(),
    };
    let mut sum_sq = 0.0;
    let mut sum_quad = 0.0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep);
        let outcome = simulate_with_rng(model, h, &mut rng);
        let err = point_estimate(&outcome.profile_t, h, &resolved)? - outcome.s_tt_true as f64;
        sum_sq += err * err;
        sum_quad += err * err * err * err;
    }
    let n = reps as f64;
    let mse = sum_sq / n;
    let var = ((sum_quad / n - mse * mse) * n / (n - 1.0)).max(0.0);
    Ok(McMse { mse, se: (var / n).sqrt(), reps })
}

/// Exact mean squared error of a linear estimator on a classical model:
/// per-species variances plus the squared total bias. The cross moment
/// `E[H(N) 1_new]` vanishes because `H(0) = 0`.
pub fn classical_linear_mse(
    model: &SpeciesModel,
    h: &Horizon,
    weights: &crate::types::LinearWeights,
) -> Result<f64> {
    if let ModelKind::Incidence(_) = model.kind {
        return Err(Error::InvalidModel(
            "exact linear MSE needs a classical (singleton) model".into(),
        ));
    }
    let t = h.t();
    let r = h.r();
    let mut var_sum = 0.0;
    let mut bias_sum = 0.0;
    for &m in &model.species_intensities() {
        let lambda = m * t;
        let mut pois = (-lambda).exp();
        let mut mean_h = 0.0;
        let mut mean_h2 = 0.0;
        for i in 1..=weights.depth() as u32 {
            pois *= lambda / i as f64;
            let w = weights.h(i);
            mean_h += w * pois;
            mean_h2 += w * w * pois;
        }
        let p_new = (-lambda).exp() * -(-r * lambda).exp_m1();
        let m1 = mean_h - p_new;
        let m2 = mean_h2 + p_new;
        var_sum += m2 - m1 * m1;
        bias_sum += m1;
    }
    Ok(var_sum + bias_sum * bias_sum)
}

/// Closed-form pieces of the alternating-series estimator's MSE on an
/// incidence model, next to a Monte-Carlo measurement of the whole.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecompositionReport {
    pub mc_mse: f64,
    pub mc_se: f64,
    /// Per-species error part.
    pub delta: f64,
    /// Cross-species part from sets carrying several species.
    pub epsilon: f64,
    /// `|mc_mse - (delta + epsilon)|`.
    pub gap: f64,
}

/// Per-species part: `sum_x [e^(-M_x t)(1 - e^(-r M_x t)) + e^((r^2-1) M_x t)
/// - e^(-M_x t)]`.
pub fn delta_closed_form(model: &SpeciesModel, h: &Horizon) -> f64 {
    let t = h.t();
    let r = h.r();
    model
        .species_intensities()
        .iter()
        .map(|&m| {
            let lambda = m * t;
            (-lambda).exp() * -(-r * lambda).exp_m1() + ((r * r - 1.0) * lambda).exp()
                - (-lambda).exp()
        })
        .sum()
}

/// Cross-species part: over ordered pairs,
/// `e^(-(1+r) M_union t) (e^(r(r+1) M_shared t) - 1)`.
pub fn epsilon_closed_form(model: &SpeciesModel, h: &Horizon) -> f64 {
    let t = h.t();
    let r = h.r();
    let species = model.species_intensities();
    let mut sum = 0.0;
    for (&(x, y), &shared) in &model.pair_intensities() {
        let union = species[x as usize] + species[y as usize] - shared;
        sum += 2.0 * (-(1.0 + r) * union * t).exp() * (r * (r + 1.0) * shared * t).exp_m1();
    }
    sum
}

/// Monte-Carlo MSE of the alternating-series estimator against the closed
/// form `delta + epsilon`.
pub fn error_decomposition_check(
    model: &SpeciesModel,
    h: &Horizon,
    reps: u64,
    seed: u64,
) -> Result<DecompositionReport> {
    let mc = mc_mse(model, h, &Method::Gt, reps, seed)?;
    let delta = delta_closed_form(model, h);
    let epsilon = epsilon_closed_form(model, h);
    Ok(DecompositionReport {
        mc_mse: mc.mse,
        mc_se: mc.se,
        delta,
        epsilon,
        gap: (mc.mse - (delta + epsilon)).abs(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailRow {
    pub z: f64,
    pub empirical_lower: f64,
    pub bound_lower: f64,
    pub empirical_upper: f64,
    pub bound_upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport {
    /// Exact `E[S_t^(i)]` (or `E[phi_i]`) the deviations are measured from.
    pub expected: f64,
    /// Bounded-difference constant `(B-1) i + 1` entering the bounds.
    pub constant: f64,
    pub rows: Vec<TailRow>,
    /// True when every empirical tail is within 3 binomial standard errors
    /// of its bound.
    pub pass: bool,
}

fn three_se(bound: f64, reps: u64) -> f64 {
    let b = bound.clamp(0.0, 1.0);
    3.0 * (b * (1.0 - b) / reps as f64).sqrt()
}

/// Empirical tails of `S_t^(i)` around its mean against the sub-Gaussian
/// lower bound `exp(-z^2 / (2 c E))` and the Bernstein upper bound
/// `exp(-z^2 / (2 c E + (2/3) c z))`, `c = (B-1) i + 1`.
pub fn concentration_check(
    model: &SpeciesModel,
    h: &Horizon,
    i: u32,
    reps: u64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if i == 0 {
        return Err(Error::InvalidParameter(
            "occupancy order i must be at least 1".into(),
        ));
    }
    let expected = model.expected_seen_at_least(i, h.t());
    let c = (model.arity_bound() as f64 - 1.0) * i as f64 + 1.0;
    let devs = collect_deviations(model, h, reps, seed, |profile| {
        profile.s_at_least(i).expect("i >= 1") as f64 - expected
    });
    let scale = (c * expected).sqrt().max(1.0);
    let rows: Vec<TailRow> = (0..=12)
        .map(|step| {
            let z = scale * step as f64 / 3.0;
            let empirical_lower =
                devs.iter().filter(|&&d| d <= -z).count() as f64 / reps as f64;
            let empirical_upper = devs.iter().filter(|&&d| d >= z).count() as f64 / reps as f64;
            TailRow {
                z,
                empirical_lower,
                bound_lower: guard_exp(z * z, 2.0 * c * expected),
                empirical_upper,
                bound_upper: guard_exp(z * z, 2.0 * c * expected + (2.0 / 3.0) * c * z),
            }
        })
        .collect();
    let pass = rows.iter().all(|row| {
        row.empirical_lower <= row.bound_lower + three_se(row.bound_lower, reps)
            && row.empirical_upper <= row.bound_upper + three_se(row.bound_upper, reps)
    });
    Ok(ConcentrationReport { expected, constant: c, rows, pass })
}

/// Two-sided tails of `phi_i` against the four-term bound built from the
/// occupancy bounds at orders `i` and `i+1`.
pub fn phi_concentration_check(
    model: &SpeciesModel,
    h: &Horizon,
    i: u32,
    reps: u64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if i == 0 {
        return Err(Error::InvalidParameter(
            "multiplicity i must be at least 1".into(),
        ));
    }
    let b = model.arity_bound() as f64;
    let e_i = model.expected_seen_at_least(i, h.t());
    let e_next = model.expected_seen_at_least(i + 1, h.t());
    let expected = e_i - e_next;
    let c_i = (b - 1.0) * i as f64 + 1.0;
    let c_next = (b - 1.0) * (i + 1) as f64 + 1.0;
    let devs = collect_deviations(model, h, reps, seed, |profile| {
        profile.phi(i) as f64 - expected
    });
    let scale = (c_next * e_i.max(1.0)).sqrt().max(1.0) * 2.0;
    let bound = |z: f64| {
        guard_exp(z * z, 8.0 * c_i * e_i)
            + guard_exp(z * z, 8.0 * c_i * e_i + (4.0 / 3.0) * c_i * z)
            + guard_exp(z * z, 8.0 * c_next * e_next)
            + guard_exp(z * z, 8.0 * c_next * e_next + (4.0 / 3.0) * c_next * z)
    };
    let rows: Vec<TailRow> = (0..=12)
        .map(|step| {
            let z = scale * step as f64 / 3.0;
            let two_sided = devs.iter().filter(|&&d| d.abs() >= z).count() as f64 / reps as f64;
            let total = bound(z).min(1.0);
            TailRow {
                z,
                empirical_lower: two_sided,
                bound_lower: total,
                empirical_upper: two_sided,
                bound_upper: total,
            }
        })
        .collect();
    let pass = rows
        .iter()
        .all(|row| row.empirical_lower <= row.bound_lower + three_se(row.bound_lower, reps));
    Ok(ConcentrationReport { expected, constant: c_i, rows, pass })
}

fn guard_exp(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (-num / den).exp()
    } else if num > 0.0 {
        0.0
    } else {
        1.0
    }
}

fn collect_deviations(
    model: &SpeciesModel,
    h: &Horizon,
    reps: u64,
    seed: u64,
    stat: impl Fn(&FrequencyProfile) -> f64,
) -> Vec<f64> {
    (0..reps)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            stat(&simulate_with_rng(model, h, &mut rng).profile_t)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityRow {
    pub name: &'static str,
    /// Closed-form per-species sum.
    pub lhs: f64,
    /// Quadrature of the tail-count transform.
    pub rhs: f64,
    pub relerr: f64,
}

/// Verifies the three tail-measure transform identities
///
/// ```text
/// E[S_t]      =  t L(t)
/// E[phi_1]    =  t L(t) + t^2 L'(t)
/// E[S_t^(2)]  = -t^2 L'(t)
/// ```
///
/// where `L(t) = integral of e^(-x t) * #(species with M_s > x) dx`. The
/// left sides are per-species sums; the right sides integrate the tail
/// count by piecewise Gauss-Legendre quadrature between intensity
/// breakpoints, refined until two passes agree.
pub fn laplace_identity_check(model: &SpeciesModel, t: f64) -> Result<Vec<IdentityRow>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "window length must be positive and finite, got {t}"
        )));
    }
    let mut intensities = model.species_intensities();
    intensities.retain(|&m| m > 0.0);
    intensities.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite intensities"));
    if intensities.is_empty() {
        return Err(Error::InvalidModel(
            "transform identities need at least one positive intensity".into(),
        ));
    }

    let tail_count = |x: f64| -> f64 {
        (intensities.len() - intensities.partition_point(|&m| m <= x)) as f64
    };
    let integrate = |f: &dyn Fn(f64) -> f64, chunk: f64| -> f64 {
        let mut total = 0.0;
        let mut lo = 0.0;
        for &b in &intensities {
            if b > lo {
                total += gl16_chunked(f, lo, b, chunk);
                lo = b;
            }
        }
        total
    };

    let sharp = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let coarse = integrate(f, 4.0 / t);
        let fine = integrate(f, 2.0 / t);
        if (coarse - fine).abs() > 1e-9 * (1.0 + fine.abs()) {
            return Err(Error::NumericGuard(
                "transform quadrature did not converge".into(),
            ));
        }
        Ok(fine)
    };

    let l = sharp(&|x| (-x * t).exp() * tail_count(x))?;
    let l_prime = -sharp(&|x| x * (-x * t).exp() * tail_count(x))?;

    let lhs_seen: f64 = intensities.iter().map(|&m| -(-m * t).exp_m1()).sum();
    let lhs_phi1: f64 = intensities.iter().map(|&m| m * t * (-m * t).exp()).sum();
    let lhs_repeat: f64 = intensities
        .iter()
        .map(|&m| {
            let lambda = m * t;
            -(-lambda).exp_m1() - lambda * (-lambda).exp()
        })
        .sum();

    let row = |name: &'static str, lhs: f64, rhs: f64| IdentityRow {
        name,
        lhs,
        rhs,
        relerr: (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE),
    };
    Ok(vec![
        row("seen", lhs_seen, t * l),
        row("singletons", lhs_phi1, t * l + t * t * l_prime),
        row("repeats", lhs_repeat, -t * t * l_prime),
    ])
}

/// 16-point Gauss-Legendre rule applied on subintervals no wider than
/// `chunk`, so the exponential factor is well resolved everywhere.
fn gl16_chunked(f: &dyn Fn(f64) -> f64, a: f64, b: f64, chunk: f64) -> f64 {
    const NODES: [(f64, f64); 8] = [
        (0.095_012_509_837_637_440_185, 0.189_450_610_455_068_496_285),
        (0.281_603_550_779_258_913_230, 0.182_603_415_044_923_588_867),
        (0.458_016_777_657_227_386_342, 0.169_156_519_395_002_538_189),
        (0.617_876_244_402_643_748_447, 0.149_595_988_816_576_732_081),
        (0.755_404_408_355_003_033_895, 0.124_628_971_255_533_872_052),
        (0.865_631_202_387_831_743_880, 0.095_158_511_682_492_784_810),
        (0.944_575_023_073_232_576_078, 0.062_253_523_938_647_892_863),
        (0.989_400_934_991_649_932_596, 0.027_152_459_411_754_094_852),
    ];
    let pieces = (((b - a) / chunk).ceil() as usize).max(1);
    let width = (b - a) / pieces as f64;
    let mut total = 0.0;
    for piece in 0..pieces {
        let lo = a + piece as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for (x, w) in NODES {
            total += w * (f(mid - half * x) + f(mid + half * x));
        }
    }
    total * 0.5 * width
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaRateRow {
    pub t: f64,
    /// Median of `|alpha_hat - alpha| * t^(alpha/2)`.
    pub median_scaled: f64,
    /// 95th percentile of the scaled error.
    pub q95_scaled: f64,
    /// How many scaled errors exceed the first row's 95th percentile; the
    /// first row reports its own definitional count.
    pub exceedances: u64,
    /// Expected species count the finite truncation leaves out.
    pub truncation_loss: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaRateTable {
    pub alpha: f64,
    pub reps: u64,
    pub rows: Vec<AlphaRateRow>,
    /// Exceedance budget `0.05 reps + 3 sqrt(0.05 * 0.95 * reps)`.
    pub threshold: f64,
    /// True when no later window's exceedance count leaves the budget.
    pub pass: bool,
}

fn alpha_support(alpha: f64) -> u32 {
    if alpha <= 0.35 {
        100_000
    } else if alpha <= 0.55 {
        1_000_000
    } else {
        10_000_000
    }
}

/// Convergence-rate study for the singleton index estimate on a truncated
/// power law: if `|alpha_hat - alpha|` shrinks like `t^(-alpha/2)`, the
/// scaled error's quantiles stay flat across windows. PASS compares each
/// later window's exceedances over the first window's 95th percentile to a
/// binomial budget.
///
/// Replications only need the singleton count and the species count, so
/// each species is classified as unseen / seen once / seen more via one
/// uniform draw against precomputed Poisson thresholds.
pub fn alpha_rate_check(
    alpha: f64,
    c: f64,
    t_grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<AlphaRateTable> {
    if t_grid.is_empty() || reps < 2 {
        return Err(Error::InvalidParameter(
            "rate check needs a non-empty window grid and reps >= 2".into(),
        ));
    }
    let support = alpha_support(alpha);
    let model = SpeciesModel::power_law(alpha, c, support)?;
    let intensities = match model.kind() {
        ModelKind::Classical(w) => w,
        ModelKind::Incidence(_) => unreachable!("power law is classical"),
    };
    let tail_per_unit_time: f64 = intensities[intensities.len() - 1]
        * support as f64
        / (1.0 / alpha - 1.0);

    let mut rows = Vec::with_capacity(t_grid.len());
    let mut baseline_q95 = f64::NAN;
    let threshold = 0.05 * reps as f64 + 3.0 * (0.05 * 0.95 * reps as f64).sqrt();
    let mut pass = true;

    for (t_idx, &t) in t_grid.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "window length must be positive and finite, got {t}"
            )));
        }
        let mut unseen_below = Vec::with_capacity(intensities.len());
        let mut once_below = Vec::with_capacity(intensities.len());
        for &m in intensities {
            let lambda = m * t;
            let none = (-lambda).exp();
            unseen_below.push(none);
            once_below.push(none * (1.0 + lambda));
        }

        let mut scaled: Vec<f64> = (0..reps)
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((t_idx as u64) << 32 | rep);
                let mut singles = 0u64;
                let mut seen = 0u64;
                for (&none, &once) in unseen_below.iter().zip(once_below.iter()) {
                    let u = f64::from_bits(0x3FF0_0000_0000_0000 | (rng.next_u64() >> 12)) - 1.0;
                    if u >= none {
                        seen += 1;
                        if u < once {
                            singles += 1;
                        }
                    }
                }
                // An empty window has no defined index; score it as the
                // flattest possible estimate.
                let alpha_hat = if seen == 0 { 0.0 } else { singles as f64 / seen as f64 };
                (alpha_hat - alpha).abs() * t.powf(alpha / 2.0)
            })
            .collect();
        scaled.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite scaled errors"));
        let quantile = |q: f64| scaled[((q * (reps - 1) as f64).round() as usize).min(scaled.len() - 1)];
        let q95 = quantile(0.95);
        if t_idx == 0 {
            baseline_q95 = q95;
        }
        let exceedances = scaled.iter().filter(|&&v| v > baseline_q95).count() as u64;
        if t_idx > 0 && exceedances as f64 > threshold {
            pass = false;
        }
        rows.push(AlphaRateRow {
            t,
            median_scaled: quantile(0.5),
            q95_scaled: q95,
            exceedances,
            truncation_loss: (t * tail_per_unit_time).min(support as f64),
        });
    }
    Ok(AlphaRateTable { alpha, reps, rows, threshold, pass })
}

/// Fixed-length event stream of i.i.d. singleton draws from a classical
/// model, for benchmark experiments on synthetic data.
pub fn classical_event_stream(
    model: &SpeciesModel,
    n_events: usize,
    seed: u64,
    label: &str,
) -> Result<ObservationStream> {
    let weights = match model.kind() {
        ModelKind::Classical(w) => w,
        ModelKind::Incidence(_) => {
            return Err(Error::InvalidModel(
                "event streams are drawn from classical models".into(),
            ))
        }
    };
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidModel("total intensity must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (0..n_events)
        .map(|_| {
            let u: f64 = rng.gen();
            let s = cumulative.partition_point(|&cap| cap < u).min(weights.len() - 1);
            vec![s as u32]
        })
        .collect();
    let species = (0..weights.len()).map(|s| format!("s{s}")).collect();
    ObservationStream::new(species, events, label)
}
