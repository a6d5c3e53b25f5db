//! Core data types: frequency profiles, prediction horizons, and linear
//! estimator weights.
//!
//! A frequency profile records, for each multiplicity `i >= 1`, how many
//! species were observed exactly `i` times in the observation window. It is
//! the sufficient statistic consumed by every estimator in this crate. A
//! horizon describes the prediction task: an observation window of length
//! `t` and a future window of length `r * t`.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sparse frequency-of-frequencies table.
///
/// `phi(i)` is the number of species seen exactly `i` times. `n_events` is
/// the number of observations that produced the profile: for a classical
/// sample stream it equals `sum_i i * phi_i`; for an incidence stream it is
/// the number of sets, which can be smaller.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencyProfile {
    counts: BTreeMap<u32, u64>,
    n_events: u64,
}

impl FrequencyProfile {
    /// Builds a profile from `(multiplicity, count)` pairs.
    ///
    /// Zero counts are dropped, duplicate multiplicities and negative counts
    /// are rejected, and `n_events` is set to `sum_i i * phi_i` (the
    /// classical-stream convention). Use [`FrequencyProfile::with_n_events`]
    /// afterwards for incidence data.
    pub fn from_counts<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, i64)>,
    {
        let mut counts = BTreeMap::new();
        for (multiplicity, count) in pairs {
            if multiplicity == 0 {
                return Err(Error::ZeroMultiplicity);
            }
            if count < 0 {
                return Err(Error::NegativeCount { multiplicity, count });
            }
            if count == 0 {
                continue;
            }
            if counts.insert(multiplicity, count as u64).is_some() {
                return Err(Error::DuplicateMultiplicity(multiplicity));
            }
        }
        let n_events = counts.iter().map(|(&i, &c)| u64::from(i) * c).sum();
        Ok(FrequencyProfile { counts, n_events })
    }

    /// Builds a profile by tallying per-species multiplicities.
    ///
    /// Zero multiplicities (unseen species) are ignored. `n_events` must be
    /// supplied by the caller because the stream semantics (samples vs sets)
    /// are not visible here.
    pub fn from_species_multiplicities<I>(multiplicities: I, n_events: u64) -> Self
    where
        I: IntoIterator<Item = u32>,
    {
        let mut counts = BTreeMap::new();
        for m in multiplicities {
            if m > 0 {
                *counts.entry(m).or_insert(0) += 1;
            }
        }
        FrequencyProfile { counts, n_events }
    }

    /// Replaces the event count, keeping the frequency table.
    pub fn with_n_events(mut self, n_events: u64) -> Self {
        self.n_events = n_events;
        self
    }

    /// Number of species observed exactly `i` times.
    pub fn phi(&self, i: u32) -> u64 {
        self.counts.get(&i).copied().unwrap_or(0)
    }

    /// Number of species observed at least `i` times. `i = 0` is rejected:
    /// the profile carries no information about unseen species.
    pub fn s_at_least(&self, i: u32) -> Result<u64> {
        if i == 0 {
            return Err(Error::ZeroMultiplicity);
        }
        Ok(self.counts.range(i..).map(|(_, &c)| c).sum())
    }

    /// Number of distinct species observed, `S_t`.
    pub fn distinct(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Number of observations behind this profile.
    pub fn n_events(&self) -> u64 {
        self.n_events
    }

    /// Largest multiplicity present, or 0 for an empty profile.
    pub fn max_multiplicity(&self) -> u32 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    /// Iterates over `(multiplicity, count)` pairs in increasing
    /// multiplicity order; only nonzero counts appear.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl Serialize for FrequencyProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        let counts: BTreeMap<String, u64> =
            self.counts.iter().map(|(i, &c)| (i.to_string(), c)).collect();
        map.serialize_entry("counts", &counts)?;
        map.serialize_entry("n_events", &self.n_events)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for FrequencyProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ProfileVisitor;

        impl<'de> Visitor<'de> for ProfileVisitor {
            type Value = FrequencyProfile;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map with \"counts\" and optional \"n_events\"")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<FrequencyProfile, A::Error> {
                let mut counts: Option<BTreeMap<String, u64>> = None;
                let mut n_events: Option<u64> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "counts" => counts = Some(map.next_value()?),
                        "n_events" => n_events = Some(map.next_value()?),
                        other => {
                            return Err(serde::de::Error::unknown_field(
                                other,
                                &["counts", "n_events"],
                            ))
                        }
                    }
                }
                let raw = counts.ok_or_else(|| serde::de::Error::missing_field("counts"))?;
                let mut parsed = BTreeMap::new();
                for (key, count) in raw {
                    let multiplicity: u32 = key.parse().map_err(|_| {
                        serde::de::Error::custom(format!("multiplicity key {key:?} is not a decimal integer"))
                    })?;
                    if multiplicity == 0 {
                        return Err(serde::de::Error::custom("multiplicity must be at least 1"));
                    }
                    if count == 0 {
                        continue;
                    }
                    if parsed.insert(multiplicity, count).is_some() {
                        return Err(serde::de::Error::custom(format!(
                            "duplicate multiplicity {multiplicity}"
                        )));
                    }
                }
                let derived: u64 = parsed.iter().map(|(&i, &c)| u64::from(i) * c).sum();
                Ok(FrequencyProfile {
                    counts: parsed,
                    n_events: n_events.unwrap_or(derived),
                })
            }
        }

        deserializer.deserialize_map(ProfileVisitor)
    }
}

/// Prediction horizon: past window length `t` and future-to-past ratio `r`.
///
/// The future window has length `r * t`, so the combined span is
/// `(1 + r) * t`. For non-Poissonized data streams, `t` is taken to be the
/// number of past observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    t: f64,
    r: f64,
}

impl Horizon {
    pub fn new(t: f64, r: f64) -> Result<Self> {
        if !(t.is_finite() && r.is_finite() && t > 0.0 && r > 0.0) {
            return Err(Error::InvalidHorizon { t, r });
        }
        Ok(Horizon { t, r })
    }

    /// Horizon for a split stream: `t` is the number of past events and
    /// `r` the future-to-past event ratio.
    pub fn from_event_counts(past: u64, future: u64) -> Result<Self> {
        if past == 0 || future == 0 {
            return Err(Error::InvalidHorizon { t: past as f64, r: 0.0 });
        }
        Horizon::new(past as f64, future as f64 / past as f64)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Length of the future window, `r * t`.
    pub fn future_span(&self) -> f64 {
        self.r * self.t
    }

    /// Combined span `(1 + r) * t` of past and future windows.
    pub fn total_span(&self) -> f64 {
        (1.0 + self.r) * self.t
    }
}

/// Coefficients of a linear estimator `S-hat = sum_i H(i) * phi_i`.
///
/// `coeffs[k]` stores `H(k + 1)`; `H(0) = 0` always (a species never seen
/// contributes nothing) and `H(i) = 0` beyond the stored depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearWeights {
    coeffs: Vec<f64>,
}

impl LinearWeights {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidWeights("need at least one coefficient".into()));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidWeights(format!("non-finite coefficient {bad}")));
        }
        Ok(LinearWeights { coeffs })
    }

    /// All-zero weights of the given depth (the trivial estimator).
    pub fn zeros(depth: usize) -> Self {
        LinearWeights { coeffs: vec![0.0; depth.max(1)] }
    }

    /// `H(i)`, with `H(0) = 0` and zero beyond the stored depth.
    pub fn h(&self, i: u32) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.coeffs.get(i as usize - 1).copied().unwrap_or(0.0)
    }

    pub fn depth(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}
