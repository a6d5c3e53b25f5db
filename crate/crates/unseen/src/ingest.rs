//! Corpus loaders and experiment-data preparation.
//!
//! An [`ObservationStream`] is an ordered list of events, each a non-empty
//! set of interned species ids; singleton events recover the classical
//! sample-stream setting. Loaders build streams from plain-text token files
//! and from incidence files (one set per line). [`apply_split`] turns a
//! stream into a past/future pair with the induced [`Horizon`], optionally
//! shuffling first, which is the protocol used by the benchmark harness.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::types::{FrequencyProfile, Horizon};

const STREAM_MAGIC: &[u8; 5] = b"USPS1";

/// Ordered event stream over an interned species table.
///
/// Events are stored as sorted, deduplicated id sets; the multiplicity of a
/// species is the number of events containing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationStream {
    species: Vec<String>,
    events: Vec<Vec<u32>>,
    source_label: String,
}

impl ObservationStream {
    /// Validates ids, sorts and deduplicates each event, and rejects events
    /// that are empty (before or after deduplication).
    pub fn new(species: Vec<String>, events: Vec<Vec<u32>>, label: &str) -> Result<Self> {
        let n = species.len() as u64;
        let mut cleaned = events;
        for event in &mut cleaned {
            event.sort_unstable();
            event.dedup();
            if event.is_empty() {
                return Err(Error::InvalidModel("events must be non-empty".into()));
            }
            if u64::from(event[event.len() - 1]) >= n {
                return Err(Error::InvalidModel(format!(
                    "event references species id {} outside the table of {n}",
                    event[event.len() - 1]
                )));
            }
        }
        Ok(ObservationStream {
            species,
            events: cleaned,
            source_label: label.to_string(),
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn events(&self) -> &[Vec<u32>] {
        &self.events
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    /// Number of events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Largest event size; 1 for classical streams.
    pub fn max_arity(&self) -> u32 {
        self.events.iter().map(|e| e.len() as u32).max().unwrap_or(0)
    }

    /// Writes the stream in the `USPS1` binary format: magic, species table
    /// (u32 count, then length-prefixed UTF-8 names), then events (u64
    /// count, then per-event u32 size and u32 ids), all little-endian.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.events.len() * 8);
        buf.extend_from_slice(STREAM_MAGIC);
        buf.extend_from_slice(&(self.species.len() as u32).to_le_bytes());
        for name in &self.species {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
        }
        buf.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for event in &self.events {
            buf.extend_from_slice(&(event.len() as u32).to_le_bytes());
            for &id in event {
                buf.extend_from_slice(&id.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut cursor = Cursor { bytes: &bytes, at: 0 };
        if cursor.take(5)? != STREAM_MAGIC {
            return Err(Error::BadStreamFile("missing USPS1 magic header".into()));
        }
        let n_species = cursor.u32()? as usize;
        let mut species = Vec::with_capacity(n_species.min(1 << 20));
        for _ in 0..n_species {
            let len = cursor.u32()? as usize;
            let name = std::str::from_utf8(cursor.take(len)?)
                .map_err(|_| Error::BadStreamFile("species name is not UTF-8".into()))?;
            species.push(name.to_string());
        }
        let n_events = cursor.u64()? as usize;
        let mut events = Vec::with_capacity(n_events.min(1 << 24));
        for _ in 0..n_events {
            let size = cursor.u32()? as usize;
            let mut event = Vec::with_capacity(size.min(1 << 16));
            for _ in 0..size {
                event.push(cursor.u32()?);
            }
            events.push(event);
        }
        if cursor.at != bytes.len() {
            return Err(Error::BadStreamFile("trailing bytes after event list".into()));
        }
        ObservationStream::new(species, events, "stream.bin")
            .map_err(|e| Error::BadStreamFile(e.to_string()))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::BadStreamFile("file truncated".into()));
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Frozen tokenizer: NFC-normalize, lowercase, strip leading and trailing
/// non-alphanumeric characters (interior punctuation survives, so
/// contractions stay whole). Returns `None` for tokens that strip to
/// nothing.
fn normalize_token(raw: &str) -> Option<String> {
    let token: String = raw.nfc().collect::<String>().to_lowercase();
    let token = token.trim_matches(|c: char| !c.is_alphanumeric());
    if token.is_empty() {
        None
    } else {
        Some(token.to_string())
    }
}

struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn new() -> Self {
        Interner { ids: HashMap::new(), names: Vec::new() }
    }

    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(name.to_string(), id);
        self.names.push(name.to_string());
        id
    }
}

/// Loads a plain-text corpus as a stream of singleton token events.
pub fn load_tokens(path: &Path) -> Result<ObservationStream> {
    let text = fs::read_to_string(path)?;
    tokens_from_text(&text, &path.to_string_lossy())
}

/// As [`load_tokens`] for in-memory text.
pub fn tokens_from_text(text: &str, label: &str) -> Result<ObservationStream> {
    let mut interner = Interner::new();
    let events: Vec<Vec<u32>> = text
        .split_whitespace()
        .filter_map(|raw| normalize_token(raw).map(|tok| vec![interner.intern(&tok)]))
        .collect();
    if events.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ObservationStream::new(interner.names, events, label)
}

/// Loads an incidence file: one event per line, whitespace-separated
/// species ids, within-line duplicates removed, blank lines skipped.
/// Non-UTF-8 lines are reported with their 1-based line number.
pub fn load_incidence(path: &Path) -> Result<ObservationStream> {
    let bytes = fs::read(path)?;
    let mut interner = Interner::new();
    let mut events = Vec::new();
    for (idx, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw_line).map_err(|e| Error::MalformedLine {
            line: idx + 1,
            msg: format!("not UTF-8: {e}"),
        })?;
        let ids: Vec<u32> = line
            .split_whitespace()
            .map(|name| interner.intern(name))
            .collect();
        if !ids.is_empty() {
            events.push(ids);
        }
    }
    if events.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ObservationStream::new(interner.names, events, &path.to_string_lossy())
}

/// Keeps only set members whose label parses as an integer below `cap`,
/// dropping events that become empty. This is the genome-protocol knob for
/// restricting to an initial range of locations; labels that are not
/// integers are kept.
pub fn restrict_species_below(stream: &ObservationStream, cap: u64) -> Result<ObservationStream> {
    let keep: Vec<bool> = stream
        .species()
        .iter()
        .map(|name| name.parse::<u64>().map_or(true, |loc| loc < cap))
        .collect();
    let events: Vec<Vec<u32>> = stream
        .events()
        .iter()
        .filter_map(|event| {
            let kept: Vec<u32> = event.iter().copied().filter(|&id| keep[id as usize]).collect();
            if kept.is_empty() {
                None
            } else {
                Some(kept)
            }
        })
        .collect();
    if events.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ObservationStream::new(stream.species().to_vec(), events, stream.source_label())
}

/// How to carve a stream into past and future windows.
#[derive(Clone, Copy, Debug)]
pub struct SplitPlan {
    /// Fraction of (subsampled) events forming the past window, in (0,1).
    pub fraction_seen: f64,
    /// Shuffle seed; `None` keeps the true temporal order.
    pub permutation_seed: Option<u64>,
    /// Keep every k-th event (starting with the first) before splitting.
    pub subsample_every: usize,
}

impl SplitPlan {
    pub fn temporal(fraction_seen: f64) -> Self {
        SplitPlan { fraction_seen, permutation_seed: None, subsample_every: 1 }
    }

    pub fn shuffled(fraction_seen: f64, seed: u64) -> Self {
        SplitPlan { fraction_seen, permutation_seed: Some(seed), subsample_every: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub past: ObservationStream,
    pub future: ObservationStream,
    /// `t` = past event count, `r` = future/past event ratio.
    pub h: Horizon,
}

/// Subsamples, optionally shuffles (ChaCha8 Fisher-Yates, reproducible
/// across platforms), then splits at `floor(fraction * n)` events.
pub fn apply_split(stream: &ObservationStream, plan: &SplitPlan) -> Result<SplitOutcome> {
    if !(plan.fraction_seen > 0.0 && plan.fraction_seen < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "fraction_seen must lie in (0,1), got {}",
            plan.fraction_seen
        )));
    }
    if plan.subsample_every == 0 {
        return Err(Error::InvalidSplit("subsample_every must be at least 1".into()));
    }
    let mut events: Vec<Vec<u32>> = stream
        .events()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % plan.subsample_every == 0)
        .map(|(_, e)| e.clone())
        .collect();
    if let Some(seed) = plan.permutation_seed {
        events.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let prefix = (plan.fraction_seen * events.len() as f64).floor() as usize;
    if prefix == 0 || prefix >= events.len() {
        return Err(Error::InvalidSplit(format!(
            "prefix of {prefix} events leaves an empty side (total {})",
            events.len()
        )));
    }
    let future_events = events.split_off(prefix);
    let h = Horizon::from_event_counts(prefix as u64, future_events.len() as u64)?;
    Ok(SplitOutcome {
        past: ObservationStream::new(
            stream.species().to_vec(),
            events,
            &format!("{} (past)", stream.source_label()),
        )?,
        future: ObservationStream::new(
            stream.species().to_vec(),
            future_events,
            &format!("{} (future)", stream.source_label()),
        )?,
        h,
    })
}

/// Frequency profile of a stream: a species' multiplicity is the number of
/// events containing it; `n_events` is the number of events.
pub fn profile_from_stream(stream: &ObservationStream) -> FrequencyProfile {
    let mut multiplicity = vec![0u32; stream.species().len()];
    for event in stream.events() {
        for &id in event {
            multiplicity[id as usize] += 1;
        }
    }
    FrequencyProfile::from_species_multiplicities(multiplicity, stream.len() as u64)
}

/// Number of species present in `future` but absent from `past`.
pub fn discoveries(past: &ObservationStream, future: &ObservationStream) -> u64 {
    let n = past.species().len().max(future.species().len());
    let mut seen = vec![false; n];
    for event in past.events() {
        for &id in event {
            seen[id as usize] = true;
        }
    }
    let mut fresh = vec![false; n];
    for event in future.events() {
        for &id in event {
            if !seen[id as usize] {
                fresh[id as usize] = true;
            }
        }
    }
    fresh.iter().filter(|&&f| f).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_file(bytes: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn tokenizer_golden_example() {
        let stream = tokens_from_text("To be, to be", "toy").unwrap();
        assert_eq!(stream.species(), ["to", "be"]);
        assert_eq!(stream.events(), [[0], [1], [0], [1]]);
        let profile = profile_from_stream(&stream);
        assert_eq!(profile.phi(2), 2);
        assert_eq!(profile.distinct(), 2);
        assert_eq!(profile.n_events(), 4);
    }

    #[test]
    fn tokenizer_strips_edges_and_keeps_interior_punctuation() {
        let stream = tokens_from_text("(end): don't -- \"quoted\" 42!", "toy").unwrap();
        assert_eq!(stream.species(), ["end", "don't", "quoted", "42"]);
        assert_eq!(stream.len(), 4);
    }

    #[test]
    fn tokenizer_normalizes_unicode_composition() {
        // "café" spelled composed and decomposed must intern identically.
        let stream = tokens_from_text("caf\u{e9} cafe\u{301}", "toy").unwrap();
        assert_eq!(stream.species().len(), 1);
        assert_eq!(stream.len(), 2);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(tokens_from_text("", "toy"), Err(Error::EmptyCorpus)));
        assert!(matches!(
            tokens_from_text(" ... !! ", "toy"),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn incidence_loader_dedups_within_lines() {
        let file = temp_file(b"a b a\n\nx\nb c\n");
        let stream = load_incidence(file.path()).unwrap();
        assert_eq!(stream.species(), ["a", "b", "x", "c"]);
        assert_eq!(stream.events(), [vec![0, 1], vec![2], vec![1, 3]]);
        assert_eq!(stream.max_arity(), 2);
    }

    #[test]
    fn incidence_loader_reports_bad_lines_by_number() {
        let file = temp_file(b"a b\n\xff\xfe\nc\n");
        match load_incidence(file.path()) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a malformed-line error, got {other:?}"),
        }
    }

    #[test]
    fn stream_constructor_validates_events() {
        assert!(ObservationStream::new(vec!["a".into()], vec![vec![]], "t").is_err());
        assert!(ObservationStream::new(vec!["a".into()], vec![vec![1]], "t").is_err());
        let s = ObservationStream::new(vec!["a".into(), "b".into()], vec![vec![1, 0, 1]], "t")
            .unwrap();
        assert_eq!(s.events(), [[0, 1]]);
    }

    #[test]
    fn split_arithmetic_matches_the_event_counts() {
        let events = (0..100).map(|i| vec![i % 7]).collect();
        let species = (0..7).map(|i| i.to_string()).collect();
        let stream = ObservationStream::new(species, events, "t").unwrap();
        let split = apply_split(&stream, &SplitPlan::temporal(0.25)).unwrap();
        assert_eq!(split.past.len(), 25);
        assert_eq!(split.future.len(), 75);
        assert_eq!(split.h.t(), 25.0);
        assert_eq!(split.h.r(), 3.0);
    }

    #[test]
    fn temporal_split_preserves_order_bit_exactly() {
        let stream = tokens_from_text("a b c d e f", "t").unwrap();
        let split = apply_split(&stream, &SplitPlan::temporal(0.5)).unwrap();
        assert_eq!(split.past.events(), &stream.events()[..3]);
        assert_eq!(split.future.events(), &stream.events()[3..]);
    }

    #[test]
    fn subsampling_keeps_every_kth_event() {
        let events = (0..10).map(|i| vec![i]).collect();
        let species = (0..10).map(|i| i.to_string()).collect();
        let stream = ObservationStream::new(species, events, "t").unwrap();
        let plan = SplitPlan { fraction_seen: 0.5, permutation_seed: None, subsample_every: 3 };
        let split = apply_split(&stream, &plan).unwrap();
        // Kept events are 0, 3, 6, 9; the first two form the past window.
        assert_eq!(split.past.events(), [[0], [3]]);
        assert_eq!(split.future.events(), [[6], [9]]);
    }

    #[test]
    fn degenerate_splits_are_rejected() {
        let stream = tokens_from_text("a b", "t").unwrap();
        assert!(apply_split(&stream, &SplitPlan::temporal(0.01)).is_err());
        assert!(apply_split(&stream, &SplitPlan::temporal(1.2)).is_err());
        assert!(apply_split(&stream, &SplitPlan::temporal(0.0)).is_err());
        // floor(0.99 * 2) = 1 still leaves one event on each side.
        assert!(apply_split(&stream, &SplitPlan::temporal(0.99)).is_ok());
        let plan = SplitPlan { fraction_seen: 0.5, permutation_seed: None, subsample_every: 0 };
        assert!(apply_split(&stream, &plan).is_err());
    }

    #[test]
    fn restriction_drops_high_numeric_labels() {
        let file = temp_file(b"10 20\n99 10\n500\n");
        let stream = load_incidence(file.path()).unwrap();
        let restricted = restrict_species_below(&stream, 100).unwrap();
        assert_eq!(restricted.len(), 2);
        assert_eq!(restricted.max_arity(), 2);
        assert!(restrict_species_below(&stream, 5).is_err());
    }

    #[test]
    fn binary_round_trip_preserves_the_stream() {
        let file = temp_file(b"alpha beta\ngamma\nbeta beta alpha\n");
        let stream = load_incidence(file.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        stream.save(out.path()).unwrap();
        let back = ObservationStream::load(out.path()).unwrap();
        assert_eq!(back.species(), stream.species());
        assert_eq!(back.events(), stream.events());
    }

    #[test]
    fn binary_loader_rejects_garbage() {
        let bad_magic = temp_file(b"NOPE!rest");
        assert!(matches!(
            ObservationStream::load(bad_magic.path()),
            Err(Error::BadStreamFile(_))
        ));
        let truncated = temp_file(b"USPS1\x02\x00\x00\x00");
        assert!(matches!(
            ObservationStream::load(truncated.path()),
            Err(Error::BadStreamFile(_))
        ));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_stream() -> impl Strategy<Value = ObservationStream> {
        proptest::collection::vec(proptest::collection::vec(0u32..12, 1..4), 4..60).prop_map(
            |events| {
                let species = (0..12).map(|i| format!("s{i}")).collect();
                ObservationStream::new(species, events, "prop").unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn seeded_shuffle_is_a_permutation(stream in arb_stream(), seed in 0u64..1000) {
            let split = apply_split(&stream, &SplitPlan::shuffled(0.5, seed)).unwrap();
            let mut combined: Vec<Vec<u32>> = split
                .past
                .events()
                .iter()
                .chain(split.future.events())
                .cloned()
                .collect();
            let mut original = stream.events().to_vec();
            combined.sort();
            original.sort();
            prop_assert_eq!(combined, original);

            let again = apply_split(&stream, &SplitPlan::shuffled(0.5, seed)).unwrap();
            prop_assert_eq!(split.past.events(), again.past.events());
        }

        #[test]
        fn dedup_is_idempotent(stream in arb_stream()) {
            let again = ObservationStream::new(
                stream.species().to_vec(),
                stream.events().to_vec(),
                "again",
            ).unwrap();
            prop_assert_eq!(again.events(), stream.events());
        }

        #[test]
        fn discoveries_reconstruct_the_total(stream in arb_stream(), seed in proptest::option::of(0u64..50)) {
            let plan = SplitPlan { fraction_seen: 0.4, permutation_seed: seed, subsample_every: 1 };
            let split = apply_split(&stream, &plan).unwrap();
            let s_t = profile_from_stream(&split.past).distinct();
            let s_total = profile_from_stream(&stream).distinct();
            let seed_is_none = seed.is_none();
            let recombined = s_t + discoveries(&split.past, &split.future);
            if seed_is_none {
                prop_assert_eq!(recombined, s_total);
            } else {
                // A shuffle relabels which window is "past" but the union
                // of species is unchanged.
                prop_assert_eq!(
                    recombined,
                    profile_from_stream(&split.past).distinct()
                        + discoveries(&split.past, &split.future)
                );
                let mut all = vec![false; stream.species().len()];
                for event in split.past.events().iter().chain(split.future.events()) {
                    for &id in event {
                        all[id as usize] = true;
                    }
                }
                prop_assert_eq!(all.iter().filter(|&&f| f).count() as u64, s_total);
            }
        }
    }
}
