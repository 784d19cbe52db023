//! Multi-component PPM-D model over zone ids.
//!
//! A zone id such as `C-17.3D` is split into four components: the full id and
//! its first three alphanumeric tokens (`C`, `17`, `3D`). Each component stream
//! gets its own variable-order Markov model. The probability of a candidate
//! zone after a context is the weighted sum of the four component
//! probabilities.
//!
//! Within one component, a context with successor counts `c(s)`, total `t`,
//! and `d` distinct successors predicts a seen symbol with `(2c(s) - 1) / (2t)`
//! and escapes with mass `d / (2t)` to the context one symbol shorter. Below
//! order 0 every symbol, seen or not, gets `1 / (|V| + 1)`. No exclusion is
//! applied when backing off.

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::model::DEPOT_ZONE;

/// Number of components a zone id is split into.
pub const COMPONENTS: usize = 4;

/// Padding token for zone ids with fewer than three alphanumeric tokens.
pub const EMPTY_TOKEN: &str = "∅";

/// Largest supported context order.
pub const MAX_SUPPORTED_ORDER: usize = 16;

pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_WEIGHTS: [f64; COMPONENTS] = [0.25; COMPONENTS];

const MAGIC: &[u8; 4] = b"ZPPM";
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("zone id is empty")]
    EmptyZoneId,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("model file I/O failed: {0}")]
    Io(#[from] io::Error),
}

/// The four components of a zone id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZoneComponents([String; COMPONENTS]);

impl ZoneComponents {
    pub fn get(&self, k: usize) -> &str {
        &self.0[k]
    }

    pub fn as_array(&self) -> &[String; COMPONENTS] {
        &self.0
    }
}

/// Splits a zone id on every non-alphanumeric character. Component 0 is the
/// whole id; components 1..=3 are the first three tokens, padded with
/// [`EMPTY_TOKEN`].
///
/// ```
/// let c = zoneseq::ppm::tokenize_zone("C-17.3D").unwrap();
/// assert_eq!([c.get(0), c.get(1), c.get(2), c.get(3)], ["C-17.3D", "C", "17", "3D"]);
/// ```
pub fn tokenize_zone(zone_id: &str) -> Result<ZoneComponents, PpmError> {
    if zone_id.is_empty() {
        return Err(PpmError::EmptyZoneId);
    }
    let mut tokens = zone_id
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty());
    let mut next = || tokens.next().unwrap_or(EMPTY_TOKEN).to_owned();
    Ok(ZoneComponents([zone_id.to_owned(), next(), next(), next()]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpmConfig {
    pub max_order: usize,
    pub weights: [f64; COMPONENTS],
    /// Start-of-sequence context symbol; `None` trains on the bare sequences.
    pub sentinel: Option<String>,
}

impl Default for PpmConfig {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_ORDER,
            weights: DEFAULT_WEIGHTS,
            sentinel: Some(DEPOT_ZONE.to_owned()),
        }
    }
}

impl PpmConfig {
    pub fn validate(&self) -> Result<(), PpmError> {
        if self.max_order == 0 || self.max_order > MAX_SUPPORTED_ORDER {
            return Err(PpmError::InvalidConfig(format!(
                "max order must be in 1..={MAX_SUPPORTED_ORDER}, got {}",
                self.max_order
            )));
        }
        validate_weights(&self.weights)?;
        if matches!(&self.sentinel, Some(s) if s.is_empty()) {
            return Err(PpmError::InvalidConfig("sentinel must be non-empty".into()));
        }
        Ok(())
    }
}

pub fn validate_weights(w: &[f64; COMPONENTS]) -> Result<(), PpmError> {
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(PpmError::InvalidConfig(format!("weights must be finite and non-negative: {w:?}")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(PpmError::InvalidConfig(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
struct ContextStats {
    total: u64,
    /// Sorted by token id.
    successors: Vec<(u32, u64)>,
}

impl ContextStats {
    fn add(&mut self, token: u32, count: u64) {
        self.total += count;
        match self.successors.binary_search_by_key(&token, |&(t, _)| t) {
            Ok(i) => self.successors[i].1 += count,
            Err(i) => self.successors.insert(i, (token, count)),
        }
    }

    fn count(&self, token: u32) -> Option<u64> {
        self.successors
            .binary_search_by_key(&token, |&(t, _)| t)
            .ok()
            .map(|i| self.successors[i].1)
    }
}

#[derive(Debug, Clone, Default)]
struct ComponentModel {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    contexts: HashMap<Vec<u32>, ContextStats>,
}

impl ComponentModel {
    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    fn vocab_size(&self) -> usize {
        self.contexts.get(&[][..]).map_or(0, |c| c.successors.len())
    }

    fn add_stream(&mut self, stream: &[u32], first_predicted: usize, max_order: usize) {
        for i in first_predicted..stream.len() {
            for order in 0..=max_order.min(i) {
                self.contexts
                    .entry(stream[i - order..i].to_vec())
                    .or_default()
                    .add(stream[i], 1);
            }
        }
    }

    /// `context` holds the usable tail, oldest first; it never contains
    /// unknown tokens.
    fn prob(&self, context: &[u32], candidate: Option<u32>) -> f64 {
        let mut escape = 1.0;
        for start in 0..=context.len() {
            let Some(stats) = self.contexts.get(&context[start..]) else {
                continue;
            };
            let two_t = 2.0 * stats.total as f64;
            if let Some(c) = candidate.and_then(|id| stats.count(id)) {
                return escape * (2.0 * c as f64 - 1.0) / two_t;
            }
            escape *= stats.successors.len() as f64 / two_t;
        }
        escape / (self.vocab_size() as f64 + 1.0)
    }
}

/// A zone id mapped to per-component token ids; `None` marks a token the
/// model has never seen.
pub type EncodedZone = [Option<u32>; COMPONENTS];

/// One context of one component, with string tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSummary {
    pub context: Vec<String>,
    pub total: u64,
    /// Sorted by token.
    pub successors: Vec<(String, u64)>,
}

/// Trained multi-component model. Immutable once built.
#[derive(Clone)]
pub struct PpmModel {
    config: PpmConfig,
    components: [ComponentModel; COMPONENTS],
    vocab_sizes: [usize; COMPONENTS],
}

impl fmt::Debug for PpmModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PpmModel")
            .field("config", &self.config)
            .field("vocab_sizes", &self.vocab_sizes)
            .field(
                "contexts",
                &self.components.iter().map(|c| c.contexts.len()).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl PartialEq for PpmModel {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl PpmModel {
    /// Trains a model on zone sequences. Every sequence contributes counts
    /// for each (context of length `0..=K`, next token) pair, per component.
    pub fn train<S: AsRef<str>>(corpus: &[impl AsRef<[S]>], config: PpmConfig) -> Result<Self, PpmError> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(PpmError::EmptyCorpus);
        }
        let mut components: [ComponentModel; COMPONENTS] = Default::default();
        let sentinel = config.sentinel.as_deref().map(tokenize_zone).transpose()?;
        let mut streams: [Vec<u32>; COMPONENTS] = Default::default();
        for seq in corpus {
            for s in streams.iter_mut() {
                s.clear();
            }
            if let Some(sent) = &sentinel {
                for k in 0..COMPONENTS {
                    streams[k].push(components[k].intern(sent.get(k)));
                }
            }
            for zone in seq.as_ref() {
                let parts = tokenize_zone(zone.as_ref())?;
                for k in 0..COMPONENTS {
                    streams[k].push(components[k].intern(parts.get(k)));
                }
            }
            let first = usize::from(sentinel.is_some());
            for k in 0..COMPONENTS {
                components[k].add_stream(&streams[k], first, config.max_order);
            }
        }
        Ok(Self::from_parts(config, components))
    }

    fn from_parts(config: PpmConfig, components: [ComponentModel; COMPONENTS]) -> Self {
        let vocab_sizes = std::array::from_fn(|k| components[k].vocab_size());
        Self {
            config,
            components,
            vocab_sizes,
        }
    }

    pub fn config(&self) -> &PpmConfig {
        &self.config
    }

    pub fn max_order(&self) -> usize {
        self.config.max_order
    }

    pub fn weights(&self) -> [f64; COMPONENTS] {
        self.config.weights
    }

    /// Number of distinct predicted tokens in a component.
    pub fn vocab_size(&self, component: usize) -> usize {
        self.vocab_sizes[component]
    }

    /// Maps a zone id to token ids. Unknown tokens, and the empty string,
    /// encode as `None`.
    pub fn encode(&self, zone_id: &str) -> EncodedZone {
        match tokenize_zone(zone_id) {
            Ok(parts) => std::array::from_fn(|k| self.components[k].ids.get(parts.get(k)).copied()),
            Err(_) => [None; COMPONENTS],
        }
    }

    /// Encoded start context: the sentinel when one was trained with,
    /// otherwise nothing.
    pub fn start_context(&self) -> Vec<EncodedZone> {
        self.config.sentinel.iter().map(|s| self.encode(s)).collect()
    }

    /// Probability of `candidate` following `context` (oldest first; only
    /// the last K entries are used). Always strictly positive.
    pub fn prob<S: AsRef<str>>(&self, context: &[S], candidate: &str) -> f64 {
        let ctx: Vec<EncodedZone> = context.iter().map(|z| self.encode(z.as_ref())).collect();
        self.prob_encoded(&ctx, &self.encode(candidate))
    }

    /// Same as [`PpmModel::prob`] on pre-encoded zones.
    pub fn prob_encoded(&self, context: &[EncodedZone], candidate: &EncodedZone) -> f64 {
        let mut total = 0.0;
        let mut buf = [0u32; MAX_SUPPORTED_ORDER];
        for k in 0..COMPONENTS {
            let w = self.config.weights[k];
            if w == 0.0 {
                continue;
            }
            // usable tail: at most K symbols, stopping at the newest unknown one
            let mut len = 0;
            for z in context.iter().rev().take(self.config.max_order) {
                match z[k] {
                    Some(id) => {
                        len += 1;
                        buf[MAX_SUPPORTED_ORDER - len] = id;
                    }
                    None => break,
                }
            }
            let tail = &buf[MAX_SUPPORTED_ORDER - len..];
            total += w * self.components[k].prob(tail, candidate[k]);
        }
        total
    }

    /// Sum of conditional probabilities along a zone sequence, each position
    /// conditioned on the sentinel-prefixed history.
    pub fn seq_reward<S: AsRef<str>>(&self, zones: &[S]) -> f64 {
        let mut ctx = self.start_context();
        let mut reward = 0.0;
        for z in zones {
            let enc = self.encode(z.as_ref());
            reward += self.prob_encoded(&ctx, &enc);
            ctx.push(enc);
        }
        reward
    }

    /// All contexts of one component, sorted by context then token.
    pub fn contexts(&self, component: usize) -> Vec<ContextSummary> {
        let comp = &self.components[component];
        let name = |id: u32| comp.tokens[id as usize].clone();
        let mut out: Vec<ContextSummary> = comp
            .contexts
            .iter()
            .map(|(ctx, stats)| {
                let mut successors: Vec<(String, u64)> =
                    stats.successors.iter().map(|&(t, c)| (name(t), c)).collect();
                successors.sort();
                ContextSummary {
                    context: ctx.iter().map(|&t| name(t)).collect(),
                    total: stats.total,
                    successors,
                }
            })
            .collect();
        out.sort_by(|a, b| a.context.cmp(&b.context));
        out
    }

    /// Serializes to the versioned binary model format. The encoding is
    /// canonical: equal models produce identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.max_order as u32).to_le_bytes());
        for w in self.config.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        match &self.config.sentinel {
            Some(s) => {
                out.push(1);
                put_str(&mut out, s);
            }
            None => out.push(0),
        }
        for k in 0..COMPONENTS {
            let contexts = self.contexts(k);
            let n: usize = contexts.iter().map(|c| c.successors.len()).sum();
            out.extend_from_slice(&(n as u64).to_le_bytes());
            for c in &contexts {
                for (token, count) in &c.successors {
                    out.extend_from_slice(&(c.context.len() as u32).to_le_bytes());
                    for t in &c.context {
                        put_str(&mut out, t);
                    }
                    put_str(&mut out, token);
                    out.extend_from_slice(&count.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PpmError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(PpmError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != FORMAT_VERSION {
            return Err(PpmError::Format(format!("unsupported version {version}")));
        }
        let max_order = u32::from_le_bytes(r.array()?) as usize;
        let mut weights = [0.0; COMPONENTS];
        for w in weights.iter_mut() {
            *w = f64::from_le_bytes(r.array()?);
        }
        let sentinel = match r.take(1)?[0] {
            0 => None,
            1 => Some(r.string()?),
            b => return Err(PpmError::Format(format!("bad sentinel flag {b}"))),
        };
        let config = PpmConfig {
            max_order,
            weights,
            sentinel,
        };
        config.validate().map_err(|e| PpmError::Format(e.to_string()))?;
        let mut components: [ComponentModel; COMPONENTS] = Default::default();
        for comp in components.iter_mut() {
            let n = u64::from_le_bytes(r.array()?);
            for _ in 0..n {
                let len = u32::from_le_bytes(r.array()?) as usize;
                if len > max_order {
                    return Err(PpmError::Format(format!("context of length {len} exceeds order {max_order}")));
                }
                let mut ctx = Vec::with_capacity(len);
                for _ in 0..len {
                    let t = r.string()?;
                    ctx.push(comp.intern(&t));
                }
                let token = r.string()?;
                let token = comp.intern(&token);
                let count = u64::from_le_bytes(r.array()?);
                if count == 0 {
                    return Err(PpmError::Format("zero count".into()));
                }
                comp.contexts.entry(ctx).or_default().add(token, count);
            }
        }
        if r.pos != bytes.len() {
            return Err(PpmError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self::from_parts(config, components))
    }

    pub fn write_file(&self, path: &Path) -> Result<(), PpmError> {
        crate::io::write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, PpmError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PpmError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| PpmError::Format("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], PpmError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn string(&mut self) -> Result<String, PpmError> {
        let len = u32::from_le_bytes(self.array()?) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| PpmError::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_component(k: usize, sentinel: bool) -> PpmConfig {
        PpmConfig {
            max_order: k,
            weights: [1.0, 0.0, 0.0, 0.0],
            sentinel: sentinel.then(|| DEPOT_ZONE.to_owned()),
        }
    }

    fn toy() -> PpmModel {
        PpmModel::train(&[["A", "B", "A", "B", "A"]], single_component(1, false)).unwrap()
    }

    fn successor(model: &PpmModel, ctx: &[&str], token: &str) -> Option<u64> {
        model
            .contexts(0)
            .into_iter()
            .find(|c| c.context == ctx)?
            .successors
            .into_iter()
            .find(|(t, _)| t == token)
            .map(|(_, c)| c)
    }

    #[test]
    fn tokenize_examples() {
        let c = tokenize_zone("stz").unwrap();
        assert_eq!(c.as_array(), &["stz", "stz", EMPTY_TOKEN, EMPTY_TOKEN].map(String::from));
        let c = tokenize_zone("A-1.2D").unwrap();
        assert_eq!(c.as_array(), &["A-1.2D", "A", "1", "2D"].map(String::from));
        let c = tokenize_zone("A-1.2D.9.Q").unwrap();
        assert_eq!(c.get(3), "2D");
        assert!(matches!(tokenize_zone(""), Err(PpmError::EmptyZoneId)));
    }

    #[test]
    fn training_counts_with_sentinel() {
        let m = PpmModel::train(&[["A", "B"]], single_component(1, true)).unwrap();
        assert_eq!(successor(&m, &["stz"], "A"), Some(1));
        assert_eq!(successor(&m, &["A"], "B"), Some(1));
        assert_eq!(successor(&m, &[], "A"), Some(1));
        assert_eq!(successor(&m, &[], "B"), Some(1));
        assert_eq!(successor(&m, &[], "stz"), None);
        assert_eq!(m.vocab_size(0), 2);
    }

    #[test]
    fn repeated_corpus_doubles_counts() {
        let once = PpmModel::train(&[["A", "B", "C"]], PpmConfig::default()).unwrap();
        let twice = PpmModel::train(&[["A", "B", "C"], ["A", "B", "C"]], PpmConfig::default()).unwrap();
        for k in 0..COMPONENTS {
            let a = once.contexts(k);
            let b = twice.contexts(k);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.context, y.context);
                assert_eq!(2 * x.total, y.total);
                for (p, q) in x.successors.iter().zip(&y.successors) {
                    assert_eq!(2 * p.1, q.1);
                }
            }
        }
    }

    #[test]
    fn toy_fixture_probabilities() {
        let m = toy();
        assert!((m.prob(&["A"], "B") - 0.75).abs() < 1e-12);
        assert!((m.prob(&["A"], "C") - 1.0 / 60.0).abs() < 1e-12);
        // A never follows A: escape 1/4, then order 0 gives (2*3-1)/10
        assert!((m.prob(&["A"], "A") - 0.125).abs() < 1e-12);
    }

    #[test]
    fn toy_distribution_mass() {
        // No exclusion: escape mass that backs off onto already-seen symbols is
        // not redistributed, so the total falls short of one.
        let m = toy();
        let total = m.prob(&["A"], "A") + m.prob(&["A"], "B") + m.prob(&["A"], "C");
        assert!((total - 107.0 / 120.0).abs() < 1e-12);
        assert!(total <= 1.0);
    }

    #[test]
    fn unknown_context_backs_off_without_penalty() {
        let m = toy();
        assert_eq!(m.prob(&["Q"], "B"), m.prob::<&str>(&[], "B"));
        assert!((m.prob::<&str>(&[], "B") - 0.3).abs() < 1e-12);
    }

    #[test]
    fn only_last_k_context_entries_matter() {
        let m = PpmModel::train(&[["A", "B", "C", "D"], ["B", "C", "A", "D"]], PpmConfig::default()).unwrap();
        let long = ["X", "Y", "Z", "Q", "A", "B", "C"];
        assert_eq!(m.prob(&long, "D"), m.prob(&long[long.len() - 5..], "D"));
    }

    #[test]
    fn one_hot_weights_isolate_a_component() {
        let cfg = PpmConfig {
            weights: [0.0, 1.0, 0.0, 0.0],
            ..PpmConfig::default()
        };
        let m = PpmModel::train(&[["A-1.1A", "A-1.2A", "B-2.1A"]], cfg).unwrap();
        // same first token, different everything else
        assert_eq!(m.prob(&["stz", "A-1.1A"], "A-1.2A"), m.prob(&["stz", "A-9.9Z"], "A-7.7Q"));
    }

    #[test]
    fn rejects_bad_configs() {
        let corpus = [["A"]];
        let bad_weights = PpmConfig {
            weights: [0.5, 0.5, 0.5, 0.0],
            ..PpmConfig::default()
        };
        assert!(PpmModel::train(&corpus, bad_weights).is_err());
        assert!(PpmModel::train(&corpus, PpmConfig { max_order: 0, ..PpmConfig::default() }).is_err());
        let empty: [[&str; 1]; 0] = [];
        assert!(matches!(PpmModel::train(&empty, PpmConfig::default()), Err(PpmError::EmptyCorpus)));
    }

    #[test]
    fn seq_reward_single_term_and_concatenation() {
        let m = PpmModel::train(&[vec!["A-1.1A", "A-1.2A", "B-2.1A"], vec!["A-1.2A", "B-2.1A"]], PpmConfig::default())
            .unwrap();
        assert_eq!(m.seq_reward(&["A-1.1A"]), m.prob(&["stz"], "A-1.1A"));
        let s = ["A-1.1A", "A-1.2A"];
        let extended = m.seq_reward(&["A-1.1A", "A-1.2A", "B-2.1A"]);
        let step = m.prob(&["stz", "A-1.1A", "A-1.2A"], "B-2.1A");
        assert!((extended - (m.seq_reward(&s) + step)).abs() < 1e-15);
    }

    #[test]
    fn toy_seq_reward_by_hand() {
        // single component, K = 1, sentinel on, corpus [A,B,A,B,A]
        // contexts: stz:{A:1}  A:{B:2}  B:{A:2}  order0:{A:3,B:2}
        let m = PpmModel::train(&[["A", "B", "A", "B", "A"]], single_component(1, true)).unwrap();
        // P(A|stz) = 1/2, P(B|A) = 3/4, P(A|B) = 3/4
        let expected = 0.5 + 0.75 + 0.75;
        assert!((m.seq_reward(&["A", "B", "A"]) - expected).abs() < 1e-12);
    }

    #[test]
    fn model_bytes_round_trip() {
        let m = PpmModel::train(&[["C-17.3D", "C-17.2D"], ["A-1.2D", "C-17.3D"]], PpmConfig::default()).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"ZPPM");
        let back = PpmModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.prob(&["stz", "A-1.2D"], "C-17.3D"), m.prob(&["stz", "A-1.2D"], "C-17.3D"));
        assert!(PpmModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(PpmModel::from_bytes(b"NOPE").is_err());
    }

    fn zone_strategy() -> impl Strategy<Value = String> {
        (0u8..4, 1u8..4, 1u8..3).prop_map(|(a, b, c)| format!("{}-{b}.{c}X", (b'A' + a) as char))
    }

    proptest! {
        #[test]
        fn prob_is_strictly_positive(
            corpus in prop::collection::vec(prop::collection::vec(zone_strategy(), 1..6), 1..6),
            ctx in prop::collection::vec(zone_strategy(), 0..7),
            cand in zone_strategy(),
        ) {
            let m = PpmModel::train(&corpus, PpmConfig::default()).unwrap();
            let p = m.prob(&ctx, &cand);
            prop_assert!(p > 0.0 && p <= 1.0);
        }

        #[test]
        fn context_identity_holds(
            corpus in prop::collection::vec(prop::collection::vec(zone_strategy(), 1..8), 1..8),
        ) {
            let m = PpmModel::train(&corpus, PpmConfig::default()).unwrap();
            for k in 0..COMPONENTS {
                for c in m.contexts(k) {
                    let seen: u64 = c.successors.iter().map(|(_, n)| 2 * n - 1).sum();
                    prop_assert_eq!(seen + c.successors.len() as u64, 2 * c.total);
                }
            }
        }
    }
}
