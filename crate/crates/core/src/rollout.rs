//! Zone ordering by rollout: one-step lookahead over a greedy base policy.
//!
//! At each step every unvisited zone `u` is scored as the immediate reward
//! `P(u | prefix)` plus the reward of completing the sequence greedily after
//! `u`. The greedy completion always takes the zone with the highest
//! conditional probability given the sliding context, and its reward is the
//! sum of those probabilities, with the context window running straight
//! across the prefix/completion boundary. The zone with the highest score is
//! appended and the process repeats until every zone is placed.
//!
//! Because the base policy is deterministic and sequentially consistent, the
//! rollout sequence never scores below the plain greedy sequence.
//!
//! All ties are broken by the lexicographically smallest zone id.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ZoneSequence, DEPOT_ZONE};
use crate::ppm::{EncodedZone, PpmModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RolloutError {
    #[error("zone set is empty")]
    EmptyZones,
    #[error("zone {0:?} is not among the remaining zones")]
    NotRemaining(String),
    #[error("no zones remain")]
    NoRemaining,
    #[error("zone set contains the depot sentinel {0:?}")]
    SentinelZone(String),
}

/// A partial zone sequence and the zones not yet placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutState {
    prefix: Vec<String>,
    remaining: BTreeSet<String>,
}

impl RolloutState {
    pub fn new<I, S>(zones: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            prefix: Vec::new(),
            remaining: zones.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_prefix<S: Into<String>>(prefix: impl IntoIterator<Item = S>, remaining: impl IntoIterator<Item = S>) -> Self {
        Self {
            prefix: prefix.into_iter().map(Into::into).collect(),
            remaining: remaining.into_iter().map(Into::into).collect(),
        }
    }

    pub fn prefix(&self) -> &[String] {
        &self.prefix
    }

    pub fn remaining(&self) -> &BTreeSet<String> {
        &self.remaining
    }

    /// Number of zones placed so far.
    pub fn k(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_complete(&self) -> bool {
        self.remaining.is_empty()
    }
}

/// Moves `zone` from the remaining set to the end of the prefix.
pub fn apply_action(state: &RolloutState, zone: &str) -> Result<RolloutState, RolloutError> {
    if !state.remaining.contains(zone) {
        return Err(RolloutError::NotRemaining(zone.to_owned()));
    }
    let mut next = state.clone();
    next.remaining.remove(zone);
    next.prefix.push(zone.to_owned());
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RolloutOptions {
    /// Sum log-probabilities instead of probabilities.
    pub log_space: bool,
    /// Evaluate lookahead candidates on the rayon pool.
    pub parallel: bool,
}

/// Candidate score from one lookahead step.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub zone: String,
    pub immediate: f64,
    pub reward_to_go: f64,
}

impl CandidateScore {
    pub fn total(&self) -> f64 {
        self.immediate + self.reward_to_go
    }
}

/// Rollout planner over one model. Counts probability evaluations.
#[derive(Debug)]
pub struct Rollout<'m> {
    model: &'m PpmModel,
    options: RolloutOptions,
    prob_evals: std::sync::atomic::AtomicU64,
}

/// Zones of one problem, sorted so that index order is lexicographic order.
struct Table {
    names: Vec<String>,
    codes: Vec<EncodedZone>,
}

impl<'m> Rollout<'m> {
    pub fn new(model: &'m PpmModel, options: RolloutOptions) -> Self {
        Self {
            model,
            options,
            prob_evals: Default::default(),
        }
    }

    /// Number of conditional probability evaluations made so far.
    pub fn prob_evals(&self) -> u64 {
        self.prob_evals.load(std::sync::atomic::Ordering::Relaxed)
    }

    fn count(&self, n: u64) {
        self.prob_evals.fetch_add(n, std::sync::atomic::Ordering::Relaxed);
    }

    fn reward(&self, p: f64) -> f64 {
        if self.options.log_space {
            p.ln()
        } else {
            p
        }
    }

    fn table<'a>(&self, zones: impl Iterator<Item = &'a String>) -> Table {
        let names: Vec<String> = zones.cloned().collect();
        let codes = names.iter().map(|z| self.model.encode(z)).collect();
        Table { names, codes }
    }

    /// Sentinel-prefixed encoded context for a prefix.
    fn context(&self, prefix: &[String]) -> Vec<EncodedZone> {
        let mut ctx = self.model.start_context();
        ctx.extend(prefix.iter().map(|z| self.model.encode(z)));
        ctx
    }

    /// Greedy completion from `ctx` over `remaining` (sorted indices).
    /// Returns the chosen indices, the summed reward, and the evaluation count.
    fn greedy(&self, table: &Table, ctx: &mut Vec<EncodedZone>, mut remaining: Vec<usize>) -> (Vec<usize>, f64, u64) {
        let mut order = Vec::with_capacity(remaining.len());
        let mut total = 0.0;
        let mut evals = 0u64;
        while !remaining.is_empty() {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (slot, &z) in remaining.iter().enumerate() {
                let p = self.model.prob_encoded(ctx, &table.codes[z]);
                evals += 1;
                // strict: earlier (lexicographically smaller) zone wins ties
                if p > best.1 {
                    best = (slot, p);
                }
            }
            let z = remaining.remove(best.0);
            total += self.reward(best.1);
            ctx.push(table.codes[z]);
            order.push(z);
        }
        (order, total, evals)
    }

    /// The base policy's completion of `state` (appended zones only).
    pub fn greedy_completion(&self, state: &RolloutState) -> Vec<String> {
        let table = self.table(state.remaining.iter());
        let mut ctx = self.context(&state.prefix);
        let (order, _, evals) = self.greedy(&table, &mut ctx, (0..table.names.len()).collect());
        self.count(evals);
        order.into_iter().map(|i| table.names[i].clone()).collect()
    }

    fn scores(&self, table: &Table, ctx: &[EncodedZone]) -> Vec<(f64, f64)> {
        let max_order = self.model.max_order();
        let tail = &ctx[ctx.len().saturating_sub(max_order)..];
        let n = table.names.len();
        let eval = |u: usize| {
            let g = self.model.prob_encoded(tail, &table.codes[u]);
            let mut c = tail.to_vec();
            c.push(table.codes[u]);
            let rest: Vec<usize> = (0..n).filter(|&i| i != u).collect();
            let (_, to_go, evals) = self.greedy(table, &mut c, rest);
            self.count(evals + 1);
            (self.reward(g), to_go)
        };
        if self.options.parallel && n > 1 {
            (0..n).into_par_iter().map(eval).collect()
        } else {
            (0..n).map(eval).collect()
        }
    }

    /// Lookahead scores of every remaining zone, in lexicographic order.
    pub fn candidate_scores(&self, state: &RolloutState) -> Vec<CandidateScore> {
        let table = self.table(state.remaining.iter());
        let ctx = self.context(&state.prefix);
        self.scores(&table, &ctx)
            .into_iter()
            .zip(table.names)
            .map(|((immediate, reward_to_go), zone)| CandidateScore {
                zone,
                immediate,
                reward_to_go,
            })
            .collect()
    }

    /// The remaining zone with the best lookahead score.
    pub fn next_zone(&self, state: &RolloutState) -> Result<String, RolloutError> {
        if state.remaining.is_empty() {
            return Err(RolloutError::NoRemaining);
        }
        let table = self.table(state.remaining.iter());
        let ctx = self.context(&state.prefix);
        let best = argmax(&self.scores(&table, &ctx));
        Ok(table.names[best].clone())
    }

    /// Orders a zone set by applying [`Rollout::next_zone`] until every zone
    /// is placed.
    pub fn sequence<S: AsRef<str>>(&self, route_id: &str, zones: &[S]) -> Result<ZoneSequence, RolloutError> {
        let set: BTreeSet<String> = zones.iter().map(|z| z.as_ref().to_owned()).collect();
        if set.is_empty() {
            return Err(RolloutError::EmptyZones);
        }
        if set.contains(DEPOT_ZONE) {
            return Err(RolloutError::SentinelZone(DEPOT_ZONE.to_owned()));
        }
        let table = self.table(set.iter());
        let mut ctx = self.context(&[]);
        let mut remaining: Vec<usize> = (0..table.names.len()).collect();
        let mut order = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let sub = Table {
                names: remaining.iter().map(|&i| table.names[i].clone()).collect(),
                codes: remaining.iter().map(|&i| table.codes[i]).collect(),
            };
            let best = argmax(&self.scores(&sub, &ctx));
            let z = remaining.remove(best);
            ctx.push(table.codes[z]);
            order.push(table.names[z].clone());
        }
        Ok(ZoneSequence::new(route_id, order).expect("a permutation of a non-empty zone set"))
    }
}

/// Index of the largest total; the first index wins ties.
fn argmax(scores: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, (g, j)) in scores.iter().enumerate().skip(1) {
        let (bg, bj) = scores[best];
        if g + j > bg + bj {
            best = i;
        }
    }
    best
}

/// Greedy completion with default options.
pub fn greedy_completion(model: &PpmModel, state: &RolloutState) -> Vec<String> {
    Rollout::new(model, RolloutOptions::default()).greedy_completion(state)
}

/// One lookahead step with default options.
pub fn next_zone(model: &PpmModel, state: &RolloutState) -> Result<String, RolloutError> {
    Rollout::new(model, RolloutOptions::default()).next_zone(state)
}

/// Full rollout ordering of a zone set with default options.
pub fn rollout_sequence<S: AsRef<str>>(model: &PpmModel, zones: &[S]) -> Result<ZoneSequence, RolloutError> {
    Rollout::new(model, RolloutOptions::default()).sequence("", zones)
}
