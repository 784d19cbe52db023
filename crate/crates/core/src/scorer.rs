//! Distance between a submitted stop sequence and the actual one.
//!
//! A route's score is `SD * erp_cost / erp_edits`, 0 when there are no edits:
//!
//! * SD, the sequence deviation, looks at where the submission puts each pair
//!   of stops that were adjacent in the actual sequence. With `r_i` the
//!   submitted position of the actual `i`-th stop,
//!   `SD = 2 / (n(n-1)) * sum_{i>=1} (|r_i - r_{i-1}| - 1)`.
//! * ERP is edit distance with real penalty over the travel time matrix
//!   scaled so its largest entry is 1. Matching `a` against `b` costs
//!   `t(a, b)`; a gap on `x` costs `t(x, ref)` where `ref` is the depot by
//!   default. `erp_edits` counts the operations of non-zero cost on one
//!   optimal alignment.
//!
//! The depot is dropped from both sequences before scoring. Everything goes
//! through the [`RouteScorer`] trait, so a different evaluator can be dropped
//! in without touching callers.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::model::{Route, StopSequence, TravelTimeMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("sequences differ: {0}")]
    UnequalStopSets(String),
    #[error("need at least 2 delivery stops to score, got {0}")]
    TooFewStops(usize),
    #[error("route {0} has no travel time matrix; build one with TravelTimeMatrix::from_haversine or enable the haversine fallback")]
    MissingMatrix(String),
    #[error("stop {0:?} is not in the travel time matrix")]
    UnknownStop(String),
    #[error("no submission for route {0}")]
    MissingSubmission(String),
    #[error("route {0} has no actual sequence")]
    MissingActual(String),
}

/// Sequence deviation between two orderings of the same stops.
pub fn sequence_deviation<S: AsRef<str>>(actual: &[S], submitted: &[S]) -> Result<f64, ScoreError> {
    let n = actual.len();
    check_same_stops(actual, submitted)?;
    if n < 2 {
        return Err(ScoreError::TooFewStops(n));
    }
    let pos: BTreeMap<&str, usize> = submitted.iter().enumerate().map(|(i, s)| (s.as_ref(), i)).collect();
    let r: Vec<usize> = actual.iter().map(|s| pos[s.as_ref()]).collect();
    let sum: usize = r.windows(2).map(|w| w[0].abs_diff(w[1]) - 1).sum();
    Ok(2.0 * sum as f64 / (n * (n - 1)) as f64)
}

fn check_same_stops<S: AsRef<str>>(actual: &[S], submitted: &[S]) -> Result<(), ScoreError> {
    if actual.len() != submitted.len() {
        return Err(ScoreError::UnequalStopSets(format!(
            "{} actual stops, {} submitted",
            actual.len(),
            submitted.len()
        )));
    }
    let a: HashSet<&str> = actual.iter().map(AsRef::as_ref).collect();
    if a.len() != actual.len() {
        return Err(ScoreError::UnequalStopSets("actual sequence repeats a stop".into()));
    }
    let mut seen = HashSet::with_capacity(submitted.len());
    for s in submitted {
        let s = s.as_ref();
        if !a.contains(s) {
            return Err(ScoreError::UnequalStopSets(format!("submitted stop {s:?} is not in the actual sequence")));
        }
        if !seen.insert(s) {
            return Err(ScoreError::UnequalStopSets(format!("submitted stop {s:?} appears twice")));
        }
    }
    Ok(())
}

/// Result of the ERP alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Erp {
    pub cost: f64,
    pub edits: usize,
}

#[derive(Clone, Copy)]
enum Step {
    Match,
    Delete,
    Insert,
}

/// Edit distance with real penalty between two stop sequences.
///
/// When several alignments reach the optimal cost, the traceback prefers a
/// match, then a gap in the submitted sequence, then a gap in the actual one.
pub fn erp<S: AsRef<str>>(
    actual: &[S],
    submitted: &[S],
    matrix: &TravelTimeMatrix,
    gap_ref: &str,
    normalize: bool,
) -> Result<Erp, ScoreError> {
    let index = |id: &str| matrix.index_of(id).ok_or_else(|| ScoreError::UnknownStop(id.to_owned()));
    let a: Vec<usize> = actual.iter().map(|s| index(s.as_ref())).collect::<Result<_, _>>()?;
    let b: Vec<usize> = submitted.iter().map(|s| index(s.as_ref())).collect::<Result<_, _>>()?;
    let g = index(gap_ref)?;
    let scale = match matrix.max_entry() {
        m if normalize && m > 0.0 => m,
        _ => 1.0,
    };
    let t = |i: usize, j: usize| matrix.at(i, j) / scale;

    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut d = vec![0.0; (n + 1) * w];
    let mut step = vec![Step::Match; (n + 1) * w];
    for i in 1..=n {
        d[i * w] = d[(i - 1) * w] + t(a[i - 1], g);
        step[i * w] = Step::Delete;
    }
    for j in 1..=m {
        d[j] = d[j - 1] + t(b[j - 1], g);
        step[j] = Step::Insert;
    }
    for i in 1..=n {
        for j in 1..=m {
            let mut best = (d[(i - 1) * w + j - 1] + t(a[i - 1], b[j - 1]), Step::Match);
            let del = d[(i - 1) * w + j] + t(a[i - 1], g);
            if del < best.0 {
                best = (del, Step::Delete);
            }
            let ins = d[i * w + j - 1] + t(b[j - 1], g);
            if ins < best.0 {
                best = (ins, Step::Insert);
            }
            d[i * w + j] = best.0;
            step[i * w + j] = best.1;
        }
    }

    let (mut i, mut j, mut edits) = (n, m, 0);
    while i > 0 || j > 0 {
        let c = match step[i * w + j] {
            Step::Match => {
                i -= 1;
                j -= 1;
                t(a[i], b[j])
            }
            Step::Delete => {
                i -= 1;
                t(a[i], g)
            }
            Step::Insert => {
                j -= 1;
                t(b[j], g)
            }
        };
        if c != 0.0 {
            edits += 1;
        }
    }
    Ok(Erp {
        cost: d[n * w + m],
        edits,
    })
}

/// Per-route score detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteScore {
    pub route_id: String,
    pub sd: f64,
    pub erp_cost: f64,
    pub erp_edits: usize,
    pub score: f64,
}

/// Per-route scores and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub routes: Vec<RouteScore>,
    pub mean: f64,
}

impl ScoreReport {
    pub fn from_routes(routes: Vec<RouteScore>) -> Self {
        let mean = if routes.is_empty() {
            0.0
        } else {
            routes.iter().map(|r| r.score).sum::<f64>() / routes.len() as f64
        };
        Self { routes, mean }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Route score from already depot-free sequences.
pub fn route_score<S: AsRef<str>>(
    route_id: &str,
    actual: &[S],
    submitted: &[S],
    matrix: &TravelTimeMatrix,
    gap_ref: &str,
) -> Result<RouteScore, ScoreError> {
    let sd = sequence_deviation(actual, submitted)?;
    let e = erp(actual, submitted, matrix, gap_ref, true)?;
    let score = if e.edits == 0 { 0.0 } else { sd * e.cost / e.edits as f64 };
    Ok(RouteScore {
        route_id: route_id.to_owned(),
        sd,
        erp_cost: e.cost,
        erp_edits: e.edits,
        score,
    })
}

/// Scores one route against a submission.
pub trait RouteScorer: Send + Sync {
    fn score(&self, route: &Route, submitted: &[String]) -> Result<RouteScore, ScoreError>;
}

/// The SD × ERP scorer described in the module docs.
#[derive(Debug, Clone, Default)]
pub struct SdErpScorer {
    /// Gap reference stop; the route's depot when `None`.
    pub gap_ref: Option<String>,
    /// Score routes without a travel time matrix on haversine distances
    /// instead of failing.
    pub haversine_fallback: bool,
}

impl RouteScorer for SdErpScorer {
    fn score(&self, route: &Route, submitted: &[String]) -> Result<RouteScore, ScoreError> {
        let actual = route.actual().ok_or_else(|| ScoreError::MissingActual(route.id().to_owned()))?;
        let fallback;
        let matrix = match route.travel_times() {
            Some(m) => m,
            None if self.haversine_fallback => {
                fallback = TravelTimeMatrix::from_haversine(route.stops());
                &fallback
            }
            None => return Err(ScoreError::MissingMatrix(route.id().to_owned())),
        };
        let depot = &route.depot().id;
        let sub: Vec<&str> = submitted.iter().map(String::as_str).filter(|s| s != depot).collect();
        if sub.len() + 1 != submitted.len() {
            return Err(ScoreError::UnequalStopSets("submission must contain the depot exactly once".into()));
        }
        let act: Vec<&str> = actual.deliveries().iter().map(String::as_str).collect();
        let gap_ref = self.gap_ref.as_deref().unwrap_or(depot);
        route_score(route.id(), &act, &sub, matrix, gap_ref)
    }
}

/// Route id to ordered stop ids, depot first.
pub type Submission = BTreeMap<String, Vec<String>>;

pub fn submission_from_sequences(seqs: impl IntoIterator<Item = StopSequence>) -> Submission {
    seqs.into_iter().map(|s| (s.route_id, s.stops)).collect()
}

pub fn read_submission(path: &Path) -> Result<Submission, std::io::Error> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(std::io::Error::other)
}

pub fn submission_json(sub: &Submission) -> String {
    let mut s = serde_json::to_string_pretty(sub).expect("submission serializes");
    s.push('\n');
    s
}

/// Scores every route that has an actual sequence, in parallel. Per-route
/// entries come back in route id order.
pub fn dataset_score(
    dataset: &Dataset,
    submission: &Submission,
    scorer: &dyn RouteScorer,
) -> Result<ScoreReport, ScoreError> {
    let routes: Vec<&Route> = dataset.iter().filter(|r| r.actual().is_some()).collect();
    if let Some(r) = routes.iter().find(|r| !submission.contains_key(r.id())) {
        return Err(ScoreError::MissingSubmission(r.id().to_owned()));
    }
    let scores = routes
        .par_iter()
        .map(|r| scorer.score(r, &submission[r.id()]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreReport::from_routes(scores))
}
