//! End-to-end sequencing: zone set, zone order, per-zone stop order, join.
//!
//! Routes are independent, so datasets are processed in parallel on the
//! rayon pool. Each route gets the same seed and results are collected in
//! route id order, which keeps outputs identical at any thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{route_zsgt, training_corpus, Dataset};
use crate::model::{ModelError, Route, StopSequence, ZoneSequence};
use crate::ppm::{PpmConfig, PpmError, PpmModel};
use crate::rollout::{Rollout, RolloutError, RolloutOptions};
use crate::scorer::{dataset_score, submission_from_sequences, RouteScorer, ScoreError, ScoreReport, Submission};
use crate::tsp::{sequence_stops, AtspSolver, TspError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ppm(#[from] PpmError),
    #[error("route {route_id}: {source}")]
    Rollout {
        route_id: String,
        #[source]
        source: RolloutError,
    },
    #[error(transparent)]
    Tsp(#[from] TspError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("the rollout strategy needs a trained model")]
    MissingModel,
    #[error("route {0} has no actual sequence to take the zone order from")]
    MissingActual(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
}

/// How the zones of a route are put in order before stops are sequenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneOrderStrategy {
    /// Rollout over the PPM model.
    Rollout,
    /// Zone ids sorted as strings.
    Alphabetical,
    /// The zone order of the actual sequence, as an upper reference.
    GroundTruth,
}

impl ZoneOrderStrategy {
    pub const ALL: [ZoneOrderStrategy; 3] = [Self::Rollout, Self::Alphabetical, Self::GroundTruth];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rollout => "rollout",
            Self::Alphabetical => "alphabetical",
            Self::GroundTruth => "ground_truth",
        }
    }
}

/// Wall time of one route, split by stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteTiming {
    pub zone_ms: f64,
    pub stop_ms: f64,
}

impl RouteTiming {
    pub fn total_ms(&self) -> f64 {
        self.zone_ms + self.stop_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequencedRoute {
    pub zone_order: ZoneSequence,
    pub sequence: StopSequence,
    pub timing: RouteTiming,
}

/// Everything sequencing needs besides the route.
pub struct Sequencer<'a> {
    pub model: Option<&'a PpmModel>,
    pub strategy: ZoneOrderStrategy,
    pub solver: &'a dyn AtspSolver,
    pub seed: u64,
    pub rollout: RolloutOptions,
}

impl Sequencer<'_> {
    pub fn zone_order(&self, route: &Route) -> Result<ZoneSequence, PipelineError> {
        route.check_zoned()?;
        let zones = route.zone_ids();
        match self.strategy {
            ZoneOrderStrategy::Alphabetical => Ok(ZoneSequence::new(route.id(), zones)?),
            ZoneOrderStrategy::GroundTruth => {
                route_zsgt(route)?.ok_or_else(|| PipelineError::MissingActual(route.id().to_owned()))
            }
            ZoneOrderStrategy::Rollout => {
                let model = self.model.ok_or(PipelineError::MissingModel)?;
                Rollout::new(model, self.rollout)
                    .sequence(route.id(), &zones)
                    .map_err(|source| PipelineError::Rollout {
                        route_id: route.id().to_owned(),
                        source,
                    })
            }
        }
    }

    pub fn route(&self, route: &Route) -> Result<SequencedRoute, PipelineError> {
        let t0 = Instant::now();
        let zone_order = self.zone_order(route)?;
        let t1 = Instant::now();
        let sequence = sequence_stops(route, zone_order.zones(), self.solver, self.seed)?;
        let t2 = Instant::now();
        Ok(SequencedRoute {
            zone_order,
            sequence,
            timing: RouteTiming {
                zone_ms: (t1 - t0).as_secs_f64() * 1e3,
                stop_ms: (t2 - t1).as_secs_f64() * 1e3,
            },
        })
    }

    /// Sequences every route, in parallel; results are in route id order.
    pub fn dataset(&self, dataset: &Dataset) -> Result<Vec<SequencedRoute>, PipelineError> {
        let routes: Vec<&Route> = dataset.iter().collect();
        routes.par_iter().map(|r| self.route(r)).collect()
    }
}

/// Trains a model on the dataset's ground-truth zone sequences. Returns the
/// model and the corpus size.
pub fn train(dataset: &Dataset, include_low: bool, config: PpmConfig) -> Result<(PpmModel, usize), PipelineError> {
    let corpus: Vec<Vec<String>> = training_corpus(dataset, include_low)?
        .into_iter()
        .map(ZoneSequence::into_zones)
        .collect();
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let model = PpmModel::train(&corpus, config)?;
    Ok((model, corpus.len()))
}

/// One strategy's bench result.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub strategy: ZoneOrderStrategy,
    pub submission: Submission,
    pub report: ScoreReport,
    pub mean_zone_ms: f64,
    pub mean_stop_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub corpus_size: usize,
    pub train_ms: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, strategy: ZoneOrderStrategy) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    /// Plain-text comparison table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>10} {:>8} {:>12} {:>12}\n",
            "zone order", "score", "routes", "zone ms", "stop ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>10.6} {:>8} {:>12.2} {:>12.2}\n",
                r.strategy.name(),
                r.report.mean,
                r.report.routes.len(),
                r.mean_zone_ms,
                r.mean_stop_ms
            ));
        }
        out
    }
}

/// Trains on `train`, then sequences and scores `eval` with every strategy.
pub fn bench(
    train_set: &Dataset,
    eval_set: &Dataset,
    config: PpmConfig,
    include_low: bool,
    solver: &dyn AtspSolver,
    scorer: &dyn RouteScorer,
    seed: u64,
) -> Result<BenchReport, PipelineError> {
    let t0 = Instant::now();
    let (model, corpus_size) = train(train_set, include_low, config)?;
    let train_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut rows = Vec::new();
    for strategy in ZoneOrderStrategy::ALL {
        let seq = Sequencer {
            model: Some(&model),
            strategy,
            solver,
            seed,
            rollout: RolloutOptions::default(),
        };
        let done = seq.dataset(eval_set)?;
        let n = done.len().max(1) as f64;
        let mean_zone_ms = done.iter().map(|d| d.timing.zone_ms).sum::<f64>() / n;
        let mean_stop_ms = done.iter().map(|d| d.timing.stop_ms).sum::<f64>() / n;
        let submission = submission_from_sequences(done.into_iter().map(|d| d.sequence));
        let report = dataset_score(eval_set, &submission, scorer)?;
        rows.push(BenchRow {
            strategy,
            submission,
            report,
            mean_zone_ms,
            mean_stop_ms,
        });
    }
    Ok(BenchReport {
        corpus_size,
        train_ms,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::SdErpScorer;
    use crate::synth::{generate, SynthConfig};
    use crate::tsp::BuiltinSolver;

    fn small() -> SynthConfig {
        SynthConfig {
            seed: 5,
            n_train_routes: 60,
            n_eval_routes: 6,
            zones_per_route: (5, 9),
            stops_per_zone: (1, 4),
            n_templates: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn sequences_are_permutations_starting_at_depot() {
        let out = generate(&small()).unwrap();
        let (model, n) = train(&out.train, false, PpmConfig::default()).unwrap();
        assert!(n > 0);
        for strategy in ZoneOrderStrategy::ALL {
            let seq = Sequencer {
                model: Some(&model),
                strategy,
                solver: &BuiltinSolver::default(),
                seed: 42,
                rollout: RolloutOptions::default(),
            };
            for (r, done) in out.eval.iter().zip(seq.dataset(&out.eval).unwrap()) {
                let s = &done.sequence;
                assert_eq!(s.route_id, r.id());
                assert_eq!(s.stops[0], r.depot().id);
                let mut got = s.stops.clone();
                got.sort();
                let mut want: Vec<String> = r.stops().map(|x| x.id.clone()).collect();
                want.sort();
                assert_eq!(got, want);
                assert!(done.timing.zone_ms >= 0.0 && done.timing.stop_ms >= 0.0);
            }
        }
    }

    #[test]
    fn ground_truth_needs_actual() {
        let out = generate(&small()).unwrap();
        let r = out.eval.iter().next().unwrap().clone().with_actual(None).unwrap();
        let seq = Sequencer {
            model: None,
            strategy: ZoneOrderStrategy::GroundTruth,
            solver: &BuiltinSolver::default(),
            seed: 1,
            rollout: RolloutOptions::default(),
        };
        assert!(matches!(seq.route(&r), Err(PipelineError::MissingActual(_))));
        let seq = Sequencer {
            strategy: ZoneOrderStrategy::Rollout,
            ..seq
        };
        assert!(matches!(seq.route(&r), Err(PipelineError::MissingModel)));
    }

    #[test]
    fn bench_is_reproducible() {
        let out = generate(&small()).unwrap();
        let run = || {
            bench(
                &out.train,
                &out.eval,
                PpmConfig::default(),
                false,
                &BuiltinSolver::default(),
                &SdErpScorer::default(),
                42,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.submission, y.submission);
            assert_eq!(x.report, y.report);
        }
        assert_eq!(a.rows.len(), 3);
        assert!(a.table().lines().count() == 4);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let ds = Dataset::new([], crate::ingest::Split::Train);
        assert!(matches!(train(&ds, false, PpmConfig::default()), Err(PipelineError::EmptyCorpus)));
    }
}
