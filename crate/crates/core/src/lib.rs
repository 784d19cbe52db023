//! Learning zone-visit order from historical delivery routes and turning it
//! into full stop sequences.
//!
//! The pipeline has two levels:
//!
//! 1. [`ppm`] learns which zone tends to follow which from the zone order of
//!    past routes, and [`rollout`] uses that model to order the zones of a new
//!    route with one-step lookahead over a greedy base policy.
//! 2. [`tsp`] orders the stops inside each zone with an asymmetric TSP local
//!    search, injecting downstream zones as representative points so the
//!    per-zone tours are not myopic.
//!
//! [`ingest`] reads datasets, [`scorer`] measures how far a submitted sequence
//! is from the actual one, [`synth`] generates reproducible datasets with
//! planted zone patterns, and [`pipeline`] wires everything together.

pub mod ingest;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod ppm;
pub mod rollout;
pub mod scorer;
pub mod synth;
pub mod tsp;

pub use ingest::{load_dataset, Dataset, Split};
pub use model::{Route, Stop, StopSequence, ZoneSequence};
pub use ppm::{PpmConfig, PpmModel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/zones.md")]
    mod zones {}
    #[doc = include_str!("../../../book/src/ppm.md")]
    mod ppm {}
    #[doc = include_str!("../../../book/src/rollout.md")]
    mod rollout {}
    #[doc = include_str!("../../../book/src/stops.md")]
    mod stops {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
