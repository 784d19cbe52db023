//! Reproducible synthetic datasets with planted zone-order patterns.
//!
//! A template is an ordered list of zones with fixed locations. Zone ids are
//! hierarchical, `L-d.dX` (region letter, major number, minor digit, sub
//! letter), and a template keeps zones that share a prefix together while
//! shuffling the order at each level, so the visiting order is learnable from
//! every id component but is not the alphabetical one.
//!
//! Each route picks a template and a contiguous window of its zones, then
//! perturbs the order: every adjacent pair keeps its template order with
//! probability `pattern_strength` and otherwise is put in random order by a
//! fair coin. Stops are drawn around each zone center, and the actual
//! sequence visits zones in the perturbed order and stops within a zone by
//! nearest neighbor.
//!
//! All randomness comes from one ChaCha stream seeded by `seed`, consumed in a
//! fixed order, so a config always yields the same datasets.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, Split};
use crate::model::{haversine_m, LatLng, Quality, Route, Stop, TravelTimeMatrix, EARTH_RADIUS_M};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub south: f64,
    pub north: f64,
    pub west: f64,
    pub east: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train_routes: usize,
    pub n_eval_routes: usize,
    /// Inclusive range.
    pub zones_per_route: (usize, usize),
    /// Inclusive range.
    pub stops_per_zone: (usize, usize),
    pub n_templates: usize,
    pub pattern_strength: f64,
    pub geo_bbox: GeoBox,
    /// Distance between consecutive zone centers of a template, meters.
    pub zone_spacing_m: f64,
    /// Standard deviation of stops around their zone center, meters.
    pub stop_sigma_m: f64,
    /// Share of training routes marked Low quality; their zone order is a
    /// uniform shuffle.
    pub low_quality_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_train_routes: 200,
            n_eval_routes: 50,
            zones_per_route: (25, 35),
            stops_per_zone: (2, 6),
            n_templates: 6,
            pattern_strength: 0.95,
            geo_bbox: GeoBox {
                south: 47.50,
                north: 47.75,
                west: -122.45,
                east: -122.20,
            },
            zone_spacing_m: 700.0,
            stop_sigma_m: 120.0,
            low_quality_fraction: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_owned()));
        let (zl, zh) = self.zones_per_route;
        let (sl, sh) = self.stops_per_zone;
        if zl == 0 || zl > zh {
            return bad("zones_per_route must be a non-empty range starting at 1 or more");
        }
        if sl == 0 || sl > sh {
            return bad("stops_per_zone must be a non-empty range starting at 1 or more");
        }
        if zh > MAX_TEMPLATE_ZONES {
            return bad("zones_per_route may not exceed 260");
        }
        if self.n_templates == 0 {
            return bad("n_templates must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.pattern_strength) {
            return bad("pattern_strength must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.low_quality_fraction) {
            return bad("low_quality_fraction must lie in [0, 1]");
        }
        let b = &self.geo_bbox;
        let ok = |lat: f64, lng: f64| LatLng::new(lat, lng).is_valid();
        if !(ok(b.south, b.west) && ok(b.north, b.east) && b.south < b.north && b.west < b.east) {
            return bad("geo_bbox must be a valid box with south < north and west < east");
        }
        if !(self.zone_spacing_m > 0.0 && self.stop_sigma_m >= 0.0) {
            return bad("zone_spacing_m must be positive and stop_sigma_m non-negative");
        }
        Ok(())
    }
}

// 26 sub letters times 10 minors
const MAX_TEMPLATE_ZONES: usize = 260;
const SPEED_MPS: f64 = 8.0;

/// A planted zone order with fixed zone locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub zones: Vec<String>,
    pub centers: Vec<LatLng>,
    pub depot: LatLng,
}

/// Which template window a route was drawn from, and the zone order it used.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteOrigin {
    pub template: usize,
    pub offset: usize,
    pub zone_order: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train: Dataset,
    pub eval: Dataset,
    pub templates: Vec<Template>,
    pub origins: BTreeMap<String, RouteOrigin>,
}

fn offset(p: LatLng, north_m: f64, east_m: f64) -> LatLng {
    let dlat = north_m / EARTH_RADIUS_M * 180.0 / PI;
    let dlng = east_m / (EARTH_RADIUS_M * p.lat.to_radians().cos()) * 180.0 / PI;
    LatLng::new(p.lat + dlat, p.lng + dlng)
}

fn zone_ids(rng: &mut ChaCha8Rng, region: char, major_base: usize, n: usize) -> Vec<String> {
    let mut ids = Vec::with_capacity(n);
    let mut majors: Vec<usize> = (0..n.div_ceil(6).max(1)).map(|m| major_base + m).collect();
    majors.shuffle(rng);
    'fill: loop {
        for &major in &majors {
            let mut minors: Vec<usize> = (1..=9).collect();
            minors.shuffle(rng);
            for &minor in minors.iter().take(rng.random_range(1..=3)) {
                let mut subs: Vec<char> = ('A'..='Z').collect();
                subs.shuffle(rng);
                for &sub in subs.iter().take(rng.random_range(1..=3)) {
                    let id = format!("{region}-{major}.{minor}{sub}");
                    if !ids.contains(&id) {
                        ids.push(id);
                        if ids.len() == n {
                            break 'fill;
                        }
                    }
                }
            }
        }
    }
    ids
}

fn make_template(rng: &mut ChaCha8Rng, cfg: &SynthConfig, index: usize) -> Template {
    let b = &cfg.geo_bbox;
    let n = cfg.zones_per_route.1;
    let region = (b'A' + (index % 26) as u8) as char;
    let major_base = 1 + 30 * (index / 26) + rng.random_range(0..10);
    let zones = zone_ids(rng, region, major_base, n);
    let start = LatLng::new(rng.random_range(b.south..b.north), rng.random_range(b.west..b.east));
    let mut heading = rng.random_range(0.0..2.0 * PI);
    let mut centers = Vec::with_capacity(n);
    let mut p = start;
    for _ in 0..n {
        centers.push(p);
        heading += rng.random_range(-0.7..0.7);
        p = offset(p, cfg.zone_spacing_m * heading.cos(), cfg.zone_spacing_m * heading.sin());
    }
    let away = rng.random_range(0.0..2.0 * PI);
    let depot = offset(start, 3000.0 * away.cos(), 3000.0 * away.sin());
    Template { zones, centers, depot }
}

/// Perturbs a window: each adjacent pair keeps its order with probability
/// `strength`, else a fair coin decides whether to swap it.
fn perturb(rng: &mut ChaCha8Rng, order: &mut [usize], strength: f64) {
    for i in 0..order.len().saturating_sub(1) {
        if rng.random::<f64>() >= strength && rng.random::<bool>() {
            order.swap(i, i + 1);
        }
    }
}

struct RouteSpec<'a> {
    route_id: String,
    template: &'a Template,
    /// Template zone indices in visiting order.
    order: Vec<usize>,
    stop_counts: Vec<usize>,
    quality: Quality,
}

fn build_route(rng: &mut ChaCha8Rng, cfg: &SynthConfig, spec: RouteSpec<'_>) -> Route {
    let t = spec.template;
    let normal = Normal::new(0.0, cfg.stop_sigma_m).expect("sigma validated");
    // stops per zone in visiting order; ids assigned after a shuffle so they
    // carry no order information
    let mut placed: Vec<(usize, LatLng)> = Vec::new();
    for (&z, &count) in spec.order.iter().zip(&spec.stop_counts) {
        for _ in 0..count {
            let p = offset(t.centers[z], normal.sample(rng), normal.sample(rng));
            placed.push((z, p));
        }
    }
    let mut ids: Vec<usize> = (0..placed.len()).collect();
    ids.shuffle(rng);
    let width = placed.len().to_string().len().max(3);
    let name = |k: usize| format!("s{:0width$}", ids[k]);

    let mut stops = vec![Stop::depot("depot", t.depot.lat, t.depot.lng)];
    stops.extend(
        placed
            .iter()
            .enumerate()
            .map(|(k, (z, p))| Stop::delivery(name(k), p.lat, p.lng, Some(&t.zones[*z]))),
    );

    let mut actual = vec!["depot".to_string()];
    let mut cur = t.depot;
    let mut k0 = 0;
    for &count in &spec.stop_counts {
        let mut left: Vec<usize> = (k0..k0 + count).collect();
        while !left.is_empty() {
            let (pos, _) = left
                .iter()
                .enumerate()
                .map(|(i, &k)| (i, haversine_m(cur, placed[k].1)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            let k = left.remove(pos);
            cur = placed[k].1;
            actual.push(name(k));
        }
        k0 += count;
    }

    // haversine travel time with a per-direction slowdown of up to 20%
    let n = stops.len();
    let mut tt = Vec::with_capacity(n * n);
    for a in &stops {
        for b in &stops {
            let secs = if a.id == b.id {
                0.0
            } else {
                haversine_m(a.point(), b.point()) / SPEED_MPS * rng.random_range(1.0..1.2)
            };
            tt.push((secs * 10.0).round() / 10.0);
        }
    }
    let ids: Vec<String> = stops.iter().map(|s| s.id.clone()).collect();
    let matrix = TravelTimeMatrix::new(ids, tt).expect("finite non-negative times");
    Route::new(spec.route_id, stops, Some(matrix), Some(actual), Some(spec.quality)).expect("generated routes are valid")
}

/// Generates the training and evaluation datasets for `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates: Vec<Template> = (0..cfg.n_templates).map(|i| make_template(&mut rng, cfg, i)).collect();
    let mut origins = BTreeMap::new();
    let mut make = |rng: &mut ChaCha8Rng, prefix: &str, count: usize, low_fraction: f64| -> Vec<Route> {
        (0..count)
            .map(|i| {
                let route_id = format!("{prefix}-{i:04}");
                let ti = rng.random_range(0..templates.len());
                let t = &templates[ti];
                let len = rng.random_range(cfg.zones_per_route.0..=cfg.zones_per_route.1);
                let off = rng.random_range(0..=t.zones.len() - len);
                let mut order: Vec<usize> = (off..off + len).collect();
                let low = rng.random::<f64>() < low_fraction;
                if low {
                    order.shuffle(rng);
                } else {
                    perturb(rng, &mut order, cfg.pattern_strength);
                }
                let quality = if low {
                    Quality::Low
                } else if rng.random::<f64>() < 0.7 {
                    Quality::High
                } else {
                    Quality::Medium
                };
                let stop_counts = (0..len)
                    .map(|_| rng.random_range(cfg.stops_per_zone.0..=cfg.stops_per_zone.1))
                    .collect();
                origins.insert(
                    route_id.clone(),
                    RouteOrigin {
                        template: ti,
                        offset: off,
                        zone_order: order.iter().map(|&z| t.zones[z].clone()).collect(),
                    },
                );
                let spec = RouteSpec {
                    route_id,
                    template: t,
                    order,
                    stop_counts,
                    quality,
                };
                build_route(rng, cfg, spec)
            })
            .collect()
    };
    let train = make(&mut rng, "train", cfg.n_train_routes, cfg.low_quality_fraction);
    let eval = make(&mut rng, "eval", cfg.n_eval_routes, 0.0);
    Ok(SynthOutput {
        train: Dataset::new(train, Split::Train),
        eval: Dataset::new(eval, Split::Eval),
        templates,
        origins,
    })
}

/// One route with exactly `n_zones` zones and `n_stops` delivery stops spread
/// as evenly as possible over them, visited in template order.
pub fn sized_route(seed: u64, n_zones: usize, n_stops: usize) -> Result<Route, SynthError> {
    if n_zones == 0 || n_stops < n_zones {
        return Err(SynthError::InvalidConfig("need 1 <= n_zones <= n_stops".into()));
    }
    let cfg = SynthConfig {
        seed,
        zones_per_route: (n_zones, n_zones),
        ..SynthConfig::default()
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = make_template(&mut rng, &cfg, 0);
    let stop_counts = (0..n_zones).map(|z| n_stops / n_zones + usize::from(z < n_stops % n_zones)).collect();
    let spec = RouteSpec {
        route_id: format!("sized-{n_zones}-{n_stops}"),
        template: &template,
        order: (0..n_zones).collect(),
        stop_counts,
        quality: Quality::High,
    };
    Ok(build_route(&mut rng, &cfg, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_dataset, route_zsgt, training_corpus, write_dataset};
    use crate::ppm::{tokenize_zone, PpmConfig, PpmModel};

    fn small(strength: f64) -> SynthConfig {
        SynthConfig {
            seed: 7,
            n_train_routes: 30,
            n_eval_routes: 5,
            zones_per_route: (4, 8),
            stops_per_zone: (1, 3),
            n_templates: 3,
            pattern_strength: strength,
            low_quality_fraction: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zone_ids_have_four_components() {
        let out = generate(&small(1.0)).unwrap();
        for t in &out.templates {
            for z in &t.zones {
                let c = tokenize_zone(z).unwrap();
                assert!(c.as_array().iter().all(|s| s != crate::ppm::EMPTY_TOKEN), "{z}");
            }
            let mut sorted = t.zones.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), t.zones.len());
        }
    }

    #[test]
    fn full_strength_reproduces_template_windows() {
        let out = generate(&small(1.0)).unwrap();
        for r in out.train.iter().chain(out.eval.iter()) {
            let o = &out.origins[r.id()];
            let t = &out.templates[o.template];
            let window = &t.zones[o.offset..o.offset + o.zone_order.len()];
            assert_eq!(route_zsgt(r).unwrap().unwrap().zones(), window);
        }
    }

    #[test]
    fn zero_strength_breaks_template_order() {
        let out = generate(&small(0.0)).unwrap();
        let differs = out.train.iter().any(|r| {
            let o = &out.origins[r.id()];
            let t = &out.templates[o.template];
            route_zsgt(r).unwrap().unwrap().zones() != &t.zones[o.offset..o.offset + o.zone_order.len()]
        });
        assert!(differs);
    }

    #[test]
    fn zsgt_follows_chosen_order() {
        let out = generate(&small(0.6)).unwrap();
        for r in out.train.iter() {
            assert_eq!(route_zsgt(r).unwrap().unwrap().zones(), out.origins[r.id()].zone_order.as_slice());
        }
    }

    #[test]
    fn deterministic_and_loadable() {
        let cfg = small(0.9);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.eval, b.eval);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_dataset(&a.train, d1.path()).unwrap();
        write_dataset(&b.train, d2.path()).unwrap();
        for f in ["routes.json", "actual_sequences.json", "travel_times.json", "quality.json"] {
            assert_eq!(
                std::fs::read(d1.path().join(f)).unwrap(),
                std::fs::read(d2.path().join(f)).unwrap(),
                "{f}"
            );
        }
        let back = load_dataset(d1.path()).unwrap();
        assert_eq!(back.len(), a.train.len());
        for r in back.iter() {
            r.check_zoned().unwrap();
            assert_eq!(r.actual(), a.train.get(r.id()).unwrap().actual());
        }
    }

    #[test]
    fn low_quality_routes_are_marked() {
        let cfg = SynthConfig {
            low_quality_fraction: 0.5,
            ..small(1.0)
        };
        let out = generate(&cfg).unwrap();
        let low = out.train.iter().filter(|r| r.quality() == Some(Quality::Low)).count();
        assert!(low > 0 && low < out.train.len());
        assert!(out.eval.iter().all(|r| r.quality() != Some(Quality::Low)));
        assert_eq!(training_corpus(&out.train, false).unwrap().len(), out.train.len() - low);
    }

    #[test]
    fn model_prefers_template_over_reverse() {
        let cfg = SynthConfig {
            n_train_routes: 120,
            ..small(0.9)
        };
        let out = generate(&cfg).unwrap();
        let corpus: Vec<Vec<String>> = training_corpus(&out.train, false)
            .unwrap()
            .into_iter()
            .map(|z| z.into_zones())
            .collect();
        let model = PpmModel::train(&corpus, PpmConfig::default()).unwrap();
        for t in &out.templates {
            let rev: Vec<String> = t.zones.iter().rev().cloned().collect();
            assert!(model.seq_reward(&t.zones) > model.seq_reward(&rev));
        }
    }

    #[test]
    fn sized_route_has_requested_shape() {
        let r = sized_route(3, 30, 200).unwrap();
        assert_eq!(r.deliveries().count(), 200);
        assert_eq!(r.zone_ids().len(), 30);
        assert!(sized_route(3, 5, 4).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SynthConfig {
                zones_per_route: (5, 4),
                ..SynthConfig::default()
            },
            SynthConfig {
                stops_per_zone: (0, 2),
                ..SynthConfig::default()
            },
            SynthConfig {
                pattern_strength: 1.5,
                ..SynthConfig::default()
            },
            SynthConfig {
                n_templates: 0,
                ..SynthConfig::default()
            },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err());
        }
    }

    #[test]
    fn config_reads_partial_json() {
        let cfg: SynthConfig = serde_json::from_str(r#"{"seed": 9, "zones_per_route": [3, 5]}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.zones_per_route, (3, 5));
        assert_eq!(cfg.n_train_routes, SynthConfig::default().n_train_routes);
        assert!(serde_json::from_str::<SynthConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
