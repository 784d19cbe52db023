//! Domain types shared by every stage of the pipeline: stops, routes, travel
//! time matrices, and stop/zone sequences.
//!
//! All types are plain data and immutable once a [`Route`] has been validated,
//! so they can be shared read-only across threads.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by [`haversine_m`].
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Zone id reserved for the depot. It never appears inside a [`ZoneSequence`];
/// it is only ever used as the start context for zone prediction.
pub const DEPOT_ZONE: &str = "stz";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("route {route_id}: unknown stop id {stop_id:?}")]
    UnknownStop { route_id: String, stop_id: String },
    #[error("route {route_id}: stop {stop_id:?} has invalid coordinates ({lat}, {lng})")]
    InvalidCoordinate {
        route_id: String,
        stop_id: String,
        lat: f64,
        lng: f64,
    },
    #[error("route {route_id}: expected exactly one depot stop, found {count}")]
    DepotCount { route_id: String, count: usize },
    #[error("route {route_id}: delivery stop {stop_id:?} has no zone id")]
    MissingZone { route_id: String, stop_id: String },
    #[error("route {route_id}: actual sequence is not a permutation of the stops: {detail}")]
    NotAPermutation { route_id: String, detail: String },
    #[error("route {route_id}: travel time matrix is invalid: {detail}")]
    InvalidMatrix { route_id: String, detail: String },
    #[error("route {route_id}: zone sequence is invalid: {detail}")]
    InvalidZoneSequence { route_id: String, detail: String },
}

/// A latitude/longitude pair in degrees (WGS84).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLng {
    pub lat: f64,
    pub lng: f64,
}

impl LatLng {
    pub fn new(lat: f64, lng: f64) -> Self {
        Self { lat, lng }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lng.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lng)
    }
}

/// Great-circle distance in meters.
///
/// ```
/// use zoneseq::model::{haversine_m, LatLng};
/// let d = haversine_m(LatLng::new(0.0, 0.0), LatLng::new(0.0, 1.0));
/// assert!((d - 111_194.93).abs() < 1.0);
/// ```
pub fn haversine_m(a: LatLng, b: LatLng) -> f64 {
    if a == b {
        return 0.0;
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lng - a.lng).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopKind {
    Depot,
    Delivery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: String,
    pub lat: f64,
    pub lng: f64,
    pub zone_id: Option<String>,
    pub kind: StopKind,
}

impl Stop {
    pub fn delivery(id: impl Into<String>, lat: f64, lng: f64, zone_id: Option<&str>) -> Self {
        Self {
            id: id.into(),
            lat,
            lng,
            zone_id: zone_id.map(str::to_owned),
            kind: StopKind::Delivery,
        }
    }

    pub fn depot(id: impl Into<String>, lat: f64, lng: f64) -> Self {
        Self {
            id: id.into(),
            lat,
            lng,
            zone_id: None,
            kind: StopKind::Depot,
        }
    }

    pub fn point(&self) -> LatLng {
        LatLng::new(self.lat, self.lng)
    }

    pub fn is_depot(&self) -> bool {
        self.kind == StopKind::Depot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quality {
    High,
    Medium,
    Low,
}

/// Dense, possibly asymmetric travel cost matrix keyed by stop id.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeMatrix {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    t: Vec<f64>,
}

impl TravelTimeMatrix {
    /// Builds a matrix from an id list and row-major entries. Entries must be
    /// finite and non-negative with a zero diagonal.
    pub fn new(ids: Vec<String>, t: Vec<f64>) -> Result<Self, String> {
        let n = ids.len();
        if t.len() != n * n {
            return Err(format!("expected {} entries for {n} ids, got {}", n * n, t.len()));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(format!("duplicate id {id:?}"));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = t[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("entry {:?} -> {:?} is {v}", ids[i], ids[j]));
                }
                if i == j && v != 0.0 {
                    return Err(format!("diagonal entry for {:?} is {v}", ids[i]));
                }
            }
        }
        Ok(Self { ids, index, t })
    }

    /// A haversine-derived matrix over the given stops, in meters.
    pub fn from_haversine<'a>(stops: impl IntoIterator<Item = &'a Stop>) -> Self {
        let stops: Vec<&Stop> = stops.into_iter().collect();
        let ids: Vec<String> = stops.iter().map(|s| s.id.clone()).collect();
        let mut t = Vec::with_capacity(stops.len() * stops.len());
        for a in &stops {
            for b in &stops {
                t.push(haversine_m(a.point(), b.point()));
            }
        }
        Self::new(ids, t).expect("haversine distances are finite and non-negative")
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ids.len() + j]
    }

    pub fn get(&self, from: &str, to: &str) -> Option<f64> {
        Some(self.at(self.index_of(from)?, self.index_of(to)?))
    }

    pub fn max_entry(&self) -> f64 {
        self.t.iter().copied().fold(0.0, f64::max)
    }
}

/// Ordered stop ids for one route; the first id is the depot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopSequence {
    pub route_id: String,
    pub stops: Vec<String>,
}

impl StopSequence {
    pub fn new(route_id: impl Into<String>, stops: Vec<String>) -> Self {
        Self {
            route_id: route_id.into(),
            stops,
        }
    }

    /// The sequence with the leading depot removed.
    pub fn deliveries(&self) -> &[String] {
        self.stops.get(1..).unwrap_or(&[])
    }
}

/// Ordered, duplicate-free zone ids. The depot sentinel is an implicit prefix
/// and never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneSequence {
    pub route_id: String,
    zones: Vec<String>,
}

impl ZoneSequence {
    pub fn new(route_id: impl Into<String>, zones: Vec<String>) -> Result<Self, ModelError> {
        let route_id = route_id.into();
        let bad = |detail: String| ModelError::InvalidZoneSequence {
            route_id: route_id.clone(),
            detail,
        };
        if zones.is_empty() {
            return Err(bad("empty".into()));
        }
        let mut seen = HashSet::with_capacity(zones.len());
        for z in &zones {
            if z == DEPOT_ZONE {
                return Err(bad(format!("contains the depot sentinel {DEPOT_ZONE:?}")));
            }
            if z.is_empty() {
                return Err(bad("contains an empty zone id".into()));
            }
            if !seen.insert(z.as_str()) {
                return Err(bad(format!("duplicate zone {z:?}")));
            }
        }
        Ok(Self { route_id, zones })
    }

    pub fn zones(&self) -> &[String] {
        &self.zones
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn into_zones(self) -> Vec<String> {
        self.zones
    }
}

/// A delivery route. Construct through [`Route::new`], which validates every
/// cross-field invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    route_id: String,
    stops: BTreeMap<String, Stop>,
    depot_id: String,
    travel_times: Option<TravelTimeMatrix>,
    actual: Option<StopSequence>,
    quality: Option<Quality>,
}

impl Route {
    pub fn new(
        route_id: impl Into<String>,
        stops: impl IntoIterator<Item = Stop>,
        travel_times: Option<TravelTimeMatrix>,
        actual: Option<Vec<String>>,
        quality: Option<Quality>,
    ) -> Result<Self, ModelError> {
        let route_id = route_id.into();
        let stops: BTreeMap<String, Stop> = stops.into_iter().map(|s| (s.id.clone(), s)).collect();

        for s in stops.values() {
            if !s.point().is_valid() {
                return Err(ModelError::InvalidCoordinate {
                    route_id,
                    stop_id: s.id.clone(),
                    lat: s.lat,
                    lng: s.lng,
                });
            }
        }
        let depots: Vec<&Stop> = stops.values().filter(|s| s.is_depot()).collect();
        if depots.len() != 1 {
            return Err(ModelError::DepotCount {
                route_id,
                count: depots.len(),
            });
        }
        let depot_id = depots[0].id.clone();

        if let Some(m) = &travel_times {
            let bad = |detail: String| ModelError::InvalidMatrix {
                route_id: route_id.clone(),
                detail,
            };
            if m.len() != stops.len() {
                return Err(bad(format!("{} ids for {} stops", m.len(), stops.len())));
            }
            if let Some(id) = m.ids().iter().find(|id| !stops.contains_key(*id)) {
                return Err(bad(format!("unknown stop id {id:?}")));
            }
        }

        let actual = match actual {
            None => None,
            Some(seq) => {
                let bad = |detail: String| ModelError::NotAPermutation {
                    route_id: route_id.clone(),
                    detail,
                };
                if seq.len() != stops.len() {
                    return Err(bad(format!("{} ids for {} stops", seq.len(), stops.len())));
                }
                let mut seen = HashSet::with_capacity(seq.len());
                for id in &seq {
                    if !stops.contains_key(id) {
                        return Err(bad(format!("unknown stop id {id:?}")));
                    }
                    if !seen.insert(id.as_str()) {
                        return Err(bad(format!("duplicate stop id {id:?}")));
                    }
                }
                if seq[0] != depot_id {
                    return Err(bad(format!("starts at {:?}, not the depot", seq[0])));
                }
                Some(StopSequence::new(route_id.clone(), seq))
            }
        };

        Ok(Self {
            route_id,
            stops,
            depot_id,
            travel_times,
            actual,
            quality,
        })
    }

    pub fn id(&self) -> &str {
        &self.route_id
    }

    pub fn stops(&self) -> impl Iterator<Item = &Stop> {
        self.stops.values()
    }

    pub fn deliveries(&self) -> impl Iterator<Item = &Stop> {
        self.stops.values().filter(|s| !s.is_depot())
    }

    pub fn stop(&self, id: &str) -> Result<&Stop, ModelError> {
        self.stops.get(id).ok_or_else(|| ModelError::UnknownStop {
            route_id: self.route_id.clone(),
            stop_id: id.to_owned(),
        })
    }

    pub fn len(&self) -> usize {
        self.stops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    pub fn depot(&self) -> &Stop {
        &self.stops[&self.depot_id]
    }

    pub fn travel_times(&self) -> Option<&TravelTimeMatrix> {
        self.travel_times.as_ref()
    }

    pub fn actual(&self) -> Option<&StopSequence> {
        self.actual.as_ref()
    }

    pub fn quality(&self) -> Option<Quality> {
        self.quality
    }

    /// Travel cost between two stops: the matrix entry when the route carries
    /// a travel time matrix, otherwise the haversine distance.
    pub fn distance(&self, from: &str, to: &str) -> Result<f64, ModelError> {
        let a = self.stop(from)?;
        let b = self.stop(to)?;
        if from == to {
            return Ok(0.0);
        }
        Ok(match &self.travel_times {
            Some(m) => m.get(from, to).expect("matrix covers the stop set"),
            None => haversine_m(a.point(), b.point()),
        })
    }

    /// Distinct zone ids over the delivery stops, sorted.
    pub fn zone_ids(&self) -> Vec<String> {
        let mut zones: Vec<String> = self
            .deliveries()
            .filter_map(|s| s.zone_id.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        zones.sort();
        zones
    }

    /// Checks that every delivery stop carries a zone id.
    pub fn check_zoned(&self) -> Result<(), ModelError> {
        match self
            .deliveries()
            .find(|s| s.zone_id.as_deref().is_none_or(str::is_empty))
        {
            Some(s) => Err(ModelError::MissingZone {
                route_id: self.route_id.clone(),
                stop_id: s.id.clone(),
            }),
            None => Ok(()),
        }
    }

    /// Replaces a stop's zone id. Used by zone imputation during ingestion.
    pub(crate) fn set_zone(&mut self, stop_id: &str, zone: String) {
        if let Some(s) = self.stops.get_mut(stop_id) {
            s.zone_id = Some(zone);
        }
    }

    pub fn with_quality(mut self, quality: Option<Quality>) -> Self {
        self.quality = quality;
        self
    }

    /// Replaces the actual sequence, validating it like [`Route::new`].
    pub fn with_actual(self, actual: Option<Vec<String>>) -> Result<Self, ModelError> {
        Route::new(
            self.route_id,
            self.stops.into_values(),
            self.travel_times,
            actual,
            self.quality,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn small_route(matrix: bool) -> Route {
        let stops = vec![
            Stop::depot("D", 47.60, -122.30),
            Stop::delivery("a", 47.61, -122.31, Some("A-1.1A")),
            Stop::delivery("b", 47.62, -122.32, Some("A-1.2A")),
        ];
        let tt = matrix.then(|| {
            TravelTimeMatrix::new(
                vec!["D".into(), "a".into(), "b".into()],
                vec![0.0, 10.0, 20.0, 11.0, 0.0, 5.0, 21.0, 6.0, 0.0],
            )
            .unwrap()
        });
        Route::new("r1", stops, tt, Some(vec!["D".into(), "a".into(), "b".into()]), None).unwrap()
    }

    #[test]
    fn haversine_identity_is_zero() {
        assert_eq!(haversine_m(LatLng::new(0.0, 0.0), LatLng::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn haversine_one_degree_of_longitude_at_equator() {
        // R * pi / 180
        let expected = 6_371_000.0 * std::f64::consts::PI / 180.0;
        let d = haversine_m(LatLng::new(0.0, 0.0), LatLng::new(0.0, 1.0));
        assert!((d - expected).abs() < 1e-6);
        assert!((d - 111_195.0).abs() < 1.0);
    }

    #[test]
    fn haversine_is_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = LatLng::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
            let b = LatLng::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
            assert_eq!(haversine_m(a, b), haversine_m(b, a));
            assert!(haversine_m(a, b) >= 0.0);
        }
    }

    #[test]
    fn distance_uses_matrix_when_present() {
        let r = small_route(true);
        assert_eq!(r.distance("a", "b").unwrap(), 5.0);
        assert_eq!(r.distance("b", "a").unwrap(), 6.0);
        assert_eq!(r.distance("a", "a").unwrap(), 0.0);
    }

    #[test]
    fn distance_falls_back_to_haversine() {
        let r = small_route(false);
        let a = r.stop("a").unwrap().point();
        let b = r.stop("b").unwrap().point();
        assert_eq!(r.distance("a", "b").unwrap(), haversine_m(a, b));
        assert_eq!(r.distance("b", "b").unwrap(), 0.0);
    }

    #[test]
    fn distance_names_unknown_stop() {
        let r = small_route(true);
        let err = r.distance("a", "zz").unwrap_err();
        assert!(err.to_string().contains("\"zz\""));
    }

    #[test]
    fn route_rejects_two_depots() {
        let stops = vec![Stop::depot("D", 0.0, 0.0), Stop::depot("E", 0.0, 0.0)];
        let err = Route::new("r", stops, None, None, None).unwrap_err();
        assert_eq!(err, ModelError::DepotCount { route_id: "r".into(), count: 2 });
    }

    #[test]
    fn route_rejects_bad_coordinates() {
        let stops = vec![Stop::depot("D", 0.0, 0.0), Stop::delivery("a", 91.0, 0.0, Some("A"))];
        assert!(matches!(
            Route::new("r", stops, None, None, None),
            Err(ModelError::InvalidCoordinate { .. })
        ));
    }

    #[test]
    fn route_rejects_corrupted_actual() {
        let stops = || vec![Stop::depot("D", 0.0, 0.0), Stop::delivery("a", 0.0, 0.1, Some("A"))];
        let missing = Route::new("r", stops(), None, Some(vec!["D".into()]), None);
        assert!(matches!(missing, Err(ModelError::NotAPermutation { .. })));
        let wrong_start = Route::new("r", stops(), None, Some(vec!["a".into(), "D".into()]), None);
        assert!(matches!(wrong_start, Err(ModelError::NotAPermutation { .. })));
        let dup = Route::new("r", stops(), None, Some(vec!["D".into(), "D".into()]), None);
        assert!(matches!(dup, Err(ModelError::NotAPermutation { .. })));
    }

    #[test]
    fn route_rejects_mismatched_matrix() {
        let stops = vec![Stop::depot("D", 0.0, 0.0), Stop::delivery("a", 0.0, 0.1, Some("A"))];
        let m = TravelTimeMatrix::new(vec!["D".into()], vec![0.0]).unwrap();
        assert!(matches!(
            Route::new("r", stops, Some(m), None, None),
            Err(ModelError::InvalidMatrix { .. })
        ));
    }

    #[test]
    fn matrix_rejects_negative_and_nonzero_diagonal() {
        assert!(TravelTimeMatrix::new(vec!["a".into(), "b".into()], vec![0.0, -1.0, 1.0, 0.0]).is_err());
        assert!(TravelTimeMatrix::new(vec!["a".into()], vec![3.0]).is_err());
        assert!(TravelTimeMatrix::new(vec!["a".into()], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn zone_sequence_invariants() {
        assert!(ZoneSequence::new("r", vec![]).is_err());
        assert!(ZoneSequence::new("r", vec!["A".into(), "A".into()]).is_err());
        assert!(ZoneSequence::new("r", vec![DEPOT_ZONE.into()]).is_err());
        assert_eq!(ZoneSequence::new("r", vec!["A".into(), "B".into()]).unwrap().len(), 2);
    }
}
