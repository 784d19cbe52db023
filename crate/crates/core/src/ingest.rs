//! Dataset loading, zone repair, and ground-truth zone sequence extraction.
//!
//! A dataset directory holds up to four JSON files:
//!
//! | file                    | shape                                                      |
//! |-------------------------|------------------------------------------------------------|
//! | `routes.json`           | route id → `{"depot": {lat, lng, id?}, "stops": {id → {lat, lng, zone_id}}}` |
//! | `actual_sequences.json` | route id → stop id → 0-based position (0 is the depot)     |
//! | `travel_times.json`     | route id → from id → to id → seconds                       |
//! | `quality.json`          | route id → `"High"` \| `"Medium"` \| `"Low"`               |
//!
//! Only `routes.json` is required (`route_data.json` is read in its place
//! when it is missing). Unknown keys are ignored. The Challenge
//! layout is accepted as well: a depot given as a stop with `"type": "Station"`,
//! actual sequences nested under an `"actual"` key, and quality read from a
//! route's `"route_score"`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{ModelError, Quality, Route, Stop, StopKind, StopSequence, TravelTimeMatrix, ZoneSequence};

pub const ROUTES_FILE: &str = "routes.json";
/// Routes file name used by the Challenge release; read when `routes.json` is absent.
pub const CHALLENGE_ROUTES_FILE: &str = "route_data.json";
pub const ACTUAL_FILE: &str = "actual_sequences.json";
pub const TRAVEL_TIMES_FILE: &str = "travel_times.json";
pub const QUALITY_FILE: &str = "quality.json";

/// Id given to the depot when `routes.json` does not name it.
pub const DEFAULT_DEPOT_ID: &str = "depot";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{file}: route {route_id}: {detail}")]
    Schema {
        file: &'static str,
        route_id: String,
        detail: String,
    },
    #[error(transparent)]
    Route(#[from] ModelError),
    #[error("route {route_id}: cannot impute a zone for stop {stop_id:?}, no delivery stop in the route has one")]
    NoZonedStop { route_id: String, stop_id: String },
}

impl IngestError {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub routes: BTreeMap<String, Route>,
    pub split: Split,
}

impl Dataset {
    pub fn new(routes: impl IntoIterator<Item = Route>, split: Split) -> Self {
        Self {
            routes: routes.into_iter().map(|r| (r.id().to_owned(), r)).collect(),
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn get(&self, route_id: &str) -> Option<&Route> {
        self.routes.get(route_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Route> {
        self.routes.values()
    }
}

/// A maximal run of consecutive stops sharing one zone id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneRun {
    pub zone_id: String,
    pub stop_count: usize,
    pub first_position: usize,
}

fn read_json(path: &Path, required: bool) -> Result<Option<Value>, IngestError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return if required {
                Err(IngestError::MissingFile(path.to_owned()))
            } else {
                Ok(None)
            };
        }
        Err(source) => {
            return Err(IngestError::Io {
                path: path.to_owned(),
                source,
            })
        }
    };
    serde_json::from_slice(&bytes)
        .map(Some)
        .map_err(|source| IngestError::Json {
            path: path.to_owned(),
            source,
        })
}

fn schema(file: &'static str, route_id: &str, detail: impl Into<String>) -> IngestError {
    IngestError::Schema {
        file,
        route_id: route_id.to_owned(),
        detail: detail.into(),
    }
}

fn as_object<'a>(v: &'a Value, file: &'static str, route_id: &str, what: &str) -> Result<&'a Map<String, Value>, IngestError> {
    v.as_object()
        .ok_or_else(|| schema(file, route_id, format!("{what} is not an object")))
}

fn number(v: &Value, file: &'static str, route_id: &str, what: &str) -> Result<f64, IngestError> {
    v.as_f64()
        .ok_or_else(|| schema(file, route_id, format!("{what} is not a number")))
}

fn parse_quality(s: &str) -> Option<Quality> {
    match s {
        "High" => Some(Quality::High),
        "Medium" => Some(Quality::Medium),
        "Low" => Some(Quality::Low),
        _ => None,
    }
}

fn parse_stops(route_id: &str, route: &Map<String, Value>) -> Result<Vec<Stop>, IngestError> {
    const F: &str = ROUTES_FILE;
    let stops = route
        .get("stops")
        .ok_or_else(|| schema(F, route_id, "missing \"stops\""))?;
    let stops = as_object(stops, F, route_id, "\"stops\"")?;
    let mut out = Vec::with_capacity(stops.len() + 1);
    for (id, s) in stops {
        let s = as_object(s, F, route_id, &format!("stop {id:?}"))?;
        let lat = number(s.get("lat").unwrap_or(&Value::Null), F, route_id, &format!("stop {id:?} lat"))?;
        let lng = number(s.get("lng").unwrap_or(&Value::Null), F, route_id, &format!("stop {id:?} lng"))?;
        let zone_id = match s.get("zone_id") {
            None | Some(Value::Null) => None,
            Some(Value::String(z)) if z.is_empty() => None,
            Some(Value::String(z)) => Some(z.clone()),
            Some(_) => return Err(schema(F, route_id, format!("stop {id:?} zone_id is not a string"))),
        };
        let kind = match s.get("type").and_then(Value::as_str) {
            Some("Station") => StopKind::Depot,
            _ => StopKind::Delivery,
        };
        out.push(Stop {
            id: id.clone(),
            lat,
            lng,
            zone_id: if kind == StopKind::Depot { None } else { zone_id },
            kind,
        });
    }
    if let Some(depot) = route.get("depot") {
        let depot = as_object(depot, F, route_id, "\"depot\"")?;
        let id = depot.get("id").and_then(Value::as_str).unwrap_or(DEFAULT_DEPOT_ID);
        let lat = number(depot.get("lat").unwrap_or(&Value::Null), F, route_id, "depot lat")?;
        let lng = number(depot.get("lng").unwrap_or(&Value::Null), F, route_id, "depot lng")?;
        if stops.contains_key(id) {
            return Err(schema(F, route_id, format!("depot id {id:?} collides with a stop id")));
        }
        out.push(Stop::depot(id, lat, lng));
    }
    Ok(out)
}

fn parse_actual(route_id: &str, v: &Value) -> Result<Vec<String>, IngestError> {
    const F: &str = ACTUAL_FILE;
    let mut obj = as_object(v, F, route_id, "actual sequence")?;
    if let Some(inner @ Value::Object(_)) = obj.get("actual") {
        obj = as_object(inner, F, route_id, "\"actual\"")?;
    }
    let mut positioned = Vec::with_capacity(obj.len());
    for (id, pos) in obj {
        let p = pos
            .as_u64()
            .ok_or_else(|| schema(F, route_id, format!("position of {id:?} is not a non-negative integer")))?;
        positioned.push((p, id.clone()));
    }
    positioned.sort();
    for (i, (p, id)) in positioned.iter().enumerate() {
        if *p != i as u64 {
            return Err(ModelError::NotAPermutation {
                route_id: route_id.to_owned(),
                detail: format!("stop {id:?} has position {p}, expected {i}"),
            }
            .into());
        }
    }
    Ok(positioned.into_iter().map(|(_, id)| id).collect())
}

fn parse_matrix(route_id: &str, v: &Value) -> Result<TravelTimeMatrix, IngestError> {
    const F: &str = TRAVEL_TIMES_FILE;
    let rows = as_object(v, F, route_id, "travel times")?;
    let mut ids: Vec<String> = rows.keys().cloned().collect();
    ids.sort();
    let n = ids.len();
    let mut t = Vec::with_capacity(n * n);
    for from in &ids {
        let row = as_object(&rows[from], F, route_id, &format!("row {from:?}"))?;
        if row.len() != n {
            return Err(ModelError::InvalidMatrix {
                route_id: route_id.to_owned(),
                detail: format!("row {from:?} has {} entries, expected {n}", row.len()),
            }
            .into());
        }
        for to in &ids {
            let v = row.get(to).ok_or_else(|| ModelError::InvalidMatrix {
                route_id: route_id.to_owned(),
                detail: format!("row {from:?} lacks column {to:?}"),
            })?;
            t.push(number(v, F, route_id, &format!("entry {from:?} -> {to:?}"))?);
        }
    }
    TravelTimeMatrix::new(ids, t).map_err(|detail| {
        ModelError::InvalidMatrix {
            route_id: route_id.to_owned(),
            detail,
        }
        .into()
    })
}

/// Loads and validates a dataset directory. Delivery stops without a zone id
/// are repaired with [`impute_zone`]. The split is `Train` when actual
/// sequences are present and `Eval` otherwise.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let dir = dir.as_ref();
    let routes = match read_json(&dir.join(CHALLENGE_ROUTES_FILE), false)? {
        Some(v) if !dir.join(ROUTES_FILE).exists() => v,
        _ => read_json(&dir.join(ROUTES_FILE), true)?.expect("required file"),
    };
    let actuals = read_json(&dir.join(ACTUAL_FILE), false)?;
    let travel = read_json(&dir.join(TRAVEL_TIMES_FILE), false)?;
    let quality = read_json(&dir.join(QUALITY_FILE), false)?;

    let routes = as_object(&routes, ROUTES_FILE, "-", "top level")?;
    let empty = Map::new();
    let actuals = match &actuals {
        Some(v) => as_object(v, ACTUAL_FILE, "-", "top level")?,
        None => &empty,
    };
    let travel = match &travel {
        Some(v) => as_object(v, TRAVEL_TIMES_FILE, "-", "top level")?,
        None => &empty,
    };
    let quality = match &quality {
        Some(v) => as_object(v, QUALITY_FILE, "-", "top level")?,
        None => &empty,
    };

    let mut out = BTreeMap::new();
    for (route_id, route) in routes {
        let route_obj = as_object(route, ROUTES_FILE, route_id, "route")?;
        let stops = parse_stops(route_id, route_obj)?;
        let actual = actuals.get(route_id).map(|v| parse_actual(route_id, v)).transpose()?;
        let matrix = travel.get(route_id).map(|v| parse_matrix(route_id, v)).transpose()?;
        let q = match quality.get(route_id).or_else(|| route_obj.get("route_score")) {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_str()
                    .and_then(parse_quality)
                    .ok_or_else(|| schema(QUALITY_FILE, route_id, format!("unknown quality {v}")))?,
            ),
        };
        let route = Route::new(route_id.clone(), stops, matrix, actual, q)?;
        let route = impute_missing_zones(route)?;
        out.insert(route_id.clone(), route);
    }
    let split = if actuals.is_empty() { Split::Eval } else { Split::Train };
    Ok(Dataset { routes: out, split })
}

/// Zone for a stop that lacks one: the zone of the nearest delivery stop that
/// has a zone id, ties broken by the lexicographically smaller stop id.
pub fn impute_zone(route: &Route, stop_id: &str) -> Result<String, IngestError> {
    route.stop(stop_id)?;
    let mut best: Option<(f64, &Stop)> = None;
    // deliveries() iterates in ascending id order, so strict `<` keeps the smaller id on ties
    for cand in route.deliveries() {
        if cand.id == stop_id || cand.zone_id.is_none() {
            continue;
        }
        let d = route.distance(stop_id, &cand.id)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, cand));
        }
    }
    best.and_then(|(_, s)| s.zone_id.clone())
        .ok_or_else(|| IngestError::NoZonedStop {
            route_id: route.id().to_owned(),
            stop_id: stop_id.to_owned(),
        })
}

fn impute_missing_zones(mut route: Route) -> Result<Route, IngestError> {
    let missing: Vec<String> = route
        .deliveries()
        .filter(|s| s.zone_id.is_none())
        .map(|s| s.id.clone())
        .collect();
    if missing.is_empty() {
        return Ok(route);
    }
    let assigned = missing
        .iter()
        .map(|id| impute_zone(&route, id).map(|z| (id.clone(), z)))
        .collect::<Result<Vec<_>, _>>()?;
    for (id, z) in assigned {
        log::debug!("route {}: imputed zone {z} for stop {id}", route.id());
        route.set_zone(&id, z);
    }
    route.check_zoned()?;
    Ok(route)
}

/// Maximal runs of equal zone id along `actual`, depot excluded.
pub fn zone_runs(route: &Route, actual: &StopSequence) -> Result<Vec<ZoneRun>, ModelError> {
    let mut runs: Vec<ZoneRun> = Vec::new();
    for id in actual.stops.iter() {
        let stop = route.stop(id)?;
        if stop.is_depot() {
            continue;
        }
        let zone = stop.zone_id.as_deref().ok_or_else(|| ModelError::MissingZone {
            route_id: route.id().to_owned(),
            stop_id: id.clone(),
        })?;
        match runs.last_mut() {
            Some(run) if run.zone_id == zone => run.stop_count += 1,
            _ => {
                let first_position = runs.len();
                runs.push(ZoneRun {
                    zone_id: zone.to_owned(),
                    stop_count: 1,
                    first_position,
                });
            }
        }
    }
    Ok(runs)
}

/// Collapses runs so that each zone keeps only its largest run (earliest on
/// ties), in the order of the kept runs.
pub fn collapse_to_zsgt(route_id: &str, runs: &[ZoneRun]) -> Result<ZoneSequence, ModelError> {
    let mut keep: HashMap<&str, usize> = HashMap::new();
    for (i, run) in runs.iter().enumerate() {
        match keep.get(run.zone_id.as_str()) {
            Some(&j) if runs[j].stop_count >= run.stop_count => {}
            _ => {
                keep.insert(&run.zone_id, i);
            }
        }
    }
    let mut kept: Vec<usize> = keep.into_values().collect();
    kept.sort_unstable();
    ZoneSequence::new(route_id, kept.into_iter().map(|i| runs[i].zone_id.clone()).collect())
}

/// The approximate ground-truth zone sequence of a route with an actual
/// sequence, or `None` when the route has no actual sequence.
pub fn route_zsgt(route: &Route) -> Result<Option<ZoneSequence>, ModelError> {
    let Some(actual) = route.actual() else {
        return Ok(None);
    };
    let runs = zone_runs(route, actual)?;
    collapse_to_zsgt(route.id(), &runs).map(Some)
}

/// Training corpus: the ZSgt of every route with an actual sequence.
/// Low-quality routes are skipped unless `include_low` is set.
pub fn training_corpus(dataset: &Dataset, include_low: bool) -> Result<Vec<ZoneSequence>, ModelError> {
    let mut corpus = Vec::new();
    for route in dataset.iter() {
        if !include_low && route.quality() == Some(Quality::Low) {
            continue;
        }
        if let Some(z) = route_zsgt(route)? {
            corpus.push(z);
        }
    }
    Ok(corpus)
}

fn write_json_atomic(path: &Path, value: &Value) -> Result<(), IngestError> {
    let io_err = |source: io::Error| IngestError::Io {
        path: path.to_owned(),
        source,
    };
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values always serialize");
    bytes.push(b'\n');
    crate::io::write_atomic(path, &bytes).map_err(io_err)
}

/// Writes a dataset in the directory layout read by [`load_dataset`]. Keys are
/// emitted in sorted order, so the output is byte-stable.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<(), IngestError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut routes = Map::new();
    let mut actuals = Map::new();
    let mut travel = Map::new();
    let mut quality = Map::new();
    for route in dataset.iter() {
        let depot = route.depot();
        let mut stops = Map::new();
        for s in route.deliveries() {
            stops.insert(s.id.clone(), json!({"lat": s.lat, "lng": s.lng, "zone_id": s.zone_id}));
        }
        routes.insert(
            route.id().to_owned(),
            json!({"depot": {"id": depot.id, "lat": depot.lat, "lng": depot.lng}, "stops": stops}),
        );
        if let Some(actual) = route.actual() {
            let positions: Map<String, Value> = actual
                .stops
                .iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), json!(i)))
                .collect();
            actuals.insert(route.id().to_owned(), Value::Object(positions));
        }
        if let Some(m) = route.travel_times() {
            let mut rows = Map::new();
            for (i, from) in m.ids().iter().enumerate() {
                let row: Map<String, Value> = m
                    .ids()
                    .iter()
                    .enumerate()
                    .map(|(j, to)| (to.clone(), json!(m.at(i, j))))
                    .collect();
                rows.insert(from.clone(), Value::Object(row));
            }
            travel.insert(route.id().to_owned(), Value::Object(rows));
        }
        if let Some(q) = route.quality() {
            quality.insert(route.id().to_owned(), json!(q));
        }
    }
    write_json_atomic(&dir.join(ROUTES_FILE), &Value::Object(routes))?;
    if !actuals.is_empty() {
        write_json_atomic(&dir.join(ACTUAL_FILE), &Value::Object(actuals))?;
    }
    if !travel.is_empty() {
        write_json_atomic(&dir.join(TRAVEL_TIMES_FILE), &Value::Object(travel))?;
    }
    if !quality.is_empty() {
        write_json_atomic(&dir.join(QUALITY_FILE), &Value::Object(quality))?;
    }
    Ok(())
}
