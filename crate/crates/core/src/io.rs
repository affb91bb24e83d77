//! On-disk formats.
//!
//! * fingerprints: JSON lines `{"id": int, "x": float|null, "y": float|null, "features": {"<id>": float}}`
//! * extended map: one JSON document `{"config": {..}, "points": [{"x", "y", "entries": [{"id", "v", "sigma"}]}]}`
//! * estimates: JSON lines `{"id", "x", "y", "tf", "iterations", "path": [[x, y]], "loop_points": [[x, y]]|null}`
//! * configs: plain-text `key = value` lines, `#` starts a comment

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::builder::{BuilderConfig, SpreadEstimator};
use crate::error::{Error, Result};
use crate::model::{
    ExtendedRfm, FeatureId, Fingerprint, InitMode, KnnAggregation, Location, PositionEstimate, PositioningConfig,
    ReferencePoint, RfmEntry, TerminationFlag, WeightForm,
};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn data_err(path: &Path, line: usize, msg: impl ToString) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingerprintRecord {
    id: u64,
    x: Option<f64>,
    y: Option<f64>,
    features: BTreeMap<String, f64>,
}

pub fn fingerprint_to_line(fp: &Fingerprint) -> String {
    let rec = FingerprintRecord {
        id: fp.id,
        x: fp.location.map(|l| l.x),
        y: fp.location.map(|l| l.y),
        features: fp.features().iter().map(|(a, v)| (a.to_string(), *v)).collect(),
    };
    serde_json::to_string(&rec).expect("serializable record")
}

pub fn fingerprint_from_line(line: &str) -> std::result::Result<Fingerprint, String> {
    let rec: FingerprintRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let location = match (rec.x, rec.y) {
        (Some(x), Some(y)) => Some(Location::new(x, y)),
        (None, None) => None,
        _ => return Err("x and y must both be set or both be null".into()),
    };
    let features = rec
        .features
        .into_iter()
        .map(|(a, v)| FeatureId::new(a).map(|a| (a, v)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Fingerprint::new(rec.id, location, features).map_err(|e| e.to_string())
}

pub fn fingerprints_to_jsonl(fps: &[Fingerprint]) -> String {
    let mut s = String::new();
    for fp in fps {
        s.push_str(&fingerprint_to_line(fp));
        s.push('\n');
    }
    s
}

/// Parses JSON lines; blank lines are skipped, errors cite `path:line`.
pub fn parse_fingerprints(text: &str, path: &Path) -> Result<Vec<Fingerprint>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| fingerprint_from_line(l).map_err(|m| data_err(path, i + 1, m)))
        .collect()
}

pub fn read_fingerprints(path: &Path) -> Result<Vec<Fingerprint>> {
    parse_fingerprints(&read_text(path)?, path)
}

pub fn write_fingerprints(path: &Path, fps: &[Fingerprint]) -> Result<()> {
    write_text(path, &fingerprints_to_jsonl(fps))
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryDoc {
    id: FeatureId,
    v: f64,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointDoc {
    x: f64,
    y: f64,
    entries: Vec<EntryDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RfmDoc {
    config: BuilderConfig,
    points: Vec<PointDoc>,
}

pub fn rfm_to_json(rfm: &ExtendedRfm) -> String {
    let doc = RfmDoc {
        config: rfm.config().clone(),
        points: rfm
            .points()
            .iter()
            .map(|p| PointDoc {
                x: p.location.x,
                y: p.location.y,
                entries: p
                    .entries
                    .iter()
                    .map(|e| EntryDoc {
                        id: e.feature.clone(),
                        v: e.value,
                        sigma: e.sigma,
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&doc).expect("serializable map");
    s.push('\n');
    s
}

pub fn rfm_from_json(text: &str) -> Result<ExtendedRfm> {
    let doc: RfmDoc = serde_json::from_str(text)?;
    let points = doc
        .points
        .into_iter()
        .map(|p| ReferencePoint {
            location: Location::new(p.x, p.y),
            entries: p
                .entries
                .into_iter()
                .map(|e| RfmEntry {
                    feature: e.id,
                    value: e.v,
                    sigma: e.sigma,
                })
                .collect(),
        })
        .collect();
    ExtendedRfm::new(points, doc.config)
}

pub fn read_rfm(path: &Path) -> Result<ExtendedRfm> {
    rfm_from_json(&read_text(path)?).map_err(|e| match e {
        Error::Json(j) => data_err(path, j.line(), j),
        other => data_err(path, 0, other),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateRecord {
    id: u64,
    x: f64,
    y: f64,
    tf: TerminationFlag,
    iterations: usize,
    path: Vec<[f64; 2]>,
    loop_points: Option<Vec<[f64; 2]>>,
}

fn pair(l: &Location) -> [f64; 2] {
    [l.x, l.y]
}

pub fn estimate_to_line(id: u64, e: &PositionEstimate) -> String {
    let rec = EstimateRecord {
        id,
        x: e.location.x,
        y: e.location.y,
        tf: e.tf,
        iterations: e.iterations,
        path: e.path.iter().map(pair).collect(),
        loop_points: e.loop_points.as_ref().map(|v| v.iter().map(pair).collect()),
    };
    serde_json::to_string(&rec).expect("serializable estimate")
}

pub fn estimates_to_jsonl(items: &[(u64, PositionEstimate)]) -> String {
    let mut s = String::new();
    for (id, e) in items {
        s.push_str(&estimate_to_line(*id, e));
        s.push('\n');
    }
    s
}

pub fn parse_estimates(text: &str, path: &Path) -> Result<Vec<(u64, PositionEstimate)>> {
    let loc = |p: [f64; 2]| Location::new(p[0], p[1]);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: EstimateRecord = serde_json::from_str(l).map_err(|e| data_err(path, i + 1, e))?;
            Ok((
                r.id,
                PositionEstimate {
                    location: Location::new(r.x, r.y),
                    tf: r.tf,
                    iterations: r.iterations,
                    path: r.path.into_iter().map(loc).collect(),
                    loop_points: r.loop_points.map(|v| v.into_iter().map(loc).collect()),
                },
            ))
        })
        .collect()
}

pub fn read_estimates(path: &Path) -> Result<Vec<(u64, PositionEstimate)>> {
    parse_estimates(&read_text(path)?, path)
}

/// `key = value` pairs with their 1-based line numbers.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| data_err(path, i + 1, format!("expected `key = value`, got `{line}`")))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

/// Sets one builder field by name.
pub fn set_builder_key(cfg: &mut BuilderConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "m" => cfg.m = num(value)?,
        "r" => cfg.r = num(value)?,
        "ks_neighbors" => cfg.ks_neighbors = num(value)?,
        "bandwidth" => cfg.bandwidth = num(value)?,
        "mad_scale" => cfg.mad_scale = num(value)?,
        "sigma_floor" => cfg.sigma_floor = num(value)?,
        "grid_resolution" => cfg.grid_resolution = num(value)?,
        "spread" => {
            cfg.spread = match value {
                "mad" => SpreadEstimator::Mad,
                "plain_std" | "std" => SpreadEstimator::PlainStd,
                _ => return Err(format!("unknown spread estimator `{value}`")),
            }
        }
        _ => return Err(format!("unknown builder key `{key}`")),
    }
    Ok(())
}

pub fn parse_weight_form(value: &str) -> std::result::Result<WeightForm, String> {
    match value {
        "paper" | "paper_verbatim" => Ok(WeightForm::PaperVerbatim),
        "precision" | "precision_softmax" => Ok(WeightForm::PrecisionSoftmax),
        _ => Err(format!("unknown weight form `{value}`")),
    }
}

/// Sets one positioning field by name.
pub fn set_positioning_key(cfg: &mut PositioningConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "alpha1" => cfg.alpha1 = num(value)?,
        "alpha2" => cfg.alpha2 = num(value)?,
        "gamma" => cfg.gamma = num(value)?,
        "beta" => cfg.beta = num(value)?,
        "k" => cfg.k = num(value)?,
        "d_min" => cfg.d_min = num(value)?,
        "T" | "max_iterations" => cfg.max_iterations = num(value)?,
        "loop_min_points" => cfg.loop_min_points = num(value)?,
        "loop_max_diameter" => cfg.loop_max_diameter = num(value)?,
        "minkowski_p" => cfg.minkowski_p = num(value)?,
        "weight_form" => cfg.weight_form = parse_weight_form(value)?,
        "init_mode" => {
            cfg.init_mode = match value.split_once(':') {
                None if value == "knn" => InitMode::Knn,
                None if value == "random" => InitMode::Random(0),
                Some(("random", seed)) => InitMode::Random(num(seed.trim())?),
                _ => return Err(format!("unknown init mode `{value}`")),
            }
        }
        "aggregation" => {
            cfg.aggregation = match value {
                "mean" => KnnAggregation::Mean,
                "inverse_dissimilarity" => KnnAggregation::InverseDissimilarity,
                _ => return Err(format!("unknown aggregation `{value}`")),
            }
        }
        _ => return Err(format!("unknown positioning key `{key}`")),
    }
    Ok(())
}

fn load_config<C>(path: &Path, mut cfg: C, set: fn(&mut C, &str, &str) -> std::result::Result<(), String>) -> Result<C> {
    for (line, k, v) in parse_key_values(&read_text(path)?, path)? {
        set(&mut cfg, &k, &v).map_err(|m| data_err(path, line, m))?;
    }
    Ok(cfg)
}

pub fn read_builder_config(path: &Path) -> Result<BuilderConfig> {
    let cfg = load_config(path, BuilderConfig::default(), set_builder_key)?;
    cfg.validate().map_err(|e| data_err(path, 0, e))?;
    Ok(cfg)
}

/// Positioning config from a file; fields not set keep their defaults.
pub fn read_positioning_config(path: &Path) -> Result<PositioningConfig> {
    load_config(path, PositioningConfig::default(), set_positioning_key)
}
