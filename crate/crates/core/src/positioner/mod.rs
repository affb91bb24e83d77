//! Fingerprint positioning: plain and compound-dissimilarity kNN, and the
//! iterative variability-weighted search with its three termination states.
//!
//! The iterative search alternates between two steps. The sigma layer of the
//! map at the current assumed location gives per-feature softmax weights; the
//! weighted kNN with those weights gives the next assumed location. The search
//! stops when consecutive locations coincide (converging), when it revisits an
//! earlier location other than its predecessor (looping), or after
//! `max_iterations` updates (max).

pub mod mcd;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dissim::{mji, softmax_weights, weighted_cdm, WeightVector};
use crate::error::{Error, Result};
use crate::model::{
    attributes, ExtendedRfm, Fingerprint, InitMode, KnnAggregation, Location, PositionEstimate, PositioningConfig,
    TerminationFlag,
};

pub use mcd::{mcd_center, mcd_center_seeded};

/// Dissimilarity to every reference point, ascending, ties by reference index.
pub fn rank_references(
    obs: &Fingerprint,
    rfm: &ExtendedRfm,
    cfg: &PositioningConfig,
    wv: Option<&WeightVector>,
) -> Result<Vec<(usize, f64)>> {
    let uniform;
    let wv = match wv {
        Some(w) => w,
        None => {
            uniform = WeightVector::uniform();
            &uniform
        }
    };
    let mut ranked = rfm
        .points()
        .iter()
        .enumerate()
        .map(|(j, p)| weighted_cdm(obs, &p.entries, wv, cfg).map(|d| (j, d)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// kNN location: mean (or inverse-dissimilarity weighted mean) of the `k`
/// least dissimilar reference locations. Uniform weights when `wv` is `None`.
pub fn knn_locate(
    obs: &Fingerprint,
    rfm: &ExtendedRfm,
    cfg: &PositioningConfig,
    wv: Option<&WeightVector>,
) -> Result<Location> {
    if rfm.is_empty() {
        return Err(Error::EmptyRfm);
    }
    let ranked = rank_references(obs, rfm, cfg, wv)?;
    let best = &ranked[..cfg.k.min(ranked.len())];
    if best.len() == 1 {
        return Ok(rfm.locations()[best[0].0]);
    }
    let weights: Vec<f64> = match cfg.aggregation {
        KnnAggregation::Mean => vec![1.0; best.len()],
        KnnAggregation::InverseDissimilarity => {
            if best.iter().any(|(_, d)| *d == 0.0) {
                best.iter().map(|(_, d)| if *d == 0.0 { 1.0 } else { 0.0 }).collect()
            } else {
                best.iter().map(|(_, d)| 1.0 / d).collect()
            }
        }
    };
    let total: f64 = weights.iter().sum();
    let (mut x, mut y) = (0.0, 0.0);
    for ((j, _), w) in best.iter().zip(&weights) {
        let l = rfm.locations()[*j];
        x += w * l.x;
        y += w * l.y;
    }
    Ok(Location::new(x / total, y / total))
}

/// Per-query seed so that batch order never affects random initialization.
fn query_seed(seed: u64, id: u64) -> u64 {
    seed ^ id.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

pub fn initial_location(obs: &Fingerprint, rfm: &ExtendedRfm, cfg: &PositioningConfig) -> Result<Location> {
    if rfm.is_empty() {
        return Err(Error::EmptyRfm);
    }
    match cfg.init_mode {
        InitMode::Knn => knn_locate(obs, rfm, cfg, None),
        InitMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(query_seed(seed, obs.id));
            Ok(rfm.locations()[rng.gen_range(0..rfm.len())])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Continue,
    Converging,
    /// The last location matched the path entry at `matched`.
    Looping { matched: usize },
    Max,
}

/// Termination state of a path that starts with the initial location.
///
/// Converging is tested first: the last step is shorter than `d_min`. Looping
/// compares the last location with every earlier entry except its immediate
/// predecessor. Max fires once `max_iterations` updates have been made.
pub fn detect_termination(path: &[Location], cfg: &PositioningConfig) -> Termination {
    let n = path.len();
    if n < 2 {
        return Termination::Continue;
    }
    let last = path[n - 1];
    if last.distance(&path[n - 2]) < cfg.d_min {
        return Termination::Converging;
    }
    let nearest_earlier = path[..n - 2]
        .iter()
        .enumerate()
        .map(|(m, l)| (m, last.distance(l)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if let Some((matched, d)) = nearest_earlier {
        if d < cfg.d_min {
            return Termination::Looping { matched };
        }
    }
    if n > cfg.max_iterations {
        return Termination::Max;
    }
    Termination::Continue
}

/// Largest pairwise distance.
pub fn diameter(points: &[Location]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.distance(b));
        }
    }
    best
}

/// Final estimate for a terminated search.
///
/// A loop is summarized by its MCD center when it has at least
/// `loop_min_points` points spanning at most `loop_max_diameter`; otherwise it
/// is resolved like the max state, which picks the searched location whose
/// expected fingerprint shares the most measurable features with the
/// observation (highest MJI, earliest on ties).
pub fn resolve_state(
    state: Termination,
    path: Vec<Location>,
    obs: &Fingerprint,
    rfm: &ExtendedRfm,
    cfg: &PositioningConfig,
) -> PositionEstimate {
    let iterations = path.len().saturating_sub(1);
    let last = *path.last().expect("path starts with the initial location");
    let loop_points = match state {
        Termination::Looping { matched } => Some(path[matched + 1..].to_vec()),
        _ => None,
    };
    match state {
        Termination::Continue | Termination::Converging => PositionEstimate {
            location: last,
            tf: TerminationFlag::Converging,
            iterations,
            path,
            loop_points,
        },
        Termination::Looping { .. } => {
            let pts = loop_points.as_deref().unwrap_or_default();
            if pts.len() >= cfg.loop_min_points && diameter(pts) <= cfg.loop_max_diameter {
                if let Ok(center) = mcd_center(pts, None) {
                    return PositionEstimate {
                        location: center,
                        tf: TerminationFlag::Looping,
                        iterations,
                        path,
                        loop_points,
                    };
                }
            }
            max_state(path, loop_points, obs, rfm)
        }
        Termination::Max => max_state(path, loop_points, obs, rfm),
    }
}

fn max_state(
    path: Vec<Location>,
    loop_points: Option<Vec<Location>>,
    obs: &Fingerprint,
    rfm: &ExtendedRfm,
) -> PositionEstimate {
    let obs_attrs = attributes(obs);
    let mut best: Option<(f64, Location)> = None;
    for l in &path {
        let ref_attrs = rfm.query(l).into_iter().map(|e| e.feature).collect();
        let Ok(s) = mji(&obs_attrs, &ref_attrs) else {
            break;
        };
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, *l));
        }
    }
    let location = best.map_or(*path.last().expect("non-empty path"), |(_, l)| l);
    PositionEstimate {
        location,
        tf: TerminationFlag::Max,
        iterations: path.len() - 1,
        path,
        loop_points,
    }
}

/// Iterative variability-weighted positioning.
pub fn iterate_locate(obs: &Fingerprint, rfm: &ExtendedRfm, cfg: &PositioningConfig) -> Result<PositionEstimate> {
    cfg.validate()?;
    let mut path = vec![initial_location(obs, rfm, cfg)?];
    loop {
        let assumed = *path.last().expect("non-empty path");
        let wv = softmax_weights(&rfm.query(&assumed), cfg.beta, cfg.weight_form);
        path.push(knn_locate(obs, rfm, cfg, Some(&wv))?);
        let state = detect_termination(&path, cfg);
        if state != Termination::Continue {
            return Ok(resolve_state(state, path, obs, rfm, cfg));
        }
    }
}
