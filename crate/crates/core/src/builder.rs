//! Construction of the extended reference fingerprint map from raw,
//! kinematically collected records.
//!
//! The pipeline runs in three passes over the raw records:
//!
//! 1. a spatial median filter replaces each value by the median over the
//!    record's neighborhood (up to `m` nearest records within radius `r`),
//!    removing isolated outliers;
//! 2. Gaussian Nadaraya–Watson smoothing over the filtered records gives the
//!    expected value of every feature at any location;
//! 3. the residuals of the raw values against the smoothed map, collected over
//!    the same neighborhood, give a robust location-wise sigma through the
//!    scaled median absolute deviation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExtendedRfm, FeatureId, Fingerprint, Location, RawRfm, Rect, ReferencePoint, RfmEntry};

/// Spread estimator for the sigma layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadEstimator {
    /// `mad_scale * median(|residual|)`.
    Mad,
    /// Sample standard deviation of the residuals. Not robust; kept for comparison.
    PlainStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuilderConfig {
    /// Maximum neighborhood size.
    pub m: usize,
    /// Neighborhood radius (m).
    pub r: f64,
    pub ks_neighbors: usize,
    /// Gaussian kernel bandwidth (m).
    pub bandwidth: f64,
    pub mad_scale: f64,
    pub sigma_floor: f64,
    pub grid_resolution: f64,
    pub spread: SpreadEstimator,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        BuilderConfig {
            m: 20,
            r: 2.0,
            ks_neighbors: 20,
            bandwidth: 1.0,
            mad_scale: 1.4826,
            sigma_floor: 0.5,
            grid_resolution: 0.5,
            spread: SpreadEstimator::Mad,
        }
    }
}

impl BuilderConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.m >= 1
            && self.r > 0.0
            && self.r.is_finite()
            && self.ks_neighbors >= 1
            && self.bandwidth > 0.0
            && self.bandwidth.is_finite()
            && self.mad_scale > 0.0
            && self.sigma_floor > 0.0
            && self.grid_resolution > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid builder config {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeighborhoodMember<'a> {
    /// Position of the record in the raw map.
    pub index: usize,
    pub distance: f64,
    pub location: Location,
    pub fingerprint: &'a Fingerprint,
}

#[derive(Debug, Clone)]
pub struct Neighborhood<'a> {
    pub center: Location,
    /// Ascending distance, ties by record id.
    pub members: Vec<NeighborhoodMember<'a>>,
}

/// Up to `m` records nearest to `center` that lie within radius `r`.
pub fn neighborhood<'a>(raw: &'a RawRfm, center: &Location, cfg: &BuilderConfig) -> Result<Neighborhood<'a>> {
    let mut near = raw.index().within(center, cfg.r);
    if near.is_empty() {
        return Err(Error::EmptyNeighborhood {
            x: center.x,
            y: center.y,
            radius: cfg.r,
        });
    }
    // records are sorted by id, so index order is id order
    near.truncate(cfg.m);
    let members = near
        .into_iter()
        .map(|(index, distance)| NeighborhoodMember {
            index,
            distance,
            location: raw.locations()[index],
            fingerprint: &raw.records()[index],
        })
        .collect();
    Ok(Neighborhood {
        center: *center,
        members,
    })
}

/// Median with the even-length rule (mean of the two central values).
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Replaces every value by the median of the feature over the record's
/// neighborhood. A feature appears at a record iff some neighbor observed it.
pub fn spatial_median_filter(raw: &RawRfm, cfg: &BuilderConfig) -> Result<RawRfm> {
    cfg.validate()?;
    let features = raw
        .locations()
        .par_iter()
        .map(|loc| {
            let nb = neighborhood(raw, loc, cfg)?;
            let mut values: BTreeMap<&FeatureId, Vec<f64>> = BTreeMap::new();
            for m in &nb.members {
                for (a, v) in m.fingerprint.features() {
                    values.entry(a).or_default().push(*v);
                }
            }
            Ok(values
                .into_iter()
                .map(|(a, mut vs)| (a.clone(), median(&mut vs).expect("non-empty")))
                .collect::<BTreeMap<_, _>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(raw.with_features(features))
}

pub fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Gaussian Nadaraya–Watson estimate from `(distance, value)` samples.
///
/// Evaluated relative to the first sample so a constant field is reproduced
/// exactly.
pub fn nadaraya_watson(samples: impl IntoIterator<Item = (f64, f64)>, bandwidth: f64) -> f64 {
    let mut it = samples.into_iter();
    let Some((d0, v0)) = it.next() else {
        return f64::NAN;
    };
    let mut den = gaussian_kernel(d0 / bandwidth);
    let mut num = 0.0;
    for (d, v) in it {
        let k = gaussian_kernel(d / bandwidth);
        den += k;
        num += k * (v - v0);
    }
    v0 + num / den
}

/// Kernel-smoothed value of every feature at `loc`, using per feature only the
/// `ks_neighbors` nearest records carrying it within `3 * bandwidth`.
pub fn kernel_smooth(filtered: &RawRfm, loc: &Location, cfg: &BuilderConfig) -> Vec<(FeatureId, f64)> {
    let near = filtered.index().within(loc, 3.0 * cfg.bandwidth);
    let mut support: BTreeMap<&FeatureId, Vec<(f64, f64)>> = BTreeMap::new();
    for (idx, dist) in near {
        for (a, v) in filtered.records()[idx].features() {
            let s = support.entry(a).or_default();
            if s.len() < cfg.ks_neighbors {
                s.push((dist, *v));
            }
        }
    }
    support
        .into_iter()
        .map(|(a, s)| (a.clone(), nadaraya_watson(s, cfg.bandwidth)))
        .collect()
}

/// Sigma from one feature's residuals under `cfg.spread`, floored at
/// `sigma_floor`. Fewer than two residuals give the floor.
pub fn residual_sigma(residuals: &[f64], cfg: &BuilderConfig) -> f64 {
    if residuals.len() < 2 {
        return cfg.sigma_floor;
    }
    let s = match cfg.spread {
        SpreadEstimator::Mad => {
            let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
            cfg.mad_scale * median(&mut abs).expect("non-empty")
        }
        SpreadEstimator::PlainStd => {
            let n = residuals.len() as f64;
            let mean = residuals.iter().sum::<f64>() / n;
            (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    };
    s.max(cfg.sigma_floor)
}

/// Location-wise sigma per feature from the residuals of the raw values in the
/// neighborhood of `center` against the smoothed map at each record's location.
pub fn estimate_std<F>(raw: &RawRfm, smoothed_at: F, center: &Location, cfg: &BuilderConfig) -> Result<Vec<(FeatureId, f64)>>
where
    F: Fn(&Location) -> Vec<(FeatureId, f64)>,
{
    let nb = neighborhood(raw, center, cfg)?;
    let smoothed: Vec<BTreeMap<FeatureId, f64>> = nb
        .members
        .iter()
        .map(|m| smoothed_at(&m.location).into_iter().collect())
        .collect();
    Ok(sigma_from(&nb, |i, a| smoothed[i].get(a).copied(), cfg).into_iter().collect())
}

/// `smoothed(member_position, feature)` is the expected value at that member.
fn sigma_from(
    nb: &Neighborhood<'_>,
    smoothed: impl Fn(usize, &FeatureId) -> Option<f64>,
    cfg: &BuilderConfig,
) -> BTreeMap<FeatureId, f64> {
    let mut residuals: BTreeMap<&FeatureId, Vec<f64>> = BTreeMap::new();
    for (i, m) in nb.members.iter().enumerate() {
        for (a, v) in m.fingerprint.features() {
            let slot = residuals.entry(a).or_default();
            if let Some(s) = smoothed(i, a) {
                slot.push(v - s);
            }
        }
    }
    residuals
        .into_iter()
        .map(|(a, r)| (a.clone(), residual_sigma(&r, cfg)))
        .collect()
}

/// Builds the extended map. Reference points are the distinct raw record
/// locations (first record by id wins on exact duplicates).
pub fn build(raw: &RawRfm, cfg: &BuilderConfig) -> Result<ExtendedRfm> {
    cfg.validate()?;
    let filtered = spatial_median_filter(raw, cfg)?;
    let smoothed: Vec<BTreeMap<FeatureId, f64>> = filtered
        .locations()
        .par_iter()
        .map(|loc| kernel_smooth(&filtered, loc, cfg).into_iter().collect())
        .collect();

    let mut seen = std::collections::HashSet::new();
    let reps: Vec<usize> = (0..raw.len())
        .filter(|&i| seen.insert(raw.locations()[i].key()))
        .collect();

    let points = reps
        .par_iter()
        .map(|&i| {
            let loc = raw.locations()[i];
            let nb = neighborhood(raw, &loc, cfg)?;
            let sigmas = sigma_from(&nb, |j, a| smoothed[nb.members[j].index].get(a).copied(), cfg);
            let entries = filtered.records()[i]
                .features()
                .keys()
                .filter_map(|a| {
                    Some(RfmEntry {
                        feature: a.clone(),
                        value: *smoothed[i].get(a)?,
                        sigma: *sigmas.get(a)?,
                    })
                })
                .collect();
            Ok(ReferencePoint { location: loc, entries })
        })
        .collect::<Result<Vec<_>>>()?;
    ExtendedRfm::new(points, cfg.clone())
}

/// Raw value minus the map's continuous value at the record's location, for
/// every (record, feature) pair present in both.
pub fn residual_field(raw: &RawRfm, rfm: &ExtendedRfm) -> Vec<(Location, FeatureId, f64)> {
    raw.records()
        .par_iter()
        .zip(raw.locations().par_iter())
        .flat_map_iter(|(rec, loc)| {
            let q = rfm.query(loc);
            q.into_iter()
                .filter_map(|e| rec.get(&e.feature).map(|v| (*loc, e.feature, v - e.value)))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Continuous map sampled on a regular grid over `roi` at `grid_resolution`.
pub fn discretize(rfm: &ExtendedRfm, roi: &Rect) -> Vec<(Location, Vec<RfmEntry>)> {
    let step = rfm.config().grid_resolution;
    let nx = (roi.width() / step).floor() as usize + 1;
    let ny = (roi.height() / step).floor() as usize + 1;
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j)| {
            let l = Location::new(roi.min_x + i as f64 * step, roi.min_y + j as f64 * step);
            (l, rfm.query(&l))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(s: &str) -> FeatureId {
        FeatureId::new(s).unwrap()
    }

    fn rec(id: u64, x: f64, y: f64, feats: &[(&str, f64)]) -> Fingerprint {
        Fingerprint::new(id, Some(Location::new(x, y)), feats.iter().map(|(a, v)| (fid(a), *v))).unwrap()
    }

    fn raw(records: Vec<Fingerprint>) -> RawRfm {
        RawRfm::new(records, Rect::new(-10.0, -10.0, 50.0, 50.0).unwrap()).unwrap()
    }

    fn value_at(fp: &Fingerprint, a: &str) -> f64 {
        fp.get(&fid(a)).unwrap()
    }

    #[test]
    fn neighborhood_radius_and_capacity() {
        let r = raw(vec![
            rec(1, 0.5, 0.0, &[("a", -60.0)]),
            rec(2, 1.0, 0.0, &[("a", -60.0)]),
            rec(3, 3.0, 0.0, &[("a", -60.0)]),
        ]);
        let nb = neighborhood(&r, &Location::new(0.0, 0.0), &BuilderConfig::default()).unwrap();
        let ids: Vec<u64> = nb.members.iter().map(|m| m.fingerprint.id).collect();
        assert_eq!(ids, vec![1, 2]);

        let many = raw((0..30).map(|i| rec(i, 0.05 * i as f64, 0.0, &[("a", -60.0)])).collect());
        let nb = neighborhood(&many, &Location::new(0.0, 0.0), &BuilderConfig::default()).unwrap();
        assert_eq!(nb.members.len(), 20);
        assert!(nb.members.iter().all(|m| m.fingerprint.id < 20));
        assert!(nb.members.windows(2).all(|w| w[0].distance <= w[1].distance));

        let err = neighborhood(&r, &Location::new(20.0, 20.0), &BuilderConfig::default());
        assert!(matches!(err, Err(Error::EmptyNeighborhood { .. })));
    }

    #[test]
    fn neighborhood_tie_goes_to_lower_id() {
        let cfg = BuilderConfig {
            m: 2,
            ..Default::default()
        };
        // record 1 at the center fills one slot; 7 and 9 are equidistant
        for order in [[7, 9], [9, 7]] {
            let recs = vec![
                rec(1, 0.0, 0.0, &[("a", -60.0)]),
                rec(order[0], 1.0, 0.0, &[("a", -60.0)]),
                rec(order[1], -1.0, 0.0, &[("a", -60.0)]),
            ];
            let r = raw(recs);
            let nb = neighborhood(&r, &Location::new(0.0, 0.0), &cfg).unwrap();
            let ids: Vec<u64> = nb.members.iter().map(|m| m.fingerprint.id).collect();
            assert_eq!(ids, vec![1, 7]);
        }
    }

    #[test]
    fn median_rules() {
        assert_eq!(median(&mut [-60.0, -62.0, -100.0]), Some(-62.0));
        assert_eq!(median(&mut [-50.0, -60.0]), Some(-55.0));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn median_filter_examples() {
        let r = raw(vec![
            rec(1, 0.0, 0.0, &[("a", -60.0)]),
            rec(2, 0.5, 0.0, &[("a", -62.0), ("b", -80.0)]),
            rec(3, 1.0, 0.0, &[("a", -100.0)]),
            rec(4, 30.0, 30.0, &[("c", -71.0)]),
        ]);
        let f = spatial_median_filter(&r, &BuilderConfig::default()).unwrap();
        for i in 0..3 {
            assert_eq!(value_at(&f.records()[i], "a"), -62.0);
            // b appears wherever a neighbor carried it
            assert_eq!(value_at(&f.records()[i], "b"), -80.0);
        }
        assert_eq!(f.records()[3], r.records()[3]);

        let pair = raw(vec![rec(1, 0.0, 0.0, &[("a", -50.0)]), rec(2, 1.0, 0.0, &[("a", -60.0)])]);
        let f = spatial_median_filter(&pair, &BuilderConfig::default()).unwrap();
        assert_eq!(value_at(&f.records()[0], "a"), -55.0);
    }

    #[test]
    fn nadaraya_watson_by_hand() {
        let (w1, w2) = ((-0.5f64).exp(), (-2.0f64).exp());
        let expected = (w1 * -60.0 + w2 * -80.0) / (w1 + w2);
        let got = nadaraya_watson([(1.0, -60.0), (2.0, -80.0)], 1.0);
        assert!((got - expected).abs() < 1e-12);

        let r = raw(vec![rec(1, 1.0, 0.0, &[("a", -60.0)]), rec(2, 0.0, 2.0, &[("a", -80.0)])]);
        let s = kernel_smooth(&r, &Location::new(0.0, 0.0), &BuilderConfig::default());
        assert_eq!(s.len(), 1);
        assert!((s[0].1 - expected).abs() < 1e-12);
        // nothing within 3 h
        assert!(kernel_smooth(&r, &Location::new(20.0, 20.0), &BuilderConfig::default()).is_empty());
    }

    #[test]
    fn kernel_smooth_constant_field() {
        let r = raw((0..25).map(|i| rec(i, (i % 5) as f64 * 0.7, (i / 5) as f64 * 0.7, &[("a", -70.0)])).collect());
        for q in [Location::new(0.0, 0.0), Location::new(1.3, 2.2), Location::new(3.0, 0.4)] {
            let s = kernel_smooth(&r, &q, &BuilderConfig::default());
            assert_eq!(s, vec![(fid("a"), -70.0)]);
        }
    }

    #[test]
    fn residual_sigma_examples() {
        let cfg = BuilderConfig::default();
        assert!((residual_sigma(&[-2.0, -1.0, 0.0, 1.0, 97.0], &cfg) - 1.4826).abs() < 1e-12);
        assert!((residual_sigma(&[-3.0, 3.0], &cfg) - 4.4478).abs() < 1e-12);
        assert_eq!(residual_sigma(&[0.0, 0.0, 0.0], &cfg), 0.5);
        assert_eq!(residual_sigma(&[12.0], &cfg), 0.5);
        let plain = BuilderConfig {
            spread: SpreadEstimator::PlainStd,
            ..cfg
        };
        assert!((residual_sigma(&[-3.0, 3.0], &plain) - 18f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn estimate_std_uses_supplied_expectation() {
        let r = raw(vec![
            rec(1, 0.0, 0.0, &[("a", -62.0), ("b", -80.0)]),
            rec(2, 0.5, 0.0, &[("a", -58.0)]),
        ]);
        let flat = |_: &Location| vec![(fid("a"), -60.0), (fid("b"), -80.0)];
        let s = estimate_std(&r, flat, &Location::new(0.0, 0.0), &BuilderConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].0, fid("a"));
        assert!((s[0].1 - 2.0 * 1.4826).abs() < 1e-12);
        assert_eq!(s[1], (fid("b"), 0.5));
    }

    fn grid(n: usize, step: f64, value: impl Fn(u64, f64, f64) -> f64) -> Vec<Fingerprint> {
        (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64 * step, (i / n) as f64 * step);
                rec(i as u64, x, y, &[("a", value(i as u64, x, y))])
            })
            .collect()
    }

    #[test]
    fn build_constant_field() {
        let rfm = build(&raw(grid(8, 0.5, |_, _, _| -70.0)), &BuilderConfig::default()).unwrap();
        assert_eq!(rfm.len(), 64);
        for p in rfm.points() {
            assert_eq!(p.entries.len(), 1);
            assert_eq!(p.entries[0].value, -70.0);
            assert_eq!(p.entries[0].sigma, 0.5);
        }
    }

    #[test]
    fn build_suppresses_single_outlier() {
        // 21 records within 1 m of the center; the center one reads 30 dB high
        let mut recs = vec![rec(0, 0.0, 0.0, &[("a", -40.0)])];
        for i in 0..20u64 {
            let t = i as f64 * std::f64::consts::TAU / 20.0;
            let v = -70.0 + if i % 2 == 0 { 0.5 } else { -0.5 };
            recs.push(rec(i + 1, t.cos(), t.sin(), &[("a", v)]));
        }
        let rfm = build(&raw(recs), &BuilderConfig::default()).unwrap();
        let at = rfm.points().iter().find(|p| p.location == Location::new(0.0, 0.0)).unwrap();
        assert!((at.entries[0].value + 70.0).abs() <= 1.0, "{}", at.entries[0].value);
    }

    #[test]
    fn build_is_deterministic_and_dedups_locations() {
        let mut recs = grid(6, 0.4, |i, x, y| -60.0 - 3.0 * x + 2.0 * y + (i % 3) as f64);
        recs.push(rec(100, 0.0, 0.0, &[("a", -10.0)]));
        let r = raw(recs);
        let a = build(&r, &BuilderConfig::default()).unwrap();
        let b = build(&r, &BuilderConfig::default()).unwrap();
        assert_eq!(crate::io::rfm_to_json(&a), crate::io::rfm_to_json(&b));
        assert_eq!(a.len(), 36);
        assert!(a.points().iter().flat_map(|p| &p.entries).all(|e| e.sigma >= 0.5));
    }

    #[test]
    fn residual_field_subtracts_map_value() {
        let r = raw(vec![rec(1, 0.0, 0.0, &[("a", -60.0)])]);
        let rfm = ExtendedRfm::new(
            vec![ReferencePoint {
                location: Location::new(0.0, 0.0),
                entries: vec![RfmEntry {
                    feature: fid("a"),
                    value: -62.0,
                    sigma: 1.0,
                }],
            }],
            BuilderConfig::default(),
        )
        .unwrap();
        assert_eq!(residual_field(&r, &rfm), vec![(Location::new(0.0, 0.0), fid("a"), 2.0)]);

        let flat = raw(grid(5, 0.5, |_, _, _| -70.0));
        let built = build(&flat, &BuilderConfig::default()).unwrap();
        assert!(residual_field(&flat, &built).iter().all(|(_, _, d)| *d == 0.0));
    }

    #[test]
    fn discretize_covers_roi() {
        let rfm = build(&raw(grid(5, 0.5, |_, _, _| -70.0)), &BuilderConfig::default()).unwrap();
        let cells = discretize(&rfm, &Rect::new(0.0, 0.0, 2.0, 1.0).unwrap());
        assert_eq!(cells.len(), 5 * 3);
        assert!(cells.iter().all(|(_, e)| e.len() == 1 && e[0].value == -70.0));
    }
}
