//! Domain types shared across the crate: fingerprints, reference fingerprint
//! maps (raw and extended), positioning configuration and estimates.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::builder::{nadaraya_watson, BuilderConfig};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;

/// Identifier of a signal source, e.g. an access point MAC address.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(String);

impl FeatureId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("feature id must be non-empty"));
        }
        Ok(FeatureId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FeatureId {
    /// Panics on an empty string; use [`FeatureId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        FeatureId::new(s).expect("empty feature id")
    }
}

/// Planar location in a local metric frame (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn key(&self) -> (u64, u64) {
        (self.x.to_bits(), self.y.to_bits())
    }
}

/// Axis-aligned region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let r = Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        if ![min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite()) || min_x > max_x || min_y > max_y {
            return Err(Error::invalid(format!("degenerate rectangle {r:?}")));
        }
        Ok(r)
    }

    /// Smallest rectangle containing every location; `None` for an empty iterator.
    pub fn bounding<'a>(locs: impl IntoIterator<Item = &'a Location>) -> Option<Rect> {
        let mut it = locs.into_iter();
        let first = it.next()?;
        let mut r = Rect {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for l in it {
            r.min_x = r.min_x.min(l.x);
            r.min_y = r.min_y.min(l.y);
            r.max_x = r.max_x.max(l.x);
            r.max_y = r.max_y.max(l.y);
        }
        Some(r)
    }

    pub fn contains(&self, l: &Location) -> bool {
        l.x >= self.min_x && l.x <= self.max_x && l.y >= self.min_y && l.y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn expand(&self, margin: f64) -> Rect {
        Rect {
            min_x: self.min_x - margin,
            min_y: self.min_y - margin,
            max_x: self.max_x + margin,
            max_y: self.max_y + margin,
        }
    }
}

/// One observation: measured feature values with an optional ground-truth location.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub id: u64,
    pub location: Option<Location>,
    features: BTreeMap<FeatureId, f64>,
}

impl Fingerprint {
    pub fn new(
        id: u64,
        location: Option<Location>,
        features: impl IntoIterator<Item = (FeatureId, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (a, v) in features {
            if !v.is_finite() {
                return Err(Error::invalid(format!("fingerprint {id}: non-finite value for {a}")));
            }
            if map.insert(a.clone(), v).is_some() {
                return Err(Error::invalid(format!("fingerprint {id}: duplicate feature {a}")));
            }
        }
        if let Some(l) = location {
            if !l.is_finite() {
                return Err(Error::invalid(format!("fingerprint {id}: non-finite location")));
            }
        }
        Ok(Fingerprint {
            id,
            location,
            features: map,
        })
    }

    pub fn features(&self) -> &BTreeMap<FeatureId, f64> {
        &self.features
    }

    pub fn get(&self, a: &FeatureId) -> Option<f64> {
        self.features.get(a).copied()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Rejects values below the missing-value indicator.
    pub fn check_gamma(&self, gamma: f64) -> Result<()> {
        match self.features.iter().find(|(_, v)| **v < gamma) {
            Some((a, v)) => Err(Error::invalid(format!(
                "fingerprint {}: value {v} for {a} is below the missing-value indicator {gamma}",
                self.id
            ))),
            None => Ok(()),
        }
    }
}

/// Set of feature ids observed in a fingerprint.
pub fn attributes(fp: &Fingerprint) -> BTreeSet<FeatureId> {
    fp.features.keys().cloned().collect()
}

/// Raw reference data: located fingerprints inside a region of interest.
///
/// Records are kept sorted by ascending id, so positional order doubles as the
/// id tie-break wherever one is needed.
#[derive(Debug, Clone)]
pub struct RawRfm {
    records: Vec<Fingerprint>,
    locations: Vec<Location>,
    roi: Rect,
    index: SpatialIndex,
}

impl RawRfm {
    pub fn new(mut records: Vec<Fingerprint>, roi: Rect) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        records.sort_by_key(|r| r.id);
        let mut locations = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if i > 0 && records[i - 1].id == r.id {
                return Err(Error::invalid(format!("duplicate record id {}", r.id)));
            }
            let l = r
                .location
                .ok_or_else(|| Error::invalid(format!("record {} has no location", r.id)))?;
            if !roi.contains(&l) {
                return Err(Error::invalid(format!("record {} lies outside the ROI", r.id)));
            }
            locations.push(l);
        }
        let index = SpatialIndex::new(&locations);
        Ok(RawRfm {
            records,
            locations,
            roi,
            index,
        })
    }

    /// Uses the bounding rectangle of the records as the ROI.
    pub fn from_records(records: Vec<Fingerprint>) -> Result<Self> {
        let locs: Vec<Location> = records.iter().filter_map(|r| r.location).collect();
        let roi = Rect::bounding(&locs).ok_or(Error::EmptyInput)?;
        Self::new(records, roi)
    }

    pub fn records(&self) -> &[Fingerprint] {
        &self.records
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn roi(&self) -> Rect {
        self.roi
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn index(&self) -> &SpatialIndex {
        &self.index
    }

    /// Same locations and ids, replaced feature maps.
    pub(crate) fn with_features(&self, features: Vec<BTreeMap<FeatureId, f64>>) -> RawRfm {
        debug_assert_eq!(features.len(), self.records.len());
        let records = self
            .records
            .iter()
            .zip(features)
            .map(|(r, f)| Fingerprint {
                id: r.id,
                location: r.location,
                features: f,
            })
            .collect();
        RawRfm {
            records,
            locations: self.locations.clone(),
            roi: self.roi,
            index: self.index.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfmEntry {
    pub feature: FeatureId,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub location: Location,
    /// Sorted by feature id.
    pub entries: Vec<RfmEntry>,
}

impl ReferencePoint {
    pub fn attributes(&self) -> BTreeSet<FeatureId> {
        self.entries.iter().map(|e| e.feature.clone()).collect()
    }
}

/// Reference fingerprint map extended with a location-wise standard deviation
/// per feature. Immutable after construction.
///
/// Besides the discrete reference points it answers continuous queries at any
/// location by kernel smoothing both the value and the sigma layer over the
/// nearby reference points.
#[derive(Debug, Clone)]
pub struct ExtendedRfm {
    points: Vec<ReferencePoint>,
    config: BuilderConfig,
    locations: Vec<Location>,
    index: SpatialIndex,
}

impl PartialEq for ExtendedRfm {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.config == other.config
    }
}

impl ExtendedRfm {
    pub fn new(mut points: Vec<ReferencePoint>, config: BuilderConfig) -> Result<Self> {
        config.validate()?;
        let mut seen = HashSet::with_capacity(points.len());
        for p in &mut points {
            if !p.location.is_finite() {
                return Err(Error::invalid("non-finite reference location"));
            }
            if !seen.insert(p.location.key()) {
                return Err(Error::invalid(format!(
                    "duplicate reference location ({}, {})",
                    p.location.x, p.location.y
                )));
            }
            p.entries.sort_by(|a, b| a.feature.cmp(&b.feature));
            for w in p.entries.windows(2) {
                if w[0].feature == w[1].feature {
                    return Err(Error::invalid(format!("duplicate entry {} at a reference point", w[0].feature)));
                }
            }
            for e in &p.entries {
                if !e.value.is_finite() || !e.sigma.is_finite() || e.sigma <= 0.0 {
                    return Err(Error::invalid(format!("invalid entry for {}", e.feature)));
                }
            }
        }
        let locations: Vec<Location> = points.iter().map(|p| p.location).collect();
        let index = SpatialIndex::new(&locations);
        Ok(ExtendedRfm {
            points,
            config,
            locations,
            index,
        })
    }

    pub fn points(&self) -> &[ReferencePoint] {
        &self.points
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn config(&self) -> &BuilderConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounding_box(&self) -> Option<Rect> {
        Rect::bounding(&self.locations)
    }

    /// Copy of this map with every sigma replaced by `sigma`.
    pub fn with_uniform_sigma(&self, sigma: f64) -> Result<ExtendedRfm> {
        let points = self
            .points
            .iter()
            .map(|p| ReferencePoint {
                location: p.location,
                entries: p
                    .entries
                    .iter()
                    .map(|e| RfmEntry {
                        sigma,
                        ..e.clone()
                    })
                    .collect(),
            })
            .collect();
        ExtendedRfm::new(points, self.config.clone())
    }

    /// Kernel-smoothed (value, sigma) entries at an arbitrary location.
    ///
    /// Per feature, the `ks_neighbors` nearest reference points carrying it
    /// within `3 * bandwidth` contribute. When no reference point is that
    /// close, the entries of the nearest reference point are returned so the
    /// result is non-empty whenever the map is.
    pub fn query(&self, loc: &Location) -> Vec<RfmEntry> {
        if self.points.is_empty() {
            return Vec::new();
        }
        let cutoff = 3.0 * self.config.bandwidth;
        let near = self.index.within(loc, cutoff);
        if near.is_empty() {
            let nearest = self.index.nearest(loc).expect("non-empty index");
            return self.points[nearest].entries.clone();
        }
        let mut support: BTreeMap<&FeatureId, Vec<(f64, &RfmEntry)>> = BTreeMap::new();
        for &(idx, dist) in &near {
            for e in &self.points[idx].entries {
                let s = support.entry(&e.feature).or_default();
                if s.len() < self.config.ks_neighbors {
                    s.push((dist, e));
                }
            }
        }
        let h = self.config.bandwidth;
        support
            .into_iter()
            .map(|(a, s)| RfmEntry {
                feature: a.clone(),
                value: nadaraya_watson(s.iter().map(|(d, e)| (*d, e.value)), h),
                sigma: nadaraya_watson(s.iter().map(|(d, e)| (*d, e.sigma)), h),
            })
            .collect()
    }

    /// Continuous query restricted to one feature; agrees with [`Self::query`].
    pub fn query_feature(&self, loc: &Location, feature: &FeatureId) -> Option<RfmEntry> {
        self.query(loc).into_iter().find(|e| &e.feature == feature)
    }
}

/// How raw exponents are turned into per-feature weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    /// `w ∝ exp(-β σ⁻²)`, larger sigma gets a larger weight.
    PaperVerbatim,
    /// `w ∝ exp(+β σ⁻²)`, low-variability features dominate.
    PrecisionSoftmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Knn,
    Random(u64),
}

/// Location aggregation over the k selected candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnAggregation {
    Mean,
    /// Weighted mean with weights inversely proportional to the dissimilarity.
    InverseDissimilarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningConfig {
    /// Penalty on features only present in the observation.
    pub alpha1: f64,
    /// Penalty on features only present in the reference.
    pub alpha2: f64,
    /// Missing-value indicator (dBm).
    pub gamma: f64,
    /// Softmax concentration.
    pub beta: f64,
    pub k: usize,
    pub d_min: f64,
    pub max_iterations: usize,
    pub loop_min_points: usize,
    pub loop_max_diameter: f64,
    pub minkowski_p: f64,
    pub weight_form: WeightForm,
    pub init_mode: InitMode,
    pub aggregation: KnnAggregation,
}

impl Default for PositioningConfig {
    fn default() -> Self {
        PositioningConfig {
            alpha1: 3.0,
            alpha2: 3.0,
            gamma: -110.0,
            beta: 2.0,
            k: 1,
            d_min: 1e-3,
            max_iterations: 100,
            loop_min_points: 4,
            loop_max_diameter: 0.01,
            minkowski_p: 2.0,
            weight_form: WeightForm::PrecisionSoftmax,
            init_mode: InitMode::Knn,
            aggregation: KnnAggregation::Mean,
        }
    }
}

impl PositioningConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha1 >= 0.0
            && self.alpha2 >= 0.0
            && self.gamma.is_finite()
            && self.beta > 0.0
            && self.beta.is_finite()
            && self.k >= 1
            && self.d_min > 0.0
            && self.max_iterations >= 1
            && self.loop_max_diameter >= 0.0
            && self.minkowski_p >= 1.0
            && self.minkowski_p.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid positioning config {self:?}")))
        }
    }
}

/// Termination flag of the iterative search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TerminationFlag {
    Converging = 0,
    Looping = 1,
    Max = 2,
}

impl From<TerminationFlag> for u8 {
    fn from(tf: TerminationFlag) -> u8 {
        tf as u8
    }
}

impl TryFrom<u8> for TerminationFlag {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(TerminationFlag::Converging),
            1 => Ok(TerminationFlag::Looping),
            2 => Ok(TerminationFlag::Max),
            _ => Err(format!("invalid termination flag {v}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub location: Location,
    pub tf: TerminationFlag,
    pub iterations: usize,
    /// Every searched location in order, starting with the initial one.
    pub path: Vec<Location>,
    /// Locations of a detected loop, kept even when resolution fell back to
    /// the max-state rule.
    pub loop_points: Option<Vec<Location>>,
}

impl PositionEstimate {
    /// Estimate of a single-shot (non-iterative) method.
    pub fn single(location: Location) -> Self {
        PositionEstimate {
            location,
            tf: TerminationFlag::Converging,
            iterations: 0,
            path: vec![location],
            loop_points: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(id: u64, feats: &[(&str, f64)]) -> Fingerprint {
        Fingerprint::new(id, None, feats.iter().map(|(a, v)| (FeatureId::from(*a), *v))).unwrap()
    }

    #[test]
    fn attributes_projects_keys() {
        let f = fp(0, &[("a", -60.0), ("b", -75.0)]);
        let a = attributes(&f);
        assert_eq!(a, ["a", "b"].iter().map(|s| FeatureId::from(*s)).collect());
    }

    #[test]
    fn attributes_of_empty_fingerprint() {
        assert!(attributes(&fp(0, &[])).is_empty());
    }

    #[test]
    fn attributes_count_matches_construction() {
        let names: Vec<String> = (0..7).map(|i| format!("f{i}")).collect();
        let f = Fingerprint::new(1, None, names.iter().map(|n| (FeatureId::new(n.as_str()).unwrap(), -50.0))).unwrap();
        assert_eq!(attributes(&f).len(), 7);
    }

    #[test]
    fn fingerprint_rejects_duplicates_and_nan() {
        let a = FeatureId::from("a");
        assert!(Fingerprint::new(0, None, vec![(a.clone(), -1.0), (a.clone(), -2.0)]).is_err());
        assert!(Fingerprint::new(0, None, vec![(a, f64::NAN)]).is_err());
        assert!(FeatureId::new("").is_err());
    }

    #[test]
    fn gamma_check() {
        let f = fp(3, &[("a", -120.0)]);
        assert!(f.check_gamma(-110.0).is_err());
        assert!(f.check_gamma(-130.0).is_ok());
    }

    #[test]
    fn raw_rfm_requires_locations_inside_roi() {
        let roi = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let inside = Fingerprint::new(0, Some(Location::new(1.0, 1.0)), vec![]).unwrap();
        let outside = Fingerprint::new(1, Some(Location::new(11.0, 1.0)), vec![]).unwrap();
        let unlocated = Fingerprint::new(2, None, vec![]).unwrap();
        assert!(RawRfm::new(vec![inside.clone()], roi).is_ok());
        assert!(RawRfm::new(vec![inside.clone(), outside], roi).is_err());
        assert!(RawRfm::new(vec![inside, unlocated], roi).is_err());
        assert!(RawRfm::new(vec![], roi).is_err());
    }

    #[test]
    fn extended_rfm_rejects_duplicate_locations() {
        let p = ReferencePoint {
            location: Location::new(1.0, 2.0),
            entries: vec![],
        };
        assert!(ExtendedRfm::new(vec![p.clone(), p], BuilderConfig::default()).is_err());
    }

    #[test]
    fn far_query_falls_back_to_nearest_point() {
        let e = |v| RfmEntry {
            feature: "a".into(),
            value: v,
            sigma: 1.0,
        };
        let rfm = ExtendedRfm::new(
            vec![
                ReferencePoint {
                    location: Location::new(0.0, 0.0),
                    entries: vec![e(-50.0)],
                },
                ReferencePoint {
                    location: Location::new(10.0, 0.0),
                    entries: vec![e(-70.0)],
                },
            ],
            BuilderConfig::default(),
        )
        .unwrap();
        let q = rfm.query(&Location::new(100.0, 0.0));
        assert_eq!(q, vec![e(-70.0)]);
    }

    #[test]
    fn tf_serializes_as_integer() {
        assert_eq!(serde_json::to_string(&TerminationFlag::Looping).unwrap(), "1");
        let tf: TerminationFlag = serde_json::from_str("2").unwrap();
        assert_eq!(tf, TerminationFlag::Max);
        assert!(serde_json::from_str::<TerminationFlag>("3").is_err());
    }
}
