//! Dissimilarity and similarity measures between an observed fingerprint and
//! map entries.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{FeatureId, Fingerprint, PositioningConfig, RfmEntry, WeightForm};

/// Per-feature weights at an assumed location.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: BTreeMap<FeatureId, f64>,
    /// Used for any feature without its own weight.
    min_weight: f64,
}

impl WeightVector {
    /// Every feature weighs 1; the plain compound dissimilarity.
    pub fn uniform() -> Self {
        WeightVector {
            weights: BTreeMap::new(),
            min_weight: 1.0,
        }
    }

    /// Explicit weights; `min_weight` is their minimum (1 when empty).
    pub fn from_weights(weights: impl IntoIterator<Item = (FeatureId, f64)>) -> Result<Self> {
        let weights: BTreeMap<FeatureId, f64> = weights.into_iter().collect();
        if weights.values().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and positive"));
        }
        let min_weight = weights.values().copied().reduce(f64::min).unwrap_or(1.0);
        Ok(WeightVector { weights, min_weight })
    }

    pub fn weight(&self, a: &FeatureId) -> f64 {
        self.weights.get(a).copied().unwrap_or(self.min_weight)
    }

    pub fn weights(&self) -> &BTreeMap<FeatureId, f64> {
        &self.weights
    }

    pub fn min_weight(&self) -> f64 {
        self.min_weight
    }
}

/// `|v1 - v2|^p`, no root taken.
pub fn feature_distance(v1: f64, v2: f64, p: f64) -> f64 {
    let d = (v1 - v2).abs();
    if p == 2.0 {
        d * d
    } else if p == 1.0 {
        d
    } else {
        d.powf(p)
    }
}

/// Softmax over `±β σ⁻²` of the given entries, normalized to sum 1.
pub fn softmax_weights(entries: &[RfmEntry], beta: f64, form: WeightForm) -> WeightVector {
    if entries.is_empty() {
        return WeightVector::uniform();
    }
    let sign = match form {
        WeightForm::PaperVerbatim => -1.0,
        WeightForm::PrecisionSoftmax => 1.0,
    };
    let logits: Vec<f64> = entries.iter().map(|e| sign * beta / (e.sigma * e.sigma)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let weights: BTreeMap<FeatureId, f64> = entries
        .iter()
        .zip(exps)
        .map(|(e, x)| (e.feature.clone(), x / total))
        .collect();
    let min_weight = weights.values().copied().fold(f64::INFINITY, f64::min);
    WeightVector { weights, min_weight }
}

/// Weighted compound dissimilarity between an observation and a reference
/// entry list (sorted by feature id).
///
/// Shared features contribute `w g(v_obs, v_ref)`, observation-only features
/// `α₁ w g(v_obs, γ)` and reference-only features `α₂ w g(γ, v_ref)`.
pub fn weighted_cdm(obs: &Fingerprint, ref_entries: &[RfmEntry], wv: &WeightVector, cfg: &PositioningConfig) -> Result<f64> {
    if obs.is_empty() && ref_entries.is_empty() {
        return Err(Error::EmptyComparison);
    }
    let p = cfg.minkowski_p;
    let gamma = cfg.gamma;
    let (mut shared, mut obs_only, mut ref_only) = (0.0, 0.0, 0.0);

    let mut o = obs.features().iter().peekable();
    let mut r = ref_entries.iter().peekable();
    loop {
        match (o.peek(), r.peek()) {
            (Some((a, vo)), Some(e)) => match (*a).cmp(&e.feature) {
                Ordering::Equal => {
                    shared += wv.weight(a) * feature_distance(**vo, e.value, p);
                    o.next();
                    r.next();
                }
                Ordering::Less => {
                    obs_only += wv.weight(a) * feature_distance(**vo, gamma, p);
                    o.next();
                }
                Ordering::Greater => {
                    ref_only += wv.weight(&e.feature) * feature_distance(gamma, e.value, p);
                    r.next();
                }
            },
            (Some((a, vo)), None) => {
                obs_only += wv.weight(a) * feature_distance(**vo, gamma, p);
                o.next();
            }
            (None, Some(e)) => {
                ref_only += wv.weight(&e.feature) * feature_distance(gamma, e.value, p);
                r.next();
            }
            (None, None) => break,
        }
    }
    Ok(shared + cfg.alpha1 * obs_only + cfg.alpha2 * ref_only)
}

/// Modified Jaccard index: `½ (|A∩B|/|A∪B| + |A∩B|/|A|)` with `A` the observed set.
pub fn mji(obs_attrs: &BTreeSet<FeatureId>, ref_attrs: &BTreeSet<FeatureId>) -> Result<f64> {
    if obs_attrs.is_empty() {
        return Err(Error::UndefinedSimilarity);
    }
    let inter = obs_attrs.intersection(ref_attrs).count() as f64;
    let union = obs_attrs.union(ref_attrs).count() as f64;
    Ok(0.5 * (inter / union + inter / obs_attrs.len() as f64))
}
