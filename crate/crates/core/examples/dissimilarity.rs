//! Softmax weights, the weighted compound dissimilarity and the modified
//! Jaccard index on a hand-made example.

use std::collections::BTreeSet;

use rfmpos::dissim::{mji, softmax_weights, weighted_cdm};
use rfmpos::model::{FeatureId, Fingerprint, PositioningConfig, RfmEntry, WeightForm};

fn entry(a: &str, value: f64, sigma: f64) -> RfmEntry {
    RfmEntry {
        feature: a.into(),
        value,
        sigma,
    }
}

fn main() -> rfmpos::Result<()> {
    let reference = [entry("ap1", -55.0, 1.0), entry("ap2", -70.0, 2.0), entry("ap3", -82.0, 6.0)];
    let obs = Fingerprint::new(0, None, [("ap1".into(), -57.0), ("ap2".into(), -64.0), ("ap4".into(), -90.0)])?;
    let cfg = PositioningConfig::default();

    for form in [WeightForm::PrecisionSoftmax, WeightForm::PaperVerbatim] {
        let wv = softmax_weights(&reference, cfg.beta, form);
        let w: Vec<String> = wv.weights().iter().map(|(a, w)| format!("{a}={w:.3}")).collect();
        println!("{form:?}: {}  cdm {:.1}", w.join(" "), weighted_cdm(&obs, &reference, &wv, &cfg)?);
    }

    let a: BTreeSet<FeatureId> = obs.features().keys().cloned().collect();
    let b: BTreeSet<FeatureId> = reference.iter().map(|e| e.feature.clone()).collect();
    println!("mji {:.4}", mji(&a, &b)?);
    Ok(())
}
