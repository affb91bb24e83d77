//! Error statistics of plain kNN, compound-dissimilarity kNN and the
//! iterative search over one synthetic dataset.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rfmpos::eval::{loop_diameters, tf_stats};
use rfmpos::prelude::*;

fn main() -> Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let env = SyntheticEnvironment::generate(seed, &EnvironmentParams::default())?;
    let (raw, test) = generate_dataset(
        &env,
        &SurveyPlan {
            seed: seed + 1000,
            ..Default::default()
        },
    )?;
    let rfm = build(&raw, &BuilderConfig::default())?;
    let cfg = PositioningConfig::default();
    let plain = PositioningConfig {
        alpha1: 1.0,
        alpha2: 1.0,
        ..cfg.clone()
    };

    let single = |c: &PositioningConfig| -> Result<Vec<PositionEstimate>> {
        test.par_iter().map(|q| knn_locate(q, &rfm, c, None).map(PositionEstimate::single)).collect()
    };
    let iterative: Vec<PositionEstimate> = test.par_iter().map(|q| iterate_locate(q, &rfm, &cfg)).collect::<Result<_>>()?;
    let tf = tf_stats(&iterative)?;
    let loops = loop_diameters(&iterative);
    let runs = BTreeMap::from([
        ("knn".to_string(), single(&plain)?),
        ("cdm".to_string(), single(&cfg)?),
        ("iterative".to_string(), iterative),
    ]);
    let truth: Vec<Location> = test.iter().filter_map(|q| q.location).collect();
    let report = compare_report(&runs, &truth, Some("iterative"))?;

    print!("{}", report.to_csv());
    println!(
        "termination: {:.0}% converging, {:.0}% looping, {:.0}% max; {} loops, largest {:.1} m",
        100.0 * tf.converging,
        100.0 * tf.looping,
        100.0 * tf.max,
        loops.len(),
        loops.iter().copied().fold(0.0, f64::max)
    );
    Ok(())
}
