//! Locate held-out scans with the iterative weighted search and show the
//! search paths.

use rfmpos::prelude::*;

fn main() -> Result<()> {
    let env = SyntheticEnvironment::generate(3, &EnvironmentParams::default())?;
    let (raw, test) = generate_dataset(
        &env,
        &SurveyPlan {
            seed: 4,
            ..Default::default()
        },
    )?;
    let rfm = build(&raw, &BuilderConfig::default())?;
    let cfg = PositioningConfig::default();

    for q in test.iter().take(8) {
        let truth = q.location.expect("test scans are located");
        let baseline = knn_locate(q, &rfm, &cfg, None)?;
        let est = iterate_locate(q, &rfm, &cfg)?;
        let path: Vec<String> = est.path.iter().map(|l| format!("({:.1}, {:.1})", l.x, l.y)).collect();
        println!(
            "scan {:4}: cdm err {:5.2} m, iterative err {:5.2} m, tf {}, path {}",
            q.id,
            baseline.distance(&truth),
            est.location.distance(&truth),
            est.tf as u8,
            path.join(" -> ")
        );
    }
    Ok(())
}
