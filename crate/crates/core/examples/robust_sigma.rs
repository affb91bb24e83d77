//! Sigma recovery under heavy-tailed contamination: MAD against the plain
//! standard deviation.

use rfmpos::builder::{build, median, BuilderConfig, SpreadEstimator};
use rfmpos::synth::{generate_dataset, Contamination, EnvironmentParams, SurveyPlan, SyntheticEnvironment};

fn main() -> rfmpos::Result<()> {
    let params = EnvironmentParams {
        n_aps: 6,
        tx_power: (-30.0, -25.0),
        exponent: (2.0, 2.5),
        contamination: Some(Contamination::default()),
        ..Default::default()
    };
    let env = SyntheticEnvironment::generate(42, &params)?;
    let plan = SurveyPlan {
        seed: 43,
        n_passes: 6,
        test_fraction: 0.0,
        ..Default::default()
    };
    let (raw, _) = generate_dataset(&env, &plan)?;

    for spread in [SpreadEstimator::Mad, SpreadEstimator::PlainStd] {
        let rfm = build(&raw, &BuilderConfig { spread, ..Default::default() })?;
        let mut rel: Vec<f64> = rfm
            .points()
            .iter()
            .flat_map(|p| {
                let env = &env;
                p.entries.iter().map(move |e| {
                    let ap = env.aps.iter().find(|a| a.id == e.feature).expect("known feature");
                    let truth = ap.noise.sigma(&p.location);
                    (e.sigma - truth).abs() / truth
                })
            })
            .collect();
        println!("{spread:?}: median relative sigma error {:.3}", median(&mut rel).unwrap_or(f64::NAN));
    }
    Ok(())
}
