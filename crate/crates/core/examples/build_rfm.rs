//! Build the extended map and inspect its value and sigma layers.

use rfmpos::builder::{build, discretize, residual_field, BuilderConfig};
use rfmpos::model::Location;
use rfmpos::synth::{generate_dataset, Contamination, EnvironmentParams, SurveyPlan, SyntheticEnvironment};

fn main() -> rfmpos::Result<()> {
    let params = EnvironmentParams {
        contamination: Some(Contamination::default()),
        ..Default::default()
    };
    let env = SyntheticEnvironment::generate(11, &params)?;
    let (raw, _) = generate_dataset(&env, &SurveyPlan::default())?;
    let rfm = build(&raw, &BuilderConfig::default())?;

    let sigmas: Vec<f64> = rfm.points().iter().flat_map(|p| p.entries.iter().map(|e| e.sigma)).collect();
    let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    let max = sigmas.iter().copied().fold(0.0, f64::max);
    println!("{} reference points, sigma mean {mean:.2} dB, max {max:.2} dB", rfm.len());

    let probe = Location::new(12.3, 7.8);
    println!("continuous query at ({}, {}):", probe.x, probe.y);
    for e in rfm.query(&probe).iter().take(5) {
        let truth = env.aps.iter().find(|a| a.id == e.feature).map(|a| a.noise.sigma(&probe)).unwrap_or(f64::NAN);
        println!("  {}  {:7.2} dBm  sigma {:5.2} (true {:5.2})", e.feature, e.value, e.sigma, truth);
    }

    let residuals = residual_field(&raw, &rfm);
    let big = residuals.iter().filter(|r| r.2.abs() > 10.0).count();
    println!("{} residuals, {} beyond 10 dB (contaminated scans)", residuals.len(), big);

    let grid = discretize(&rfm, &env.roi);
    println!("{} grid cells at {} m resolution", grid.len(), rfm.config().grid_resolution);
    Ok(())
}
