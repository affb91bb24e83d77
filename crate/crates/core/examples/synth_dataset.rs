//! Generate a synthetic environment and a kinematic survey.
//!
//! cargo run --example synth_dataset -- [seed]

use rfmpos::synth::{expected_rss, generate_dataset, EnvironmentParams, SurveyPlan, SyntheticEnvironment};

fn main() -> rfmpos::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let env = SyntheticEnvironment::generate(seed, &EnvironmentParams::default())?;
    let plan = SurveyPlan {
        seed: seed + 1,
        ..Default::default()
    };
    let (raw, test) = generate_dataset(&env, &plan)?;

    println!("roi {:.0} x {:.0} m, {} access points", env.roi.width(), env.roi.height(), env.aps.len());
    let r = env.roi;
    let mid = rfmpos::model::Location::new((r.min_x + r.max_x) / 2.0, (r.min_y + r.max_y) / 2.0);
    for ap in env.aps.iter().take(4) {
        println!(
            "  {}  P0 {:6.1} dBm  n {:.2}  at ROI center: {:7.1} dBm, sigma {:.2} dB",
            ap.id,
            ap.tx_power,
            ap.exponent,
            expected_rss(ap, &mid),
            ap.noise.sigma(&mid)
        );
    }
    let mean_features = raw.records().iter().map(|r| r.len()).sum::<usize>() as f64 / raw.len() as f64;
    println!("{} survey records ({mean_features:.1} features each), {} held-out test scans", raw.len(), test.len());
    println!("first record: {}", rfmpos::io::fingerprint_to_line(&raw.records()[0]));
    Ok(())
}
