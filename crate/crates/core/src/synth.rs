//! Reproducible synthetic survey data: log-distance path loss from randomly
//! placed access points, a smooth location-dependent noise level per access
//! point, and a random-waypoint kinematic survey.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureId, Fingerprint, Location, RawRfm, Rect};

pub const SIGMA_MIN: f64 = 0.5;
pub const SIGMA_MAX: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBump {
    pub center: Location,
    pub amplitude: f64,
    pub width: f64,
}

/// Smooth positive noise level: `base` plus Gaussian bumps, clamped to
/// `[SIGMA_MIN, SIGMA_MAX]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseField {
    pub base: f64,
    pub bumps: Vec<NoiseBump>,
}

impl NoiseField {
    pub fn constant(sigma: f64) -> Self {
        NoiseField {
            base: sigma,
            bumps: Vec::new(),
        }
    }

    pub fn sigma(&self, loc: &Location) -> f64 {
        let s = self.base
            + self
                .bumps
                .iter()
                .map(|b| {
                    let d = loc.distance(&b.center);
                    b.amplitude * (-0.5 * (d / b.width).powi(2)).exp()
                })
                .sum::<f64>();
        s.clamp(SIGMA_MIN, SIGMA_MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: FeatureId,
    pub location: Location,
    /// Received power at the 1 m reference distance (dBm).
    pub tx_power: f64,
    pub exponent: f64,
    pub noise: NoiseField,
}

/// Heavy-tailed contamination: with probability `rate` a sample is offset by
/// a uniform `[min_offset, max_offset]` dB amount of random sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub rate: f64,
    pub min_offset: f64,
    pub max_offset: f64,
}

impl Default for Contamination {
    fn default() -> Self {
        Contamination {
            rate: 0.05,
            min_offset: 10.0,
            max_offset: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEnvironment {
    pub seed: u64,
    pub roi: Rect,
    pub aps: Vec<AccessPoint>,
    /// Values below this are not reported (dBm).
    pub sensitivity: f64,
    pub contamination: Option<Contamination>,
}

/// Knobs for [`SyntheticEnvironment::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    pub width: f64,
    pub height: f64,
    pub n_aps: usize,
    /// APs are placed up to this far outside the ROI.
    pub ap_margin: f64,
    pub tx_power: (f64, f64),
    pub exponent: (f64, f64),
    pub noise_base: (f64, f64),
    pub bumps: (usize, usize),
    pub bump_amplitude: (f64, f64),
    pub bump_width: (f64, f64),
    pub sensitivity: f64,
    pub contamination: Option<Contamination>,
}

impl Default for EnvironmentParams {
    fn default() -> Self {
        EnvironmentParams {
            width: 40.0,
            height: 20.0,
            n_aps: 12,
            ap_margin: 5.0,
            tx_power: (-40.0, -30.0),
            exponent: (2.0, 3.5),
            noise_base: (0.5, 1.5),
            bumps: (2, 5),
            bump_amplitude: (1.0, 6.0),
            bump_width: (2.0, 6.0),
            sensitivity: -110.0,
            contamination: None,
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn random_in(rng: &mut impl Rng, r: &Rect) -> Location {
    Location::new(uniform(rng, (r.min_x, r.max_x)), uniform(rng, (r.min_y, r.max_y)))
}

impl SyntheticEnvironment {
    pub fn generate(seed: u64, params: &EnvironmentParams) -> Result<Self> {
        if params.exponent.0 < 1.5 || params.exponent.1 > 4.5 || params.noise_base.0 < SIGMA_MIN {
            return Err(Error::invalid("environment parameters out of range"));
        }
        let roi = Rect::new(0.0, 0.0, params.width, params.height)?;
        let placement = roi.expand(params.ap_margin);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aps = (0..params.n_aps)
            .map(|i| {
                let location = random_in(&mut rng, &placement);
                let tx_power = uniform(&mut rng, params.tx_power);
                let exponent = uniform(&mut rng, params.exponent);
                let base = uniform(&mut rng, params.noise_base);
                let n_bumps = rng.gen_range(params.bumps.0..=params.bumps.1.max(params.bumps.0));
                let bumps = (0..n_bumps)
                    .map(|_| NoiseBump {
                        center: random_in(&mut rng, &roi),
                        amplitude: uniform(&mut rng, params.bump_amplitude),
                        width: uniform(&mut rng, params.bump_width),
                    })
                    .collect();
                AccessPoint {
                    id: FeatureId::new(format!("02:00:00:00:{:02x}:{:02x}", i / 256, i % 256)).expect("non-empty"),
                    location,
                    tx_power,
                    exponent,
                    noise: NoiseField { base, bumps },
                }
            })
            .collect();
        Ok(SyntheticEnvironment {
            seed,
            roi,
            aps,
            sensitivity: params.sensitivity,
            contamination: params.contamination,
        })
    }
}

/// Log-distance path loss: `P₀ − 10 n log₁₀(max(d, 1))`.
pub fn expected_rss(ap: &AccessPoint, loc: &Location) -> f64 {
    let d = ap.location.distance(loc).max(1.0);
    ap.tx_power - 10.0 * ap.exponent * d.log10()
}

/// One noisy scan at `loc`.
pub fn sample_fingerprint(env: &SyntheticEnvironment, loc: &Location, id: u64, rng: &mut impl Rng) -> Fingerprint {
    let mut features = Vec::with_capacity(env.aps.len());
    for ap in &env.aps {
        let sigma = ap.noise.sigma(loc);
        let mut v = expected_rss(ap, loc) + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        if let Some(c) = env.contamination {
            if rng.gen_bool(c.rate.clamp(0.0, 1.0)) {
                let offset = uniform(rng, (c.min_offset, c.max_offset));
                v += if rng.gen_bool(0.5) { offset } else { -offset };
            }
        }
        if v >= env.sensitivity {
            features.push((ap.id.clone(), v));
        }
    }
    Fingerprint::new(id, Some(*loc), features).expect("finite synthetic values")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPlan {
    pub seed: u64,
    pub n_passes: usize,
    /// Walking speed (m/s); recorded with the plan, sampling is distance-based.
    pub speed: f64,
    /// Distance walked between consecutive scans (m).
    pub sample_spacing: f64,
    /// Each pass walks `area / lane_width` meters.
    pub lane_width: f64,
    pub test_fraction: f64,
}

impl Default for SurveyPlan {
    fn default() -> Self {
        SurveyPlan {
            seed: 0,
            n_passes: 3,
            speed: 1.2,
            sample_spacing: 1.0,
            lane_width: 2.0,
            test_fraction: 0.2,
        }
    }
}

impl SurveyPlan {
    pub fn samples_per_pass(&self, roi: &Rect) -> usize {
        let walk = roi.width() * roi.height() / self.lane_width;
        (walk / self.sample_spacing).floor().max(1.0) as usize
    }
}

/// Random-waypoint walk across the ROI, `n_passes` times, scanning every
/// `sample_spacing` meters.
pub fn survey_trajectory(roi: &Rect, plan: &SurveyPlan, rng: &mut impl Rng) -> Vec<Location> {
    let per_pass = plan.samples_per_pass(roi);
    let mut pos = random_in(rng, roi);
    let mut target = random_in(rng, roi);
    let mut out = Vec::with_capacity(per_pass * plan.n_passes);
    for _ in 0..plan.n_passes * per_pass {
        out.push(pos);
        let mut left = plan.sample_spacing;
        while left > 0.0 {
            let d = pos.distance(&target);
            if d <= left {
                pos = target;
                left -= d;
                target = random_in(rng, roi);
            } else {
                let f = left / d;
                pos = Location::new(pos.x + f * (target.x - pos.x), pos.y + f * (target.y - pos.y));
                left = 0.0;
            }
        }
    }
    out
}

/// Surveys the environment and holds out `test_fraction` of the scan
/// locations as a located test set (excluded from the raw map).
pub fn generate_dataset(env: &SyntheticEnvironment, plan: &SurveyPlan) -> Result<(RawRfm, Vec<Fingerprint>)> {
    if plan.n_passes == 0
        || !(plan.sample_spacing > 0.0)
        || !(plan.lane_width > 0.0)
        || !(plan.speed > 0.0)
        || !(0.0..1.0).contains(&plan.test_fraction)
    {
        return Err(Error::invalid(format!("invalid survey plan {plan:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let trajectory = survey_trajectory(&env.roi, plan, &mut rng);
    let scans: Vec<Fingerprint> = trajectory
        .iter()
        .enumerate()
        .map(|(i, loc)| sample_fingerprint(env, loc, i as u64, &mut rng))
        .collect();

    let mut order: Vec<usize> = (0..scans.len()).collect();
    order.shuffle(&mut rng);
    let n_test = ((scans.len() as f64) * plan.test_fraction).round() as usize;
    let mut is_test = vec![false; scans.len()];
    for &i in &order[..n_test.min(scans.len() - 1)] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = scans.into_iter().zip(is_test).partition(|(_, t)| *t);
    let raw = RawRfm::new(train.into_iter().map(|(f, _)| f).collect(), env.roi)?;
    Ok((raw, test.into_iter().map(|(f, _)| f).collect()))
}
