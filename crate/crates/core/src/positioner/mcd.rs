//! Minimum covariance determinant location estimate for small planar point
//! sets.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::builder::median;
use crate::error::{Error, Result};
use crate::model::Location;

/// Largest point count searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 12;
const RANDOM_STARTS: usize = 50;
const MAX_C_STEPS: usize = 100;
const DEFAULT_SEED: u64 = 0x6d63_645f_7365_6564;

#[derive(Debug, Clone, Copy)]
struct Moments {
    mean: Location,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn of(points: &[Location], subset: impl Iterator<Item = usize> + Clone) -> Self {
        let h = subset.clone().count() as f64;
        let (mut mx, mut my) = (0.0, 0.0);
        for i in subset.clone() {
            mx += points[i].x;
            my += points[i].y;
        }
        mx /= h;
        my /= h;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in subset {
            let dx = points[i].x - mx;
            let dy = points[i].y - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        Moments {
            mean: Location::new(mx, my),
            sxx: sxx / h,
            syy: syy / h,
            sxy: sxy / h,
        }
    }

    fn det(&self) -> f64 {
        self.sxx * self.syy - self.sxy * self.sxy
    }

    fn degenerate(&self) -> bool {
        let tr = self.sxx + self.syy;
        tr <= 0.0 || self.det() <= 1e-12 * tr * tr
    }

    /// Squared Mahalanobis distance; requires a non-degenerate scatter.
    fn mahalanobis2(&self, p: &Location) -> f64 {
        let dx = p.x - self.mean.x;
        let dy = p.y - self.mean.y;
        (self.syy * dx * dx - 2.0 * self.sxy * dx * dy + self.sxx * dy * dy) / self.det()
    }
}

/// Default subset size `⌈(n + 3) / 2⌉`, capped at `n`.
pub fn default_support(n: usize) -> usize {
    (n + 4).div_euclid(2).min(n)
}

fn coordinate_median(points: &[Location]) -> Location {
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    Location::new(median(&mut xs).expect("non-empty"), median(&mut ys).expect("non-empty"))
}

/// Mean of the `h`-subset with the smallest covariance determinant.
///
/// `support_fraction` defaults to `⌈(n + 3) / 2⌉ / n`. Sets of at most
/// [`EXHAUSTIVE_LIMIT`] points are searched exhaustively; larger sets use
/// C-steps from random starts. A degenerate optimum (collinear or coincident
/// points) yields the coordinate-wise median instead.
pub fn mcd_center(points: &[Location], support_fraction: Option<f64>) -> Result<Location> {
    mcd_center_seeded(points, support_fraction, DEFAULT_SEED)
}

pub fn mcd_center_seeded(points: &[Location], support_fraction: Option<f64>, seed: u64) -> Result<Location> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints(n));
    }
    let h = match support_fraction {
        None => default_support(n),
        Some(f) if f > 0.0 && f <= 1.0 => ((f * n as f64).ceil() as usize).clamp(1, n),
        Some(f) => return Err(Error::invalid(format!("support fraction {f} outside (0, 1]"))),
    };
    let best = if n <= EXHAUSTIVE_LIMIT {
        exhaustive(points, h)
    } else {
        c_steps(points, h, seed)
    };
    Ok(match best {
        Some(m) if !m.degenerate() => m.mean,
        _ => coordinate_median(points),
    })
}

fn exhaustive(points: &[Location], h: usize) -> Option<Moments> {
    let n = points.len();
    let mut idx: Vec<usize> = (0..h).collect();
    let mut best: Option<Moments> = None;
    loop {
        let m = Moments::of(points, idx.iter().copied());
        if best.is_none_or(|b| m.det() < b.det()) {
            best = Some(m);
        }
        // next combination in lexicographic order
        let Some(i) = (0..h).rev().find(|&i| idx[i] < n - h + i) else {
            return best;
        };
        idx[i] += 1;
        for j in i + 1..h {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn closest_h(points: &[Location], h: usize, dist: impl Fn(&Location) -> f64) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (dist(p), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().take(h).map(|(_, i)| i).collect()
}

fn c_steps(points: &[Location], h: usize, seed: u64) -> Option<Moments> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Moments> = None;
    for _ in 0..RANDOM_STARTS {
        let mut subset: Vec<usize> = sample(&mut rng, n, 3.min(n)).into_vec();
        let mut m = Moments::of(points, subset.iter().copied());
        while m.degenerate() && subset.len() < h {
            // grow the start until it spans the plane
            let extra = sample(&mut rng, n, n).into_iter().find(|i| !subset.contains(i))?;
            subset.push(extra);
            m = Moments::of(points, subset.iter().copied());
        }
        if m.degenerate() {
            let c = m.mean;
            m = Moments::of(points, closest_h(points, h, |p| p.distance(&c)).into_iter());
        }
        for _ in 0..MAX_C_STEPS {
            if m.degenerate() {
                break;
            }
            let next = Moments::of(points, closest_h(points, h, |p| m.mahalanobis2(p)).into_iter());
            if next.det() >= m.det() {
                break;
            }
            m = next;
        }
        if best.is_none_or(|b| m.det() < b.det()) {
            best = Some(m);
        }
    }
    best
}
