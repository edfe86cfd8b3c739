//! Base-station density needed to see several stations at once when
//! stations form a homogeneous Poisson point process.
//!
//! Visibility model: a station is visible when it lies within range `R` of
//! the mobile, so the visible count is Poisson with mean `λ·π·R²`.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::math;

/// Densities quoted in the literature for (range in m, stations per km²).
/// They do not follow from the disk-count model and are reported as
/// annotations only.
pub const REPORTED_DENSITIES: [(f64, f64); 2] = [(100.0, 30.0), (300.0, 4.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityQuery {
    /// Metres.
    pub range: f64,
    #[serde(default = "default_prob")]
    pub target_prob: f64,
    #[serde(default = "default_k")]
    pub k: u32,
    /// Densities per km² at which to sample the probability curve.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
}

fn default_prob() -> f64 {
    0.9
}

fn default_k() -> u32 {
    2
}

impl DensityQuery {
    pub fn new(range: f64) -> Self {
        Self {
            range,
            target_prob: default_prob(),
            k: default_k(),
            lambda_grid: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate(self.range, self.target_prob, self.k)?;
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0)) {
            return Err(config_err!("lambda grid values must be non-negative"));
        }
        Ok(())
    }
}

fn validate(range: f64, target_prob: f64, k: u32) -> Result<()> {
    if !(range > 0.0) {
        return Err(config_err!("range must be positive"));
    }
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(config_err!("target probability must lie in (0, 1)"));
    }
    if k == 0 {
        return Err(config_err!("k must be at least 1"));
    }
    Ok(())
}

/// Mean number of stations within `range` metres at `lambda` per km².
pub fn mean_visible(lambda: f64, range: f64) -> f64 {
    let r_km = range / 1000.0;
    lambda * math::PI * r_km * r_km
}

/// P(N ≥ k) for N ~ Poisson(mu).
pub fn poisson_at_least(mu: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    let mut term = math::exp(-mu);
    let mut below = 0.0;
    for i in 0..k {
        below += term;
        term *= mu / (i + 1) as f64;
    }
    (1.0 - below).clamp(0.0, 1.0)
}

/// Probability that at least `k` stations lie within `range` metres.
pub fn prob_at_least_k(lambda: f64, range: f64, k: u32) -> f64 {
    poisson_at_least(mean_visible(lambda.max(0.0), range), k)
}

/// Smallest density (per km²) reaching `target_prob`, by bisection on the
/// Poisson mean.
pub fn min_density(range: f64, target_prob: f64, k: u32) -> Result<f64> {
    validate(range, target_prob, k)?;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while poisson_at_least(hi, k) < target_prob {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if poisson_at_least(mid, k) >= target_prob {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let r_km = range / 1000.0;
    Ok(hi / (math::PI * r_km * r_km))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub range: f64,
    pub lambda_star: f64,
    /// (λ per km², probability)
    pub curve: Vec<(f64, f64)>,
}

pub fn density_table(ranges: &[f64], query: &DensityQuery) -> Result<Vec<DensityRow>> {
    if ranges.is_empty() {
        return Err(config_err!("need at least one range"));
    }
    let mut out = Vec::with_capacity(ranges.len());
    for &range in ranges {
        let q = DensityQuery {
            range,
            ..query.clone()
        };
        q.validate()?;
        out.push(DensityRow {
            range,
            lambda_star: min_density(range, q.target_prob, q.k)?,
            curve: q
                .lambda_grid
                .iter()
                .map(|&l| (l, prob_at_least_k(l, range, q.k)))
                .collect(),
        });
    }
    Ok(out)
}

/// Monte Carlo estimate of P(N ≥ k): a Poisson point process is sampled on
/// the square circumscribing the disk and points inside the disk counted.
/// Returns (estimate, standard error).
pub fn monte_carlo_prob(
    lambda: f64,
    range: f64,
    k: u32,
    samples: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let side = 2.0 * range / 1000.0;
    let mean_square = lambda.max(0.0) * side * side;
    let r2 = (range / 1000.0) * (range / 1000.0);
    let mut hits = 0usize;
    for _ in 0..samples {
        // Poisson count via unit-rate exponential spacings
        let mut acc = 0.0;
        let mut inside = 0u32;
        loop {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            acc -= math::ln(u);
            if acc > mean_square {
                break;
            }
            let x: f64 = rng.gen_range(-0.5..0.5) * side;
            let y: f64 = rng.gen_range(-0.5..0.5) * side;
            if x * x + y * y <= r2 {
                inside += 1;
                if inside >= k {
                    break;
                }
            }
        }
        if inside >= k {
            hits += 1;
        }
    }
    let p = hits as f64 / samples.max(1) as f64;
    (p, math::sqrt(p * (1.0 - p) / samples.max(1) as f64))
}
