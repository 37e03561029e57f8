//! Seeded synthetic series generators.
//!
//! Used by tests, benchmarks and the snapshot generator. Everything here is
//! deterministic for a fixed seed (ChaCha-based), so frozen expected values
//! stay valid across runs and platforms.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::series::{SeriesLabel, WeeklySeries};

/// A fresh deterministic generator for `seed`.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent draws from `N(mean, std²)`.
pub fn white_noise(n: usize, mean: f64, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// A pure random walk started at `start` with `N(0, step_std²)` increments.
pub fn random_walk(n: usize, start: f64, step_std: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut level = start;
    (0..n)
        .map(|_| {
            level += step_std * rng.sample::<f64, _>(StandardNormal);
            level
        })
        .collect()
}

/// A zero-mean AR(p) process `x_t = Σ coeffs[i]·x_{t-1-i} + ε_t` with
/// `ε ~ N(0, noise_std²)`. The first 200 draws are discarded as burn-in.
pub fn ar_process(coeffs: &[f64], n: usize, noise_std: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let burn_in = 200;
    let mut history: Vec<f64> = Vec::with_capacity(burn_in + n);
    for _ in 0..burn_in + n {
        let mut x = noise_std * rng.sample::<f64, _>(StandardNormal);
        for (i, &c) in coeffs.iter().enumerate() {
            let t = history.len();
            if t > i {
                x += c * history[t - 1 - i];
            }
        }
        history.push(x);
    }
    history.split_off(burn_in)
}

/// `level + amplitude·sin(2πt/period) + N(0, noise_std²)` for `t = 0..n`.
pub fn sine_with_noise(
    n: usize,
    level: f64,
    amplitude: f64,
    period: f64,
    noise_std: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..n)
        .map(|t| {
            level
                + amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin()
                + noise_std * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Rounds `values` into a count series starting at `first_week`.
///
/// Values are clamped at 0 before rounding, so any real-valued synthetic
/// process can be turned into a valid count series.
pub fn counts_series(values: &[f64], first_week: NaiveDate, label: SeriesLabel) -> WeeklySeries {
    let counts = values.iter().map(|&v| v.max(0.0).round() as u32).collect();
    WeeklySeries::new(first_week, counts, label).expect("synthetic series is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(white_noise(50, 0.0, 1.0, 7), white_noise(50, 0.0, 1.0, 7));
        assert_eq!(
            random_walk(50, 0.0, 1.0, 7),
            random_walk(50, 0.0, 1.0, 7)
        );
        assert_eq!(
            ar_process(&[0.5, 0.3], 50, 1.0, 7),
            ar_process(&[0.5, 0.3], 50, 1.0, 7)
        );
    }

    #[test]
    fn seeds_change_the_stream() {
        assert_ne!(white_noise(10, 0.0, 1.0, 1), white_noise(10, 0.0, 1.0, 2));
    }

    #[test]
    fn ar_process_is_stationary_scale() {
        // Loose sanity bound: an AR(2) with coefficients (0.5, 0.3) has a
        // stationary standard deviation of about 1.8 for unit noise.
        let xs = ar_process(&[0.5, 0.3], 5000, 1.0, 3);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(var.sqrt() > 1.2 && var.sqrt() < 2.6, "std = {}", var.sqrt());
    }
}
