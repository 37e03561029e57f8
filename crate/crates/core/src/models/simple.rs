//! The closed-form families: exponential smoothing and weighted moving
//! average. (The naive baseline needs no fitting code at all.)

use super::WmaParams;

/// Runs the smoothing recurrence over the whole history and returns the
/// final smoothed value X̂ — the model's next one-step forecast.
///
/// X̂ is seeded with the first observation, then
/// `X̂_{t+1} = α·X_t + (1−α)·X̂_t` for each subsequent observation.
pub(super) fn exp_run_recurrence(values: &[f64], alpha: f64) -> f64 {
    let mut x_hat = values[0];
    for &x in &values[1..] {
        x_hat = alpha * x + (1.0 - alpha) * x_hat;
    }
    x_hat
}

/// Resolves configured weights into the vector actually applied: normalized
/// to sum 1 unless raw-weight mode is on.
pub(super) fn wma_resolve_weights(params: &WmaParams) -> Vec<f64> {
    if params.normalize {
        let sum: f64 = params.weights.iter().sum();
        params.weights.iter().map(|w| w / sum).collect()
    } else {
        params.weights.clone()
    }
}

/// Next WMA forecast: `Σ w_i · x_{end−i}` with weights newest-first.
pub(super) fn wma_next(history: &[f64], weights: &[f64]) -> f64 {
    let n = history.len();
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * history[n - 1 - i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exp_recurrence_by_hand() {
        // X̂₁ = 10; X̂₂ = 0.5·20 + 0.5·10 = 15; X̂₃ = 0.5·30 + 0.5·15 = 22.5.
        let x_hat = exp_run_recurrence(&[10.0, 20.0, 30.0], 0.5);
        assert_abs_diff_eq!(x_hat, 22.5, epsilon = 1e-12);
    }

    #[test]
    fn exp_alpha_one_tracks_last_value() {
        let x_hat = exp_run_recurrence(&[4.0, 9.0, 2.0, 31.0], 1.0);
        assert_eq!(x_hat, 31.0);
    }

    #[test]
    fn wma_hand_example() {
        let weights = wma_resolve_weights(&WmaParams {
            weights: vec![0.66, 0.33],
            normalize: true,
        });
        assert_abs_diff_eq!(weights[0] + weights[1], 1.0, epsilon = 1e-12);
        let next = wma_next(&[100.0, 200.0], &weights);
        assert_abs_diff_eq!(next, 2.0 / 3.0 * 200.0 + 1.0 / 3.0 * 100.0, epsilon = 1e-9);
        assert!((next - 166.67).abs() < 0.01);
    }

    #[test]
    fn wma_raw_mode_keeps_weights() {
        let weights = wma_resolve_weights(&WmaParams {
            weights: vec![0.66, 0.33],
            normalize: false,
        });
        assert_eq!(weights, vec![0.66, 0.33]);
        // Raw weights summing to 0.99 shrink the forecast accordingly.
        assert_abs_diff_eq!(
            wma_next(&[100.0, 200.0], &weights),
            0.66 * 200.0 + 0.33 * 100.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_weight_is_naive() {
        let weights = wma_resolve_weights(&WmaParams {
            weights: vec![3.0],
            normalize: true,
        });
        assert_eq!(weights, vec![1.0]);
        assert_eq!(wma_next(&[7.0, 9.0, 120.0], &weights), 120.0);
    }
}
