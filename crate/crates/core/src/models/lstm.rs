//! A single-layer LSTM regressor trained by full backpropagation through
//! time.
//!
//! The pipeline follows the transform-then-learn recipe: counts are clamped
//! at 1, log-differenced, cut into sliding windows, and each window's next
//! difference is regressed with an LSTM (optionally concatenating each
//! timestep's standardized exogenous covariates onto its input). Training is
//! full-batch gradient descent with Adam-style adaptive updates and global
//! gradient-norm clipping at 5.0. Forecasts run the recursion on predicted
//! differences and integrate back to count scale.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LstmParams;
use crate::error::{Error, Result};
use crate::features::{log_difference, ExogRow, ExogenousMatrix};

const GRAD_CLIP_NORM: f64 = 5.0;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Weight matrices and biases of one LSTM layer, row-major, with the input
/// convention `z_t = [h_{t−1}, x_t]` (each matrix is `units × (units +
/// input_dim)`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub units: usize,
    pub input_dim: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM cell step:
/// `f = σ(W_f·z + b_f)`, `i = σ(W_i·z + b_i)`, `ĉ = tanh(W_c·z + b_c)`,
/// `c = f∘c_prev + i∘ĉ`, `o = σ(W_o·z + b_o)`, `h = o∘tanh(c)` with
/// `z = [h_prev, x]`.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    weights: &LstmWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let units = weights.units;
    let z_len = units + weights.input_dim;
    let check_vec = |name: &'static str, len: usize, expected: usize| -> Result<()> {
        if len != expected {
            return Err(Error::Shape {
                matrix: name,
                expected: format!("{expected}"),
                actual: format!("{len}"),
            });
        }
        Ok(())
    };
    check_vec("x", x.len(), weights.input_dim)?;
    check_vec("h_prev", h_prev.len(), units)?;
    check_vec("c_prev", c_prev.len(), units)?;
    for (name, w) in [
        ("W_f", &weights.w_f),
        ("W_i", &weights.w_i),
        ("W_c", &weights.w_c),
        ("W_o", &weights.w_o),
    ] {
        if w.len() != units * z_len {
            return Err(Error::Shape {
                matrix: name,
                expected: format!("{units}x{z_len}"),
                actual: format!("{} elements", w.len()),
            });
        }
    }
    for (name, b) in [
        ("b_f", &weights.b_f),
        ("b_i", &weights.b_i),
        ("b_c", &weights.b_c),
        ("b_o", &weights.b_o),
    ] {
        check_vec(name, b.len(), units)?;
    }

    let mut z = Vec::with_capacity(z_len);
    z.extend_from_slice(h_prev);
    z.extend_from_slice(x);

    let gate = |w: &[f64], b: &[f64]| -> Vec<f64> {
        (0..units)
            .map(|r| {
                let row = &w[r * z_len..(r + 1) * z_len];
                b[r] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    };
    let f: Vec<f64> = gate(&weights.w_f, &weights.b_f).iter().map(|&a| sigmoid(a)).collect();
    let i: Vec<f64> = gate(&weights.w_i, &weights.b_i).iter().map(|&a| sigmoid(a)).collect();
    let chat: Vec<f64> = gate(&weights.w_c, &weights.b_c).iter().map(|&a| a.tanh()).collect();
    let o: Vec<f64> = gate(&weights.w_o, &weights.b_o).iter().map(|&a| sigmoid(a)).collect();
    let c: Vec<f64> = (0..units)
        .map(|u| f[u] * c_prev[u] + i[u] * chat[u])
        .collect();
    let h: Vec<f64> = (0..units).map(|u| o[u] * c[u].tanh()).collect();
    Ok((h, c))
}

/// Where each parameter block lives inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub(super) units: usize,
    pub(super) input_dim: usize,
}

impl Layout {
    fn z_len(&self) -> usize {
        self.units + self.input_dim
    }

    fn gate_len(&self) -> usize {
        self.units * self.z_len()
    }

    /// Gate matrices in f, i, c, o order.
    fn w(&self, g: usize) -> std::ops::Range<usize> {
        g * self.gate_len()..(g + 1) * self.gate_len()
    }

    fn b(&self, g: usize) -> std::ops::Range<usize> {
        let base = 4 * self.gate_len() + g * self.units;
        base..base + self.units
    }

    fn head_w(&self) -> std::ops::Range<usize> {
        let base = 4 * self.gate_len() + 4 * self.units;
        base..base + self.units
    }

    fn head_b(&self) -> usize {
        4 * self.gate_len() + 5 * self.units
    }

    pub(super) fn total(&self) -> usize {
        4 * self.gate_len() + 5 * self.units + 1
    }
}

/// Everything cached during one timestep's forward pass.
struct StepCache {
    z: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    chat: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// One supervised sample: `window` input vectors and the next transformed
/// value as target.
struct Sample {
    inputs: Vec<Vec<f64>>,
    target: f64,
}

/// Fitted LSTM state.
#[derive(Debug, Clone)]
pub(crate) struct LstmState {
    pub(super) layout: Layout,
    pub(super) window: usize,
    pub(super) params: Vec<f64>,
    pub(super) adam_m: Vec<f64>,
    pub(super) adam_v: Vec<f64>,
    pub(super) adam_t: u64,
    /// Per-feature standardization of exogenous inputs (empty without them).
    pub(super) exog_mean: Vec<f64>,
    pub(super) exog_std: Vec<f64>,
    /// Standardization of the log-difference channel, frozen at the initial
    /// fit so the input scale matches the standardized covariates.
    pub(super) value_mean: f64,
    pub(super) value_std: f64,
    /// Full-batch MSE per epoch, appended across refits.
    pub(super) epoch_losses: Vec<f64>,
}

pub(super) fn fit_state(
    values: &[f64],
    params: &LstmParams,
    exog: Option<&ExogenousMatrix>,
    seed: u64,
) -> Result<LstmState> {
    let input_dim = 1 + if exog.is_some() {
        ExogRow::FEATURE_NAMES.len()
    } else {
        0
    };
    let layout = Layout {
        units: params.units,
        input_dim,
    };

    let (exog_mean, exog_std) = match exog {
        Some(m) => exog_statistics(m),
        None => (Vec::new(), Vec::new()),
    };
    let (value_mean, value_std) = value_statistics(values);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = vec![0.0; layout.total()];
    let w_scale = 1.0 / (layout.z_len() as f64).sqrt();
    for g in 0..4 {
        for p in &mut flat[layout.w(g)] {
            *p = rng.gen_range(-w_scale..w_scale);
        }
    }
    let h_scale = 1.0 / (layout.units as f64).sqrt();
    for p in &mut flat[layout.head_w()] {
        *p = rng.gen_range(-h_scale..h_scale);
    }

    let total = layout.total();
    let mut state = LstmState {
        layout,
        window: params.window,
        params: flat,
        adam_m: vec![0.0; total],
        adam_v: vec![0.0; total],
        adam_t: 0,
        exog_mean,
        exog_std,
        value_mean,
        value_std,
        epoch_losses: Vec::new(),
    };
    state.train(values, exog, params.epochs, params.learning_rate)?;
    Ok(state)
}

/// Mean and standard deviation of the clamp-at-1 log-differences, the
/// standardization constants for the value channel. A degenerate (constant)
/// series falls back to unit scale.
fn value_statistics(values: &[f64]) -> (f64, f64) {
    let clamped: Vec<f64> = values.iter().map(|v| v.max(1.0)).collect();
    let (diffs, _) = log_difference(&clamped).expect("clamped values are positive");
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

fn exog_statistics(m: &ExogenousMatrix) -> (Vec<f64>, Vec<f64>) {
    let k = ExogRow::FEATURE_NAMES.len();
    let n = m.len() as f64;
    let mut mean = vec![0.0; k];
    for row in m.rows() {
        for (acc, v) in mean.iter_mut().zip(row.as_features()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    let mut var = vec![0.0; k];
    for row in m.rows() {
        for ((acc, v), mu) in var.iter_mut().zip(row.as_features()).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    (mean, std)
}

impl LstmState {
    fn uses_exog(&self) -> bool {
        self.layout.input_dim > 1
    }

    fn standardize(&self, row: &ExogRow) -> Vec<f64> {
        row.as_features()
            .iter()
            .zip(&self.exog_mean)
            .zip(&self.exog_std)
            .map(|((v, mu), sd)| if *sd > 0.0 { (v - mu) / sd } else { 0.0 })
            .collect()
    }

    /// Clamp-at-1, log-difference, then standardize with the frozen value
    /// statistics; infallible for finite inputs.
    fn transform(&self, values: &[f64]) -> Vec<f64> {
        let clamped: Vec<f64> = values.iter().map(|v| v.max(1.0)).collect();
        let (transformed, _) = log_difference(&clamped).expect("clamped values are positive");
        transformed
            .into_iter()
            .map(|d| (d - self.value_mean) / self.value_std)
            .collect()
    }

    fn build_samples(&self, values: &[f64], exog: Option<&ExogenousMatrix>) -> Result<Vec<Sample>> {
        if self.uses_exog() != exog.is_some() {
            return Err(Error::Alignment(
                "exogenous matrix presence changed between fit and refit".into(),
            ));
        }
        if values.len() < self.window + 2 {
            return Err(Error::InsufficientData {
                required: self.window + 2,
                actual: values.len(),
            });
        }
        let transformed = self.transform(values);
        // transformed[k] describes week k+1; its covariates come from there.
        let inputs_at = |k: usize| -> Vec<f64> {
            let mut v = vec![transformed[k]];
            if let Some(m) = exog {
                v.extend(self.standardize(m.row(k + 1)));
            }
            v
        };
        Ok((0..transformed.len() - self.window)
            .map(|j| Sample {
                inputs: (j..j + self.window).map(inputs_at).collect(),
                target: transformed[j + self.window],
            })
            .collect())
    }

    fn train(
        &mut self,
        values: &[f64],
        exog: Option<&ExogenousMatrix>,
        epochs: usize,
        learning_rate: f64,
    ) -> Result<()> {
        let samples = self.build_samples(values, exog)?;
        let n = samples.len() as f64;
        for epoch in 1..=epochs {
            let mut grads = vec![0.0; self.layout.total()];
            let mut loss = 0.0;
            for sample in &samples {
                let (y_hat, caches, h_last) = self.forward(&sample.inputs);
                let e = y_hat - sample.target;
                loss += e * e;
                self.backward(&caches, &h_last, 2.0 * e / n, &mut grads);
            }
            loss /= n;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    learning_rate,
                });
            }
            self.epoch_losses.push(loss);
            clip_global_norm(&mut grads, GRAD_CLIP_NORM);
            self.adam_step(&grads, learning_rate);
        }
        Ok(())
    }

    /// Warm-started continuation: rebuilds samples from the new history and
    /// trains for `refit_epochs` more epochs from the current weights.
    pub fn warm_refit(
        &mut self,
        values: &[f64],
        exog: Option<&ExogenousMatrix>,
        params: &LstmParams,
    ) -> Result<()> {
        self.train(values, exog, params.refit_epochs, params.learning_rate)
    }

    fn forward(&self, inputs: &[Vec<f64>]) -> (f64, Vec<StepCache>, Vec<f64>) {
        let lay = self.layout;
        let units = lay.units;
        let z_len = lay.z_len();
        let p = &self.params;
        let mut h = vec![0.0; units];
        let mut c = vec![0.0; units];
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let mut z = Vec::with_capacity(z_len);
            z.extend_from_slice(&h);
            z.extend_from_slice(x);
            let act = |g: usize, u: usize| -> f64 {
                let w = &p[lay.w(g)];
                let row = &w[u * z_len..(u + 1) * z_len];
                p[lay.b(g)][u] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
            };
            let f: Vec<f64> = (0..units).map(|u| sigmoid(act(0, u))).collect();
            let i: Vec<f64> = (0..units).map(|u| sigmoid(act(1, u))).collect();
            let chat: Vec<f64> = (0..units).map(|u| act(2, u).tanh()).collect();
            let o: Vec<f64> = (0..units).map(|u| sigmoid(act(3, u))).collect();
            let c_prev = c.clone();
            c = (0..units).map(|u| f[u] * c_prev[u] + i[u] * chat[u]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            h = (0..units).map(|u| o[u] * tanh_c[u]).collect();
            caches.push(StepCache {
                z,
                f,
                i,
                chat,
                o,
                c_prev,
                tanh_c,
            });
        }
        let head_w = &p[lay.head_w()];
        let y_hat =
            p[lay.head_b()] + head_w.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        (y_hat, caches, h)
    }

    /// Accumulates `d(loss)/d(params)` into `grads` for one sample, given
    /// `dy = d(loss)/d(y_hat)`.
    fn backward(&self, caches: &[StepCache], h_last: &[f64], dy: f64, grads: &mut [f64]) {
        let lay = self.layout;
        let units = lay.units;
        let z_len = lay.z_len();
        let p = &self.params;

        for (u, h) in h_last.iter().enumerate() {
            grads[lay.head_w().start + u] += dy * h;
        }
        grads[lay.head_b()] += dy;

        let head_w = &p[lay.head_w()];
        let mut dh: Vec<f64> = head_w.iter().map(|w| dy * w).collect();
        let mut dc = vec![0.0; units];

        for cache in caches.iter().rev() {
            let mut da = [
                vec![0.0; units], // f
                vec![0.0; units], // i
                vec![0.0; units], // c (candidate)
                vec![0.0; units], // o
            ];
            for u in 0..units {
                let do_u = dh[u] * cache.tanh_c[u];
                let dc_u = dc[u] + dh[u] * cache.o[u] * (1.0 - cache.tanh_c[u] * cache.tanh_c[u]);
                let df_u = dc_u * cache.c_prev[u];
                let di_u = dc_u * cache.chat[u];
                let dchat_u = dc_u * cache.i[u];
                dc[u] = dc_u * cache.f[u]; // flows to the previous timestep
                da[0][u] = df_u * cache.f[u] * (1.0 - cache.f[u]);
                da[1][u] = di_u * cache.i[u] * (1.0 - cache.i[u]);
                da[2][u] = dchat_u * (1.0 - cache.chat[u] * cache.chat[u]);
                da[3][u] = do_u * cache.o[u] * (1.0 - cache.o[u]);
            }

            let mut dz = vec![0.0; z_len];
            for (g, da_g) in da.iter().enumerate() {
                let w_range = lay.w(g);
                let b_range = lay.b(g);
                let w = &p[w_range.clone()];
                for u in 0..units {
                    let a = da_g[u];
                    let row_base = w_range.start + u * z_len;
                    for (k, zv) in cache.z.iter().enumerate() {
                        grads[row_base + k] += a * zv;
                    }
                    grads[b_range.start + u] += a;
                    let row = &w[u * z_len..(u + 1) * z_len];
                    for (k, wv) in row.iter().enumerate() {
                        dz[k] += a * wv;
                    }
                }
            }
            dh.copy_from_slice(&dz[..units]);
        }
    }

    fn adam_step(&mut self, grads: &[f64], learning_rate: f64) {
        self.adam_t += 1;
        let t = self.adam_t as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for (((p, g), m), v) in self
            .params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.adam_m)
            .zip(&mut self.adam_v)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }

    /// Recursive `horizon`-step forecast on count scale.
    pub fn predict(
        &self,
        tail_values: &[f64],
        tail_exog: &[ExogRow],
        future: Option<&[ExogRow]>,
        horizon: usize,
    ) -> Result<Vec<f64>> {
        if tail_values.len() < self.window + 1 {
            return Err(Error::InsufficientData {
                required: self.window + 1,
                actual: tail_values.len(),
            });
        }
        if self.uses_exog() {
            if tail_exog.len() != tail_values.len() {
                return Err(Error::Alignment(format!(
                    "history has {} values but {} covariate rows",
                    tail_values.len(),
                    tail_exog.len()
                )));
            }
            if future.map_or(0, <[ExogRow]>::len) < horizon {
                return Err(Error::Alignment(format!(
                    "need {horizon} future covariate rows"
                )));
            }
        }

        let transformed = self.transform(tail_values);
        let m = transformed.len();
        // Inputs for the most recent `window` transformed values.
        let mut window_inputs: Vec<Vec<f64>> = (m - self.window..m)
            .map(|k| {
                let mut v = vec![transformed[k]];
                if self.uses_exog() {
                    v.extend(self.standardize(&tail_exog[k + 1]));
                }
                v
            })
            .collect();

        let mut ln_last = tail_values.last().expect("nonempty").max(1.0).ln();
        let mut out = Vec::with_capacity(horizon);
        for step in 0..horizon {
            let (d_hat, _, _) = self.forward(&window_inputs);
            ln_last += self.value_mean + self.value_std * d_hat;
            out.push(ln_last.exp());
            let mut next_input = vec![d_hat];
            if self.uses_exog() {
                next_input.extend(self.standardize(&future.expect("checked above")[step]));
            }
            window_inputs.remove(0);
            window_inputs.push(next_input);
        }
        Ok(out)
    }

    /// Weights in the public per-gate representation.
    pub fn weights(&self) -> LstmWeights {
        let lay = self.layout;
        LstmWeights {
            units: lay.units,
            input_dim: lay.input_dim,
            w_f: self.params[lay.w(0)].to_vec(),
            w_i: self.params[lay.w(1)].to_vec(),
            w_c: self.params[lay.w(2)].to_vec(),
            w_o: self.params[lay.w(3)].to_vec(),
            b_f: self.params[lay.b(0)].to_vec(),
            b_i: self.params[lay.b(1)].to_vec(),
            b_c: self.params[lay.b(2)].to_vec(),
            b_o: self.params[lay.b(3)].to_vec(),
        }
    }
}

fn clip_global_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
}
