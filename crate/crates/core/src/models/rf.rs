//! Random-forest regression on lagged features.
//!
//! Each tree trains on a bootstrap resample; each split draws a random
//! feature subset and minimizes the summed within-child squared deviation.
//! Per-tree RNGs are derived from the master seed plus the tree index, so a
//! parallel build is bit-identical to a serial one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::RfParams;
use crate::error::{Error, Result};
use crate::features::{build_lag_matrix, ExogRow, ExogenousMatrix, LagMatrix};

#[derive(Debug, Clone)]
pub(crate) enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// A single fitted regression tree.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    pub(super) root: TreeNode,
}

impl RegressionTree {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if features[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// A fitted forest: prediction is the mean over trees.
#[derive(Debug, Clone)]
pub struct Forest {
    pub(super) trees: Vec<RegressionTree>,
    pub feature_count: usize,
}

impl Forest {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        sum / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Fitted RF state for the forecasting interface.
#[derive(Debug, Clone)]
pub(crate) struct RfState {
    pub forest: Forest,
    pub lag_count: usize,
    pub uses_exog: bool,
}

pub(super) fn fit_state(
    values: &[f64],
    params: &RfParams,
    exog: Option<&ExogenousMatrix>,
    seed: u64,
) -> Result<RfState> {
    let lagmat = build_lag_matrix(values, params.lag_count, exog)?;
    let forest = rf_fit(&lagmat, params, seed)?;
    Ok(RfState {
        forest,
        lag_count: params.lag_count,
        uses_exog: exog.is_some(),
    })
}

impl RfState {
    /// One-step forecast from the working history's most recent lags.
    pub fn predict_next(&self, history: &[f64], exog_row: Option<&ExogRow>) -> Result<f64> {
        if history.len() < self.lag_count {
            return Err(Error::InsufficientData {
                required: self.lag_count,
                actual: history.len(),
            });
        }
        let mut features: Vec<f64> = (1..=self.lag_count)
            .map(|l| history[history.len() - l])
            .collect();
        match (self.uses_exog, exog_row) {
            (true, Some(row)) => features.extend(row.as_features()),
            (true, None) => {
                return Err(Error::Alignment(
                    "RF model was fitted with covariates but none were supplied".into(),
                ))
            }
            (false, _) => {}
        }
        Ok(self.forest.predict(&features))
    }
}

/// Fits a forest of `params.n_trees` trees on the supervised rows of
/// `lagmat`. Trees may build in parallel; results are independent of thread
/// count because every tree owns a seed derived as `seed + tree index`.
pub fn rf_fit(lagmat: &LagMatrix, params: &RfParams, seed: u64) -> Result<Forest> {
    let rows: Vec<(Vec<f64>, f64)> = (0..lagmat.rows.len())
        .map(|i| (lagmat.features(i), lagmat.rows[i].target))
        .collect();
    if rows.len() < 2 * params.min_samples_leaf {
        return Err(Error::InsufficientData {
            required: 2 * params.min_samples_leaf,
            actual: rows.len(),
        });
    }
    let trees: Result<Vec<RegressionTree>> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let sample = bootstrap(&rows, &mut rng);
            tree_build(&sample, params, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees: trees?,
        feature_count: lagmat.feature_count(),
    })
}

fn bootstrap(rows: &[(Vec<f64>, f64)], rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, f64)> {
    use rand::Rng;
    (0..rows.len())
        .map(|_| rows[rng.gen_range(0..rows.len())].clone())
        .collect()
}

/// Builds one regression tree on `rows` (already bootstrapped by the
/// caller). Split candidates draw `ceil(sqrt(F))` features without
/// replacement (or all features, per `max_features`).
pub fn tree_build(
    rows: &[(Vec<f64>, f64)],
    params: &RfParams,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::InsufficientData {
            required: 1,
            actual: 0,
        });
    }
    let indices: Vec<usize> = (0..rows.len()).collect();
    let root = build_node(rows, indices, params, rng);
    Ok(RegressionTree { root })
}

fn leaf(rows: &[(Vec<f64>, f64)], idxs: &[usize]) -> TreeNode {
    let mean = idxs.iter().map(|&i| rows[i].1).sum::<f64>() / idxs.len() as f64;
    TreeNode::Leaf { value: mean }
}

fn build_node(
    rows: &[(Vec<f64>, f64)],
    idxs: Vec<usize>,
    params: &RfParams,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let n = idxs.len();
    let targets_constant = idxs
        .iter()
        .all(|&i| rows[i].1 == rows[idxs[0]].1);
    if n < 2 * params.min_samples_leaf || targets_constant {
        return leaf(rows, &idxs);
    }

    let n_features = rows[0].0.len();
    let m = match params.max_features {
        super::MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
        super::MaxFeatures::All => n_features,
    };
    let candidates = rand::seq::index::sample(rng, n_features, m.min(n_features));

    // Best split = smallest summed within-child squared deviation; the first
    // candidate achieving a score wins ties, which keeps the build
    // deterministic for a given RNG stream.
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in candidates.iter() {
        let mut pairs: Vec<(f64, f64)> = idxs
            .iter()
            .map(|&i| (rows[i].0[feature], rows[i].1))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
        let total_ssq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
        let mut left_sum = 0.0;
        let mut left_ssq = 0.0;
        for s in 1..n {
            left_sum += pairs[s - 1].1;
            left_ssq += pairs[s - 1].1 * pairs[s - 1].1;
            if pairs[s - 1].0 == pairs[s].0 {
                continue; // no threshold separates equal feature values
            }
            if s < params.min_samples_leaf || n - s < params.min_samples_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_ssq = total_ssq - left_ssq;
            let score = (left_ssq - left_sum * left_sum / s as f64)
                + (right_ssq - right_sum * right_sum / (n - s) as f64);
            if best.map_or(true, |(b, _, _)| score < b) {
                best = Some((score, feature, (pairs[s - 1].0 + pairs[s].0) / 2.0));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        // Every candidate feature was constant within this node.
        return leaf(rows, &idxs);
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idxs
        .into_iter()
        .partition(|&i| rows[i].0[feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(build_node(rows, left_idx, params, rng)),
        right: Box::new(build_node(rows, right_idx, params, rng)),
    }
}
