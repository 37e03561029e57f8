//! Ordinary least squares on a dense design matrix, via QR.
//!
//! Shared by the ADF regression and the ARIMA conditional-least-squares fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A completed least-squares fit.
#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    /// Coefficients, one per design column.
    pub coef: Vec<f64>,
    /// Standard errors of the coefficients (unbiased residual variance).
    pub std_errors: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    /// Number of rows.
    pub n: usize,
    /// Number of columns (parameters).
    pub k: usize,
}

impl OlsFit {
    /// Unbiased residual variance `RSS / (n - k)`.
    pub fn sigma2(&self) -> f64 {
        self.rss / (self.n - self.k) as f64
    }
}

/// Fits `target ≈ design · coef` by QR least squares.
///
/// Returns a rank-deficiency error when a diagonal element of `R` collapses
/// relative to the largest one.
pub(crate) fn ols(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<OlsFit> {
    let n = design.nrows();
    let k = design.ncols();
    if n <= k {
        return Err(Error::InsufficientData {
            required: k + 1,
            actual: n,
        });
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    if max_diag == 0.0 {
        return Err(Error::RankDeficient("all-zero design matrix".into()));
    }
    for i in 0..k {
        if r[(i, i)].abs() < 1e-10 * max_diag {
            return Err(Error::RankDeficient(format!(
                "column {i} is (nearly) linearly dependent on the others"
            )));
        }
    }

    // coef = R⁻¹ Qᵀ y
    let qty = qr.q().transpose() * target;
    let coef_vec = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;

    let residuals = target - design * &coef_vec;
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = rss / (n - k) as f64;

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ; its diagonal entries are the squared row norms of R⁻¹.
    let identity = DMatrix::<f64>::identity(k, k);
    let r_inv = r
        .solve_upper_triangular(&identity)
        .ok_or_else(|| Error::RankDeficient("triangular inversion failed".into()))?;
    let std_errors = (0..k)
        .map(|i| {
            let row_sq: f64 = (0..k).map(|j| r_inv[(i, j)] * r_inv[(i, j)]).sum();
            (sigma2 * row_sq).sqrt()
        })
        .collect();

    Ok(OlsFit {
        coef: coef_vec.iter().copied().collect(),
        std_errors,
        rss,
        n,
        k,
    })
}
