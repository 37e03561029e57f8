//! Sample autocorrelation and partial autocorrelation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::WeeklySeries;

/// Which correlogram a [`Correlogram`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelogramKind {
    Acf,
    Pacf,
}

/// Autocorrelation (or partial autocorrelation) values by lag.
///
/// `values[0]` is always `1.0` (lag zero); `values[k]` is the coefficient at
/// lag `k`. The confidence band is the two-sided 95% white-noise band
/// `1.96 / √n`, constant across lags.
#[derive(Debug, Clone, Serialize)]
pub struct Correlogram {
    pub kind: CorrelogramKind,
    pub values: Vec<f64>,
    pub confidence_band: f64,
}

impl Correlogram {
    /// Largest lag held (`values.len() - 1`).
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Whether the value at `lag` lies strictly outside the confidence band.
    pub fn outside_band(&self, lag: usize) -> bool {
        self.values[lag].abs() > self.confidence_band
    }
}

fn check_lag(n: usize, max_lag: usize, limit: usize) -> Result<()> {
    if max_lag == 0 || max_lag >= limit {
        return Err(Error::InvalidLag { max_lag, len: n });
    }
    Ok(())
}

/// Sample autocorrelation up to `max_lag`, using the biased (n-denominator)
/// estimator.
pub fn acf(series: &WeeklySeries, max_lag: usize) -> Result<Correlogram> {
    acf_values(&series.values(), max_lag)
}

/// [`acf`] on a raw slice.
pub fn acf_values(values: &[f64], max_lag: usize) -> Result<Correlogram> {
    let n = values.len();
    check_lag(n, max_lag, n)?;
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateRegression(
            "constant series has no autocorrelation structure".into(),
        ));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let num: f64 = (0..n - k)
            .map(|t| (values[t] - mean) * (values[t + k] - mean))
            .sum();
        out.push(num / denom);
    }
    Ok(Correlogram {
        kind: CorrelogramKind::Acf,
        values: out,
        confidence_band: 1.96 / (n as f64).sqrt(),
    })
}

/// Sample partial autocorrelation up to `max_lag`, via the Durbin–Levinson
/// recursion on the biased autocorrelation sequence.
pub fn pacf(series: &WeeklySeries, max_lag: usize) -> Result<Correlogram> {
    pacf_values(&series.values(), max_lag)
}

/// [`pacf`] on a raw slice.
pub fn pacf_values(values: &[f64], max_lag: usize) -> Result<Correlogram> {
    let n = values.len();
    check_lag(n, max_lag, n / 2)?;
    let r = acf_values(values, max_lag)?.values;

    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    // phi[j] holds the order-k AR coefficient for lag j+1.
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * r[j]).sum::<f64>();
        if den.abs() < 1e-12 {
            return Err(Error::DegenerateRegression(format!(
                "Durbin-Levinson recursion became singular at lag {k}"
            )));
        }
        let lambda = num / den;
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - lambda * prev[k - 1 - j];
        }
        phi.push(lambda);
        out.push(lambda);
    }
    Ok(Correlogram {
        kind: CorrelogramKind::Pacf,
        values: out,
        confidence_band: 1.96 / (n as f64).sqrt(),
    })
}

/// Suggests ARIMA orders `(p, q)` from a PACF/ACF pair computed on the same
/// series: `p` from where the PACF cuts off, `q` from where the ACF does.
///
/// A correlogram "cuts off" at the largest out-of-band lag preceding the first
/// run of three consecutive in-band lags. A correlogram with no such run (or
/// no out-of-band lag before it) contributes order 0.
pub fn suggest_orders(acf: &Correlogram, pacf: &Correlogram) -> (usize, usize) {
    (cutoff_order(pacf), cutoff_order(acf))
}

fn cutoff_order(c: &Correlogram) -> usize {
    let max_lag = c.max_lag();
    let inside = |lag: usize| !c.outside_band(lag);
    let run_start = (1..=max_lag.saturating_sub(2))
        .find(|&lag| inside(lag) && inside(lag + 1) && inside(lag + 2));
    match run_start {
        Some(start) => (1..start).rev().find(|&lag| c.outside_band(lag)).unwrap_or(0),
        None => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn acf_lag_one_by_hand() {
        // x = [1..5], mean 3: numerator Σ(x_t-3)(x_{t+1}-3) = 4, denominator 10.
        let c = acf_values(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert_relative_eq!(c.values[1], 0.4, epsilon = 1e-12);
        assert_relative_eq!(c.confidence_band, 1.96 / 5.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn acf_values_bounded_by_one() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin() * 5.0).collect();
        let c = acf_values(&xs, 40).unwrap();
        for v in &c.values {
            assert!(v.abs() <= 1.0 + 1e-12, "|acf| escaped [0,1]: {v}");
        }
    }

    #[test]
    fn pacf_lag_one_equals_acf_lag_one() {
        let xs: Vec<f64> = (0..150).map(|i| ((i * 13 % 47) as f64) * 0.3).collect();
        let a = acf_values(&xs, 10).unwrap();
        let p = pacf_values(&xs, 10).unwrap();
        assert_relative_eq!(a.values[1], p.values[1], epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_lags() {
        let xs = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert!(matches!(
            acf_values(&xs, 6),
            Err(Error::InvalidLag { max_lag: 6, len: 6 })
        ));
        assert!(matches!(acf_values(&xs, 0), Err(Error::InvalidLag { .. })));
        // PACF requires max_lag < n/2.
        assert!(matches!(pacf_values(&xs, 3), Err(Error::InvalidLag { .. })));
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(
            acf_values(&[4.0; 30], 5),
            Err(Error::DegenerateRegression(_))
        ));
    }

    #[test]
    fn cutoff_rules() {
        let band = 0.2;
        let gram = |vals: &[f64]| Correlogram {
            kind: CorrelogramKind::Acf,
            values: std::iter::once(1.0).chain(vals.iter().copied()).collect(),
            confidence_band: band,
        };
        // Clean cutoff after lag 2.
        let c = gram(&[0.7, 0.5, 0.1, 0.05, 0.02, 0.01, 0.0, 0.0]);
        assert_eq!(cutoff_order(&c), 2);
        // A lone in-band lag between significant ones does not end the scan.
        let c = gram(&[0.7, 0.1, 0.5, 0.1, 0.05, 0.02, 0.0, 0.0]);
        assert_eq!(cutoff_order(&c), 3);
        // Nothing significant at all.
        let c = gram(&[0.1, 0.05, 0.02, 0.01, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(cutoff_order(&c), 0);
        // No run of three in-band lags anywhere: treated as featureless.
        let c = gram(&[0.7, 0.6, 0.5, 0.4, 0.35, 0.3, 0.28, 0.25]);
        assert_eq!(cutoff_order(&c), 0);
    }
}
