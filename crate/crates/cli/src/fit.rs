//! Log-log least squares.

use chaoscope_core::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    pub points: usize,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Argument(format!("need ≥ 3 paired points, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Argument("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Argument("degenerate x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, ci95: 1.96 * se, points: lx.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let x = [8.0, 12.0, 16.0, 20.0];
        let inv: Vec<f64> = x.iter().map(|n| 3.0 / n).collect();
        let fit = fit_slope(&x, &inv).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.ci95 < 1e-6);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        let inv2: Vec<f64> = x.iter().map(|n| 1.0 / (n * n)).collect();
        assert!((fit_slope(&x, &inv2).unwrap().slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_slope(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
    }

    #[test]
    fn noisy_data_has_positive_interval() {
        let fit = fit_slope(&[1.0, 2.0, 4.0, 8.0], &[1.0, 0.6, 0.24, 0.13]).unwrap();
        assert!(fit.ci95 > 0.0 && fit.slope < 0.0);
    }
}
