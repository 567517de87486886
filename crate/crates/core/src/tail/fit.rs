use crate::error::{Error, Result};

/// Straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_slope: f64,
    /// Root-mean-square residual (weighted when weights are given).
    pub rms_residual: f64,
}

/// Weighted least squares with intercept.
///
/// With `weights = Some(w)` the weights are taken as inverse variances and
/// `se_slope = sqrt(1 / Sxx_w)`. Without weights the fit is ordinary least
/// squares and the slope error uses the residual variance.
pub(crate) fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::invalid("fit inputs differ in length"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two points to fit a line"));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    let xbar = (0..n).map(|i| w(i) * x[i]).sum::<f64>() / sw;
    let ybar = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (x[i] - xbar).powi(2)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(Error::invalid("singular fit: regressor has no spread"));
    }
    let sxy: f64 = (0..n).map(|i| w(i) * (x[i] - xbar) * (y[i] - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = (0..n)
        .map(|i| w(i) * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let se_slope = match weights {
        Some(_) => (1.0 / sxx).sqrt(),
        None if n > 2 => (rss / (n - 2) as f64 / sxx).sqrt(),
        None => 0.0,
    };
    Ok(LineFit {
        intercept,
        slope,
        se_slope,
        rms_residual: (rss / sw).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let f = fit_line(&x, &y, None).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 0.5).abs() < 1e-14);
        assert!(f.se_slope < 1e-12);
        let f = fit_line(&x, &y, Some(&[1.0, 4.0, 2.0, 9.0])).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
    }

    #[test]
    fn weights_pull_towards_precise_points() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 2.0, 1.0];
        let w = [1.0, 1.0, 4.0];
        let f = fit_line(&x, &y, Some(&w)).unwrap();
        // by hand: xbar = 1.5, ybar = 1, Sxx = 3.5, Sxy = 1.5 - 0.5 + 0 = 1
        assert!((f.slope - 1.0 / 3.5).abs() < 1e-14);
        assert!((f.se_slope - (1.0f64 / 3.5).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn singular_and_short_inputs_rejected() {
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None).is_err());
        assert!(fit_line(&[1.0], &[1.0], None).is_err());
        assert!(fit_line(&[1.0, 2.0], &[1.0], None).is_err());
    }
}
