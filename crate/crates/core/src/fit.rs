//! Least-squares line fits for scaling studies.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; zero for a two-point fit.
    pub slope_stderr: f64,
}

/// Ordinary least squares fit of `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "fit inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::OutOfRange("fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(Error::OutOfRange("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let slope_stderr = if x.len() > 2 {
        let ss_resid = (syy - slope * sxy).max(0.0);
        (ss_resid / (x.len() as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, r2, slope_stderr })
}
