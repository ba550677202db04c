use crate::error::{Error, Result};

/// Denominator floor of [`relative_error`], so components whose analytic
/// and numeric values are both ~0 compare by absolute difference.
pub const REL_ERR_FLOOR: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` against central differences
/// `(f(θ + ε·e_i) − f(θ − ε·e_i)) / 2ε` for every coordinate of `theta`.
pub fn gradcheck(
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
    theta: &[f64],
    analytic: &[f64],
    epsilon: f64,
) -> Result<GradcheckReport> {
    if theta.len() != analytic.len() {
        return Err(Error::Gradcheck(format!(
            "{} parameters but {} gradient entries",
            theta.len(),
            analytic.len()
        )));
    }
    if theta.len() > 10_000 {
        return Err(Error::Gradcheck(format!(
            "{} parameters is too many for finite differencing",
            theta.len()
        )));
    }
    let mut probe = theta.to_vec();
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..theta.len() {
        probe[i] = theta[i] + epsilon;
        let up = loss(&probe)?;
        probe[i] = theta[i] - epsilon;
        let down = loss(&probe)?;
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Gradcheck(format!("non-finite loss probing coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_err || i == 0 {
            report = GradcheckReport {
                max_rel_err: err,
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    Ok(report)
}
