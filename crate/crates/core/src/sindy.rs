//! Matrix-based identification: least squares on the dense basis matrix and
//! sequential hard thresholding.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, Truncation};

#[derive(Debug, Clone)]
pub struct SindyResult {
    /// Coefficients, features x outputs.
    pub xi: Mat<f64>,
    /// `|| Y - Xi^T psi ||_F`.
    pub residual: f64,
    /// `active_mask[j][i]`: feature `i` is used for output `j`.
    pub active_mask: Vec<Vec<bool>>,
    pub iterations: usize,
    /// Outputs whose support became empty (their coefficients are zero).
    pub empty_columns: Vec<usize>,
}

fn check(psi: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<()> {
    if psi.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "basis matrix has {} snapshots, data has {}",
            psi.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

/// `|| y - xi^T psi ||_F`.
pub fn residual(psi: MatRef<'_, f64>, y: MatRef<'_, f64>, xi: MatRef<'_, f64>) -> f64 {
    let fit = xi.transpose() * psi;
    (y - &fit).norm_l2()
}

/// Minimum-norm least-squares fit `Xi^T = Y psi^+`.
pub fn sindy_lstsq(psi: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<SindyResult> {
    check(psi, y)?;
    let (xi, _) = linalg::min_norm_solve(psi.transpose(), y.transpose(), Truncation::relative(0.0))?;
    let res = residual(psi, y, xi.as_ref());
    Ok(SindyResult {
        active_mask: vec![vec![true; psi.nrows()]; y.nrows()],
        xi,
        residual: res,
        iterations: 1,
        empty_columns: Vec::new(),
    })
}

fn fit_support(psi: MatRef<'_, f64>, target: MatRef<'_, f64>, support: &[usize]) -> Result<Vec<f64>> {
    let m = psi.ncols();
    let a = Mat::from_fn(m, support.len(), |r, c| psi[(support[c], r)]);
    let (x, _) = linalg::min_norm_solve(a.as_ref(), target, Truncation::relative(0.0))?;
    Ok((0..support.len()).map(|i| x[(i, 0)]).collect())
}

/// Sequential thresholding: fit, drop coefficients with `|xi| < lambda`,
/// refit each output on its surviving features, until the supports stop
/// changing or `max_iter` refits were done.
pub fn sindy_threshold(
    psi: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    lambda: f64,
    max_iter: usize,
    exec: Execution,
) -> Result<SindyResult> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {lambda} must be >= 0")));
    }
    let base = sindy_lstsq(psi, y)?;
    if lambda == 0.0 {
        return Ok(base);
    }
    let (n, d) = (psi.nrows(), y.nrows());
    let mut xi = base.xi;
    let mut mask: Vec<Vec<bool>> = (0..d)
        .map(|j| (0..n).map(|i| xi[(i, j)].abs() >= lambda).collect())
        .collect();
    let mut iterations = 1;
    while iterations <= max_iter {
        iterations += 1;
        let fits: Vec<Result<Option<Vec<f64>>>> = exec.map(d, |j| {
            let support: Vec<usize> = (0..n).filter(|&i| mask[j][i]).collect();
            if support.is_empty() {
                return Ok(None);
            }
            let target = y.get(j..j + 1, ..).transpose().to_owned();
            fit_support(psi, target.as_ref(), &support).map(Some)
        });
        let mut changed = false;
        for (j, fit) in fits.into_iter().enumerate() {
            let support: Vec<usize> = (0..n).filter(|&i| mask[j][i]).collect();
            for i in 0..n {
                xi[(i, j)] = 0.0;
            }
            if let Some(coef) = fit? {
                for (&i, &c) in support.iter().zip(&coef) {
                    if c.abs() >= lambda {
                        xi[(i, j)] = c;
                    } else {
                        mask[j][i] = false;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let empty_columns: Vec<usize> = (0..d).filter(|&j| mask[j].iter().all(|&b| !b)).collect();
    let res = residual(psi, y, xi.as_ref());
    Ok(SindyResult {
        xi,
        residual: res,
        active_mask: mask,
        iterations,
        empty_columns,
    })
}
