//! Adaptive Dormand–Prince 5(4) integrator.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the grid spacing when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h0: None,
            max_steps: 50_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `x' = f(t, x)` from `times[0]` and returns the state at every
/// entry of `times` (non-decreasing). The first returned state is `x0`.
pub fn integrate<F>(mut f: F, x0: &[f64], times: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailure {
            t: times[0],
            reason: "non-finite initial state".into(),
        });
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be non-decreasing".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    out.push(x0.to_vec());

    let mut t = times[0];
    let mut x = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut xnew = vec![0.0; n];
    f(t, &x, &mut k[0]);
    let span = times[times.len() - 1] - t;
    let mut h = opts.h0.unwrap_or_else(|| {
        let grid = if times.len() > 1 { times[1] - times[0] } else { span };
        (grid * 0.1).max(1e-6)
    });
    let mut steps = 0usize;

    for &target in &times[1..] {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::StepFailure {
                    t,
                    reason: "step budget exhausted".into(),
                });
            }
            steps += 1;
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = x[i];
                    for j in 0..s {
                        acc += step * A[s][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * step, &tmp, &mut k[s]);
            }
            // k[6] was evaluated at the 5th-order solution, which equals tmp
            xnew.copy_from_slice(&tmp);
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                let sc = opts.atol + opts.rtol * x[i].abs().max(xnew[i].abs());
                err += (step * e / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() || xnew.iter().any(|v| !v.is_finite()) {
                h = step * 0.25;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepFailure {
                        t,
                        reason: "non-finite state".into(),
                    });
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                x.copy_from_slice(&xnew);
                k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * grow;
                } else {
                    h = h.max(step * grow);
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.2);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepFailure {
                        t,
                        reason: "step size underflow".into(),
                    });
                }
            }
        }
        out.push(x.clone());
    }
    Ok(out)
}
