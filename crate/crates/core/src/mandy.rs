//! Tensor-based identification and evaluation of recovered models.

use std::time::Instant;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis_matrix, BasisTensorTT, Dictionary};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pinv::pinv_basis;
use crate::sindy::{sindy_threshold, SindyResult};
use crate::tt::{DenseTensor, TensorTrain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sindy,
    Mandy,
    Exact,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sindy => "sindy",
            Method::Mandy => "mandy",
            Method::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub method: Method,
    pub epsilon: f64,
    pub m: usize,
    pub d: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// Features x outputs.
    Dense(Mat<f64>),
    /// Feature modes followed by the output mode.
    Tt(TensorTrain),
}

/// A recovered (or exact) model `x' = Xi^T psi(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    pub coefficients: Coefficients,
    pub dictionary: Dictionary,
    pub meta: FitMeta,
}

impl CoefficientTensor {
    pub fn exact(tt: TensorTrain, dictionary: Dictionary) -> Self {
        let d = *tt.mode_sizes().last().expect("non-empty train");
        Self {
            coefficients: Coefficients::Tt(tt),
            dictionary,
            meta: FitMeta {
                method: Method::Exact,
                epsilon: 0.0,
                m: 0,
                d,
                wall_time: 0.0,
            },
        }
    }

    /// Number of outputs.
    pub fn outputs(&self) -> usize {
        match &self.coefficients {
            Coefficients::Dense(xi) => xi.ncols(),
            Coefficients::Tt(t) => *t.mode_sizes().last().expect("non-empty train"),
        }
    }

    /// State dimension the dictionary is applied to.
    pub fn state_dim(&self) -> usize {
        self.meta.d
    }

    /// Feature-mode sizes (output mode excluded).
    pub fn feature_modes(&self) -> Vec<usize> {
        self.dictionary.mode_sizes(self.state_dim())
    }

    pub fn storage(&self) -> usize {
        match &self.coefficients {
            Coefficients::Dense(xi) => xi.nrows() * xi.ncols(),
            Coefficients::Tt(t) => t.storage(),
        }
    }

    pub fn evaluate_rhs(&self, x: &[f64]) -> Vec<f64> {
        match &self.coefficients {
            Coefficients::Dense(xi) => {
                let f = self.dictionary.feature_vector(x);
                (0..xi.ncols())
                    .map(|j| xi.col(j).iter().zip(&f).map(|(a, b)| a * b).sum())
                    .collect()
            }
            Coefficients::Tt(t) => {
                let vectors = self.dictionary.rank_one(x);
                let cores = t.cores();
                let mut row = vec![1.0];
                for (core, v) in cores.iter().zip(&vectors) {
                    let (r0, n, r1) = core.shape();
                    let mut next = vec![0.0; r1];
                    for (b, nb) in next.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (xi, &vx) in v.iter().enumerate() {
                            if vx == 0.0 {
                                continue;
                            }
                            let base = r0 * (xi + n * b);
                            let dot: f64 = core.data()[base..base + r0].iter().zip(&row).map(|(c, r)| c * r).sum();
                            acc += vx * dot;
                        }
                        *nb = acc;
                    }
                    row = next;
                }
                let last = &cores[cores.len() - 1];
                (0..last.mode())
                    .map(|j| (0..last.rank_left()).map(|a| row[a] * last.get(a, j, 0)).sum())
                    .collect()
            }
        }
    }

    /// Evaluates the model at every column of `states` (`d x S`); returns
    /// `outputs x S`. Contractions run as matrix products over all states.
    pub fn evaluate_batch(&self, states: MatRef<'_, f64>) -> Mat<f64> {
        let s = states.ncols();
        let cols: Vec<Vec<f64>> = (0..s).map(|k| states.col(k).iter().copied().collect()).collect();
        match &self.coefficients {
            Coefficients::Dense(xi) => {
                let n = xi.nrows();
                let mut feats = Mat::<f64>::zeros(n, s);
                for (k, c) in cols.iter().enumerate() {
                    for (i, v) in self.dictionary.feature_vector(c).into_iter().enumerate() {
                        feats[(i, k)] = v;
                    }
                }
                xi.transpose() * &feats
            }
            Coefficients::Tt(t) => {
                let vectors: Vec<Vec<Vec<f64>>> = cols.iter().map(|c| self.dictionary.rank_one(c)).collect();
                let cores = t.cores();
                let mut w = Mat::<f64>::from_fn(s, 1, |_, _| 1.0);
                for (i, core) in cores[..cores.len() - 1].iter().enumerate() {
                    let (_, n, r1) = core.shape();
                    let p = &w * core.right_view();
                    w = Mat::from_fn(s, r1, |k, b| {
                        let v = &vectors[k][i];
                        (0..n).map(|x| v[x] * p[(k, x + n * b)]).sum()
                    });
                }
                let last = &cores[cores.len() - 1];
                let out = &w * last.right_view();
                out.transpose().to_owned()
            }
        }
    }

    /// The coefficients as a tensor train (dense coefficients are converted
    /// exactly).
    pub fn to_tt(&self) -> Result<TensorTrain> {
        match &self.coefficients {
            Coefficients::Tt(t) => Ok(t.clone()),
            Coefficients::Dense(xi) => {
                let mut shape = self.feature_modes();
                shape.push(xi.ncols());
                let dense = DenseTensor::new(shape, crate::linalg::to_col_major(xi.as_ref()))?;
                TensorTrain::from_full(&dense, 0.0)
            }
        }
    }

    /// Dense `features x outputs` matrix, subject to `cap` entries.
    pub fn to_dense(&self, cap: usize) -> Result<Mat<f64>> {
        match &self.coefficients {
            Coefficients::Dense(xi) => Ok(xi.clone()),
            Coefficients::Tt(t) => {
                let full = t.to_full_with_cap(cap)?;
                let d = self.outputs();
                let n = full.data().len() / d;
                Ok(crate::linalg::view(full.data(), n, d).to_owned())
            }
        }
    }
}

/// `||a - b||_F / ||b||_F`.
pub fn relative_error(a: &CoefficientTensor, b: &CoefficientTensor) -> Result<f64> {
    let (ma, mb) = (a.feature_modes(), b.feature_modes());
    if ma != mb || a.outputs() != b.outputs() {
        let mut left = ma;
        left.push(a.outputs());
        let mut right = mb;
        right.push(b.outputs());
        return Err(Error::ModeMismatch { left, right });
    }
    if let (Coefficients::Dense(x), Coefficients::Dense(y)) = (&a.coefficients, &b.coefficients) {
        return Ok((x - y).norm_l2() / y.norm_l2());
    }
    let ta = a.to_tt()?;
    let tb = b.to_tt()?;
    Ok(ta.sub(&tb)?.norm() / tb.norm())
}

/// Tensor-based fit: basis tensor, pseudoinverse, contraction with `y`.
/// The reported wall time covers all three steps.
pub fn mandy_identify(
    x: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    dict: &Dictionary,
    epsilon: f64,
    exec: Execution,
) -> Result<CoefficientTensor> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "states are {}x{}, derivatives {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let start = Instant::now();
    let basis = BasisTensorTT::build(dict, x, exec)?;
    let pinv = pinv_basis(&basis, epsilon, exec)?;
    drop(basis);
    let xi = pinv.apply_left(y)?;
    Ok(CoefficientTensor {
        coefficients: Coefficients::Tt(xi),
        dictionary: dict.clone(),
        meta: FitMeta {
            method: Method::Mandy,
            epsilon,
            m: x.ncols(),
            d: x.nrows(),
            wall_time: start.elapsed().as_secs_f64(),
        },
    })
}

/// Matrix-based fit on the dense basis matrix. The reported wall time covers
/// only the solve, not the construction of the basis matrix.
pub fn sindy_identify(
    x: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    dict: &Dictionary,
    lambda: f64,
    cap: usize,
    exec: Execution,
) -> Result<(CoefficientTensor, SindyResult)> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch("states and derivatives differ in shape".into()));
    }
    let psi = build_basis_matrix(dict, x, cap, exec)?;
    let start = Instant::now();
    let fit = sindy_threshold(psi.as_ref(), y, lambda, 25, exec)?;
    let wall_time = start.elapsed().as_secs_f64();
    let tensor = CoefficientTensor {
        coefficients: Coefficients::Dense(fit.xi.clone()),
        dictionary: dict.clone(),
        meta: FitMeta {
            method: Method::Sindy,
            epsilon: lambda,
            m: x.ncols(),
            d: x.nrows(),
            wall_time,
        },
    };
    Ok((tensor, fit))
}
