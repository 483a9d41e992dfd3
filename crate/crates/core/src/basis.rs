//! Function dictionaries and the basis tensors built from snapshot data.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tt::{Core, TensorTrain};

/// Scalar basis function `R -> R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFunction {
    Constant,
    Monomial { power: u32 },
    Sine,
    Cosine,
    Absolute,
    XAbsX,
}

impl BasisFunction {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BasisFunction::Constant => 1.0,
            BasisFunction::Monomial { power } => x.powi(power as i32),
            BasisFunction::Sine => x.sin(),
            BasisFunction::Cosine => x.cos(),
            BasisFunction::Absolute => x.abs(),
            BasisFunction::XAbsX => x * x.abs(),
        }
    }

    pub fn label(&self, var: &str) -> String {
        match *self {
            BasisFunction::Constant => "1".into(),
            BasisFunction::Monomial { power: 0 } => "1".into(),
            BasisFunction::Monomial { power: 1 } => var.into(),
            BasisFunction::Monomial { power } => format!("{var}^{power}"),
            BasisFunction::Sine => format!("sin({var})"),
            BasisFunction::Cosine => format!("cos({var})"),
            BasisFunction::Absolute => format!("|{var}|"),
            BasisFunction::XAbsX => format!("{var}|{var}|"),
        }
    }
}

/// How the rank-one feature tensor is split across cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One core per coordinate, each holding all functions of that coordinate.
    CoordinateMajor,
    /// One core per function, each holding that function over all coordinates.
    FunctionMajor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dictionary {
    pub functions: Vec<BasisFunction>,
    pub layout: Layout,
    /// Function-major only: every core vector gets a leading 1.
    #[serde(default)]
    pub prepend_constant: bool,
}

impl Dictionary {
    pub fn new(functions: Vec<BasisFunction>, layout: Layout, prepend_constant: bool) -> Result<Self> {
        let dict = Self {
            functions,
            layout,
            prepend_constant,
        };
        dict.validate()?;
        Ok(dict)
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::InvalidArgument("dictionary needs at least one function".into()));
        }
        if self.prepend_constant && self.layout == Layout::CoordinateMajor {
            return Err(Error::InvalidArgument(
                "prepend_constant only applies to the function-major layout".into(),
            ));
        }
        Ok(())
    }

    /// `{1, x, .., x^degree}`, coordinate-major.
    pub fn monomials(degree: u32) -> Self {
        Self {
            functions: (0..=degree).map(|power| BasisFunction::Monomial { power }).collect(),
            layout: Layout::CoordinateMajor,
            prepend_constant: false,
        }
    }

    /// `{x, |x|}`, function-major with a leading constant.
    pub fn abs_pair() -> Self {
        Self {
            functions: vec![BasisFunction::Monomial { power: 1 }, BasisFunction::Absolute],
            layout: Layout::FunctionMajor,
            prepend_constant: true,
        }
    }

    /// `{sin, cos}`, function-major with a leading constant.
    pub fn trig_pair() -> Self {
        Self {
            functions: vec![BasisFunction::Sine, BasisFunction::Cosine],
            layout: Layout::FunctionMajor,
            prepend_constant: true,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "chua-monomial" => Some(Self::monomials(2)),
            "chua-abs" => Some(Self::abs_pair()),
            "fpu-cubic" => Some(Self::monomials(3)),
            "kuramoto-trig" => Some(Self::trig_pair()),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Mode sizes of the feature tensor for state dimension `d`.
    pub fn mode_sizes(&self, d: usize) -> Vec<usize> {
        match self.layout {
            Layout::CoordinateMajor => vec![self.len(); d],
            Layout::FunctionMajor => vec![d + usize::from(self.prepend_constant); self.len()],
        }
    }

    /// Total number of product features, saturating on overflow.
    pub fn feature_count(&self, d: usize) -> usize {
        self.mode_sizes(d)
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX)
    }

    /// Per-core vectors whose outer product is the feature tensor of `x`.
    pub fn rank_one(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.layout {
            Layout::CoordinateMajor => eval_rank_one_cm(self, x),
            Layout::FunctionMajor => eval_rank_one_fm(self, x),
        }
    }

    /// Writes the vector of core `core` for state `x` into `out`.
    fn fill_core_vector(&self, core: usize, x: &[f64], out: &mut [f64]) {
        match self.layout {
            Layout::CoordinateMajor => {
                for (o, f) in out.iter_mut().zip(&self.functions) {
                    *o = f.eval(x[core]);
                }
            }
            Layout::FunctionMajor => {
                let f = self.functions[core];
                let off = usize::from(self.prepend_constant);
                if self.prepend_constant {
                    out[0] = 1.0;
                }
                for (o, &xi) in out[off..].iter_mut().zip(x) {
                    *o = f.eval(xi);
                }
            }
        }
    }

    /// Dense feature vector of `x` (first core index fastest).
    pub fn feature_vector(&self, x: &[f64]) -> Vec<f64> {
        kron_chain(&self.rank_one(x))
    }

    /// Human-readable feature names in enumeration order.
    pub fn feature_labels(&self, d: usize) -> Vec<String> {
        let per_core: Vec<Vec<String>> = match self.layout {
            Layout::CoordinateMajor => (0..d)
                .map(|i| {
                    self.functions
                        .iter()
                        .map(|f| f.label(&format!("x{}", i + 1)))
                        .collect()
                })
                .collect(),
            Layout::FunctionMajor => self
                .functions
                .iter()
                .map(|f| {
                    let mut v: Vec<String> = Vec::new();
                    if self.prepend_constant {
                        v.push("1".into());
                    }
                    v.extend((0..d).map(|i| f.label(&format!("x{}", i + 1))));
                    v
                })
                .collect(),
        };
        let mut labels = vec![String::new()];
        for core in per_core {
            let mut next = Vec::with_capacity(labels.len() * core.len());
            for name in &core {
                for prev in &labels {
                    next.push(join_factor(prev, name));
                }
            }
            labels = next;
        }
        labels
    }
}

fn join_factor(prev: &str, name: &str) -> String {
    match (prev, name) {
        ("", n) => n.to_string(),
        ("1", n) => n.to_string(),
        (p, "1") => p.to_string(),
        (p, n) => format!("{p}*{n}"),
    }
}

/// Coordinate-major rank-one factors: `d` vectors of length `p`.
pub fn eval_rank_one_cm(dict: &Dictionary, x: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|&xi| dict.functions.iter().map(|f| f.eval(xi)).collect())
        .collect()
}

/// Function-major rank-one factors: `p` vectors of length `d` (or `d + 1`).
pub fn eval_rank_one_fm(dict: &Dictionary, x: &[f64]) -> Vec<Vec<f64>> {
    dict.functions
        .iter()
        .map(|f| {
            let mut v = Vec::with_capacity(x.len() + 1);
            if dict.prepend_constant {
                v.push(1.0);
            }
            v.extend(x.iter().map(|&xi| f.eval(xi)));
            v
        })
        .collect()
}

/// Kronecker product of the vectors with the first one varying fastest.
pub fn kron_chain(vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(out.len() * v.len());
        for &vx in v {
            next.extend(out.iter().map(|o| o * vx));
        }
        out = next;
    }
    out
}

/// Dense basis matrix (features x m) for snapshots `x` (d x m).
pub fn build_basis_matrix(dict: &Dictionary, x: MatRef<'_, f64>, cap: usize, exec: Execution) -> Result<Mat<f64>> {
    let (d, m) = (x.nrows(), x.ncols());
    let rows = dict.feature_count(d);
    if rows.saturating_mul(m) > cap {
        return Err(Error::SizeCapExceeded {
            requested: rows.saturating_mul(m),
            cap,
        });
    }
    let mut data = vec![0.0; rows * m];
    exec.for_each_chunk(&mut data, rows, |k, col| {
        let state: Vec<f64> = x.col(k).iter().copied().collect();
        col.copy_from_slice(&dict.feature_vector(&state));
    });
    Ok(crate::linalg::view(&data, rows, m).to_owned())
}

/// Basis tensor of a snapshot set in TT form.
///
/// Core `i` is stored through its factor `F_i` (`n_i x m`, column `k` is the
/// core vector of snapshot `k`): the first core is `F_1` as `1 x n_1 x m`,
/// interior cores are block diagonal with the columns of `F_i` on the
/// diagonal, and the last core is the `m x m` identity.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTensorTT {
    factors: Vec<Vec<f64>>,
    modes: Vec<usize>,
    m: usize,
}

impl BasisTensorTT {
    pub fn build(dict: &Dictionary, x: MatRef<'_, f64>, exec: Execution) -> Result<Self> {
        dict.validate()?;
        let (d, m) = (x.nrows(), x.ncols());
        if m == 0 || d == 0 {
            return Err(Error::InvalidArgument("snapshot matrix must be non-empty".into()));
        }
        let modes = dict.mode_sizes(d);
        let factors = modes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let mut f = vec![0.0; n * m];
                exec.for_each_chunk(&mut f, n, |k, col| {
                    let state: Vec<f64> = x.col(k).iter().copied().collect();
                    dict.fill_core_vector(i, &state, col);
                });
                f
            })
            .collect();
        Ok(Self { factors, modes, m })
    }

    pub fn snapshots(&self) -> usize {
        self.m
    }

    /// Feature-mode sizes `n_1..n_D` (the sample mode `m` excluded).
    pub fn feature_modes(&self) -> &[usize] {
        &self.modes
    }

    /// Mode sizes including the trailing sample mode.
    pub fn mode_sizes(&self) -> Vec<usize> {
        let mut v = self.modes.clone();
        v.push(self.m);
        v
    }

    /// All interior ranks (equal to `m` by construction).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(std::iter::repeat_n(self.m, self.modes.len()));
        r.push(1);
        r
    }

    /// Factor `F_i` as a column-major `n_i x m` matrix.
    pub fn factor(&self, i: usize) -> MatRef<'_, f64> {
        crate::linalg::view(&self.factors[i], self.modes[i], self.m)
    }

    /// Stored entries: every factor plus the `m` diagonal entries of the
    /// identity core.
    pub fn nnz_count(&self) -> usize {
        self.factors.iter().map(Vec::len).sum::<usize>() + self.m
    }

    /// Entries of the dense matricization (`prod n_i * m`), saturating.
    pub fn dense_count(&self) -> usize {
        self.mode_sizes()
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX)
    }

    /// Expands the block-diagonal cores into an ordinary tensor train.
    /// Storage grows to `O(D n m^2)`, so this is meant for small inputs.
    pub fn to_tensor_train(&self) -> Result<TensorTrain> {
        let m = self.m;
        let mut cores = Vec::with_capacity(self.modes.len() + 1);
        for (i, &n) in self.modes.iter().enumerate() {
            let f = &self.factors[i];
            let core = if i == 0 {
                Core::new(1, n, m, f.clone())?
            } else {
                Core::from_fn(m, n, m, |a, x, b| if a == b { f[x + n * a] } else { 0.0 })
            };
            cores.push(core);
        }
        cores.push(Core::from_fn(m, m, 1, |a, x, _| if a == x { 1.0 } else { 0.0 }));
        TensorTrain::new(cores)
    }
}
