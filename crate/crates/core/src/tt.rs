//! Tensor trains and their core algebra.
//!
//! A tensor `T` of order `d` with mode sizes `n_1..n_d` is stored as `d`
//! order-3 cores, core `i` of shape `(r_{i-1}, n_i, r_i)` with `r_0 = r_d = 1`:
//!
//! ```text
//! T[j_1, .., j_d] = sum_{k} C1[1, j_1, k_1] C2[k_1, j_2, k_2] .. Cd[k_{d-1}, j_d, 1]
//! ```
//!
//! Index convention: multi-indices are flattened with the *first* index
//! running fastest everywhere (cores, dense tensors, matricizations). Core
//! data is therefore laid out so that the left unfolding `(r_{i-1} n_i) x r_i`
//! and the right unfolding `r_{i-1} x (n_i r_i)` are both plain column-major
//! views of the same buffer.

use faer::{Mat, MatRef};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Truncation};

/// Default cap on the number of entries a densification may produce.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

/// Flattening order of multi-indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexOrder {
    /// First index varies fastest.
    Colexicographic,
}

/// One order-3 TT core.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    rank_left: usize,
    mode: usize,
    rank_right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(rank_left: usize, mode: usize, rank_right: usize, data: Vec<f64>) -> Result<Self> {
        if rank_left == 0 || mode == 0 || rank_right == 0 {
            return Err(Error::InvalidArgument(format!(
                "core shape ({rank_left}, {mode}, {rank_right}) has a zero extent"
            )));
        }
        if data.len() != rank_left * mode * rank_right {
            return Err(Error::ShapeMismatch(format!(
                "core ({rank_left}, {mode}, {rank_right}) needs {} entries, got {}",
                rank_left * mode * rank_right,
                data.len()
            )));
        }
        Ok(Self {
            rank_left,
            mode,
            rank_right,
            data,
        })
    }

    pub fn zeros(rank_left: usize, mode: usize, rank_right: usize) -> Self {
        Self {
            rank_left,
            mode,
            rank_right,
            data: vec![0.0; rank_left * mode * rank_right],
        }
    }

    pub fn from_fn(
        rank_left: usize,
        mode: usize,
        rank_right: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(rank_left * mode * rank_right);
        for b in 0..rank_right {
            for x in 0..mode {
                for a in 0..rank_left {
                    data.push(f(a, x, b));
                }
            }
        }
        Self {
            rank_left,
            mode,
            rank_right,
            data,
        }
    }

    /// Core `(1, n, 1)` holding a single vector.
    pub fn vector(v: &[f64]) -> Self {
        Self {
            rank_left: 1,
            mode: v.len(),
            rank_right: 1,
            data: v.to_vec(),
        }
    }

    /// Rebuilds a core from its left unfolding `(r_left n) x r_right`.
    pub fn from_left_unfolding(m: MatRef<'_, f64>, rank_left: usize, mode: usize) -> Result<Self> {
        if m.nrows() != rank_left * mode {
            return Err(Error::ShapeMismatch(format!(
                "left unfolding has {} rows, expected {}",
                m.nrows(),
                rank_left * mode
            )));
        }
        Core::new(rank_left, mode, m.ncols(), linalg::to_col_major(m))
    }

    /// Rebuilds a core from its right unfolding `r_left x (n r_right)`.
    pub fn from_right_unfolding(m: MatRef<'_, f64>, mode: usize, rank_right: usize) -> Result<Self> {
        if m.ncols() != mode * rank_right {
            return Err(Error::ShapeMismatch(format!(
                "right unfolding has {} columns, expected {}",
                m.ncols(),
                mode * rank_right
            )));
        }
        Core::new(m.nrows(), mode, rank_right, linalg::to_col_major(m))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rank_left, self.mode, self.rank_right)
    }

    pub fn rank_left(&self) -> usize {
        self.rank_left
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn rank_right(&self) -> usize {
        self.rank_right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, a: usize, x: usize, b: usize) -> f64 {
        self.data[a + self.rank_left * (x + self.mode * b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, x: usize, b: usize, value: f64) {
        self.data[a + self.rank_left * (x + self.mode * b)] = value;
    }

    /// Column-major view `(r_left n) x r_right`.
    pub fn left_view(&self) -> MatRef<'_, f64> {
        linalg::view(&self.data, self.rank_left * self.mode, self.rank_right)
    }

    /// Column-major view `r_left x (n r_right)`.
    pub fn right_view(&self) -> MatRef<'_, f64> {
        linalg::view(&self.data, self.rank_left, self.mode * self.rank_right)
    }

    /// The `r_left x r_right` matrix `C[:, x, :]`.
    pub fn slice(&self, x: usize) -> MatRef<'_, f64> {
        let start = self.rank_left * x;
        let stride = self.rank_left * self.mode;
        let end = start + stride * (self.rank_right - 1) + self.rank_left;
        MatRef::from_column_major_slice_with_stride(
            &self.data[start..end],
            self.rank_left,
            self.rank_right,
            stride,
        )
    }

    /// `sum_x w[x] C[:, x, :]`.
    pub fn contract_mode(&self, w: &[f64]) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.rank_left, self.rank_right);
        for b in 0..self.rank_right {
            for (x, &wx) in w.iter().enumerate() {
                if wx == 0.0 {
                    continue;
                }
                let base = self.rank_left * (x + self.mode * b);
                for a in 0..self.rank_left {
                    out[(a, b)] += wx * self.data[base + a];
                }
            }
        }
        out
    }

    fn scaled(&self, s: f64) -> Core {
        Core {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }
}

/// A matricization of a tensor together with the modes grouped on each side.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub matrix: Mat<f64>,
    pub row_modes: Vec<usize>,
    pub col_modes: Vec<usize>,
    pub index_order: IndexOrder,
}

pub fn left_unfold(core: &Core) -> Unfolding {
    Unfolding {
        matrix: core.left_view().to_owned(),
        row_modes: vec![core.rank_left, core.mode],
        col_modes: vec![core.rank_right],
        index_order: IndexOrder::Colexicographic,
    }
}

pub fn right_unfold(core: &Core) -> Unfolding {
    Unfolding {
        matrix: core.right_view().to_owned(),
        row_modes: vec![core.rank_left],
        col_modes: vec![core.mode, core.rank_right],
        index_order: IndexOrder::Colexicographic,
    }
}

/// Dense d-way array, first index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid tensor shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        for k in (0..self.shape.len()).rev() {
            lin = lin * self.shape[k] + idx[k];
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Matricization with the first `split` modes as rows.
    pub fn matricize(&self, split: usize) -> Result<Unfolding> {
        if split == 0 || split >= self.shape.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "split {split} out of range for order {}",
                self.shape.len()
            )));
        }
        let rows: usize = self.shape[..split].iter().product();
        let cols = self.data.len() / rows;
        Ok(Unfolding {
            matrix: linalg::view(&self.data, rows, cols).to_owned(),
            row_modes: self.shape[..split].to_vec(),
            col_modes: self.shape[split..].to_vec(),
            index_order: IndexOrder::Colexicographic,
        })
    }
}

/// Order-`d` tensor in TT format.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
}

impl TensorTrain {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("a tensor train needs at least one core".into()));
        }
        if cores[0].rank_left != 1 || cores[cores.len() - 1].rank_right != 1 {
            return Err(Error::ShapeMismatch("boundary ranks must be 1".into()));
        }
        for (i, w) in cores.windows(2).enumerate() {
            if w[0].rank_right != w[1].rank_left {
                return Err(Error::ShapeMismatch(format!(
                    "rank mismatch between cores {i} and {}: {} vs {}",
                    i + 1,
                    w[0].rank_right,
                    w[1].rank_left
                )));
            }
        }
        Ok(Self { cores })
    }

    /// Zero tensor with rank-one zero cores.
    pub fn zeros(modes: &[usize]) -> Result<Self> {
        Self::new(modes.iter().map(|&n| Core::zeros(1, n, 1)).collect())
    }

    /// Rank-one tensor `v_1 (x) v_2 (x) .. (x) v_d`.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        Self::new(vectors.iter().map(|v| Core::vector(v)).collect())
    }

    /// Random cores with entries uniform in `[-1, 1)`; `ranks` lists the
    /// `d - 1` interior ranks.
    pub fn random<R: Rng + ?Sized>(modes: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        if ranks.len() + 1 != modes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} modes need {} interior ranks, got {}",
                modes.len(),
                modes.len().saturating_sub(1),
                ranks.len()
            )));
        }
        let mut full = vec![1];
        full.extend_from_slice(ranks);
        full.push(1);
        let cores = modes
            .iter()
            .enumerate()
            .map(|(i, &n)| Core::from_fn(full[i], n, full[i + 1], |_, _, _| rng.gen_range(-1.0..1.0)))
            .collect();
        Self::new(cores)
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    /// `r_0, .., r_d`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.rank_right));
        r
    }

    /// Number of stored core entries.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(Core::len).sum()
    }

    pub fn dense_len(&self) -> usize {
        self.cores.iter().map(|c| c.mode).product()
    }

    pub fn entry(&self, idx: &[usize]) -> f64 {
        let mut row: Vec<f64> = vec![1.0];
        for (core, &x) in self.cores.iter().zip(idx) {
            let mut next = vec![0.0; core.rank_right];
            for (b, nb) in next.iter_mut().enumerate() {
                *nb = row.iter().enumerate().map(|(a, ra)| ra * core.get(a, x, b)).sum();
            }
            row = next;
        }
        row[0]
    }

    pub fn to_full(&self) -> Result<DenseTensor> {
        self.to_full_with_cap(DEFAULT_DENSE_CAP)
    }

    pub fn to_full_with_cap(&self, cap: usize) -> Result<DenseTensor> {
        let total = self
            .cores
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.mode))
            .unwrap_or(usize::MAX);
        if total > cap {
            return Err(Error::SizeCapExceeded {
                requested: total,
                cap,
            });
        }
        let acc = chain_matrix(&self.cores);
        DenseTensor::new(self.mode_sizes(), acc)
    }

    /// TT-SVD with relative singular-value threshold `threshold`.
    pub fn from_full(a: &DenseTensor, threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("threshold {threshold} not in [0, 1)")));
        }
        Self::from_full_truncated(a, Truncation::relative(threshold))
    }

    /// TT-SVD under an arbitrary truncation rule (relative cutoff and/or rank cap).
    pub fn from_full_truncated(a: &DenseTensor, trunc: Truncation) -> Result<Self> {
        let modes = a.shape().to_vec();
        let d = modes.len();
        let mut cores = Vec::with_capacity(d);
        let mut rest: Vec<f64> = a.data().to_vec();
        let mut r = 1;
        for &n in &modes[..d - 1] {
            let rows = r * n;
            let cols = rest.len() / rows;
            let m = linalg::view(&rest, rows, cols);
            let (u, svt) = split_left(m, trunc)?;
            cores.push(Core::from_left_unfolding(u.as_ref(), r, n)?);
            r = u.ncols();
            rest = linalg::to_col_major(svt.as_ref());
        }
        cores.push(Core::new(r, modes[d - 1], 1, rest)?);
        Self::new(cores)
    }

    /// Makes cores `0..upto` left-orthonormal (compact SVDs), pushing the
    /// remainder into core `upto`.
    pub fn orthonormalize_left(&self, upto: usize) -> Result<Self> {
        self.orthonormalize_left_with(upto, Truncation::relative(0.0))
    }

    pub fn orthonormalize_left_with(&self, upto: usize, trunc: Truncation) -> Result<Self> {
        if upto >= self.order() {
            return Err(Error::InvalidArgument(format!(
                "orthonormalize_left: upto = {upto} must be < order {}",
                self.order()
            )));
        }
        let mut cores = self.cores.clone();
        for i in 0..upto {
            let (u, svt) = split_left(cores[i].left_view(), trunc)?;
            let (r0, n, _) = cores[i].shape();
            cores[i] = Core::from_left_unfolding(u.as_ref(), r0, n)?;
            let next = &cores[i + 1];
            let merged = &svt * next.right_view();
            cores[i + 1] = Core::from_right_unfolding(merged.as_ref(), next.mode, next.rank_right)?;
        }
        Self::new(cores)
    }

    /// Makes cores `from..d` right-orthonormal (compact SVDs), pushing the
    /// remainder into core `from - 1`.
    pub fn orthonormalize_right(&self, from: usize) -> Result<Self> {
        self.orthonormalize_right_with(from, Truncation::relative(0.0))
    }

    pub fn orthonormalize_right_with(&self, from: usize, trunc: Truncation) -> Result<Self> {
        if from == 0 || from > self.order() {
            return Err(Error::InvalidArgument(format!(
                "orthonormalize_right: from = {from} must be in 1..={}",
                self.order()
            )));
        }
        let mut cores = self.cores.clone();
        for i in (from..self.order()).rev() {
            let (us, vt) = split_right(cores[i].right_view(), trunc)?;
            let (_, n, r1) = cores[i].shape();
            cores[i] = Core::from_right_unfolding(vt.as_ref(), n, r1)?;
            let prev = &cores[i - 1];
            let merged = prev.left_view() * &us;
            cores[i - 1] = Core::from_left_unfolding(merged.as_ref(), prev.rank_left, prev.mode)?;
        }
        Self::new(cores)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut cores = self.cores.clone();
        cores[0] = cores[0].scaled(s);
        Self { cores }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_modes(other)?;
        let d = self.order();
        if d == 1 {
            let data = self.cores[0]
                .data
                .iter()
                .zip(&other.cores[0].data)
                .map(|(a, b)| a + b)
                .collect();
            return Self::new(vec![Core::new(1, self.cores[0].mode, 1, data)?]);
        }
        let mut cores = Vec::with_capacity(d);
        for i in 0..d {
            let (a, b) = (&self.cores[i], &other.cores[i]);
            let n = a.mode;
            let core = if i == 0 {
                Core::from_fn(1, n, a.rank_right + b.rank_right, |_, x, k| {
                    if k < a.rank_right {
                        a.get(0, x, k)
                    } else {
                        b.get(0, x, k - a.rank_right)
                    }
                })
            } else if i == d - 1 {
                Core::from_fn(a.rank_left + b.rank_left, n, 1, |k, x, _| {
                    if k < a.rank_left {
                        a.get(k, x, 0)
                    } else {
                        b.get(k - a.rank_left, x, 0)
                    }
                })
            } else {
                Core::from_fn(a.rank_left + b.rank_left, n, a.rank_right + b.rank_right, |k, x, l| {
                    match (k < a.rank_left, l < a.rank_right) {
                        (true, true) => a.get(k, x, l),
                        (false, false) => b.get(k - a.rank_left, x, l - a.rank_right),
                        _ => 0.0,
                    }
                })
            };
            cores.push(core);
        }
        Self::new(cores)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Inner product by sequential core contraction.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_modes(other)?;
        let mut w = Mat::<f64>::from_fn(1, 1, |_, _| 1.0);
        for (a, b) in self.cores.iter().zip(&other.cores) {
            // z = W R(B), reinterpreted as (r_a n) x r_b'
            let z = &w * b.right_view();
            let z = linalg::to_col_major(z.as_ref());
            let z = linalg::view(&z, a.rank_left * a.mode, b.rank_right);
            w = a.left_view().transpose() * z;
        }
        Ok(w[(0, 0)])
    }

    /// Frobenius norm via a QR sweep; stable even when the tensor is a
    /// difference of two nearly equal trains.
    pub fn norm(&self) -> f64 {
        let mut carry = Mat::<f64>::from_fn(1, 1, |_, _| 1.0);
        let d = self.order();
        for (i, core) in self.cores.iter().enumerate() {
            let merged = &carry * core.right_view();
            let merged = linalg::to_col_major(merged.as_ref());
            let rows = carry.nrows() * core.mode;
            let m = linalg::view(&merged, rows, core.rank_right);
            if i + 1 == d {
                return m.norm_l2();
            }
            let (_, r) = linalg::qr(m);
            carry = r;
        }
        carry.norm_l2()
    }

    fn check_modes(&self, other: &Self) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::ModeMismatch {
                left: self.mode_sizes(),
                right: other.mode_sizes(),
            });
        }
        Ok(())
    }
}

/// Contracts a chain of cores with leading rank 1 into the column-major
/// matrix `(n_1 .. n_k) x r_k`. No size check: callers bound the size.
pub fn chain_matrix(cores: &[Core]) -> Vec<f64> {
    let mut rows = cores[0].mode;
    let mut acc: Vec<f64> = cores[0].data.clone();
    for core in &cores[1..] {
        let p = linalg::view(&acc, rows, core.rank_left);
        let prod = p * core.right_view();
        acc = linalg::to_col_major(prod.as_ref());
        rows *= core.mode;
    }
    acc
}

/// `m = U (S V^T)` with `U` orthonormal; a zero matrix yields a single unit
/// column and a zero row so that ranks stay >= 1.
pub(crate) fn split_left(m: MatRef<'_, f64>, trunc: Truncation) -> Result<(Mat<f64>, Mat<f64>)> {
    let svd = linalg::svd(m, trunc)?;
    if svd.rank() == 0 {
        let mut u = Mat::<f64>::zeros(m.nrows(), 1);
        u[(0, 0)] = 1.0;
        return Ok((u, Mat::zeros(1, m.ncols())));
    }
    let svt = svd.s_vt();
    Ok((svd.u, svt))
}

/// `m = (U S) V^T` with `V^T` row-orthonormal; zero handling as in [`split_left`].
pub(crate) fn split_right(m: MatRef<'_, f64>, trunc: Truncation) -> Result<(Mat<f64>, Mat<f64>)> {
    let svd = linalg::svd(m, trunc)?;
    if svd.rank() == 0 {
        let mut vt = Mat::<f64>::zeros(1, m.ncols());
        vt[(0, 0)] = 1.0;
        return Ok((Mat::zeros(m.nrows(), 1), vt));
    }
    let us = svd.u_s();
    Ok((us, svd.v.transpose().to_owned()))
}
