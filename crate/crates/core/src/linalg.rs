//! Thin wrappers over the dense kernels (SVD, QR, products) used by the
//! tensor-train routines. Everything here works on column-major storage, which
//! matches the first-index-fastest layout of the TT cores.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::{Conj, Mat, MatRef};

use crate::error::{Error, Result};

/// Relative floor below which singular values count as numerically zero when
/// no explicit threshold is requested.
pub const COMPACT_TOLERANCE: f64 = 1e-14;

/// How singular values are discarded in an SVD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Discard `sigma_k` with `sigma_k / sigma_max < relative`.
    pub relative: f64,
    /// Optional hard cap on the retained rank.
    pub max_rank: Option<usize>,
}

impl Truncation {
    pub fn relative(relative: f64) -> Self {
        Self {
            relative,
            max_rank: None,
        }
    }

    pub fn max_rank(rank: usize) -> Self {
        Self {
            relative: 0.0,
            max_rank: Some(rank),
        }
    }

    /// Number of singular values (sorted descending) kept under this rule.
    pub fn rank(&self, singular_values: &[f64]) -> usize {
        let smax = singular_values.first().copied().unwrap_or(0.0);
        if !(smax > 0.0) {
            return 0;
        }
        let cutoff = smax * self.relative.max(COMPACT_TOLERANCE);
        let kept = singular_values
            .iter()
            .take_while(|&&s| s >= cutoff && s > 0.0)
            .count();
        match self.max_rank {
            Some(r) => kept.min(r),
            None => kept,
        }
    }
}

/// Thin SVD `A = U diag(s) V^T` restricted to the retained rank.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
    /// Full list of singular values before truncation.
    pub spectrum: Vec<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `diag(s) V^T` as an owned matrix (rank x cols).
    pub fn s_vt(&self) -> Mat<f64> {
        Mat::from_fn(self.rank(), self.v.nrows(), |i, j| self.s[i] * self.v[(j, i)])
    }

    /// `U diag(s)` as an owned matrix (rows x rank).
    pub fn u_s(&self) -> Mat<f64> {
        Mat::from_fn(self.u.nrows(), self.rank(), |i, j| self.u[(i, j)] * self.s[j])
    }
}

pub fn svd(a: MatRef<'_, f64>, trunc: Truncation) -> Result<TruncatedSvd> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if rows == 0 || cols == 0 {
        return Ok(TruncatedSvd {
            u: Mat::zeros(rows, 0),
            s: Vec::new(),
            v: Mat::zeros(cols, 0),
            spectrum: Vec::new(),
        });
    }
    if a.col_iter().flat_map(|c| c.iter().copied()).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite entry passed to SVD".into()));
    }
    let decomposition = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let sv = decomposition.S().column_vector();
    let spectrum: Vec<f64> = (0..sv.nrows()).map(|i| sv[i]).collect();
    let k = trunc.rank(&spectrum);
    Ok(TruncatedSvd {
        u: decomposition.U().get(.., ..k).to_owned(),
        s: spectrum[..k].to_vec(),
        v: decomposition.V().get(.., ..k).to_owned(),
        spectrum,
    })
}

/// Singular values only, in descending order.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))
}

/// Thin QR factorization; returns `(Q, R)` with `Q` having `min(rows, cols)`
/// orthonormal columns.
pub fn qr(a: MatRef<'_, f64>) -> (Mat<f64>, Mat<f64>) {
    let f = a.qr();
    (f.compute_thin_Q(), f.thin_R().to_owned())
}

/// Minimum-norm least-squares solution `X = A^+ B` computed from an SVD of `A`.
///
/// The SVD is obtained as QR followed by an SVD of the small triangular
/// factor, which avoids materialising the large singular-vector block for
/// strongly rectangular `A`. Returns the solution and the singular values of
/// `A` (untruncated).
pub fn min_norm_solve(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    trunc: Truncation,
) -> Result<(Mat<f64>, Vec<f64>)> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if b.nrows() != rows {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} rows, matrix has {rows}",
            b.nrows()
        )));
    }
    let k = b.ncols();
    let par = faer::get_global_parallelism();
    if rows >= cols {
        // A = Q R, R = U S V^T  =>  A^+ B = V S^+ U^T (Q^T B)
        let f = a.qr();
        let mut qtb = b.to_owned();
        let block = f.Q_coeff().nrows();
        let mut mem = MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                rows, block, k,
            ),
        );
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            f.Q_basis(),
            f.Q_coeff(),
            Conj::No,
            qtb.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
        let r = f.thin_R().to_owned();
        drop(f);
        let t = svd(r.as_ref(), trunc)?;
        let c = qtb.get(..cols, ..);
        let mut w = t.u.transpose() * c;
        for (i, &s) in t.s.iter().enumerate() {
            for j in 0..k {
                w[(i, j)] /= s;
            }
        }
        Ok((&t.v * &w, t.spectrum))
    } else {
        // A^T = Q R, R = U S V^T  =>  A = V S U^T Q^T,  A^+ B = Q U S^+ V^T B
        let f = a.transpose().qr();
        let r = f.thin_R().to_owned();
        let t = svd(r.as_ref(), trunc)?;
        let mut w = t.v.transpose() * b;
        for (i, &s) in t.s.iter().enumerate() {
            for j in 0..k {
                w[(i, j)] /= s;
            }
        }
        let small = &t.u * &w;
        let mut x = Mat::<f64>::zeros(cols, k);
        x.get_mut(..rows, ..).copy_from(&small);
        let block = f.Q_coeff().nrows();
        let mut mem = MemBuffer::new(
            householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<f64>(
                cols, block, k,
            ),
        );
        householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
            f.Q_basis(),
            f.Q_coeff(),
            Conj::No,
            x.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
        Ok((x, t.spectrum))
    }
}

/// Explicit pseudoinverse through a thin SVD. Test and oracle use only.
pub fn pinv(a: MatRef<'_, f64>, trunc: Truncation) -> Result<Mat<f64>> {
    let t = svd(a, trunc)?;
    let mut vs = t.v.clone();
    for (j, &s) in t.s.iter().enumerate() {
        for i in 0..vs.nrows() {
            vs[(i, j)] /= s;
        }
    }
    Ok(&vs * t.u.transpose())
}

/// Copies a matrix into a contiguous column-major vector.
pub fn to_col_major(a: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.nrows() * a.ncols());
    for j in 0..a.ncols() {
        out.extend(a.col(j).iter().copied());
    }
    out
}

pub fn view(data: &[f64], rows: usize, cols: usize) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(data, rows, cols)
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}
