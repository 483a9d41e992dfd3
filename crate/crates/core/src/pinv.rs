//! Pseudoinverses of tensor trains with respect to the split
//! "all modes but the last" vs. "last mode".
//!
//! For `T = mat(T | n_1..n_D ; m)` the cores are brought into the form
//! `T = U~ diag(s) V~^T` with a left-orthonormal chain `U~` and a
//! row-orthonormal `s x m` factor, so that `T^+ = V~ diag(1/s) U~^T` is never
//! formed explicitly.

use faer::{Mat, MatRef};

use crate::basis::BasisTensorTT;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, Truncation};
use crate::tt::{self, Core, TensorTrain};

#[derive(Debug, Clone, PartialEq)]
pub struct TTPseudoinverse {
    left_cores: Vec<Core>,
    /// `s x m`, column-major, rows orthonormal.
    right_core: Vec<f64>,
    singular_values: Vec<f64>,
    threshold: f64,
    m: usize,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} not in [0, 1)")));
    }
    Ok(())
}

/// Pseudoinverse of a general tensor train with `D + 1 >= 2` cores.
///
/// `right_orthonormal` declares that the last core is already
/// right-orthonormal, which skips its sweep.
pub fn tt_pinv(t: &TensorTrain, threshold: f64, right_orthonormal: bool) -> Result<TTPseudoinverse> {
    check_threshold(threshold)?;
    if t.order() < 2 {
        return Err(Error::InvalidArgument("pseudoinverse needs at least two cores".into()));
    }
    let trunc = Truncation::relative(threshold);
    let dd = t.order() - 1;
    let mut t = t.clone();
    if !right_orthonormal {
        t = t.orthonormalize_right_with(dd, trunc)?;
    }
    t = t.orthonormalize_left_with(dd - 1, trunc)?;
    let mut cores = t.into_cores();
    let last = cores.pop().expect("at least two cores");
    let middle = cores.pop().expect("at least two cores");
    let svd = linalg::svd(middle.left_view(), trunc)?;
    if svd.rank() == 0 {
        return Err(Error::DegenerateInput("matricization is identically zero".into()));
    }
    cores.push(Core::from_left_unfolding(svd.u.as_ref(), middle.rank_left(), middle.mode())?);
    let right = svd.v.transpose() * last.right_view();
    Ok(TTPseudoinverse {
        left_cores: cores,
        right_core: linalg::to_col_major(right.as_ref()),
        singular_values: svd.s,
        threshold,
        m: last.mode(),
    })
}

/// Pseudoinverse of a snapshot basis tensor, exploiting its block-diagonal
/// cores. Only the left unfolding of one merged core is dense at a time.
pub fn pinv_basis(b: &BasisTensorTT, threshold: f64, exec: Execution) -> Result<TTPseudoinverse> {
    check_threshold(threshold)?;
    let trunc = Truncation::relative(threshold);
    let m = b.snapshots();
    let modes = b.feature_modes();
    let dd = modes.len();
    let mut left_cores = Vec::with_capacity(dd);
    // carry: s x m, column-major
    let mut carry: Option<(usize, Vec<f64>)> = None;
    for (i, &n) in modes.iter().enumerate() {
        let f = b.factor(i);
        let (s, merged) = match &carry {
            None => (1, linalg::to_col_major(f)),
            Some((s, c)) => (*s, absorb(c, *s, f, exec)),
        };
        let rows = s * n;
        let mview = linalg::view(&merged, rows, m);
        if i + 1 < dd {
            let (u, svt) = tt::split_left(mview, trunc)?;
            left_cores.push(Core::from_left_unfolding(u.as_ref(), s, n)?);
            carry = Some((svt.nrows(), linalg::to_col_major(svt.as_ref())));
        } else {
            let svd = linalg::svd(mview, trunc)?;
            if svd.rank() == 0 {
                return Err(Error::DegenerateInput("basis matrix is identically zero".into()));
            }
            left_cores.push(Core::from_left_unfolding(svd.u.as_ref(), s, n)?);
            return Ok(TTPseudoinverse {
                left_cores,
                right_core: linalg::to_col_major(svd.v.transpose()),
                singular_values: svd.s,
                threshold,
                m,
            });
        }
    }
    unreachable!("basis tensors have at least one feature core")
}

/// Left unfolding of `carry * block_diag(F)`: column `k` is
/// `kron(F[:, k], carry[:, k])` with the carry index fastest.
fn absorb(carry: &[f64], s: usize, f: MatRef<'_, f64>, exec: Execution) -> Vec<f64> {
    let (n, m) = (f.nrows(), f.ncols());
    let rows = s * n;
    let mut out = vec![0.0; rows * m];
    exec.for_each_chunk(&mut out, rows, |k, col| {
        let c = &carry[s * k..s * (k + 1)];
        for x in 0..n {
            let fx = f[(x, k)];
            for (o, &cv) in col[s * x..s * (x + 1)].iter_mut().zip(c) {
                *o = fx * cv;
            }
        }
    });
    out
}

impl TTPseudoinverse {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn snapshots(&self) -> usize {
        self.m
    }

    pub fn left_cores(&self) -> &[Core] {
        &self.left_cores
    }

    pub fn right_core(&self) -> MatRef<'_, f64> {
        linalg::view(&self.right_core, self.rank(), self.m)
    }

    pub fn feature_modes(&self) -> Vec<usize> {
        self.left_cores.iter().map(Core::mode).collect()
    }

    /// Stored entries of the factorization.
    pub fn storage(&self) -> usize {
        self.left_cores.iter().map(Core::len).sum::<usize>() + self.right_core.len() + self.rank()
    }

    pub(crate) fn from_parts(
        left_cores: Vec<Core>,
        right_core: Vec<f64>,
        singular_values: Vec<f64>,
        threshold: f64,
        m: usize,
    ) -> Result<Self> {
        let s = singular_values.len();
        let last = left_cores
            .last()
            .ok_or_else(|| Error::Format("pseudoinverse without left cores".into()))?;
        if last.rank_right() != s || right_core.len() != s * m || left_cores[0].rank_left() != 1 {
            return Err(Error::ShapeMismatch("inconsistent pseudoinverse factors".into()));
        }
        for w in left_cores.windows(2) {
            if w[0].rank_right() != w[1].rank_left() {
                return Err(Error::ShapeMismatch("rank mismatch in left cores".into()));
            }
        }
        if singular_values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Format("singular values must be positive".into()));
        }
        Ok(Self {
            left_cores,
            right_core,
            singular_values,
            threshold,
            m,
        })
    }

    fn feature_count(&self) -> usize {
        self.left_cores
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.mode()))
            .unwrap_or(usize::MAX)
    }

    /// `U~` as a dense `N x s` matrix.
    pub fn left_matrix(&self, cap: usize) -> Result<Mat<f64>> {
        let n = self.feature_count();
        if n.saturating_mul(self.rank()) > cap {
            return Err(Error::SizeCapExceeded {
                requested: n.saturating_mul(self.rank()),
                cap,
            });
        }
        let data = tt::chain_matrix(&self.left_cores);
        Ok(linalg::view(&data, n, self.rank()).to_owned())
    }

    /// Densified pseudoinverse `m x N`.
    pub fn to_dense(&self, cap: usize) -> Result<Mat<f64>> {
        let n = self.feature_count();
        if n.saturating_mul(self.m) > cap {
            return Err(Error::SizeCapExceeded {
                requested: n.saturating_mul(self.m),
                cap,
            });
        }
        let u = self.left_matrix(cap)?;
        let right = self.right_core();
        let vs = Mat::from_fn(self.m, self.rank(), |k, a| right[(a, k)] / self.singular_values[a]);
        Ok(&vs * u.transpose())
    }

    /// Contracts with data `y` (`d_out x m`): the result `Xi` has the left
    /// cores followed by the core `diag(1/s) V^T y^T`, so that
    /// `mat(Xi | N ; d_out)^T = y T^+`.
    pub fn apply_left(&self, y: MatRef<'_, f64>) -> Result<TensorTrain> {
        if y.ncols() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "data has {} columns, pseudoinverse expects {}",
                y.ncols(),
                self.m
            )));
        }
        let mut w = self.right_core() * y.transpose();
        for (a, &s) in self.singular_values.iter().enumerate() {
            for j in 0..w.ncols() {
                w[(a, j)] /= s;
            }
        }
        let mut cores = self.left_cores.clone();
        cores.push(Core::new(self.rank(), y.nrows(), 1, linalg::to_col_major(w.as_ref()))?);
        TensorTrain::new(cores)
    }
}

pub fn pinv_apply_left(p: &TTPseudoinverse, y: MatRef<'_, f64>) -> Result<TensorTrain> {
    p.apply_left(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis_matrix, Dictionary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matricize_last(t: &TensorTrain) -> Mat<f64> {
        let full = t.to_full().unwrap();
        let m = *full.shape().last().unwrap();
        let n = full.data().len() / m;
        linalg::view(full.data(), n, m).to_owned()
    }

    fn rel(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
        (a - b).norm_l2() / b.norm_l2()
    }

    #[test]
    fn identity_matricization() {
        // modes (2, 2, 4): mat is the 4x4 identity
        let mut data = vec![0.0; 16];
        for i in 0..4 {
            data[i + 4 * i] = 1.0;
        }
        let full = crate::tt::DenseTensor::new(vec![2, 2, 4], data).unwrap();
        let t = TensorTrain::from_full(&full, 0.0).unwrap();
        let p = tt_pinv(&t, 0.0, false).unwrap();
        assert!(p.singular_values().iter().all(|&s| (s - 1.0).abs() < 1e-12));
        let dense = p.to_dense(usize::MAX).unwrap();
        let eye = Mat::<f64>::identity(4, 4);
        assert!((&dense - &eye).norm_l2() < 1e-12);
    }

    #[test]
    fn moore_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = TensorTrain::random(&[3, 3, 5], &[2, 3], &mut rng).unwrap();
        let a = matricize_last(&t);
        let p = tt_pinv(&t, 0.0, false).unwrap().to_dense(usize::MAX).unwrap();
        let scale = a.norm_l2() * p.norm_l2();
        assert!((&a * &p * &a - &a).norm_l2() <= 1e-10 * scale * a.norm_l2());
        assert!((&p * &a * &p - &p).norm_l2() <= 1e-10 * scale * p.norm_l2());
        let ap = &a * &p;
        let pa = &p * &a;
        assert!((&ap - ap.transpose()).norm_l2() <= 1e-10 * scale);
        assert!((&pa - pa.transpose()).norm_l2() <= 1e-10 * scale);
    }

    #[test]
    fn tiny_singular_value_is_discarded() {
        // rank-2 matricization with sigma_2 / sigma_1 = 1e-12
        let u = [[1.0, 2.0, 0.5, -1.0], [0.3, -0.2, 1.0, 0.4]];
        let v = [[1.0, 0.0, 2.0, 1.0, -1.0], [0.5, 1.0, -1.0, 2.0, 0.0]];
        let mut data = vec![0.0; 20];
        for i in 0..4 {
            for k in 0..5 {
                data[i + 4 * k] = u[0][i] * v[0][k] + 1e-12 * u[1][i] * v[1][k];
            }
        }
        let full = crate::tt::DenseTensor::new(vec![2, 2, 5], data).unwrap();
        let t = TensorTrain::from_full(&full, 0.0).unwrap();
        let a = matricize_last(&t);
        let p = tt_pinv(&t, 1e-10, false).unwrap();
        assert_eq!(p.rank(), 1);
        let oracle = linalg::pinv(a.as_ref(), Truncation::relative(1e-10)).unwrap();
        let dense = p.to_dense(usize::MAX).unwrap();
        assert!(rel(dense.as_ref(), oracle.as_ref()) < 1e-8);
    }

    #[test]
    fn orthonormal_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = TensorTrain::random(&[3, 4, 2, 6], &[3, 4, 5], &mut rng).unwrap();
        let p = tt_pinv(&t, 0.0, false).unwrap();
        let u = p.left_matrix(usize::MAX).unwrap();
        let g = u.transpose() * &u;
        assert!((&g - Mat::<f64>::identity(p.rank(), p.rank())).norm_l2() < 1e-12);
        let v = p.right_core();
        let g = v * v.transpose();
        assert!((&g - Mat::<f64>::identity(p.rank(), p.rank())).norm_l2() < 1e-12);
        let s = p.singular_values();
        assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn zero_tensor_is_degenerate() {
        let t = TensorTrain::zeros(&[2, 3, 4]).unwrap();
        assert!(matches!(tt_pinv(&t, 0.0, false), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn rejects_bad_threshold_and_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TensorTrain::random(&[2, 3], &[2], &mut rng).unwrap();
        assert!(tt_pinv(&t, 1.5, false).is_err());
        let p = tt_pinv(&t, 0.0, false).unwrap();
        let y = Mat::<f64>::zeros(2, 4);
        assert!(matches!(p.apply_left(y.as_ref()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn basis_pinv_matches_generic_and_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Mat::from_fn(3, 12, |_, _| rng.gen_range(-1.0..1.0));
        for dict in [Dictionary::monomials(2), Dictionary::abs_pair()] {
            let b = BasisTensorTT::build(&dict, x.as_ref(), Execution::default()).unwrap();
            let fast = pinv_basis(&b, 0.0, Execution::default()).unwrap();
            let generic = tt_pinv(&b.to_tensor_train().unwrap(), 0.0, true).unwrap();
            let psi = build_basis_matrix(&dict, x.as_ref(), usize::MAX, Execution::Sequential).unwrap();
            let oracle = linalg::pinv(psi.as_ref(), Truncation::relative(0.0)).unwrap();
            let a = fast.to_dense(usize::MAX).unwrap();
            let g = generic.to_dense(usize::MAX).unwrap();
            assert!(rel(a.as_ref(), oracle.as_ref()) < 1e-10);
            assert!(rel(g.as_ref(), oracle.as_ref()) < 1e-10);
        }
    }

    #[test]
    fn apply_left_solves_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Mat::from_fn(2, 30, |_, _| rng.gen_range(-1.0..1.0));
        let dict = Dictionary::monomials(2);
        let b = BasisTensorTT::build(&dict, x.as_ref(), Execution::default()).unwrap();
        let psi = build_basis_matrix(&dict, x.as_ref(), usize::MAX, Execution::Sequential).unwrap();
        // y lies in the row space of psi: y = C psi
        let c = Mat::from_fn(2, 9, |_, _| rng.gen_range(-1.0..1.0));
        let y = &c * &psi;
        let xi = pinv_basis(&b, 0.0, Execution::default()).unwrap().apply_left(y.as_ref()).unwrap();
        let xi = matricize_last(&xi);
        let fit = xi.transpose() * &psi;
        assert!(rel(fit.as_ref(), y.as_ref()) < 1e-10);

        let zero = Mat::<f64>::zeros(2, 30);
        let xi0 = pinv_basis(&b, 0.0, Execution::default()).unwrap().apply_left(zero.as_ref()).unwrap();
        assert_eq!(xi0.norm(), 0.0);
    }
}
