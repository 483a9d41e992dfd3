use approx::assert_relative_eq;
use faer::Mat;
use mandy_core::basis::{build_basis_matrix, BasisTensorTT, Dictionary};
use mandy_core::pinv::{pinv_basis, tt_pinv};
use mandy_core::sindy::sindy_threshold;
use mandy_core::tt::{DenseTensor, TensorTrain};
use mandy_core::Execution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEQ: Execution = Execution::Sequential;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn frob(m: &Mat<f64>) -> f64 {
    m.norm_l2()
}

fn modes_and_values() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::collection::vec(1usize..=5, 1..=4).prop_flat_map(|modes| {
        let n: usize = modes.iter().product();
        (Just(modes), prop::collection::vec(-1.0f64..1.0, n))
    })
}

fn random_train() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, u64)> {
    (prop::collection::vec(1usize..=4, 2..=4), 1usize..=3, any::<u64>()).prop_map(|(modes, r, seed)| {
        let ranks = vec![r; modes.len() - 1];
        (modes, ranks, seed)
    })
}

fn as_matrix(t: &TensorTrain) -> Mat<f64> {
    let modes = t.mode_sizes();
    let m = *modes.last().unwrap();
    let n: usize = modes[..modes.len() - 1].iter().product();
    let full = t.to_full().unwrap();
    Mat::from_fn(n, m, |i, k| full.data()[i + n * k])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_round_trip_is_exact((modes, values) in modes_and_values()) {
        let a = DenseTensor::new(modes, values.clone()).unwrap();
        let t = TensorTrain::from_full(&a, 0.0).unwrap();
        prop_assert!(rel(t.to_full().unwrap().data(), &values) <= 1e-12);
    }

    #[test]
    fn sums_and_inner_products((modes, ranks, seed) in random_train()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = TensorTrain::random(&modes, &ranks, &mut rng).unwrap();
        let b = TensorTrain::random(&modes, &ranks, &mut rng).unwrap();
        let (fa, fb) = (a.to_full().unwrap(), b.to_full().unwrap());
        let sum: Vec<f64> = fa.data().iter().zip(fb.data()).map(|(x, y)| x + y).collect();
        prop_assert!(rel(a.add(&b).unwrap().to_full().unwrap().data(), &sum) <= 1e-12);
        let dot: f64 = fa.data().iter().zip(fb.data()).map(|(x, y)| x * y).sum();
        let scale = a.norm() * b.norm();
        prop_assert!((a.dot(&b).unwrap() - dot).abs() <= 1e-12 * scale.max(1.0));
        assert_relative_eq!(a.norm().powi(2), a.dot(&a).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn orthonormalization_keeps_the_tensor((modes, ranks, seed) in random_train()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = TensorTrain::random(&modes, &ranks, &mut rng).unwrap();
        let full = t.to_full().unwrap();
        let last = modes.len() - 1;
        let l = t.orthonormalize_left(last).unwrap();
        let r = t.orthonormalize_right(1).unwrap();
        prop_assert!(rel(l.to_full().unwrap().data(), full.data()) <= 1e-12);
        prop_assert!(rel(r.to_full().unwrap().data(), full.data()) <= 1e-12);
    }

    #[test]
    fn pseudoinverse_is_moore_penrose((modes, ranks, seed) in random_train()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = TensorTrain::random(&modes, &ranks, &mut rng).unwrap();
        let a = as_matrix(&t);
        let p = tt_pinv(&t, 0.0, false).unwrap().to_dense(usize::MAX).unwrap();
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!(frob(&(&ap * &a - &a)) <= 1e-10 * frob(&a));
        prop_assert!(frob(&(&pa * &p - &p)) <= 1e-10 * frob(&p));
        prop_assert!(frob(&(&ap - ap.transpose())) <= 1e-10 * frob(&ap));
        prop_assert!(frob(&(&pa - pa.transpose())) <= 1e-10 * frob(&pa));
    }

    #[test]
    fn basis_tensor_matches_basis_matrix(d in 1usize..=3, m in 1usize..=12, seed in any::<u64>(), fm in any::<bool>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::from_fn(d, m, |_, _| rng.gen_range(-1.0..1.0));
        let dict = if fm { Dictionary::abs_pair() } else { Dictionary::monomials(2) };
        let b = BasisTensorTT::build(&dict, x.as_ref(), SEQ).unwrap();
        let psi = build_basis_matrix(&dict, x.as_ref(), usize::MAX, SEQ).unwrap();
        let dense = as_matrix(&b.to_tensor_train().unwrap());
        prop_assert!(frob(&(&dense - &psi)) <= 1e-14 * frob(&psi).max(1.0));
        let stored: usize = b.feature_modes().iter().sum::<usize>() * m + m;
        prop_assert_eq!(b.nnz_count(), stored);
        prop_assert_eq!(b.dense_count(), dict.feature_count(d) * m);
    }

    #[test]
    fn basis_pinv_agrees_with_generic(d in 1usize..=3, m in 2usize..=10, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::from_fn(d, m, |_, _| rng.gen_range(-1.0..1.0));
        let b = BasisTensorTT::build(&Dictionary::monomials(2), x.as_ref(), SEQ).unwrap();
        let fast = pinv_basis(&b, 0.0, SEQ).unwrap().to_dense(usize::MAX).unwrap();
        let slow = tt_pinv(&b.to_tensor_train().unwrap(), 0.0, false).unwrap().to_dense(usize::MAX).unwrap();
        prop_assert!(frob(&(&fast - &slow)) <= 1e-9 * frob(&slow));
    }

    #[test]
    fn sindy_residual_grows_with_lambda(seed in any::<u64>(), l1 in 0.0f64..0.5, dl in 0.0f64..0.5) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (6, 30);
        let psi = Mat::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let y = Mat::from_fn(2, m, |_, _| rng.gen_range(-1.0..1.0));
        let lo = sindy_threshold(psi.as_ref(), y.as_ref(), l1, 25, SEQ).unwrap();
        let hi = sindy_threshold(psi.as_ref(), y.as_ref(), l1 + dl, 25, SEQ).unwrap();
        prop_assert!(hi.residual >= lo.residual * (1.0 - 1e-12) - 1e-12);
        for j in 0..2 {
            for i in 0..n {
                if !hi.active_mask[j][i] {
                    prop_assert_eq!(hi.xi[(i, j)], 0.0);
                }
            }
        }
    }
}
