//! Property tests for the structural invariants: the sign partition is a
//! disjoint cover, generation respects the outlier count bit-exactly, the
//! residual projector is an orthogonal projector annihilating X^T, and the
//! projection-entry bound stays inside its theoretical range.

use ladkit::bounds::r_value;
use ladkit::datamodel::{generate, partition_indices, Dataset, GenSpec, SignMode};
use ladkit::linalg::{max_abs, residual_projector};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn finite_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -100.0..100.0f64,
        Just(0.0),
        -1e6..1e6f64,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_a_disjoint_cover(
        n in 1usize..4,
        n_samples in 1usize..24,
        theta_vals in proptest::collection::vec(-10.0..10.0f64, 1..4),
        data in proptest::collection::vec(finite_value(), 1..200),
        tol in prop_oneof![Just(0.0), 1e-12..1.0f64],
    ) {
        let needed = n * n_samples + n_samples;
        prop_assume!(data.len() >= needed);
        prop_assume!(theta_vals.len() >= n);
        let x = Array2::from_shape_fn((n, n_samples), |(i, t)| data[i * n_samples + t]);
        let y = Array1::from_iter((0..n_samples).map(|t| data[n * n_samples + t]));
        let ds = Dataset::without_truth(x, y).unwrap();
        let theta = Array1::from_iter(theta_vals[..n].iter().copied());
        let p = partition_indices(&ds, &theta, tol).unwrap();
        // disjoint cover of {0..N-1}
        let mut seen = vec![0u8; n_samples];
        for &t in p.plus.iter().chain(p.minus.iter()).chain(p.zero.iter()) {
            seen[t] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        // classification rule holds entrywise
        for t in 0..n_samples {
            let r = ds.regressors.column(t).dot(&theta) - ds.outputs[t];
            let thr = tol * (1.0 + ds.outputs[t].abs());
            if p.zero.contains(&t) {
                prop_assert!(r.abs() <= thr);
            } else if p.plus.contains(&t) {
                prop_assert!(r > thr);
            } else {
                prop_assert!(r < -thr);
            }
        }
    }

    #[test]
    fn generated_outlier_count_is_exact(
        n in 1usize..4,
        n_samples in 4usize..40,
        fraction in 0.0..1.0f64,
        seed in any::<u64>(),
        positive in any::<bool>(),
    ) {
        let mut spec = GenSpec::gaussian(n, n_samples, seed);
        spec.outlier_fraction = fraction;
        spec.outlier_mean = 5.0;
        spec.outlier_std = 2.0;
        spec.sign_mode = if positive { SignMode::PositiveOnly } else { SignMode::TwoSided };
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let truth = ds.truth.as_ref().unwrap();
        let nnz = truth.gross.iter().filter(|v| **v != 0.0).count();
        prop_assert_eq!(nnz, (fraction * n_samples as f64).round() as usize);
        if positive {
            prop_assert!(truth.gross.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn residual_projector_properties(
        seed in any::<u64>(),
        n in 1usize..4,
        extra in 1usize..12,
    ) {
        let n_samples = n + extra;
        let spec = GenSpec::gaussian(n, n_samples, seed);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let psi = residual_projector(&ds.regressors).unwrap();
        let idem = &psi.dot(&psi) - &psi;
        prop_assert!(max_abs(&idem) <= 1e-10);
        let sym = &psi - &psi.t().to_owned();
        prop_assert!(max_abs(&sym) <= 1e-10);
        let ann = psi.dot(&ds.regressors.t().to_owned());
        prop_assert!(max_abs(&ann) <= 1e-10);
    }

    #[test]
    fn projection_entry_bound_range(
        seed in any::<u64>(),
        n in 1usize..5,
        extra in 0usize..12,
    ) {
        let n_samples = n + extra;
        let spec = GenSpec::gaussian(n, n_samples, seed);
        let ds: Dataset<f64> = generate(&spec).unwrap();
        let r = r_value(&ds.regressors).unwrap();
        prop_assert!(r >= n as f64 / n_samples as f64 - 1e-10);
        prop_assert!(r <= 1.0 + 1e-10);
    }
}
