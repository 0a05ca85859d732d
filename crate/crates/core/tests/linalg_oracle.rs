//! Complex linear algebra against nalgebra and algebraic invariants.

use fjsim::channel::{sample_channel, stream_rng};
use fjsim::linalg::{
    complexify_vec, inverse_hpd, logdet_hpd, nullspace_basis, realify, realify_vec, svd, ComplexMatrix, DEFAULT_RANK_TOL,
};
use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn to_na(a: &ComplexMatrix) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| Complex::new(a[(i, j)].re, a[(i, j)].im))
}

fn matrix(rows: usize, cols: usize, entries: &[(f64, f64)]) -> ComplexMatrix {
    ComplexMatrix::new(rows, cols, entries.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
}

#[test]
fn singular_values_match_nalgebra() {
    for seed in 0..200 {
        let (m, n) = (1 + seed as usize % 6, 1 + (seed as usize / 6) % 6);
        let a = sample_channel(m, n, &mut stream_rng(seed, 0));
        let ours = svd(&a).unwrap();
        let mut theirs: Vec<f64> = to_na(&a).singular_values().iter().copied().collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(ours.sigma.len(), theirs.len());
        for (x, y) in ours.sigma.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-10 * theirs[0].max(1.0), "seed {seed}: {x} vs {y}");
        }
        assert!((&ours.reconstruct() - &a).frobenius_norm() <= 1e-10 * a.frobenius_norm().max(1.0));
    }
}

#[test]
fn logdet_matches_nalgebra_determinant() {
    for seed in 0..200 {
        let n = 1 + seed as usize % 6;
        let b = sample_channel(n, n + 2, &mut stream_rng(seed, 1));
        let a = &(&b * &b.adjoint()) + &ComplexMatrix::identity(n).scale(0.1);
        let det = to_na(&a).determinant();
        assert!(det.im.abs() <= 1e-8 * det.re.abs());
        assert!((logdet_hpd(&a).unwrap() - det.re.ln()).abs() <= 1e-9, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn nullspace_is_orthonormal_and_annihilated(nr in 1usize..4, extra in 1usize..4, e in entries(6 * 3)) {
        let nt = nr + extra;
        let h = matrix(nt, nr, &e[..nt * nr]);
        let z = nullspace_basis(&h.adjoint(), DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(z.cols(), nt - nr);
        prop_assert!((&h.adjoint() * &z).frobenius_norm() <= 1e-10 * h.frobenius_norm().max(1.0));
        let gram = &z.adjoint() * &z;
        prop_assert!((&gram - &ComplexMatrix::identity(z.cols())).frobenius_norm() <= 1e-10);
    }
}

proptest! {
    #[test]
    fn realify_is_a_homomorphism(a in entries(6), b in entries(6), x in entries(3)) {
        let a = matrix(2, 3, &a);
        let b = matrix(3, 2, &b);
        let x: Vec<Complex64> = x.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        let lhs = realify(&(&a * &b)).0;
        let rhs = realify(&a).0.dot(&realify(&b).0);
        prop_assert!((&lhs - &rhs).iter().all(|d| d.abs() <= 1e-12));
        let y = realify(&a).0.dot(&realify_vec(&x));
        prop_assert!((&y - &realify_vec(&a.mul_vec(&x).unwrap())).iter().all(|d| d.abs() <= 1e-12));
        prop_assert_eq!(complexify_vec(realify_vec(&x).as_slice().unwrap()), x);
        let ah = realify(&a.adjoint()).0;
        prop_assert!((&ah - &realify(&a).0.t()).iter().all(|d| d.abs() <= 1e-15));
    }

    #[test]
    fn logdet_of_inverse_cancels(n in 1usize..5, e in entries(4 * 6), shift in 0.05f64..2.0) {
        let b = matrix(n, 6, &e[..n * 6]);
        let a = &(&b * &b.adjoint()) + &ComplexMatrix::identity(n).scale(shift);
        let s = logdet_hpd(&a).unwrap() + logdet_hpd(&inverse_hpd(&a).unwrap()).unwrap();
        prop_assert!(s.abs() <= 1e-9, "{}", s);
    }
}
