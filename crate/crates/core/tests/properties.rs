use proptest::prelude::*;

use pmsearch_core::matrix::{det_lemma_update, schur_det, Block, Matrix};
use pmsearch_core::minors::{enumerate_minors, enumerate_minors_recursive, violation_set_with, Engine};
use pmsearch_core::SubsetMask;

fn matrix_strategy(lo: usize, hi: usize) -> impl Strategy<Value = Matrix> {
    (lo..=hi).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| Matrix::new(n, d).unwrap())
    })
}

/// Random matrix plus `shift · I`, so determinants stay away from zero.
fn shifted(lo: usize, hi: usize, shift: f64) -> impl Strategy<Value = Matrix> {
    matrix_strategy(lo, hi).prop_map(move |m| {
        let n = m.n();
        let mut d = m.as_slice().to_vec();
        for i in 0..n {
            d[i * n + i] += shift * n as f64;
        }
        Matrix::new(n, d).unwrap()
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn submatrix_nesting(a in matrix_strategy(1, 8), inner in any::<u64>(), outer in any::<u64>()) {
        let n = a.n();
        let full = (1u64 << n) - 1;
        let beta_bits = (outer & full).max(1);
        let alpha_bits = (inner & beta_bits).max(beta_bits & beta_bits.wrapping_neg());
        let beta = SubsetMask::new(beta_bits, n).unwrap();
        let alpha = SubsetMask::new(alpha_bits, n).unwrap();
        let nested = a.principal_submatrix(&beta).unwrap()
            .principal_submatrix(&alpha.reindex_within(&beta).unwrap()).unwrap();
        prop_assert_eq!(nested, a.principal_submatrix(&alpha).unwrap());
    }

    #[test]
    fn permutation_moves_minors(a in matrix_strategy(1, 7), keys in prop::collection::vec(any::<u32>(), 7)) {
        let n = a.n();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| (keys[i], i));
        let b = a.permute_symmetric(&perm).unwrap();
        prop_assert!(close(a.det(), b.det(), 1e-10));
        for bits in 1..(1u64 << n) {
            let alpha = SubsetMask::new(bits, n).unwrap();
            let image: Vec<usize> = alpha.indices().map(|i| perm[i]).collect();
            let mapped = SubsetMask::from_indices(&image, n).unwrap();
            prop_assert!(close(b.principal_minor(&alpha).unwrap(), a.principal_minor(&mapped).unwrap(), 1e-10));
        }
    }

    #[test]
    fn determinant_lemma(m in shifted(1, 12, 1.0), u in prop::collection::vec(-1.0f64..1.0, 12),
                         v in prop::collection::vec(-1.0f64..1.0, 12), lambda in -2.0f64..2.0) {
        let n = m.n();
        let (u, v) = (&u[..n], &v[..n]);
        let minv_u = m.solve(u).unwrap();
        let lemma = det_lemma_update(m.det(), &minv_u, v, lambda);
        let scaled: Vec<f64> = u.iter().map(|x| x * lambda).collect();
        let direct = m.add_outer(&scaled, v).unwrap().det();
        prop_assert!((lemma - direct).abs() <= 1e-9 * direct.abs().max(m.det().abs()), "{} vs {}", lemma, direct);
    }

    #[test]
    fn schur_identity(a in shifted(2, 9, 1.0), split in 1usize..8) {
        let n = a.n();
        let k = 1 + split % (n - 1);
        let m = n - k;
        let s = a.as_slice();
        let pick = |r0: usize, rs: usize, c0: usize, cs: usize| -> Vec<f64> {
            (r0..r0 + rs).flat_map(|i| (c0..c0 + cs).map(move |j| s[i * n + j])).collect()
        };
        let c = Matrix::new(k, pick(0, k, 0, k)).unwrap();
        let d = Block::new(k, m, pick(0, k, k, m)).unwrap();
        let e = Block::new(m, k, pick(k, m, 0, k)).unwrap();
        let f = Matrix::new(m, pick(k, m, k, m)).unwrap();
        let r = schur_det(&c, &d, &e, &f).unwrap();
        prop_assert!((r.det_full - a.det()).abs() <= 1e-12 * a.det().abs().max(1.0));
        prop_assert!((r.det_full - r.det_f * r.det_schur).abs() <= 1e-9 * r.det_full.abs().max(1.0));
    }

    #[test]
    fn recursive_engine_matches_naive(a in matrix_strategy(1, 10)) {
        let naive: Vec<_> = enumerate_minors(&a).unwrap().collect();
        let mut rec = enumerate_minors_recursive(&a).unwrap();
        rec.sort_by_key(|r| r.alpha.bits());
        prop_assert_eq!(naive.len(), rec.len());
        // magnitude floor: subset determinants are bounded by Hadamard, ~k^{k/2}
        for (x, y) in naive.iter().zip(&rec) {
            prop_assert_eq!(x.alpha, y.alpha);
            let floor = 1e-9 * (x.alpha.len() as f64).powf(x.alpha.len() as f64 / 2.0);
            prop_assert!((x.value - y.value).abs() <= 1e-9 * x.value.abs() + floor,
                "{}: {} vs {}", x.alpha, x.value, y.value);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parallel_engine_is_bit_identical(a in matrix_strategy(10, 14), tau in -0.1f64..0.1) {
        let seq = violation_set_with(&a, tau, Engine::Naive).unwrap();
        for threads in [1, 2, 5] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let par = pool.install(|| violation_set_with(&a, tau, Engine::Parallel)).unwrap();
            prop_assert_eq!(&par.violations, &seq.violations);
            prop_assert_eq!(par.min_minor.value.to_bits(), seq.min_minor.value.to_bits());
            prop_assert_eq!(par.regime, seq.regime);
        }
    }
}
