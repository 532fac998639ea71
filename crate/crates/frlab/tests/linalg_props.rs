//! Property tests for the linear-algebra kernels.

use frlab::linalg::{
    effective_rank, min_singular, operator_norm, pseudoinverse, svd, DenseMatrix, GramPinv,
    RankPolicy,
};
use proptest::prelude::*;

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim)
        .prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |data| DenseMatrix::new(r, c, data).unwrap())
        })
}

fn rel_gap(a: &DenseMatrix, b: &DenseMatrix, scale: f64) -> f64 {
    a.sub(b).unwrap().max_abs() / scale.max(1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moore_penrose_conditions(m in matrix_strategy(12)) {
        let policy = RankPolicy::for_shape(m.rows(), m.cols());
        let p = pseudoinverse(&m, &policy).unwrap();
        let mp = m.matmul(&p).unwrap();
        let pm = p.matmul(&m).unwrap();
        let scale = m.max_abs().max(1.0);
        prop_assert!(rel_gap(&mp.matmul(&m).unwrap(), &m, scale) < 1e-10);
        prop_assert!(rel_gap(&pm.matmul(&p).unwrap(), &p, p.max_abs().max(1.0)) < 1e-10);
        prop_assert!(mp.symmetry_defect() < 1e-10 * mp.max_abs().max(1.0));
        prop_assert!(pm.symmetry_defect() < 1e-10 * pm.max_abs().max(1.0));
    }

    #[test]
    fn pinv_norm_is_reciprocal_min_singular(m in matrix_strategy(10)) {
        let policy = RankPolicy::for_shape(m.rows(), m.cols());
        let dec = svd(&m).unwrap();
        let cutoff = dec.singulars[0] * policy.relative_cutoff;
        let sigma_r = dec.singulars.iter().copied().filter(|s| *s > cutoff).last();
        if let Some(sigma_r) = sigma_r {
            let p = pseudoinverse(&m, &policy).unwrap();
            let norm = operator_norm(&p).unwrap();
            prop_assert!((norm * sigma_r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn svd_reconstruction_and_order(m in matrix_strategy(12)) {
        let dec = svd(&m).unwrap();
        let recon = dec.reconstruct();
        let scale = dec.singulars[0].max(1.0) * m.rows().max(m.cols()) as f64;
        prop_assert!(recon.sub(&m).unwrap().max_abs() <= 1e-10 * scale);
        prop_assert!(dec.singulars.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(dec.singulars.iter().all(|s| *s >= 0.0));
        prop_assert!((min_singular(&m).unwrap() - dec.singulars.last().unwrap()).abs() < 1e-12 * scale);
    }

    #[test]
    fn effective_rank_scale_invariant(m in matrix_strategy(8), c in 0.01f64..100.0) {
        let s = m.gram_right();
        let (a, _) = effective_rank(&s).unwrap();
        let (b, _) = effective_rank(&s.scale(c)).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * a.max(1.0));
        prop_assert!(a >= 1.0 - 1e-12);
        prop_assert!(a <= s.rows() as f64 + 1e-12);
    }

    #[test]
    fn full_rank_projectors_are_identity(data in proptest::collection::vec(-5.0f64..5.0, 24)) {
        // 6x4 tall: almost surely full column rank under the continuous draw.
        let b = DenseMatrix::new(6, 4, data).unwrap();
        if min_singular(&b).unwrap() > 1e-6 {
            let p = pseudoinverse(&b, &RankPolicy::for_shape(6, 4)).unwrap();
            let pb = p.matmul(&b).unwrap();
            prop_assert!(rel_gap(&pb, &DenseMatrix::identity(4), 1.0) < 1e-9);
            // Full-row-rank via the transpose.
            let bt = b.transpose();
            let pt = pseudoinverse(&bt, &RankPolicy::for_shape(4, 6)).unwrap();
            let bp = bt.matmul(&pt).unwrap();
            prop_assert!(rel_gap(&bp, &DenseMatrix::identity(4), 1.0) < 1e-9);
        }
    }

    #[test]
    fn gram_pinv_matches_svd_route(m in matrix_strategy(10), rhs_seed in 0u64..1000) {
        let solver = GramPinv::new(&m).unwrap();
        let pinv = pseudoinverse(&m, &RankPolicy::for_shape(m.rows(), m.cols())).unwrap();
        let v: Vec<f64> = (0..m.rows())
            .map(|i| ((rhs_seed + i as u64) as f64 * 0.7).sin())
            .collect();
        let a = solver.pinv_apply(&v).unwrap();
        let b = pinv.matvec(&v).unwrap();
        let scale = b.iter().fold(1.0f64, |mx, x| mx.max(x.abs()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-7 * scale);
        }
    }
}
