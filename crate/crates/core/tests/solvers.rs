use ldg_plates::solvers::{saddle_solve, schur_solve_preconditioned, CsrMatrix, Factorization};
use ldg_plates::verify::dense_saddle_solve;
use proptest::prelude::*;

/// `A = G G^T + n I` for the given `n x n` entries of `G`.
fn spd(n: usize, g: &[f64]) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum::<f64>()
                + if i == j { n as f64 } else { 0.0 };
            t.push((i, j, v));
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

fn dense(rows: usize, cols: usize, v: &[f64]) -> CsrMatrix {
    let t = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j, v[i * cols + j])))
        .collect();
    CsrMatrix::from_triplets(rows, cols, t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schur_solve_matches_dense_kkt(
        g in prop::collection::vec(-1.0f64..1.0, 36),
        bv in prop::collection::vec(-1.0f64..1.0, 4 * 18),
        f in prop::collection::vec(-1.0f64..1.0, 18),
    ) {
        let a = spd(6, &g);
        let mut bv = bv;
        // keep B well conditioned
        for i in 0..4 {
            bv[i * 18 + i * 4] += 3.0;
        }
        let b = dense(4, 18, &bv);
        let factor = Factorization::new(&a).unwrap();
        let (dy, s) = saddle_solve(&factor, &b, &f, 1e-13, 40).unwrap();
        let (dy_ref, l_ref) = dense_saddle_solve(&a, &b, &f).unwrap();
        for (x, y) in dy.iter().zip(&dy_ref) {
            prop_assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
        for (x, y) in s.multipliers.iter().zip(&l_ref) {
            prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
        }
        let bdy = b.apply(&dy);
        prop_assert!(bdy.iter().all(|v| v.abs() <= 1e-10));

        let diag: Vec<f64> = (0..6).map(|i| a.get(i, i)).collect();
        let p = schur_solve_preconditioned(&b, &factor, &f, 1e-13, 40, Some(&diag)).unwrap();
        for (x, y) in p.multipliers.iter().zip(&l_ref) {
            prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
        }
    }
}
