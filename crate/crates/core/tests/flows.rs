use std::sync::Arc;

use ldg_plates::flows::{gradient_flow, metric_preprocess, FlowParams, Problem, StepRecord};
use ldg_plates::forms::{assemble_constraint, MaterialParams};
use ldg_plates::metrics;
use ldg_plates::presets::{diagonal_deflection, preset, run_experiment};
use ldg_plates::solvers::{saddle_solve, CsrMatrix, Factorization, SchurPreconditioner};
use ldg_plates::Mesh;

#[test]
fn identity_square_is_stationary() {
    let out = run_experiment(&preset("identity_square", Some(3)).unwrap(), None).unwrap();
    assert_eq!(out.flow.n, 0);
    assert!(out.flow.energy.abs() <= 1e-8, "{}", out.flow.energy);
    assert!(out.flow.defect <= 1e-12, "{}", out.flow.defect);
}

#[test]
fn vertical_load_coarse_level() {
    let spec = preset("vertical_load", Some(3)).unwrap();
    let mut records: Vec<StepRecord> = Vec::new();
    let p = spec.problem().unwrap();
    let mut obs = |r: &StepRecord| {
        records.push(*r);
        Ok(())
    };
    let st = gradient_flow(&p, p.identity(), &spec.flow, Some(&mut obs)).unwrap();
    assert_eq!(st.n, 11);
    assert!((st.energy / -1.0016e-2 - 1.0).abs() < 1e-3, "{}", st.energy);
    assert!((st.defect / 1.0620e-2 - 1.0).abs() < 1e-3, "{}", st.defect);
    let defl = diagonal_deflection(&st.y).unwrap();
    assert!((defl / 0.0478 - 1.0).abs() < 0.05, "{defl}");
    assert_eq!(records.len(), 11);
    for w in records.windows(2) {
        assert!(w[1].energy < w[0].energy);
        assert!(w[1].defect >= w[0].defect);
    }
}

#[test]
fn diagonal_preconditioner_reaches_same_state() {
    let spec = preset("vertical_load", Some(2)).unwrap();
    let p = spec.problem().unwrap();
    let plain = gradient_flow(&p, p.identity(), &spec.flow, None).unwrap();
    let params = FlowParams {
        preconditioner: SchurPreconditioner::Diagonal,
        cg_tol: 1e-10,
        ..spec.flow
    };
    let pre = gradient_flow(&p, p.identity(), &params, None).unwrap();
    assert_eq!(plain.n, pre.n);
    assert!((plain.energy - pre.energy).abs() <= 1e-6 * plain.energy.abs());
}

#[test]
fn flat_start_stays_flat_under_preprocessing() {
    let mesh = Arc::new(Mesh::disc(1.0, 20).unwrap());
    let mat = MaterialParams {
        sigma: 1.0,
        ..MaterialParams::default()
    };
    let p = Problem::new(mesh, metrics::hyperbolic_paraboloid(), mat, None, None).unwrap();
    let params = FlowParams {
        max_steps: 10,
        eps0_pp: 1e-12,
        tol_pp: 1e-14,
        ..FlowParams::default()
    };
    let st = metric_preprocess(&p, p.identity(), &params, None).unwrap();
    let ns = p.space.scalar_dofs();
    assert!(st.y.coeffs()[2 * ns..].iter().all(|v| v.abs() <= 1e-12));
    assert!(st.n > 0);
}

#[test]
fn linearized_constraint_holds_after_solve() {
    let spec = preset("vertical_load", Some(2)).unwrap();
    let p = spec.problem().unwrap();
    let y = p.identity();
    let a = CsrMatrix::linear_combination(1.0 / spec.flow.tau, &p.h2, 1.0, &p.bending.matrix);
    let factor = Factorization::new(&a).unwrap();
    let b = assemble_constraint(&y);
    let f: Vec<f64> = p
        .load
        .iter()
        .zip(&p.bending.data)
        .zip(p.bending.apply(y.coeffs()))
        .map(|((f, l), a)| f + l - a)
        .collect();
    for tol in [1e-6, 1e-10] {
        let (dy, s) = saddle_solve(&factor, &b, &f, tol, 10 * b.nrows()).unwrap();
        let res = b.apply(&dy).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fnorm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            res <= 10.0 * tol * fnorm,
            "tol {tol}: {res} vs {fnorm}, {} its",
            s.iterations
        );
    }
}

#[test]
fn rejects_invalid_parameters() {
    let spec = preset("vertical_load", Some(2)).unwrap();
    let p = spec.problem().unwrap();
    for bad in [
        FlowParams {
            tau: 0.0,
            ..spec.flow
        },
        FlowParams {
            cg_tol: -1.0,
            ..spec.flow
        },
        FlowParams {
            eps0_pp: 0.0,
            tol_pp: 0.0,
            ..spec.flow
        },
    ] {
        assert!(gradient_flow(&p, p.identity(), &bad, None).is_err());
    }
}
