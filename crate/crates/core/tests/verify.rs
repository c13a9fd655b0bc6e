use ldg_plates::lifting::{lift_b, LiftingSpace, LocalLifting};
use ldg_plates::verify::{lifting_adjoint_residual, run_suite};
use ldg_plates::Result;

#[test]
fn property_suite_passes() {
    let checks = run_suite();
    for c in &checks {
        println!("{c}");
    }
    assert!(checks.iter().all(|c| c.passed()));
}

#[test]
fn sign_flipped_lifting_is_detected() {
    let flipped = |l: &LiftingSpace, e: usize, j: &[f64]| -> Result<LocalLifting> {
        let mut out = lift_b(l, e, j)?;
        for part in &mut out.parts {
            for c in &mut part.coeffs {
                *c = c.scale(-1.0);
            }
        }
        Ok(out)
    };
    let r = lifting_adjoint_residual(&flipped, 3).unwrap();
    assert!(r > 1e-3, "residual {r}");
    assert!(lifting_adjoint_residual(&lift_b, 3).unwrap() <= 1e-11);
}
