use delaycert::sdp::{self, SolveStatus, SolverSettings};
use delaycert::{AffineExpr, LmiProblem, Mat, Sense, SignConstraint, SymMat, VarKind};
use proptest::prelude::*;

fn spd(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |d| {
        let g = Mat::from_vec(n, n, d).unwrap();
        let mut m = &g * &g.transpose();
        m.axpy(0.2, &Mat::identity(n));
        m
    })
}

fn sym(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |d| Mat::from_vec(n, n, d).unwrap().symmetric_part())
}

fn min_eig(m: &Mat) -> f64 {
    SymMat::symmetrize(m).min_eigenvalue().unwrap()
}

/// `lo ≺ X ≺ lo + gap` for a symmetric `X`; feasible iff `gap ≻ 0`.
fn sandwich(lo: &Mat, gap: &Mat) -> LmiProblem {
    let n = lo.rows();
    let mut prob = LmiProblem::new();
    let x = prob.add_var("X", VarKind::Symmetric(n), SignConstraint::Free).unwrap();
    let hi = lo + gap;
    prob.add_lmi("lower", &x.add_const(&lo.scale(-1.0)), Sense::PositiveDefinite)
        .unwrap();
    prob.add_lmi("upper", &x.add_const(&hi.scale(-1.0)), Sense::NegativeDefinite)
        .unwrap();
    prob.set_box_bound(10.0);
    prob
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_sandwich_returns_interior_point(lo in sym(3), gap in spd(3)) {
        let prob = sandwich(&lo, &gap);
        let form = prob.compile().unwrap();
        let sol = sdp::solve(&form, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let x = sol.assignment(&form).get("X").unwrap();
        prop_assert!(min_eig(&(&x - &lo)) > 0.0);
        prop_assert!(min_eig(&(&(&lo + &gap) - &x)) > 0.0);
    }

    #[test]
    fn crossed_sandwich_is_certified_infeasible(lo in sym(3), gap in spd(3)) {
        // X ≻ lo + gap and X ≺ lo
        let prob = sandwich(&(&lo + &gap), &gap.scale(-1.0));
        let form = prob.compile().unwrap();
        let sol = sdp::solve(&form, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::InfeasibleCertificate);
        prop_assert!(sol.dual_bound.unwrap() >= -SolverSettings::default().feasibility_margin);
    }

    #[test]
    fn largest_scalar_below_matrix_is_min_eigenvalue(m in sym(3)) {
        let mut prob = LmiProblem::new();
        let t = prob.add_var("t", VarKind::Scalar, SignConstraint::Free).unwrap();
        let lhs = AffineExpr::block_diag(&[t.clone(), t.clone(), t]).unwrap().add_const(&m.scale(-1.0));
        prob.add_lmi("below", &lhs, Sense::NegativeDefinite).unwrap();
        prob.set_box_bound(10.0);
        let form = prob.compile().unwrap();
        let sol = sdp::maximize_scalar(&form, "t", &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let tv = sol.assignment(&form).scalar("t").unwrap();
        let lmin = min_eig(&m);
        prop_assert!(tv < lmin && lmin - tv < 1e-6, "t = {tv}, λmin = {lmin}");
    }
}

#[test]
fn settings_round_trip_through_json() {
    let s = SolverSettings::default();
    let back: SolverSettings = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(s, back);
    let bad = SolverSettings {
        step_fraction: 1.5,
        ..SolverSettings::default()
    };
    assert!(bad.validate().is_err());
}
