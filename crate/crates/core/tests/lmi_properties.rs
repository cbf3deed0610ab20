use delaycert::lmi::Assignment;
use delaycert::{AffineExpr, LmiProblem, Mat, Sense, SignConstraint, VarKind};
use proptest::prelude::*;

fn mat(n: usize, m: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0..2.0f64, n * m).prop_map(move |d| Mat::from_vec(n, m, d).unwrap())
}

fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).max_abs() <= tol * (1.0 + a.max_abs())
}

/// Problem with a symmetric 3×3 `P` and a rectangular 3×2 `Y`.
fn two_vars() -> (LmiProblem, AffineExpr, AffineExpr) {
    let mut prob = LmiProblem::new();
    let p = prob.add_var("P", VarKind::Symmetric(3), SignConstraint::Free).unwrap();
    let y = prob
        .add_var("Y", VarKind::Rectangular(3, 2), SignConstraint::Free)
        .unwrap();
    (prob, p, y)
}

proptest! {
    #[test]
    fn evaluation_commutes_with_matrix_algebra(
        x in prop::collection::vec(-3.0..3.0f64, 12),
        l in mat(2, 3),
        t in mat(3, 4),
        c in mat(3, 3),
    ) {
        let (prob, p, y) = two_vars();
        let asg = Assignment::new(prob.variables(), &x);
        let (pv, yv) = (asg.get("P").unwrap(), asg.get("Y").unwrap());

        prop_assert!(close(&p.lmul(&l).unwrap().evaluate(&x), &(&l * &pv), 1e-12));
        prop_assert!(close(&y.rmul(&l).unwrap().evaluate(&x), &(&yv * &l), 1e-12));
        prop_assert!(close(&p.congruence(&t).unwrap().evaluate(&x), &(&t.transpose() * &(&pv * &t)), 1e-12));
        let he = p.add_const(&c).he().unwrap().evaluate(&x);
        let direct = &(&pv + &c) + &(&pv + &c).transpose();
        prop_assert!(close(&he, &direct, 1e-12));
        prop_assert!(he.asymmetry() == 0.0);
        prop_assert!(close(&y.transpose().evaluate(&x), &yv.transpose(), 0.0));
    }

    #[test]
    fn block_assembly_matches_dense_blocks(x in prop::collection::vec(-3.0..3.0f64, 12)) {
        let (prob, p, y) = two_vars();
        let asg = Assignment::new(prob.variables(), &x);
        let (pv, yv) = (asg.get("P").unwrap(), asg.get("Y").unwrap());
        let e = AffineExpr::block(&[[p.clone(), y.clone()], [y.transpose(), AffineExpr::zeros(2, 2)]]).unwrap();
        let d = Mat::block(&[[pv.clone(), yv.clone()], [yv.transpose(), Mat::zeros(2, 2)]]).unwrap();
        prop_assert!(close(&e.evaluate(&x), &d, 0.0));
        let bd = AffineExpr::block_diag(&[p, AffineExpr::constant(Mat::identity(2))]).unwrap();
        prop_assert!(close(&bd.evaluate(&x), &Mat::block_diag(&[pv, Mat::identity(2)]), 0.0));
    }

    #[test]
    fn variable_store_and_value_round_trip(v in mat(3, 3), w in mat(3, 2)) {
        let (prob, _, _) = two_vars();
        let sym = v.symmetric_part();
        let mut x = vec![0.0; prob.scalar_count()];
        prob.var("P").unwrap().store(&sym, &mut x);
        prob.var("Y").unwrap().store(&w, &mut x);
        let asg = Assignment::new(prob.variables(), &x);
        prop_assert_eq!(asg.get("P").unwrap(), sym);
        prop_assert_eq!(asg.get("Y").unwrap(), w);
    }

    #[test]
    fn compiled_blocks_are_scaled_oriented_constraints(
        x in prop::collection::vec(-3.0..3.0f64, 12),
        c in mat(3, 3),
    ) {
        let (mut prob, p, _) = two_vars();
        let expr = p.add_const(&c.symmetric_part());
        prob.add_lmi("neg", &expr, Sense::NegativeDefinite).unwrap();
        prob.add_lmi("pos", &expr, Sense::PositiveDefinite).unwrap();
        let form = prob.compile().unwrap();
        let value = expr.evaluate(&x).symmetric_part();
        for b in &form.blocks {
            let sign = if b.name == "neg" { 1.0 } else { -1.0 };
            prop_assert!(close(&b.evaluate(&x).scale(b.scale), &value.scale(sign), 1e-12));
        }
    }
}

#[test]
fn unknown_and_duplicate_variables_are_rejected() {
    let (mut prob, _, _) = two_vars();
    assert!(prob.add_var("P", VarKind::Scalar, SignConstraint::Free).is_err());
    assert!(prob.var_expr("Q").is_err());
    assert!(prob
        .add_var("b", VarKind::Rectangular(2, 2), SignConstraint::PositiveDefinite)
        .is_err());
}
