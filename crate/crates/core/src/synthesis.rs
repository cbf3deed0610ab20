//! Gain synthesis for the averaged-output feedback `u = (1/h) K ∫_{t−h}^{t} x`
//! and for the observer `ε̇ = Aε − (1/h) L C ∫ε`.
//!
//! Both use the structured slack `Y = Z·F_ε`. For the controller a
//! congruence with `X = Z⁻¹` turns the product `Z·B·K` into the new unknown
//! `K̄ = K·X`; for the observer `L̄ = Zᵀ·L` plays the same role.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{AffineExpr, Assignment, LmiProblem, Sense, SignConstraint, VarKind};
use crate::matrix::{singular_values, Mat};
use crate::sdp::{self, SolveStatus, SolverSettings};
use crate::stability::{
    self, decay_expr, positivity_expr, CertifyOutcome, EpsilonProfile, SlackMode, StabilityCertificate,
};
use crate::system::{ControlledSystem, DelaySystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainKind {
    StateFeedback,
    Observer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainResult {
    pub kind: GainKind,
    /// `K` (m×n) or `L` (n×p).
    pub gain: Mat,
    /// `X` for the controller, `Z` for the observer.
    pub congruence: Mat,
    /// `K̄ = K·X` or `L̄ = Zᵀ·L`.
    pub transformed_gain: Mat,
    pub condition_number: f64,
    pub profile: EpsilonProfile,
    pub alpha: f64,
    pub h: f64,
    /// Closed loop (controller) or error dynamics (observer).
    pub closed_loop: DelaySystem,
    /// Free-slack certificate of `closed_loop` at the same `(α, h)`.
    pub certificate: StabilityCertificate,
}

#[derive(Clone, Debug)]
pub enum SynthesisOutcome {
    Synthesized(Box<GainResult>),
    Infeasible { margin: Option<f64> },
}

impl SynthesisOutcome {
    pub fn result(&self) -> Option<&GainResult> {
        match self {
            SynthesisOutcome::Synthesized(r) => Some(r),
            SynthesisOutcome::Infeasible { .. } => None,
        }
    }
}

/// Profile used when none is requested: dropping the delayed-state term
/// from the slack gives the larger delay intervals.
pub const DEFAULT_PROFILE: EpsilonProfile = EpsilonProfile::SKIP_DELAYED;

const COND_WARN: f64 = 1e8;

fn check_common(alpha: f64, profile: &EpsilonProfile) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!("decay rate must be ≥ 0, got {alpha}")));
    }
    profile.validate()
}

/// `[M₁ M₂ M₃ M₄]` from n×n expressions.
fn row4(parts: [AffineExpr; 4]) -> Result<AffineExpr> {
    AffineExpr::block(&[parts])
}

/// LMIs for the state-feedback gain. Variables: `P` (≻ 0), `S`, `R`,
/// `beta1`, `X` and `Kbar`.
pub fn build_controller_lmi(sys: &ControlledSystem, alpha: f64, profile: &EpsilonProfile) -> Result<LmiProblem> {
    check_common(alpha, profile)?;
    let n = sys.n();
    if sys.c != Mat::identity(n) {
        return Err(Error::invalid(
            "state-feedback synthesis needs C = I; use the observer for other outputs",
        ));
    }
    let h = sys.h;
    let m = sys.inputs();
    let mut prob = LmiProblem::new();
    let p = prob.add_var("P", VarKind::Symmetric(2 * n), SignConstraint::PositiveDefinite)?;
    let s = prob.add_var("S", VarKind::Symmetric(n), SignConstraint::PositiveDefinite)?;
    let r = prob.add_var("R", VarKind::Symmetric(n), SignConstraint::PositiveDefinite)?;
    let beta1 = prob.add_var("beta1", VarKind::Scalar, SignConstraint::PositiveScalar)?;
    let x = prob.add_var("X", VarKind::Rectangular(n, n), SignConstraint::Free)?;
    let kbar = prob.add_var("Kbar", VarKind::Rectangular(m, n), SignConstraint::Free)?;
    let zn = AffineExpr::zeros(n, n);
    // N·X̃ + [0 0 0 B·K̄] with N = [A 0 −I 0]
    let row = row4([x.lmul(&sys.a)?, zn.clone(), x.scale(-1.0), kbar.lmul(&sys.b)?])?;
    let slack = row.transpose().rmul(&profile.matrix(n))?.he()?;
    let decay = decay_expr(n, alpha, h, &p, &s, &r)?.add(&slack);
    prob.add_lmi("decay", &decay, Sense::NegativeDefinite)?;
    prob.add_lmi(
        "positivity",
        &positivity_expr(n, alpha, h, &p, &s, &r, &beta1)?,
        Sense::PositiveDefinite,
    )?;
    prob.set_box_bound(1.0);
    Ok(prob)
}

/// LMIs for the observer gain. Variables: `P` (free), `S`, `R`, `beta1`,
/// `Z` and `Lbar`.
pub fn build_observer_lmi(sys: &ControlledSystem, alpha: f64, profile: &EpsilonProfile) -> Result<LmiProblem> {
    check_common(alpha, profile)?;
    let n = sys.n();
    let p_out = sys.outputs();
    let h = sys.h;
    let mut prob = LmiProblem::new();
    let p = prob.add_var("P", VarKind::Symmetric(2 * n), SignConstraint::Free)?;
    let s = prob.add_var("S", VarKind::Symmetric(n), SignConstraint::PositiveDefinite)?;
    let r = prob.add_var("R", VarKind::Symmetric(n), SignConstraint::PositiveDefinite)?;
    let beta1 = prob.add_var("beta1", VarKind::Scalar, SignConstraint::PositiveScalar)?;
    let z = prob.add_var("Z", VarKind::Rectangular(n, n), SignConstraint::Free)?;
    let lbar = prob.add_var("Lbar", VarKind::Rectangular(n, p_out), SignConstraint::Free)?;
    let f_eps = profile.matrix(n);
    let zn = AffineExpr::zeros(n, n);
    let n_mat = Mat::block(&[[
        sys.a.clone(),
        Mat::zeros(n, n),
        Mat::scaled_identity(n, -1.0),
        Mat::zeros(n, n),
    ]])?;
    let term_z = z.lmul(&n_mat.transpose())?.rmul(&f_eps)?;
    let lc = row4([zn.clone(), zn.clone(), zn, lbar.rmul(&sys.c)?.scale(-1.0)])?;
    let term_l = lc.transpose().rmul(&f_eps)?;
    let decay = decay_expr(n, alpha, h, &p, &s, &r)?.add(&term_z.add(&term_l).he()?);
    prob.add_lmi("decay", &decay, Sense::NegativeDefinite)?;
    prob.add_lmi(
        "positivity",
        &positivity_expr(n, alpha, h, &p, &s, &r, &beta1)?,
        Sense::PositiveDefinite,
    )?;
    prob.set_box_bound(1.0);
    Ok(prob)
}

fn conclusive(status: SolveStatus, what: &str) -> Result<bool> {
    match status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::InfeasibleCertificate => Ok(false),
        other => Err(Error::Solver(format!("{what}: solver stopped with {other:?}"))),
    }
}

pub fn controller_feasible(
    sys: &ControlledSystem,
    alpha: f64,
    profile: &EpsilonProfile,
    settings: &SolverSettings,
) -> Result<bool> {
    let form = build_controller_lmi(sys, alpha, profile)?.compile()?;
    conclusive(
        sdp::solve(&form, &settings.fast_feasibility())?.status,
        "controller feasibility",
    )
}

pub fn observer_feasible(
    sys: &ControlledSystem,
    alpha: f64,
    profile: &EpsilonProfile,
    settings: &SolverSettings,
) -> Result<bool> {
    let form = build_observer_lmi(sys, alpha, profile)?.compile()?;
    conclusive(
        sdp::solve(&form, &settings.fast_feasibility())?.status,
        "observer feasibility",
    )
}

fn condition(m: &Mat) -> Result<(f64, bool)> {
    let sv = singular_values(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    let nonsingular = smax > 0.0 && smin > 1e-9 * smax;
    Ok((if smin > 0.0 { smax / smin } else { f64::INFINITY }, nonsingular))
}

/// Solves the synthesis problem (feasibility, then `β₁` maximization) and
/// returns the raw assignment vector.
fn solve_synthesis(
    prob: &LmiProblem,
    settings: &SolverSettings,
) -> Result<std::result::Result<(crate::lmi::StandardForm, Vec<f64>), Option<f64>>> {
    let form = prob.compile()?;
    let feas = sdp::solve(&form, settings)?;
    if !conclusive(feas.status, "synthesis feasibility")? {
        return Ok(Err(feas.margin));
    }
    let opt = sdp::solve_from(&form.with_maximized_scalar("beta1")?, &feas.x, settings)?;
    let x = match opt.status {
        SolveStatus::Optimal | SolveStatus::MaxIter => opt.x,
        _ => feas.x,
    };
    Ok(Ok((form, x)))
}

fn recertify(closed: &DelaySystem, alpha: f64, settings: &SolverSettings) -> Result<StabilityCertificate> {
    match stability::certify(closed, alpha, &SlackMode::Free, settings)? {
        CertifyOutcome::Certified(c) => Ok(*c),
        CertifyOutcome::Infeasible { .. } => Err(Error::Solver(format!(
            "synthesized gain does not re-certify at h={} α={alpha}",
            closed.h
        ))),
    }
}

/// State-feedback gain `K = K̄X⁻¹` for `u = (1/h) K ∫x`; needs `C = I`.
pub fn synthesize_controller(
    sys: &ControlledSystem,
    alpha: f64,
    profile: &EpsilonProfile,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    let prob = build_controller_lmi(sys, alpha, profile)?;
    let (form, x) = match solve_synthesis(&prob, settings)? {
        Ok(v) => v,
        Err(margin) => return Ok(SynthesisOutcome::Infeasible { margin }),
    };
    let asg = Assignment::new(&form.variables, &x);
    let xm = asg.get("X")?;
    let kbar = asg.get("Kbar")?;
    let (cond, nonsingular) = condition(&xm)?;
    if !nonsingular {
        return Err(Error::Singular("congruence variable X is numerically singular"));
    }
    if cond > COND_WARN {
        log::warn!("cond(X) = {cond:.3e}; the gain may be poorly determined");
    }
    let k = kbar.try_matmul(&xm.inverse()?)?;
    let closed = sys.close_loop(&k)?;
    let certificate = recertify(&closed, alpha, settings)?;
    Ok(SynthesisOutcome::Synthesized(Box::new(GainResult {
        kind: GainKind::StateFeedback,
        gain: k,
        congruence: xm,
        transformed_gain: kbar,
        condition_number: cond,
        profile: *profile,
        alpha,
        h: sys.h,
        closed_loop: closed,
        certificate,
    })))
}

/// Observer gain `L = Z⁻ᵀL̄` for `ε̇ = Aε − (1/h) L C ∫ε`.
pub fn synthesize_observer(
    sys: &ControlledSystem,
    alpha: f64,
    profile: &EpsilonProfile,
    settings: &SolverSettings,
) -> Result<SynthesisOutcome> {
    let prob = build_observer_lmi(sys, alpha, profile)?;
    let (form, x) = match solve_synthesis(&prob, settings)? {
        Ok(v) => v,
        Err(margin) => return Ok(SynthesisOutcome::Infeasible { margin }),
    };
    let asg = Assignment::new(&form.variables, &x);
    let z = asg.get("Z")?;
    let lbar = asg.get("Lbar")?;
    let (cond, nonsingular) = condition(&z)?;
    if !nonsingular {
        return Err(Error::Singular("slack Z is numerically singular"));
    }
    if cond > COND_WARN {
        log::warn!("cond(Z) = {cond:.3e}; the gain may be poorly determined");
    }
    let l = z.transpose().solve(&lbar)?;
    let closed = sys.observer_error(&l)?;
    let certificate = recertify(&closed, alpha, settings)?;
    Ok(SynthesisOutcome::Synthesized(Box::new(GainResult {
        kind: GainKind::Observer,
        gain: l,
        congruence: z,
        transformed_gain: lbar,
        condition_number: cond,
        profile: *profile,
        alpha,
        h: sys.h,
        closed_loop: closed,
        certificate,
    })))
}

/// Plant plus observer under `u = −K x̂`, in the coordinates `[x; x − x̂]`:
///
/// ```text
///     Ẋ = [A−BK  BK; 0  A] X + [0  0; 0  −(1/h)LC] ∫X
/// ```
pub fn assemble_closed_loop(a: &Mat, b: &Mat, c: &Mat, k: &Mat, l: &Mat, h: f64) -> Result<DelaySystem> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n || c.cols() != n || k.shape() != (b.cols(), n) || l.shape() != (n, c.rows()) {
        return Err(Error::dim(
            "assemble_closed_loop",
            format!(
                "A {:?}, B {:?}, C {:?}, K {:?}, L {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                k.shape(),
                l.shape()
            ),
        ));
    }
    let bk = b.try_matmul(k)?;
    let z = Mat::zeros(n, n);
    let a_aug = Mat::block(&[[a - &bk, bk], [z.clone(), a.clone()]])?;
    let lc = l.try_matmul(c)?.scale(-1.0 / h);
    let ad_aug = Mat::block(&[[z.clone(), z.clone()], [z, lc]])?;
    DelaySystem::new(a_aug, Mat::zeros(2 * n, 2 * n), ad_aug, h)
}

/// Observer-based loop is stable if `A − BK` is Hurwitz (strictly) and the
/// observer error system holds a valid certificate.
pub fn separation_check(
    a: &Mat,
    b: &Mat,
    k: &Mat,
    error_system: &DelaySystem,
    observer_cert: &StabilityCertificate,
    eps: f64,
) -> Result<bool> {
    let acl = a - &b.try_matmul(k)?;
    let hurwitz = acl.spectral_abscissa()? < 0.0;
    Ok(hurwitz && observer_cert.verify(error_system, eps)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant(h: f64) -> ControlledSystem {
        ControlledSystem::new(
            Mat::from_rows(&[[0.2, 0.0], [0.2, 0.1]]).unwrap(),
            Mat::from_rows(&[[-1.0, 0.0], [-1.0, -1.0]]).unwrap(),
            Mat::identity(2),
            h,
        )
        .unwrap()
    }

    #[test]
    fn controller_rejects_partial_output() {
        let mut sys = plant(1.0);
        sys.c = Mat::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(build_controller_lmi(&sys, 0.0, &EpsilonProfile::SKIP_DELAYED).is_err());
    }

    #[test]
    fn closed_loop_without_gains_is_block_diagonal() {
        let sys = plant(1.0);
        let cl = assemble_closed_loop(&sys.a, &sys.b, &sys.c, &Mat::zeros(2, 2), &Mat::zeros(2, 2), 1.0).unwrap();
        let expect = Mat::block_diag(&[sys.a.clone(), sys.a.clone()]);
        assert_eq!(cl.a, expect);
        assert_eq!(cl.a_dist, Mat::zeros(4, 4));
    }

    #[test]
    fn augmented_spectrum_is_union() {
        let sys = plant(1.0);
        let k = Mat::from_rows(&[[0.5, 0.1], [0.3, 0.7]]).unwrap();
        let cl = assemble_closed_loop(&sys.a, &sys.b, &sys.c, &k, &Mat::identity(2), 1.0).unwrap();
        let mut got: Vec<f64> = cl.a.eigenvalues().unwrap().iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = (&sys.a - &sys.b.try_matmul(&k).unwrap())
            .eigenvalues()
            .unwrap()
            .iter()
            .chain(sys.a.eigenvalues().unwrap().iter())
            .map(|z| z.re)
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
    }
}
