//! Exponential-stability LMIs for [`DelaySystem`] and their certificates.
//!
//! With `ξ = [x(t); x(t−h); ẋ(t); (1/h)∫_{t−h}^{t} x]`, the decay condition is
//!
//! ```text
//!     Φ(α,h) = He(F₁ᵀ P (F₀ + αF₁)) + S̄ + h² F₃ᵀ R F₃ − e^{−2αh} F₂ᵀ R̃ F₂
//!     ξᵀ Φ ξ < 0   whenever   F₄ ξ = 0
//! ```
//!
//! which is imposed either with a free slack `Φ + He(F₄ᵀY) ≺ 0`, a
//! structured slack `Y = Z·F_ε`, or by projecting onto `ker F₄`. A second
//! LMI bounds the functional from below by `β₁‖x‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{AffineExpr, LmiProblem, Sense, SignConstraint, StandardForm, VarKind};
use crate::matrix::{null_space_basis, singular_values, Mat, SymMat};
use crate::sdp::{self, SolveStatus, SolverSettings};
use crate::system::DelaySystem;

/// Multipliers of the structured slack `Y = Z·[ε₁I ε₂I ε₃I ε₄I]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonProfile {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

impl EpsilonProfile {
    pub const ONES: Self = Self {
        e1: 1.0,
        e2: 1.0,
        e3: 1.0,
        e4: 1.0,
    };

    /// Drops the delayed-state slot (`ε₂ = 0`, the others 1).
    pub const SKIP_DELAYED: Self = Self {
        e1: 1.0,
        e2: 0.0,
        e3: 1.0,
        e4: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.e1, self.e2, self.e3, self.e4];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("EpsilonProfile"));
        }
        // the ẋ multiplier carries −ε₃(Z + Zᵀ); without it Z cannot be invertible
        if self.e3 == 0.0 {
            return Err(Error::invalid("epsilon profile needs ε₃ ≠ 0"));
        }
        Ok(())
    }

    /// `[ε₁I ε₂I ε₃I ε₄I]`, n×4n.
    pub fn matrix(&self, n: usize) -> Mat {
        let mut m = Mat::zeros(n, 4 * n);
        for (k, e) in [self.e1, self.e2, self.e3, self.e4].into_iter().enumerate() {
            m.set_submatrix(0, k * n, &Mat::scaled_identity(n, e));
        }
        m
    }
}

/// How the constraint `F₄ξ = 0` enters the decay LMI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlackMode {
    /// Free slack `Y ∈ ℝ^{n×4n}`.
    Free,
    /// `Y = Z·F_ε` with a square `Z`.
    Structured { profile: EpsilonProfile },
    /// `(F₄⊥)ᵀ Φ F₄⊥ ≺ 0` with `F₄⊥` a basis of `ker F₄`.
    Projected,
}

impl SlackMode {
    pub fn label(&self) -> String {
        match self {
            SlackMode::Free => "free-slack".into(),
            SlackMode::Structured { profile } if *profile == EpsilonProfile::ONES => "structured-ones".into(),
            SlackMode::Structured { profile } if *profile == EpsilonProfile::SKIP_DELAYED => {
                "structured-skip-delayed".into()
            }
            SlackMode::Structured { profile } => format!(
                "structured({}, {}, {}, {})",
                profile.e1, profile.e2, profile.e3, profile.e4
            ),
            SlackMode::Projected => "projected".into(),
        }
    }
}

/// The selection matrices `F₀ … F₃` acting on `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionMatrices {
    pub f0: Mat,
    pub f1: Mat,
    pub f2: Mat,
    pub f3: Mat,
}

pub fn selection_matrices(n: usize, h: f64) -> Result<SelectionMatrices> {
    if n == 0 {
        return Err(Error::invalid("state dimension must be at least 1"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("delay must be positive, got {h}")));
    }
    let i = Mat::identity(n);
    let z = Mat::zeros(n, n);
    let f0 = Mat::block(&[
        [z.clone(), z.clone(), i.clone(), z.clone()],
        [i.clone(), i.scale(-1.0), z.clone(), z.clone()],
    ])?;
    let f1 = Mat::block(&[
        [i.clone(), z.clone(), z.clone(), z.clone()],
        [z.clone(), z.clone(), z.clone(), i.scale(h)],
    ])?;
    let f2 = Mat::block(&[
        [i.clone(), i.scale(-1.0), z.clone(), z.clone()],
        [i.clone(), i.clone(), z.clone(), i.scale(-2.0)],
    ])?;
    let f3 = Mat::block(&[[z.clone(), z.clone(), i, z]])?;
    Ok(SelectionMatrices { f0, f1, f2, f3 })
}

/// `F₄ = [A  A_d  −I  hA_D]`, so that `F₄ξ = 0` along trajectories.
pub fn dynamics_constraint(sys: &DelaySystem) -> Mat {
    let n = sys.n();
    Mat::block(&[[
        sys.a.clone(),
        sys.a_d.clone(),
        Mat::scaled_identity(n, -1.0),
        sys.a_dist.scale(sys.h),
    ]])
    .expect("system matrices are conformal")
}

/// `eᵘ − 1 − u`, accurate for small `u`.
pub(crate) fn exp_excess(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // Taylor terms uᵏ/k! for k ≥ 2
        let mut term = u * u / 2.0;
        let mut sum = term;
        for k in 3..20 {
            term *= u / k as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        u.exp_m1() - u
    }
}

/// `4α²h / (e^{2αh} − 2αh − 1)`, with its limit `2/h` at `α = 0`.
pub fn exp_factor(alpha: f64, h: f64) -> f64 {
    if alpha == 0.0 {
        return 2.0 / h;
    }
    4.0 * alpha * alpha * h / exp_excess(2.0 * alpha * h)
}

fn check_rate(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!("decay rate must be ≥ 0, got {alpha}")));
    }
    Ok(())
}

/// Φ(α,h) in terms of affine expressions for `P` (2n), `S`, `R` (n).
pub fn decay_expr(n: usize, alpha: f64, h: f64, p: &AffineExpr, s: &AffineExpr, r: &AffineExpr) -> Result<AffineExpr> {
    let f = selection_matrices(n, h)?;
    let w = (-2.0 * alpha * h).exp();
    let mut f01 = f.f0.clone();
    f01.axpy(alpha, &f.f1);
    let cross = p.lmul(&f.f1.transpose())?.rmul(&f01)?.he()?;
    let zero2n = AffineExpr::zeros(2 * n, 2 * n);
    let s_bar = AffineExpr::block_diag(&[s.clone(), s.scale(-w), zero2n])?;
    let r_tilde = AffineExpr::block_diag(&[r.clone(), r.scale(3.0)])?;
    Ok(cross
        .add(&s_bar)
        .add(&r.congruence(&f.f3)?.scale(h * h))
        .sub(&r_tilde.congruence(&f.f2)?.scale(w)))
}

/// Left side of the lower-bound LMI (required ≻ 0).
pub fn positivity_expr(
    n: usize,
    alpha: f64,
    h: f64,
    p: &AffineExpr,
    s: &AffineExpr,
    r: &AffineExpr,
    beta1: &AffineExpr,
) -> Result<AffineExpr> {
    let zn = AffineExpr::zeros(n, n);
    let s_part = AffineExpr::block_diag(&[zn.clone(), s.clone()])?.scale((-2.0 * alpha * h).exp() / h);
    let r_part =
        AffineExpr::block(&[[r.scale(h * h), r.scale(-h)], [r.scale(-h), r.clone()]])?.scale(exp_factor(alpha, h));
    let mut sel = Mat::zeros(2 * n, 2 * n);
    sel.set_submatrix(0, 0, &Mat::identity(n));
    // β₁ is 1×1; β₁·diag(I, 0) = (Eᵀ β₁ E) summed over unit rows
    let mut beta_part = AffineExpr::zeros(2 * n, 2 * n);
    for k in 0..n {
        let mut e = Mat::zeros(1, 2 * n);
        e[(0, k)] = 1.0;
        beta_part = beta_part.add(&beta1.congruence(&e)?);
    }
    Ok(p.add(&s_part).add(&r_part).sub(&beta_part))
}

/// Φ(α,h) evaluated directly from matrices, independent of the expression
/// machinery; used to re-verify certificates.
pub fn decay_value(n: usize, alpha: f64, h: f64, p: &Mat, s: &Mat, r: &Mat) -> Result<Mat> {
    let f = selection_matrices(n, h)?;
    let w = (-2.0 * alpha * h).exp();
    let mut f01 = f.f0.clone();
    f01.axpy(alpha, &f.f1);
    let cross = f.f1.transpose().try_matmul(p)?.try_matmul(&f01)?.he()?;
    let s_bar = Mat::block_diag(&[s.clone(), s.scale(-w), Mat::zeros(2 * n, 2 * n)]);
    let r_tilde = Mat::block_diag(&[r.clone(), r.scale(3.0)]);
    let rr = f.f3.transpose().try_matmul(r)?.try_matmul(&f.f3)?;
    let rt = f.f2.transpose().try_matmul(&r_tilde)?.try_matmul(&f.f2)?;
    let mut out = &cross + &s_bar;
    out.axpy(h * h, &rr);
    out.axpy(-w, &rt);
    Ok(out)
}

pub fn positivity_value(n: usize, alpha: f64, h: f64, p: &Mat, s: &Mat, r: &Mat, beta1: f64) -> Result<Mat> {
    let mut out = p.clone();
    let mut sp = Mat::zeros(2 * n, 2 * n);
    sp.set_submatrix(n, n, s);
    out.axpy((-2.0 * alpha * h).exp() / h, &sp);
    let rb = Mat::block(&[[r.scale(h * h), r.scale(-h)], [r.scale(-h), r.clone()]])?;
    out.axpy(exp_factor(alpha, h), &rb);
    for k in 0..n {
        out[(k, k)] -= beta1;
    }
    Ok(out)
}

/// Decay matrix with the slack or projection of `mode` applied.
pub fn slack_decay_value(
    sys: &DelaySystem,
    alpha: f64,
    mode: &SlackMode,
    p: &Mat,
    s: &Mat,
    r: &Mat,
    slack: Option<&Mat>,
) -> Result<Mat> {
    let n = sys.n();
    let phi = decay_value(n, alpha, sys.h, p, s, r)?;
    let f4 = dynamics_constraint(sys);
    let need_slack = || slack.ok_or_else(|| Error::invalid("certificate is missing its slack matrix"));
    match mode {
        SlackMode::Free => {
            let y = need_slack()?;
            Ok(&phi + &f4.transpose().try_matmul(y)?.he()?)
        }
        SlackMode::Structured { profile } => {
            let z = need_slack()?;
            let y = z.try_matmul(&profile.matrix(n))?;
            Ok(&phi + &f4.transpose().try_matmul(&y)?.he()?)
        }
        SlackMode::Projected => {
            let basis = null_space_basis(&f4)?;
            basis.transpose().try_matmul(&phi)?.try_matmul(&basis)
        }
    }
}

/// Builds the decay and lower-bound LMIs. Variables: `P` (free symmetric
/// 2n), `S`, `R` (≻ 0), `beta1` (> 0) and `Y` or `Z` per mode. All
/// unknowns are confined to `|x| ≤ 1`, which loses nothing since both LMIs
/// are homogeneous.
pub fn build_stability_lmi(sys: &DelaySystem, alpha: f64, mode: &SlackMode) -> Result<LmiProblem> {
    sys.validate()?;
    check_rate(alpha)?;
    let n = sys.n();
    let h = sys.h;
    let mut prob = LmiProblem::new();
    let p = prob.add_var("P", VarKind::Symmetric(2 * n), SignConstraint::Free)?;
    let s = prob.add_var("S", VarKind::Symmetric(n), SignConstraint::PositiveDefinite)?;
    let r = prob.add_var("R", VarKind::Symmetric(n), SignConstraint::PositiveDefinite)?;
    let beta1 = prob.add_var("beta1", VarKind::Scalar, SignConstraint::PositiveScalar)?;
    let phi = decay_expr(n, alpha, h, &p, &s, &r)?;
    let f4 = dynamics_constraint(sys);
    let decay = match mode {
        SlackMode::Free => {
            let y = prob.add_var("Y", VarKind::Rectangular(n, 4 * n), SignConstraint::Free)?;
            phi.add(&y.lmul(&f4.transpose())?.he()?)
        }
        SlackMode::Structured { profile } => {
            profile.validate()?;
            let z = prob.add_var("Z", VarKind::Rectangular(n, n), SignConstraint::Free)?;
            let y = z.rmul(&profile.matrix(n))?;
            phi.add(&y.lmul(&f4.transpose())?.he()?)
        }
        SlackMode::Projected => {
            let basis = null_space_basis(&f4)?;
            phi.congruence(&basis)?
        }
    };
    prob.add_lmi("decay", &decay, Sense::NegativeDefinite)?;
    prob.add_lmi(
        "positivity",
        &positivity_expr(n, alpha, h, &p, &s, &r, &beta1)?,
        Sense::PositiveDefinite,
    )?;
    prob.set_box_bound(1.0);
    Ok(prob)
}

/// Check results of a certificate against its own LMIs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// Largest eigenvalue of the decay LMI (must be negative).
    pub decay_max_eig: f64,
    /// Smallest eigenvalue of the lower-bound LMI (must be positive).
    pub positivity_min_eig: f64,
    pub s_min_eig: f64,
    pub r_min_eig: f64,
}

impl Margins {
    pub fn hold(&self, eps: f64) -> bool {
        self.decay_max_eig <= -eps && self.positivity_min_eig >= eps && self.s_min_eig >= eps && self.r_min_eig >= eps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub mode: SlackMode,
    pub alpha: f64,
    pub h: f64,
    pub p: Mat,
    pub s: Mat,
    pub r: Mat,
    /// `Y` (free slack) or `Z` (structured slack).
    pub slack: Option<Mat>,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub margins: Margins,
}

/// `(1+h²)λmax(P) + h·λmax(S) + (h³/2)·λmax(R)`.
pub fn upper_bound_constant(h: f64, p: &Mat, s: &Mat, r: &Mat) -> Result<f64> {
    let lp = SymMat::symmetrize(p).max_eigenvalue()?;
    let ls = SymMat::symmetrize(s).max_eigenvalue()?;
    let lr = SymMat::symmetrize(r).max_eigenvalue()?;
    Ok((1.0 + h * h) * lp + h * ls + 0.5 * h * h * h * lr)
}

impl StabilityCertificate {
    /// Recomputes every LMI from the stored matrices and the system data.
    pub fn margins_for(&self, sys: &DelaySystem) -> Result<Margins> {
        let n = sys.n();
        if self.p.shape() != (2 * n, 2 * n) || self.s.shape() != (n, n) || self.r.shape() != (n, n) {
            return Err(Error::dim("certificate", "matrix sizes do not match the system"));
        }
        if (self.h - sys.h).abs() > 1e-12 * sys.h {
            return Err(Error::invalid(format!(
                "certificate delay {} differs from system delay {}",
                self.h, sys.h
            )));
        }
        let decay = slack_decay_value(
            sys,
            self.alpha,
            &self.mode,
            &self.p,
            &self.s,
            &self.r,
            self.slack.as_ref(),
        )?;
        let pos = positivity_value(n, self.alpha, self.h, &self.p, &self.s, &self.r, self.beta1)?;
        Ok(Margins {
            decay_max_eig: SymMat::symmetrize(&decay).max_eigenvalue()?,
            positivity_min_eig: SymMat::symmetrize(&pos).min_eigenvalue()?,
            s_min_eig: SymMat::symmetrize(&self.s).min_eigenvalue()?,
            r_min_eig: SymMat::symmetrize(&self.r).min_eigenvalue()?,
        })
    }

    /// Independent re-check without solving anything: LMIs hold with margin
    /// `eps`, `β₁ > 0`, and `β₂`, `γ` match the stored matrices.
    pub fn verify(&self, sys: &DelaySystem, eps: f64) -> Result<bool> {
        let m = self.margins_for(sys)?;
        let beta2 = upper_bound_constant(self.h, &self.p, &self.s, &self.r)?;
        let consistent = (beta2 - self.beta2).abs() <= 1e-9 * beta2.abs().max(1.0)
            && (self.gamma - gamma_from(self.beta1, beta2)).abs() <= 1e-9 * self.gamma.max(1.0);
        Ok(m.hold(eps) && self.beta1 >= eps && consistent)
    }
}

/// `max(1, √(β₂/β₁))`: the overshoot constant of the decay estimate.
///
/// `γ < 1` would claim `‖x(0)‖ < ‖φ‖_W`, which no estimate can, so the ratio
/// is floored at 1.
pub fn gamma_from(beta1: f64, beta2: f64) -> f64 {
    (beta2 / beta1).sqrt().max(1.0)
}

#[derive(Clone, Debug)]
pub enum CertifyOutcome {
    Certified(Box<StabilityCertificate>),
    /// No certificate; `margin` is the best achievable `t` in `LMI ⪯ tI`
    /// (normalized), `None` if the solver stopped on a dual bound first.
    Infeasible {
        margin: Option<f64>,
    },
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&StabilityCertificate> {
        match self {
            CertifyOutcome::Certified(c) => Some(c),
            CertifyOutcome::Infeasible { .. } => None,
        }
    }
}

fn conclusive(status: SolveStatus, what: &str) -> Result<bool> {
    match status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::InfeasibleCertificate => Ok(false),
        other => Err(Error::Solver(format!("{what}: solver stopped with {other:?}"))),
    }
}

/// Feasibility only: stops at the first strictly feasible point.
pub fn is_feasible(sys: &DelaySystem, alpha: f64, mode: &SlackMode, settings: &SolverSettings) -> Result<bool> {
    let form = build_stability_lmi(sys, alpha, mode)?.compile()?;
    let sol = sdp::solve(&form, &settings.fast_feasibility())?;
    conclusive(sol.status, "stability feasibility")
}

/// Solves the LMIs, then maximizes `β₁` over them, and re-verifies the
/// resulting certificate by direct eigenvalue checks.
pub fn certify(sys: &DelaySystem, alpha: f64, mode: &SlackMode, settings: &SolverSettings) -> Result<CertifyOutcome> {
    let form = build_stability_lmi(sys, alpha, mode)?.compile()?;
    let feas = sdp::solve(&form, settings)?;
    if !conclusive(feas.status, "stability feasibility")? {
        return Ok(CertifyOutcome::Infeasible { margin: feas.margin });
    }
    certify_from_point(sys, alpha, mode, &form, &feas.x, settings)
}

fn certify_from_point(
    sys: &DelaySystem,
    alpha: f64,
    mode: &SlackMode,
    form: &StandardForm,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<CertifyOutcome> {
    let opt_form = form.with_maximized_scalar("beta1")?;
    let opt = sdp::solve_from(&opt_form, x0, settings)?;
    let x = match opt.status {
        SolveStatus::Optimal | SolveStatus::MaxIter => opt.x,
        SolveStatus::InfeasibleCertificate => {
            // the tightened problem lost feasibility right at the boundary
            return Ok(CertifyOutcome::Infeasible { margin: opt.margin });
        }
        other => return Err(Error::Solver(format!("β₁ maximization stopped with {other:?}"))),
    };
    let asg = crate::lmi::Assignment::new(&form.variables, &x);
    let p = asg.get("P")?;
    let s = asg.get("S")?;
    let r = asg.get("R")?;
    let beta1 = asg.scalar("beta1")?;
    let slack = match mode {
        SlackMode::Free => Some(asg.get("Y")?),
        SlackMode::Structured { .. } => Some(asg.get("Z")?),
        SlackMode::Projected => None,
    };
    let beta2 = upper_bound_constant(sys.h, &p, &s, &r)?;
    let mut cert = StabilityCertificate {
        mode: *mode,
        alpha,
        h: sys.h,
        p,
        s,
        r,
        slack,
        beta1,
        beta2,
        gamma: gamma_from(beta1, beta2),
        margins: Margins {
            decay_max_eig: f64::NAN,
            positivity_min_eig: f64::NAN,
            s_min_eig: f64::NAN,
            r_min_eig: f64::NAN,
        },
    };
    cert.margins = cert.margins_for(sys)?;
    if !cert.verify(sys, settings.feasibility_margin)? {
        log::warn!(
            "certificate at h={} α={} failed re-verification: {:?}",
            sys.h,
            alpha,
            cert.margins
        );
        return Ok(CertifyOutcome::Infeasible { margin: None });
    }
    Ok(CertifyOutcome::Certified(Box::new(cert)))
}

/// Whether the structured slack `Z` of a certificate is safely invertible:
/// `σmin(Z) > 1e−9·σmax(Z)`.
pub fn structured_slack_nonsingular(cert: &StabilityCertificate) -> Result<bool> {
    match (&cert.mode, &cert.slack) {
        (SlackMode::Structured { .. }, Some(z)) => slack_nonsingular(z),
        _ => Err(Error::invalid("certificate does not use a structured slack")),
    }
}

pub(crate) fn slack_nonsingular(z: &Mat) -> Result<bool> {
    let sv = singular_values(z)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    Ok(smax > 0.0 && smin > 1e-9 * smax)
}
