//! Numerical checks of the integral inequalities behind the stability LMIs:
//! the Wirtinger-based bound on `∫ẋᵀRẋ`, Jensen's bound on `∫xᵀSx`, and the
//! exponentially weighted double-integral bound used for the lower estimate
//! of the functional.
//!
//! Test functions live on the window `τ ∈ [−h, 0]` (time measured relative
//! to the current instant `t`). Integrals use adaptive Simpson with a
//! Richardson error estimate; double integrals are iterated.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::stability::{exp_excess, selection_matrices};

/// Allowed negative slack, relative to `1 + |lhs|`.
pub const SLACK_TOL: f64 = 1e-9;

const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 48;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `x(τ) = Σ_k c_k τᵏ`.
    Polynomial { coeffs: Vec<Vec<f64>> },
    /// `x_i(τ) = Σ_k amplitudes[k][i] · cos(freqs[k]·τ + phases[k])`.
    Trigonometric {
        amplitudes: Vec<Vec<f64>>,
        freqs: Vec<f64>,
        phases: Vec<f64>,
    },
    /// `x(τ) = v · e^{rate·τ}`.
    Exponential { v: Vec<f64>, rate: f64 },
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Polynomial { coeffs } => coeffs.first().map_or(0, Vec::len),
            TestFunction::Trigonometric { amplitudes, .. } => amplitudes.first().map_or(0, Vec::len),
            TestFunction::Exponential { v, .. } => v.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let ok = n > 0
            && match self {
                TestFunction::Polynomial { coeffs } => coeffs.iter().all(|c| c.len() == n),
                TestFunction::Trigonometric {
                    amplitudes,
                    freqs,
                    phases,
                } => {
                    amplitudes.iter().all(|a| a.len() == n)
                        && freqs.len() == amplitudes.len()
                        && phases.len() == amplitudes.len()
                }
                TestFunction::Exponential { .. } => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::dim("TestFunction", "inconsistent component counts"))
        }
    }

    pub fn value(&self, tau: f64) -> Vec<f64> {
        match self {
            TestFunction::Polynomial { coeffs } => {
                let mut out = vec![0.0; self.dim()];
                for c in coeffs.iter().rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * tau + ci;
                    }
                }
                out
            }
            TestFunction::Trigonometric {
                amplitudes,
                freqs,
                phases,
            } => {
                let mut out = vec![0.0; self.dim()];
                for ((a, w), p) in amplitudes.iter().zip(freqs).zip(phases) {
                    let c = (w * tau + p).cos();
                    for (o, ai) in out.iter_mut().zip(a) {
                        *o += ai * c;
                    }
                }
                out
            }
            TestFunction::Exponential { v, rate } => {
                let e = (rate * tau).exp();
                v.iter().map(|vi| vi * e).collect()
            }
        }
    }

    pub fn derivative(&self, tau: f64) -> Vec<f64> {
        match self {
            TestFunction::Polynomial { coeffs } => {
                let mut out = vec![0.0; self.dim()];
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * tau + k as f64 * ci;
                    }
                }
                out
            }
            TestFunction::Trigonometric {
                amplitudes,
                freqs,
                phases,
            } => {
                let mut out = vec![0.0; self.dim()];
                for ((a, w), p) in amplitudes.iter().zip(freqs).zip(phases) {
                    let s = -w * (w * tau + p).sin();
                    for (o, ai) in out.iter_mut().zip(a) {
                        *o += ai * s;
                    }
                }
                out
            }
            TestFunction::Exponential { v, rate } => {
                let e = rate * (rate * tau).exp();
                v.iter().map(|vi| vi * e).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub slack: f64,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }

    pub fn normalized_slack(&self) -> f64 {
        self.slack / (1.0 + self.lhs.abs())
    }

    pub fn holds(&self) -> bool {
        self.normalized_slack() >= -SLACK_TOL
    }
}

// ---------------------------------------------------------------------------
// Quadrature

fn vnorm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lin(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

struct Panel {
    a: f64,
    b: f64,
    fa: Vec<f64>,
    fm: Vec<f64>,
    fb: Vec<f64>,
    whole: Vec<f64>,
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let w = (b - a) / 6.0;
    (0..fa.len()).map(|i| w * (fa[i] + 4.0 * fm[i] + fb[i])).collect()
}

fn refine<F>(f: &F, p: Panel, tol: f64, depth: u32) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let m = 0.5 * (p.a + p.b);
    let lm = f(0.5 * (p.a + m))?;
    let rm = f(0.5 * (m + p.b))?;
    let left = simpson(p.a, m, &p.fa, &lm, &p.fm);
    let right = simpson(m, p.b, &p.fm, &rm, &p.fb);
    let both = lin(&left, 1.0, &right, 1.0);
    let diff = lin(&both, 1.0, &p.whole, -1.0);
    if vnorm(&diff) <= 15.0 * tol {
        return Ok(lin(&both, 1.0, &diff, 1.0 / 15.0));
    }
    if depth == 0 {
        return Err(Error::NotConverged("adaptive Simpson quadrature"));
    }
    let l = refine(
        f,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: lm,
            fb: p.fm.clone(),
            whole: left,
        },
        0.5 * tol,
        depth - 1,
    )?;
    let r = refine(
        f,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: rm,
            fb: p.fb,
            whole: right,
        },
        0.5 * tol,
        depth - 1,
    )?;
    Ok(lin(&l, 1.0, &r, 1.0))
}

/// `∫_a^b f` for a vector-valued `f`, to relative accuracy about `1e−12` of
/// `∫‖f‖`. Starts from eight panels so that oscillatory integrands cannot
/// fool the first error estimate.
pub fn integrate_adaptive<F>(f: &F, a: f64, b: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    const PANELS: usize = 8;
    let width = (b - a) / PANELS as f64;
    let nodes: Vec<f64> = (0..=2 * PANELS).map(|i| a + 0.5 * width * i as f64).collect();
    let vals = nodes.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let scale: f64 = (0..PANELS)
        .map(|k| width / 6.0 * (vnorm(&vals[2 * k]) + 4.0 * vnorm(&vals[2 * k + 1]) + vnorm(&vals[2 * k + 2])))
        .sum();
    let tol = QUAD_REL_TOL * scale.max(f64::MIN_POSITIVE) / PANELS as f64;
    let mut total = vec![0.0; vals[0].len()];
    for k in 0..PANELS {
        let (pa, pb) = (nodes[2 * k], nodes[2 * k + 2]);
        let whole = simpson(pa, pb, &vals[2 * k], &vals[2 * k + 1], &vals[2 * k + 2]);
        let part = refine(
            f,
            Panel {
                a: pa,
                b: pb,
                fa: vals[2 * k].clone(),
                fm: vals[2 * k + 1].clone(),
                fb: vals[2 * k + 2].clone(),
                whole,
            },
            tol,
            QUAD_MAX_DEPTH,
        )?;
        total = lin(&total, 1.0, &part, 1.0);
    }
    Ok(total)
}

/// `∫_{−h}^{0} ∫_{θ}^{0} g(s) ds dθ` by iterated composite Simpson.
///
/// On a mesh of spacing `d`, the inner integral at every mesh node is a
/// cumulative sum of per-interval Simpson rules (midpoints included) and the
/// outer integral is composite Simpson over those nodes. The mesh is halved
/// until the Richardson estimate `|I_{d/2} − I_d|/15` is below `1e−12` of
/// `∫∫‖g‖`, and the extrapolated value is returned.
pub fn integrate_double<G>(g: &G, h: f64) -> Result<Vec<f64>>
where
    G: Fn(f64) -> Vec<f64>,
{
    const MAX_INTERVALS: usize = 1 << 16;
    let mut intervals = 16;
    let mut prev = iterated_simpson(g, h, intervals);
    loop {
        intervals *= 2;
        let next = iterated_simpson(g, h, intervals);
        let diff = lin(&next.0, 1.0, &prev.0, -1.0);
        if vnorm(&diff) <= 15.0 * QUAD_REL_TOL * next.1.max(f64::MIN_POSITIVE) {
            return Ok(lin(&next.0, 1.0, &diff, 1.0 / 15.0));
        }
        if intervals >= MAX_INTERVALS {
            return Err(Error::NotConverged("iterated Simpson quadrature"));
        }
        prev = next;
    }
}

/// One level of [`integrate_double`]: the estimate and `∫∫‖g‖` on `m` intervals.
fn iterated_simpson<G>(g: &G, h: f64, m: usize) -> (Vec<f64>, f64)
where
    G: Fn(f64) -> Vec<f64>,
{
    let d = h / m as f64;
    // Samples at spacing d/2 from −h to 0.
    let samples: Vec<Vec<f64>> = (0..=2 * m).map(|j| g(-h + 0.5 * d * j as f64)).collect();
    let dim = samples[0].len();
    let mut inner = vec![vec![0.0; dim]; m + 1];
    let mut inner_norm = vec![0.0; m + 1];
    for k in (0..m).rev() {
        let (l, c, r) = (&samples[2 * k], &samples[2 * k + 1], &samples[2 * k + 2]);
        let piece = simpson(0.0, d, l, c, r);
        inner[k] = lin(&inner[k + 1], 1.0, &piece, 1.0);
        inner_norm[k] = inner_norm[k + 1] + d / 6.0 * (vnorm(l) + 4.0 * vnorm(c) + vnorm(r));
    }
    let weight = |k: usize| {
        if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut total = vec![0.0; dim];
    let mut scale = 0.0;
    for k in 0..=m {
        let w = weight(k) * d / 3.0;
        total = lin(&total, 1.0, &inner[k], w);
        scale += w * inner_norm[k];
    }
    (total, scale)
}

fn quad_form(m: &Mat, v: &[f64]) -> f64 {
    v.iter().zip(m.mul_vec(v)).map(|(a, b)| a * b).sum()
}

fn check_args(x: &TestFunction, m: &Mat, h: f64) -> Result<()> {
    x.validate()?;
    if m.shape() != (x.dim(), x.dim()) {
        return Err(Error::dim(
            "inequality check",
            format!("weight matrix {:?} for dimension {}", m.shape(), x.dim()),
        ));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("window length must be positive, got {h}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The three inequalities

/// `∫_{−h}^{0} ẋᵀRẋ ≥ (1/h) ξᵀF₂ᵀ diag(R, 3R) F₂ ξ` with
/// `ξ = [x(0), x(−h), ẋ(0), (1/h)∫x]`.
pub fn check_wirtinger(x: &TestFunction, r: &Mat, h: f64) -> Result<InequalityCheck> {
    check_args(x, r, h)?;
    let n = x.dim();
    let lhs = integrate_adaptive(&|s| Ok(vec![quad_form(r, &x.derivative(s))]), -h, 0.0)?[0];
    let int_x = integrate_adaptive(&|s| Ok(x.value(s)), -h, 0.0)?;
    let mut xi = x.value(0.0);
    xi.extend(x.value(-h));
    xi.extend(x.derivative(0.0));
    xi.extend(int_x.iter().map(|v| v / h));
    let f2 = selection_matrices(n, h)?.f2;
    let e = f2.mul_vec(&xi);
    let rhs = (quad_form(r, &e[..n]) + 3.0 * quad_form(r, &e[n..])) / h;
    Ok(InequalityCheck::new(lhs, rhs))
}

/// The plain Jensen bound on the derivative, `(1/h)(∫ẋ)ᵀR(∫ẋ)`, which the
/// Wirtinger right-hand side dominates.
pub fn derivative_jensen_bound(x: &TestFunction, r: &Mat, h: f64) -> Result<f64> {
    check_args(x, r, h)?;
    let d: Vec<f64> = lin(&x.value(0.0), 1.0, &x.value(-h), -1.0);
    Ok(quad_form(r, &d) / h)
}

/// `h ∫_{−h}^{0} xᵀSx ≥ (∫x)ᵀS(∫x)`.
pub fn check_jensen(x: &TestFunction, s: &Mat, h: f64) -> Result<InequalityCheck> {
    check_args(x, s, h)?;
    let both = integrate_adaptive(
        &|t| {
            let v = x.value(t);
            let mut out = vec![quad_form(s, &v)];
            out.extend(v);
            Ok(out)
        },
        -h,
        0.0,
    )?;
    Ok(InequalityCheck::new(h * both[0], quad_form(s, &both[1..])))
}

/// `∫_{−h}^{0}∫_θ^{0} e^{2αs} xᵀRx ds dθ ≥ (1/Ξ) vᵀRv` with
/// `v = ∫_{−h}^{0}∫_θ^{0} x` and `Ξ = ∫∫ e^{−2αs}`; equality for
/// `x ∝ e^{−2ατ}`.
pub fn check_bessel_like(x: &TestFunction, r: &Mat, h: f64, alpha: f64) -> Result<InequalityCheck> {
    check_args(x, r, h)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!("decay rate must be ≥ 0, got {alpha}")));
    }
    let both = integrate_double(
        &|s: f64| {
            let v = x.value(s);
            let mut out = vec![(2.0 * alpha * s).exp() * quad_form(r, &v)];
            out.extend(v);
            out
        },
        h,
    )?;
    Ok(InequalityCheck::new(
        both[0],
        quad_form(r, &both[1..]) / xi_factor(alpha, h),
    ))
}

/// `Ξ(α, h) = ∫_{−h}^{0}∫_θ^{0} e^{−2αs} ds dθ = (e^{2αh} − 2αh − 1)/(4α²)`,
/// `h²/2` at `α = 0`.
pub fn xi_factor(alpha: f64, h: f64) -> f64 {
    if alpha == 0.0 {
        return 0.5 * h * h;
    }
    exp_excess(2.0 * alpha * h) / (4.0 * alpha * alpha)
}

/// `Ξ(α, h)` by iterated quadrature.
pub fn xi_by_quadrature(alpha: f64, h: f64) -> Result<f64> {
    Ok(integrate_double(&|s: f64| vec![(-2.0 * alpha * s).exp()], h)?[0])
}

// ---------------------------------------------------------------------------
// Randomized trials

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub min_slack: Option<f64>,
    pub min_normalized_slack: Option<f64>,
    pub violations: usize,
}

impl TrialSummary {
    fn from_checks(checks: &[InequalityCheck]) -> Self {
        let fold = |f: fn(&InequalityCheck) -> f64| checks.iter().map(f).reduce(f64::min);
        Self {
            trials: checks.len(),
            min_slack: fold(|c| c.slack),
            min_normalized_slack: fold(InequalityCheck::normalized_slack),
            violations: checks.iter().filter(|c| !c.holds()).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub seed: u64,
    pub wirtinger: TrialSummary,
    pub jensen: TrialSummary,
    pub bessel_like: TrialSummary,
    /// Wirtinger right-hand side minus the derivative Jensen bound.
    pub wirtinger_over_jensen: TrialSummary,
}

impl InequalityReport {
    pub fn all_hold(&self) -> bool {
        [
            &self.wirtinger,
            &self.jensen,
            &self.bessel_like,
            &self.wirtinger_over_jensen,
        ]
        .iter()
        .all(|s| s.violations == 0)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let trials = self.wirtinger.trials;
        let _ = writeln!(out, "inequality checks: {trials} trials, seed {}", self.seed);
        let _ = writeln!(
            out,
            "{:<22} {:>8} {:>24} {:>24} {:>10}",
            "inequality", "trials", "min_slack", "min_normalized_slack", "violations"
        );
        for (name, s) in [
            ("wirtinger", &self.wirtinger),
            ("jensen", &self.jensen),
            ("bessel_like", &self.bessel_like),
            ("wirtinger_over_jensen", &self.wirtinger_over_jensen),
        ] {
            let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
            let _ = writeln!(
                out,
                "{:<22} {:>8} {:>24} {:>24} {:>10}",
                name,
                s.trials,
                fmt(s.min_slack),
                fmt(s.min_normalized_slack),
                s.violations
            );
        }
        let _ = writeln!(
            out,
            "verdict: {}",
            if self.all_hold() { "ALL HOLD" } else { "VIOLATED" }
        );
        out
    }
}

/// One randomized case: window, rate, test function and weights.
#[derive(Clone, Debug)]
pub struct Trial {
    pub h: f64,
    pub alpha: f64,
    pub x: TestFunction,
    pub r: Mat,
    pub s: Mat,
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = Mat::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).expect("n×n data");
    let mut m = g.try_matmul(&g.transpose()).expect("square");
    m.axpy(0.1, &Mat::identity(n));
    m
}

/// Polynomial test functions of degree ≤ 4 in dimension 1–3 with
/// coefficients in `[−1, 1]`, `h ∈ [0.1, 3]`, `α ∈ [0, 1.5]`.
pub fn random_trials(count: usize, seed: u64) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=3);
            let degree = rng.gen_range(0..=4);
            let coeffs = (0..=degree)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                .collect();
            Trial {
                h: rng.gen_range(0.1..=3.0),
                alpha: rng.gen_range(0.0..=1.5),
                x: TestFunction::Polynomial { coeffs },
                r: random_pd(&mut rng, n),
                s: random_pd(&mut rng, n),
            }
        })
        .collect()
}

/// Runs every inequality on `count` seeded random trials (in parallel; the
/// result depends only on `count` and `seed`).
pub fn run_trials(count: usize, seed: u64) -> Result<InequalityReport> {
    let trials = random_trials(count, seed);
    let results = trials
        .par_iter()
        .map(|t| {
            let w = check_wirtinger(&t.x, &t.r, t.h)?;
            let j = check_jensen(&t.x, &t.s, t.h)?;
            let b = check_bessel_like(&t.x, &t.r, t.h, t.alpha)?;
            let dj = derivative_jensen_bound(&t.x, &t.r, t.h)?;
            Ok((w, j, b, InequalityCheck::new(w.rhs, dj)))
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&(InequalityCheck, InequalityCheck, InequalityCheck, InequalityCheck)) -> InequalityCheck| {
        TrialSummary::from_checks(&results.iter().map(f).collect::<Vec<_>>())
    };
    Ok(InequalityReport {
        seed,
        wirtinger: pick(|r| r.0),
        jensen: pick(|r| r.1),
        bessel_like: pick(|r| r.2),
        wirtinger_over_jensen: pick(|r| r.3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(coeffs: &[&[f64]]) -> TestFunction {
        TestFunction::Polynomial {
            coeffs: coeffs.iter().map(|c| c.to_vec()).collect(),
        }
    }

    #[test]
    fn jensen_on_identity_ramp() {
        let c = check_jensen(&poly(&[&[0.0], &[1.0]]), &Mat::identity(1), 1.0).unwrap();
        assert!((c.lhs - 1.0 / 3.0).abs() < 1e-14);
        assert!((c.rhs - 0.25).abs() < 1e-14);
        assert!((c.slack - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn constants_are_equality_cases() {
        let x = poly(&[&[1.0, -2.0]]);
        let r = Mat::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        let w = check_wirtinger(&x, &r, 1.7).unwrap();
        assert!(w.lhs.abs() < 1e-15 && w.rhs.abs() < 1e-12);
        let j = check_jensen(&x, &r, 1.7).unwrap();
        assert!(j.slack.abs() < 1e-12 * j.lhs);
        let b = check_bessel_like(&x, &r, 1.7, 0.0).unwrap();
        let expected = 0.5 * 1.7 * 1.7 * quad_form(&r, &[1.0, -2.0]);
        assert!((b.lhs - expected).abs() < 1e-11 && (b.rhs - expected).abs() < 1e-11);
    }

    #[test]
    fn affine_saturates_wirtinger() {
        let x = poly(&[&[0.3, 1.0], &[-2.0, 0.5]]);
        let c = check_wirtinger(&x, &Mat::identity(2), 2.0).unwrap();
        assert!(c.slack.abs() < 1e-12 * (1.0 + c.lhs), "{c:?}");
    }

    #[test]
    fn projection_direction_saturates_bessel_like() {
        let (alpha, h) = (0.7, 1.3);
        let x = TestFunction::Exponential {
            v: vec![1.0, -0.4],
            rate: -2.0 * alpha,
        };
        let c = check_bessel_like(&x, &Mat::identity(2), h, alpha).unwrap();
        assert!(c.slack.abs() < 1e-10 * (1.0 + c.lhs), "{c:?}");
    }

    #[test]
    fn xi_closed_form_and_quadrature() {
        assert_eq!(xi_factor(0.0, 2.0), 2.0);
        assert!((xi_factor(0.5, 1.0) - (std::f64::consts::E - 2.0)).abs() < 1e-15);
        for (a, h) in [(0.5, 1.0), (1e-4, 2.0), (1.5, 3.0)] {
            let q = xi_by_quadrature(a, h).unwrap();
            assert!((q - xi_factor(a, h)).abs() < 1e-9 * q);
        }
        assert!((xi_factor(1e-9, 1.0) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn adaptive_quadrature_handles_oscillation() {
        let v = integrate_adaptive(&|s: f64| Ok(vec![(40.0 * s).cos()]), -1.0, 0.0).unwrap()[0];
        assert!((v - (40.0f64).sin() / 40.0).abs() < 1e-12);
    }

    #[test]
    fn double_integral_matches_single_reduction() {
        // ∫_{−h}^0 ∫_θ^0 f = ∫_{−h}^0 (s + h) f(s) ds, here for f = s²: h⁴/12.
        let h = 1.5;
        let v = integrate_double(&|s: f64| vec![s * s], h).unwrap()[0];
        assert!((v - h.powi(4) / 12.0).abs() < 1e-12);
    }

    #[test]
    fn report_is_reproducible_and_empty_for_zero_trials() {
        let a = run_trials(12, 3).unwrap();
        let b = run_trials(12, 3).unwrap();
        assert_eq!(a.render(), b.render());
        assert!(a.all_hold());
        let empty = run_trials(0, 1).unwrap();
        assert_eq!(empty.wirtinger.trials, 0);
        assert!(empty.wirtinger.min_slack.is_none());
        assert!(empty.render().contains("ALL HOLD"));
    }
}
