//! Log-det barrier path-following solver for the block LMI standard form
//! produced by [`LmiProblem::compile`](crate::lmi::LmiProblem::compile).
//!
//! Feasibility questions are answered through the margin problem
//!
//! ```text
//!     minimize t   subject to   G_i(x) ⪯ t·I   for every block i
//! ```
//!
//! which always has a strictly feasible start. Problems with an objective run
//! that margin problem first (phase 1) to obtain an interior point, then
//! minimize the objective over the strict constraints tightened by
//! `2·feasibility_margin` (phase 2).
//!
//! Newton steps use the damped step `1/(1+λ)` of self-concordant barriers,
//! so no line search on barrier values is needed. When every unknown is box
//! bounded the dual iterates give a rigorous lower bound on the optimum; that
//! bound is what certifies infeasibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{Assignment, StandardForm};
use crate::matrix::{cholesky_solve, null_space_basis, qr_gram_factor, Mat, SymMat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Cap on Newton steps per phase.
    pub max_iterations: usize,
    pub duality_gap_tol: f64,
    /// Fraction of the distance to the cone boundary a step may travel.
    pub step_fraction: f64,
    /// Strict inequalities must hold with this margin (in normalized units).
    pub feasibility_margin: f64,
    /// Stop the margin problem as soon as a centered iterate is strictly
    /// feasible instead of driving the margin to optimality.
    #[serde(default)]
    pub stop_at_feasible: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            duality_gap_tol: 1e-9,
            step_fraction: 0.98,
            feasibility_margin: 1e-7,
            stop_at_feasible: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || !(self.duality_gap_tol > 0.0)
            || !(self.feasibility_margin > 0.0)
            || !(self.step_fraction > 0.0 && self.step_fraction < 1.0)
        {
            return Err(Error::invalid(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }

    pub fn fast_feasibility(&self) -> Self {
        Self {
            stop_at_feasible: true,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    InfeasibleCertificate,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Value of the minimized objective (the margin `t` for pure feasibility).
    pub objective_value: f64,
    /// Optimal margin `t*` of the feasibility phase.
    pub margin: Option<f64>,
    /// Lower bound on the minimized objective (or margin) from dual iterates.
    pub dual_bound: Option<f64>,
    /// Largest eigenvalue of each normalized block `G_i(x)` at the solution.
    pub block_max_eigs: Vec<f64>,
    pub iterations: usize,
    /// Objective value after each completed centering step.
    pub objective_history: Vec<f64>,
    /// The margin phase stopped at the first strictly feasible centered point.
    pub early_exit: bool,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn assignment<'a>(&'a self, form: &'a StandardForm) -> Assignment<'a> {
        Assignment::new(&form.variables, &self.x)
    }

    fn failed(status: SolveStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            objective_value: f64::NAN,
            margin: None,
            dual_bound: None,
            block_max_eigs: vec![],
            iterations,
            objective_history: vec![],
            early_exit: false,
        }
    }
}

/// Solves a compiled problem. Without an objective this is the margin
/// feasibility problem; with one, phase 1 then phase 2.
pub fn solve(form: &StandardForm, settings: &SolverSettings) -> Result<Solution> {
    settings.validate()?;
    if form.blocks.is_empty() {
        return Err(Error::invalid("standard form has no constraint blocks"));
    }
    if !form.has_objective {
        let x0 = vec![0.0; form.n_vars];
        return Ok(feasibility(form, settings, &x0));
    }
    let eps = settings.feasibility_margin;
    let shifts: Vec<f64> = form
        .blocks
        .iter()
        .map(|b| if b.strict { 2.0 * eps } else { 0.0 })
        .collect();
    let phase1_settings = settings.fast_feasibility();
    let x0 = vec![0.0; form.n_vars];
    let p1 = run_margin(form, &phase1_settings, &x0, &shifts, 0.0);
    if p1.status != SolveStatus::Optimal {
        return Ok(p1);
    }
    let mut p2 = run_objective(form, settings, &p1.x, &shifts);
    p2.margin = p1.margin;
    p2.iterations += p1.iterations;
    Ok(p2)
}

/// Maximizes the scalar variable `name` subject to all blocks.
pub fn maximize_scalar(form: &StandardForm, name: &str, settings: &SolverSettings) -> Result<Solution> {
    solve(&form.with_maximized_scalar(name)?, settings)
}

/// Like [`solve`] for objective problems, but starts phase 2 from a known
/// strictly feasible point.
pub fn solve_from(form: &StandardForm, x0: &[f64], settings: &SolverSettings) -> Result<Solution> {
    settings.validate()?;
    let eps = settings.feasibility_margin;
    let shifts: Vec<f64> = form
        .blocks
        .iter()
        .map(|b| if b.strict { 2.0 * eps } else { 0.0 })
        .collect();
    let barrier = Barrier::new(form, false, &shifts);
    if barrier.value_at(&barrier.lift(x0, None)).is_none() {
        return solve(form, settings);
    }
    Ok(run_objective(form, settings, x0, &shifts))
}

fn feasibility(form: &StandardForm, settings: &SolverSettings, x0: &[f64]) -> Solution {
    let shifts = vec![0.0; form.blocks.len()];
    run_margin(form, settings, x0, &shifts, -settings.feasibility_margin)
}

/// Per-block derivative data at one point.
struct BlockEval {
    /// `L⁻¹ D_a L⁻ᵀ` for every coordinate `a` the block depends on.
    scaled: Vec<(usize, Mat)>,
    /// `F⁻¹`
    inverse: Mat,
}

struct Barrier<'a> {
    form: &'a StandardForm,
    margin_mode: bool,
    nz: usize,
    /// `F_i(z) = base_i + Σ_a z_a D_{ia}`
    base: Vec<Mat>,
    derivs: Vec<Vec<(usize, Mat)>>,
    c: Vec<f64>,
    box_bound: Option<f64>,
    nu: f64,
}

impl<'a> Barrier<'a> {
    fn new(form: &'a StandardForm, margin_mode: bool, shifts: &[f64]) -> Self {
        let n = form.n_vars;
        let nz = if margin_mode { n + 1 } else { n };
        let mut base = Vec::with_capacity(form.blocks.len());
        let mut derivs = Vec::with_capacity(form.blocks.len());
        for (b, &delta) in form.blocks.iter().zip(shifts) {
            let d = b.dim();
            let mut f0 = b.g0.scale(-1.0);
            f0.axpy(-delta, &Mat::identity(d));
            base.push(f0);
            let mut ds: Vec<(usize, Mat)> = b.coeffs.iter().map(|(k, m)| (*k, m.scale(-1.0))).collect();
            if margin_mode {
                ds.push((n, Mat::identity(d)));
            }
            derivs.push(ds);
        }
        let mut c = vec![0.0; nz];
        if margin_mode {
            c[n] = 1.0;
        } else {
            c[..n].copy_from_slice(&form.objective);
        }
        let mut nu: f64 = form.blocks.iter().map(|b| b.dim() as f64).sum();
        if form.box_bound.is_some() {
            nu += 2.0 * n as f64;
        }
        Self {
            form,
            margin_mode,
            nz,
            base,
            derivs,
            c,
            box_bound: form.box_bound,
            nu,
        }
    }

    fn lift(&self, x: &[f64], t: Option<f64>) -> Vec<f64> {
        let mut z = x.to_vec();
        if self.margin_mode {
            z.push(t.unwrap_or(0.0));
        }
        z
    }

    fn block_value(&self, i: usize, z: &[f64]) -> Mat {
        let mut f = self.base[i].clone();
        for (a, d) in &self.derivs[i] {
            f.axpy(z[*a], d);
        }
        f
    }

    fn box_ok(&self, z: &[f64]) -> bool {
        match self.box_bound {
            Some(b) => z[..self.form.n_vars].iter().all(|x| x.abs() < b),
            None => true,
        }
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Barrier value (without the `τ·cᵀz` term); `None` outside the domain.
    fn value_at(&self, z: &[f64]) -> Option<f64> {
        if !self.box_ok(z) {
            return None;
        }
        let mut v = 0.0;
        for i in 0..self.base.len() {
            let l = self.block_value(i, z).cholesky().ok()?;
            v -= 2.0 * (0..l.rows()).map(|k| l[(k, k)].ln()).sum::<f64>();
        }
        if let Some(b) = self.box_bound {
            for x in &z[..self.form.n_vars] {
                v -= (b - x).ln() + (b + x).ln();
            }
        }
        Some(v)
    }

    fn eval_blocks(&self, z: &[f64]) -> Option<Vec<BlockEval>> {
        let mut out = Vec::with_capacity(self.base.len());
        for i in 0..self.base.len() {
            let f = self.block_value(i, z);
            let l = f.cholesky().ok()?;
            let linv = lower_inverse(&l);
            let linv_t = linv.transpose();
            let scaled = self.derivs[i]
                .iter()
                .map(|(a, d)| (*a, &linv * &(d * &linv_t)))
                .collect();
            out.push(BlockEval {
                scaled,
                inverse: &linv_t * &linv,
            });
        }
        Some(out)
    }

    /// Gradient of the barrier (without the linear term) and a factor `J`
    /// of its Hessian, `∇²φ = JᵀJ`. Each block contributes the entries of
    /// `L⁻¹ D_a L⁻ᵀ` (off-diagonal ones weighted by √2), the box one row per
    /// unknown.
    fn derivatives(&self, z: &[f64], evals: &[BlockEval]) -> (Vec<f64>, Mat) {
        let nz = self.nz;
        let n = self.form.n_vars;
        let block_rows: usize = evals
            .iter()
            .map(|e| e.scaled.first().map_or(0, |(_, b)| b.rows() * (b.rows() + 1) / 2))
            .sum();
        let box_rows = if self.box_bound.is_some() { n } else { 0 };
        let mut g = vec![0.0; nz];
        let mut jac = Mat::zeros(block_rows + box_rows, nz);
        let mut r0 = 0;
        for ev in evals {
            let Some(d) = ev.scaled.first().map(|(_, b)| b.rows()) else {
                continue;
            };
            for (a, ba) in &ev.scaled {
                g[*a] -= ba.trace();
                let mut k = r0;
                for p in 0..d {
                    jac[(k, *a)] += ba[(p, p)];
                    k += 1;
                    for q in (p + 1)..d {
                        jac[(k, *a)] += std::f64::consts::SQRT_2 * ba[(p, q)];
                        k += 1;
                    }
                }
            }
            r0 += d * (d + 1) / 2;
        }
        if let Some(bd) = self.box_bound {
            for j in 0..n {
                let up = 1.0 / (bd - z[j]);
                let lo = 1.0 / (bd + z[j]);
                g[j] += up - lo;
                jac[(r0 + j, j)] = (up * up + lo * lo).sqrt();
            }
        }
        (g, jac)
    }

    /// Largest step along `dz` that keeps every block and the box feasible.
    fn max_step(&self, z: &[f64], dz: &[f64], evals: &[BlockEval]) -> f64 {
        let mut smax = f64::INFINITY;
        for ev in evals {
            let d = ev.scaled[0].1.rows();
            let mut bd = Mat::zeros(d, d);
            for (a, ba) in &ev.scaled {
                bd.axpy(dz[*a], ba);
            }
            if let Ok(lmin) = SymMat::symmetrize(&bd).min_eigenvalue() {
                if lmin < 0.0 {
                    smax = smax.min(-1.0 / lmin);
                }
            }
        }
        if let Some(b) = self.box_bound {
            for j in 0..self.form.n_vars {
                if dz[j] > 0.0 {
                    smax = smax.min((b - z[j]) / dz[j]);
                } else if dz[j] < 0.0 {
                    smax = smax.min((b + z[j]) / -dz[j]);
                }
            }
        }
        smax
    }

    /// Rigorous lower bound on the objective from `Z_i = F_i⁻¹/τ`, available
    /// when every unknown is box bounded.
    fn dual_bound(&self, evals: &[BlockEval], tau: f64) -> Option<f64> {
        let bd = self.box_bound?;
        let n = self.form.n_vars;
        let mut zs: Vec<Mat> = evals.iter().map(|e| e.inverse.scale(1.0 / tau)).collect();
        if self.margin_mode {
            let tr: f64 = zs.iter().map(Mat::trace).sum();
            if !(tr > 0.0) {
                return None;
            }
            for z in &mut zs {
                *z = z.scale(1.0 / tr);
            }
        }
        let mut r = vec![0.0; n];
        let mut value = 0.0;
        for (i, zi) in zs.iter().enumerate() {
            // ⟨Z, −base⟩ = ⟨Z, δI + G₀⟩
            value -= zi.dot(&self.base[i]);
            for (a, d) in &self.derivs[i] {
                if *a < n {
                    // D = −G
                    r[*a] -= zi.dot(d);
                }
            }
        }
        let c = &self.c[..n];
        value -= bd * r.iter().zip(c).map(|(rj, cj)| (rj + cj).abs()).sum::<f64>();
        Some(value)
    }

    /// Recession directions of the constraint map: unknown combinations that
    /// leave every block unchanged. Returns `Err(())` if the objective
    /// decreases along one of them (unbounded problem).
    fn recession_basis(&self) -> std::result::Result<Option<Mat>, ()> {
        if self.box_bound.is_some() {
            return Ok(None);
        }
        let rows: usize = self.base.iter().map(|b| b.rows() * (b.rows() + 1) / 2).sum();
        let mut map = Mat::zeros(rows, self.nz);
        let mut r0 = 0;
        for (i, b) in self.base.iter().enumerate() {
            let d = b.rows();
            for (a, m) in &self.derivs[i] {
                let mut k = r0;
                for p in 0..d {
                    for q in p..d {
                        map[(k, *a)] += m[(p, q)];
                        k += 1;
                    }
                }
            }
            r0 += d * (d + 1) / 2;
        }
        let null = null_space_basis(&map).map_err(|_| ())?;
        if null.cols() == 0 {
            return Ok(None);
        }
        let cnorm = self.c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..null.cols() {
            let dot: f64 = (0..self.nz).map(|a| null[(a, k)] * self.c[a]).sum();
            if dot.abs() > 1e-9 * (1.0 + cnorm) {
                return Err(());
            }
        }
        Ok(Some(null))
    }
}

fn lower_inverse(l: &Mat) -> Mat {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = s / l[(i, i)];
        }
    }
    inv
}

enum Stop {
    Converged,
    FeasibleFound,
    InfeasibleProven,
    MaxIter,
    Failure,
    Unbounded,
}

struct PathResult {
    z: Vec<f64>,
    stop: Stop,
    iterations: usize,
    history: Vec<f64>,
    dual_bound: Option<f64>,
}

/// Path following from a strictly feasible `z0`.
/// `feasible_below`: in margin mode, stop once a centered `t` is below it;
/// `infeasible_above`: stop once the dual bound exceeds it.
fn follow_path(
    barrier: &Barrier<'_>,
    settings: &SolverSettings,
    z0: Vec<f64>,
    feasible_below: Option<f64>,
    infeasible_above: Option<f64>,
) -> PathResult {
    const MU: f64 = 10.0;
    const CENTER_TOL: f64 = 1e-10;
    const MAX_CENTER_STEPS: usize = 60;

    let mut z = z0;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut best_bound: Option<f64> = None;
    let recession = match barrier.recession_basis() {
        Ok(r) => r,
        Err(()) => {
            return PathResult {
                z,
                stop: Stop::Unbounded,
                iterations,
                history,
                dual_bound: None,
            }
        }
    };

    let result = |z, stop, iterations, history, dual_bound| PathResult {
        z,
        stop,
        iterations,
        history,
        dual_bound,
    };

    let Some(evals0) = barrier.eval_blocks(&z) else {
        return result(z, Stop::Failure, 0, history, None);
    };
    let (g0, j0) = barrier.derivatives(&z, &evals0);
    let mut tau = initial_tau(barrier, &g0, &j0);
    let mut consecutive_regularized = 0;

    loop {
        // centering
        let mut centered = false;
        let mut evals = None;
        for _ in 0..MAX_CENTER_STEPS {
            if iterations >= settings.max_iterations {
                return result(z, Stop::MaxIter, iterations, history, best_bound);
            }
            let Some(ev) = barrier.eval_blocks(&z) else {
                return result(z, Stop::Failure, iterations, history, best_bound);
            };
            let (gb, mut jac) = barrier.derivatives(&z, &ev);
            let g: Vec<f64> = gb.iter().zip(&barrier.c).map(|(g, c)| g + tau * c).collect();
            if let Some(nb) = &recession {
                // penalize motion along directions no block can see
                let rho = (0..jac.cols())
                    .map(|j| (0..jac.rows()).map(|i| jac[(i, j)].powi(2)).sum::<f64>())
                    .fold(1.0, f64::max)
                    .sqrt();
                jac = Mat::block(&[[jac.clone()], [nb.transpose().scale(rho)]]).expect("conformal");
            }
            let (dz, regularized) = match newton_direction(&jac, &g) {
                Some(d) => d,
                None => return result(z, Stop::Failure, iterations, history, best_bound),
            };
            if regularized {
                consecutive_regularized += 1;
                if consecutive_regularized >= 3 {
                    return result(z, Stop::Failure, iterations, history, best_bound);
                }
            } else {
                consecutive_regularized = 0;
            }
            let lambda2: f64 = -g.iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>();
            if !lambda2.is_finite() {
                return result(z, Stop::Failure, iterations, history, best_bound);
            }
            if lambda2 <= 2.0 * CENTER_TOL {
                centered = true;
                evals = Some(ev);
                break;
            }
            let lambda = lambda2.max(0.0).sqrt();
            let mut s = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
            s = s.min(settings.step_fraction * barrier.max_step(&z, &dz, &ev));
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + s * b).collect();
                if barrier.value_at(&trial).is_some() {
                    z = trial;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            iterations += 1;
            if !accepted {
                return result(z, Stop::Failure, iterations, history, best_bound);
            }
        }
        let ev = match evals {
            Some(ev) => ev,
            None => match barrier.eval_blocks(&z) {
                Some(ev) => ev,
                None => return result(z, Stop::Failure, iterations, history, best_bound),
            },
        };
        let obj = barrier.objective(&z);
        history.push(obj);
        let gap = barrier.nu / tau;
        if let Some(b) = barrier.dual_bound(&ev, tau) {
            best_bound = Some(best_bound.map_or(b, |bb: f64| bb.max(b)));
        }
        if let (Some(thr), true) = (feasible_below, barrier.margin_mode) {
            if obj < thr && centered {
                return result(z, Stop::FeasibleFound, iterations, history, best_bound);
            }
        }
        if let (Some(thr), Some(b)) = (infeasible_above, best_bound) {
            if b >= thr {
                return result(z, Stop::InfeasibleProven, iterations, history, best_bound);
            }
        }
        let tol = settings.duality_gap_tol * (1.0 + obj.abs());
        let certified_gap = best_bound.map(|b| obj - b);
        if gap <= tol || certified_gap.is_some_and(|g| g <= tol && gap <= 1e3 * tol) {
            return result(z, Stop::Converged, iterations, history, best_bound);
        }
        tau *= MU;
    }
}

fn initial_tau(barrier: &Barrier<'_>, gb: &[f64], jac: &Mat) -> f64 {
    // least-squares fit of τ·c + ∇φ ≈ 0 in the local norm
    let fallback = (barrier.nu / (1.0 + barrier.objective(&vec![0.0; barrier.nz]).abs())).clamp(1e-3, 1e3);
    let neg_c: Vec<f64> = barrier.c.iter().map(|v| -v).collect();
    let Some((hc, _)) = newton_direction(jac, &neg_c) else {
        return fallback;
    };
    // hc = H⁻¹c
    let num: f64 = -gb.iter().zip(&hc).map(|(a, b)| a * b).sum::<f64>();
    let den: f64 = barrier.c.iter().zip(&hc).map(|(a, b)| a * b).sum();
    let tau = if den > 0.0 { num / den } else { fallback };
    if tau.is_finite() && tau > 0.0 {
        tau.clamp(1e-3, 1e3)
    } else {
        fallback
    }
}

/// Solves `JᵀJ Δ = −g` through a QR factorization of the column-scaled
/// `J`, which keeps the conditioning at that of `J` rather than its square.
/// Rank deficiency is handled by appending `1e−12`-sized ridge rows.
fn newton_direction(jac: &Mat, g: &[f64]) -> Option<(Vec<f64>, bool)> {
    let (rows, n) = jac.shape();
    let d: Vec<f64> = (0..n)
        .map(|j| {
            let norm = (0..rows).map(|i| jac[(i, j)] * jac[(i, j)]).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    let rhs: Vec<f64> = g.iter().zip(&d).map(|(v, dj)| -v * dj).collect();
    let mut ridge: f64 = 0.0;
    for attempt in 0..4 {
        let extra = if ridge > 0.0 || rows < n { n } else { 0 };
        let mut m = Mat::zeros(rows + extra, n);
        for i in 0..rows {
            for j in 0..n {
                m[(i, j)] = jac[(i, j)] * d[j];
            }
        }
        for j in 0..extra {
            m[(rows + j, j)] = ridge.max(1e-12f64).sqrt();
        }
        let l = qr_gram_factor(&m).ok()?;
        let dmax = (0..n).map(|i| l[(i, i)].abs()).fold(0.0, f64::max);
        let dmin = (0..n).map(|i| l[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if dmin > 1e-13 * dmax && dmin.is_finite() {
            let y = cholesky_solve(&l, &rhs);
            if y.iter().all(|v| v.is_finite()) {
                let dz = y.iter().zip(&d).map(|(a, b)| a * b).collect();
                return Some((dz, attempt > 0 || extra > 0));
            }
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 1e3 };
    }
    None
}

fn block_max_eigs(form: &StandardForm, x: &[f64]) -> Vec<f64> {
    form.blocks
        .iter()
        .map(|b| SymMat::symmetrize(&b.evaluate(x)).max_eigenvalue().unwrap_or(f64::NAN))
        .collect()
}

fn run_margin(form: &StandardForm, settings: &SolverSettings, x0: &[f64], shifts: &[f64], threshold: f64) -> Solution {
    let barrier = Barrier::new(form, true, shifts);
    let n = form.n_vars;
    // start with every block comfortably inside
    let mut t0 = f64::NEG_INFINITY;
    for i in 0..form.blocks.len() {
        let f = barrier.block_value(i, &barrier.lift(x0, Some(0.0)));
        let lmin = SymMat::symmetrize(&f).min_eigenvalue().unwrap_or(0.0);
        t0 = t0.max(-lmin);
    }
    let t0 = t0 + t0.abs().max(1.0);
    let z0 = barrier.lift(x0, Some(t0));
    let feasible_below = settings.stop_at_feasible.then_some(threshold);
    let path = follow_path(&barrier, settings, z0, feasible_below, Some(threshold));
    let x = path.z[..n].to_vec();
    let t = path.z[n];
    let status = match path.stop {
        Stop::Unbounded => SolveStatus::Unbounded,
        // every iterate is interior, so a margin below the threshold already
        // proves feasibility even if later steps stalled
        Stop::Failure | Stop::MaxIter if t < threshold => SolveStatus::Optimal,
        Stop::Failure => SolveStatus::NumericalFailure,
        Stop::MaxIter => SolveStatus::MaxIter,
        Stop::InfeasibleProven => SolveStatus::InfeasibleCertificate,
        _ if t < threshold => SolveStatus::Optimal,
        // tie at the margin counts as infeasible
        _ => SolveStatus::InfeasibleCertificate,
    };
    if status == SolveStatus::Unbounded {
        let mut s = Solution::failed(status, n, path.iterations);
        s.objective_value = f64::NEG_INFINITY;
        return s;
    }
    Solution {
        status,
        block_max_eigs: block_max_eigs(form, &x),
        x,
        objective_value: t,
        margin: Some(t),
        dual_bound: path.dual_bound,
        iterations: path.iterations,
        objective_history: path.history,
        early_exit: matches!(path.stop, Stop::FeasibleFound),
    }
}

fn run_objective(form: &StandardForm, settings: &SolverSettings, x0: &[f64], shifts: &[f64]) -> Solution {
    let barrier = Barrier::new(form, false, shifts);
    let path = follow_path(&barrier, settings, x0.to_vec(), None, None);
    let status = match path.stop {
        Stop::Converged => SolveStatus::Optimal,
        Stop::MaxIter => SolveStatus::MaxIter,
        Stop::Unbounded => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };
    let x = path.z;
    Solution {
        status,
        block_max_eigs: block_max_eigs(form, &x),
        objective_value: if status == SolveStatus::Unbounded {
            f64::NEG_INFINITY
        } else {
            form.objective_value(&x)
        },
        x,
        margin: None,
        dual_bound: path.dual_bound.map(|b| b + form.objective_offset),
        iterations: path.iterations,
        objective_history: path.history.iter().map(|v| v + form.objective_offset).collect(),
        early_exit: false,
    }
}
