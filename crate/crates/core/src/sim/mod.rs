//! Time-domain integration of delay systems by the method of steps.
//!
//! Classical RK4 on a mesh aligned with the delay (`h/dt` an even integer).
//! The discrete delay is read from the stored solution through cubic Hermite
//! interpolation, and the distributed term is composite Simpson over the
//! `h/dt + 1` mesh nodes of the current window.

mod history;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::system::DelaySystem;

pub use history::HistoryFunction;

/// State norm above which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Relative slack allowed by [`envelope_check`] and [`lyapunov_diagnostic`].
pub const DIAGNOSTIC_TOL: f64 = 1e-6;

const NORM_GRID: usize = 1000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub h: f64,
    /// Step actually used (the requested step rounded down onto the delay mesh).
    pub dt: f64,
    pub history: HistoryFunction,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `ẋ` at each sample; at `t = 0` this is the right derivative.
    pub derivatives: Vec<Vec<f64>>,
    pub phi_norm_h: f64,
    pub phi_dot_norm_h: f64,
    pub phi_norm_w: f64,
    pub diverged: bool,
}

impl TrajectoryRecord {
    fn mesh(&self) -> Mesh<'_> {
        Mesh {
            dt: self.dt,
            history: &self.history,
            states: &self.states,
            derivs: &self.derivatives,
        }
    }

    pub fn n(&self) -> usize {
        self.history.dim()
    }

    /// `x(s)` for `s ∈ [−h, t_end]`.
    pub fn state_at(&self, s: f64) -> Vec<f64> {
        self.mesh().value(s)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("record always holds x(0)")
    }

    /// `t, x_1..x_n[, dx_1..dx_n]` with a header row.
    pub fn to_csv(&self, with_derivatives: bool) -> String {
        let n = self.n();
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x_{i}");
        }
        if with_derivatives {
            for i in 1..=n {
                let _ = write!(out, ",dx_{i}");
            }
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in &self.states[k] {
                let _ = write!(out, ",{v}");
            }
            if with_derivatives {
                for v in &self.derivatives[k] {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Read access to `x` on `[−h, t_k]`: history for `s ≤ 0`, Hermite
/// interpolation of the stored steps for `s > 0`.
struct Mesh<'a> {
    dt: f64,
    history: &'a HistoryFunction,
    states: &'a [Vec<f64>],
    derivs: &'a [Vec<f64>],
}

impl Mesh<'_> {
    /// Interval index and local coordinate `u ∈ [0, 1]` for `s > 0`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let q = s / self.dt;
        let last = self.states.len() - 1;
        let nearest = q.round();
        if (q - nearest).abs() < 1e-9 && (nearest as usize) <= last {
            let k = nearest as usize;
            return if k == last {
                (k.saturating_sub(1), 1.0)
            } else {
                (k, 0.0)
            };
        }
        let k = (q.floor() as usize).min(last.saturating_sub(1));
        (k, q - k as f64)
    }

    fn value(&self, s: f64) -> Vec<f64> {
        if s <= 0.0 {
            return self.history.eval(s);
        }
        let (k, u) = self.locate(s);
        // Mesh nodes need no derivative, which matters while the newest
        // derivative is still being computed.
        if self.states.len() == 1 || u == 0.0 {
            return self.states[k].clone();
        }
        if u == 1.0 {
            return self.states[k + 1].clone();
        }
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = (u3 - 2.0 * u2 + u) * self.dt;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = (u3 - u2) * self.dt;
        let (x0, x1, d0, d1) = (
            &self.states[k],
            &self.states[k + 1],
            &self.derivs[k],
            &self.derivs[k + 1],
        );
        (0..x0.len())
            .map(|i| h00 * x0[i] + h10 * d0[i] + h01 * x1[i] + h11 * d1[i])
            .collect()
    }

    /// `ẋ(s)` for `s ≥ 0`, taking the right derivative at 0.
    fn derivative(&self, s: f64) -> Vec<f64> {
        let (k, u) = self.locate(s.max(0.0));
        if self.states.len() == 1 {
            return self.derivs[0].clone();
        }
        let u2 = u * u;
        let g00 = (6.0 * u2 - 6.0 * u) / self.dt;
        let g10 = 3.0 * u2 - 4.0 * u + 1.0;
        let g01 = -g00;
        let g11 = 3.0 * u2 - 2.0 * u;
        let (x0, x1, d0, d1) = (
            &self.states[k],
            &self.states[k + 1],
            &self.derivs[k],
            &self.derivs[k + 1],
        );
        (0..x0.len())
            .map(|i| g00 * x0[i] + g10 * d0[i] + g01 * x1[i] + g11 * d1[i])
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Composite Simpson weights (without the `dt/3` factor) for `m` intervals.
fn simpson_weights(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| {
            if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

struct Rhs<'a> {
    sys: &'a DelaySystem,
    m: usize,
    weights: Vec<f64>,
    has_delay: bool,
    has_dist: bool,
}

impl Rhs<'_> {
    fn eval(&self, mesh: &Mesh<'_>, tau: f64, y: &[f64]) -> Vec<f64> {
        let mut f = self.sys.a.mul_vec(y);
        if self.has_delay {
            let xd = mesh.value(tau - self.sys.h);
            for (fi, v) in f.iter_mut().zip(self.sys.a_d.mul_vec(&xd)) {
                *fi += v;
            }
        }
        if self.has_dist {
            let mut z: Vec<f64> = y.iter().map(|v| v * self.weights[0]).collect();
            for j in 1..=self.m {
                let xs = mesh.value(tau - j as f64 * mesh.dt);
                for (zi, v) in z.iter_mut().zip(&xs) {
                    *zi += self.weights[j] * v;
                }
            }
            let scale = mesh.dt / 3.0;
            z.iter_mut().for_each(|v| *v *= scale);
            for (fi, v) in f.iter_mut().zip(self.sys.a_dist.mul_vec(&z)) {
                *fi += v;
            }
        }
        f
    }
}

/// Integrates the system from history `phi` up to `horizon`.
///
/// `dt` must not exceed `h/16`; it is rounded down so that `h/dt` is even.
/// A run whose state norm exceeds [`DIVERGENCE_THRESHOLD`] stops early with
/// `diverged` set.
pub fn integrate(sys: &DelaySystem, phi: &HistoryFunction, horizon: f64, dt: f64) -> Result<TrajectoryRecord> {
    let n = sys.n();
    let h = sys.h;
    if phi.dim() != n {
        return Err(Error::dim(
            "integrate",
            format!("history has dimension {}, system {n}", phi.dim()),
        ));
    }
    phi.check_domain(h)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= h / 16.0 * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "step {dt} must lie in (0, h/16 = {}]",
            h / 16.0
        )));
    }
    let mut m = (h / dt - 1e-9).ceil() as usize;
    m += m % 2;
    let dt = h / m as f64;
    let steps = (horizon / dt - 1e-9).ceil() as usize;

    let rhs = Rhs {
        sys,
        m,
        weights: simpson_weights(m),
        has_delay: sys.a_d.max_abs() > 0.0,
        has_dist: sys.a_dist.max_abs() > 0.0,
    };

    let (phi_norm_h, phi_dot_norm_h) = history_norms(phi, h);
    let x0 = phi.eval(0.0);
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    {
        let mesh = Mesh {
            dt,
            history: phi,
            states: &states,
            derivs: &[],
        };
        derivs.push(rhs.eval(&mesh, 0.0, &x0));
    }
    let mut diverged = false;

    for k in 0..steps {
        let t = k as f64 * dt;
        let mesh = Mesh {
            dt,
            history: phi,
            states: &states,
            derivs: &derivs,
        };
        let x = &states[k];
        let k1 = derivs[k].clone();
        let y2: Vec<f64> = x.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = rhs.eval(&mesh, t + 0.5 * dt, &y2);
        let y3: Vec<f64> = x.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = rhs.eval(&mesh, t + 0.5 * dt, &y3);
        let y4: Vec<f64> = x.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = rhs.eval(&mesh, t + dt, &y4);
        let next: Vec<f64> = (0..n)
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        let t_next = (k + 1) as f64 * dt;
        states.push(next);
        times.push(t_next);
        let mesh = Mesh {
            dt,
            history: phi,
            states: &states,
            derivs: &derivs,
        };
        let d = rhs.eval(&mesh, t_next, &states[k + 1]);
        derivs.push(d);
        if norm(&states[k + 1]) > DIVERGENCE_THRESHOLD {
            diverged = true;
            break;
        }
    }

    Ok(TrajectoryRecord {
        h,
        dt,
        history: phi.clone(),
        times,
        states,
        derivatives: derivs,
        phi_norm_h,
        phi_dot_norm_h,
        phi_norm_w: phi_norm_h.max(phi_dot_norm_h),
        diverged,
    })
}

/// `(‖φ‖_h, ‖φ̇‖_h)`: suprema of the Euclidean norms over `[−h, 0]`.
pub fn history_norms(phi: &HistoryFunction, h: f64) -> (f64, f64) {
    (
        sup_norm(|s| phi.eval(s), -h, 0.0),
        sup_norm(|s| phi.derivative(s), -h, 0.0),
    )
}

/// Supremum of `‖f‖` on `[a, b]`: grid scan, then golden-section refinement
/// around the best grid local maxima.
pub fn sup_norm(f: impl Fn(f64) -> Vec<f64>, a: f64, b: f64) -> f64 {
    let step = (b - a) / NORM_GRID as f64;
    let at = |i: usize| if i == NORM_GRID { b } else { a + i as f64 * step };
    let vals: Vec<f64> = (0..=NORM_GRID).map(|i| norm(&f(at(i)))).collect();
    let mut best = vals.iter().cloned().fold(0.0, f64::max);
    let mut peaks: Vec<usize> = (1..NORM_GRID)
        .filter(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1])
        .collect();
    peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for &i in peaks.iter().take(4) {
        let (mut lo, mut hi) = (at(i - 1), at(i + 1));
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let (mut fc, mut fd) = (norm(&f(c)), norm(&f(d)));
        for _ in 0..60 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = norm(&f(c));
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = norm(&f(d));
            }
        }
        best = best.max(fc).max(fd);
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// `max_t ‖x(t)‖ / (γ e^{−αt} ‖φ‖_W)`.
    pub worst_margin: f64,
    pub worst_time: f64,
}

/// Checks `‖x(t)‖ ≤ γ e^{−αt} ‖φ‖_W` at every stored sample, with relative
/// slack [`DIAGNOSTIC_TOL`]. A diverged record never holds.
pub fn envelope_check(record: &TrajectoryRecord, gamma: f64, alpha: f64) -> EnvelopeReport {
    let mut worst_margin: f64 = 0.0;
    let mut worst_time = 0.0;
    for (t, x) in record.times.iter().zip(&record.states) {
        let nx = norm(x);
        let bound = gamma * (-alpha * t).exp() * record.phi_norm_w;
        let margin = if nx == 0.0 {
            0.0
        } else if bound > 0.0 {
            nx / bound
        } else {
            f64::INFINITY
        };
        if margin > worst_margin {
            worst_margin = margin;
            worst_time = *t;
        }
    }
    EnvelopeReport {
        holds: !record.diverged && worst_margin <= 1.0 + DIAGNOSTIC_TOL,
        worst_margin,
        worst_time,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    /// `e^{2αt} V(x_t, ẋ_t)` at each sample.
    pub values: Vec<f64>,
    /// Largest rise above the running minimum, relative to the initial value.
    pub worst_rise: f64,
    pub nonincreasing: bool,
}

/// Quadrature nodes for one mesh interval: left end, midpoint, right end.
struct IntervalData {
    x: [Vec<f64>; 3],
    s_form: [f64; 3],
    r_form: [f64; 3],
}

fn quad_form(m: &Mat, v: &[f64]) -> f64 {
    v.iter().zip(m.mul_vec(v)).map(|(a, b)| a * b).sum()
}

/// Evaluates the weighted functional
///
/// ```text
/// V = x̄ᵀPx̄ + ∫_{t−h}^{t} e^{−2α(t−s)} xᵀSx ds + h ∫_{t−h}^{t} ∫_θ^t e^{−2α(t−s)} ẋᵀRẋ ds dθ,
/// x̄ = [x(t); ∫_{t−h}^{t} x]
/// ```
///
/// along a stored trajectory and returns `e^{2αt}V`. The double integral is
/// reduced to `h ∫ (s − t + h) e^{−2α(t−s)} ẋᵀRẋ ds`; every integral is
/// Simpson on mesh intervals with Hermite midpoints, split at `s = 0` where
/// `ẋ` may jump.
pub fn lyapunov_diagnostic(record: &TrajectoryRecord, p: &Mat, s: &Mat, r: &Mat, alpha: f64) -> Result<LyapunovSeries> {
    let n = record.n();
    if p.shape() != (2 * n, 2 * n) || s.shape() != (n, n) || r.shape() != (n, n) {
        return Err(Error::dim(
            "lyapunov_diagnostic",
            format!("P {:?}, S {:?}, R {:?} for n = {n}", p.shape(), s.shape(), r.shape()),
        ));
    }
    let dt = record.dt;
    let h = record.h;
    let m = (h / dt).round() as usize;
    let mesh = record.mesh();
    let phi = &record.history;
    let k_end = record.states.len() - 1;

    // Intervals indexed from −m (the oldest history interval) to k_end − 1.
    let intervals: Vec<IntervalData> = (0..m + k_end)
        .map(|idx| {
            let i = idx as isize - m as isize;
            let l = i as f64 * dt;
            let pts = [l, l + 0.5 * dt, l + dt];
            let (x, d): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if i < 0 {
                pts.iter().map(|&q| (phi.eval(q), phi.derivative(q))).unzip()
            } else {
                let k = i as usize;
                let mid = l + 0.5 * dt;
                (
                    vec![record.states[k].clone(), mesh.value(mid), record.states[k + 1].clone()],
                    vec![
                        record.derivatives[k].clone(),
                        mesh.derivative(mid),
                        record.derivatives[k + 1].clone(),
                    ],
                )
            };
            IntervalData {
                s_form: [quad_form(s, &x[0]), quad_form(s, &x[1]), quad_form(s, &x[2])],
                r_form: [quad_form(r, &d[0]), quad_form(r, &d[1]), quad_form(r, &d[2])],
                x: [x[0].clone(), x[1].clone(), x[2].clone()],
            }
        })
        .collect();

    let mut values = Vec::with_capacity(k_end + 1);
    for k in 0..=k_end {
        let t = k as f64 * dt;
        let mut int_x = vec![0.0; n];
        let mut int_s = 0.0;
        let mut int_r = 0.0;
        for (idx, iv) in intervals.iter().enumerate().skip(k).take(m) {
            let left = (idx as f64 - m as f64) * dt;
            let offs = [0.0, 0.5 * dt, dt];
            for q in 0..3 {
                let w = dt / 6.0 * if q == 1 { 4.0 } else { 1.0 };
                let sq = left + offs[q];
                let decay = (-2.0 * alpha * (t - sq)).exp();
                for (zi, v) in int_x.iter_mut().zip(&iv.x[q]) {
                    *zi += w * v;
                }
                int_s += w * decay * iv.s_form[q];
                int_r += w * decay * h * (sq - t + h) * iv.r_form[q];
            }
        }
        let mut xbar = record.states[k].clone();
        xbar.extend_from_slice(&int_x);
        let v = quad_form(p, &xbar) + int_s + int_r;
        values.push((2.0 * alpha * t).exp() * v);
    }

    let v0 = values.first().copied().unwrap_or(0.0);
    let mut worst_rise: f64 = 0.0;
    let mut running_min = f64::INFINITY;
    for &v in &values {
        if running_min.is_finite() && v0 > 0.0 {
            worst_rise = worst_rise.max((v - running_min) / v0);
        }
        running_min = running_min.min(v);
    }
    Ok(LyapunovSeries {
        times: record.times.clone(),
        values,
        worst_rise,
        nonincreasing: worst_rise <= DIAGNOSTIC_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(a: f64, ad: f64, adist: f64, h: f64) -> DelaySystem {
        DelaySystem::new(Mat::from_diag(&[a]), Mat::from_diag(&[ad]), Mat::from_diag(&[adist]), h).unwrap()
    }

    #[test]
    fn pure_ode_matches_exponential() {
        let sys = DelaySystem::new(Mat::identity(2).scale(-1.0), Mat::zeros(2, 2), Mat::zeros(2, 2), 1.0).unwrap();
        let rec = integrate(&sys, &HistoryFunction::constant(&[1.0, -2.0]), 1.0, 1.0 / 64.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((rec.final_state()[0] - e).abs() < 1e-8);
        assert!((rec.final_state()[1] + 2.0 * e).abs() < 1e-8);
        assert!(!rec.diverged);
    }

    #[test]
    fn distributed_term_of_constant_history() {
        let h = 0.5;
        let sys = scalar_system(0.0, 0.0, -1.0 / h, h);
        let rec = integrate(&sys, &HistoryFunction::constant(&[3.0]), 0.1, h / 32.0).unwrap();
        assert!((rec.derivatives[0][0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn step_is_aligned_with_delay() {
        let sys = scalar_system(-1.0, 0.0, 0.0, 1.0);
        let rec = integrate(&sys, &HistoryFunction::constant(&[1.0]), 1.0, 0.03).unwrap();
        let m = rec.h / rec.dt;
        assert!((m - m.round()).abs() < 1e-9 && m.round() as usize % 2 == 0);
        assert!(rec.dt <= 0.03);
        assert!(integrate(&sys, &HistoryFunction::constant(&[1.0]), 1.0, 0.1).is_err());
    }

    #[test]
    fn discrete_delay_first_step_is_exact() {
        // ẋ = −x(t−1), φ ≡ 1 gives x(t) = 1 − t on [0, 1].
        let sys = scalar_system(0.0, -1.0, 0.0, 1.0);
        let rec = integrate(&sys, &HistoryFunction::constant(&[1.0]), 1.5, 1.0 / 32.0).unwrap();
        assert!((rec.state_at(0.5)[0] - 0.5).abs() < 1e-12);
        // On [1, 2]: x(t) = 1 − t + (t−1)²/2.
        let t: f64 = 1.5;
        assert!((rec.final_state()[0] - (1.0 - t + (t - 1.0).powi(2) / 2.0)).abs() < 1e-10);
    }

    #[test]
    fn growth_sets_divergence_flag() {
        let sys = scalar_system(30.0, 0.0, 0.0, 1.0);
        let rec = integrate(&sys, &HistoryFunction::constant(&[1.0]), 50.0, 1.0 / 64.0).unwrap();
        assert!(rec.diverged);
        assert!(*rec.times.last().unwrap() < 50.0);
        assert!(!envelope_check(&rec, 1e6, 0.0).holds);
    }

    #[test]
    fn zero_history_is_trivial() {
        let sys = scalar_system(-1.0, 0.5, -0.2, 1.0);
        let rec = integrate(&sys, &HistoryFunction::constant(&[0.0]), 2.0, 1.0 / 32.0).unwrap();
        let env = envelope_check(&rec, 1.0, 0.5);
        assert!(env.holds && env.worst_margin == 0.0);
        let one = Mat::identity(1);
        let lyap = lyapunov_diagnostic(&rec, &Mat::identity(2), &one, &one, 0.3).unwrap();
        assert!(lyap.values.iter().all(|&v| v == 0.0) && lyap.nonincreasing);
    }

    #[test]
    fn csv_layout() {
        let sys = scalar_system(-1.0, 0.0, 0.0, 1.0);
        let rec = integrate(&sys, &HistoryFunction::constant(&[1.0]), 0.125, 1.0 / 16.0).unwrap();
        let csv = rec.to_csv(true);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_1,dx_1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1,-1"));
    }

    #[test]
    fn sup_norm_finds_interior_peak() {
        // ‖(θ+0.3)² − 1‖ on [−1, 0] peaks at θ = −0.3 with value 1.
        let v = sup_norm(|t| vec![(t + 0.3) * (t + 0.3) - 1.0], -1.0, 0.0);
        assert!((v - 1.0).abs() < 1e-12);
        let w = sup_norm(|t| vec![(7.0 * t).sin(), 0.0], -1.0, 0.0);
        assert!((w - 1.0).abs() < 1e-12);
    }
}
