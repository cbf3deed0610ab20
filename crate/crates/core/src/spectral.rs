//! Characteristic roots of `ẋ = Ax + A_d x(t−h) + A_D ∫_{t−h}^{t} x`.
//!
//! The infinitesimal generator of the solution semigroup is discretized by
//! Chebyshev collocation on `[−h, 0]`; its rightmost eigenvalue is then
//! polished by Newton's method on `det Δ(s) = 0` with
//!
//! ```text
//!     Δ(s) = sI − A − A_d e^{−hs} − A_D (1 − e^{−hs})/s
//! ```
//!
//! where the last factor is extended by its limit `h` at `s = 0`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{eigenvalues_general, Mat};
use crate::system::DelaySystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSettings {
    /// Collocation intervals (the mesh has `nodes + 1` points).
    pub nodes: usize,
    /// Allowed change of the rightmost root between `nodes` and `nodes + 5`.
    pub convergence: f64,
    /// Largest mesh tried before giving up.
    pub max_nodes: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            nodes: 20,
            convergence: 1e-6,
            max_nodes: 80,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RightmostRoot {
    pub root: Complex64,
    /// Collocation estimate before Newton refinement.
    pub collocation_root: Complex64,
    pub nodes: usize,
    pub newton_iterations: usize,
    /// `|det Δ(s)|` divided by `(|s| + ‖A‖ + ‖A_d‖e^{−h Re s} + ‖A_D‖·|q(s)|)ⁿ`.
    pub scaled_residual: f64,
    /// Rightmost part of the discretized spectrum (diagnostic).
    pub spectrum: Vec<Complex64>,
}

impl RightmostRoot {
    /// Exact decay rate of the system: `−Re s*` (negative when unstable).
    pub fn decay_rate(&self) -> f64 {
        -self.root.re
    }
}

/// Chebyshev points `cos(jπ/N)` and the differentiation matrix on them.
fn chebyshev(n: usize) -> (Vec<f64>, Mat) {
    let x: Vec<f64> = (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let c: Vec<f64> = (0..=n)
        .map(|j| {
            let base = if j == 0 || j == n { 2.0 } else { 1.0 };
            if j % 2 == 0 {
                base
            } else {
                -base
            }
        })
        .collect();
    let mut d = Mat::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c[i] / c[j] / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Clenshaw–Curtis weights on `[−1, 1]` for the points `cos(jπ/N)`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let theta: Vec<f64> = (0..=n).map(|j| std::f64::consts::PI * j as f64 / n as f64).collect();
    let mut w = vec![0.0; n + 1];
    let nf = n as f64;
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta[i + 1]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    w
}

/// Collocation matrix of the generator on `N + 1` Chebyshev nodes of
/// `[−h, 0]` (node 0 at `θ = 0`, node N at `θ = −h`).
pub fn generator_matrix(sys: &DelaySystem, nodes: usize) -> Result<Mat> {
    if nodes < 5 {
        return Err(Error::invalid(format!(
            "need at least 5 collocation nodes, got {nodes}"
        )));
    }
    let n = sys.n();
    let h = sys.h;
    let (_, d) = chebyshev(nodes);
    let w = clenshaw_curtis(nodes);
    let size = n * (nodes + 1);
    let mut m = Mat::zeros(size, size);
    // boundary row: the equation itself
    for k in 0..=nodes {
        let mut blk = sys.a_dist.scale(0.5 * h * w[k]);
        if k == 0 {
            blk = &blk + &sys.a;
        }
        if k == nodes {
            blk = &blk + &sys.a_d;
        }
        m.set_submatrix(0, k * n, &blk);
    }
    // interior rows: d/dθ = (2/h) d/dx
    for j in 1..=nodes {
        for k in 0..=nodes {
            let v = 2.0 / h * d[(j, k)];
            if v != 0.0 {
                for i in 0..n {
                    m[(j * n + i, k * n + i)] = v;
                }
            }
        }
    }
    Ok(m)
}

/// `(1 − e^{−hs})/s` and its derivative, by series near `s = 0`.
fn dist_symbol(h: f64, s: Complex64) -> (Complex64, Complex64) {
    let hs = s * h;
    if hs.norm() < 0.5 {
        // q(s) = Σ_k c_k s^k with c_k = (−1)^k h^{k+1}/(k+1)!
        let mut q = Complex64::new(0.0, 0.0);
        let mut dq = Complex64::new(0.0, 0.0);
        let mut c = h;
        let mut sk = Complex64::new(1.0, 0.0); // s^k
        let mut sk1 = Complex64::new(0.0, 0.0); // s^{k−1}
        for k in 0..40 {
            q += sk * c;
            dq += sk1 * (c * k as f64);
            sk1 = sk;
            sk *= s;
            c *= -h / (k + 2) as f64;
            if k >= 1 && (sk * c).norm() < 1e-18 * h {
                break;
            }
        }
        (q, dq)
    } else {
        let e = (-hs).exp();
        let q = (Complex64::new(1.0, 0.0) - e) / s;
        let dq = (e * h * s - (Complex64::new(1.0, 0.0) - e)) / (s * s);
        (q, dq)
    }
}

type CMat = Vec<Vec<Complex64>>;

fn char_matrix(sys: &DelaySystem, s: Complex64) -> (CMat, CMat) {
    let n = sys.n();
    let e = (-s * sys.h).exp();
    let (q, dq) = dist_symbol(sys.h, s);
    let mut delta = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut ddelta = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            delta[i][j] = s * id - sys.a[(i, j)] - sys.a_d[(i, j)] * e - sys.a_dist[(i, j)] * q;
            ddelta[i][j] = Complex64::new(id, 0.0) + sys.a_d[(i, j)] * e * sys.h - sys.a_dist[(i, j)] * dq;
        }
    }
    (delta, ddelta)
}

/// In-place LU with partial pivoting; returns the determinant and solves
/// `M X = B` for the columns of `b`.
fn complex_solve(mut m: CMat, mut b: CMat) -> (Complex64, Option<CMat>) {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap_or(k);
        if m[piv][k].norm() == 0.0 {
            return (Complex64::new(0.0, 0.0), None);
        }
        if piv != k {
            m.swap(piv, k);
            b.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                let v = m[k][j];
                m[i][j] -= f * v;
            }
            for j in 0..b[0].len() {
                let v = b[k][j];
                b[i][j] -= f * v;
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..b[0].len() {
            let mut v = b[k][j];
            for l in (k + 1)..n {
                v -= m[k][l] * b[l][j];
            }
            b[k][j] = v / m[k][k];
        }
    }
    (det, Some(b))
}

/// `|det Δ(s)|` scaled by the size of the terms forming `Δ(s)`.
pub fn characteristic_residual(sys: &DelaySystem, s: Complex64) -> f64 {
    let (delta, _) = char_matrix(sys, s);
    let n = sys.n();
    let zero = vec![vec![Complex64::new(0.0, 0.0); 1]; n];
    let (det, _) = complex_solve(delta, zero);
    let (q, _) = dist_symbol(sys.h, s);
    let scale =
        s.norm() + sys.a.frobenius() + sys.a_d.frobenius() * (-sys.h * s.re).exp() + sys.a_dist.frobenius() * q.norm();
    det.norm() / scale.max(1e-300).powi(n as i32)
}

/// Newton's method on `det Δ(s)`: `s ← s − 1/tr(Δ⁻¹Δ')`.
fn newton_refine(sys: &DelaySystem, s0: Complex64) -> (Complex64, usize) {
    let mut s = s0;
    for it in 1..=60 {
        let (delta, ddelta) = char_matrix(sys, s);
        let (_, sol) = complex_solve(delta, ddelta);
        let Some(x) = sol else {
            // Δ(s) exactly singular: s is a root
            return (s, it);
        };
        let tr: Complex64 = (0..sys.n()).map(|i| x[i][i]).sum();
        if tr.norm() == 0.0 || !tr.re.is_finite() || !tr.im.is_finite() {
            return (s, it);
        }
        let step = Complex64::new(1.0, 0.0) / tr;
        s -= step;
        if step.norm() <= 1e-15 * (1.0 + s.norm()) {
            return (s, it);
        }
    }
    (s, 60)
}

fn rightmost_of(eigs: &[Complex64]) -> Complex64 {
    // eigenvalues come sorted by descending real part; prefer Im ≥ 0 in a pair
    let first = eigs[0];
    eigs.iter()
        .take_while(|z| (z.re - first.re).abs() <= 1e-12 * (1.0 + first.re.abs()))
        .copied()
        .max_by(|a, b| a.im.total_cmp(&b.im))
        .unwrap_or(first)
}

fn collocation_rightmost(sys: &DelaySystem, nodes: usize) -> Result<(Complex64, Vec<Complex64>)> {
    let eigs = eigenvalues_general(&generator_matrix(sys, nodes)?)?;
    if eigs.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    Ok((rightmost_of(&eigs), eigs.into_iter().take(12).collect()))
}

/// Rightmost characteristic root, converged in the mesh size and refined by
/// Newton's method.
pub fn rightmost_root(sys: &DelaySystem, settings: &SpectralSettings) -> Result<RightmostRoot> {
    sys.validate()?;
    if settings.nodes < 5 || !(settings.convergence > 0.0) {
        return Err(Error::invalid(
            "spectral settings need nodes ≥ 5 and a positive tolerance",
        ));
    }
    let mut nodes = settings.nodes;
    let (mut est, _) = collocation_rightmost(sys, nodes)?;
    let spectrum = loop {
        if nodes + 5 > settings.max_nodes.max(settings.nodes + 5) {
            return Err(Error::NotConverged(
                "rightmost root did not settle across mesh refinements",
            ));
        }
        let (next, next_spec) = collocation_rightmost(sys, nodes + 5)?;
        let change = (next - est).norm();
        nodes += 5;
        est = next;
        if change <= settings.convergence * (1.0 + est.norm()) {
            break next_spec;
        }
    };
    let (root, iters) = newton_refine(sys, est);
    // keep the collocation value if Newton wandered off to another root
    let root = if (root - est).norm() <= 1e-3 * (1.0 + est.norm()) && root.re.is_finite() {
        root
    } else {
        log::warn!("Newton refinement left the basin of {est}; keeping the collocation root");
        est
    };
    let root = if root.im.abs() <= 1e-12 * (1.0 + root.norm()) {
        Complex64::new(root.re, 0.0)
    } else {
        root
    };
    Ok(RightmostRoot {
        scaled_residual: characteristic_residual(sys, root),
        root,
        collocation_root: est,
        nodes,
        newton_iterations: iters,
        spectrum,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub h: f64,
    pub root: std::result::Result<Complex64, String>,
}

impl FrontierPoint {
    /// `α_spec(h) = −Re s*`, not clamped at zero.
    pub fn decay_rate(&self) -> Option<f64> {
        self.root.as_ref().ok().map(|r| -r.re)
    }
}

/// `α_spec(h)` on a grid of delays; failures are recorded per point.
pub fn spectral_abscissa_frontier(
    sys: &DelaySystem,
    h_grid: &[f64],
    settings: &SpectralSettings,
) -> Result<Vec<FrontierPoint>> {
    if h_grid.is_empty() {
        return Err(Error::invalid("delay grid must be nonempty"));
    }
    Ok(h_grid
        .par_iter()
        .map(|&h| FrontierPoint {
            h,
            root: sys
                .with_delay(h)
                .and_then(|s| rightmost_root(&s, settings))
                .map(|r| r.root)
                .map_err(|e| e.to_string()),
        })
        .collect())
}

pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let mut out = String::from("h,re_rightmost,im_rightmost\n");
    for p in points {
        match &p.root {
            Ok(r) => {
                let _ = writeln!(out, "{},{},{}", p.h, r.re, r.im);
            }
            Err(_) => {
                let _ = writeln!(out, "{},error,error", p.h);
            }
        }
    }
    out
}

/// Delays in `[h_lo, h_hi]` where the rightmost root crosses the imaginary
/// axis, located by a scan of `samples` points and bisection to `tol`.
pub fn stability_crossings(
    sys: &DelaySystem,
    h_lo: f64,
    h_hi: f64,
    samples: usize,
    tol: f64,
    settings: &SpectralSettings,
) -> Result<Vec<f64>> {
    if samples < 2 || !(h_hi > h_lo && h_lo > 0.0) || !(tol > 0.0) {
        return Err(Error::invalid("bad crossing search parameters"));
    }
    let abscissa = |h: f64| -> Result<f64> { Ok(rightmost_root(&sys.with_delay(h)?, settings)?.root.re) };
    let grid: Vec<f64> = (0..samples)
        .map(|k| h_lo + (h_hi - h_lo) * k as f64 / (samples - 1) as f64)
        .collect();
    let values = grid.par_iter().map(|&h| abscissa(h)).collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    for k in 0..samples - 1 {
        if (values[k] < 0.0) != (values[k + 1] < 0.0) {
            let (mut a, mut b) = (grid[k], grid[k + 1]);
            let sa = values[k] < 0.0;
            while b - a > tol {
                let m = 0.5 * (a + b);
                if (abscissa(m)? < 0.0) == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        for n in [8, 9, 20] {
            let w = clenshaw_curtis(n);
            let (x, _) = chebyshev(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13);
            let x2: f64 = w.iter().zip(&x).map(|(w, x)| w * x * x).sum();
            assert!((x2 - 2.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn differentiation_matrix_is_exact_on_cubics() {
        let (x, d) = chebyshev(10);
        let f: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let df = d.mul_vec(&f);
        for (xi, dfi) in x.iter().zip(&df) {
            assert!((dfi - 3.0 * xi * xi).abs() < 1e-11);
        }
    }

    #[test]
    fn distributed_symbol_is_continuous() {
        let h = 1.3;
        for s in [Complex64::new(0.38, 0.1), Complex64::new(-0.2, 0.37)] {
            let (q1, d1) = dist_symbol(h, s);
            let big = s * (1.0 + 1e-9);
            let e = (-big * h).exp();
            let q2 = (Complex64::new(1.0, 0.0) - e) / big;
            assert!((q1 - q2).norm() < 1e-8);
            // finite-difference derivative
            let eps = 1e-6;
            let (qp, _) = dist_symbol(h, s + eps);
            let (qm, _) = dist_symbol(h, s - eps);
            assert!(((qp - qm) / (2.0 * eps) - d1).norm() < 1e-7);
        }
        let (q0, d0) = dist_symbol(h, Complex64::new(0.0, 0.0));
        assert_eq!(q0, Complex64::new(h, 0.0));
        assert_eq!(d0, Complex64::new(-0.5 * h * h, 0.0));
    }

    #[test]
    fn delay_free_root() {
        let sys = DelaySystem::new(Mat::scaled_identity(1, -1.0), Mat::zeros(1, 1), Mat::zeros(1, 1), 1.0).unwrap();
        let r = rightmost_root(&sys, &SpectralSettings::default()).unwrap();
        assert!((r.root - Complex64::new(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn pure_delay_root_matches_lambert() {
        // ẋ = −x(t−1): rightmost roots satisfy s + e^{−s} = 0, s ≈ −0.3181 ± 1.3372i
        let sys = DelaySystem::new(Mat::zeros(1, 1), Mat::scaled_identity(1, -1.0), Mat::zeros(1, 1), 1.0).unwrap();
        let r = rightmost_root(&sys, &SpectralSettings::default()).unwrap();
        let resid = r.root + (-r.root).exp();
        assert!(resid.norm() < 1e-12, "{resid}");
        assert!((r.root.re + 0.318_131_505_2).abs() < 1e-8, "{}", r.root);
        assert!((r.root.im - 1.337_235_701_4).abs() < 1e-8);
    }
}
