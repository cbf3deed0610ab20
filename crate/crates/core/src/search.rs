//! Delay intervals, maximal decay rates and `(h, α)` grid sweeps over a
//! feasibility oracle.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdp::SolverSettings;
use crate::stability::{self, EpsilonProfile, SlackMode};
use crate::synthesis;
use crate::system::{ControlledSystem, DelaySystem};

/// Deterministic `(h, α) → feasible?` query.
pub trait FeasibilityOracle: Sync {
    fn feasible(&self, h: f64, alpha: f64) -> Result<bool>;
}

impl<F> FeasibilityOracle for F
where
    F: Fn(f64, f64) -> Result<bool> + Sync,
{
    fn feasible(&self, h: f64, alpha: f64) -> Result<bool> {
        self(h, alpha)
    }
}

/// Stability LMIs of a fixed system with the delay replaced by `h`.
pub struct StabilityOracle {
    pub system: DelaySystem,
    pub mode: SlackMode,
    pub settings: SolverSettings,
}

impl FeasibilityOracle for StabilityOracle {
    fn feasible(&self, h: f64, alpha: f64) -> Result<bool> {
        stability::is_feasible(&self.system.with_delay(h)?, alpha, &self.mode, &self.settings)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GainProblem {
    Controller,
    Observer,
}

/// Gain-synthesis LMIs of a controlled system with the delay replaced by `h`.
pub struct SynthesisOracle {
    pub system: ControlledSystem,
    pub problem: GainProblem,
    pub profile: EpsilonProfile,
    pub settings: SolverSettings,
}

impl FeasibilityOracle for SynthesisOracle {
    fn feasible(&self, h: f64, alpha: f64) -> Result<bool> {
        let sys = self.system.with_delay(h)?;
        match self.problem {
            GainProblem::Controller => synthesis::controller_feasible(&sys, alpha, &self.profile, &self.settings),
            GainProblem::Observer => synthesis::observer_feasible(&sys, alpha, &self.profile, &self.settings),
        }
    }
}

pub const DEFAULT_H_RANGE: (f64, f64) = (1e-3, 10.0);
pub const DEFAULT_TOL: f64 = 1e-4;
const SCAN_POINTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayInterval {
    pub h_min: f64,
    pub h_max: f64,
    /// Largest infeasible delay checked below `h_min` (`None` when `h_min`
    /// is the bottom of the search range).
    pub infeasible_below: Option<f64>,
    /// Smallest infeasible delay checked above `h_max`.
    pub infeasible_above: Option<f64>,
    /// Feasible runs in the coarse scan other than the one reported.
    pub other_runs: usize,
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Bisects between an infeasible and a feasible point; returns the final
/// `(infeasible, feasible)` pair, at most `tol` apart.
fn bisect(mut bad: f64, mut good: f64, tol: f64, feasible: impl Fn(f64) -> Result<bool>) -> Result<(f64, f64)> {
    while (good - bad).abs() > tol {
        let mid = 0.5 * (good + bad);
        if feasible(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok((bad, good))
}

/// Feasible delay interval at decay rate `alpha`: a 64-point scan of
/// `[h_lo, h_hi]` locates the feasible set, then each end is bisected to
/// `tol`. With several separate feasible runs the longest is reported.
pub fn bisect_interval(
    oracle: &dyn FeasibilityOracle,
    alpha: f64,
    h_lo: f64,
    h_hi: f64,
    tol: f64,
) -> Result<Option<DelayInterval>> {
    check_tol(tol)?;
    if !(h_lo > 0.0 && h_hi > h_lo && h_hi.is_finite()) {
        return Err(Error::invalid(format!("bad search range [{h_lo}, {h_hi}]")));
    }
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| h_lo + (h_hi - h_lo) * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let flags = grid
        .par_iter()
        .map(|&h| oracle.feasible(h, alpha))
        .collect::<Result<Vec<bool>>>()?;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < flags.len() {
        if flags[k] {
            let start = k;
            while k + 1 < flags.len() && flags[k + 1] {
                k += 1;
            }
            runs.push((start, k));
        }
        k += 1;
    }
    let Some(&(first, last)) = runs.iter().max_by_key(|(a, b)| (b - a, usize::MAX - a)) else {
        return Ok(None);
    };
    if runs.len() > 1 {
        log::warn!(
            "feasible delays form {} separate runs in the coarse scan; reporting [{}, {}]",
            runs.len(),
            grid[first],
            grid[last]
        );
    }
    let feasible = |h: f64| oracle.feasible(h, alpha);
    let (h_min, infeasible_below) = if first == 0 {
        (grid[0], None)
    } else {
        let (bad, good) = bisect(grid[first - 1], grid[first], tol, feasible)?;
        (good, Some(bad))
    };
    let (h_max, infeasible_above) = if last + 1 == grid.len() {
        (grid[last], None)
    } else {
        let (bad, good) = bisect(grid[last + 1], grid[last], tol, feasible)?;
        (good, Some(bad))
    };
    Ok(Some(DelayInterval {
        h_min,
        h_max,
        infeasible_below,
        infeasible_above,
        other_runs: runs.len() - 1,
    }))
}

/// Largest feasible decay rate in `[0, alpha_hi]` at delay `h`, to `tol`.
/// `None` when even `α = 0` is infeasible.
pub fn max_alpha_for_h(oracle: &dyn FeasibilityOracle, h: f64, alpha_hi: f64, tol: f64) -> Result<Option<f64>> {
    check_tol(tol)?;
    if !(alpha_hi > 0.0 && alpha_hi.is_finite()) {
        return Err(Error::invalid(format!(
            "upper decay rate must be positive, got {alpha_hi}"
        )));
    }
    if !oracle.feasible(h, 0.0)? {
        return Ok(None);
    }
    if oracle.feasible(h, alpha_hi)? {
        log::info!("decay rate saturates the search bound {alpha_hi} at h = {h}");
        return Ok(Some(alpha_hi));
    }
    let (_, good) = bisect(alpha_hi, 0.0, tol, |a| oracle.feasible(h, a))?;
    Ok(Some(good))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    pub alpha: f64,
    /// `Err` carries the oracle's failure message for this point.
    pub outcome: std::result::Result<bool, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub h_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Row-major over `(h, α)`.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn get(&self, ih: usize, ia: usize) -> &SweepPoint {
        &self.points[ih * self.alpha_grid.len() + ia]
    }

    pub fn is_feasible(&self, ih: usize, ia: usize) -> bool {
        matches!(self.get(ih, ia).outcome, Ok(true))
    }

    /// `(h, α*)` with `α*` the largest feasible grid rate, for every `h`
    /// where at least one rate is feasible.
    pub fn frontier(&self) -> Vec<(f64, f64)> {
        self.h_grid
            .iter()
            .enumerate()
            .filter_map(|(ih, &h)| {
                (0..self.alpha_grid.len())
                    .filter(|&ia| self.is_feasible(ih, ia))
                    .map(|ia| self.alpha_grid[ia])
                    .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.max(a))))
                    .map(|a| (h, a))
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.outcome.is_err())
    }

    /// Columns `h,alpha,feasible`; failed points are written as `error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,alpha,feasible\n");
        for p in &self.points {
            let flag = match &p.outcome {
                Ok(true) => "1",
                Ok(false) => "0",
                Err(_) => "error",
            };
            let _ = writeln!(out, "{},{},{}", p.h, p.alpha, flag);
        }
        out
    }

    pub fn frontier_csv(&self) -> String {
        let mut out = String::from("h,alpha_star\n");
        for (h, a) in self.frontier() {
            let _ = writeln!(out, "{h},{a}");
        }
        out
    }
}

/// Evaluates every grid point (in parallel); individual failures are kept
/// in the result instead of aborting the sweep.
pub fn sweep(oracle: &dyn FeasibilityOracle, h_grid: &[f64], alpha_grid: &[f64]) -> Result<SweepResult> {
    if h_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::invalid("sweep grids must be nonempty"));
    }
    let pairs: Vec<(f64, f64)> = h_grid
        .iter()
        .flat_map(|&h| alpha_grid.iter().map(move |&a| (h, a)))
        .collect();
    let points = pairs
        .par_iter()
        .map(|&(h, alpha)| SweepPoint {
            h,
            alpha,
            outcome: oracle.feasible(h, alpha).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepResult {
        h_grid: h_grid.to_vec(),
        alpha_grid: alpha_grid.to_vec(),
        points,
    })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_of_synthetic_oracle() {
        let oracle = |h: f64, _a: f64| -> Result<bool> { Ok(h > 0.3 && h < 2.0) };
        let iv = bisect_interval(&oracle, 0.0, 1e-3, 10.0, 1e-4).unwrap().unwrap();
        assert!((iv.h_min - 0.3).abs() <= 1e-4);
        assert!((iv.h_max - 2.0).abs() <= 1e-4);
        assert!(!oracle(iv.infeasible_below.unwrap(), 0.0).unwrap());
        assert!(!oracle(iv.infeasible_above.unwrap(), 0.0).unwrap());
        assert_eq!(iv.other_runs, 0);
    }

    #[test]
    fn never_feasible_gives_none() {
        let oracle = |_h: f64, _a: f64| -> Result<bool> { Ok(false) };
        assert!(bisect_interval(&oracle, 0.0, 1e-3, 10.0, 1e-4).unwrap().is_none());
        assert!(max_alpha_for_h(&oracle, 1.0, 2.0, 1e-4).unwrap().is_none());
    }

    #[test]
    fn open_lower_end() {
        let oracle = |h: f64, _a: f64| -> Result<bool> { Ok(h < 0.5) };
        let iv = bisect_interval(&oracle, 0.0, 1e-3, 10.0, 1e-4).unwrap().unwrap();
        assert_eq!(iv.h_min, 1e-3);
        assert!(iv.infeasible_below.is_none());
    }

    #[test]
    fn two_runs_report_the_longer() {
        let oracle = |h: f64, _a: f64| -> Result<bool> { Ok((1.0..1.5).contains(&h) || (3.0..6.0).contains(&h)) };
        let iv = bisect_interval(&oracle, 0.0, 1e-3, 10.0, 1e-4).unwrap().unwrap();
        assert!((iv.h_min - 3.0).abs() < 1e-4 && (iv.h_max - 6.0).abs() < 1e-4);
        assert_eq!(iv.other_runs, 1);
    }

    #[test]
    fn alpha_bisection() {
        let oracle = |h: f64, a: f64| -> Result<bool> { Ok(a <= 1.0 / (1.0 + h)) };
        let a = max_alpha_for_h(&oracle, 1.0, 3.0, 1e-5).unwrap().unwrap();
        assert!((a - 0.5).abs() <= 1e-5 && a <= 0.5);
    }

    #[test]
    fn sweep_records_failures_and_frontier() {
        let oracle = |h: f64, a: f64| -> Result<bool> {
            if h == 2.0 {
                Err(Error::Solver("boom".into()))
            } else {
                Ok(a <= h)
            }
        };
        let r = sweep(&oracle, &[0.5, 1.0, 2.0], &[0.0, 0.75, 1.5]).unwrap();
        assert_eq!(r.failures().count(), 3);
        assert_eq!(r.frontier(), vec![(0.5, 0.0), (1.0, 0.75)]);
        assert!(r.to_csv().starts_with("h,alpha,feasible\n0.5,0,1\n"));
        let single = sweep(&oracle, &[1.0], &[0.5]).unwrap();
        assert_eq!(single.points.len(), 1);
        assert!(sweep(&oracle, &[], &[0.5]).is_err());
    }
}
