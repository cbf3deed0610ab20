//! Linear systems with a discrete delay and a distributed delay:
//!
//! ```text
//!     ẋ(t) = A x(t) + A_d x(t−h) + A_D ∫_{t−h}^{t} x(s) ds
//! ```
//!
//! and the controlled form `ẋ = Ax + Bu`, `y = (1/h) C ∫_{t−h}^{t} x(s) ds`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySystem {
    pub a: Mat,
    pub a_d: Mat,
    /// Gain on the distributed term `∫_{t−h}^{t} x(s) ds`.
    pub a_dist: Mat,
    pub h: f64,
}

fn check_delay(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("delay must be positive and finite, got {h}")));
    }
    Ok(())
}

impl DelaySystem {
    pub fn new(a: Mat, a_d: Mat, a_dist: Mat, h: f64) -> Result<Self> {
        check_delay(h)?;
        let n = a.rows();
        for (name, m) in [("A", &a), ("A_d", &a_d), ("A_D", &a_dist)] {
            if m.shape() != (n, n) {
                return Err(Error::dim(
                    "DelaySystem::new",
                    format!("{name} is {:?}, expected {n}x{n}", m.shape()),
                ));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite("DelaySystem::new"));
            }
        }
        if n == 0 {
            return Err(Error::invalid("system has no states"));
        }
        Ok(Self { a, a_d, a_dist, h })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Same matrices, different delay.
    pub fn with_delay(&self, h: f64) -> Result<Self> {
        check_delay(h)?;
        Ok(Self { h, ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.a.clone(), self.a_d.clone(), self.a_dist.clone(), self.h).map(|_| ())
    }

    /// Matrix of the delay-free ODE obtained as `h → 0`: `A + A_d + h·A_D`.
    pub fn undelayed_matrix(&self) -> Mat {
        let mut m = &self.a + &self.a_d;
        m.axpy(self.h, &self.a_dist);
        m
    }
}

/// `ẋ = Ax + Bu` with averaged output `y = (1/h) C ∫_{t−h}^{t} x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlledSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub h: f64,
}

impl ControlledSystem {
    pub fn new(a: Mat, b: Mat, c: Mat, h: f64) -> Result<Self> {
        check_delay(h)?;
        let n = a.rows();
        if n == 0 || !a.is_square() {
            return Err(Error::dim("ControlledSystem::new", format!("A is {:?}", a.shape())));
        }
        if b.rows() != n {
            return Err(Error::dim(
                "ControlledSystem::new",
                format!("B is {:?}, expected {n} rows", b.shape()),
            ));
        }
        if c.cols() != n {
            return Err(Error::dim(
                "ControlledSystem::new",
                format!("C is {:?}, expected {n} columns", c.shape()),
            ));
        }
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::NonFinite("ControlledSystem::new"));
        }
        Ok(Self { a, b, c, h })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn with_delay(&self, h: f64) -> Result<Self> {
        check_delay(h)?;
        Ok(Self { h, ..self.clone() })
    }

    /// Closed loop under `u = K y`: `A_d = 0`, `A_D = (1/h)·B·K·C`.
    pub fn close_loop(&self, k: &Mat) -> Result<DelaySystem> {
        if k.shape() != (self.inputs(), self.outputs()) {
            return Err(Error::dim(
                "close_loop",
                format!("K is {:?}, expected {}x{}", k.shape(), self.inputs(), self.outputs()),
            ));
        }
        let bkc = self.b.try_matmul(k)?.try_matmul(&self.c)?;
        DelaySystem::new(
            self.a.clone(),
            Mat::zeros(self.n(), self.n()),
            bkc.scale(1.0 / self.h),
            self.h,
        )
    }

    /// Observer error dynamics `ε̇ = Aε − (1/h)·L·C ∫ε`.
    pub fn observer_error(&self, l: &Mat) -> Result<DelaySystem> {
        if l.shape() != (self.n(), self.outputs()) {
            return Err(Error::dim(
                "observer_error",
                format!("L is {:?}, expected {}x{}", l.shape(), self.n(), self.outputs()),
            ));
        }
        let lc = l.try_matmul(&self.c)?;
        DelaySystem::new(
            self.a.clone(),
            Mat::zeros(self.n(), self.n()),
            lc.scale(-1.0 / self.h),
            self.h,
        )
    }
}
