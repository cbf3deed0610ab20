//! Fixture systems shared by the benchmarks.

use delaycert::{ControlledSystem, DelaySystem, Mat};

/// Distributed-delay example: stable for `h` roughly in `(0.2, 2.04)`.
pub fn system1(h: f64) -> DelaySystem {
    DelaySystem::new(
        Mat::from_rows(&[[0.2, 0.0], [0.2, 0.1]]).unwrap(),
        Mat::zeros(2, 2),
        Mat::from_rows(&[[-1.0, 0.0], [-1.0, -1.0]]).unwrap(),
        h,
    )
    .unwrap()
}

/// Discrete-delay example.
pub fn system2(h: f64) -> DelaySystem {
    DelaySystem::new(
        Mat::from_rows(&[[-3.0, -2.0], [1.0, 0.0]]).unwrap(),
        Mat::from_rows(&[[-0.5, 0.1], [0.3, 0.0]]).unwrap(),
        Mat::zeros(2, 2),
        h,
    )
    .unwrap()
}

/// Plant with an averaged measurement.
pub fn controlled(h: f64) -> ControlledSystem {
    ControlledSystem::new(
        Mat::from_rows(&[[0.2, 0.0], [0.2, 0.1]]).unwrap(),
        Mat::from_rows(&[[-1.0, 0.0], [-1.0, -1.0]]).unwrap(),
        Mat::identity(2),
        h,
    )
    .unwrap()
}
