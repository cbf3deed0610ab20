//! Initial functions on `[−h, 0]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A differentiable initial function `φ: [−h, 0] → ℝⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistorySpec", into = "HistorySpec")]
pub enum HistoryFunction {
    /// `φ(θ) = Σ_k c_k θᵏ`; `coeffs[k]` is the vector `c_k`.
    Polynomial { coeffs: Vec<Vec<f64>> },
    /// Natural cubic spline through `(times[i], values[i])`.
    Sampled {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
}

/// Serialized form; the spline moments are rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum HistorySpec {
    Polynomial { coeffs: Vec<Vec<f64>> },
    Sampled { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl TryFrom<HistorySpec> for HistoryFunction {
    type Error = Error;

    fn try_from(spec: HistorySpec) -> Result<Self> {
        match spec {
            HistorySpec::Polynomial { coeffs } => HistoryFunction::polynomial(coeffs),
            HistorySpec::Sampled { times, values } => HistoryFunction::sampled(times, values),
        }
    }
}

impl From<HistoryFunction> for HistorySpec {
    fn from(f: HistoryFunction) -> Self {
        match f {
            HistoryFunction::Polynomial { coeffs } => HistorySpec::Polynomial { coeffs },
            HistoryFunction::Sampled { times, values, .. } => HistorySpec::Sampled { times, values },
        }
    }
}

impl HistoryFunction {
    pub fn constant(x0: &[f64]) -> Self {
        HistoryFunction::Polynomial {
            coeffs: vec![x0.to_vec()],
        }
    }

    pub fn polynomial(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let n = coeffs.first().map(Vec::len).unwrap_or(0);
        if n == 0 {
            return Err(Error::invalid(
                "polynomial history needs at least one coefficient vector",
            ));
        }
        if coeffs.iter().any(|c| c.len() != n) {
            return Err(Error::dim(
                "HistoryFunction::polynomial",
                "coefficient vectors differ in length",
            ));
        }
        if coeffs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HistoryFunction::polynomial"));
        }
        Ok(HistoryFunction::Polynomial { coeffs })
    }

    /// Spline through samples. `times` must be strictly increasing.
    pub fn sampled(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::invalid("sampled history needs at least two (time, value) pairs"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        let n = values[0].len();
        if n == 0 || values.iter().any(|v| v.len() != n) {
            return Err(Error::dim(
                "HistoryFunction::sampled",
                "sample vectors differ in length",
            ));
        }
        if times.iter().chain(values.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HistoryFunction::sampled"));
        }
        let second = spline_second_derivatives(&times, &values);
        Ok(HistoryFunction::Sampled { times, values, second })
    }

    pub fn dim(&self) -> usize {
        match self {
            HistoryFunction::Polynomial { coeffs } => coeffs[0].len(),
            HistoryFunction::Sampled { values, .. } => values[0].len(),
        }
    }

    /// Checks that the function is defined on all of `[−h, 0]`.
    pub fn check_domain(&self, h: f64) -> Result<()> {
        if let HistoryFunction::Sampled { times, .. } = self {
            let tol = 1e-12 * (1.0 + h);
            if times[0] > -h + tol || *times.last().unwrap() < -tol {
                return Err(Error::invalid(format!(
                    "sampled history covers [{}, {}], need [{}, 0]",
                    times[0],
                    times.last().unwrap(),
                    -h
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, theta: f64) -> Vec<f64> {
        match self {
            HistoryFunction::Polynomial { coeffs } => {
                let mut out = vec![0.0; coeffs[0].len()];
                for c in coeffs.iter().rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * theta + ci;
                    }
                }
                out
            }
            HistoryFunction::Sampled { times, values, second } => {
                let (i, a, b, w) = spline_segment(times, theta);
                (0..values[0].len())
                    .map(|c| {
                        let (y0, y1) = (values[i][c], values[i + 1][c]);
                        let (m0, m1) = (second[i][c], second[i + 1][c]);
                        a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * w * w / 6.0
                    })
                    .collect()
            }
        }
    }

    pub fn derivative(&self, theta: f64) -> Vec<f64> {
        match self {
            HistoryFunction::Polynomial { coeffs } => {
                let mut out = vec![0.0; coeffs[0].len()];
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * theta + k as f64 * ci;
                    }
                }
                out
            }
            HistoryFunction::Sampled { times, values, second } => {
                let (i, a, b, w) = spline_segment(times, theta);
                (0..values[0].len())
                    .map(|c| {
                        let (y0, y1) = (values[i][c], values[i + 1][c]);
                        let (m0, m1) = (second[i][c], second[i + 1][c]);
                        (y1 - y0) / w + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * w / 6.0
                    })
                    .collect()
            }
        }
    }
}

/// Segment index and the linear weights `a = (t₁−θ)/w`, `b = 1−a`.
fn spline_segment(times: &[f64], theta: f64) -> (usize, f64, f64, f64) {
    let last = times.len() - 2;
    let i = match times.partition_point(|&t| t <= theta) {
        0 => 0,
        k => (k - 1).min(last),
    };
    let w = times[i + 1] - times[i];
    let a = (times[i + 1] - theta) / w;
    (i, a, 1.0 - a, w)
}

/// Second derivatives at the knots of a natural cubic spline, per component.
fn spline_second_derivatives(times: &[f64], values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = times.len();
    let n = values[0].len();
    let mut out = vec![vec![0.0; n]; m];
    if m < 3 {
        return out;
    }
    // Thomas algorithm on the interior knots.
    for c in 0..n {
        let k = m - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut upper = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            let h0 = times[i] - times[i - 1];
            let h1 = times[i + 1] - times[i];
            diag[j] = (h0 + h1) / 3.0;
            upper[j] = h1 / 6.0;
            rhs[j] = (values[i + 1][c] - values[i][c]) / h1 - (values[i][c] - values[i - 1][c]) / h0;
        }
        for j in 1..k {
            let lower = (times[j + 1] - times[j]) / 6.0;
            let f = lower / diag[j - 1];
            diag[j] -= f * upper[j - 1];
            rhs[j] -= f * rhs[j - 1];
        }
        let mut sol = vec![0.0; k];
        for j in (0..k).rev() {
            let next = if j + 1 < k { upper[j] * sol[j + 1] } else { 0.0 };
            sol[j] = (rhs[j] - next) / diag[j];
        }
        for j in 0..k {
            out[j + 1][c] = sol[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_value_and_derivative() {
        // φ(θ) = (1 + 2θ + 3θ², −θ³)
        let f =
            HistoryFunction::polynomial(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let t = -0.7;
        let v = f.eval(t);
        assert!((v[0] - (1.0 + 2.0 * t + 3.0 * t * t)).abs() < 1e-15);
        assert!((v[1] + t * t * t).abs() < 1e-15);
        let d = f.derivative(t);
        assert!((d[0] - (2.0 + 6.0 * t)).abs() < 1e-15);
        assert!((d[1] + 3.0 * t * t).abs() < 1e-15);
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let times: Vec<f64> = (0..=200).map(|i| -2.0 + 0.01 * i as f64).collect();
        let values = times.iter().map(|t| vec![t.sin()]).collect();
        let f = HistoryFunction::sampled(times, values).unwrap();
        for &t in &[-1.93, -1.0, -0.4551, -0.05] {
            assert!((f.eval(t)[0] - f64::sin(t)).abs() < 1e-6);
            assert!((f.derivative(t)[0] - f64::cos(t)).abs() < 1e-4);
        }
        assert!(f.check_domain(2.0).is_ok());
        assert!(f.check_domain(2.5).is_err());
    }

    #[test]
    fn spline_through_two_points_is_linear() {
        let f = HistoryFunction::sampled(vec![-1.0, 0.0], vec![vec![0.0], vec![2.0]]).unwrap();
        assert!((f.eval(-0.25)[0] - 1.5).abs() < 1e-15);
        assert!((f.derivative(-0.9)[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn serde_rebuilds_spline() {
        let times: Vec<f64> = (0..=10).map(|i| -1.0 + 0.1 * i as f64).collect();
        let values = times.iter().map(|t| vec![t * t * t]).collect();
        let f = HistoryFunction::sampled(times, values).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let g: HistoryFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(f, g);
        let p: HistoryFunction = serde_json::from_str(r#"{"kind":"polynomial","coeffs":[[1,2]]}"#).unwrap();
        assert_eq!(p.eval(-0.5), vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(HistoryFunction::sampled(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
        assert!(HistoryFunction::polynomial(vec![]).is_err());
        assert!(HistoryFunction::polynomial(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
