use super::Mat;
use crate::error::{Error, Result};

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEig {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.values.len();
        let mut vl = self.vectors.clone();
        for j in 0..n {
            for i in 0..n {
                vl[(i, j)] *= self.values[j];
            }
        }
        &vl * &self.vectors.transpose()
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi with threshold. Accurate to a few ulps of `‖M‖` for the
/// sizes used here (dim ≤ a few hundred).
pub(crate) fn jacobi_eig(m: &Mat) -> Result<SymEig> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::dim("sym_eig", "non-square"));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("sym_eig"));
    }
    let mut a = m.clone();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return Ok(SymEig {
            values: (0..n).map(|i| a[(i, i)]).collect(),
            vectors: v,
        });
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(SymEig {
            values: vec![0.0; n],
            vectors: v,
        });
    }

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // skip rotations that cannot change the diagonal in floating point
                if apq.abs() < 1e-3 * f64::EPSILON * app.abs().min(aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].abs())
            .fold(0.0, f64::max);
        if off > 1e-12 * scale {
            return Err(Error::NotConverged("sym_eig"));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (newj, &oldj) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, newj)] = v[(i, oldj)];
        }
    }
    Ok(SymEig { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMat;

    fn check_pairs(m: &Mat, e: &SymEig) {
        let n = m.rows();
        let norm = m.frobenius().max(1.0);
        for j in 0..n {
            let v = e.vectors.col(j);
            let mv = m.mul_vec(&v);
            let res: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - e.values[j] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-10 * norm, "residual {res}");
        }
        let vtv = &e.vectors.transpose() * &e.vectors;
        assert!((&vtv - &Mat::identity(n)).max_abs() < 1e-10);
    }

    #[test]
    fn diagonal() {
        let m = Mat::from_diag(&[3.0, 1.0, 2.0]);
        let e = SymMat::new(m.clone()).unwrap().eig().unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        check_pairs(&m, &e);
    }

    #[test]
    fn identity() {
        let e = SymMat::identity(5).eig().unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn swap_matrix() {
        // λ² − 1 = 0
        let m = Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let e = SymMat::new(m.clone()).unwrap().eig().unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
        check_pairs(&m, &e);
    }

    #[test]
    fn zero_and_empty() {
        let e = SymMat::new(Mat::zeros(3, 3)).unwrap().eig().unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
        let e = SymMat::new(Mat::zeros(0, 0)).unwrap().eig().unwrap();
        assert!(e.values.is_empty());
    }
}
