use super::Mat;
use crate::error::{Error, Result};

/// Right-sided SVD data from one-sided Jacobi: `A V = U Σ` with `V`
/// orthogonal. Singular values are not sorted; `values[j]` belongs to column `j` of `v`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub values: Vec<f64>,
    pub v: Mat,
}

/// One-sided (Hestenes) Jacobi. Works for any shape; the columns of `A V`
/// become mutually orthogonal.
pub fn svd_jacobi(a: &Mat) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd"));
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Mat::identity(n);
    let mut converged = n <= 1;
    // Columns below this squared norm are numerically zero and never rotated.
    let negligible = f64::EPSILON * f64::EPSILON * a.frobenius().powi(2);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= 4.0 * f64::EPSILON * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged("svd"));
    }
    let values = (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<f64>().sqrt())
        .collect();
    Ok(Svd { values, v })
}

/// Singular values in descending order (padded with zeros when rows < cols).
pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    let mut s = svd_jacobi(a)?.values;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Orthonormal basis of `ker(M)` as the columns of the returned matrix.
/// A trivial kernel gives an `n × 0` matrix.
pub fn null_space_basis(m: &Mat) -> Result<Mat> {
    let n = m.cols();
    let svd = svd_jacobi(m)?;
    let smax = svd.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = (m.rows().max(n) as f64) * f64::EPSILON * smax.max(f64::MIN_POSITIVE) * 4.0;
    let kept: Vec<usize> = (0..n).filter(|&j| svd.values[j] <= tol).collect();
    let mut out = Mat::zeros(n, kept.len());
    for (k, &j) in kept.iter().enumerate() {
        for i in 0..n {
            out[(i, k)] = svd.v[(i, j)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_ok(m: &Mat, basis: &Mat) {
        let r = m * basis;
        assert!(r.max_abs() <= 1e-10 * (1.0 + m.max_abs()), "{r:?}");
        let g = &basis.transpose() * basis;
        assert!((&g - &Mat::identity(basis.cols())).max_abs() < 1e-12);
    }

    #[test]
    fn identity_has_trivial_kernel() {
        let b = null_space_basis(&Mat::identity(2)).unwrap();
        assert_eq!(b.shape(), (2, 0));
    }

    #[test]
    fn row_of_ones() {
        let m = Mat::from_rows(&[[1.0, 1.0]]).unwrap();
        let b = null_space_basis(&m).unwrap();
        assert_eq!(b.shape(), (2, 1));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b[(0, 0)].abs() - s).abs() < 1e-15);
        assert!((b[(0, 0)] + b[(1, 0)]).abs() < 1e-15);
        residual_ok(&m, &b);
    }

    #[test]
    fn rank_deficient() {
        let m = Mat::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]).unwrap();
        let b = null_space_basis(&m).unwrap();
        assert_eq!(b.cols(), 2);
        residual_ok(&m, &b);
    }

    #[test]
    fn singular_values_known() {
        let m = Mat::from_rows(&[[3.0, 0.0], [0.0, -4.0], [0.0, 0.0]]).unwrap();
        let s = singular_values(&m).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-15 && (s[1] - 3.0).abs() < 1e-15);
    }
}
