//! Dense real matrices and the small set of factorizations the rest of the
//! crate needs.
//!
//! Everything here is sized for control problems: state dimensions of a
//! handful and LMI blocks of a few dozen rows. Storage is row-major `f64`.

mod general_eig;
mod svd;
mod sym_eig;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use general_eig::eigenvalues_general;
pub use svd::{null_space_basis, singular_values, Svd};
pub use sym_eig::SymEig;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting NaN/Inf.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Mat::from_vec",
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Mat::from_vec"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::dim("Mat::from_rows", "ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(nrows, ncols, data)
    }

    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`, shapes must agree.
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn try_matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::dim("matmul", format!("{:?} x {:?}", self.shape(), rhs.shape())));
        }
        Ok(self.matmul_unchecked(rhs))
    }

    fn matmul_unchecked(&self, rhs: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Mat) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Mat {
        let mut out = Mat::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, m: &Mat) {
        for i in 0..m.rows {
            for j in 0..m.cols {
                self[(r0 + i, c0 + j)] = m[(i, j)];
            }
        }
    }

    /// `M + Mᵀ`.
    pub fn he(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::dim("he", format!("{:?} is not square", self.shape())));
        }
        Ok(self + &self.transpose())
    }

    /// `(M + Mᵀ)/2`, assuming square.
    pub fn symmetric_part(&self) -> Mat {
        (self + &self.transpose()).scale(0.5)
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::dim("cholesky", "non-square"));
        }
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Singular("cholesky"));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Solves `A x = b` by LU with partial pivoting. `b` may have several columns.
    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let lu = Lu::new(self)?;
        lu.solve(b)
    }

    pub fn inverse(&self) -> Result<Mat> {
        self.solve(&Mat::identity(self.rows))
    }

    pub fn determinant(&self) -> Result<f64> {
        match Lu::new(self) {
            Ok(lu) => Ok(lu.determinant()),
            Err(Error::Singular(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    /// Assembles a block matrix. Every block in a row must share the row
    /// count, every block in a column must share the column count.
    pub fn block<R: AsRef<[Mat]>>(grid: &[R]) -> Result<Mat> {
        if grid.is_empty() {
            return Ok(Mat::zeros(0, 0));
        }
        let ncols_blocks = grid[0].as_ref().len();
        let mut row_heights = Vec::with_capacity(grid.len());
        for (bi, brow) in grid.iter().enumerate() {
            let brow = brow.as_ref();
            if brow.len() != ncols_blocks {
                return Err(Error::dim("block", format!("block row {bi} has {} blocks", brow.len())));
            }
            let h = brow.first().map_or(0, Mat::rows);
            if let Some(b) = brow.iter().find(|b| b.rows() != h) {
                return Err(Error::dim(
                    "block",
                    format!("block row {bi}: height {} vs {h}", b.rows()),
                ));
            }
            row_heights.push(h);
        }
        let mut col_widths = Vec::with_capacity(ncols_blocks);
        for bj in 0..ncols_blocks {
            let w = grid[0].as_ref()[bj].cols();
            for (bi, brow) in grid.iter().enumerate() {
                if brow.as_ref()[bj].cols() != w {
                    return Err(Error::dim(
                        "block",
                        format!("block ({bi},{bj}): width {} vs {w}", brow.as_ref()[bj].cols()),
                    ));
                }
            }
            col_widths.push(w);
        }
        let total_r: usize = row_heights.iter().sum();
        let total_c: usize = col_widths.iter().sum();
        let mut out = Mat::zeros(total_r, total_c);
        let mut r0 = 0;
        for (bi, brow) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in brow.as_ref().iter().enumerate() {
                out.set_submatrix(r0, c0, b);
                c0 += col_widths[bj];
            }
            r0 += row_heights[bi];
        }
        Ok(out)
    }

    /// Block-diagonal matrix from square or rectangular blocks.
    pub fn block_diag(blocks: &[Mat]) -> Mat {
        let r: usize = blocks.iter().map(Mat::rows).sum();
        let c: usize = blocks.iter().map(Mat::cols).sum();
        let mut out = Mat::zeros(r, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_submatrix(r0, c0, b);
            r0 += b.rows();
            c0 += b.cols();
        }
        out
    }

    /// All eigenvalues of a general square matrix.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        eigenvalues_general(self)
    }

    /// Largest real part over the spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re)))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>12.6e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<'a> Add<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "matrix add shape");
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl<'a> Sub<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub shape");
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl<'a> Mul<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols,
            rhs.rows,
            "matmul shape {:?} x {:?}",
            self.shape(),
            rhs.shape()
        );
        self.matmul_unchecked(rhs)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Mat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn new(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim("lu", "non-square"));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= 1e-300 || pmax <= f64::EPSILON * scale * 1e-3 {
                return Err(Error::Singular("lu"));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(Error::dim("solve", format!("rhs has {} rows, need {n}", b.rows())));
        }
        let mut x = Mat::zeros(n, b.cols());
        for c in 0..b.cols() {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= self.lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    y[i] -= self.lu[(i, k)] * y[k];
                }
                y[i] /= self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }

    fn determinant(&self) -> f64 {
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }
}

/// Solves `L y = b` then `Lᵀ x = y` for a lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Triangular factor of a Householder QR: returns `L = Rᵀ` (n×n, lower)
/// with `MᵀM = L Lᵀ`, for an m×n matrix with `m ≥ n`.
///
/// Forming `MᵀM` explicitly squares the condition number; this does not.
pub fn qr_gram_factor(m: &Mat) -> Result<Mat> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::dim(
            "qr_gram_factor",
            format!("{rows}x{cols} has fewer rows than columns"),
        ));
    }
    let mut a = m.clone();
    for k in 0..cols {
        let norm = (k..rows).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i - k] * a[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                a[(i, j)] -= f * v[i - k];
            }
        }
    }
    let mut l = Mat::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            l[(j, i)] = a[(i, j)];
        }
    }
    Ok(l)
}

/// Symmetric matrix, stored exactly symmetric.
#[derive(Clone, PartialEq, Debug)]
pub struct SymMat(Mat);

impl SymMat {
    /// Accepts `m` if `‖M − Mᵀ‖_max ≤ 1e−12·(1 + ‖M‖_max)` and stores `(M + Mᵀ)/2`.
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("SymMat::new", format!("{:?} is not square", m.shape())));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("SymMat::new"));
        }
        let asym = m.asymmetry();
        if asym > 1e-12 * (1.0 + m.max_abs()) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self(m.symmetric_part()))
    }

    /// Symmetrizes without checking. Used where symmetry holds by construction.
    pub fn symmetrize(m: &Mat) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        Self(m.symmetric_part())
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn eig(&self) -> Result<SymEig> {
        sym_eig::jacobi_eig(&self.0)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values.last().copied().unwrap_or(f64::NEG_INFINITY))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eig()?.values.first().copied().unwrap_or(f64::INFINITY))
    }

    /// `Tᵀ M T`.
    pub fn congruence(&self, t: &Mat) -> Result<SymMat> {
        let inner = self.0.try_matmul(t)?;
        Ok(SymMat::symmetrize(&(&t.transpose() * &inner)))
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Mat::deserialize(d)?;
        SymMat::new(m).map_err(serde::de::Error::custom)
    }
}

/// Symmetric eigen-decomposition of a plain matrix known to be symmetric.
pub fn sym_eig(m: &SymMat) -> Result<SymEig> {
    m.eig()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_identity_from_blocks() {
        let i2 = Mat::identity(2);
        let z2 = Mat::zeros(2, 2);
        let m = Mat::block(&[vec![i2.clone(), z2.clone()], vec![z2, i2]]).unwrap();
        assert_eq!(m, Mat::identity(4));
    }

    #[test]
    fn block_single() {
        let five = Mat::from_rows(&[[5.0]]).unwrap();
        assert_eq!(Mat::block(&[vec![five.clone()]]).unwrap(), five);
    }

    #[test]
    fn block_rejects_nonconformal() {
        let a = Mat::zeros(2, 2);
        let b = Mat::zeros(3, 2);
        assert!(matches!(Mat::block(&[vec![a, b]]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn wirtinger_f2_layout() {
        let n = 2;
        let i = Mat::identity(n);
        let z = Mat::zeros(n, n);
        let f2 = Mat::block(&[
            vec![i.clone(), i.scale(-1.0), z.clone()],
            vec![i.clone(), i.clone(), i.scale(-2.0)],
        ])
        .unwrap();
        assert_eq!(f2.shape(), (4, 6));
        let expect = Mat::from_rows(&[
            [1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0, -2.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, -2.0],
        ])
        .unwrap();
        assert_eq!(f2, expect);
    }

    #[test]
    fn rejects_nan() {
        assert_eq!(
            Mat::from_vec(1, 1, vec![f64::NAN]),
            Err(Error::NonFinite("Mat::from_vec"))
        );
    }

    #[test]
    fn symmat_tolerance() {
        let ok = Mat::from_rows(&[[1.0, 2.0], [2.0 + 1e-13, 1.0]]).unwrap();
        let s = SymMat::new(ok).unwrap();
        assert_eq!(s.as_mat().asymmetry(), 0.0);
        let bad = Mat::from_rows(&[[1.0, 2.0], [2.1, 1.0]]).unwrap();
        assert!(matches!(SymMat::new(bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn lu_solve_and_det() {
        let a = Mat::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]).unwrap();
        let det = a.determinant().unwrap();
        assert!((det - (-5.0)).abs() < 1e-12, "{det}");
        let inv = a.inverse().unwrap();
        let prod = &a * &inv;
        assert!((&prod - &Mat::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = Mat::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let l = a.cholesky().unwrap();
        assert!((&(&l * &l.transpose()) - &a).max_abs() < 1e-14);
        let x = cholesky_solve(&l, &[2.0, 1.0]);
        let r = a.mul_vec(&x);
        assert!((r[0] - 2.0).abs() < 1e-14 && (r[1] - 1.0).abs() < 1e-14);
        assert!(Mat::from_diag(&[1.0, -1.0]).cholesky().is_err());
    }
}
