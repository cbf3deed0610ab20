//! Affine symmetric-matrix inequalities over named decision variables.
//!
//! An [`AffineExpr`] is `C + Σₖ xₖ·Mₖ` where the `xₖ` are the scalar
//! unknowns of an [`LmiProblem`]. Matrix variables are expanded into their
//! scalar entries when declared (symmetric matrices by their upper
//! triangle), so every expression stays a plain linear map of one flat
//! unknown vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Mat, SymMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Symmetric(usize),
    Rectangular(usize, usize),
    Scalar,
}

impl VarKind {
    pub fn scalar_count(&self) -> usize {
        match *self {
            VarKind::Symmetric(d) => d * (d + 1) / 2,
            VarKind::Rectangular(r, c) => r * c,
            VarKind::Scalar => 1,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Symmetric(d) => (d, d),
            VarKind::Rectangular(r, c) => (r, c),
            VarKind::Scalar => (1, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignConstraint {
    Free,
    PositiveDefinite,
    PositiveScalar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVar {
    pub name: String,
    pub kind: VarKind,
    pub sign: SignConstraint,
    /// Index of the first scalar unknown belonging to this variable.
    pub offset: usize,
}

impl DecisionVar {
    /// Reassembles the matrix value of this variable from the flat unknowns.
    pub fn value(&self, x: &[f64]) -> Mat {
        let (r, c) = self.kind.shape();
        let mut m = Mat::zeros(r, c);
        match self.kind {
            VarKind::Symmetric(d) => {
                let mut k = self.offset;
                for i in 0..d {
                    for j in i..d {
                        m[(i, j)] = x[k];
                        m[(j, i)] = x[k];
                        k += 1;
                    }
                }
            }
            VarKind::Rectangular(rows, cols) => {
                for i in 0..rows {
                    for j in 0..cols {
                        m[(i, j)] = x[self.offset + i * cols + j];
                    }
                }
            }
            VarKind::Scalar => m[(0, 0)] = x[self.offset],
        }
        m
    }

    /// Writes a matrix value back into the flat unknowns (symmetric inputs
    /// are read from their upper triangle).
    pub fn store(&self, value: &Mat, x: &mut [f64]) {
        match self.kind {
            VarKind::Symmetric(d) => {
                let mut k = self.offset;
                for i in 0..d {
                    for j in i..d {
                        x[k] = value[(i, j)];
                        k += 1;
                    }
                }
            }
            VarKind::Rectangular(rows, cols) => {
                for i in 0..rows {
                    for j in 0..cols {
                        x[self.offset + i * cols + j] = value[(i, j)];
                    }
                }
            }
            VarKind::Scalar => x[self.offset] = value[(0, 0)],
        }
    }
}

/// `constant + Σₖ x[k]·terms[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl AffineExpr {
    pub fn constant(m: Mat) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn constant_term(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &Mat)> {
        self.terms.iter().map(|(&k, m)| (k, m))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    fn map_all(&self, rows: usize, cols: usize, f: impl Fn(&Mat) -> Mat) -> Self {
        Self {
            rows,
            cols,
            constant: f(&self.constant),
            terms: self
                .terms
                .iter()
                .map(|(&k, m)| (k, f(m)))
                .filter(|(_, m)| m.max_abs() != 0.0)
                .collect(),
        }
    }

    pub fn try_add(&self, other: &AffineExpr) -> Result<AffineExpr> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "AffineExpr::add",
                format!("{:?} + {:?}", self.shape(), other.shape()),
            ));
        }
        let mut out = self.clone();
        out.constant.axpy(1.0, &other.constant);
        for (&k, m) in &other.terms {
            out.terms
                .entry(k)
                .and_modify(|e| e.axpy(1.0, m))
                .or_insert_with(|| m.clone());
        }
        Ok(out)
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        self.try_add(other).expect("AffineExpr::add shape")
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn add_const(&self, m: &Mat) -> AffineExpr {
        self.add(&AffineExpr::constant(m.clone()))
    }

    pub fn scale(&self, s: f64) -> AffineExpr {
        self.map_all(self.rows, self.cols, |m| m.scale(s))
    }

    pub fn transpose(&self) -> AffineExpr {
        self.map_all(self.cols, self.rows, Mat::transpose)
    }

    /// `L · self`.
    pub fn lmul(&self, l: &Mat) -> Result<AffineExpr> {
        if l.cols() != self.rows {
            return Err(Error::dim(
                "AffineExpr::lmul",
                format!("{:?} * {:?}", l.shape(), self.shape()),
            ));
        }
        Ok(self.map_all(l.rows(), self.cols, |m| l * m))
    }

    /// `self · R`.
    pub fn rmul(&self, r: &Mat) -> Result<AffineExpr> {
        if self.cols != r.rows() {
            return Err(Error::dim(
                "AffineExpr::rmul",
                format!("{:?} * {:?}", self.shape(), r.shape()),
            ));
        }
        Ok(self.map_all(self.rows, r.cols(), |m| m * r))
    }

    /// `self + selfᵀ`.
    pub fn he(&self) -> Result<AffineExpr> {
        if self.rows != self.cols {
            return Err(Error::dim("he", format!("{:?} is not square", self.shape())));
        }
        Ok(self.map_all(self.rows, self.cols, |m| m + &m.transpose()))
    }

    /// `Tᵀ · self · T`.
    pub fn congruence(&self, t: &Mat) -> Result<AffineExpr> {
        if self.rows != self.cols || t.rows() != self.cols {
            return Err(Error::dim(
                "congruence",
                format!("Tᵀ·E·T with E {:?}, T {:?}", self.shape(), t.shape()),
            ));
        }
        let tt = t.transpose();
        Ok(self.map_all(t.cols(), t.cols(), |m| &tt * &(m * t)))
    }

    /// Block assembly with the same conformality rules as [`Mat::block`].
    pub fn block<R: AsRef<[AffineExpr]>>(grid: &[R]) -> Result<AffineExpr> {
        let const_grid: Vec<Vec<Mat>> = grid
            .iter()
            .map(|r| r.as_ref().iter().map(|e| e.constant.clone()).collect())
            .collect();
        let constant = Mat::block(&const_grid)?;
        let mut keys: Vec<usize> = grid
            .iter()
            .flat_map(|r| r.as_ref().iter().flat_map(|e| e.terms.keys().copied()))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let mut terms = BTreeMap::new();
        for k in keys {
            let g: Vec<Vec<Mat>> = grid
                .iter()
                .map(|r| {
                    r.as_ref()
                        .iter()
                        .map(|e| e.terms.get(&k).cloned().unwrap_or_else(|| Mat::zeros(e.rows, e.cols)))
                        .collect()
                })
                .collect();
            terms.insert(k, Mat::block(&g)?);
        }
        Ok(AffineExpr {
            rows: constant.rows(),
            cols: constant.cols(),
            constant,
            terms,
        })
    }

    pub fn block_diag(blocks: &[AffineExpr]) -> Result<AffineExpr> {
        let grid: Vec<Vec<AffineExpr>> = (0..blocks.len())
            .map(|i| {
                (0..blocks.len())
                    .map(|j| {
                        if i == j {
                            blocks[i].clone()
                        } else {
                            AffineExpr::zeros(blocks[i].rows, blocks[j].cols)
                        }
                    })
                    .collect()
            })
            .collect();
        AffineExpr::block(&grid)
    }

    pub fn evaluate(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (&k, m) in &self.terms {
            out.axpy(x[k], m);
        }
        out
    }

    /// Symmetric part `(E + Eᵀ)/2` of a square expression.
    pub fn symmetrized(&self) -> Result<AffineExpr> {
        Ok(self.he()?.scale(0.5))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    NegativeDefinite,
    PositiveDefinite,
}

#[derive(Clone, Debug)]
pub struct LmiConstraint {
    pub name: String,
    pub expr: AffineExpr,
    pub sense: Sense,
    /// Strict inequalities are accepted only with a margin after solving.
    pub strict: bool,
}

impl LmiConstraint {
    pub fn constant_term(&self) -> SymMat {
        SymMat::symmetrize(self.expr.constant_term())
    }

    /// Value of the expression oriented so that "satisfied" means `⪯ 0`.
    pub fn oriented_value(&self, x: &[f64]) -> SymMat {
        let v = self.expr.evaluate(x);
        let v = match self.sense {
            Sense::NegativeDefinite => v,
            Sense::PositiveDefinite => v.scale(-1.0),
        };
        SymMat::symmetrize(&v)
    }
}

/// A set of LMIs over declared decision variables, with an optional linear
/// objective to maximize.
#[derive(Clone, Debug, Default)]
pub struct LmiProblem {
    variables: Vec<DecisionVar>,
    constraints: Vec<LmiConstraint>,
    objective: Option<AffineExpr>,
    box_bound: Option<f64>,
    n_scalars: usize,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable and returns its matrix expression.
    pub fn add_var(&mut self, name: &str, kind: VarKind, sign: SignConstraint) -> Result<AffineExpr> {
        if self.variables.iter().any(|v| v.name == name) {
            return Err(Error::DuplicateVariable(name.to_string()));
        }
        match (kind, sign) {
            (VarKind::Symmetric(_), SignConstraint::PositiveScalar)
            | (VarKind::Rectangular(..), SignConstraint::PositiveScalar)
            | (VarKind::Rectangular(..), SignConstraint::PositiveDefinite)
            | (VarKind::Scalar, SignConstraint::PositiveDefinite) => {
                return Err(Error::invalid(format!(
                    "sign constraint {sign:?} does not apply to {kind:?}"
                )))
            }
            _ => {}
        }
        let var = DecisionVar {
            name: name.to_string(),
            kind,
            sign,
            offset: self.n_scalars,
        };
        self.n_scalars += kind.scalar_count();
        let expr = Self::expr_of(&var);
        self.variables.push(var);
        Ok(expr)
    }

    fn expr_of(var: &DecisionVar) -> AffineExpr {
        let (r, c) = var.kind.shape();
        let mut terms = BTreeMap::new();
        match var.kind {
            VarKind::Symmetric(d) => {
                let mut k = var.offset;
                for i in 0..d {
                    for j in i..d {
                        let mut m = Mat::zeros(d, d);
                        m[(i, j)] = 1.0;
                        m[(j, i)] = 1.0;
                        terms.insert(k, m);
                        k += 1;
                    }
                }
            }
            VarKind::Rectangular(rows, cols) => {
                for i in 0..rows {
                    for j in 0..cols {
                        let mut m = Mat::zeros(rows, cols);
                        m[(i, j)] = 1.0;
                        terms.insert(var.offset + i * cols + j, m);
                    }
                }
            }
            VarKind::Scalar => {
                terms.insert(var.offset, Mat::identity(1));
            }
        }
        AffineExpr {
            rows: r,
            cols: c,
            constant: Mat::zeros(r, c),
            terms,
        }
    }

    pub fn var(&self, name: &str) -> Result<&DecisionVar> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn var_expr(&self, name: &str) -> Result<AffineExpr> {
        Ok(Self::expr_of(self.var(name)?))
    }

    pub fn variables(&self) -> &[DecisionVar] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LmiConstraint] {
        &self.constraints
    }

    pub fn scalar_count(&self) -> usize {
        self.n_scalars
    }

    /// Adds `expr ≺ 0` (or `≻ 0`). The expression is symmetrized.
    pub fn add_lmi(&mut self, name: &str, expr: &AffineExpr, sense: Sense) -> Result<()> {
        self.push_constraint(name, expr, sense, true)
    }

    /// Adds the non-strict version `expr ⪯ 0` (or `⪰ 0`).
    pub fn add_lmi_nonstrict(&mut self, name: &str, expr: &AffineExpr, sense: Sense) -> Result<()> {
        self.push_constraint(name, expr, sense, false)
    }

    fn push_constraint(&mut self, name: &str, expr: &AffineExpr, sense: Sense, strict: bool) -> Result<()> {
        let expr = expr.symmetrized()?;
        self.constraints.push(LmiConstraint {
            name: name.to_string(),
            expr,
            sense,
            strict,
        });
        Ok(())
    }

    /// Sets a scalar (1×1) expression to maximize.
    pub fn maximize(&mut self, objective: &AffineExpr) -> Result<()> {
        if objective.shape() != (1, 1) {
            return Err(Error::dim("objective", "must be 1x1"));
        }
        self.objective = Some(objective.clone());
        Ok(())
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    pub fn objective(&self) -> Option<&AffineExpr> {
        self.objective.as_ref()
    }

    /// Bounds every scalar unknown to `[-bound, bound]`. Homogeneous LMIs are
    /// scale invariant, so this only fixes the scale of the solution.
    pub fn set_box_bound(&mut self, bound: f64) {
        self.box_bound = Some(bound);
    }

    pub fn box_bound(&self) -> Option<f64> {
        self.box_bound
    }

    /// Implicit constraints coming from variable sign requirements.
    fn sign_constraints(&self) -> Vec<LmiConstraint> {
        self.variables
            .iter()
            .filter(|v| v.sign != SignConstraint::Free)
            .map(|v| LmiConstraint {
                name: format!("{} > 0", v.name),
                expr: Self::expr_of(v),
                sense: Sense::PositiveDefinite,
                strict: true,
            })
            .collect()
    }

    /// All constraints including the implicit sign constraints.
    pub fn all_constraints(&self) -> Vec<LmiConstraint> {
        let mut all = self.constraints.clone();
        all.extend(self.sign_constraints());
        all
    }

    pub fn compile(&self) -> Result<StandardForm> {
        let all = self.all_constraints();
        let mut blocks = Vec::with_capacity(all.len());
        for c in &all {
            if let Some(k) = c.expr.max_index() {
                if k >= self.n_scalars {
                    return Err(Error::UnknownVariable(format!(
                        "scalar #{k} referenced by `{}`",
                        c.name
                    )));
                }
            }
            let sign = match c.sense {
                Sense::NegativeDefinite => 1.0,
                Sense::PositiveDefinite => -1.0,
            };
            let scale = 1.0 + c.expr.constant_term().max_abs();
            let f = sign / scale;
            blocks.push(Block {
                name: c.name.clone(),
                g0: SymMat::symmetrize(&c.expr.constant_term().scale(f)).into_mat(),
                coeffs: c.expr.terms().map(|(k, m)| (k, m.scale(f))).collect(),
                strict: c.strict,
                scale,
            });
        }
        let mut objective = vec![0.0; self.n_scalars];
        let mut objective_offset = 0.0;
        let has_objective = if let Some(obj) = &self.objective {
            if let Some(k) = obj.max_index() {
                if k >= self.n_scalars {
                    return Err(Error::UnknownVariable(format!("scalar #{k} in objective")));
                }
            }
            // maximize → minimize the negation
            for (k, m) in obj.terms() {
                objective[k] = -m[(0, 0)];
            }
            objective_offset = -obj.constant_term()[(0, 0)];
            true
        } else {
            false
        };
        Ok(StandardForm {
            n_vars: self.n_scalars,
            objective,
            objective_offset,
            has_objective,
            blocks,
            box_bound: self.box_bound,
            variables: self.variables.clone(),
        })
    }
}

/// One constraint block `G₀ + Σⱼ xⱼ Gⱼ ⪯ 0`, already divided by
/// `1 + ‖constant‖_max` of the source constraint.
#[derive(Clone, Debug)]
pub struct Block {
    pub name: String,
    pub g0: Mat,
    pub coeffs: Vec<(usize, Mat)>,
    pub strict: bool,
    pub scale: f64,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.g0.rows()
    }

    pub fn evaluate(&self, x: &[f64]) -> Mat {
        let mut out = self.g0.clone();
        for (k, m) in &self.coeffs {
            out.axpy(x[*k], m);
        }
        out
    }
}

/// `minimize cᵀx subject to G₀ᵢ + Σⱼ xⱼ Gⱼᵢ ⪯ 0` for every block `i`.
#[derive(Clone, Debug)]
pub struct StandardForm {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub has_objective: bool,
    pub blocks: Vec<Block>,
    pub box_bound: Option<f64>,
    pub variables: Vec<DecisionVar>,
}

impl StandardForm {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn var(&self, name: &str) -> Result<&DecisionVar> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Replaces the objective with `maximize name` for a scalar variable.
    pub fn with_maximized_scalar(&self, name: &str) -> Result<StandardForm> {
        let v = self.var(name)?;
        if v.kind != VarKind::Scalar {
            return Err(Error::invalid(format!("`{name}` is not a scalar variable")));
        }
        let mut out = self.clone();
        out.objective = vec![0.0; self.n_vars];
        out.objective[v.offset] = -1.0;
        out.objective_offset = 0.0;
        out.has_objective = true;
        Ok(out)
    }

    pub fn without_objective(&self) -> StandardForm {
        let mut out = self.clone();
        out.objective = vec![0.0; self.n_vars];
        out.objective_offset = 0.0;
        out.has_objective = false;
        out
    }
}

/// Named view of a solved unknown vector.
#[derive(Clone, Debug)]
pub struct Assignment<'a> {
    variables: &'a [DecisionVar],
    x: &'a [f64],
}

impl<'a> Assignment<'a> {
    pub fn new(variables: &'a [DecisionVar], x: &'a [f64]) -> Self {
        Self { variables, x }
    }

    pub fn get(&self, name: &str) -> Result<Mat> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .map(|v| v.value(self.x))
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        Ok(self.get(name)?[(0, 0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn he_of_constant() {
        let e = AffineExpr::constant(Mat::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap());
        let h = e.he().unwrap().evaluate(&[]);
        assert_eq!(h, Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
        assert_eq!(AffineExpr::zeros(3, 3).he().unwrap().evaluate(&[]), Mat::zeros(3, 3));
    }

    #[test]
    fn he_rejects_rectangular() {
        assert!(AffineExpr::zeros(2, 3).he().is_err());
    }

    #[test]
    fn congruence_identity() {
        let e = AffineExpr::constant(Mat::identity(3));
        assert_eq!(e.congruence(&Mat::identity(3)).unwrap().evaluate(&[]), Mat::identity(3));
        assert!(e.congruence(&Mat::identity(2)).is_err());
    }

    #[test]
    fn symmetric_var_roundtrip() {
        let mut p = LmiProblem::new();
        let e = p.add_var("P", VarKind::Symmetric(3), SignConstraint::Free).unwrap();
        assert_eq!(p.scalar_count(), 6);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = e.evaluate(&x);
        assert_eq!(
            m,
            Mat::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]]).unwrap()
        );
        assert_eq!(p.var("P").unwrap().value(&x), m);
        let mut back = [0.0; 6];
        p.var("P").unwrap().store(&m, &mut back);
        assert_eq!(back, x);
    }

    #[test]
    fn duplicate_and_unknown_names() {
        let mut p = LmiProblem::new();
        p.add_var("x", VarKind::Scalar, SignConstraint::Free).unwrap();
        assert_eq!(
            p.add_var("x", VarKind::Scalar, SignConstraint::Free),
            Err(Error::DuplicateVariable("x".into()))
        );
        assert!(matches!(p.var_expr("y"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn compile_scalar_problem() {
        // x·I₁ − 1 ⪯ 0, maximize x
        let mut p = LmiProblem::new();
        let x = p.add_var("x", VarKind::Scalar, SignConstraint::Free).unwrap();
        p.add_lmi_nonstrict(
            "c",
            &x.add_const(&Mat::scaled_identity(1, -1.0)),
            Sense::NegativeDefinite,
        )
        .unwrap();
        p.maximize(&x).unwrap();
        let f = p.compile().unwrap();
        assert_eq!(f.n_vars, 1);
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.objective, vec![-1.0]);
        // normalized by 1 + |−1| = 2
        assert_eq!(f.blocks[0].g0[(0, 0)], -0.5);
        assert_eq!(f.blocks[0].coeffs[0].1[(0, 0)], 0.5);
    }

    #[test]
    fn compile_rejects_foreign_variable() {
        let mut a = LmiProblem::new();
        let mut b = LmiProblem::new();
        b.add_var("u", VarKind::Scalar, SignConstraint::Free).unwrap();
        let w = b.add_var("w", VarKind::Scalar, SignConstraint::Free).unwrap();
        a.add_lmi("bad", &w, Sense::NegativeDefinite).unwrap();
        assert!(matches!(a.compile(), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn sign_constraints_become_blocks() {
        let mut p = LmiProblem::new();
        p.add_var("S", VarKind::Symmetric(2), SignConstraint::PositiveDefinite)
            .unwrap();
        p.add_var("b", VarKind::Scalar, SignConstraint::PositiveScalar).unwrap();
        let f = p.compile().unwrap();
        assert_eq!(f.blocks.len(), 2);
        assert!(f.blocks.iter().all(|b| b.strict));
        // −S ⪯ 0 at S = I
        let v = f.blocks[0].evaluate(&[1.0, 0.0, 1.0, 1.0]);
        assert_eq!(v, Mat::scaled_identity(2, -1.0));
    }

    #[test]
    fn bad_sign_kind_rejected() {
        let mut p = LmiProblem::new();
        assert!(p
            .add_var("Y", VarKind::Rectangular(2, 3), SignConstraint::PositiveDefinite)
            .is_err());
    }
}
