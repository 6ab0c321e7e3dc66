//! Dense real-matrix kernels shared by every other module.
//!
//! Decompositions (LU, SVD, symmetric eigen) come from `nalgebra`; this
//! module adds the thresholds and structural tests the rest of the crate
//! relies on, plus the Cayley transform `(I - λK)(I + λK)⁻¹`.

use nalgebra::{DMatrix, DMatrixViewMut, DVector, Dyn, SymmetricEigen, LU, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute and relative thresholds for numerical rank and structure tests.
///
/// A quantity `v` measured against a reference magnitude `s` is treated as
/// zero when `|v| <= abs + rel * s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        if !(abs >= 0.0 && rel >= 0.0) || (abs == 0.0 && rel == 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance needs abs, rel >= 0 and not both zero (got {abs}, {rel})"
            )));
        }
        Ok(Tolerance { abs, rel })
    }

    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }
}

/// Structural property tested by [`structure_check`].
#[derive(Clone, Copy, Debug)]
pub enum Structure<'a> {
    /// `A = Aᵀ` and `A ≥ 0`.
    SymmetricPsd,
    /// `Aᵀ = -A`.
    Skew,
    /// `AᵀB = BᵀA ≥ 0` for the given `B`.
    SymPair(&'a Matrix),
}

/// Outcome of a structure test. `diagnostic` names the first violation.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureCheck {
    pub ok: bool,
    pub diagnostic: Option<String>,
}

impl StructureCheck {
    fn pass() -> Self {
        StructureCheck {
            ok: true,
            diagnostic: None,
        }
    }

    fn fail(msg: String) -> Self {
        StructureCheck {
            ok: false,
            diagnostic: Some(msg),
        }
    }
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn require_square(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn first_asymmetry(a: &Matrix, sign: f64, thresh: f64) -> Option<(usize, usize, f64)> {
    let n = a.nrows();
    for i in 0..n {
        for j in i..n {
            let d = a[(i, j)] - sign * a[(j, i)];
            let d = if i == j && sign > 0.0 { 0.0 } else { d };
            if d.abs() > thresh {
                return Some((i, j, d));
            }
        }
    }
    None
}

fn psd_part(a: &Matrix, tol: Tolerance, name: &str) -> StructureCheck {
    let scale = max_abs(a);
    let thresh = tol.threshold(scale);
    if let Some((i, j, d)) = first_asymmetry(a, 1.0, thresh) {
        return StructureCheck::fail(format!(
            "{name} not symmetric: entry ({i},{j}) differs from ({j},{i}) by {d:e}"
        ));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (idx, min) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if min < -thresh {
        return StructureCheck::fail(format!(
            "{name} not positive semi-definite: eigenvalue #{idx} = {min:e}"
        ));
    }
    StructureCheck::pass()
}

/// Tests a structural property up to `tol`.
pub fn structure_check(a: &Matrix, kind: Structure<'_>, tol: Tolerance) -> Result<StructureCheck> {
    match kind {
        Structure::SymmetricPsd => {
            require_square(a, "matrix")?;
            Ok(psd_part(a, tol, "matrix"))
        }
        Structure::Skew => {
            require_square(a, "matrix")?;
            let thresh = tol.threshold(max_abs(a));
            Ok(match first_asymmetry(a, -1.0, thresh) {
                Some((i, j, d)) => StructureCheck::fail(format!(
                    "not skew-symmetric: A[{i},{j}] + A[{j},{i}] = {d:e}"
                )),
                None => StructureCheck::pass(),
            })
        }
        Structure::SymPair(b) => {
            if a.shape() != b.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "pair shapes {:?} and {:?} differ",
                    a.shape(),
                    b.shape()
                )));
            }
            let p = a.transpose() * b;
            Ok(psd_part(&p, tol, "AᵀB"))
        }
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `tol.rel * σ_max + tol.abs`.
pub fn numerical_rank(a: &Matrix, tol: Tolerance) -> usize {
    let s = singular_values(a);
    let Some(&smax) = s.first() else { return 0 };
    let thresh = tol.threshold(smax);
    s.iter().filter(|&&v| v > thresh).count()
}

/// Orthonormal basis of the numerical kernel of `a`, one column per
/// direction. A trivial kernel yields a matrix with zero columns.
pub fn kernel_basis(a: &Matrix, tol: Tolerance) -> Matrix {
    let (m, n) = a.shape();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    if m == 0 {
        return Matrix::identity(n, n);
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let padded = if m < n {
        let mut p = Matrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("SVD requested V");
    let smax = svd.singular_values.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let thresh = tol.threshold(smax);
    let cols: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thresh)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

/// Symmetric PSD square root `S` with `S·S = A`.
///
/// `A` is symmetrized first; eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn sym_sqrt(a: &Matrix, tol: Tolerance) -> Result<Matrix> {
    require_square(a, "matrix")?;
    let sym = (a + a.transpose()) * 0.5;
    let scale = max_abs(&sym);
    let eig = SymmetricEigen::new(sym);
    let thresh = tol.threshold(scale);
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < -thresh {
            return Err(Error::NotPsd { min_eigenvalue: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    let u = &eig.eigenvectors;
    let s = u * Matrix::from_diagonal(&d) * u.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// LU factorization that refuses numerically singular matrices.
#[derive(Clone, Debug)]
pub struct Factorization {
    lu: LU<f64, Dyn, Dyn>,
}

impl Factorization {
    /// Returns `None` when a pivot falls below `1e-13` times the largest.
    pub fn new(a: &Matrix) -> Option<Self> {
        if a.nrows() != a.ncols() {
            return None;
        }
        let lu = LU::new(a.clone());
        let u = lu.u();
        let n = u.nrows();
        if n == 0 {
            return Some(Factorization { lu });
        }
        let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
        let max = diag.iter().copied().fold(0.0f64, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= 1e-13 * max || !min.is_finite() {
            return None;
        }
        Some(Factorization { lu })
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        let mut x = b.clone();
        self.lu.solve_mut(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut Vector) {
        self.lu.solve_mut(b);
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut x = b.clone();
        self.lu.solve_mut(&mut x);
        x
    }

    fn solve_view(&self, b: &mut DMatrixViewMut<'_, f64>) {
        self.lu.solve_mut(b);
    }
}

/// Prepared Cayley transform `v ↦ (I - λK)(I + λK)⁻¹ v` for a fixed `K`
/// and `λ`, evaluated as one solve `(I + λK)w = v` followed by `v - 2λKw`.
#[derive(Clone, Debug)]
pub struct Cayley {
    k: Matrix,
    lambda: f64,
    factor: Factorization,
}

impl Cayley {
    pub fn new(k: &Matrix, lambda: f64) -> Result<Self> {
        require_square(k, "K")?;
        let n = k.nrows();
        let shifted = Matrix::identity(n, n) + k * lambda;
        let factor = Factorization::new(&shifted).ok_or(Error::SingularCayley { lambda })?;
        Ok(Cayley {
            k: k.clone(),
            lambda,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {}x{} K",
                v.len(),
                self.dim(),
                self.dim()
            )));
        }
        let w = self.factor.solve(v);
        Ok(v - &self.k * w * (2.0 * self.lambda))
    }

    /// `(I + λK)⁻¹ v`, the resolvent part of the transform.
    pub fn resolvent(&self, v: &Vector) -> Vector {
        self.factor.solve(v)
    }

    /// Applies the transform to every column of `cols` in place.
    pub fn apply_columns(&self, cols: &mut Matrix, exec: Execution) {
        let n = self.dim();
        assert_eq!(cols.nrows(), n, "column length must match K");
        let ncols = cols.ncols();
        if ncols == 0 || n == 0 {
            return;
        }
        let per_chunk = 256usize;
        let two_lambda = 2.0 * self.lambda;
        exec::for_each_chunk_mut(exec, cols.as_mut_slice(), n * per_chunk, |_, chunk| {
            let c = chunk.len() / n;
            let mut view = DMatrixViewMut::from_slice(chunk, n, c);
            let mut w = view.clone_owned();
            {
                let mut wv = w.as_view_mut();
                self.factor.solve_view(&mut wv);
            }
            let kw = &self.k * w;
            view -= kw * two_lambda;
        });
    }
}

/// `(I - λK)(I + λK)⁻¹ v`.
pub fn cayley_apply(k: &Matrix, lambda: f64, v: &Vector) -> Result<Vector> {
    Cayley::new(k, lambda)?.apply(v)
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation; all parts must share a row count.
pub fn hstack(parts: &[&Matrix]) -> Matrix {
    let rows = parts.first().map(|p| p.nrows()).unwrap_or(0);
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), p.shape()).copy_from(*p);
        c += p.ncols();
    }
    out
}

/// Vertical concatenation; all parts must share a column count.
pub fn vstack(parts: &[&Matrix]) -> Matrix {
    let cols = parts.first().map(|p| p.ncols()).unwrap_or(0);
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), p.shape()).copy_from(*p);
        r += p.nrows();
    }
    out
}

pub fn all_finite(a: &Matrix) -> bool {
    a.iter().all(|v| v.is_finite())
}
