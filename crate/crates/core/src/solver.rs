//! One-step implicit integrators for `d/dt(Ex) = Ax + f(t)` with constant
//! `E`, `A`.
//!
//! The step matrix is factorized once per [`Integrator`] and reused for
//! every step and every subsequent solve with the same matrices.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kernel_basis, spectral_norm, Factorization, Matrix, Tolerance, Vector};
use crate::phdae::{pencil_regular, PHDae};
use crate::waveform::Waveform;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    ImplicitEuler,
    #[default]
    Trapezoidal,
}

impl SchemeKind {
    pub fn order(self) -> u32 {
        match self {
            SchemeKind::ImplicitEuler => 1,
            SchemeKind::Trapezoidal => 2,
        }
    }
}

/// Uniform grid on `[0, t_end]` with `n` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t_end: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t_end: f64, n: usize) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() || n < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs T > 0 and N >= 2 (got T = {t_end}, N = {n})"
            )));
        }
        Ok(Grid { t_end, n })
    }

    pub fn step(&self) -> f64 {
        self.t_end / (self.n - 1) as f64
    }

    /// Grid with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Grid {
        Grid {
            t_end: self.t_end,
            n: (self.n - 1) * factor.max(1) + 1,
        }
    }

    pub fn matches(&self, w: &Waveform) -> bool {
        w.len() == self.n
            && w.start() == 0.0
            && (w.end() - self.t_end).abs() <= 1e-12 * self.t_end.max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverScheme {
    pub kind: SchemeKind,
    pub grid: Grid,
}

impl SolverScheme {
    pub fn new(kind: SchemeKind, t_end: f64, n: usize) -> Result<Self> {
        Ok(SolverScheme {
            kind,
            grid: Grid::new(t_end, n)?,
        })
    }

    /// Trapezoidal scheme with `h <= min(1/(10‖A‖), T/200)`.
    pub fn default_for(a: &Matrix, t_end: f64) -> Result<Self> {
        let a_norm = spectral_norm(a);
        let mut h = t_end / 200.0;
        if a_norm > 0.0 {
            h = h.min(1.0 / (10.0 * a_norm));
        }
        let n = (t_end / h).ceil() as usize + 1;
        SolverScheme::new(SchemeKind::Trapezoidal, t_end, n)
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }
}

/// Projection of an initial value onto the algebraic constraints at `t = 0`.
///
/// With `Z = ker E` and `W = ker Eᵀ`, the corrected value is `x₀ + Zδ` where
/// `δ` solves `WᵀAZ δ = -Wᵀ(Ax₀ + f₀)` in the least-squares sense, so
/// `Ex(0) = Ex₀` is kept exactly.
#[derive(Clone, Debug)]
struct Initializer {
    z: Matrix,
    wt: Matrix,
    wt_a: Matrix,
    pinv: Matrix,
}

impl Initializer {
    fn new(e: &Matrix, a: &Matrix, tol: Tolerance) -> Option<Self> {
        let z = kernel_basis(e, tol);
        if z.ncols() == 0 {
            return None;
        }
        let w = kernel_basis(&e.transpose(), tol);
        let wt = w.transpose();
        let wt_a = &wt * a;
        let m = &wt_a * &z;
        let svd = SVD::new(m, true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
        let eps = tol.threshold(smax);
        let pinv = svd.pseudo_inverse(eps).unwrap_or_else(|_| Matrix::zeros(z.ncols(), wt.nrows()));
        Some(Initializer { z, wt, wt_a, pinv })
    }

    fn project(&self, x0: &Vector, f0: &Vector) -> Vector {
        let r = &self.wt_a * x0 + &self.wt * f0;
        let delta = &self.pinv * r;
        x0 - &self.z * delta
    }
}

/// Prepared solver for one `(E, A, scheme)` triple.
#[derive(Clone, Debug)]
pub struct Integrator {
    e: Matrix,
    rhs: Matrix,
    step: Factorization,
    kind: SchemeKind,
    grid: Grid,
    init: Option<Initializer>,
}

impl Integrator {
    pub fn new(e: &Matrix, a: &Matrix, scheme: SolverScheme) -> Result<Self> {
        let n = e.nrows();
        if e.ncols() != n || a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "E is {}x{}, A is {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        let h = scheme.step();
        let theta = match scheme.kind {
            SchemeKind::ImplicitEuler => 1.0,
            SchemeKind::Trapezoidal => 0.5,
        };
        let step_matrix = e - a * (theta * h);
        let step = match Factorization::new(&step_matrix) {
            Some(f) => f,
            None if !pencil_regular(e, a, 5) => return Err(Error::IrregularPencil),
            None => return Err(Error::SingularStepMatrix { h }),
        };
        let rhs = match scheme.kind {
            SchemeKind::ImplicitEuler => e.clone(),
            SchemeKind::Trapezoidal => e + a * (0.5 * h),
        };
        Ok(Integrator {
            e: e.clone(),
            rhs,
            step,
            kind: scheme.kind,
            grid: scheme.grid,
            init: Initializer::new(e, a, Tolerance::default()),
        })
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Consistent initial value and the size of the correction applied.
    pub fn initial_value(&self, x0: &Vector, f0: &Vector) -> (Vector, f64) {
        match &self.init {
            None => (x0.clone(), 0.0),
            Some(init) => {
                let x = init.project(x0, f0);
                let jump = (&x - x0).norm();
                (x, jump)
            }
        }
    }

    /// Integrates over the whole grid. Returns the trajectory and the size
    /// of the algebraic initial-value correction.
    pub fn solve_with_jump(&self, f: &Waveform, x0: &Vector) -> Result<(Waveform, f64)> {
        let n = self.dim();
        if f.dim() != n || x0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "forcing has dimension {}, x0 length {}, system {n}",
                f.dim(),
                x0.len()
            )));
        }
        if !self.grid.matches(f) {
            return Err(Error::GridMismatch(format!(
                "forcing on {} samples over [{}, {}], scheme grid {} samples over [0, {}]",
                f.len(),
                f.start(),
                f.end(),
                self.grid.n,
                self.grid.t_end
            )));
        }
        let h = self.grid.step();
        let fs = f.samples();
        let mut out = Matrix::zeros(n, self.grid.n);
        let (x_init, jump) = self.initial_value(x0, &fs.column(0).into_owned());
        out.set_column(0, &x_init);
        let mut b = Vector::zeros(n);
        for k in 1..self.grid.n {
            b.gemv(1.0, &self.rhs, &out.column(k - 1), 0.0);
            match self.kind {
                SchemeKind::ImplicitEuler => b.axpy(h, &fs.column(k), 1.0),
                SchemeKind::Trapezoidal => {
                    b.axpy(0.5 * h, &fs.column(k - 1), 1.0);
                    b.axpy(0.5 * h, &fs.column(k), 1.0);
                }
            }
            self.step.solve_in_place(&mut b);
            out.set_column(k, &b);
        }
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularStepMatrix { h });
        }
        Ok((Waveform::new(self.grid.t_end, out)?, jump))
    }

    pub fn solve(&self, f: &Waveform, x0: &Vector) -> Result<Waveform> {
        self.solve_with_jump(f, x0).map(|(x, _)| x)
    }
}

/// Solves `d/dt(Ex) = Ax + f(t)` on the scheme grid.
pub fn solve_linear_dae(
    e: &Matrix,
    a: &Matrix,
    f: &Waveform,
    x0: &Vector,
    scheme: SolverScheme,
) -> Result<Waveform> {
    let (x, jump) = Integrator::new(e, a, scheme)?.solve_with_jump(f, x0)?;
    if jump > 1e-12 * x0.norm().max(1.0) {
        log::warn!("inconsistent algebraic initial values projected (correction {jump:.3e})");
    }
    Ok(x)
}

/// Monolithic solve of the full system on a grid `refine` times finer than
/// `scheme`, sampled back onto the scheme grid.
pub fn reference_solution(
    sys: &PHDae,
    u: &Waveform,
    refine: usize,
    scheme: SolverScheme,
) -> Result<Waveform> {
    if u.dim() != sys.m() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} components, model expects {}",
            u.dim(),
            sys.m()
        )));
    }
    if !scheme.grid.matches(u) {
        return Err(Error::GridMismatch(
            "input must be sampled on the experiment grid".into(),
        ));
    }
    let refine = refine.max(1);
    let fine = SolverScheme {
        kind: scheme.kind,
        grid: scheme.grid.refined(refine),
    };
    let u_fine = if refine == 1 { u.clone() } else { u.resample(fine.grid.n)? };
    let f = u_fine.map_linear(sys.b())?;
    let x = solve_linear_dae(sys.e(), &sys.a_matrix(), &f, sys.x0(), fine)?;
    if refine == 1 {
        return Ok(x);
    }
    let coarse = Matrix::from_fn(sys.n(), scheme.grid.n, |i, k| x.samples()[(i, k * refine)]);
    Waveform::new(scheme.grid.t_end, coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_decay(kind: SchemeKind, n: usize) -> f64 {
        let e = dmatrix![1.0];
        let a = dmatrix![-1.0];
        let scheme = SolverScheme::new(kind, 1.0, n).unwrap();
        let f = Waveform::zeros(1.0, n, 1).unwrap();
        let x = solve_linear_dae(&e, &a, &f, &Vector::from_element(1, 1.0), scheme).unwrap();
        (x.last()[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn scalar_decay_orders() {
        for (kind, lo, hi) in [
            (SchemeKind::ImplicitEuler, 0.9, 1.1),
            (SchemeKind::Trapezoidal, 1.9, 2.1),
        ] {
            let e1 = scalar_decay(kind, 101);
            let e2 = scalar_decay(kind, 201);
            let order = (e1 / e2).log2();
            assert!(order > lo && order < hi, "{kind:?} order {order}");
        }
        assert!(scalar_decay(SchemeKind::Trapezoidal, 1001) < 1e-6);
    }

    #[test]
    fn pure_algebraic_row() {
        let scheme = SolverScheme::new(SchemeKind::Trapezoidal, 1.0, 11).unwrap();
        let f = Waveform::constant(1.0, 11, &Vector::from_element(1, 3.0)).unwrap();
        let x = solve_linear_dae(&dmatrix![0.0], &dmatrix![-1.0], &f, &Vector::zeros(1), scheme)
            .unwrap();
        for v in x.samples().iter() {
            assert!((v - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_pencil_is_reported() {
        let scheme = SolverScheme::new(SchemeKind::ImplicitEuler, 1.0, 11).unwrap();
        let f = Waveform::zeros(1.0, 11, 1).unwrap();
        let err = solve_linear_dae(&dmatrix![0.0], &dmatrix![0.0], &f, &Vector::zeros(1), scheme);
        assert!(matches!(err, Err(Error::IrregularPencil)));
    }

    #[test]
    fn singular_step_matrix_names_h() {
        // E - hA = 1 - h·10 vanishes for h = 0.1.
        let scheme = SolverScheme::new(SchemeKind::ImplicitEuler, 1.0, 11).unwrap();
        let f = Waveform::zeros(1.0, 11, 1).unwrap();
        let err = solve_linear_dae(&dmatrix![1.0], &dmatrix![10.0], &f, &Vector::zeros(1), scheme);
        match err {
            Err(Error::SingularStepMatrix { h }) => assert!((h - 0.1).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_grid_rule() {
        let a = dmatrix![-0.01, 15.0; -15.0, -0.01];
        let s = SolverScheme::default_for(&a, 0.5).unwrap();
        assert_eq!(s.kind, SchemeKind::Trapezoidal);
        assert!(s.step() <= 0.5 / 200.0 + 1e-15);
        assert!(s.step() <= 1.0 / (10.0 * spectral_norm(&a)) + 1e-15);
        let s = SolverScheme::default_for(&Matrix::zeros(2, 2), 2.0).unwrap();
        assert_eq!(s.grid.n, 201);
    }

    #[test]
    fn semi_explicit_initialization() {
        // x1' = -x1 + x2, 0 = x1 - x2: the algebraic x2 must start at x1(0).
        let e = dmatrix![1.0, 0.0; 0.0, 0.0];
        let a = dmatrix![-1.0, 1.0; 1.0, -1.0];
        let scheme = SolverScheme::new(SchemeKind::Trapezoidal, 1.0, 51).unwrap();
        let f = Waveform::zeros(1.0, 51, 2).unwrap();
        let x = solve_linear_dae(&e, &a, &f, &Vector::from_vec(vec![1.0, 5.0]), scheme).unwrap();
        for k in 0..51 {
            let s = x.sample(k);
            assert!((s[0] - 1.0).abs() < 1e-12);
            assert!((s[0] - s[1]).abs() < 1e-12);
        }
    }
}
