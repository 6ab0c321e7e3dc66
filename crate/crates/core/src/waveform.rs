//! Uniformly sampled vector-valued trajectories.
//!
//! Samples are stored column-wise in a `d × N` matrix, so each time sample
//! is one contiguous column. All norms use trapezoidal quadrature.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Relative tolerance used when comparing grid parameters.
const GRID_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    t0: f64,
    t_end: f64,
    data: Matrix,
}

impl Waveform {
    /// Waveform on `[0, t_end]` from a `d × N` sample matrix.
    pub fn new(t_end: f64, data: Matrix) -> Result<Self> {
        Self::with_start(0.0, t_end, data)
    }

    /// Waveform on `[t0, t_end]`; used for windows of a longer horizon.
    pub fn with_start(t0: f64, t_end: f64, data: Matrix) -> Result<Self> {
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "waveform horizon must satisfy t0 < T (got [{t0}, {t_end}])"
            )));
        }
        if data.ncols() < 2 || data.nrows() < 1 {
            return Err(Error::InvalidConfig(format!(
                "waveform needs at least 2 samples of dimension >= 1 (got {}x{})",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { t0, t_end, data })
    }

    pub fn zeros(t_end: f64, n: usize, dim: usize) -> Result<Self> {
        Self::new(t_end, Matrix::zeros(dim, n))
    }

    pub fn constant(t_end: f64, n: usize, value: &Vector) -> Result<Self> {
        let mut data = Matrix::zeros(value.len(), n);
        for mut c in data.column_iter_mut() {
            c.copy_from(value);
        }
        Self::new(t_end, data)
    }

    pub fn from_fn<F>(t_end: f64, n: usize, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector,
    {
        Self::from_fn_on(0.0, t_end, n, dim, f)
    }

    pub fn from_fn_on<F>(t0: f64, t_end: f64, n: usize, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector,
    {
        if n < 2 {
            return Err(Error::InvalidConfig("waveform needs at least 2 samples".into()));
        }
        let h = (t_end - t0) / (n - 1) as f64;
        let mut data = Matrix::zeros(dim, n);
        for i in 0..n {
            let v = f(t0 + h * i as f64);
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "sample function returned length {} (expected {dim})",
                    v.len()
                )));
            }
            data.set_column(i, &v);
        }
        Self::with_start(t0, t_end, data)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t_end
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t0) / (self.len() - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            self.t_end
        } else {
            self.t0 + self.step() * i as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    pub fn sample(&self, i: usize) -> Vector {
        self.data.column(i).into_owned()
    }

    pub fn samples(&self) -> &Matrix {
        &self.data
    }

    pub fn samples_mut(&mut self) -> &mut Matrix {
        &mut self.data
    }

    pub fn into_samples(self) -> Matrix {
        self.data
    }

    pub fn first(&self) -> Vector {
        self.sample(0)
    }

    pub fn last(&self) -> Vector {
        self.sample(self.len() - 1)
    }

    /// Same start, end and sample count (dimension may differ).
    pub fn same_grid(&self, other: &Waveform) -> bool {
        let tol = GRID_EPS * (self.t_end - self.t0).abs().max(1.0);
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= tol
            && (self.t_end - other.t_end).abs() <= tol
    }

    fn check_grid(&self, other: &Waveform) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch(format!(
                "[{}, {}] x {} vs [{}, {}] x {}",
                self.t0,
                self.t_end,
                self.len(),
                other.t0,
                other.t_end,
                other.len()
            )));
        }
        Ok(())
    }

    /// Replaces the samples, keeping the grid.
    pub fn with_samples(&self, data: Matrix) -> Result<Waveform> {
        if data.ncols() != self.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                data.ncols(),
                self.len()
            )));
        }
        Waveform::with_start(self.t0, self.t_end, data)
    }

    /// Trapezoidal weights `h/2, h, …, h, h/2`, scaled by `e^{-2ωt}`.
    fn weights(&self, omega: f64) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        let n = self.len();
        (0..n).map(move |i| {
            let w = if i == 0 || i + 1 == n { 0.5 * h } else { h };
            w * (-2.0 * omega * self.time(i)).exp()
        })
    }

    /// `‖f‖_{2,ω} = (∫ e^{-2ωt} ‖f(t)‖² dt)^{1/2}` by the trapezoidal rule.
    pub fn weighted_l2_norm(&self, omega: f64) -> f64 {
        self.weights(omega)
            .zip(self.data.column_iter())
            .map(|(w, c)| w * c.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.weighted_l2_norm(0.0)
    }

    /// Weighted L² inner product.
    pub fn weighted_inner(&self, other: &Waveform, omega: f64) -> Result<f64> {
        self.check_grid(other)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inner product of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .weights(omega)
            .zip(self.data.column_iter().zip(other.data.column_iter()))
            .map(|(w, (a, b))| w * a.dot(&b))
            .sum())
    }

    /// `max_t ‖f(t)‖₂` over the grid samples.
    pub fn sup_norm(&self) -> f64 {
        self.data
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
    }

    /// Pointwise `a·f + b·g`.
    pub fn combine(a: f64, f: &Waveform, b: f64, g: &Waveform) -> Result<Waveform> {
        f.check_grid(g)?;
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch(format!(
                "combining dimension {} with {}",
                f.dim(),
                g.dim()
            )));
        }
        let data = &f.data * a + &g.data * b;
        f.with_samples(data)
    }

    /// `self - other`.
    pub fn diff(&self, other: &Waveform) -> Result<Waveform> {
        Waveform::combine(1.0, self, -1.0, other)
    }

    /// Pointwise matrix product `M·f(t)`.
    pub fn map_linear(&self, m: &Matrix) -> Result<Waveform> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to waveform of dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim()
            )));
        }
        Waveform::with_start(self.t0, self.t_end, m * &self.data)
    }

    /// Components `start..start+len` of every sample.
    pub fn components(&self, start: usize, len: usize) -> Result<Waveform> {
        if start + len > self.dim() || len == 0 {
            return Err(Error::DimensionMismatch(format!(
                "components {start}..{} of a {}-dimensional waveform",
                start + len,
                self.dim()
            )));
        }
        Waveform::with_start(self.t0, self.t_end, self.data.rows(start, len).into_owned())
    }

    /// Stacks waveforms on a shared grid into one taller waveform.
    pub fn stack(parts: &[Waveform]) -> Result<Waveform> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidConfig("stacking zero waveforms".into()))?;
        let dim: usize = parts.iter().map(|p| p.dim()).sum();
        let mut data = Matrix::zeros(dim, first.len());
        let mut r = 0;
        for p in parts {
            first.check_grid(p)?;
            data.rows_mut(r, p.dim()).copy_from(&p.data);
            r += p.dim();
        }
        first.with_samples(data)
    }

    fn grid_index(&self, t: f64) -> Option<usize> {
        let h = self.step();
        let x = (t - self.t0) / h;
        let i = x.round();
        if (x - i).abs() <= 1e-6 && i >= 0.0 && (i as usize) < self.len() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Exact sub-grid extraction on `[ta, tb]`; both ends must be grid points.
    pub fn restrict(&self, ta: f64, tb: f64) -> Result<Waveform> {
        let (ia, ib) = match (self.grid_index(ta), self.grid_index(tb)) {
            (Some(a), Some(b)) if b > a => (a, b),
            _ => {
                return Err(Error::GridMismatch(format!(
                    "[{ta}, {tb}] is not a sub-grid of [{}, {}] with h = {}",
                    self.t0,
                    self.t_end,
                    self.step()
                )))
            }
        };
        let data = self.data.columns(ia, ib - ia + 1).into_owned();
        Waveform::with_start(self.time(ia), self.time(ib), data)
    }

    /// Piecewise-linear evaluation.
    pub fn eval(&self, t: f64) -> Result<Vector> {
        let span = self.t_end - self.t0;
        if t < self.t0 - GRID_EPS * span || t > self.t_end + GRID_EPS * span {
            return Err(Error::InvalidConfig(format!(
                "t = {t} outside [{}, {}]",
                self.t0, self.t_end
            )));
        }
        let h = self.step();
        let x = ((t - self.t0) / h).clamp(0.0, (self.len() - 1) as f64);
        if (x - x.round()).abs() <= 1e-9 {
            return Ok(self.sample(x.round() as usize));
        }
        let i = (x.floor() as usize).min(self.len() - 2);
        let s = x - i as f64;
        Ok(self.data.column(i) * (1.0 - s) + self.data.column(i + 1) * s)
    }

    /// Resamples onto `n` uniform points over the same horizon.
    pub fn resample(&self, n: usize) -> Result<Waveform> {
        Waveform::from_fn_on(self.t0, self.t_end, n, self.dim(), |t| {
            self.eval(t).expect("grid point inside horizon")
        })
    }

    /// CSV with header `t,c1,...,cd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim()).map(|i| format!("c{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, c) in self.data.column_iter().enumerate() {
            write!(w, "{:.16e}", self.time(i))?;
            for v in c.iter() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(t_end: f64, n: usize, f: impl Fn(f64) -> f64) -> Waveform {
        Waveform::from_fn(t_end, n, 1, |t| Vector::from_element(1, f(t))).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(Waveform::zeros(1.0, 11, 2).unwrap().weighted_l2_norm(0.3), 0.0);
        let one = scalar(1.0, 101, |_| 1.0);
        assert!((one.weighted_l2_norm(0.0) - 1.0).abs() < 1e-14);
        let expected = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        assert!((expected - 0.657520).abs() < 1e-6);
        let fine = scalar(1.0, 2001, |_| 1.0);
        assert!((fine.weighted_l2_norm(1.0) - expected).abs() < 1e-6);
    }

    #[test]
    fn weighted_norm_converges_second_order() {
        let exact = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        let errs: Vec<f64> = [51, 101, 201, 401]
            .iter()
            .map(|&n| (scalar(1.0, n, |_| 1.0).weighted_l2_norm(1.0) - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.05, "order {order}");
        }
    }

    #[test]
    fn sup_norm_examples() {
        assert!((scalar(1.0, 11, |t| t).sup_norm() - 1.0).abs() < 1e-15);
        let c = Waveform::constant(1.0, 5, &Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((c.sup_norm() - 5.0).abs() < 1e-15);
        let tau = 0.01;
        let eps0 = Waveform::from_fn(0.5, 501, 2, |s| {
            Vector::from_element(2, s * (-tau * s).exp())
        })
        .unwrap();
        let expected = 2f64.sqrt() * 0.5 * (-0.005f64).exp();
        assert!((expected - 0.70358).abs() < 1e-5);
        assert!((eps0.sup_norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn combine_restrict_eval() {
        let f = scalar(1.0, 11, |t| t * t);
        let z = Waveform::combine(1.0, &f, -1.0, &f).unwrap();
        assert_eq!(z.sup_norm(), 0.0);

        assert_eq!(f.eval(0.3).unwrap()[0], f.sample(3)[0]);
        let mid = f.eval(0.35).unwrap()[0];
        assert!((mid - 0.5 * (f.sample(3)[0] + f.sample(4)[0])).abs() < 1e-15);

        let r = f.restrict(0.2, 0.6).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r.sample(0), f.sample(2));
        assert!((r.start() - 0.2).abs() < 1e-15);
        assert!(f.restrict(0.25, 0.6).is_err());
        assert!(f.eval(1.5).is_err());
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = scalar(1.0, 11, |t| t);
        let b = scalar(1.0, 12, |t| t);
        assert!(matches!(
            Waveform::combine(1.0, &a, 1.0, &b),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Waveform::new(1.0, Matrix::zeros(1, 1)).is_err());
        assert!(Waveform::new(0.0, Matrix::zeros(1, 3)).is_err());
        let mut m = Matrix::zeros(1, 3);
        m[(0, 1)] = f64::NAN;
        assert!(Waveform::new(1.0, m).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let f = scalar(1.0, 3, |t| t / 3.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,c1"));
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        let v: f64 = row[1].parse().unwrap();
        assert_eq!(v, 0.5 / 3.0);
        assert!(row[1].trim_start_matches('-').len() >= 16);
    }
}
