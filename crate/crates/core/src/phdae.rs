//! Linear port-Hamiltonian DAEs `d/dt(Ex) = (J - R)Qx + Bu`, `y = BᵀQx`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    hstack, kernel_basis, max_abs, numerical_rank, structure_check, vstack, Factorization, Matrix,
    Structure, Tolerance, Vector,
};
use crate::waveform::Waveform;

/// A PH-DAE together with its block partition and initial value.
#[derive(Clone, Debug, PartialEq)]
pub struct PHDae {
    e: Matrix,
    j: Matrix,
    r: Matrix,
    q: Matrix,
    b: Matrix,
    x0: Vector,
    partition: Vec<usize>,
}

/// `J = J_d + J_o` with `J_d` the block-diagonal part.
#[derive(Clone, Debug, PartialEq)]
pub struct JSplit {
    pub j_d: Matrix,
    pub j_o: Matrix,
}

impl PHDae {
    /// Checks dimensions only; structural properties are left to [`validate`].
    pub fn new(
        e: Matrix,
        j: Matrix,
        r: Matrix,
        q: Matrix,
        b: Matrix,
        x0: Vector,
        partition: Vec<usize>,
    ) -> Result<Self> {
        let n = e.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty system".into()));
        }
        for (name, m) in [("E", &e), ("J", &j), ("R", &r), ("Q", &q)] {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n} rows and at least one column",
                b.nrows(),
                b.ncols()
            )));
        }
        if x0.len() != n {
            return Err(Error::DimensionMismatch(format!("x0 has length {}, expected {n}", x0.len())));
        }
        if partition.contains(&0) || partition.iter().sum::<usize>() != n {
            return Err(Error::DimensionMismatch(format!(
                "partition {partition:?} does not split n = {n} into nonempty blocks"
            )));
        }
        let finite = [&e, &j, &r, &q, &b].iter().all(|m| m.iter().all(|v| v.is_finite()))
            && x0.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("model contains non-finite entries".into()));
        }
        Ok(PHDae { e, j, r, q, b, x0, partition })
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn e(&self) -> &Matrix {
        &self.e
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn with_x0(mut self, x0: Vector) -> Result<Self> {
        if x0.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "x0 has length {}, expected {}",
                x0.len(),
                self.n()
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    /// `(offset, size)` of every block.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.partition
            .iter()
            .map(|&s| {
                let b = (off, s);
                off += s;
                b
            })
            .collect()
    }

    /// Diagonal block `i` of an `n×n` matrix.
    pub fn diag_block(&self, m: &Matrix, i: usize) -> Matrix {
        let (o, s) = self.blocks()[i];
        m.view((o, o), (s, s)).into_owned()
    }

    /// `(J - R)Q`.
    pub fn a_matrix(&self) -> Matrix {
        (&self.j - &self.r) * &self.q
    }

    pub fn split_j(&self) -> JSplit {
        let mut j_d = Matrix::zeros(self.n(), self.n());
        for (o, s) in self.blocks() {
            j_d.view_mut((o, o), (s, s)).copy_from(&self.j.view((o, o), (s, s)));
        }
        let mut j_o = self.j.clone();
        for (o, s) in self.blocks() {
            j_o.view_mut((o, o), (s, s)).fill(0.0);
        }
        JSplit { j_d, j_o }
    }

    /// Block-wise inverse of `Q`.
    pub fn q_inverse(&self) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.n(), self.n());
        for (i, (o, s)) in self.blocks().into_iter().enumerate() {
            let qi = self.diag_block(&self.q, i);
            let f = Factorization::new(&qi).ok_or_else(|| Error::InvalidParameter {
                name: "Q".into(),
                reason: format!("block {i} is singular"),
            })?;
            out.view_mut((o, o), (s, s)).copy_from(&f.solve_matrix(&Matrix::identity(s, s)));
        }
        Ok(out)
    }

    /// `EQ⁻¹`, symmetric positive semi-definite for a valid model.
    pub fn e_q_inverse(&self) -> Result<Matrix> {
        let m = &self.e * self.q_inverse()?;
        Ok((&m + m.transpose()) * 0.5)
    }

    fn check_states(&self, x: &Waveform) -> Result<()> {
        if x.dim() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has {} components, model has {}",
                x.dim(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `½ xᵀQᵀEx` at every sample.
    pub fn hamiltonian(&self, x: &Waveform) -> Result<Waveform> {
        self.check_states(x)?;
        let qte = self.q.transpose() * &self.e;
        let data = Matrix::from_iterator(
            1,
            x.len(),
            x.samples().column_iter().map(|c| 0.5 * c.dot(&(&qte * c))),
        );
        x.with_samples(data)
    }

    /// `y = BᵀQx`.
    pub fn output_map(&self, x: &Waveform) -> Result<Waveform> {
        self.check_states(x)?;
        x.map_linear(&(self.b.transpose() * &self.q))
    }

    /// `max_t [H(t) - H(0) - ∫₀ᵗ uᵀy]`, trapezoidal quadrature for the supply.
    ///
    /// A valid solution keeps this at or below zero up to quadrature error.
    pub fn dissipation_residual(&self, x: &Waveform, u: &Waveform) -> Result<f64> {
        Ok(self.energy_balance(x, u)?.residual)
    }

    /// Residual of the dissipation inequality plus the scale
    /// `Σ |Δuᵀ Δy| / h ≈ ∫ |u̇ᵀẏ| dt` that bounds its trapezoidal error.
    pub fn energy_balance(&self, x: &Waveform, u: &Waveform) -> Result<EnergyBalance> {
        if u.dim() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} components, model has {}",
                u.dim(),
                self.m()
            )));
        }
        if !x.same_grid(u) {
            return Err(Error::GridMismatch("state and input grids differ".into()));
        }
        let h_w = self.hamiltonian(x)?;
        let y = self.output_map(x)?;
        let hs = h_w.samples();
        let us = u.samples();
        let ys = y.samples();
        let h = x.step();
        let mut supply = 0.0;
        let mut residual = 0.0f64;
        let mut scale = 0.0;
        let mut h_max = hs[(0, 0)].abs();
        for k in 1..x.len() {
            let p0 = us.column(k - 1).dot(&ys.column(k - 1));
            let p1 = us.column(k).dot(&ys.column(k));
            supply += 0.5 * h * (p0 + p1);
            let du = us.column(k) - us.column(k - 1);
            let dy = ys.column(k) - ys.column(k - 1);
            scale += du.dot(&dy).abs() / h;
            residual = residual.max(hs[(0, k)] - hs[(0, 0)] - supply);
            h_max = h_max.max(hs[(0, k)].abs());
        }
        Ok(EnergyBalance {
            residual,
            supply_scale: scale,
            energy_scale: h_max,
        })
    }
}

/// Output of [`PHDae::energy_balance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBalance {
    pub residual: f64,
    pub supply_scale: f64,
    pub energy_scale: f64,
}

/// One named structural test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub structure: Vec<Check>,
    pub structure_ok: bool,
    pub rank_erj: usize,
    pub rank_er: usize,
    pub pencil_regular: bool,
    pub consistency_ok: Option<bool>,
    pub consistency_residual: Option<f64>,
    #[serde(serialize_with = "crate::io::serialize_opt_rows")]
    pub z: Option<Matrix>,
    #[serde(serialize_with = "crate::io::serialize_opt_rows")]
    pub z1: Option<Matrix>,
    /// Input components entering `Z₁ᵀZᵀQᵀBu`, which must be H¹ in time.
    pub smooth_input_components: Vec<usize>,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn rank_erj_ok(&self) -> bool {
        self.rank_erj == self.n
    }

    /// `rk [E R] = n`, needed for a contractive Lions-Mercier iteration.
    pub fn rank_er_ok(&self) -> bool {
        self.rank_er == self.n
    }

    pub fn ok(&self) -> bool {
        self.structure_ok
            && self.rank_erj_ok()
            && self.rank_er_ok()
            && self.pencil_regular
            && self.consistency_ok.unwrap_or(false)
    }
}

fn off_block_max(sys: &PHDae, m: &Matrix) -> (f64, Option<(usize, usize)>) {
    let blocks = sys.blocks();
    let block_of = |i: usize| blocks.iter().position(|&(o, s)| i >= o && i < o + s).unwrap();
    let mut worst = (0.0, None);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if block_of(i) != block_of(j) && m[(i, j)].abs() > worst.0 {
                worst = (m[(i, j)].abs(), Some((i, j)));
            }
        }
    }
    worst
}

/// Full structural, rank, regularity and consistency check.
pub fn validate(sys: &PHDae, u: &Waveform, tol: Tolerance) -> Result<ValidationReport> {
    if u.dim() != sys.m() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} components, B has {} columns",
            u.dim(),
            sys.m()
        )));
    }
    let n = sys.n();
    let mut messages = Vec::new();
    let mut structure = Vec::new();
    let mut push = |name: &str, c: crate::linalg::StructureCheck| {
        structure.push(Check {
            name: name.to_string(),
            ok: c.ok,
            detail: c.diagnostic,
        });
    };

    for (name, m) in [("E", sys.e()), ("R", sys.r()), ("Q", sys.q())] {
        let (v, at) = off_block_max(sys, m);
        let thresh = tol.threshold(max_abs(m));
        let ok = v <= thresh;
        push(
            &format!("{name} block-diagonal"),
            crate::linalg::StructureCheck {
                ok,
                diagnostic: (!ok).then(|| {
                    let (i, j) = at.unwrap();
                    format!("{name}[{i},{j}] = {:e} lies outside the diagonal blocks", m[(i, j)])
                }),
            },
        );
    }
    push("J skew-symmetric", structure_check(sys.j(), Structure::Skew, tol)?);
    push("R symmetric PSD", structure_check(sys.r(), Structure::SymmetricPsd, tol)?);
    push(
        "E^T Q = Q^T E >= 0",
        structure_check(sys.e(), Structure::SymPair(sys.q()), tol)?,
    );
    for (i, (_, s)) in sys.blocks().into_iter().enumerate() {
        let qi = sys.diag_block(sys.q(), i);
        let rank = numerical_rank(&qi, tol);
        push(
            &format!("Q block {i} invertible"),
            crate::linalg::StructureCheck {
                ok: rank == s,
                diagnostic: (rank != s).then(|| format!("rank {rank} < {s}")),
            },
        );
    }
    let structure_ok = structure.iter().all(|c| c.ok);
    for c in structure.iter().filter(|c| !c.ok) {
        messages.push(format!(
            "structure: {} fails{}",
            c.name,
            c.detail.as_ref().map(|d| format!(" ({d})")).unwrap_or_default()
        ));
    }

    let rank_erj = numerical_rank(&hstack(&[sys.e(), sys.r(), sys.j()]), tol);
    if rank_erj < n {
        messages.push(format!("rank condition rk[E R J] = {rank_erj} < n = {n}"));
    }
    let rank_er = numerical_rank(&hstack(&[sys.e(), sys.r()]), tol);
    if rank_er < n {
        messages.push(format!(
            "rank condition rk[E R] = {rank_er} < n = {n}: the E-R part is degenerate and no \
             contraction of the Lions-Mercier iteration can be guaranteed"
        ));
    }
    let regular = pencil_regular(sys.e(), &sys.a_matrix(), 5);
    if !regular {
        messages.push("pencil sE - (J-R)Q appears singular for every trial shift".into());
    }

    let (mut consistency_ok, mut residual, mut z_out, mut z1_out) = (None, None, None, None);
    let mut smooth = Vec::new();
    if structure_ok {
        let z = kernel_basis(sys.e(), tol);
        if z.ncols() == 0 {
            consistency_ok = Some(true);
            residual = Some(0.0);
        } else {
            let q = sys.q();
            let rqz = sys.r() * q * &z;
            let zqjqz = z.transpose() * q.transpose() * sys.j() * q * &z;
            let z1 = kernel_basis(&vstack(&[&rqz, &zqjqz]), tol);
            if z1.ncols() == 0 {
                consistency_ok = Some(true);
                residual = Some(0.0);
            } else {
                let proj = z1.transpose() * z.transpose() * q.transpose();
                let jqx = sys.j() * q * sys.x0();
                let bu = sys.b() * u.first();
                let res = &proj * (&jqx + &bu);
                let scale = max_abs(&proj) * (jqx.amax() + bu.amax());
                let r = res.amax();
                let ok = r <= tol.threshold(scale).max(1e-12 * scale);
                if !ok {
                    messages.push(format!(
                        "initial value inconsistent: |Z1^T Z^T Q^T (JQx0 + Bu(0))| = {r:e}"
                    ));
                }
                let pb = &proj * sys.b();
                let pb_scale = tol.threshold(max_abs(&pb).max(max_abs(sys.b())));
                smooth = (0..sys.m())
                    .filter(|&c| pb.column(c).amax() > pb_scale)
                    .collect();
                if !smooth.is_empty() {
                    messages.push(format!(
                        "input components {smooth:?} enter Z1^T Z^T Q^T B u and must be H1 in time \
                         (not checked on sampled data)"
                    ));
                }
                consistency_ok = Some(ok);
                residual = Some(r);
                z1_out = Some(z1);
            }
        }
        z_out = Some(z);
    }
    Ok(ValidationReport {
        n,
        structure,
        structure_ok,
        rank_erj,
        rank_er,
        pencil_regular: regular,
        consistency_ok,
        consistency_residual: residual,
        z: z_out,
        z1: z1_out,
        smooth_input_components: smooth,
        messages,
    })
}

/// Probabilistic regularity test of the pencil `sE - A`.
///
/// Tries `trials` deterministic pseudo-random shifts, log-spaced in
/// `[1e-2, 1e2]`, and succeeds on the first nonsingular `σE - A`.
pub fn pencil_regular(e: &Matrix, a: &Matrix, trials: usize) -> bool {
    if e.shape() != a.shape() || e.nrows() != e.ncols() {
        return false;
    }
    let golden = 0.618_033_988_749_894_9;
    (1..=trials.max(1)).any(|k| {
        let frac = (k as f64 * golden).fract();
        let sigma = 10f64.powf(-2.0 + 4.0 * frac);
        Factorization::new(&(e * sigma - a)).is_some()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn simple(nu: f64, tau: f64) -> PHDae {
        PHDae::new(
            Matrix::identity(2, 2),
            dmatrix![0.0, nu; -nu, 0.0],
            Matrix::identity(2, 2) * tau,
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            dvector![2.0, 2.0],
            vec![1, 1],
        )
        .unwrap()
    }

    fn zero_input(n: usize) -> Waveform {
        Waveform::zeros(1.0, n, 1).unwrap()
    }

    #[test]
    fn simple_model_passes() {
        let r = validate(&simple(15.0, 0.01), &zero_input(3), Tolerance::default()).unwrap();
        assert!(r.ok(), "{:?}", r.messages);
        assert_eq!(r.z.as_ref().unwrap().ncols(), 0);
    }

    #[test]
    fn degenerate_er_is_flagged() {
        let sys = PHDae::new(
            Matrix::zeros(2, 2),
            dmatrix![0.0, 1.0; -1.0, 0.0],
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            dvector![0.0, 0.0],
            vec![1, 1],
        )
        .unwrap();
        let r = validate(&sys, &zero_input(3), Tolerance::default()).unwrap();
        assert!(r.structure_ok);
        assert_eq!(r.rank_erj, 2);
        assert_eq!(r.rank_er, 0);
        assert!(!r.ok());
        assert!(r.messages.iter().any(|m| m.contains("rk[E R]")));
    }

    #[test]
    fn structure_violations_are_named() {
        let mut j = dmatrix![0.0, 1.0; -1.0, 0.0];
        j[(0, 0)] = 1.0;
        let sys = PHDae::new(
            Matrix::identity(2, 2),
            j,
            Matrix::identity(2, 2) * -1.0,
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            dvector![0.0, 0.0],
            vec![2],
        )
        .unwrap();
        let r = validate(&sys, &zero_input(3), Tolerance::default()).unwrap();
        assert!(!r.structure_ok);
        assert!(r.consistency_ok.is_none());
        let failing: Vec<&str> = r.structure.iter().filter(|c| !c.ok).map(|c| c.name.as_str()).collect();
        assert_eq!(failing, ["J skew-symmetric", "R symmetric PSD"]);
    }

    #[test]
    fn inconsistent_initial_value() {
        // E = diag(1, 0), R = 0 on the algebraic row, J couples both states:
        // Z = e2, Z1 = e2, and the compatibility reads (JQx0 + Bu)_2 = 0.
        let sys = PHDae::new(
            dmatrix![1.0, 0.0; 0.0, 0.0],
            dmatrix![0.0, 1.0; -1.0, 0.0],
            dmatrix![1.0, 0.0; 0.0, 0.0],
            Matrix::identity(2, 2),
            dmatrix![0.0; 1.0],
            dvector![1.0, 0.0],
            vec![2],
        )
        .unwrap();
        let u = Waveform::constant(1.0, 3, &dvector![0.0]).unwrap();
        let r = validate(&sys, &u, Tolerance::default()).unwrap();
        assert_eq!(r.consistency_ok, Some(false));
        assert_eq!(r.smooth_input_components, vec![0]);
        let u = Waveform::constant(1.0, 3, &dvector![1.0]).unwrap();
        let r = validate(&sys, &u, Tolerance::default()).unwrap();
        assert_eq!(r.consistency_ok, Some(true));
    }

    #[test]
    fn pencil_examples() {
        assert!(pencil_regular(&Matrix::identity(3, 3), &Matrix::identity(3, 3), 5));
        assert!(!pencil_regular(&dmatrix![0.0], &dmatrix![0.0], 5));
        assert!(pencil_regular(&dmatrix![0.0], &dmatrix![-1.0], 5));
    }

    #[test]
    fn split_examples() {
        let sys = simple(15.0, 0.01);
        let s = sys.split_j();
        assert_eq!(s.j_d, Matrix::zeros(2, 2));
        assert_eq!(s.j_o, *sys.j());
        let one = PHDae::new(
            sys.e().clone(),
            sys.j().clone(),
            sys.r().clone(),
            sys.q().clone(),
            sys.b().clone(),
            sys.x0().clone(),
            vec![2],
        )
        .unwrap();
        let s = one.split_j();
        assert_eq!(s.j_d, *sys.j());
        assert_eq!(s.j_o, Matrix::zeros(2, 2));
    }

    #[test]
    fn hamiltonian_and_output() {
        let sys = simple(15.0, 0.01);
        let x = Waveform::constant(1.0, 4, &dvector![2.0, 2.0]).unwrap();
        let h = sys.hamiltonian(&x).unwrap();
        assert!(h.samples().iter().all(|&v| (v - 4.0).abs() < 1e-15));
        assert_eq!(sys.output_map(&x).unwrap().sup_norm(), 0.0);
        let z = Waveform::zeros(1.0, 4, 2).unwrap();
        assert_eq!(sys.hamiltonian(&z).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn partition_must_cover_n() {
        let err = PHDae::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            dvector![0.0, 0.0],
            vec![1, 2],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }
}
