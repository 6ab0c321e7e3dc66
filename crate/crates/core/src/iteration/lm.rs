use super::{contraction_factor, monotone, IterationRecord, IterationReport};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::{spectral_norm, Cayley, Matrix};
use crate::phdae::PHDae;
use crate::solver::{reference_solution, Integrator, SolverScheme};
use crate::waveform::Waveform;

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Z0Policy {
    /// `z⁰ = Qx⁰ - λ((J_d - αR + μEQ⁻¹)Qx⁰ + Bu)` with `x⁰(t) ≡ x₀`.
    #[default]
    FromX0Guess,
    Given(Waveform),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LMConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    /// Weight of the L² norm; defaults to `μ + 0.1`.
    pub omega: Option<f64>,
    pub max_iters: usize,
    /// Stop once the z-error (or, without a reference, the z-increment)
    /// drops to `tol` in the weighted norm.
    pub tol: f64,
    pub z0: Z0Policy,
    /// Refinement of the monolithic reference; `None` skips it.
    pub reference_refine: Option<usize>,
    pub exec: Execution,
}

impl LMConfig {
    pub fn new(lambda: f64, mu: f64, alpha: f64) -> Self {
        LMConfig {
            lambda,
            mu,
            alpha,
            omega: None,
            max_iters: 50,
            tol: 1e-12,
            z0: Z0Policy::FromX0Guess,
            reference_refine: Some(1),
            exec: Execution::default(),
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega.unwrap_or(self.mu + 0.1)
    }

    fn check(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("λ must be positive, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("α must lie in [0, 1], got {}", self.alpha)));
        }
        let omega = self.omega();
        if !(self.mu >= 0.0) || !(self.mu <= omega) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= μ <= ω (got μ = {}, ω = {omega})",
                self.mu
            )));
        }
        Ok(())
    }
}

struct Operators {
    k: Matrix,
    /// `(J_d - αR + μEQ⁻¹)Q`.
    m_q: Matrix,
}

fn operators(sys: &PHDae, cfg: &LMConfig) -> Result<Operators> {
    let split = sys.split_j();
    let eqi = sys.e_q_inverse()?;
    let k = sys.r() * (1.0 - cfg.alpha) + &eqi * cfg.mu - &split.j_o;
    let m_q = (&split.j_d - sys.r() * cfg.alpha + &eqi * cfg.mu) * sys.q();
    Ok(Operators { k, m_q })
}

/// `z = (I - λK)Qx`, the fixed point belonging to a solution `x`.
pub fn true_z(sys: &PHDae, cfg: &LMConfig, x: &Waveform) -> Result<Waveform> {
    let ops = operators(sys, cfg)?;
    let n = sys.n();
    let lhs = (Matrix::identity(n, n) - &ops.k * cfg.lambda) * sys.q();
    x.map_linear(&lhs)
}

struct Block {
    offset: usize,
    size: usize,
    integrator: Integrator,
}

/// Lions-Mercier dynamic iteration with Cayley update
/// `z^{k+1} = (I - λK)(I + λK)⁻¹(2Qx^k - z^k)`.
pub fn lm_run(
    sys: &PHDae,
    u: &Waveform,
    cfg: &LMConfig,
    scheme: SolverScheme,
) -> Result<(Waveform, IterationReport)> {
    cfg.check()?;
    let grid = scheme.grid;
    if !grid.matches(u) || u.dim() != sys.m() {
        return Err(Error::GridMismatch("input must live on the scheme grid with m components".into()));
    }
    let n = sys.n();
    let lambda = cfg.lambda;
    let omega = cfg.omega();
    let ops = operators(sys, cfg)?;
    let cayley = Cayley::new(&ops.k, lambda)?;
    let q = sys.q();
    let blocks: Vec<Block> = sys
        .blocks()
        .into_iter()
        .enumerate()
        .map(|(i, (offset, size))| {
            let q_i = sys.diag_block(q, i);
            let a_i = sys.diag_block(&ops.m_q, i) - q_i / lambda;
            Ok(Block {
                offset,
                size,
                integrator: Integrator::new(&sys.diag_block(sys.e(), i), &a_i, scheme)?,
            })
        })
        .collect::<Result<_>>()?;

    let bu = sys.b() * u.samples();
    let mut z = match &cfg.z0 {
        Z0Policy::FromX0Guess => {
            let mut qx = Matrix::zeros(n, grid.n);
            let q_x0 = q * sys.x0();
            for mut c in qx.column_iter_mut() {
                c.copy_from(&q_x0);
            }
            let mx = (&ops.m_q * sys.x0()).clone();
            let mut z = qx;
            for (k, mut c) in z.column_iter_mut().enumerate() {
                c -= (&mx + bu.column(k)) * lambda;
            }
            z
        }
        Z0Policy::Given(w) => {
            if !grid.matches(w) || w.dim() != n {
                return Err(Error::GridMismatch("z⁰ must live on the scheme grid".into()));
            }
            w.samples().clone()
        }
    };

    let reference = match cfg.reference_refine {
        Some(r) => {
            let x = reference_solution(sys, u, r, scheme)?;
            let z = true_z(sys, cfg, &x)?;
            Some((x, z))
        }
        None => None,
    };
    let rate = contraction_factor(sys, cfg.alpha, cfg.mu, lambda)?;
    let q_inv_norm = spectral_norm(&sys.q_inverse()?);

    let solve = |z: &Matrix| -> Result<Matrix> {
        let forcing = &bu + z / lambda;
        let parts = exec::try_map(cfg.exec, &blocks, |b| {
            let f = Waveform::new(grid.t_end, forcing.rows(b.offset, b.size).into_owned())?;
            let x0 = sys.x0().rows(b.offset, b.size).into_owned();
            b.integrator.solve(&f, &x0)
        })?;
        let mut x = Matrix::zeros(n, grid.n);
        for (b, p) in blocks.iter().zip(parts) {
            x.rows_mut(b.offset, b.size).copy_from(p.samples());
        }
        Ok(x)
    };
    let wave = |m: Matrix| Waveform::new(grid.t_end, m);

    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    let mut z_prev: Option<Matrix> = None;
    let mut converged_at = None;
    let mut x_bound_ok = true;
    let mut x;
    let mut k = 0usize;
    loop {
        x = solve(&z)?;
        let increment = match &z_prev {
            Some(p) => wave(&z - p)?.weighted_l2_norm(omega),
            None => f64::NAN,
        };
        let mut rec = IterationRecord {
            k,
            err_x_l2: f64::NAN,
            err_x_l2w: f64::NAN,
            err_z_l2w: f64::NAN,
            err_ex_sup: f64::NAN,
            err_x_sup: f64::NAN,
            q_bound: f64::NAN,
            increment,
        };
        if let Some((xr, zr)) = &reference {
            let dx = wave(&x - xr.samples())?;
            let dz = wave(&z - zr.samples())?;
            rec.err_x_l2 = dx.l2_norm();
            rec.err_x_l2w = dx.weighted_l2_norm(omega);
            rec.err_z_l2w = dz.weighted_l2_norm(omega);
            rec.err_x_sup = dx.sup_norm();
            rec.err_ex_sup = dx.map_linear(sys.e())?.sup_norm();
            let z0_err = records.first().map_or(rec.err_z_l2w, |r: &IterationRecord| r.err_z_l2w);
            rec.q_bound = rate.q.powi(k as i32) * z0_err;
            x_bound_ok &= rec.err_x_l2w <= q_inv_norm * rec.err_z_l2w * (1.0 + 1e-8) + 1e-300;
        }
        records.push(rec);
        let measure = if reference.is_some() { rec.err_z_l2w } else { rec.increment };
        if measure <= cfg.tol {
            converged_at = Some(k);
            break;
        }
        if k == cfg.max_iters {
            break;
        }
        let mut w = q * &x * 2.0 - &z;
        cayley.apply_columns(&mut w, cfg.exec);
        z_prev = Some(std::mem::replace(&mut z, w));
        k += 1;
    }
    log::debug!(
        "lm_run: {} iterations, q = {:.6}, converged at {:?}",
        records.len() - 1,
        rate.q,
        converged_at
    );
    let monotone_z = if reference.is_some() {
        monotone(records.iter().map(|r| r.err_z_l2w), 1e-8)
    } else {
        monotone(records.iter().skip(1).map(|r| r.increment), 1e-8)
    };
    Ok((
        wave(x)?,
        IterationReport {
            records,
            monotone_z,
            converged_at,
            x_bound_ok,
        },
    ))
}
