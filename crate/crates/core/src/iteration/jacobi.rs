use serde::{Deserialize, Serialize};

use super::{monotone, IterationRecord, IterationReport};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::{numerical_rank, Matrix, Tolerance, Vector};
use crate::phdae::PHDae;
use crate::solver::{reference_solution, Grid, Integrator, SolverScheme};
use crate::waveform::Waveform;

#[derive(Clone, Debug, Default, PartialEq)]
pub enum InitialGuess {
    /// `x⁰(t) ≡` the state at the start of each window.
    #[default]
    ConstantX0,
    /// Full-horizon waveform on the experiment grid.
    Given(Waveform),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobiConfig {
    /// Window length `H`; `T/H` must be an integer.
    pub window: f64,
    pub max_sweeps: usize,
    /// Stop a window once `max_t ‖x^{k+1} - x^k‖ <= tol`.
    pub tol: f64,
    pub initial_guess: InitialGuess,
    /// Refinement of the monolithic reference; `None` skips it.
    pub reference_refine: Option<usize>,
    pub exec: Execution,
}

impl JacobiConfig {
    pub fn new(window: f64) -> Self {
        JacobiConfig {
            window,
            max_sweeps: 50,
            tol: 1e-12,
            initial_guess: InitialGuess::ConstantX0,
            reference_refine: Some(1),
            exec: Execution::default(),
        }
    }
}

/// Closed-form Jacobi error `√2 D ‖J‖^k e^{-τT} T^{k+1}/(k+1)!` in log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub k: usize,
    pub ln_value: f64,
    /// `exp(ln_value)`; may be infinite.
    pub value: f64,
    /// `‖ε^{k+1}‖/‖ε^k‖ = ‖J‖T/(k+2)`.
    pub ratio: f64,
    /// `k >= τT - 1`, where the closed form is exact.
    pub valid: bool,
}

pub fn jacobi_error_predictor(j_norm: f64, tau: f64, t_end: f64, d: f64, k: usize) -> Predictor {
    let ln_fact: f64 = (2..=k + 1).map(|i| (i as f64).ln()).sum();
    let ln_value = (2f64.sqrt() * d).ln() + k as f64 * j_norm.ln() - tau * t_end
        + (k + 1) as f64 * t_end.ln()
        - ln_fact;
    Predictor {
        k,
        ln_value,
        value: ln_value.exp(),
        ratio: j_norm * t_end / (k + 2) as f64,
        valid: k as f64 >= tau * t_end - 1.0,
    }
}

struct Block {
    offset: usize,
    size: usize,
    integrator: Integrator,
}

fn window_count(t_end: f64, window: f64) -> Result<usize> {
    if !(window > 0.0) || window > t_end * (1.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "window length must lie in (0, T] (got {window}, T = {t_end})"
        )));
    }
    let ratio = t_end / window;
    let count = ratio.round();
    if (ratio - count).abs() > 1e-9 * ratio {
        return Err(Error::InvalidConfig(format!("T/H = {ratio} is not an integer")));
    }
    Ok(count as usize)
}

/// Jacobi waveform relaxation with splitting `M = (J_d - R)Q`, `N = -J_oQ`,
/// optionally on consecutive windows of length `H`.
pub fn jacobi_run(
    sys: &PHDae,
    u: &Waveform,
    cfg: &JacobiConfig,
    scheme: SolverScheme,
) -> Result<(Waveform, IterationReport)> {
    let tol = Tolerance::default();
    for (i, (_, s)) in sys.blocks().into_iter().enumerate() {
        if numerical_rank(&sys.diag_block(sys.e(), i), tol) < s {
            return Err(Error::NonInvertibleE { block: i });
        }
    }
    if cfg.max_sweeps == 0 {
        return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
    }
    let grid = scheme.grid;
    if !grid.matches(u) || u.dim() != sys.m() {
        return Err(Error::GridMismatch("input must live on the scheme grid with m components".into()));
    }
    let windows = window_count(grid.t_end, cfg.window)?;
    if !(grid.n - 1).is_multiple_of(windows) {
        return Err(Error::InvalidConfig(format!(
            "{} grid intervals cannot be split into {windows} windows",
            grid.n - 1
        )));
    }
    let per = (grid.n - 1) / windows;
    let h_win = grid.t_end / windows as f64;
    let wscheme = SolverScheme {
        kind: scheme.kind,
        grid: Grid::new(h_win, per + 1)?,
    };
    if let InitialGuess::Given(g) = &cfg.initial_guess {
        if !grid.matches(g) || g.dim() != sys.n() {
            return Err(Error::GridMismatch("initial guess must live on the scheme grid".into()));
        }
    }

    let split = sys.split_j();
    let m_full = (&split.j_d - sys.r()) * sys.q();
    let n_coupling = -(&split.j_o * sys.q());
    let blocks: Vec<Block> = sys
        .blocks()
        .into_iter()
        .enumerate()
        .map(|(i, (offset, size))| {
            let e_i = sys.diag_block(sys.e(), i);
            let m_i = sys.diag_block(&m_full, i);
            Ok(Block {
                offset,
                size,
                integrator: Integrator::new(&e_i, &m_i, wscheme)?,
            })
        })
        .collect::<Result<_>>()?;

    let reference = cfg
        .reference_refine
        .map(|r| reference_solution(sys, u, r, scheme))
        .transpose()?;
    let bu = sys.b() * u.samples();
    let n = sys.n();

    let mut final_x = Matrix::zeros(n, grid.n);
    let mut start = sys.x0().clone();
    // Per window and sweep: squared L² error, sup error, sup E-error, increment.
    let mut logs: Vec<Vec<[f64; 4]>> = Vec::new();
    let mut all_converged = true;
    for w in 0..windows {
        let c0 = w * per;
        let mut x_old = match &cfg.initial_guess {
            InitialGuess::ConstantX0 => {
                let mut m = Matrix::zeros(n, per + 1);
                for mut c in m.column_iter_mut() {
                    c.copy_from(&start);
                }
                m
            }
            InitialGuess::Given(g) => g.samples().columns(c0, per + 1).into_owned(),
        };
        let bu_w = bu.columns(c0, per + 1).into_owned();
        let t0 = c0 as f64 * grid.step();
        let error_of = |x: &Matrix| -> Option<(f64, f64, f64)> {
            let r = reference.as_ref()?;
            let d = x - r.samples().columns(c0, per + 1);
            let wf = Waveform::with_start(t0, t0 + h_win, d).ok()?;
            let ed = sys.e() * wf.samples();
            let ex_sup = ed.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            Some((wf.l2_norm().powi(2), wf.sup_norm(), ex_sup))
        };
        let mut window_log = Vec::new();
        let push = |log: &mut Vec<[f64; 4]>, x: &Matrix, inc: f64| {
            let (l2, sup, ex) = error_of(x).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            log.push([l2, sup, ex, inc]);
        };
        push(&mut window_log, &x_old, f64::NAN);
        let mut converged = false;
        for _ in 0..cfg.max_sweeps {
            let forcing = &bu_w - &n_coupling * &x_old;
            let parts = exec::try_map(cfg.exec, &blocks, |b| {
                let f = Waveform::new(h_win, forcing.rows(b.offset, b.size).into_owned())?;
                let x0 = start.rows(b.offset, b.size).into_owned();
                b.integrator.solve(&f, &x0)
            })?;
            let mut x_new = Matrix::zeros(n, per + 1);
            for (b, p) in blocks.iter().zip(&parts) {
                x_new.rows_mut(b.offset, b.size).copy_from(p.samples());
            }
            let inc = (&x_new - &x_old)
                .column_iter()
                .map(|c| c.norm())
                .fold(0.0f64, f64::max);
            push(&mut window_log, &x_new, inc);
            x_old = x_new;
            if inc <= cfg.tol {
                converged = true;
                break;
            }
        }
        all_converged &= converged;
        final_x.columns_mut(c0, per + 1).copy_from(&x_old);
        start = Vector::from(x_old.column(per));
        logs.push(window_log);
    }

    // Windows that stopped early keep contributing their last iterate.
    let sweeps = logs.iter().map(|l| l.len()).max().unwrap_or(1);
    let sweeps: Vec<[f64; 4]> = (0..sweeps)
        .map(|k| {
            logs.iter().fold([0.0, 0.0, 0.0, f64::NAN], |mut acc, l| {
                let rec = l[k.min(l.len() - 1)];
                acc[0] += rec[0];
                acc[1] = acc[1].max(rec[1]);
                acc[2] = acc[2].max(rec[2]);
                acc[3] = if acc[3].is_nan() { rec[3] } else { acc[3].max(rec[3]) };
                acc
            })
        })
        .collect();

    let records: Vec<IterationRecord> = sweeps
        .iter()
        .enumerate()
        .map(|(k, s)| IterationRecord {
            k,
            err_x_l2: s[0].sqrt(),
            err_x_l2w: s[0].sqrt(),
            err_z_l2w: f64::NAN,
            err_ex_sup: s[2],
            err_x_sup: s[1],
            q_bound: f64::NAN,
            increment: s[3],
        })
        .collect();
    let converged_at = if all_converged { Some(records.len() - 1) } else { None };
    let report = IterationReport {
        monotone_z: monotone(records.iter().map(|r| r.err_x_sup), 1e-8),
        records,
        converged_at,
        x_bound_ok: true,
    };
    Ok((Waveform::new(grid.t_end, final_x)?, report))
}
