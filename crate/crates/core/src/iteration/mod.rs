//! Dynamic-iteration engines and their convergence diagnostics.
//!
//! [`jacobi_run`] is classical waveform relaxation, [`lm_run`] the
//! Lions-Mercier splitting iteration with a Cayley-transform update, and
//! [`contraction_factor`] the a-priori rate of the latter.

mod jacobi;
mod lm;
mod rates;

use std::io::Write;

use serde::Serialize;

pub use jacobi::{jacobi_error_predictor, jacobi_run, InitialGuess, JacobiConfig, Predictor};
pub use lm::{lm_run, true_z, LMConfig, Z0Policy};
pub use rates::{contraction_factor, optimal_lambda_ode_qi, rate_table, RateEstimate};

/// Errors of one iterate against the reference solution.
///
/// Fields that do not apply to an engine (the z-error of Jacobi, for
/// example) are `NaN`; so are all errors when no reference is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub err_x_l2: f64,
    pub err_x_l2w: f64,
    pub err_z_l2w: f64,
    pub err_ex_sup: f64,
    pub err_x_sup: f64,
    /// `q^k · err_z_l2w(0)`.
    pub q_bound: f64,
    /// Distance to the previous iterate (z for Lions-Mercier, x for Jacobi).
    pub increment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    pub monotone_z: bool,
    pub converged_at: Option<usize>,
    /// `err_x_l2w <= ‖Q⁻¹‖·err_z_l2w` held at every iteration.
    pub x_bound_ok: bool,
}

pub const REPORT_HEADER: &str = "k,err_x_l2,err_x_l2w,err_z_l2w,err_Ex_sup,q_bound";

impl IterationReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.k, r.err_x_l2, r.err_x_l2w, r.err_z_l2w, r.err_ex_sup, r.q_bound
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("reports hold at least one record")
    }

    /// `err_z_l2w(k+1) / err_z_l2w(k)`.
    pub fn z_ratios(&self) -> Vec<f64> {
        self.records
            .windows(2)
            .map(|w| w[1].err_z_l2w / w[0].err_z_l2w)
            .collect()
    }

    /// `err_x_sup(k+1) / err_x_sup(k)`.
    pub fn x_sup_ratios(&self) -> Vec<f64> {
        self.records
            .windows(2)
            .map(|w| w[1].err_x_sup / w[0].err_x_sup)
            .collect()
    }
}

/// True iff `err_z_l2w(k+1) <= err_z_l2w(k)·(1 + slack)` for every `k`.
pub fn monotonicity_check(report: &IterationReport, slack: f64) -> bool {
    monotone(report.records.iter().map(|r| r.err_z_l2w), slack)
}

pub(crate) fn monotone(values: impl Iterator<Item = f64>, slack: f64) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}
