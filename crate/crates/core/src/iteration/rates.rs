use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hstack, max_abs, numerical_rank, spectral_norm, Matrix, Tolerance};
use crate::phdae::PHDae;

/// A-priori contraction analysis for `K = (1-α)R + μEQ⁻¹ - J_o`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub k_norm: f64,
    /// Smallest eigenvalue of `K + J_o = (1-α)R + μEQ⁻¹`.
    pub sym_min: f64,
    /// `rk [μE (1-α)R] = n`.
    pub rank_condition_holds: bool,
    /// `J_o = 0`: `K` is symmetric and the sharper bound below applies.
    pub decoupled: bool,
    pub lambda: f64,
    pub q: f64,
    pub lambda_star: f64,
    pub q_star: f64,
}

struct Analysis {
    k_norm: f64,
    sym_eigs: Vec<f64>,
    rank_ok: bool,
    decoupled: bool,
}

impl Analysis {
    fn new(sys: &PHDae, alpha: f64, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(mu >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "need α ∈ [0,1] and μ >= 0 (got α = {alpha}, μ = {mu})"
            )));
        }
        let j_o = sys.split_j().j_o;
        let sym = sys.r() * (1.0 - alpha) + sys.e_q_inverse()? * mu;
        let sym = (&sym + sym.transpose()) * 0.5;
        let k = &sym - &j_o;
        let rank_ok = numerical_rank(
            &hstack(&[&(sys.e() * mu), &(sys.r() * (1.0 - alpha))]),
            Tolerance::default(),
        ) == sys.n();
        let mut sym_eigs: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        sym_eigs.sort_by(f64::total_cmp);
        Ok(Analysis {
            k_norm: spectral_norm(&k),
            sym_eigs,
            rank_ok,
            decoupled: max_abs(&j_o) == 0.0,
        })
    }

    fn q(&self, lambda: f64) -> f64 {
        if !self.rank_ok {
            return 1.0;
        }
        let lmin = self.sym_eigs[0];
        let q2 = 1.0 - 4.0 * lambda * lmin / (1.0 + lambda * self.k_norm).powi(2);
        let mut q = q2.max(0.0).sqrt();
        if self.decoupled {
            // For symmetric K the transform has eigenvalues
            // (1 - λk)/(1 + λk), bounded in modulus by |1 - λk|.
            let sharp = self
                .sym_eigs
                .iter()
                .map(|&k| (1.0 - lambda * k).abs())
                .fold(0.0f64, f64::max);
            q = q.min(sharp);
        }
        q.min(1.0)
    }
}

/// Contraction factor `q(λ)` of the Lions-Mercier iteration,
/// `q² = 1 - 4λ/((1+λ‖K‖)²‖(K+J_o)⁻¹‖)`, together with `λ* = 1/‖K‖` and
/// `q* = q(λ*)`.
///
/// Without the rank condition `q = q* = 1`. When `J_o = 0` the bound is
/// tightened to `min(q, max_i |1 - λk_i|)`, which gives
/// `q* = 1 - 1/cond(K)`.
pub fn contraction_factor(sys: &PHDae, alpha: f64, mu: f64, lambda: f64) -> Result<RateEstimate> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("λ must be positive, got {lambda}")));
    }
    let a = Analysis::new(sys, alpha, mu)?;
    let lambda_star = 1.0 / a.k_norm;
    let q_star = if lambda_star.is_finite() { a.q(lambda_star) } else { 1.0 };
    Ok(RateEstimate {
        k_norm: a.k_norm,
        sym_min: a.sym_eigs[0],
        rank_condition_holds: a.rank_ok,
        decoupled: a.decoupled,
        lambda,
        q: a.q(lambda),
        lambda_star,
        q_star,
    })
}

/// `(λ, q(λ))` for every `λ` in `lambdas`.
pub fn rate_table(sys: &PHDae, alpha: f64, mu: f64, lambdas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let a = Analysis::new(sys, alpha, mu)?;
    lambdas
        .iter()
        .map(|&l| {
            if l > 0.0 {
                Ok((l, a.q(l)))
            } else {
                Err(Error::InvalidConfig(format!("λ must be positive, got {l}")))
            }
        })
        .collect()
}

/// Closed form for `E = Q = I`, `α = 1`:
/// `λ* = 1/√(μ² + λ_max(J_oᵀJ_o))`, `q*² = 1 - 1/√(1 + λ_max(J_oᵀJ_o)/μ²)`.
pub fn optimal_lambda_ode_qi(mu: f64, j_o: &Matrix) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig(format!("μ must be positive, got {mu}")));
    }
    let lmax = spectral_norm(j_o).powi(2);
    let lambda_star = 1.0 / (mu * mu + lmax).sqrt();
    let q2 = 1.0 - 1.0 / (1.0 + lmax / (mu * mu)).sqrt();
    Ok((lambda_star, q2.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build, ModelSpec};

    fn model(spec: ModelSpec) -> PHDae {
        build(&spec).unwrap().sys
    }

    #[test]
    fn simple_closed_form_agrees() {
        let sys = model(ModelSpec::named("simple-2x2").param("nu", 1.5));
        let r = contraction_factor(&sys, 1.0, 2.0, 0.4).unwrap();
        assert!((r.k_norm - 2.5).abs() < 1e-12);
        assert!((r.lambda_star - 0.4).abs() < 1e-12);
        assert!((r.q_star.powi(2) - 0.2).abs() < 1e-12);
        assert!((r.q_star - 0.44721).abs() < 1e-5);
        let (l, q) = optimal_lambda_ode_qi(2.0, &sys.split_j().j_o).unwrap();
        assert!((l - 0.4).abs() < 1e-12);
        assert!((q * q - 0.2).abs() < 1e-12);
    }

    #[test]
    fn decoupled_closed_forms() {
        let (l, q) = optimal_lambda_ode_qi(2.0, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!((l, q), (0.5, 0.0));
        let (_, q) = optimal_lambda_ode_qi(1e-3, &(Matrix::identity(2, 2) * 10.0)).unwrap();
        assert!(q > 0.999);
        let sys = model(ModelSpec::named("scaled-2x2").param("nu", 0.0));
        let r = contraction_factor(&sys, 1.0, 1.0, 1.0).unwrap();
        assert!(r.decoupled);
        assert!((r.q_star - 1.0 / 3.0).abs() < 1e-10);
        let sys = model(ModelSpec::named("simple-2x2").param("nu", 0.0));
        let r = contraction_factor(&sys, 1.0, 2.0, 1.0).unwrap();
        assert!(r.q_star.abs() < 1e-15);
    }

    #[test]
    fn two_mass_and_circuit_rates() {
        let r = contraction_factor(&model(ModelSpec::named("two-mass")), 0.5, 2.0, 1.5).unwrap();
        assert!((r.q - 0.975).abs() < 0.005, "q = {}", r.q);
        assert!((r.q_star - 0.944).abs() < 0.005, "q* = {}", r.q_star);
        let r = contraction_factor(&model(ModelSpec::named("rlc-circuit")), 0.2, 1.0, 1.2).unwrap();
        assert!(r.q >= 0.9993 && r.q < 1.0, "q = {}", r.q);
        assert!((r.q_star - 0.998).abs() < 0.0005, "q* = {}", r.q_star);
    }

    #[test]
    fn rank_failure_gives_unit_rate() {
        let sys = PHDae::new(
            Matrix::zeros(2, 2),
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            crate::linalg::Vector::zeros(2),
            vec![1, 1],
        )
        .unwrap();
        let r = contraction_factor(&sys, 0.5, 1.0, 1.0).unwrap();
        assert!(!r.rank_condition_holds);
        assert_eq!((r.q, r.q_star), (1.0, 1.0));
    }

    #[test]
    fn optimum_minimizes_the_table() {
        let sys = model(ModelSpec::named("two-mass"));
        let r = contraction_factor(&sys, 0.5, 2.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        let table = rate_table(&sys, 0.5, 2.0, &grid).unwrap();
        let best = table.iter().map(|p| p.1).fold(1.0f64, f64::min);
        assert!(r.q_star <= best + 1e-12);
    }
}
