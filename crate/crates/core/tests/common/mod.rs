#![allow(dead_code)]

use phsplit::linalg::{kernel_basis, Matrix, Tolerance, Vector};
use phsplit::solver::{SchemeKind, SolverScheme};
use phsplit::{PHDae, Waveform};
use rand::Rng;

pub fn gaussian<R: Rng>(rng: &mut R, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn skew<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let g = gaussian(rng, n, n);
    &g - g.transpose()
}

pub fn spd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> Matrix {
    let g = gaussian(rng, n, n);
    &g * g.transpose() + Matrix::identity(n, n) * shift
}

/// Symmetric PSD matrix of the given rank.
pub fn psd_rank<R: Rng>(rng: &mut R, n: usize, rank: usize) -> Matrix {
    let g = gaussian(rng, n, rank);
    &g * g.transpose()
}

fn set_block(dst: &mut Matrix, off: usize, m: &Matrix) {
    dst.view_mut((off, off), (m.nrows(), m.ncols())).copy_from(m);
}

/// A random PH-DAE with blocks `E_i = Q_i⁻¹P_i`, so `E_iᵀQ_i = P_i`, and a
/// dissipation that is positive on `Q_i ker P_i`, which gives
/// `rk [E R] = n`. Returns whether `E` is singular.
pub struct RandomModel {
    pub sys: PHDae,
    pub u: Waveform,
    pub scheme: SolverScheme,
    pub singular_e: bool,
}

pub fn random_model<R: Rng>(rng: &mut R, max_n: usize, allow_singular: bool) -> RandomModel {
    let s = rng.gen_range(2..=3usize);
    let mut partition = Vec::with_capacity(s);
    let mut left = max_n;
    for i in 0..s {
        let cap = (left - (s - 1 - i)).min(4);
        let size = rng.gen_range(1..=cap);
        partition.push(size);
        left -= size;
    }
    let n: usize = partition.iter().sum();
    let mut e = Matrix::zeros(n, n);
    let mut q = Matrix::zeros(n, n);
    let mut r = Matrix::zeros(n, n);
    let mut singular_e = false;
    let mut off = 0;
    for &size in &partition {
        let rank = if allow_singular && size > 1 && rng.gen_bool(0.5) {
            rng.gen_range(1..size)
        } else {
            size
        };
        singular_e |= rank < size;
        let qi = spd(rng, size, 0.5);
        let pi = psd_rank(rng, size, rank) + Matrix::identity(size, size) * if rank == size { 0.2 } else { 0.0 };
        let ei = qi.clone().try_inverse().unwrap() * &pi;
        let ker = kernel_basis(&pi, Tolerance::new(1e-12, 1e-9).unwrap());
        let qk = &qi * &ker;
        let ri = psd_rank(rng, size, 1) * rng.gen_range(0.0..0.5) + &qk * qk.transpose();
        set_block(&mut e, off, &ei);
        set_block(&mut q, off, &qi);
        set_block(&mut r, off, &ri);
        off += size;
    }
    let j = skew(rng, n);
    let m = rng.gen_range(1..=2usize);
    let b = gaussian(rng, n, m);
    let sys = PHDae::new(e, j, r, q, b, Vector::zeros(n), partition).unwrap();
    let t_end = rng.gen_range(0.5..1.5);
    let scheme = SolverScheme::new(SchemeKind::Trapezoidal, t_end, 201).unwrap();
    let freqs: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..3.0)).collect();
    let u = Waveform::from_fn(t_end, 201, m, |t| {
        Vector::from_iterator(m, freqs.iter().map(|f| (f * t).sin()))
    })
    .unwrap();
    RandomModel {
        sys,
        u,
        scheme,
        singular_e,
    }
}

/// `(λ, μ, ω, α)` with `0 < μ <= ω` and `α < 1` whenever `E` is singular,
/// so that `rk [μE (1-α)R] = n`.
pub fn admissible<R: Rng>(rng: &mut R, singular_e: bool) -> (f64, f64, f64, f64) {
    let lambda = rng.gen_range(0.2..3.0);
    let mu = rng.gen_range(0.2..2.0);
    let omega = mu + rng.gen_range(0.0..1.0);
    let alpha = if singular_e { rng.gen_range(0.0..0.9) } else { rng.gen_range(0.0..=1.0) };
    (lambda, mu, omega, alpha)
}
