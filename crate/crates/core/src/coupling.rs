//! Assembly of one condensed PH-DAE from coupled subsystems.
//!
//! Two coupling styles are supported: a skew interconnection `û + Ĉŷ = 0`
//! of dedicated coupling ports, and direct port matrices with
//! `J_ij = B_ij B_jiᵀ`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, max_abs, Matrix, Tolerance, Vector};
use crate::phdae::PHDae;

/// One PH-DAE block before coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct Subsystem {
    pub e: Matrix,
    pub j: Matrix,
    pub r: Matrix,
    pub q: Matrix,
    /// Coupling ports `B̂_i` (`n_i × p_i`, `p_i` may be zero).
    pub b_hat: Matrix,
    /// External ports `B̄_i` (`n_i × m_i`, `m_i` may be zero).
    pub b_bar: Matrix,
    pub x0: Vector,
}

impl Subsystem {
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    fn check(&self, i: usize) -> Result<()> {
        let n = self.dim();
        let square = [&self.e, &self.j, &self.r, &self.q]
            .iter()
            .all(|m| m.shape() == (n, n));
        if n == 0
            || !square
            || self.b_hat.nrows() != n
            || self.b_bar.nrows() != n
            || self.x0.len() != n
        {
            return Err(Error::DimensionMismatch(format!(
                "subsystem {i}: inconsistent block dimensions"
            )));
        }
        Ok(())
    }
}

/// Skew interconnection `û + Ĉŷ = 0` over all coupling ports.
#[derive(Clone, Debug, PartialEq)]
pub struct Interconnection {
    pub c_hat: Matrix,
}

impl Interconnection {
    pub fn new(c_hat: Matrix) -> Result<Self> {
        if c_hat.nrows() != c_hat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Ĉ is {}x{}",
                c_hat.nrows(),
                c_hat.ncols()
            )));
        }
        let tol = Tolerance::default().threshold(max_abs(&c_hat));
        let sym = &c_hat + c_hat.transpose();
        if let Some((k, v)) = sym.iter().enumerate().find(|(_, v)| v.abs() > tol) {
            let (i, j) = (k % c_hat.nrows(), k / c_hat.nrows());
            return Err(Error::SkewViolation(format!("Ĉ[{i},{j}] + Ĉ[{j},{i}] = {v:e}")));
        }
        Ok(Interconnection { c_hat })
    }

    /// No coupling at all.
    pub fn none() -> Self {
        Interconnection {
            c_hat: Matrix::zeros(0, 0),
        }
    }
}

/// Port matrices `B_ij` (`n_i × m_ij`) for ordered pairs `i ≠ j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PortCoupling {
    pub ports: BTreeMap<(usize, usize), Matrix>,
}

impl PortCoupling {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_pair(mut self, i: usize, j: usize, b_ij: Matrix, b_ji: Matrix) -> Self {
        self.ports.insert((i, j), b_ij);
        self.ports.insert((j, i), b_ji);
        self
    }
}

fn external_ports(subs: &[Subsystem]) -> Matrix {
    let b = block_diag(&subs.iter().map(|s| s.b_bar.clone()).collect::<Vec<_>>());
    if b.ncols() == 0 {
        Matrix::zeros(b.nrows(), 1)
    } else {
        b
    }
}

fn assemble(subs: &[Subsystem], j: Matrix) -> Result<PHDae> {
    let cat = |f: fn(&Subsystem) -> &Matrix| block_diag(&subs.iter().map(|s| f(s).clone()).collect::<Vec<_>>());
    let x0 = Vector::from_iterator(
        subs.iter().map(|s| s.dim()).sum(),
        subs.iter().flat_map(|s| s.x0.iter().copied()),
    );
    PHDae::new(
        cat(|s| &s.e),
        j,
        cat(|s| &s.r),
        cat(|s| &s.q),
        external_ports(subs),
        x0,
        subs.iter().map(|s| s.dim()).collect(),
    )
}

/// `J = blockdiag(J̃_i) - B̂ĈB̂ᵀ`, all other matrices block-diagonal.
///
/// Subsystems without external ports contribute zero rows to `B`; when no
/// subsystem has one, `B` is a single zero column.
pub fn condense(subs: &[Subsystem], ic: &Interconnection) -> Result<PHDae> {
    if subs.is_empty() {
        return Err(Error::DimensionMismatch("no subsystems".into()));
    }
    for (i, s) in subs.iter().enumerate() {
        s.check(i)?;
    }
    let j_tilde = block_diag(&subs.iter().map(|s| s.j.clone()).collect::<Vec<_>>());
    let b_hat = block_diag(&subs.iter().map(|s| s.b_hat.clone()).collect::<Vec<_>>());
    if ic.c_hat.nrows() != b_hat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Ĉ is {0}x{0} but subsystems expose {1} coupling ports",
            ic.c_hat.nrows(),
            b_hat.ncols()
        )));
    }
    let j = if b_hat.ncols() == 0 {
        j_tilde
    } else {
        j_tilde - &b_hat * &ic.c_hat * b_hat.transpose()
    };
    assemble(subs, j)
}

/// `J_ij = B_ij B_jiᵀ` above the diagonal, `J_ji = -J_ijᵀ` below.
pub fn assemble_port_coupling(subs: &[Subsystem], pc: &PortCoupling) -> Result<PHDae> {
    if subs.is_empty() {
        return Err(Error::DimensionMismatch("no subsystems".into()));
    }
    for (i, s) in subs.iter().enumerate() {
        s.check(i)?;
    }
    let mut j = block_diag(&subs.iter().map(|s| s.j.clone()).collect::<Vec<_>>());
    let offsets: Vec<usize> = subs
        .iter()
        .scan(0, |o, s| {
            let r = *o;
            *o += s.dim();
            Some(r)
        })
        .collect();
    for (&(i, k), b_ik) in &pc.ports {
        if i >= subs.len() || k >= subs.len() || i == k {
            return Err(Error::DimensionMismatch(format!("invalid port pair ({i}, {k})")));
        }
        let b_ki = pc.ports.get(&(k, i)).ok_or_else(|| {
            Error::DimensionMismatch(format!("port ({i}, {k}) has no partner ({k}, {i})"))
        })?;
        if b_ik.nrows() != subs[i].dim() || b_ki.nrows() != subs[k].dim() || b_ik.ncols() != b_ki.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "ports ({i}, {k}) are {}x{} and {}x{}",
                b_ik.nrows(),
                b_ik.ncols(),
                b_ki.nrows(),
                b_ki.ncols()
            )));
        }
        if i < k {
            let jik = b_ik * b_ki.transpose();
            j.view_mut((offsets[i], offsets[k]), jik.shape()).copy_from(&jik);
            j.view_mut((offsets[k], offsets[i]), (jik.ncols(), jik.nrows()))
                .copy_from(&(-jik.transpose()));
        }
    }
    assemble(subs, j)
}
