//! Built-in test systems: two small ODE examples, a damped two-mass
//! oscillator and an RLC circuit DAE.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coupling::{condense, Interconnection, Subsystem};
use crate::error::{Error, Result};
use crate::io::Signal;
use crate::linalg::{Matrix, Vector};
use crate::phdae::PHDae;
use crate::solver::{Grid, SolverScheme};
use crate::waveform::Waveform;

pub const MODEL_NAMES: [&str; 4] = ["simple-2x2", "scaled-2x2", "two-mass", "rlc-circuit"];

/// Which model to build and how to override its defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Signal>,
}

impl ModelSpec {
    pub fn named(name: &str) -> Self {
        ModelSpec {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn horizon(mut self, t_end: f64, n: usize) -> Self {
        self.t_end = Some(t_end);
        self.n = Some(n);
        self
    }
}

/// Input of a model: a signal or explicit samples (`m × N`).
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Signal(Signal),
    Samples(Matrix),
}

/// A system together with its horizon and input.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub name: String,
    pub sys: PHDae,
    pub t_end: f64,
    /// Grid samples; `None` selects the default grid rule.
    pub n: Option<usize>,
    pub input: Input,
}

impl Model {
    pub fn default_scheme(&self) -> Result<SolverScheme> {
        match self.n {
            Some(n) => SolverScheme::new(Default::default(), self.t_end, n),
            None => SolverScheme::default_for(&self.sys.a_matrix(), self.t_end),
        }
    }

    /// Input sampled on `grid`.
    pub fn input_waveform(&self, grid: Grid) -> Result<Waveform> {
        let m = self.sys.m();
        match &self.input {
            Input::Signal(s) => Waveform::from_fn(grid.t_end, grid.n, m, |t| Vector::from_element(m, s.value(t))),
            Input::Samples(data) => {
                if data.ncols() != grid.n {
                    return Err(Error::GridMismatch(format!(
                        "input has {} samples, grid has {}",
                        data.ncols(),
                        grid.n
                    )));
                }
                Waveform::new(grid.t_end, data.clone())
            }
        }
    }
}

/// An ODE model in both coupled and condensed form.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub subsystems: Vec<Subsystem>,
    pub interconnection: Interconnection,
    pub model: Model,
}

struct Params<'a> {
    model: &'a str,
    given: &'a BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        Params {
            model: &spec.name,
            given: &spec.params,
            used: Vec::new(),
        }
    }

    fn get(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.used.push(key);
        let v = self.given.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: key.into(),
                reason: "must be finite".into(),
            });
        }
        Ok(v)
    }

    fn positive(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let v = self.get(key, default)?;
        if v <= 0.0 {
            return Err(Error::InvalidParameter {
                name: key.into(),
                reason: format!("must be positive, got {v}"),
            });
        }
        Ok(v)
    }

    fn nonnegative(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let v = self.get(key, default)?;
        if v < 0.0 {
            return Err(Error::InvalidParameter {
                name: key.into(),
                reason: format!("must be nonnegative, got {v}"),
            });
        }
        Ok(v)
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains(&k.as_str())) {
            return Err(Error::InvalidParameter {
                name: k.clone(),
                reason: format!("not a parameter of {}", self.model),
            });
        }
        Ok(())
    }
}

fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

fn horizon(spec: &ModelSpec, t_default: f64, n_default: Option<usize>) -> Result<(f64, Option<usize>)> {
    let t = spec.t_end.unwrap_or(t_default);
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "T".into(),
            reason: format!("must be positive, got {t}"),
        });
    }
    let n = spec.n.or(n_default);
    if matches!(n, Some(k) if k < 2) {
        return Err(Error::InvalidParameter {
            name: "N".into(),
            reason: "must be at least 2".into(),
        });
    }
    Ok((t, n))
}

/// Two scalar blocks `x_i' = -τ q_i x_i ± ν q_j x_j` coupled through `Ĉ`.
fn two_by_two(spec: &ModelSpec, scaled: bool) -> Result<BuiltModel> {
    let mut p = Params::new(spec);
    let (nu_default, tau_default) = if scaled { (1.5, 0.5) } else { (15.0, 0.01) };
    let nu = p.nonnegative("nu", nu_default)?;
    let tau = p.positive("tau", tau_default)?;
    let (q1, q2) = if scaled {
        (p.positive("q1", 1.5)?, p.positive("q2", 1.0)?)
    } else {
        (1.0, 1.0)
    };
    let x1 = p.get("x0_1", 2.0)?;
    let x2 = p.get("x0_2", 2.0)?;
    p.finish()?;
    let block = |q: f64, x: f64| Subsystem {
        e: scalar(1.0),
        j: scalar(0.0),
        r: scalar(tau),
        q: scalar(q),
        b_hat: scalar(1.0),
        b_bar: Matrix::zeros(1, 0),
        x0: Vector::from_element(1, x),
    };
    let subsystems = vec![block(q1, x1), block(q2, x2)];
    let interconnection = Interconnection::new(Matrix::from_row_slice(2, 2, &[0.0, -nu, nu, 0.0]))?;
    let sys = condense(&subsystems, &interconnection)?;
    let (t_end, n) = horizon(spec, if scaled { 2.0 } else { 0.5 }, None)?;
    Ok(BuiltModel {
        subsystems,
        interconnection,
        model: Model {
            name: spec.name.clone(),
            sys,
            t_end,
            n,
            input: Input::Signal(spec.input.clone().unwrap_or(Signal::Zero)),
        },
    })
}

fn two_mass(spec: &ModelSpec) -> Result<BuiltModel> {
    let mut p = Params::new(spec);
    let m1 = p.positive("m1", 2.0)?;
    let m2 = p.positive("m2", 2.0)?;
    let k1 = p.positive("k1", 2.0)?;
    let k2 = p.positive("k2", 2.0)?;
    let k = p.positive("k", 4.0)?;
    let r1 = p.positive("r1", 0.5)?;
    let r2 = p.positive("r2", 0.75)?;
    let x0: Vec<f64> = [
        ("p1_0", 0.0),
        ("q1_0", 0.0),
        ("d_0", 0.0),
        ("p2_0", 0.1),
        ("q2_0", 0.0),
    ]
    .iter()
    .map(|&(key, d)| p.get(key, d))
    .collect::<Result<_>>()?;
    p.finish()?;
    // States (p₁, q₁, q₁ - q₂) and (p₂, q₂).
    let subsystems = vec![
        Subsystem {
            e: Matrix::identity(3, 3),
            j: Matrix::from_row_slice(3, 3, &[0.0, -1.0, -1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            r: Matrix::from_diagonal(&Vector::from_vec(vec![r1, 0.0, 0.0])),
            q: Matrix::from_diagonal(&Vector::from_vec(vec![1.0 / m1, k1, k])),
            b_hat: Matrix::from_column_slice(3, 1, &[0.0, 0.0, -1.0]),
            b_bar: Matrix::zeros(3, 0),
            x0: Vector::from_column_slice(&x0[..3]),
        },
        Subsystem {
            e: Matrix::identity(2, 2),
            j: Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            r: Matrix::from_diagonal(&Vector::from_vec(vec![r2, 0.0])),
            q: Matrix::from_diagonal(&Vector::from_vec(vec![1.0 / m2, k2])),
            b_hat: Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            b_bar: Matrix::zeros(2, 0),
            x0: Vector::from_column_slice(&x0[3..]),
        },
    ];
    let interconnection = Interconnection::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))?;
    let sys = condense(&subsystems, &interconnection)?;
    let (t_end, n) = horizon(spec, 5.0, None)?;
    Ok(BuiltModel {
        subsystems,
        interconnection,
        model: Model {
            name: spec.name.clone(),
            sys,
            t_end,
            n,
            input: Input::Signal(spec.input.clone().unwrap_or(Signal::Zero)),
        },
    })
}

/// `simple-2x2`, `scaled-2x2` or `two-mass`.
pub fn build_ode_model(spec: &ModelSpec) -> Result<BuiltModel> {
    match spec.name.as_str() {
        "simple-2x2" => two_by_two(spec, false),
        "scaled-2x2" => two_by_two(spec, true),
        "two-mass" => two_mass(spec),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Six-state circuit with states `(u₁, u₂, u₃, ȷ₁, u₄, u₅)`, partition (4, 2).
pub fn build_circuit_model(spec: &ModelSpec) -> Result<Model> {
    if spec.name != "rlc-circuit" {
        return Err(Error::UnknownModel(spec.name.clone()));
    }
    let mut p = Params::new(spec);
    let g: Vec<f64> = [("r1", 0.5), ("r2", 0.5), ("r3", 0.5), ("r4", 0.5), ("r5", 5.0)]
        .iter()
        .map(|&(key, d)| p.positive(key, d).map(|r| 1.0 / r))
        .collect::<Result<_>>()?;
    let c1 = p.positive("c1", 5e-4)?;
    let c2 = p.positive("c2", 5e-4)?;
    let l = p.positive("l", 20.0)?;
    p.finish()?;

    let e = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, c1, 0.0, l, 0.0, c2]));
    let mut j = Matrix::zeros(6, 6);
    j[(2, 3)] = 1.0;
    j[(3, 2)] = -1.0;
    j[(3, 4)] = 1.0;
    j[(4, 3)] = -1.0;
    let mut r = Matrix::zeros(6, 6);
    r[(0, 0)] = g[0];
    r[(0, 1)] = -g[0];
    r[(1, 0)] = -g[0];
    r[(1, 1)] = g[0] + g[1];
    r[(1, 2)] = -g[1];
    r[(2, 1)] = -g[1];
    r[(2, 2)] = g[1] + g[2];
    r[(4, 4)] = g[3];
    r[(4, 5)] = -g[3];
    r[(5, 4)] = -g[3];
    r[(5, 5)] = g[3] + g[4];
    let mut b = Matrix::zeros(6, 1);
    b[(0, 0)] = 1.0;
    let sys = PHDae::new(e, j, r, Matrix::identity(6, 6), b, Vector::zeros(6), vec![4, 2])?;
    let (t_end, n) = horizon(spec, 0.02, Some(2001))?;
    let input = spec.input.clone().unwrap_or(Signal::SineProduct {
        amplitude: 1.0,
        f1: 50.0,
        f2: 500.0,
    });
    Ok(Model {
        name: spec.name.clone(),
        sys,
        t_end,
        n,
        input: Input::Signal(input),
    })
}

/// Any built-in model.
pub fn build(spec: &ModelSpec) -> Result<Model> {
    match spec.name.as_str() {
        "rlc-circuit" => build_circuit_model(spec),
        _ => build_ode_model(spec).map(|b| b.model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{model_to_json, parse_model};
    use crate::linalg::{numerical_rank, spectral_norm, hstack, Tolerance};
    use crate::phdae::validate;

    fn validated(m: &Model) -> bool {
        let grid = m.default_scheme().unwrap().grid;
        let u = m.input_waveform(grid).unwrap();
        let r = validate(&m.sys, &u, Tolerance::default()).unwrap();
        r.ok()
    }

    #[test]
    fn every_model_validates() {
        for name in MODEL_NAMES {
            let m = build(&ModelSpec::named(name)).unwrap();
            assert!(validated(&m), "{name}");
        }
    }

    #[test]
    fn simple_defaults() {
        let m = build(&ModelSpec::named("simple-2x2")).unwrap();
        assert!((spectral_norm(&m.sys.split_j().j_o) - 15.0).abs() < 1e-12);
        assert_eq!(m.sys.j()[(0, 1)], 15.0);
        assert_eq!(m.sys.x0().as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn scaled_degenerates_to_simple() {
        let s = build(&ModelSpec::named("scaled-2x2").param("nu", 0.0).param("q1", 1.0).param("tau", 0.01)).unwrap();
        let t = build(&ModelSpec::named("simple-2x2").param("nu", 0.0)).unwrap();
        assert_eq!(s.sys.j(), t.sys.j());
        assert_eq!(s.sys.q(), t.sys.q());
        assert_eq!(s.sys.r(), t.sys.r());
    }

    #[test]
    fn two_mass_structure() {
        let b = build_ode_model(&ModelSpec::named("two-mass")).unwrap();
        let sys = &b.model.sys;
        assert_eq!(sys.n(), 5);
        assert_eq!(sys.partition(), &[3, 2]);
        let h = sys.hamiltonian(&Waveform::constant(1.0, 2, sys.x0()).unwrap()).unwrap();
        assert!((h.first()[0] - 0.0025).abs() < 1e-15);
        let c = &b.interconnection.c_hat;
        let bh = crate::linalg::block_diag(&[b.subsystems[0].b_hat.clone(), b.subsystems[1].b_hat.clone()]);
        let jt = crate::linalg::block_diag(&[b.subsystems[0].j.clone(), b.subsystems[1].j.clone()]);
        assert_eq!(*sys.j(), jt - &bh * c * bh.transpose());
    }

    #[test]
    fn circuit_rank_and_output() {
        let m = build(&ModelSpec::named("rlc-circuit")).unwrap();
        let er = hstack(&[m.sys.e(), m.sys.r()]);
        assert_eq!(numerical_rank(&er, Tolerance::default()), 6);
        let erj = hstack(&[m.sys.e(), m.sys.r(), m.sys.j()]);
        assert_eq!(numerical_rank(&erj, Tolerance::default()), 6);
        let x = Waveform::from_fn(1.0, 5, 6, |t| Vector::from_fn(6, |i, _| t + i as f64)).unwrap();
        let y = m.sys.output_map(&x).unwrap();
        assert_eq!(y.samples().row(0), x.samples().row(0));
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(
            build(&ModelSpec::named("two-mass").param("m1", -1.0)),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            build(&ModelSpec::named("rlc-circuit").param("bogus", 1.0)),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(build(&ModelSpec::named("pendulum")), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn file_round_trip() {
        for name in MODEL_NAMES {
            let m = build(&ModelSpec::named(name)).unwrap();
            let back = parse_model(&model_to_json(&m).unwrap()).unwrap();
            assert_eq!(back, m, "{name}");
        }
    }
}
