//! JSON model files.
//!
//! A monolithic model file looks like
//!
//! ```json
//! {
//!   "name": "my-model",
//!   "partition": [1, 1],
//!   "E": [[1, 0], [0, 1]],
//!   "J": [[0, 15], [-15, 0]],
//!   "R": [[0.01, 0], [0, 0.01]],
//!   "Q": [[1, 0], [0, 1]],
//!   "B": [[0], [0]],
//!   "x0": [2, 2],
//!   "T": 0.5,
//!   "N": 201,
//!   "input": { "signal": { "kind": "zero" } }
//! }
//! ```
//!
//! Matrices are row-major lists of rows. `N` is optional; without it the
//! default grid rule of [`SolverScheme::default_for`] applies. The input is
//! either a built-in signal or `{ "samples": [[u_1(t_0), ...], ...] }` with
//! one row per grid sample.
//!
//! A coupled model file replaces `partition` and the system matrices by a
//! list of subsystems and either a skew interconnection `C_hat` or a list
//! of port pairs:
//!
//! ```json
//! {
//!   "subsystems": [
//!     { "E": [[1]], "J": [[0]], "R": [[0.01]], "Q": [[1]],
//!       "B_hat": [[1]], "B_bar": [[]], "x0": [2] },
//!     { "E": [[1]], "J": [[0]], "R": [[0.01]], "Q": [[1]],
//!       "B_hat": [[1]], "B_bar": [[]], "x0": [2] }
//!   ],
//!   "C_hat": [[0, -15], [15, 0]],
//!   "T": 0.5,
//!   "input": { "signal": { "kind": "zero" } }
//! }
//! ```
//!
//! Port pairs are given as `"ports": [{ "i": 0, "j": 1, "B_ij": ..., "B_ji": ... }]`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::coupling::{assemble_port_coupling, condense, Interconnection, PortCoupling, Subsystem};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::models::{Input, Model};
use crate::phdae::PHDae;

pub type Rows = Vec<Vec<f64>>;

pub fn rows(m: &Matrix) -> Rows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if nrows == 0 {
        return Err(Error::Parse(format!("{name}: matrix has no rows")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "{name}: row {i} has {} entries, row 0 has {ncols}",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("{name}: non-finite entry")));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn serialize_opt_rows<S: Serializer>(m: &Option<Matrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(rows).serialize(s)
}

/// Built-in scalar input signals. Scalar signals drive every input
/// component with the same value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    Zero,
    Constant { value: f64 },
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · sin(2π f₁ t) · sin(2π f₂ t)`.
    SineProduct {
        #[serde(default = "one")]
        amplitude: f64,
        f1: f64,
        f2: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Signal {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Signal::Zero => 0.0,
            Signal::Constant { value } => value,
            Signal::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * t + phase).sin(),
            Signal::SineProduct { amplitude, f1, f2 } => {
                amplitude * (2.0 * PI * f1 * t).sin() * (2.0 * PI * f2 * t).sin()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSpec {
    Signal(Signal),
    Samples(Rows),
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Signal(Signal::Zero)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub partition: Vec<usize>,
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(rename = "J")]
    pub j: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub input: InputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemFile {
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(rename = "J")]
    pub j: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "B_hat", default)]
    pub b_hat: Option<Rows>,
    #[serde(rename = "B_bar", default)]
    pub b_bar: Option<Rows>,
    pub x0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortPairFile {
    pub i: usize,
    pub j: usize,
    #[serde(rename = "B_ij")]
    pub b_ij: Rows,
    #[serde(rename = "B_ji")]
    pub b_ji: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub subsystems: Vec<SubsystemFile>,
    #[serde(rename = "C_hat", default, skip_serializing_if = "Option::is_none")]
    pub c_hat: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ports: Option<Vec<PortPairFile>>,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub input: InputSpec,
}

/// Rows of a port matrix; `[[]]`-style empty rows mean zero columns.
fn port_matrix(name: &str, rows: &Option<Rows>, n: usize) -> Result<Matrix> {
    match rows {
        None => Ok(Matrix::zeros(n, 0)),
        Some(r) if r.iter().all(|row| row.is_empty()) => Ok(Matrix::zeros(n, 0)),
        Some(r) => matrix_from_rows(name, r),
    }
}

fn input_from_spec(spec: &InputSpec, m: usize) -> Result<Input> {
    match spec {
        InputSpec::Signal(s) => Ok(Input::Signal(s.clone())),
        InputSpec::Samples(r) => {
            let s = matrix_from_rows("input.samples", r)?;
            if s.ncols() != m {
                return Err(Error::Parse(format!(
                    "input samples have {} columns, B has {m}",
                    s.ncols()
                )));
            }
            Ok(Input::Samples(s.transpose()))
        }
    }
}

fn horizon(t_end: f64, n: Option<usize>) -> Result<()> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Parse(format!("T must be positive, got {t_end}")));
    }
    if matches!(n, Some(k) if k < 2) {
        return Err(Error::Parse("N must be at least 2".into()));
    }
    Ok(())
}

impl ModelFile {
    pub fn into_model(self) -> Result<Model> {
        horizon(self.t_end, self.n)?;
        let sys = PHDae::new(
            matrix_from_rows("E", &self.e)?,
            matrix_from_rows("J", &self.j)?,
            matrix_from_rows("R", &self.r)?,
            matrix_from_rows("Q", &self.q)?,
            matrix_from_rows("B", &self.b)?,
            Vector::from_vec(self.x0),
            self.partition,
        )
        .map_err(|e| Error::Parse(e.to_string()))?;
        let input = input_from_spec(&self.input, sys.m())?;
        Ok(Model {
            name: self.name.unwrap_or_else(|| "model".into()),
            sys,
            t_end: self.t_end,
            n: self.n,
            input,
        })
    }

    pub fn from_model(m: &Model) -> Self {
        ModelFile {
            name: Some(m.name.clone()),
            partition: m.sys.partition().to_vec(),
            e: rows(m.sys.e()),
            j: rows(m.sys.j()),
            r: rows(m.sys.r()),
            q: rows(m.sys.q()),
            b: rows(m.sys.b()),
            x0: m.sys.x0().iter().copied().collect(),
            t_end: m.t_end,
            n: m.n,
            input: match &m.input {
                Input::Signal(s) => InputSpec::Signal(s.clone()),
                Input::Samples(s) => InputSpec::Samples(rows(&s.transpose())),
            },
        }
    }
}

impl CoupledModelFile {
    pub fn subsystems(&self) -> Result<Vec<Subsystem>> {
        self.subsystems
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let e = matrix_from_rows(&format!("subsystems[{i}].E"), &s.e)?;
                let n = e.nrows();
                Ok(Subsystem {
                    e,
                    j: matrix_from_rows(&format!("subsystems[{i}].J"), &s.j)?,
                    r: matrix_from_rows(&format!("subsystems[{i}].R"), &s.r)?,
                    q: matrix_from_rows(&format!("subsystems[{i}].Q"), &s.q)?,
                    b_hat: port_matrix(&format!("subsystems[{i}].B_hat"), &s.b_hat, n)?,
                    b_bar: port_matrix(&format!("subsystems[{i}].B_bar"), &s.b_bar, n)?,
                    x0: Vector::from_vec(s.x0.clone()),
                })
            })
            .collect()
    }

    pub fn into_model(self) -> Result<Model> {
        horizon(self.t_end, self.n)?;
        let subs = self.subsystems()?;
        let sys = match (&self.c_hat, &self.ports) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse("give either C_hat or ports, not both".into()))
            }
            (Some(c), None) => {
                let ic = Interconnection::new(matrix_from_rows("C_hat", c)?)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                condense(&subs, &ic)
            }
            (None, ports) => {
                let mut pc = PortCoupling::new();
                for p in ports.iter().flatten() {
                    let nij = subs.get(p.i).map(|s| s.dim()).unwrap_or(0);
                    let nji = subs.get(p.j).map(|s| s.dim()).unwrap_or(0);
                    pc = pc.with_pair(
                        p.i,
                        p.j,
                        port_matrix("B_ij", &Some(p.b_ij.clone()), nij)?,
                        port_matrix("B_ji", &Some(p.b_ji.clone()), nji)?,
                    );
                }
                assemble_port_coupling(&subs, &pc)
            }
        }
        .map_err(|e| Error::Parse(e.to_string()))?;
        let input = input_from_spec(&self.input, sys.m())?;
        Ok(Model {
            name: self.name.unwrap_or_else(|| "coupled-model".into()),
            sys,
            t_end: self.t_end,
            n: self.n,
            input,
        })
    }
}

/// Parses either file flavour; a `subsystems` key selects the coupled one.
pub fn parse_model(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("subsystems").is_some() {
        serde_json::from_value::<CoupledModelFile>(value)?.into_model()
    } else {
        serde_json::from_value::<ModelFile>(value)?.into_model()
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn model_to_json(m: &Model) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from_model(m))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE: &str = r#"{
        "partition": [1, 1],
        "E": [[1, 0], [0, 1]], "J": [[0, 15], [-15, 0]],
        "R": [[0.01, 0], [0, 0.01]], "Q": [[1, 0], [0, 1]],
        "B": [[0], [0]], "x0": [2, 2], "T": 0.5
    }"#;

    #[test]
    fn parses_monolithic_file() {
        let m = parse_model(SIMPLE).unwrap();
        assert_eq!(m.sys.n(), 2);
        assert_eq!(m.sys.j()[(0, 1)], 15.0);
        assert_eq!(m.input, Input::Signal(Signal::Zero));
        assert_eq!(m.n, None);
    }

    #[test]
    fn parses_coupled_file() {
        let text = r#"{
            "subsystems": [
                {"E": [[1]], "J": [[0]], "R": [[0.01]], "Q": [[1]], "B_hat": [[1]], "x0": [2]},
                {"E": [[1]], "J": [[0]], "R": [[0.01]], "Q": [[1]], "B_hat": [[1]], "x0": [2]}
            ],
            "C_hat": [[0, -15], [15, 0]],
            "T": 0.5, "N": 11
        }"#;
        let coupled = parse_model(text).unwrap();
        let mono = parse_model(SIMPLE).unwrap();
        assert_eq!(coupled.sys.j(), mono.sys.j());
        assert_eq!(coupled.n, Some(11));
    }

    #[test]
    fn parses_port_pairs() {
        let text = r#"{
            "subsystems": [
                {"E": [[1]], "J": [[0]], "R": [[0.01]], "Q": [[1]], "x0": [2]},
                {"E": [[1]], "J": [[0]], "R": [[0.01]], "Q": [[1]], "x0": [2]}
            ],
            "ports": [{"i": 0, "j": 1, "B_ij": [[15]], "B_ji": [[1]]}],
            "T": 0.5
        }"#;
        let m = parse_model(text).unwrap();
        assert_eq!(m.sys.j()[(0, 1)], 15.0);
        assert_eq!(m.sys.j()[(1, 0)], -15.0);
    }

    #[test]
    fn rejects_ragged_and_unknown() {
        let ragged = SIMPLE.replace("[[1, 0], [0, 1]], \"J\"", "[[1, 0], [0]], \"J\"");
        assert!(matches!(parse_model(&ragged), Err(Error::Parse(_))));
        let unknown = SIMPLE.replace("\"T\": 0.5", "\"T\": 0.5, \"bogus\": 1");
        assert!(matches!(parse_model(&unknown), Err(Error::Parse(_))));
        assert!(matches!(parse_model("{ not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn signal_and_sample_inputs() {
        let sig: InputSpec =
            serde_json::from_str(r#"{"signal": {"kind": "sine-product", "f1": 50, "f2": 500}}"#).unwrap();
        match sig {
            InputSpec::Signal(s) => {
                let t = 0.0013;
                let expected = (2.0 * PI * 50.0 * t).sin() * (2.0 * PI * 500.0 * t).sin();
                assert!((s.value(t) - expected).abs() < 1e-15);
            }
            _ => panic!("expected a signal"),
        }
        let text = SIMPLE.replace("\"T\": 0.5", "\"T\": 0.5, \"N\": 3, \"input\": {\"samples\": [[0], [1], [2]]}");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.input, Input::Samples(Matrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0])));
    }
}
