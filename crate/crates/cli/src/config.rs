//! Experiment configuration: a JSON file whose every field can also be set
//! (and overridden) on the command line.
//!
//! ```json
//! {
//!   "model": "two-mass",
//!   "scheme": "trapezoidal",
//!   "T": 10.0,
//!   "iteration": { "lm": { "lambda": 1.5, "mu": 2, "omega": 2.2, "alpha": 0.5 } },
//!   "reference_refine": 1,
//!   "output_dir": "out"
//! }
//! ```
//!
//! `model` is a built-in name, `{ "name": ..., "params": {...} }` or
//! `{ "file": "path/to/model.json" }`. `iteration` is `"none"`,
//! `{ "jacobi": {...} }` or `{ "lm": {...} }` with the keys accepted by
//! `--jacobi` and `--lm`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phsplit::io::load_model;
use phsplit::iteration::{contraction_factor, JacobiConfig, LMConfig};
use phsplit::models::{build, Model, ModelSpec, MODEL_NAMES};
use phsplit::SchemeKind;
use serde::Deserialize;

use crate::Failure;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelRef>,
    pub scheme: Option<SchemeKind>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub iteration: Option<IterationChoice>,
    pub reference_refine: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    File { file: PathBuf },
    Spec(ModelSpec),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationChoice {
    None,
    Jacobi(BTreeMap<String, f64>),
    Lm(BTreeMap<String, f64>),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

/// `key=value` with a numeric value.
pub fn parse_pair(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let value = v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), value))
}

pub fn merge(base: &mut BTreeMap<String, f64>, pairs: &[(String, f64)]) {
    for (k, v) in pairs {
        base.insert(k.clone(), *v);
    }
}

impl ModelRef {
    /// A built-in name, otherwise a path to a model file.
    pub fn from_arg(s: &str) -> Self {
        if MODEL_NAMES.contains(&s) {
            ModelRef::Name(s.to_string())
        } else {
            ModelRef::File { file: PathBuf::from(s) }
        }
    }

    pub fn resolve(&self, params: &[(String, f64)]) -> Result<Model, Failure> {
        let spec = match self {
            ModelRef::Name(name) => {
                if !MODEL_NAMES.contains(&name.as_str()) {
                    return Err(Failure::Usage(format!(
                        "unknown model `{name}` (built-in models: {})",
                        MODEL_NAMES.join(", ")
                    )));
                }
                ModelSpec::named(name)
            }
            ModelRef::Spec(spec) => spec.clone(),
            ModelRef::File { file } => {
                if !params.is_empty() {
                    return Err(Failure::Usage("--param only applies to built-in models".into()));
                }
                if !file.exists() {
                    return Err(Failure::Usage(format!(
                        "`{}` is neither a built-in model ({}) nor an existing file",
                        file.display(),
                        MODEL_NAMES.join(", ")
                    )));
                }
                return load_model(file).map_err(Failure::from);
            }
        };
        let mut spec = spec;
        merge(&mut spec.params, params);
        build(&spec).map_err(Failure::from)
    }
}

fn take(map: &mut BTreeMap<String, f64>, key: &str) -> Option<f64> {
    map.remove(key)
}

fn count(map: &mut BTreeMap<String, f64>, key: &str) -> Result<Option<usize>, Failure> {
    match take(map, key) {
        None => Ok(None),
        Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
        Some(v) => Err(Failure::Usage(format!("`{key}` must be a nonnegative integer, got {v}"))),
    }
}

fn finish(map: BTreeMap<String, f64>, scheme: &str, allowed: &str) -> Result<(), Failure> {
    match map.keys().next() {
        None => Ok(()),
        Some(k) => Err(Failure::Usage(format!("unknown {scheme} key `{k}` (expected {allowed})"))),
    }
}

/// Keys: `H`, `max_sweeps`, `tol`.
pub fn jacobi_config(mut map: BTreeMap<String, f64>, t_end: f64) -> Result<JacobiConfig, Failure> {
    let mut cfg = JacobiConfig::new(take(&mut map, "H").unwrap_or(t_end));
    if let Some(k) = count(&mut map, "max_sweeps")? {
        cfg.max_sweeps = k;
    }
    if let Some(t) = take(&mut map, "tol") {
        cfg.tol = t;
    }
    finish(map, "--jacobi", "H, max_sweeps, tol")?;
    Ok(cfg)
}

/// Keys: `lambda`, `mu`, `omega`, `alpha`, `max_iters`, `tol`. Without
/// `lambda` the optimal `λ* = 1/‖K‖` is used.
pub fn lm_config(mut map: BTreeMap<String, f64>, model: &Model) -> Result<LMConfig, Failure> {
    let mu = take(&mut map, "mu").unwrap_or(1.0);
    let alpha = take(&mut map, "alpha").unwrap_or(0.5);
    let lambda = match take(&mut map, "lambda") {
        Some(l) => l,
        None => contraction_factor(&model.sys, alpha, mu, 1.0)?.lambda_star,
    };
    let mut cfg = LMConfig::new(lambda, mu, alpha);
    cfg.omega = take(&mut map, "omega");
    if let Some(k) = count(&mut map, "max_iters")? {
        cfg.max_iters = k;
    }
    if let Some(t) = take(&mut map, "tol") {
        cfg.tol = t;
    }
    finish(map, "--lm", "lambda, mu, omega, alpha, max_iters, tol")?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("mu=2").unwrap(), ("mu".to_string(), 2.0));
        assert_eq!(parse_pair(" H = 0.25").unwrap(), ("H".to_string(), 0.25));
        assert!(parse_pair("mu").is_err());
        assert!(parse_pair("mu=two").is_err());
    }

    #[test]
    fn config_shapes() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"model": {"name": "two-mass", "params": {"k": 3}}, "iteration": {"lm": {"mu": 2}}, "T": 5}"#,
        )
        .unwrap();
        assert!(matches!(c.model, Some(ModelRef::Spec(ref s)) if s.params["k"] == 3.0));
        assert_eq!(c.iteration, Some(IterationChoice::Lm([("mu".to_string(), 2.0)].into())));
        let c: ExperimentConfig = serde_json::from_str(r#"{"model": {"file": "m.json"}, "iteration": "none"}"#).unwrap();
        assert!(matches!(c.model, Some(ModelRef::File { .. })));
        assert_eq!(c.iteration, Some(IterationChoice::None));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"modle": "two-mass"}"#).is_err());
    }

    #[test]
    fn lm_keys() {
        let model = build(&ModelSpec::named("two-mass")).unwrap();
        let cfg = lm_config([("lambda".into(), 1.5), ("omega".into(), 2.2)].into(), &model).unwrap();
        assert_eq!((cfg.lambda, cfg.mu, cfg.alpha, cfg.omega), (1.5, 1.0, 0.5, Some(2.2)));
        let cfg = lm_config(BTreeMap::new(), &model).unwrap();
        let r = contraction_factor(&model.sys, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(cfg.lambda, r.lambda_star);
        assert!(matches!(lm_config([("beta".into(), 1.0)].into(), &model), Err(Failure::Usage(_))));
        assert!(matches!(
            jacobi_config([("max_sweeps".into(), 2.5)].into(), 1.0),
            Err(Failure::Usage(_))
        ));
    }
}
