//! Preconfigured experiments. Each writes its tables to `<out>/<name>/`.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use phsplit::iteration::{
    contraction_factor, jacobi_error_predictor, jacobi_run, lm_run, InitialGuess, JacobiConfig, LMConfig, Z0Policy,
};
use phsplit::linalg::{Matrix, Vector};
use phsplit::models::{build, Input, Model, ModelSpec};
use phsplit::solver::reference_solution;
use phsplit::{io::Signal, PHDae, SolverScheme, Waveform};

use crate::commands::{
    check_valid, create_out, describe, jacobi_summary, lm_summary, write_report, write_summary, write_waveform, Summary,
    DEFAULT_OUT,
};
use crate::{Failure, OutArg};

pub const NAMES: [&str; 6] = [
    "jacobi-ratio",
    "jacobi-overflow",
    "decoupled",
    "two-mass",
    "circuit",
    "counterexample",
];

pub fn run(name: &str, out: &OutArg) -> Result<(), Failure> {
    let dir = out.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)).join(name);
    create_out(&dir)?;
    let mut summary = Summary::default();
    summary.add("demo", name);
    match name {
        "jacobi-ratio" => jacobi_ratio(&dir, &mut summary)?,
        "jacobi-overflow" => jacobi_overflow(&dir, &mut summary)?,
        "decoupled" => {
            let model = build(&ModelSpec::named("scaled-2x2").param("nu", 0.0))?;
            let rate = contraction_factor(&model.sys, 1.0, 1.0, 1.0)?;
            let mut cfg = LMConfig::new(rate.lambda_star, 1.0, 1.0);
            cfg.max_iters = 20;
            lm_demo(&dir, &mut summary, &model, cfg)?;
        }
        "two-mass" => {
            let model = build(&ModelSpec::named("two-mass"))?;
            let mut cfg = LMConfig::new(1.5, 2.0, 0.5);
            cfg.omega = Some(2.2);
            cfg.max_iters = 50;
            lm_demo(&dir, &mut summary, &model, cfg)?;
        }
        "circuit" => {
            let model = build(&ModelSpec::named("rlc-circuit"))?;
            let mut cfg = LMConfig::new(1.2, 1.0, 0.2);
            cfg.max_iters = 30;
            cfg.tol = 0.0;
            lm_demo(&dir, &mut summary, &model, cfg)?;
        }
        "counterexample" => counterexample(&dir, &mut summary)?,
        other => return Err(Failure::Usage(format!("unknown demo `{other}`"))),
    }
    write_summary(&dir, &summary)
}

fn lm_demo(dir: &std::path::Path, s: &mut Summary, model: &Model, cfg: LMConfig) -> Result<(), Failure> {
    let scheme = model.default_scheme()?;
    let u = model.input_waveform(scheme.grid)?;
    check_valid(model, &u)?;
    describe(s, model, scheme);
    write_waveform(&dir.join("reference.csv"), &reference_solution(&model.sys, &u, 1, scheme)?)?;
    let (x, rep) = lm_run(&model.sys, &u, &cfg, scheme)?;
    lm_summary(s, model, &cfg, &rep)?;
    write_waveform(&dir.join("iterate.csv"), &x)?;
    write_report(&dir.join("iteration.csv"), &rep)
}

fn jacobi_ratio(dir: &std::path::Path, s: &mut Summary) -> Result<(), Failure> {
    let (t_end, n, tau) = (0.5, 10001, 0.01);
    let model = build(&ModelSpec::named("simple-2x2").horizon(t_end, n))?;
    let scheme = model.default_scheme()?;
    let u = model.input_waveform(scheme.grid)?;
    let x_ref = reference_solution(&model.sys, &u, 1, scheme)?;
    let bump = Waveform::from_fn(t_end, n, 2, |t| Vector::from_element(2, t * (-tau * t).exp()))?;
    let mut cfg = JacobiConfig::new(t_end);
    cfg.max_sweeps = 40;
    cfg.tol = 0.0;
    cfg.initial_guess = InitialGuess::Given(Waveform::combine(1.0, &x_ref, 1.0, &bump)?);
    let (x, rep) = jacobi_run(&model.sys, &u, &cfg, scheme)?;
    describe(s, &model, scheme);
    jacobi_summary(s, &model, &cfg, &rep);
    write_waveform(&dir.join("reference.csv"), &x_ref)?;
    write_waveform(&dir.join("iterate.csv"), &x)?;
    write_report(&dir.join("iteration.csv"), &rep)?;
    let mut ratios = String::from("k,measured,predicted\n");
    for (k, r) in rep.x_sup_ratios().iter().enumerate() {
        let _ = writeln!(ratios, "{k},{r:.16e},{:.16e}", 7.5 / (k + 2) as f64);
    }
    fs::write(dir.join("ratios.csv"), ratios)?;
    Ok(())
}

fn jacobi_overflow(dir: &std::path::Path, s: &mut Summary) -> Result<(), Failure> {
    let limit = f32::MAX as f64;
    let mut table = String::from("k,ln_value,value,ratio\n");
    let mut first = None;
    for k in 0..=60 {
        let p = jacobi_error_predictor(15.0, 0.01, 10.0, 1.0, k);
        let _ = writeln!(table, "{k},{:.16e},{:.16e},{:.16e}", p.ln_value, p.value, p.ratio);
        if first.is_none() && p.ln_value > limit.ln() {
            first = Some(k);
        }
    }
    fs::write(dir.join("predictor.csv"), table)?;
    s.add("nu", 15).add("tau", 0.01).add("T", 10);
    s.add("first_k_above_f32_max", first.map_or("none".into(), |k| k.to_string()));
    Ok(())
}

fn counterexample(dir: &std::path::Path, s: &mut Summary) -> Result<(), Failure> {
    let n = 201;
    let sys = PHDae::new(
        Matrix::zeros(2, 2),
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        Matrix::zeros(2, 2),
        Matrix::identity(2, 2),
        Matrix::zeros(2, 1),
        Vector::zeros(2),
        vec![1, 1],
    )?;
    let model = Model {
        name: "degenerate".into(),
        sys,
        t_end: 1.0,
        n: Some(n),
        input: Input::Signal(Signal::Zero),
    };
    let scheme: SolverScheme = model.default_scheme()?;
    let u = model.input_waveform(scheme.grid)?;
    let valid = check_valid(&model, &u);
    describe(s, &model, scheme);
    s.add("validation", valid.as_ref().err().map_or("passed".into(), |f| match f {
        Failure::Validation(m) => m.clone(),
        _ => "error".into(),
    }));
    let mut cfg = LMConfig::new(1.0, 1.0, 0.5);
    cfg.z0 = Z0Policy::Given(Waveform::from_fn(1.0, n, 2, |t| {
        Vector::from_vec(vec![1.0 + t, (3.0 * t).cos()])
    })?);
    cfg.max_iters = 20;
    cfg.tol = 0.0;
    let (x, rep) = lm_run(&model.sys, &u, &cfg, scheme)?;
    lm_summary(s, &model, &cfg, &rep)?;
    write_waveform(&dir.join("iterate.csv"), &x)?;
    write_report(&dir.join("iteration.csv"), &rep)
}
