use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use phsplit::iteration::{contraction_factor, jacobi_run, lm_run, rate_table, IterationReport};
use phsplit::linalg::{spectral_norm, Tolerance};
use phsplit::models::Model;
use phsplit::solver::reference_solution;
use phsplit::{validate as validate_model, SchemeKind, SolverScheme, Waveform};

use crate::config::{jacobi_config, lm_config, merge, ExperimentConfig, IterationChoice, ModelRef};
use crate::{Failure, ModelArgs, RatesArgs, RunArgs};

pub const DEFAULT_OUT: &str = "phsplit-out";

/// Ordered `key: value` lines written to `summary.txt`.
#[derive(Default)]
pub struct Summary(Vec<(String, String)>);

impl Summary {
    pub fn add(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }
}

pub fn create_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_waveform(path: &Path, w: &Waveform) -> Result<(), Failure> {
    w.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn write_report(path: &Path, r: &IterationReport) -> Result<(), Failure> {
    r.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn write_summary(dir: &Path, s: &Summary) -> Result<(), Failure> {
    let text = s.render();
    fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// Plain notation for moderate magnitudes, scientific otherwise.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:.15e}")
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn scheme_name(kind: SchemeKind) -> &'static str {
    match kind {
        SchemeKind::ImplicitEuler => "implicit-euler",
        SchemeKind::Trapezoidal => "trapezoidal",
    }
}

pub fn describe(s: &mut Summary, model: &Model, scheme: SolverScheme) {
    s.add("model", &model.name)
        .add("n", model.sys.n())
        .add("scheme", scheme_name(scheme.kind))
        .add("T", num(scheme.grid.t_end))
        .add("N", scheme.grid.n)
        .add("h", num(scheme.step()));
}

/// Exit 1 with the validation messages unless every check passes.
pub fn check_valid(model: &Model, u: &Waveform) -> Result<(), Failure> {
    let report = validate_model(&model.sys, u, Tolerance::default())?;
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "model `{}` failed validation: {}",
            model.name,
            report.messages.join("; ")
        )))
    }
}

fn grid_for(model: &Model, kind: SchemeKind) -> Result<SolverScheme, Failure> {
    let mut scheme = model.default_scheme()?;
    scheme.kind = kind;
    Ok(scheme)
}

fn resolve_model(args: &ModelArgs, fallback: Option<&ModelRef>) -> Result<Model, Failure> {
    let r = match (&args.model, fallback) {
        (Some(m), _) => ModelRef::from_arg(m),
        (None, Some(r)) => r.clone(),
        (None, None) => return Err(Failure::Usage("no model given (use --model or a config file)".into())),
    };
    let mut model = r.resolve(&args.params)?;
    if let Some(t) = args.t_end {
        if !(t > 0.0) {
            return Err(Failure::Usage(format!("T must be positive, got {t}")));
        }
        model.t_end = t;
    }
    if let Some(n) = args.n {
        model.n = Some(n);
    }
    Ok(model)
}

pub fn validate(model: &str, params: &[(String, f64)]) -> Result<(), Failure> {
    let model = ModelRef::from_arg(model).resolve(params)?;
    let scheme = model.default_scheme()?;
    let u = model.input_waveform(scheme.grid)?;
    let report = validate_model(&model.sys, &u, Tolerance::default())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::Validation(report.messages.join("; ")))
    }
}

pub fn run(args: &RunArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut model_args = args.model.clone();
    model_args.t_end = model_args.t_end.or(file.t_end);
    model_args.n = model_args.n.or(file.n);
    let model = resolve_model(&model_args, file.model.as_ref())?;
    let kind = args.scheme.map(SchemeKind::from).or(file.scheme).unwrap_or_default();
    let scheme = grid_for(&model, kind)?;
    let u = model.input_waveform(scheme.grid)?;

    let from_file = |want: fn(&IterationChoice) -> Option<&BTreeMap<String, f64>>| {
        file.iteration.as_ref().and_then(want).cloned().unwrap_or_default()
    };
    let choice = if let Some(pairs) = &args.jacobi {
        let mut m = from_file(|c| if let IterationChoice::Jacobi(m) = c { Some(m) } else { None });
        merge(&mut m, pairs);
        IterationChoice::Jacobi(m)
    } else if let Some(pairs) = &args.lm {
        let mut m = from_file(|c| if let IterationChoice::Lm(m) = c { Some(m) } else { None });
        merge(&mut m, pairs);
        IterationChoice::Lm(m)
    } else if args.none {
        IterationChoice::None
    } else {
        file.iteration.clone().unwrap_or(IterationChoice::None)
    };
    let refine = args.refine.or(file.reference_refine).unwrap_or(1);
    if refine == 0 {
        return Err(Failure::Usage("refine must be at least 1".into()));
    }
    let out: PathBuf = args
        .out
        .out
        .clone()
        .or(file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    if !args.force {
        check_valid(&model, &u)?;
    }
    create_out(&out)?;
    let mut summary = Summary::default();
    describe(&mut summary, &model, scheme);
    summary.add("reference_refine", refine);
    let reference = reference_solution(&model.sys, &u, refine, scheme)?;
    write_waveform(&out.join("reference.csv"), &reference)?;

    match choice {
        IterationChoice::None => {
            let bal = model.sys.energy_balance(&reference, &u)?;
            summary
                .add("method", "none")
                .add("dissipation_residual", num(bal.residual))
                .add("supply_scale", num(bal.supply_scale));
        }
        IterationChoice::Jacobi(map) => {
            let mut cfg = jacobi_config(map, scheme.grid.t_end)?;
            cfg.reference_refine = Some(refine);
            let (x, rep) = jacobi_run(&model.sys, &u, &cfg, scheme)?;
            jacobi_summary(&mut summary, &model, &cfg, &rep);
            write_waveform(&out.join("iterate.csv"), &x)?;
            write_report(&out.join("iteration.csv"), &rep)?;
        }
        IterationChoice::Lm(map) => {
            let mut cfg = lm_config(map, &model)?;
            cfg.reference_refine = Some(refine);
            let (x, rep) = lm_run(&model.sys, &u, &cfg, scheme)?;
            lm_summary(&mut summary, &model, &cfg, &rep)?;
            write_waveform(&out.join("iterate.csv"), &x)?;
            write_report(&out.join("iteration.csv"), &rep)?;
        }
    }
    write_summary(&out, &summary)
}

pub fn jacobi_summary(s: &mut Summary, model: &Model, cfg: &phsplit::iteration::JacobiConfig, rep: &IterationReport) {
    let last = rep.last();
    s.add("method", "jacobi")
        .add("H", num(cfg.window))
        .add("J_o_norm", num(spectral_norm(&model.sys.split_j().j_o)))
        .add("sweeps", rep.records.len() - 1)
        .add("converged_at", opt(rep.converged_at))
        .add("monotone_x_sup", rep.monotone_z)
        .add("final_err_x_sup", num(last.err_x_sup))
        .add("final_err_x_l2", num(last.err_x_l2));
}

pub fn lm_summary(
    s: &mut Summary,
    model: &Model,
    cfg: &phsplit::iteration::LMConfig,
    rep: &IterationReport,
) -> Result<(), Failure> {
    let rate = contraction_factor(&model.sys, cfg.alpha, cfg.mu, cfg.lambda)?;
    let last = rep.last();
    s.add("method", "lions-mercier")
        .add("lambda", num(cfg.lambda))
        .add("mu", num(cfg.mu))
        .add("omega", num(cfg.omega()))
        .add("alpha", num(cfg.alpha))
        .add("rank_condition", rate.rank_condition_holds)
        .add("q", num(rate.q))
        .add("lambda_star", num(rate.lambda_star))
        .add("q_star", num(rate.q_star))
        .add("iterations", rep.records.len() - 1)
        .add("converged_at", opt(rep.converged_at))
        .add("monotone_z", rep.monotone_z)
        .add("x_bound_ok", rep.x_bound_ok)
        .add("final_err_z_l2w", num(last.err_z_l2w))
        .add("final_err_x_l2w", num(last.err_x_l2w));
    Ok(())
}

pub fn rates(args: &RatesArgs) -> Result<(), Failure> {
    let model = resolve_model(&args.model, None)?;
    let rate = contraction_factor(&model.sys, args.alpha, args.mu, 1.0)?;
    if !rate.rank_condition_holds {
        eprintln!("warning: rank condition rk[μE (1-α)R] = n fails; q = 1 for every λ");
    }
    let star = rate.lambda_star;
    let lo = args.lambda_min.unwrap_or(star / 10.0);
    let hi = args.lambda_max.unwrap_or(star * 10.0);
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || args.points == 0 {
        return Err(Failure::Usage(format!(
            "need 0 < lambda-min <= lambda-max and points >= 1 (got {lo}, {hi}, {})",
            args.points
        )));
    }
    let lambdas: Vec<f64> = if args.points == 1 {
        vec![lo]
    } else {
        let step = (hi / lo).ln() / (args.points - 1) as f64;
        (0..args.points).map(|i| lo * (step * i as f64).exp()).collect()
    };
    let table = rate_table(&model.sys, args.alpha, args.mu, &lambdas)?;
    println!("lambda,q");
    for (l, q) in table {
        println!("{l:.16e},{q:.16e}");
    }
    println!("*{star:.16e},{:.16e}", rate.q_star);
    Ok(())
}
