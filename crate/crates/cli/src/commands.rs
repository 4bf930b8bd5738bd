use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde_json::{json, Value};

use msequiv::analysis::{
    check_equivalence, find_steady_states, EquivalenceOptions, LiftSpec, SteadyState, SteadyStateOptions,
};
use msequiv::construction::{choose_parameters, NyquistCriterion, SearchOptions};
use msequiv::construction::{assemble_high_dim, ConstructionError, HighDimModel};
use msequiv::continuation::{continue_branch, ContinuationError, ContinuationOptions};
use msequiv::dynamics::{integrate_with, DynamicsError, IntegrationOptions};
use msequiv::frequency::{loopbreak, nyquist_curve, unstable_count_from_winding, NyquistOptions};
use msequiv::structure::{load_sign_matrix, StructureError};
use msequiv::{check_modular_structure, check_sign_consistency, load_model, GrnSystem, LowDimModel, ModelSpec, Parametric};

use crate::report::{InputDigest, RunReport, Status};
use crate::{Command, Multistart};

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    /// Printed to stdout.
    pub stdout: Option<String>,
    /// `(file name, CSV text)` written into the report directory.
    pub table: Option<(String, String)>,
}

impl Outcome {
    fn new(status: Status, result: Value) -> Self {
        Self {
            status,
            result,
            warnings: Vec::new(),
            error: None,
            stdout: None,
            table: None,
        }
    }
}

pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
    pub partial: Value,
}

type Res = Result<Outcome, Failure>;

trait Classify<T> {
    /// Bad input: exit status 2.
    fn input(self) -> Result<T, Failure>;
    /// Numerical or verification failure: exit status 1.
    fn failed(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            status: Status::InputError,
            error: e.into(),
            partial: Value::Null,
        })
    }

    fn failed(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            status: Status::VerificationFailure,
            error: e.into(),
            partial: Value::Null,
        })
    }
}

pub fn run(cmd: Command) -> (Result<Outcome, Failure>, RunReport) {
    let mut report = RunReport::new(cmd.name(), serde_json::to_value(&cmd).unwrap_or(Value::Null));
    let inputs: Vec<&Path> = match &cmd {
        Command::Check { model, sign_matrix } | Command::Construct { model, sign_matrix, .. } => {
            vec![model, sign_matrix]
        }
        Command::Equivalence { low, high, .. } => vec![low, high],
        Command::SteadyStates { model, .. }
        | Command::Nyquist { model, .. }
        | Command::Simulate { model, .. }
        | Command::Continue { model, .. } => vec![model],
    };
    for p in inputs {
        match InputDigest::of(p) {
            Ok(d) => report.inputs.push(d),
            Err(e) => {
                let f = Failure {
                    status: Status::InputError,
                    error: anyhow!("cannot read {}: {e}", p.display()),
                    partial: Value::Null,
                };
                return (Err(f), report);
            }
        }
    }
    let out = match cmd {
        Command::Check { model, sign_matrix } => check(&model, &sign_matrix),
        Command::Construct {
            model,
            sign_matrix,
            k,
            eps,
            auto,
            criterion,
            output,
            multistart,
        } => construct(&model, &sign_matrix, k, &eps, auto, &criterion, output.as_deref(), &multistart),
        Command::SteadyStates { model, multistart } => steady_states(&model, &multistart),
        Command::Equivalence {
            low,
            high,
            sign_samples,
            no_nyquist,
            multistart,
        } => equivalence(&low, &high, sign_samples, !no_nyquist, &multistart),
        Command::Nyquist {
            model,
            state_index,
            omega_max,
            multistart,
        } => nyquist(&model, state_index, omega_max, &multistart),
        Command::Simulate {
            model,
            x0,
            t_end,
            samples,
            rtol,
            atol,
        } => simulate(&model, &x0, t_end, samples, rtol, atol),
        Command::Continue {
            model,
            param,
            range,
            from_state,
            stop_after_folds,
            multistart,
        } => continuation(&model, &param, &range, from_state, stop_after_folds, &multistart),
    };
    if let Ok(o) = &out {
        report.error = o.error.clone();
    }
    (out, report)
}

fn load(path: &Path) -> Result<ModelSpec, Failure> {
    load_model(path).with_context(|| format!("loading {}", path.display())).input()
}

fn steady_opts(m: &Multistart) -> SteadyStateOptions {
    SteadyStateOptions {
        n_starts: m.starts,
        seed: m.seed,
        ..Default::default()
    }
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn check(model: &Path, sign_matrix: &Path) -> Res {
    let spec = load(model)?;
    let declared = spec.sign_matrix().is_some();
    let low = LowDimModel::new(spec);
    let s_low = low.sign_matrix().context("deriving the model's sign matrix").input()?;
    let s_high = load_sign_matrix(sign_matrix).input()?;
    let n = low.dim();
    if !s_high.is_square() {
        return Err(anyhow!("sign matrix is {}x{}, not square", s_high.rows(), s_high.cols())).input();
    }
    if n > s_high.rows() {
        return Err(anyhow!(
            "model has {n} variables but the sign matrix only {}; need n <= N",
            s_high.rows()
        ))
        .input();
    }
    let mut text = String::new();
    let assignment = match check_modular_structure(&s_high, n) {
        Ok(a) => a,
        Err(StructureError::Violations(v)) => {
            let listed: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            for l in &listed {
                let _ = writeln!(text, "violation: {l}");
            }
            let mut out = Outcome::new(
                Status::VerificationFailure,
                json!({"structure": {"ok": false, "violations": v}, "consistency": Value::Null}),
            );
            out.error = Some(format!("{} structural violation(s)", v.len()));
            out.stdout = Some(text);
            return Ok(out);
        }
        Err(e) => return Err(e).input(),
    };
    let consistency = check_sign_consistency(&s_low, &s_high, &assignment).input()?;
    let modules: Vec<Value> = (0..n)
        .map(|k| json!({"master": k + 1, "genes": one_based(assignment.module(k))}))
        .collect();
    let _ = writeln!(text, "structure: ok ({n} masters, {} genes)", s_high.rows());
    for k in 0..n {
        let genes: Vec<String> = assignment.module(k).iter().map(|g| format!("x{}", g + 1)).collect();
        let _ = writeln!(text, "module of x{}: [{}]", k + 1, genes.join(", "));
    }
    for v in &consistency.violations {
        let _ = writeln!(text, "violation: {v}");
    }
    let ok = consistency.is_consistent();
    let _ = writeln!(text, "sign consistency: {}", if ok { "ok" } else { "violated" });
    let mut out = Outcome::new(
        if ok { Status::Success } else { Status::VerificationFailure },
        json!({
            "masters": n,
            "genes": s_high.rows(),
            "modules": modules,
            "orphans": one_based(&assignment.orphans()),
            "low_sign_matrix": s_low.to_rows(),
            "low_sign_matrix_declared": declared,
            "structure": {"ok": true, "violations": []},
            "consistency": consistency,
        }),
    );
    if !declared {
        out.warnings
            .push("low-dimensional sign matrix inferred from sampled derivatives".to_string());
    }
    if !ok {
        out.error = Some(format!("{} sign-consistency violation(s)", consistency.violations.len()));
    }
    out.stdout = Some(text);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn construct(
    model: &Path,
    sign_matrix: &Path,
    k: Option<Vec<f64>>,
    eps: &[f64],
    auto: bool,
    criterion: &str,
    output: Option<&Path>,
    multistart: &Multistart,
) -> Res {
    let low = LowDimModel::new(load(model)?);
    let s_high = load_sign_matrix(sign_matrix).input()?;
    let n = low.dim();
    if n > s_high.rows() {
        return Err(anyhow!(
            "model has {n} variables but the sign matrix only {}; need n <= N",
            s_high.rows()
        ))
        .input();
    }
    let assignment = check_modular_structure(&s_high, n).input()?;
    let eps: Vec<f64> = match eps.len() {
        1 => vec![eps[0]; n],
        l if l == n => eps.to_vec(),
        l => return Err(anyhow!("--eps takes 1 or {n} values, got {l}")).input(),
    };

    let mut result = serde_json::Map::new();
    let (k, eps) = if auto {
        let criterion = match criterion {
            "tube" => NyquistCriterion::Tube,
            "winding" => NyquistCriterion::WindingMatch,
            other => return Err(anyhow!("unknown criterion '{other}' (tube or winding)")).input(),
        };
        let opts = SearchOptions {
            epsilon_start: eps.iter().copied().fold(f64::INFINITY, f64::min),
            criterion,
            steady: steady_opts(multistart),
            ..Default::default()
        };
        match choose_parameters(&low, &s_high, &assignment, &opts) {
            Ok(choice) => {
                let picked = (choice.k.clone(), choice.epsilon.clone());
                result.insert("search".into(), json!(choice));
                picked
            }
            Err(e @ ConstructionError::SearchExhausted { .. }) => return Err(e).failed(),
            Err(e) => return Err(e).input(),
        }
    } else {
        (k.expect("clap requires --K without --auto"), eps)
    };

    let high = assemble_high_dim(&low, &s_high, &assignment, &k, &eps).input()?;
    let gains: Vec<Value> = (n..assignment.total())
        .map(|i| {
            json!({
                "gene": i + 1,
                "master": assignment.master_of(i).map(|m| m + 1),
                "gamma": high.gains().lift_factor(i),
            })
        })
        .collect();
    let text = high
        .to_model_spec()
        .and_then(|s| s.to_toml_string())
        .context("writing the constructed model")
        .failed()?;
    result.insert("K".into(), json!(k));
    result.insert("epsilon".into(), json!(eps));
    result.insert("gains".into(), json!(gains));

    let mut out = Outcome::new(Status::Success, Value::Null);
    match output {
        Some(p) => {
            std::fs::write(p, &text)
                .with_context(|| format!("writing {}", p.display()))
                .input()?;
            result.insert("output".into(), json!(p.display().to_string()));
            out.stdout = Some(format!("wrote {}\n", p.display()));
        }
        None => {
            out.stdout = Some(text.clone());
        }
    }
    out.table = Some(("constructed.model".into(), text));
    out.result = Value::Object(result);
    Ok(out)
}

fn state_json(s: &SteadyState<f64>) -> Value {
    json!({
        "x": s.x,
        "residual": s.residual,
        "eigenvalues": s.eigenvalues.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
        "unstable_count": s.unstable_count,
        "on_imaginary_axis": s.on_imaginary_axis,
    })
}

fn states_csv(names: &[String], states: &[SteadyState<f64>]) -> String {
    let mut csv = format!("index,{},unstable_count,leading_re\n", names.join(","));
    for (i, s) in states.iter().enumerate() {
        let xs: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
        let lead = s.eigenvalues.first().map_or(f64::NAN, |l| l.re);
        let _ = writeln!(csv, "{},{},{},{}", i + 1, xs.join(","), s.unstable_count, lead);
    }
    csv
}

fn steady_states(model: &Path, multistart: &Multistart) -> Res {
    let m = LowDimModel::new(load(model)?);
    let states = find_steady_states(&m, &steady_opts(multistart));
    let csv = states_csv(m.spec().variables(), &states);
    let mut out = Outcome::new(
        Status::Success,
        json!({
            "count": states.len(),
            "unstable_counts": states.iter().map(|s| s.unstable_count).collect::<Vec<_>>(),
            "states": states.iter().map(state_json).collect::<Vec<_>>(),
        }),
    );
    if states.iter().any(|s| s.on_imaginary_axis) {
        out.warnings
            .push("a state has an eigenvalue on the imaginary axis; its classification is inconclusive".into());
    }
    out.stdout = Some(csv.clone());
    out.table = Some(("steady-states.csv".into(), csv));
    Ok(out)
}

fn equivalence(low: &Path, high: &Path, sign_samples: usize, nyquist: bool, multistart: &Multistart) -> Res {
    let low_m = LowDimModel::new(load(low)?);
    let high_spec = load(high)?;
    let lift = match high_spec.construction() {
        Some(rec) => {
            let rebuilt = HighDimModel::from_record(&low_m, rec)
                .context("rebuilding the construction recorded in the high-dimensional model")
                .input()?;
            LiftSpec::of(&rebuilt)
        }
        None if high_spec.dimension() == low_m.dim() => {
            let hm = LowDimModel::new(high_spec.clone());
            LiftSpec::identity(hm.sign_matrix().input()?)
        }
        None => bail_input(
            "the high-dimensional model has no [construction] section, so the steady-state lift is unknown",
        )?,
    };
    let high_m = LowDimModel::new(high_spec);
    let opts = EquivalenceOptions {
        steady: steady_opts(multistart),
        sign_samples,
        nyquist,
        ..Default::default()
    };
    let rep = check_equivalence(&low_m, &high_m, &lift, &opts).failed()?;
    let (lc, hc) = rep.unstable_counts();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "sign check: {} ({} samples, {} mismatches)",
        if rep.sign_check.passed { "pass" } else { "fail" },
        rep.sign_check.samples,
        rep.sign_check.mismatches
    );
    for p in &rep.pairs {
        let _ = writeln!(
            text,
            "pair {}: lift residual {:.2e}, unstable {} / {}{}",
            p.index + 1,
            p.lift_residual,
            p.low_unstable,
            p.high_unstable,
            p.nyquist
                .as_ref()
                .map(|n| format!(", windings {} / {}", n.low_winding, n.high_winding))
                .unwrap_or_default()
        );
    }
    let _ = writeln!(text, "verdict: {}", if rep.verdict { "equivalent" } else { "not equivalent" });
    let mut out = Outcome::new(
        if rep.verdict { Status::Success } else { Status::VerificationFailure },
        json!({"verdict": rep.verdict, "low_unstable_counts": lc, "high_unstable_counts": hc, "report": rep}),
    );
    if !rep.inconclusive_pairs.is_empty() {
        out.warnings.push(format!(
            "pairs {:?} have eigenvalues on the imaginary axis",
            one_based(&rep.inconclusive_pairs)
        ));
    }
    if !rep.verdict {
        out.error = Some("models are not multistability equivalent".into());
    }
    out.stdout = Some(text);
    Ok(out)
}

fn bail_input<T>(msg: &str) -> Result<T, Failure> {
    Err(anyhow!("{msg}")).input()
}

fn pick_state(states: &[SteadyState<f64>], index: usize) -> Result<&SteadyState<f64>, Failure> {
    if index == 0 || index > states.len() {
        return bail_input(&format!("state index {index} out of range: {} steady states found", states.len()));
    }
    Ok(&states[index - 1])
}

fn nyquist(model: &Path, state_index: usize, omega_max: Option<f64>, multistart: &Multistart) -> Res {
    let m = LowDimModel::new(load(model)?);
    let states = find_steady_states(&m, &steady_opts(multistart));
    let s = pick_state(&states, state_index)?;
    let sys = loopbreak(&m, &s.x).failed()?;
    let opts = NyquistOptions {
        omega_max,
        ..Default::default()
    };
    let curve = nyquist_curve(&sys, &opts).failed()?;
    let from_winding = unstable_count_from_winding(&curve);
    let agree = from_winding == s.unstable_count;
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).failed()?;
    let csv = String::from_utf8(csv).expect("CSV is UTF-8");
    let mut out = Outcome::new(
        if agree { Status::Success } else { Status::VerificationFailure },
        json!({
            "state_index": state_index,
            "state": state_json(s),
            "winding": curve.winding,
            "unstable_from_winding": from_winding,
            "unstable_from_eigenvalues": s.unstable_count,
            "omega_max": curve.omega_max,
            "min_distance": curve.min_distance,
            "tail_error": curve.tail_error(),
            "points": curve.omega.len(),
        }),
    );
    if !agree {
        out.error = Some(format!(
            "winding number gives {from_winding} unstable modes, eigenvalues give {}",
            s.unstable_count
        ));
    }
    out.stdout = Some(csv.clone());
    out.table = Some(("nyquist.csv".into(), csv));
    Ok(out)
}

fn simulate(model: &Path, x0: &[f64], t_end: f64, samples: usize, rtol: f64, atol: f64) -> Res {
    let m = LowDimModel::new(load(model)?);
    let opts = IntegrationOptions {
        rtol,
        atol,
        samples,
        ..Default::default()
    };
    let tr = match integrate_with(&m, x0, t_end, &opts) {
        Ok(t) => t,
        Err(e @ (DynamicsError::InvalidInitial { .. } | DynamicsError::InvalidEnd(_))) => return Err(e).input(),
        Err(e) => return Err(e).failed(),
    };
    let mut csv = Vec::new();
    tr.write_csv(&mut csv, m.spec().variables()).failed()?;
    let csv = String::from_utf8(csv).expect("CSV is UTF-8");
    let mut out = Outcome::new(
        Status::Success,
        json!({
            "endpoint": tr.last(),
            "t_end": t_end,
            "samples": tr.times.len(),
            "steps": tr.stats.steps,
            "rejected": tr.stats.rejected,
            "evaluations": tr.stats.evaluations,
            "clamps": tr.stats.clamps,
        }),
    );
    if tr.stats.clamps > 0 {
        out.warnings
            .push(format!("{} step(s) produced negative components that were reset to 0", tr.stats.clamps));
    }
    out.stdout = Some(csv.clone());
    out.table = Some(("simulate.csv".into(), csv));
    Ok(out)
}

fn parse_range(s: &str) -> anyhow::Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("range '{s}' is not of the form start:end"))?;
    let a: f64 = a.trim().parse().with_context(|| format!("range start '{a}'"))?;
    let b: f64 = b.trim().parse().with_context(|| format!("range end '{b}'"))?;
    if !(a.is_finite() && b.is_finite()) || a == b {
        bail!("range '{s}' must have two different finite ends");
    }
    Ok((a, b))
}

fn continuation(
    model: &Path,
    param: &str,
    range: &str,
    from_state: usize,
    stop_after_folds: Option<usize>,
    multistart: &Multistart,
) -> Res {
    let (lo, hi) = parse_range(range).input()?;
    let mut m = LowDimModel::new(load(model)?);
    let idx = m
        .parameter_index(param)
        .ok_or_else(|| anyhow!("model has no parameter '{param}' (has: {})", m.parameter_names().join(", ")))
        .input()?;
    m.set_parameter(idx, lo);
    let states = find_steady_states(&m, &steady_opts(multistart));
    let seed = pick_state(&states, from_state)?;
    let opts = ContinuationOptions {
        stop_after_folds,
        ..Default::default()
    };
    let names = m.spec().variables().to_vec();
    let (branch, error) = match continue_branch(&m, param, (lo, hi), &seed.x, &opts) {
        Ok(b) => (b, None),
        Err(ContinuationError::StepFailure {
            partial,
            param: at,
            min_step,
            ..
        }) => (
            *partial,
            Some(format!("corrector failed with step below {min_step:e} at {param} = {at}")),
        ),
        Err(e) => return Err(anyhow!("{e}")).failed(),
    };
    let mut csv = Vec::new();
    branch.write_csv(&mut csv, &names).failed()?;
    let csv = String::from_utf8(csv).expect("CSV is UTF-8");
    let last_fold = branch.folds.iter().map(|f| f.param).fold(None, |m: Option<f64>, p| {
        Some(m.map_or(p, |v| v.max(p)))
    });
    let mut out = Outcome::new(
        if error.is_some() { Status::VerificationFailure } else { Status::Success },
        json!({
            "parameter": param,
            "range": [lo, hi],
            "seed": seed.x,
            "points": branch.points.len(),
            "termination": branch.termination,
            "folds": branch.folds,
            "largest_fold": last_fold,
            "other_bifurcations": branch.events,
        }),
    );
    for f in &branch.folds {
        eprintln!(
            "fold at {param} = {:.4} (unstable {} -> {})",
            f.param, f.unstable_before, f.unstable_after
        );
    }
    if !branch.events.is_empty() {
        out.warnings.push(format!(
            "{} stability change(s) away from folds (other bifurcation)",
            branch.events.len()
        ));
    }
    out.error = error;
    out.stdout = Some(csv.clone());
    out.table = Some(("continue.csv".into(), csv));
    Ok(out)
}
