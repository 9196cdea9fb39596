//! Command line front end: analyze, indist, whatif, models, trace.

use crate::error::{Error, Result};
use crate::ident::{identifiability, IdentifiabilityResult};
use crate::indist::{
    certify_indistinguishability, simulate, single_symmetry_recovery, symmetry_flow, transform, FlowSpec, FlowSystem,
    Interp, Measurement, DEFAULT_TOL,
};
use crate::liegeo::RankOracle;
use crate::model::{builtin, builtin_names, parse_model_json, GeneralModel, OdeModel};
use crate::symexpr::{parse, Mode, DEFAULT_SEED, DEFAULT_TRIALS};
use crate::uio::Options;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// τ values used by `indist` when none are given.
pub const DEFAULT_TAUS: [f64; 4] = [-1.0, -0.1, 0.1, 1.0];

#[derive(Parser, Debug)]
#[command(name = "lieident", version, about = "Identifiability and unknown-input observability of nonlinear ODE models")]
struct Cli {
    /// Seed of the random evaluation points.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random points per rank or zero test.
    #[arg(long, global = true, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Evaluate in floating point only.
    #[arg(long, global = true, conflicts_with = "exact")]
    float: bool,
    /// Evaluate in exact rationals only.
    #[arg(long, global = true)]
    exact: bool,
    /// Relative tolerance of the numeric certification.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Fixed output step for simulations (chosen automatically otherwise).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Directory for reports, traces and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in model name (see `models`).
    #[arg(long, conflicts_with = "file")]
    builtin: Option<String>,
    /// JSON model file.
    file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Observability codistribution, identifiability verdicts and symmetries.
    Analyze {
        #[command(flatten)]
        src: Source,
    },
    /// Integrate a symmetry flow and certify output invariance.
    Indist {
        #[command(flatten)]
        src: Source,
        #[arg(long, visible_alias = "profile")]
        scenario: Option<String>,
        /// 1-based index of the state symmetry.
        #[arg(long, default_value_t = 1)]
        sym: usize,
        /// Comma separated group parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        taus: Option<Vec<f64>>,
        /// Constant offset added to the transformed unknown inputs (control case).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        perturb: f64,
    },
    /// Effect of an extra output or of one extra measurement.
    Whatif {
        #[command(flatten)]
        src: Source,
        /// Extra output expression over the state.
        #[arg(long)]
        add_output: Vec<String>,
        /// STATE@T or STATE@T=VALUE.
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, visible_alias = "profile")]
        scenario: Option<String>,
        #[arg(long)]
        sym: Option<usize>,
        /// Group parameter of the synthetic estimate the measurement corrects.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        disguise: f64,
    },
    /// List the built-in models.
    Models,
    /// Pretty-print a trace file written by `analyze --out`.
    Trace { file: PathBuf },
}

pub fn run(args: &[String]) -> CliOutput {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    CliOutput { code: 0, stdout: e.to_string().trim_end().to_string(), stderr: String::new() }
                }
                _ => CliOutput {
                    code: 2,
                    stdout: String::new(),
                    stderr: json!({"error": "UsageError", "message": e.to_string().trim_end()}).to_string(),
                },
            };
        }
    };
    match dispatch(&cli) {
        Ok((code, stdout)) => CliOutput { code, stdout, stderr: String::new() },
        Err(e) => CliOutput { code: e.exit_code(), stdout: String::new(), stderr: e.to_json().to_string() },
    }
}

fn dispatch(cli: &Cli) -> Result<(i32, String)> {
    match &cli.cmd {
        Cmd::Analyze { src } => analyze(cli, src),
        Cmd::Indist { src, scenario, sym, taus, perturb } => indist(cli, src, scenario.as_deref(), *sym, taus.as_deref(), *perturb),
        Cmd::Whatif { src, add_output, measure, scenario, sym, disguise } => {
            match (add_output.is_empty(), measure) {
                (false, None) => whatif_output(cli, src, add_output),
                (true, Some(m)) => whatif_measure(cli, src, m, scenario.as_deref(), *sym, *disguise),
                _ => Err(Error::Validation("whatif takes either --add-output or --measure".into())),
            }
        }
        Cmd::Models => Ok((0, models(cli))),
        Cmd::Trace { file } => trace(cli, file),
    }
}

fn options(cli: &Cli) -> Options {
    let mode = if cli.float {
        Mode::Float
    } else if cli.exact {
        Mode::Exact
    } else {
        Mode::Auto
    };
    Options { oracle: RankOracle::new(cli.trials, cli.seed, mode), ..Options::default() }
}

fn load(src: &Source) -> Result<GeneralModel> {
    match (&src.builtin, &src.file) {
        (Some(name), None) => builtin(name),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e)))?;
            parse_model_json(&text)
        }
        _ => Err(Error::Validation("give a model file or --builtin NAME".into())),
    }
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {}", dir.display(), e)))?;
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {}", p.display(), e)))?;
    Ok(p)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json")
}

fn analyze(cli: &Cli, src: &Source) -> Result<(i32, String)> {
    let model = load(src)?;
    let sys = model.to_affine()?;
    let res = identifiability(&sys, &options(cli))?;
    let trace_path = match &cli.out {
        Some(dir) => Some(write_file(dir, "trace.json", &pretty(&Value::Array(res.obs.trace.clone())))?),
        None => None,
    };
    let mut report = json!({
        "tool": "lieident",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cli.seed,
        "trials": cli.trials,
        "digest": sys.digest(),
        "trace": trace_path.as_ref().map(|p| p.display().to_string()),
    });
    if let (Value::Object(a), Value::Object(b)) = (&mut report, res.report()) {
        a.extend(b);
    }
    if let Some(dir) = &cli.out {
        write_file(dir, "report.json", &pretty(&report))?;
    }
    Ok((0, if cli.json { pretty(&report) } else { analysis_text(&sys, &res) }))
}

fn yes_no(b: bool, yes: &str, no: &str) -> String {
    if b { yes.into() } else { no.into() }
}

fn analysis_text(sys: &OdeModel, res: &IdentifiabilityResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model {} ({})", sys.name, sys.digest());
    let _ = writeln!(s, "observability codistribution: dim {} of {}", res.obs.dim(), res.obs.system.n());
    for (n, b) in &res.obs.observable {
        let _ = writeln!(s, "  {:<12} {}", n, yes_no(*b, "observable", "unobservable"));
    }
    if !res.constants.is_empty() {
        let _ = writeln!(s, "constant parameters:");
        for (n, b) in &res.constants {
            let _ = writeln!(s, "  {:<12} {}", n, yes_no(*b, "identifiable", "not identifiable"));
        }
    }
    if !res.tv_params.is_empty() {
        let _ = writeln!(s, "time-varying parameters and unknown inputs:");
        for p in &res.tv_params {
            let _ = writeln!(s, "  {:<12} {}", p.name, yes_no(p.identifiable, "identifiable", "not identifiable"));
        }
    }
    let _ = writeln!(s, "state symmetries: {}", res.state_symmetries.len());
    for (i, x) in res.state_symmetries.iter().enumerate() {
        let comps: Vec<String> =
            res.obs.system.states.iter().zip(x).filter(|(_, e)| !e.is_zero()).map(|(n, e)| format!("{}: {}", n, e)).collect();
        let _ = writeln!(s, "  {}: {}", i + 1, comps.join(", "));
    }
    s.trim_end().to_string()
}

fn scenario_or_default(sys: &OdeModel, name: Option<&str>) -> Result<String> {
    match name {
        Some(n) => Ok(n.to_string()),
        None if sys.scenarios.contains_key("default") => Ok("default".into()),
        None => sys
            .scenarios
            .keys()
            .next()
            .cloned()
            .ok_or_else(|| Error::Validation(format!("model '{}' has no scenarios", sys.name))),
    }
}

fn flow_system(cli: &Cli, src: &Source) -> Result<(FlowSystem, RankOracle)> {
    let sys = load(src)?.to_affine()?;
    let opts = options(cli);
    let res = identifiability(&sys, &opts)?;
    Ok((FlowSystem::new(&res, &opts.oracle)?, opts.oracle))
}

fn indist(cli: &Cli, src: &Source, scenario: Option<&str>, sym: usize, taus: Option<&[f64]>, perturb: f64) -> Result<(i32, String)> {
    let (fs, oracle) = flow_system(cli, src)?;
    if sym == 0 || sym > fs.generators.len() {
        return Err(Error::Validation(format!("--sym must be in 1..={}", fs.generators.len())));
    }
    let mut spec = FlowSpec::new(&scenario_or_default(&fs.sys, scenario)?, sym - 1, taus.unwrap_or(&DEFAULT_TAUS));
    spec.dt = cli.dt;
    spec.tol = cli.tol;
    spec.perturb = perturb;
    let bundle = symmetry_flow(&fs, &spec, &oracle)?;
    let cert = certify_indistinguishability(&bundle, cli.tol);
    let mut files = Vec::new();
    if let Some(dir) = &cli.out {
        for (name, body) in bundle.csv_files()? {
            files.push(write_file(dir, &name, &body)?.display().to_string());
        }
    }
    let report = json!({
        "certification": cert.to_json(),
        "flow": bundle.summary(),
        "files": files,
    });
    if let Some(dir) = &cli.out {
        write_file(dir, "certification.json", &pretty(&report))?;
    }
    let code = if cert.pass { 0 } else { 3 };
    if cli.json {
        return Ok((code, pretty(&report)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{} / {} / symmetry {} (commutes: {})", bundle.model, bundle.scenario, sym, bundle.commutes);
    for r in &bundle.runs {
        match &r.blowup {
            Some((t, reached, reason)) => {
                let _ = writeln!(s, "  tau={:<8} inadmissible at t={} (tau={:.6}): {}", r.tau, t, reached, reason);
            }
            None => {
                let _ = writeln!(s, "  tau={:<8} max relative output deviation {:.3e}", r.tau, r.max_dev);
            }
        }
    }
    if cert.admissible_empty() {
        let _ = writeln!(s, "admissible set: empty (no tau other than 0)");
    }
    match cert.worst {
        Some((tau, t, k, d)) => {
            let _ = writeln!(s, "{}: worst deviation {:.3e} at tau={}, t={}, y{}", yes_no(cert.pass, "PASS", "FAIL"), d, tau, t, k + 1);
        }
        None => {
            let _ = writeln!(s, "FAIL: no admissible tau");
        }
    }
    Ok((code, s.trim_end().to_string()))
}

fn verdicts(res: &IdentifiabilityResult) -> Map<String, Value> {
    let mut m: Map<String, Value> = res.obs.observable.iter().map(|(n, b)| (n.clone(), json!(b))).collect();
    for p in &res.tv_params {
        m.insert(p.name.clone(), json!(p.identifiable));
    }
    m
}

fn whatif_output(cli: &Cli, src: &Source, extra: &[String]) -> Result<(i32, String)> {
    let model = load(src)?;
    let opts = options(cli);
    let before = identifiability(&model.to_affine()?, &opts)?;
    let mut more = model.clone();
    for e in extra {
        more.outputs.push(parse(e)?);
    }
    more.validate()?;
    let after = identifiability(&more.to_affine()?, &opts)?;
    let (vb, va) = (verdicts(&before), verdicts(&after));
    let changed: Vec<Value> = va
        .iter()
        .filter(|(k, v)| vb.get(*k) != Some(v))
        .map(|(k, v)| json!({"name": k, "before": vb.get(k), "after": v}))
        .collect();
    let all = va.values().all(|v| v == &json!(true));
    let report = json!({
        "added_outputs": extra,
        "dim_before": before.obs.dim(),
        "dim_after": after.obs.dim(),
        "before": vb,
        "after": va,
        "changed": changed,
        "all_identifiable": all,
    });
    if cli.json {
        return Ok((0, pretty(&report)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "added output(s): {}", extra.join(", "));
    let _ = writeln!(s, "codistribution dim {} -> {}", before.obs.dim(), after.obs.dim());
    for c in &changed {
        let _ = writeln!(s, "  {:<12} {} -> {}", c["name"].as_str().unwrap_or(""), c["before"], c["after"]);
    }
    let _ = writeln!(s, "{}", yes_no(all, "everything is observable and identifiable", "some quantities remain unidentifiable"));
    Ok((0, s.trim_end().to_string()))
}

fn parse_measure(m: &str) -> Result<(String, f64, Option<f64>)> {
    let bad = || Error::Validation(format!("measurement '{}' is not STATE@T or STATE@T=VALUE", m));
    let (state, rest) = m.split_once('@').ok_or_else(bad)?;
    let (t, v) = match rest.split_once('=') {
        Some((t, v)) => (t, Some(v.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (rest, None),
    };
    Ok((state.trim().to_string(), t.trim().parse::<f64>().map_err(|_| bad())?, v))
}

fn whatif_measure(cli: &Cli, src: &Source, m: &str, scenario: Option<&str>, sym: Option<usize>, disguise: f64) -> Result<(i32, String)> {
    let (state, tm, value) = parse_measure(m)?;
    let (fs, oracle) = flow_system(cli, src)?;
    let sym = match sym {
        Some(s) if s == 0 || s > fs.generators.len() => {
            return Err(Error::Validation(format!("--sym must be in 1..={}", fs.generators.len())))
        }
        Some(s) => s - 1,
        None if fs.generators.len() == 1 => 0,
        None => return Err(Error::MultipleSymmetries(fs.generators.len())),
    };
    let k = fs.sys.state_index(&state).ok_or_else(|| Error::Validation(format!("'{}' is not a state", state)))?;
    let sc = scenario_or_default(&fs.sys, scenario)?;
    let (t, truth) = simulate(&fs.sys, &sc, cli.dt, cli.tol)?;
    let estimate = transform(&fs, &sc, sym, &t, &truth, disguise)?;
    let value = match value {
        Some(v) => v,
        None => sample_at(&t, &truth, tm, k)?,
    };
    let meas = Measurement { state: state.clone(), t: tm, value };
    let rec = single_symmetry_recovery(&fs, &sc, Some(sym), &t, &estimate, &meas, &oracle)?;
    let mut err = 0.0f64;
    for (a, b) in rec.trajectory.iter().zip(&truth) {
        for (x, y) in a.iter().zip(b) {
            err = err.max((x - y).abs() / y.abs().max(1e-12));
        }
    }
    let truth_consts: Map<String, Value> = rec
        .constants
        .keys()
        .map(|n| (n.clone(), json!(truth[0][fs.sys.state_index(n).unwrap()])))
        .collect();
    let report = json!({
        "measurement": {"state": state, "t": tm, "value": value},
        "scenario": sc,
        "symmetry": sym + 1,
        "disguise_tau": disguise,
        "recovered_tau": rec.tau,
        "recovered_constants": rec.constants,
        "true_constants": truth_consts,
        "max_rel_trajectory_error": err,
    });
    if cli.json {
        return Ok((0, pretty(&report)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "measurement {}({}) = {}", state, tm, value);
    let _ = writeln!(s, "recovered tau = {:.9} (estimate was moved by {})", rec.tau, disguise);
    for (n, v) in &rec.constants {
        let _ = writeln!(s, "  {:<12} {:.9} (true {})", n, v, truth_consts[n]);
    }
    let _ = writeln!(s, "max relative trajectory error {:.3e}", err);
    Ok((0, s.trim_end().to_string()))
}

fn sample_at(t: &[f64], rows: &[Vec<f64>], tm: f64, k: usize) -> Result<f64> {
    if t.len() < 2 || tm < t[0] || tm > t[t.len() - 1] {
        return Err(Error::Validation(format!("t={} is outside the simulated interval", tm)));
    }
    let mut z = vec![0.0; rows[0].len()];
    Interp { t0: t[0], h: t[1] - t[0], values: rows }.at(tm, &mut z);
    Ok(z[k])
}

fn models(cli: &Cli) -> String {
    if cli.json {
        let v: Vec<Value> = builtin_names()
            .iter()
            .map(|(n, d)| {
                let scenarios: Vec<String> = builtin(n).map(|m| m.scenarios.keys().cloned().collect()).unwrap_or_default();
                json!({"name": n, "description": d, "scenarios": scenarios})
            })
            .collect();
        return pretty(&Value::Array(v));
    }
    builtin_names().iter().map(|(n, d)| format!("{:<12} {}", n, d)).collect::<Vec<_>>().join("\n")
}

fn trace(cli: &Cli, file: &Path) -> Result<(i32, String)> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::Io(format!("{}: {}", file.display(), e)))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Validation(format!("trace: {}", e)))?;
    let steps = v.as_array().ok_or_else(|| Error::Validation("trace must be a JSON array".into()))?;
    if cli.json {
        return Ok((0, pretty(&v)));
    }
    let mut s = String::new();
    for (i, st) in steps.iter().enumerate() {
        let name = st.get("step").and_then(Value::as_str).unwrap_or("?");
        let rest: Vec<String> = st
            .as_object()
            .map(|o| o.iter().filter(|(k, _)| *k != "step").map(|(k, v)| format!("{}={}", k, v)).collect())
            .unwrap_or_default();
        let _ = writeln!(s, "{:>3} {:<12} {}", i + 1, name, rest.join(" "));
    }
    Ok((0, s.trim_end().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(a: &[&str]) -> CliOutput {
        let v: Vec<String> = std::iter::once("lieident").chain(a.iter().copied()).map(String::from).collect();
        run(&v)
    }

    #[test]
    fn measurement_syntax() {
        assert_eq!(parse_measure("T_I@10").unwrap(), ("T_I".into(), 10.0, None));
        assert_eq!(parse_measure("E@5=0.25").unwrap(), ("E".into(), 5.0, Some(0.25)));
        assert!(parse_measure("E5").is_err());
        assert!(parse_measure("E@x").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let o = run_args(&["analyze", "--bogus"]);
        assert_eq!(o.code, 2);
        let v: Value = serde_json::from_str(&o.stderr).unwrap();
        assert_eq!(v["error"], "UsageError");
        let o = run_args(&["analyze", "--builtin", "nope"]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("UnknownModel"));
    }

    #[test]
    fn models_lists_builtins() {
        let o = run_args(&["models"]);
        assert_eq!(o.code, 0);
        assert!(o.stdout.contains("hiv") && o.stdout.contains("toggle"));
    }
}
