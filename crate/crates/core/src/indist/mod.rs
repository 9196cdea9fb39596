//! Finite symmetry transformations: indistinguishable states and inputs,
//! closed forms for the built-in models, output-invariance certification and
//! recovery of the true state from one extra measurement.

mod closed;
mod numeric;

pub use closed::{closed_form, closed_form_exprs, toggle_residuals, ClosedForm, TAU};
pub use numeric::{Interp, GROWTH_CAP, REL_STEP, TAU_STEP};

use crate::error::{Error, Result};
use crate::ident::{unobservability_symmetry, IdentifiabilityResult};
use crate::liegeo::{lie_bracket, simplify, RankOracle};
use crate::model::{OdeModel, Scenario, StateKind, VectorField, TIME};
use crate::symexpr::{diff, parse, zero_test, Expr, Tape};
use crate::uio::compute_munu;
use numeric::{rel_deviation, rk4, sup_norms, Blowup, TauFlow};
use serde_json::{json, Value};
use std::collections::BTreeMap;

pub const DEFAULT_TOL: f64 = 1e-5;
/// Tolerance in τ of the measurement inversion.
pub const RECOVERY_TOL: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 14;
const MAX_SUBSTEPS: usize = 8192;
const INITIAL_STEPS: usize = 200;

/// A state symmetry with its unknown-input companion.
#[derive(Clone, Debug)]
pub struct Generator {
    pub xi: VectorField,
    pub chi: Vec<Expr>,
    /// Taken from the model's reference generators rather than the null space.
    pub reference: bool,
}

fn reference_table(model: &str) -> Option<Vec<Vec<(&'static str, &'static str)>>> {
    let w1 = "-W1*((x2/W1)^n1 + 1)^2/(n1*k1*(x2/W1)^n1)";
    let w1b = "-W1*((x2/W1)^n1 + 1)/(n1*k1*(x2/W1)^n1)";
    let w2 = "-W2*((x1/W2)^n2 + 1)^2/(n2*k2*(x1/W2)^n2)";
    let w2b = "-W2*((x1/W2)^n2 + 1)/(n2*k2*(x1/W2)^n2)";
    Some(match model {
        "unicycle_s1" => vec![vec![("phi", "1"), ("theta", "1")]],
        "unicycle_s2" => vec![vec![("rho", "rho")], vec![("phi", "1"), ("theta", "1")]],
        "hiv" => vec![vec![("T_U", "T_I*delta"), ("T_I", "-T_I*delta"), ("delta", "delta*(delta - rho)"), ("N", "N*rho")]],
        "seiar" => vec![vec![("S", "1"), ("R", "-1")], vec![("S", "E"), ("E", "-E"), ("gamma", "gamma")]],
        "toggle" => vec![
            vec![("W1", w1), ("k01", "1")],
            vec![("W1", w1b), ("k1", "1")],
            vec![("W1", "W1*log(x2/W1)"), ("n1", "n1")],
            vec![("W2", w2), ("k02", "1")],
            vec![("W2", w2b), ("k2", "1")],
            vec![("W2", "W2*log(x1/W2)"), ("n2", "n2")],
        ],
        _ => return None,
    })
}

/// Reference symmetry generators of a built-in model over the given states.
pub fn reference_generators(model: &str, states: &[String]) -> Option<Vec<VectorField>> {
    let table = reference_table(model)?;
    let mut out = Vec::new();
    for g in table {
        let mut v = vec![Expr::zero(); states.len()];
        for (name, e) in g {
            let i = states.iter().position(|s| s == name)?;
            v[i] = parse(e).expect("reference generator");
        }
        out.push(v);
    }
    Some(out)
}

/// The system carrying the symmetries, with one generator per independent
/// state symmetry.
#[derive(Clone, Debug)]
pub struct FlowSystem {
    pub sys: OdeModel,
    pub m: usize,
    pub generators: Vec<Generator>,
}

impl FlowSystem {
    /// Uses the model's reference generators when they span the null space of
    /// the observable codistribution, and the computed basis otherwise.
    pub fn new(res: &IdentifiabilityResult, oracle: &RankOracle) -> Result<FlowSystem> {
        let sys = res.obs.system.clone();
        let n_sym = res.state_symmetries.len();
        let mut generators = Vec::new();
        if let Some(refs) = reference_generators(&sys.name, &sys.states) {
            let mut ok = refs.len() == n_sym;
            for xi in &refs {
                ok = ok && res.obs.o.in_orthogonal(xi, oracle)?;
            }
            if ok {
                let munu = compute_munu(&sys, &res.obs.htilde, oracle)?;
                for xi in refs {
                    let u = unobservability_symmetry(&sys, &xi, &res.obs.htilde, &munu, oracle)?;
                    generators.push(Generator { xi, chi: u.components, reference: true });
                }
            }
        }
        if generators.is_empty() {
            for (xi, u) in res.state_symmetries.iter().zip(&res.unobservability) {
                generators.push(Generator { xi: xi.clone(), chi: u.components.clone(), reference: false });
            }
        }
        Ok(FlowSystem { sys, m: res.obs.m, generators })
    }

    pub fn generator(&self, index: usize) -> Result<&Generator> {
        self.generators.get(index).ok_or_else(|| {
            Error::Validation(format!("symmetry {} out of range (model has {})", index + 1, self.generators.len()))
        })
    }
}

/// Residual [ξ, g⁰ + Σ f^i u_i + Σ g^j w_j] + Σ_{j≤m} g^j ^uχ_j.
pub fn commutativity_residual(sys: &OdeModel, m: usize, g: &Generator) -> VectorField {
    let br = lie_bracket(&g.xi, &sys.full_rhs(), &sys.states);
    br.into_iter()
        .enumerate()
        .map(|(i, b)| {
            let mut terms = vec![b];
            for j in 0..m.min(sys.m_w()) {
                terms.push(Expr::mul(vec![sys.g[j][i].clone(), g.chi[j].clone()]));
            }
            simplify(&Expr::add(terms))
        })
        .collect()
}

pub fn check_commutativity(sys: &OdeModel, m: usize, g: &Generator, oracle: &RankOracle) -> Result<bool> {
    for c in commutativity_residual(sys, m, g) {
        if !c.is_zero() && !zero_test(&c, &oracle.sampler(), oracle.trials)?.zero {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Shifts w_{m+i} (i 1-based) by τ in every sample of a profile.
pub fn canonicity_flow(w: &[Vec<f64>], m: usize, i: usize, tau: f64) -> Vec<Vec<f64>> {
    w.iter()
        .map(|row| {
            let mut r = row.clone();
            r[m + i - 1] += tau;
            r
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub scenario: String,
    /// 0-based index into the generators.
    pub symmetry: usize,
    pub taus: Vec<f64>,
    /// Fixed output step; chosen by Richardson extrapolation when absent.
    pub dt: Option<f64>,
    pub tol: f64,
    /// Added to every transformed unknown input before re-integration.
    pub perturb: f64,
}

impl FlowSpec {
    pub fn new(scenario: &str, symmetry: usize, taus: &[f64]) -> FlowSpec {
        let mut t = taus.to_vec();
        if !t.contains(&0.0) {
            t.insert(0, 0.0);
        }
        FlowSpec { scenario: scenario.to_string(), symmetry, taus: t, dt: None, tol: DEFAULT_TOL, perturb: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct TauRun {
    pub tau: f64,
    /// (t, τ reached, reason) of the first grid point whose flow left the
    /// admissible region.
    pub blowup: Option<(f64, f64, String)>,
    /// τ-flow of the baseline, per grid point: states then unknown inputs.
    pub flowed: Vec<Vec<f64>>,
    /// Outputs of the re-integrated transformed system.
    pub y: Vec<Vec<f64>>,
    /// Max output deviation relative to each output's sup norm.
    pub max_dev: f64,
    pub worst: (f64, usize),
    /// Max deviation between re-integrated and flowed states.
    pub state_dev: f64,
    pub substeps: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct TrajectoryBundle {
    pub model: String,
    pub scenario: String,
    pub symmetry: usize,
    pub commutes: bool,
    pub states: Vec<String>,
    pub unknown_inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub t: Vec<f64>,
    /// Baseline states then unknown inputs per grid point.
    pub baseline: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub runs: Vec<TauRun>,
    pub dt: f64,
}

/// Compiled numerics of a model under one scenario.
struct Plant {
    n: usize,
    m_w: usize,
    rhs: Tape,
    out: Tape,
    /// t ↦ (w, u).
    profile: Tape,
    x0: Vec<f64>,
    t0: f64,
    t1: f64,
    positive: Vec<(usize, String)>,
    names: Vec<String>,
}

fn scenario<'a>(sys: &'a OdeModel, name: &str) -> Result<&'a Scenario> {
    sys.scenarios.get(name).ok_or_else(|| Error::Validation(format!("model '{}' has no scenario '{}'", sys.name, name)))
}

fn nth_derivative(e: &Expr, order: usize) -> Expr {
    (0..order).fold(e.clone(), |acc, _| simplify(&diff(&acc, TIME)))
}

fn profile_expr(sc: &Scenario, source: &str, order: usize) -> Result<Expr> {
    let e = sc
        .tv_profiles
        .get(source)
        .ok_or_else(|| Error::Validation(format!("scenario has no profile for '{}'", source)))?;
    Ok(nth_derivative(e, order))
}

impl Plant {
    fn vars(sys: &OdeModel) -> Vec<String> {
        let mut v = sys.states.clone();
        v.extend(sys.unknown_inputs.iter().cloned());
        v.extend(sys.known_inputs.iter().cloned());
        v.push(TIME.to_string());
        v
    }

    fn new(sys: &OdeModel, sc_name: &str) -> Result<Plant> {
        let sc = scenario(sys, sc_name)?;
        let vars = Plant::vars(sys);
        let rhs = Tape::compile(&sys.full_rhs(), &vars)?;
        let out = Tape::compile(&sys.outputs, &vars)?;
        let mut prof = Vec::new();
        for (src, k) in sys.ui_origin.iter().chain(&sys.known_origin) {
            prof.push(profile_expr(sc, src, *k)?);
        }
        let profile = Tape::compile(&prof, &[TIME.to_string()])?;
        let t0 = sc.t_span.0;
        let mut x0 = Vec::with_capacity(sys.n());
        for (name, kind) in sys.states.iter().zip(&sys.state_kinds) {
            let v = match kind {
                StateKind::State => sc.initial.get(name).copied(),
                StateKind::Constant => sc.params.get(name).copied(),
                StateKind::KnownInput { source, order } | StateKind::UnknownInput { source, order } => {
                    let e = profile_expr(sc, source, *order)?;
                    Some(Tape::compile(&[e], &[TIME.to_string()])?.eval_vec(&[t0])[0])
                }
            };
            x0.push(v.ok_or_else(|| Error::Validation(format!("scenario gives no value for '{}'", name)))?);
        }
        let mut positive = Vec::new();
        let mut names = sys.states.clone();
        names.extend(sys.unknown_inputs.iter().cloned());
        for (i, s) in sys.states.iter().enumerate() {
            let src = match &sys.state_kinds[i] {
                StateKind::UnknownInput { source, order: 0 } | StateKind::KnownInput { source, order: 0 } => source,
                _ => s,
            };
            if sys.positive.contains(src) {
                positive.push((i, s.clone()));
            }
        }
        for (j, (src, k)) in sys.ui_origin.iter().enumerate() {
            if *k == 0 && sys.positive.contains(src) {
                positive.push((sys.n() + j, sys.unknown_inputs[j].clone()));
            }
        }
        Ok(Plant {
            n: sys.n(),
            m_w: sys.m_w(),
            rhs,
            out,
            profile,
            x0,
            t0,
            t1: sc.t_span.1,
            positive,
            names,
        })
    }

    fn inputs(&self, t: f64) -> Vec<f64> {
        self.profile.eval_vec(&[t])
    }

    /// Integrates with unknown inputs `w(t)` (None: scenario profiles) and
    /// returns states at the grid points.
    fn integrate(
        &self,
        x0: &[f64],
        steps: usize,
        sub: usize,
        w: Option<&dyn Fn(f64, &mut [f64])>,
    ) -> Vec<Vec<f64>> {
        let h = (self.t1 - self.t0) / steps as f64;
        let n = self.n;
        let mut buf = Vec::new();
        let mut vars = vec![0.0; n + self.profile.n_outputs() + 1];
        rk4(
            |t, x, d| {
                vars[..n].copy_from_slice(x);
                let p = self.profile.eval_vec(&[t]);
                vars[n..n + p.len()].copy_from_slice(&p);
                if let Some(wf) = w {
                    wf(t, &mut vars[n..n + self.m_w]);
                }
                let last = vars.len() - 1;
                vars[last] = t;
                self.rhs.eval(&vars, &mut buf, d);
            },
            self.t0,
            x0,
            h,
            steps,
            sub,
        )
    }

    fn outputs(&self, x: &[Vec<f64>], w: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
        let h = (self.t1 - self.t0) / steps as f64;
        let mut buf = Vec::new();
        x.iter()
            .zip(w)
            .enumerate()
            .map(|(i, (xi, wi))| {
                let t = self.t0 + i as f64 * h;
                let mut vars = xi.clone();
                let p = self.inputs(t);
                vars.extend_from_slice(wi);
                vars.extend_from_slice(&p[self.m_w..]);
                vars.push(t);
                let mut o = vec![0.0; self.out.n_outputs()];
                self.out.eval(&vars, &mut buf, &mut o);
                o
            })
            .collect()
    }

    fn baseline_w(&self, steps: usize) -> Vec<Vec<f64>> {
        let h = (self.t1 - self.t0) / steps as f64;
        (0..=steps).map(|i| self.inputs(self.t0 + i as f64 * h)[..self.m_w].to_vec()).collect()
    }

    /// Baseline with a step chosen by Richardson extrapolation: the returned
    /// grid is the finer of two runs whose outputs agree within tol/10.
    fn baseline(&self, tol: f64, dt: Option<f64>) -> Result<(usize, Vec<Vec<f64>>)> {
        let span = self.t1 - self.t0;
        if let Some(dt) = dt {
            let steps = ((span / dt).round() as usize).max(1);
            return Ok((steps, self.integrate(&self.x0, steps, 1, None)));
        }
        let mut steps = INITIAL_STEPS;
        let mut coarse = self.integrate(&self.x0, steps, 1, None);
        for _ in 0..MAX_DOUBLINGS {
            let fine = self.integrate(&self.x0, 2 * steps, 1, None);
            let yc = self.outputs(&coarse, &self.baseline_w(steps), steps);
            let yf = self.outputs(&fine, &self.baseline_w(2 * steps), 2 * steps);
            let (d, _, _) = rel_deviation(&yf, &yc, 2);
            steps *= 2;
            if d / 15.0 < tol / 10.0 {
                return Ok((steps, fine));
            }
            coarse = fine;
        }
        Err(Error::NonConvergence("baseline step selection".into()))
    }
}

fn flow_tape(sys: &OdeModel, g: &Generator) -> Result<Tape> {
    let mut exprs = g.xi.clone();
    exprs.extend(g.chi.iter().cloned());
    Tape::compile(&exprs, &Plant::vars(sys))
}

struct Flows<'a> {
    plant: &'a Plant,
    tape: Tape,
}

impl Flows<'_> {
    /// τ-flow of (x, w) at time t.
    fn at(&self, t: f64, z: &[f64], tau: f64) -> std::result::Result<Vec<f64>, Blowup> {
        let p = self.plant.inputs(t);
        let mut fixed = p[self.plant.m_w..].to_vec();
        fixed.push(t);
        let f = TauFlow {
            tape: &self.tape,
            dim: self.plant.n + self.plant.m_w,
            positive: &self.plant.positive,
            names: &self.plant.names,
        };
        f.run(z, &fixed, tau)
    }
}

fn grid_t(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    let h = (t1 - t0) / steps as f64;
    (0..=steps).map(|i| t0 + i as f64 * h).collect()
}

fn join(x: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().zip(w).map(|(a, b)| a.iter().chain(b).copied().collect()).collect()
}

/// Flows every baseline grid point by τ.
fn flow_grid(fl: &Flows, t: &[f64], base: &[Vec<f64>], tau: f64) -> std::result::Result<Vec<Vec<f64>>, (f64, Blowup)> {
    t.iter().zip(base).map(|(ti, z)| fl.at(*ti, z, tau).map_err(|b| (*ti, b))).collect()
}

/// Integrates the τ-ODE at every grid point, re-integrates the transformed
/// system and compares its outputs with the baseline.
pub fn symmetry_flow(fs: &FlowSystem, spec: &FlowSpec, oracle: &RankOracle) -> Result<TrajectoryBundle> {
    let sys = &fs.sys;
    let g = fs.generator(spec.symmetry)?;
    let commutes = check_commutativity(sys, fs.m, g, oracle)?;
    let plant = Plant::new(sys, &spec.scenario)?;
    let fl = Flows { plant: &plant, tape: flow_tape(sys, g)? };
    let (mut steps, mut xs) = plant.baseline(spec.tol, spec.dt)?;
    let mut ws = plant.baseline_w(steps);
    let n = plant.n;
    let m_w = plant.m_w;
    let span = plant.t1 - plant.t0;
    let mut runs = Vec::new();
    for &tau in &spec.taus {
        // refine the grid until interpolation of w' is accurate
        let (flowed, blowup) = loop {
            let t = grid_t(plant.t0, plant.t1, steps);
            match flow_grid(&fl, &t, &join(&xs, &ws), tau) {
                Err((ti, b)) => break (Vec::new(), Some((ti, b.tau, b.reason))),
                Ok(f) => {
                    if m_w == 0 || spec.dt.is_some() || steps >= (INITIAL_STEPS << MAX_DOUBLINGS) {
                        break (f, None);
                    }
                    let wf: Vec<Vec<f64>> = f.iter().map(|r| r[n..].to_vec()).collect();
                    let even: Vec<Vec<f64>> = wf.iter().step_by(2).cloned().collect();
                    let it = Interp { t0: plant.t0, h: 2.0 * span / steps as f64, values: &even };
                    let norms = sup_norms(&wf);
                    let mut err = 0.0f64;
                    let mut o = vec![0.0; m_w];
                    for i in (1..wf.len()).step_by(2) {
                        it.at(t[i], &mut o);
                        for k in 0..m_w {
                            let s = if norms[k] > 0.0 { norms[k] } else { 1.0 };
                            err = err.max((o[k] - wf[i][k]).abs() / s);
                        }
                    }
                    // interpolation on the full grid is ~2^6 times more accurate
                    if err / 64.0 < spec.tol / 100.0 {
                        break (f, None);
                    }
                    steps *= 2;
                    xs = plant.integrate(&plant.x0, steps, 1, None);
                    ws = plant.baseline_w(steps);
                }
            }
        };
        if let Some(b) = blowup {
            runs.push(TauRun {
                tau,
                blowup: Some(b),
                flowed,
                y: Vec::new(),
                max_dev: f64::INFINITY,
                worst: (f64::NAN, 0),
                state_dev: f64::INFINITY,
                substeps: 0,
                converged: false,
            });
            continue;
        }
        runs.push(reintegrate(&plant, &flowed, steps, tau, spec));
    }
    // every run is reported on the final (finest) grid
    let t = grid_t(plant.t0, plant.t1, steps);
    let y = plant.outputs(&xs, &ws, steps);
    for r in runs.iter_mut() {
        if r.blowup.is_some() || r.y.len() == t.len() {
            continue;
        }
        let ratio = (t.len() - 1) / (r.y.len() - 1);
        let flowed = flow_grid(&fl, &t, &join(&xs, &ws), r.tau).map_err(|(ti, b)| Error::FlowBlowup {
            tau: b.tau,
            t: ti,
            reason: b.reason,
        })?;
        debug_assert!(ratio >= 2);
        *r = reintegrate(&plant, &flowed, steps, r.tau, spec);
    }
    for r in runs.iter_mut().filter(|r| r.blowup.is_none()) {
        let (d, i, k) = rel_deviation(&r.y, &y, 1);
        r.max_dev = d;
        r.worst = (t[i], k);
    }
    Ok(TrajectoryBundle {
        model: sys.name.clone(),
        scenario: spec.scenario.clone(),
        symmetry: spec.symmetry,
        commutes,
        states: sys.states.clone(),
        unknown_inputs: sys.unknown_inputs.clone(),
        outputs: sys.outputs.iter().map(|e| e.to_string()).collect(),
        t,
        baseline: join(&xs, &ws),
        y,
        runs,
        dt: span / steps as f64,
    })
}

/// Re-integrates from x'(t0) driven by the interpolated w', doubling the
/// substeps until a Richardson estimate falls below tol/10.
fn reintegrate(plant: &Plant, flowed: &[Vec<f64>], steps: usize, tau: f64, spec: &FlowSpec) -> TauRun {
    let n = plant.n;
    let span = plant.t1 - plant.t0;
    let wv: Vec<Vec<f64>> = flowed.iter().map(|r| r[n..].iter().map(|v| v + spec.perturb).collect()).collect();
    let it = Interp { t0: plant.t0, h: span / steps as f64, values: &wv };
    let wfun = |t: f64, out: &mut [f64]| it.at(t, out);
    let x0 = &flowed[0][..n];
    let run = |sub: usize| {
        let xs = plant.integrate(x0, steps, sub, Some(&wfun));
        let y = plant.outputs(&xs, &wv, steps);
        (xs, y)
    };
    let mut sub = 1;
    let mut prev = run(sub);
    let mut converged = false;
    while sub < MAX_SUBSTEPS {
        let next = run(2 * sub);
        let (d, _, _) = rel_deviation(&next.1, &prev.1, 1);
        sub *= 2;
        prev = next;
        if d.is_finite() && d / 15.0 < spec.tol / 10.0 {
            converged = true;
            break;
        }
    }
    let (xs, y) = prev;
    let xf: Vec<Vec<f64>> = flowed.iter().map(|r| r[..n].to_vec()).collect();
    let (state_dev, _, _) = rel_deviation(&xs, &xf, 1);
    TauRun {
        tau,
        blowup: None,
        flowed: flowed.to_vec(),
        y,
        max_dev: f64::NAN,
        worst: (f64::NAN, 0),
        state_dev,
        substeps: sub,
        converged,
    }
}

#[derive(Clone, Debug)]
pub struct Certification {
    pub pass: bool,
    pub tol: f64,
    /// (τ, t, output index, relative deviation).
    pub worst: Option<(f64, f64, usize, f64)>,
    pub admissible: Vec<f64>,
    pub blowups: Vec<(f64, f64, String)>,
}

impl Certification {
    /// No τ other than 0 survived the admissibility checks.
    pub fn admissible_empty(&self) -> bool {
        self.admissible.iter().all(|t| *t == 0.0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass,
            "tol": self.tol,
            "worst": self.worst.map(|(tau, t, k, d)| json!({"tau": tau, "t": t, "output": k, "deviation": d})),
            "admissible_taus": self.admissible,
            "admissible_empty": self.admissible_empty(),
            "blowups": self.blowups.iter().map(|(tau, t, r)| json!({"tau": tau, "t": t, "reason": r})).collect::<Vec<_>>(),
        })
    }
}

pub fn certify_indistinguishability(bundle: &TrajectoryBundle, tol: f64) -> Certification {
    let mut worst: Option<(f64, f64, usize, f64)> = None;
    let mut admissible = Vec::new();
    let mut blowups = Vec::new();
    for r in &bundle.runs {
        if let Some((t, reached, reason)) = &r.blowup {
            blowups.push((r.tau, *t, format!("{} (at tau={:.6})", reason, reached)));
            continue;
        }
        admissible.push(r.tau);
        if worst.is_none_or(|w| r.max_dev > w.3 || r.max_dev.is_nan()) {
            worst = Some((r.tau, r.worst.0, r.worst.1, r.max_dev));
        }
    }
    let pass = worst.is_some_and(|w| w.3 <= tol);
    Certification { pass, tol, worst, admissible, blowups }
}

/// Boundary of the admissible τ interval between `inside` (admissible) and
/// `outside`, located by bisection over the τ-flows of the whole baseline.
pub fn admissible_boundary(
    fs: &FlowSystem,
    spec: &FlowSpec,
    inside: f64,
    outside: f64,
    tol: f64,
) -> Result<f64> {
    let g = fs.generator(spec.symmetry)?;
    let plant = Plant::new(&fs.sys, &spec.scenario)?;
    let fl = Flows { plant: &plant, tape: flow_tape(&fs.sys, g)? };
    let (steps, xs) = plant.baseline(spec.tol, spec.dt)?;
    let t = grid_t(plant.t0, plant.t1, steps);
    let base = join(&xs, &plant.baseline_w(steps));
    let ok = |tau: f64| flow_grid(&fl, &t, &base, tau).is_ok();
    if !ok(inside) {
        return Err(Error::Domain(format!("tau={} is not admissible", inside)));
    }
    if ok(outside) {
        return Ok(outside);
    }
    let (mut a, mut b) = (inside, outside);
    while (b - a).abs() > tol {
        let c = 0.5 * (a + b);
        if ok(c) {
            a = c;
        } else {
            b = c;
        }
    }
    Ok(0.5 * (a + b))
}

/// One extra measurement of a state component at a single time.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub state: String,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Recovery {
    pub tau: f64,
    pub t: Vec<f64>,
    /// Recovered states then unknown inputs per grid point.
    pub trajectory: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub constants: BTreeMap<String, f64>,
}

impl Recovery {
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let k = self.names.iter().position(|n| n == name)?;
        let i = self.t.iter().position(|x| (x - t).abs() < 1e-9)?;
        Some(self.trajectory[i][k])
    }
}

/// Grid of trial τ values, ordered by distance from 0.
const SCAN_MAX: f64 = 10.0;
const SCAN_STEP: f64 = 0.25;

/// Finds the group parameter that maps `estimate` (a trajectory consistent
/// with the outputs, sampled on `t`) onto the measurement, then maps the whole
/// estimate back. Only one symmetry may act.
pub fn single_symmetry_recovery(
    fs: &FlowSystem,
    scenario_name: &str,
    symmetry: Option<usize>,
    t: &[f64],
    estimate: &[Vec<f64>],
    meas: &Measurement,
    oracle: &RankOracle,
) -> Result<Recovery> {
    let sym = match symmetry {
        Some(s) => s,
        None if fs.generators.len() == 1 => 0,
        None => return Err(Error::MultipleSymmetries(fs.generators.len())),
    };
    let g = fs.generator(sym)?;
    let k = fs
        .sys
        .state_index(&meas.state)
        .ok_or_else(|| Error::Validation(format!("'{}' is not a state", meas.state)))?;
    if g.xi[k].is_zero() || zero_test(&g.xi[k], &oracle.sampler(), oracle.trials)?.zero {
        return Err(Error::NoSensitivity(format!("{} is invariant under the symmetry", meas.state)));
    }
    let plant = Plant::new(&fs.sys, scenario_name)?;
    let fl = Flows { plant: &plant, tape: flow_tape(&fs.sys, g)? };
    let z = match t.iter().position(|x| (x - meas.t).abs() < 1e-9) {
        Some(i) => estimate[i].clone(),
        None if t.len() > 1 && meas.t > t[0] && meas.t < t[t.len() - 1] => {
            // uniform grid; interpolate between samples
            let mut z = vec![0.0; estimate[0].len()];
            Interp { t0: t[0], h: t[1] - t[0], values: estimate }.at(meas.t, &mut z);
            z
        }
        None => return Err(Error::Validation(format!("t={} is outside the trajectory", meas.t))),
    };
    let f = |tau: f64| fl.at(meas.t, &z, tau).ok().map(|v| v[k] - meas.value);
    let tau = find_root(&f)?;
    let trajectory = t
        .iter()
        .zip(estimate)
        .map(|(ti, zi)| {
            fl.at(*ti, zi, tau)
                .map_err(|b| Error::FlowBlowup { tau: b.tau, t: *ti, reason: b.reason })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names = fs.sys.states.clone();
    names.extend(fs.sys.unknown_inputs.iter().cloned());
    let constants = fs
        .sys
        .states
        .iter()
        .zip(&fs.sys.state_kinds)
        .enumerate()
        .filter(|(_, (_, k))| **k == StateKind::Constant)
        .map(|(j, (n, _))| (n.clone(), trajectory[0][j]))
        .collect();
    Ok(Recovery { tau, t: t.to_vec(), trajectory, names, constants })
}

/// Scans τ outward from 0 for a sign change, then refines the bracket with
/// the Illinois variant of the secant method.
fn find_root(f: &dyn Fn(f64) -> Option<f64>) -> Result<f64> {
    let f0 = f(0.0).ok_or_else(|| Error::NonConvergence("flow undefined at tau=0".into()))?;
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let n = (SCAN_MAX / SCAN_STEP) as usize;
    let mut bracket = None;
    for dir in [1.0, -1.0] {
        let (mut a, mut fa) = (0.0f64, f0);
        for j in 1..=n {
            let b = dir * j as f64 * SCAN_STEP;
            let Some(fb) = f(b) else { break };
            if fb == 0.0 {
                return Ok(b);
            }
            if fa.signum() != fb.signum() {
                bracket = match bracket {
                    Some((x, _, _, _)) if f64::abs(x) <= a.abs() => bracket,
                    _ => Some((a, fa, b, fb)),
                };
                break;
            }
            a = b;
            fa = fb;
        }
    }
    let (mut a, mut fa, mut b, mut fb) =
        bracket.ok_or_else(|| Error::NonConvergence("measurement not reached by the flow".into()))?;
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && (c - a) * (c - b) < 0.0 { c } else { 0.5 * (a + b) };
        let fc = f(c).ok_or_else(|| Error::NonConvergence("flow undefined inside the bracket".into()))?;
        if fc == 0.0 || (b - a).abs() < RECOVERY_TOL {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < RECOVERY_TOL {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::NonConvergence("root refinement".into()))
}

/// Samples the baseline of a scenario: grid times and states then unknown
/// inputs, with the step fixed by `dt` or chosen for `tol`.
pub fn simulate(sys: &OdeModel, scenario_name: &str, dt: Option<f64>, tol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let plant = Plant::new(sys, scenario_name)?;
    let (steps, xs) = plant.baseline(tol, dt)?;
    Ok((grid_t(plant.t0, plant.t1, steps), join(&xs, &plant.baseline_w(steps))))
}

/// Maps a sampled trajectory through the τ-flow of one symmetry.
pub fn transform(
    fs: &FlowSystem,
    scenario_name: &str,
    symmetry: usize,
    t: &[f64],
    traj: &[Vec<f64>],
    tau: f64,
) -> Result<Vec<Vec<f64>>> {
    let plant = Plant::new(&fs.sys, scenario_name)?;
    let fl = Flows { plant: &plant, tape: flow_tape(&fs.sys, fs.generator(symmetry)?)? };
    flow_grid(&fl, t, traj, tau).map_err(|(ti, b)| Error::FlowBlowup { tau: b.tau, t: ti, reason: b.reason })
}

impl TrajectoryBundle {
    fn column_names(&self) -> Vec<String> {
        let mut v = self.states.clone();
        v.extend(self.unknown_inputs.iter().cloned());
        v
    }

    /// One CSV per quantity (states, unknown inputs, outputs y1..yp): a t
    /// column, the baseline, then one column per admissible τ.
    pub fn csv_files(&self) -> Result<Vec<(String, String)>> {
        let admissible: Vec<&TauRun> = self.runs.iter().filter(|r| r.blowup.is_none()).collect();
        let mut files = Vec::new();
        let mut emit = |name: String, base: &dyn Fn(usize) -> f64, run: &dyn Fn(&TauRun, usize) -> f64| -> Result<()> {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["t".to_string(), "baseline".to_string()];
            header.extend(admissible.iter().map(|r| format!("tau={}", r.tau)));
            w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
            for (i, ti) in self.t.iter().enumerate() {
                let mut rec = vec![format!("{}", ti), format!("{:e}", base(i))];
                rec.extend(admissible.iter().map(|r| format!("{:e}", run(r, i))));
                w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            files.push((format!("{}.csv", name), String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?));
            Ok(())
        };
        for (k, name) in self.column_names().iter().enumerate() {
            emit(name.clone(), &|i| self.baseline[i][k], &|r, i| r.flowed[i][k])?;
        }
        for k in 0..self.outputs.len() {
            emit(format!("y{}", k + 1), &|i| self.y[i][k], &|r, i| r.y[i][k])?;
        }
        Ok(files)
    }

    pub fn summary(&self) -> Value {
        json!({
            "model": self.model,
            "scenario": self.scenario,
            "symmetry": self.symmetry + 1,
            "commutes": self.commutes,
            "dt": self.dt,
            "points": self.t.len(),
            "runs": self.runs.iter().map(|r| json!({
                "tau": r.tau,
                "admissible": r.blowup.is_none(),
                "max_rel_output_deviation": if r.max_dev.is_finite() { json!(r.max_dev) } else { Value::Null },
                "max_rel_state_deviation": if r.state_dev.is_finite() { json!(r.state_dev) } else { Value::Null },
                "substeps": r.substeps,
                "converged": r.converged,
                "blowup": r.blowup.as_ref().map(|(t, reached, reason)| json!({"t": t, "tau": reached, "reason": reason})),
            })).collect::<Vec<_>>(),
        })
    }
}
