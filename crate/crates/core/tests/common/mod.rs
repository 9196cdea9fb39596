//! Property checks shared by the proptest suite and the acceptance harness.
#![allow(dead_code)]

use lieident::ident::{identifiability, IdentifiabilityResult};
use lieident::indist::{simulate, transform, FlowSystem, DEFAULT_TOL};
use lieident::liegeo::{codistribution_closure, ClosureOptions, Codistribution, Derivation, RankOracle};
use lieident::model::builtin;
use lieident::symexpr::{diff, eval_float, parse, zero_test, EvaluationPoint, Expr, Sampler};
use lieident::uio::Options;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use std::sync::OnceLock;

pub const FD_TOL: f64 = 1e-5;
pub const GROUP_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-3;

pub const MODELS: [&str; 5] = ["unicycle_s1", "unicycle_s2", "hiv", "seiar", "toggle"];

pub fn analysed(name: &str) -> &'static IdentifiabilityResult {
    static CACHE: OnceLock<Vec<(String, IdentifiabilityResult)>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        MODELS
            .iter()
            .map(|m| {
                let sys = builtin(m).unwrap().to_affine().unwrap();
                (m.to_string(), identifiability(&sys, &Options::default()).unwrap())
            })
            .collect()
    });
    &all.iter().find(|(n, _)| n == name).expect("builtin").1
}

/// μ·ν ≡ I for the μ/ν a model's analysis produced, checked at points of `seed`.
pub fn munu_is_inverse(name: &str, seed: u64) -> Result<(), TestCaseError> {
    let munu = &analysed(name).obs.munu;
    let m = munu.m();
    let s = Sampler::new(seed);
    for a in 0..=m {
        for b in 0..=m {
            let terms: Vec<Expr> = (0..=m).map(|g| Expr::mul(vec![munu.mu_ab(a, g).clone(), munu.nu_ab(g, b).clone()])).collect();
            let mut e = Expr::add(terms);
            if a == b {
                e = Expr::sub(e, Expr::one());
            }
            let z = zero_test(&e, &s, 3).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(z.zero, "{}: (mu nu)[{}][{}] = {}", name, a, b, e);
        }
    }
    Ok(())
}

pub fn expr_strategy() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![Just("x".to_string()), Just("y".to_string()), (1i32..9).prop_map(|k| k.to_string())];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({} + {})", a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({} - {})", a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({})*({})", a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({})/(1 + ({})^2)", a, b)),
            inner.clone().prop_map(|a| format!("sin({})", a)),
            inner.clone().prop_map(|a| format!("cos({})", a)),
            inner.clone().prop_map(|a| format!("exp(sin({}))", a)),
            inner.clone().prop_map(|a| format!("log(1 + ({})^2)", a)),
            inner.clone().prop_map(|a| format!("(1 + ({})^2)^(1/2)", a)),
            (inner, 2u32..4).prop_map(|(a, k)| format!("({})^{}", a, k)),
        ]
    })
}

fn at(e: &Expr, x: f64, y: f64) -> f64 {
    let mut p = EvaluationPoint::new();
    p.bind_float("x", x);
    p.bind_float("y", y);
    eval_float(e, &p).map(|v| v.0).unwrap_or(f64::NAN)
}

/// Symbolic ∂/∂x against a fourth-order central difference.
pub fn derivative_matches_fd(src: &str, x: f64, y: f64) -> Result<(), TestCaseError> {
    let e = parse(src).map_err(|e| TestCaseError::fail(format!("{}: {}", src, e)))?;
    let d = at(&diff(&e, "x"), x, y);
    let f = |x: f64| at(&e, x, y);
    let h = FD_STEP;
    let fd = (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
    let scale = 1f64.max(d.abs()).max(f(x).abs());
    prop_assume!(d.is_finite() && fd.is_finite() && scale < 1e6);
    prop_assert!((d - fd).abs() <= FD_TOL * scale, "{}: d/dx = {} vs fd {}", src, d, fd);
    Ok(())
}

pub fn poly_strategy() -> impl Strategy<Value = String> {
    let mono = (-3i32..=3, 0u32..3, 0u32..3, 0u32..2).prop_map(|(c, a, b, d)| format!("{}*x1^{}*x2^{}*x3^{}", c, a, b, d));
    prop::collection::vec(mono, 1..3).prop_map(|v| v.join(" + "))
}

/// The closure contains its seed, never shrinks when more derivations are
/// allowed and stops within n − dim + 1 rounds.
pub fn closure_is_monotone(fields: &[[String; 3]], h: &str) -> Result<(), TestCaseError> {
    let states: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    let oracle = RankOracle::default();
    let fail = |e: lieident::Error| TestCaseError::fail(e.to_string());
    let omega = Codistribution::from_potentials(&states, &[parse(h).unwrap()], &oracle).map_err(fail)?;
    let ops: Vec<Derivation> =
        fields.iter().map(|f| Derivation::along(f.iter().map(|s| parse(s).unwrap()).collect())).collect();
    let opts = ClosureOptions::default();
    let mut prev: Option<Codistribution> = None;
    for k in 0..=ops.len() {
        let c = codistribution_closure(&omega, &ops[..k], None, &oracle, &opts).map_err(fail)?;
        let r = &c.result;
        prop_assert!(r.dim() >= omega.dim() && r.dim() <= states.len());
        prop_assert!(c.steps <= states.len() - omega.dim() + 1, "steps {}", c.steps);
        for w in omega.rows() {
            prop_assert!(r.contains(&w, &oracle).map_err(fail)?);
        }
        if let Some(p) = &prev {
            prop_assert!(r.dim() >= p.dim());
            for w in p.rows() {
                prop_assert!(r.contains(&w, &oracle).map_err(fail)?);
            }
        }
        prev = Some(c.result);
    }
    Ok(())
}

pub struct FlowCase {
    pub fs: FlowSystem,
    pub scenario: &'static str,
    pub symmetry: usize,
    pub t: Vec<f64>,
    pub base: Vec<Vec<f64>>,
}

/// HIV and the second SEIAR symmetry on a coarse subsample of the baseline.
pub fn flow_cases() -> &'static [FlowCase] {
    static CACHE: OnceLock<Vec<FlowCase>> = OnceLock::new();
    CACHE.get_or_init(|| {
        [("hiv", "default", 0usize), ("seiar", "cos", 1usize)]
            .iter()
            .map(|(m, sc, sym)| {
                let fs = FlowSystem::new(analysed(m), &RankOracle::default()).unwrap();
                let (t, base) = simulate(&fs.sys, sc, Some(0.05), DEFAULT_TOL).unwrap();
                let t = t.into_iter().step_by(200).collect();
                let base = base.into_iter().step_by(200).collect();
                FlowCase { fs, scenario: sc, symmetry: *sym, t, base }
            })
            .collect()
    })
}

fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> Result<(), TestCaseError> {
    for (r1, r2) in a.iter().zip(b) {
        for (x, y) in r1.iter().zip(r2) {
            prop_assert!((x - y).abs() <= tol * y.abs().max(1e-9), "{} vs {}", x, y);
        }
    }
    Ok(())
}

pub fn tau_zero_is_identity(c: &FlowCase) -> Result<(), TestCaseError> {
    let z = transform(&c.fs, c.scenario, c.symmetry, &c.t, &c.base, 0.0).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&z, &c.base);
    Ok(())
}

/// φ_b ∘ φ_a = φ_{a+b} whenever all three flows are admissible.
pub fn group_property(c: &FlowCase, a: f64, b: f64) -> Result<(), TestCaseError> {
    let go = |traj: &[Vec<f64>], tau: f64| transform(&c.fs, c.scenario, c.symmetry, &c.t, traj, tau).ok();
    let Some(fa) = go(&c.base, a) else { return Err(TestCaseError::reject("inadmissible")) };
    let Some(fab) = go(&fa, b) else { return Err(TestCaseError::reject("inadmissible")) };
    let Some(direct) = go(&c.base, a + b) else { return Err(TestCaseError::reject("inadmissible")) };
    close(&fab, &direct, GROUP_TOL)
}

/// Variants of the builtins with extra outputs; some become fully observable.
pub fn theorem1_models() -> &'static [(String, IdentifiabilityResult)] {
    static CACHE: OnceLock<Vec<(String, IdentifiabilityResult)>> = OnceLock::new();
    CACHE.get_or_init(|| {
        [("hiv", &["T_U"][..]), ("unicycle_s1", &["phi"][..]), ("unicycle_s2", &["rho", "phi"][..]), ("seiar", &["S", "E"][..])]
            .iter()
            .map(|(m, extra)| {
                let mut g = builtin(m).unwrap();
                g.outputs.extend(extra.iter().map(|e| parse(e).unwrap()));
                let sys = g.to_affine().unwrap();
                (format!("{}+{}", m, extra.join("+")), identifiability(&sys, &Options::default()).unwrap())
            })
            .collect()
    })
}

/// With the whole state observable, every unknown input is reconstructable
/// exactly when the system is canonic, and time-varying verdicts follow.
pub fn theorem1_consistent(name: &str, r: &IdentifiabilityResult) -> Result<(), TestCaseError> {
    if !r.theorem1 {
        return Ok(());
    }
    prop_assert!(r.state_symmetries.is_empty(), "{}", name);
    let canonic = r.obs.m == r.obs.system.m_w();
    let all = r.inputs.iter().all(|v| v.reconstructable);
    prop_assert_eq!(all, canonic, "{}", name);
    prop_assert!(r.tv_params.iter().all(|p| p.identifiable == canonic), "{}", name);
    Ok(())
}
