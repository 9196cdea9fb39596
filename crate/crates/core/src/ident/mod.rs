//! Identifiability of constant and time-varying parameters: state symmetries,
//! symmetries of the unknown inputs and per-quantity verdicts.

use crate::error::Result;
use crate::liegeo::{lie_scalar, null_space, simplify, RankOracle};
use crate::model::{GeneralModel, OdeModel, StateKind, VectorField, TIME};
use crate::symexpr::{diff, zero_test, Expr};
use crate::uio::{compute_munu, extend_ui, observability, MuNu, ObservabilityResult, Options};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryKind {
    Canonicity,
    Unobservability,
}

#[derive(Clone, Debug)]
pub struct UiSymmetry {
    pub kind: SymmetryKind,
    /// One component per unknown input of the extended system.
    pub components: Vec<Expr>,
    /// Index of the state symmetry it was built from.
    pub source: Option<usize>,
    /// ξ^α_i, rows α = 0..m, columns i = 1..m.
    pub table: Vec<Vec<Expr>>,
    pub trivial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputVerdict {
    pub name: String,
    pub source: String,
    pub derivative_order: usize,
    pub reconstructable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamVerdict {
    pub name: String,
    pub identifiable: bool,
    pub derivative_order: usize,
}

#[derive(Clone, Debug)]
pub struct IdentifiabilityResult {
    pub obs: ObservabilityResult,
    pub state_symmetries: Vec<VectorField>,
    pub canonicity: Vec<UiSymmetry>,
    pub unobservability: Vec<UiSymmetry>,
    pub constants: Vec<(String, bool)>,
    pub inputs: Vec<InputVerdict>,
    pub tv_params: Vec<ParamVerdict>,
    /// Full observability: verdicts follow from canonicity alone.
    pub theorem1: bool,
    /// Unknown inputs added to the state to honour L_{g^k} h̃_i = 0 for k > m.
    pub extended: Vec<String>,
}

fn vanishes(e: &Expr, oracle: &RankOracle) -> Result<bool> {
    Ok(e.is_zero() || zero_test(e, &oracle.sampler(), oracle.trials)?.zero)
}

/// Indices k > m (1-based) with some L_{g^k} h̃_i not identically zero.
fn violating(sys: &OdeModel, htilde: &[Expr], m: usize, oracle: &RankOracle) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for k in m + 1..=sys.m_w() {
        for h in htilde {
            if !vanishes(&simplify(&lie_scalar(&sys.g[k - 1], h, &sys.states)), oracle)? {
                out.push(k);
                break;
            }
        }
    }
    Ok(out)
}

/// Adds w_k to the state for every k > m violating L_{g^k} h̃_i ≡ 0.
pub fn ensure_condition_gk(sys: &OdeModel, htilde: &[Expr], m: usize, oracle: &RankOracle) -> Result<OdeModel> {
    let mut out = sys.clone();
    for k in violating(sys, htilde, m, oracle)? {
        out = extend_ui(&out, k, 1);
    }
    Ok(out)
}

pub fn canonicity_symmetries(m_w: usize, m: usize) -> Vec<UiSymmetry> {
    (m + 1..=m_w)
        .map(|k| UiSymmetry {
            kind: SymmetryKind::Canonicity,
            components: (1..=m_w).map(|j| if j == k { Expr::one() } else { Expr::zero() }).collect(),
            source: None,
            table: Vec::new(),
            trivial: false,
        })
        .collect()
}

/// ^uχ_k = −Σ_i ν^i_k (ξ⁰_i + Σ_j ξ^j_i w_j) for k ≤ m, zero above.
pub fn unobservability_symmetry(
    sys: &OdeModel,
    xi: &[Expr],
    htilde: &[Expr],
    munu: &MuNu,
    oracle: &RankOracle,
) -> Result<UiSymmetry> {
    let m = munu.m();
    let table: Vec<Vec<Expr>> = (0..=m)
        .map(|a| {
            htilde
                .iter()
                .map(|h| {
                    let mut l = lie_scalar(sys.g_alpha(a), h, &sys.states);
                    if a == 0 {
                        l = Expr::add(vec![l, diff(h, TIME)]);
                    }
                    simplify(&lie_scalar(xi, &simplify(&l), &sys.states))
                })
                .collect()
        })
        .collect();
    let mut comps = Vec::with_capacity(sys.m_w());
    for k in 1..=sys.m_w() {
        if k > m {
            comps.push(Expr::zero());
            continue;
        }
        let mut terms = Vec::new();
        for i in 1..=m {
            let mut inner = vec![table[0][i - 1].clone()];
            for j in 1..=m {
                inner.push(Expr::mul(vec![table[j][i - 1].clone(), Expr::var(&sys.unknown_inputs[j - 1])]));
            }
            terms.push(Expr::mul(vec![munu.nu_ab(i, k).clone(), Expr::add(inner)]));
        }
        comps.push(simplify(&Expr::neg(Expr::add(terms))));
    }
    let mut trivial = true;
    for c in &comps {
        if !vanishes(c, oracle)? {
            trivial = false;
            break;
        }
    }
    Ok(UiSymmetry { kind: SymmetryKind::Unobservability, components: comps, source: None, table, trivial })
}

pub fn identifiability(model: &OdeModel, opts: &Options) -> Result<IdentifiabilityResult> {
    let oracle = &opts.oracle;
    let mut obs = observability(model, opts)?;
    let mut extended = Vec::new();
    for _ in 0..=model.m_w() {
        let bad = violating(&obs.system, &obs.htilde, obs.m, oracle)?;
        if bad.is_empty() {
            break;
        }
        extended.extend(bad.iter().map(|k| obs.system.unknown_inputs[k - 1].clone()));
        let e = ensure_condition_gk(&obs.system, &obs.htilde, obs.m, oracle)?;
        obs = observability(&e, opts)?;
    }
    let sys = obs.system.clone();
    let munu = compute_munu(&sys, &obs.htilde, oracle)?;
    let state_symmetries = null_space(&obs.o, oracle)?;
    let canonicity = canonicity_symmetries(sys.m_w(), obs.m);
    let mut unobservability = Vec::new();
    for (s, xi) in state_symmetries.iter().enumerate() {
        let mut u = unobservability_symmetry(&sys, xi, &obs.htilde, &munu, oracle)?;
        u.source = Some(s);
        unobservability.push(u);
    }
    let mut inputs = Vec::new();
    for (j, name) in sys.unknown_inputs.iter().enumerate() {
        let mut ok = true;
        for s in canonicity.iter().chain(&unobservability) {
            if !vanishes(&s.components[j], oracle)? {
                ok = false;
                break;
            }
        }
        let (source, order) = sys.ui_origin[j].clone();
        inputs.push(InputVerdict { name: name.clone(), source, derivative_order: order, reconstructable: ok });
    }
    let state_verdict = |n: &str| obs.is_observable(n).unwrap_or(false);
    let constants: Vec<(String, bool)> = sys
        .states
        .iter()
        .zip(&sys.state_kinds)
        .filter(|(_, k)| **k == StateKind::Constant)
        .map(|(n, _)| (n.clone(), state_verdict(n)))
        .collect();
    let mut sources: Vec<String> = Vec::new();
    for k in &sys.state_kinds {
        if let StateKind::UnknownInput { source, .. } = k {
            if !sources.contains(source) {
                sources.push(source.clone());
            }
        }
    }
    for (s, _) in &sys.ui_origin {
        if !sources.contains(s) {
            sources.push(s.clone());
        }
    }
    let tv_params = sources
        .iter()
        .map(|src| {
            let state = sys.states.iter().zip(&sys.state_kinds).find(
                |(_, k)| matches!(k, StateKind::UnknownInput { source, order: 0 } if source == src),
            );
            match state {
                Some((n, _)) => ParamVerdict { name: src.clone(), identifiable: state_verdict(n), derivative_order: 0 },
                None => {
                    let v = inputs.iter().find(|v| &v.source == src).unwrap();
                    ParamVerdict {
                        name: src.clone(),
                        identifiable: v.reconstructable,
                        derivative_order: v.derivative_order,
                    }
                }
            }
        })
        .collect();
    let theorem1 = obs.dim() == sys.n();
    Ok(IdentifiabilityResult {
        obs,
        state_symmetries,
        canonicity,
        unobservability,
        constants,
        inputs,
        tv_params,
        theorem1,
        extended,
    })
}

pub fn identifiability_general(model: &GeneralModel, opts: &Options) -> Result<IdentifiabilityResult> {
    identifiability(&model.to_affine()?, opts)
}

fn render(e: &Expr) -> Value {
    json!(e.to_string())
}

fn render_sym(s: &UiSymmetry) -> Value {
    let mut v = json!({
        "components": s.components.iter().map(render).collect::<Vec<_>>(),
        "simplified": s.components.iter().map(|c| render(&crate::symexpr::rational_simplify(c))).collect::<Vec<_>>(),
        "trivial": s.trivial,
    });
    if let Some(i) = s.source {
        v["source"] = json!(i);
    }
    v
}

impl IdentifiabilityResult {
    pub fn report(&self) -> Value {
        let sys = &self.obs.system;
        let per_state: Map<String, Value> = self.obs.observable.iter().map(|(n, b)| (n.clone(), json!(b))).collect();
        let constants: Map<String, Value> = self.constants.iter().map(|(n, b)| (n.clone(), json!(b))).collect();
        let tv: Map<String, Value> = self
            .tv_params
            .iter()
            .map(|p| (p.name.clone(), json!({"identifiable": p.identifiable, "derivative_order": p.derivative_order})))
            .collect();
        let inputs: Map<String, Value> = self
            .inputs
            .iter()
            .map(|v| {
                (
                    v.name.clone(),
                    json!({"source": v.source, "derivative_order": v.derivative_order, "reconstructable": v.reconstructable}),
                )
            })
            .collect();
        json!({
            "model": sys.name,
            "states": sys.states,
            "observability": {
                "dim": self.obs.dim(),
                "n": sys.n(),
                "per_state": per_state,
                "canonic": self.obs.canonic,
                "m": self.obs.m,
                "m_w": sys.m_w(),
                "htilde": self.obs.htilde.iter().map(render).collect::<Vec<_>>(),
            },
            "identifiability": {
                "constants": constants,
                "tv_params": tv,
                "unknown_inputs": inputs,
                "theorem1": self.theorem1,
                "extended": self.extended,
            },
            "symmetries": {
                "state": self.state_symmetries.iter().map(|x| x.iter().map(render).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "ui": {
                    "canonicity": self.canonicity.iter().map(render_sym).collect::<Vec<_>>(),
                    "unobservability": self.unobservability.iter().map(render_sym).collect::<Vec<_>>(),
                }
            }
        })
    }
}
