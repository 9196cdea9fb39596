//! State observability with unknown inputs: the main loop, its two helper
//! integer computations and all supporting operations.

mod ops;

use ops::combined_ghat;

pub use ops::{
    augment, compute_ghat, compute_munu, deg_w, extend_ui, psi_chain, reconstructability_matrix, reorder_ui,
    select_htilde, unaugment, MuNu,
};

use crate::error::{Error, Result};
use crate::liegeo::{
    autobracket, codistribution_closure, distribution_closure, gradient, lie_scalar, simplify, Autobracket,
    ClosureOptions, Codistribution, Derivation, Distribution, RankOracle,
};
use crate::model::{OdeModel, VectorField};
use crate::symexpr::Expr;
use serde_json::{json, Value};

pub const DEFAULT_MAX_ROUNDS: usize = 25;

#[derive(Clone, Debug)]
pub struct Options {
    pub oracle: RankOracle,
    pub closure: ClosureOptions,
    pub max_rounds: usize,
    /// Indices into the potentials of Ω used instead of the greedy selection
    /// at the final step.
    pub final_selection: Option<Vec<usize>>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            oracle: RankOracle::default(),
            closure: ClosureOptions::default(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            final_selection: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObservabilityResult {
    /// Observability codistribution, with potentials.
    pub o: Codistribution,
    /// Final (possibly extended) system.
    pub system: OdeModel,
    pub m: usize,
    pub htilde: Vec<Expr>,
    pub munu: MuNu,
    pub ghat: Vec<VectorField>,
    /// Whether the main loop reached m = m_w (the final step ran).
    pub canonic: bool,
    pub s: Option<usize>,
    pub r: Option<usize>,
    pub observable: Vec<(String, bool)>,
    pub trace: Vec<Value>,
}

impl ObservabilityResult {
    pub fn dim(&self) -> usize {
        self.o.dim()
    }

    pub fn is_observable(&self, name: &str) -> Option<bool> {
        self.observable.iter().find(|(n, _)| n == name).map(|(_, b)| *b)
    }
}

fn ghat_ops(ghat: &[VectorField], m: usize, tv: bool) -> Vec<Derivation> {
    let mut ops = vec![Derivation { field: ghat[0].clone(), time: tv, jets: false }];
    ops.extend(ghat[1..=m].iter().map(|g| Derivation::along(g.clone())));
    ops
}

fn f_ops(sys: &OdeModel) -> Vec<Derivation> {
    sys.f.iter().map(|f| Derivation::along(f.clone())).collect()
}

fn autobracket_ctx(sys: &OdeModel, munu: &MuNu) -> Autobracket {
    let m = munu.m();
    Autobracket {
        taus: (0..=m).map(|a| sys.g_alpha(a).clone()).collect(),
        sigma: (0..=m).map(|g| (0..=m).map(|b| munu.nu_ab(g, b).clone()).collect()).collect(),
        time_varying: sys.time_varying(),
    }
}

/// s: closure index of ⟨g⁰..g^{m_w} | span{∇h̃}⟩.
pub fn s_final(sys: &OdeModel, htilde: &[Expr], opts: &Options) -> Result<usize> {
    let om = Codistribution::from_potentials(&sys.states, htilde, &opts.oracle)?;
    let mut ops = vec![Derivation { field: sys.drift.clone(), time: sys.time_varying(), jets: false }];
    ops.extend(sys.g.iter().map(|g| Derivation::along(g.clone())));
    Ok(codistribution_closure(&om, &ops, None, &opts.oracle, &opts.closure)?.steps)
}

/// r: smallest r with Δ_{r+1} = Δ_r for the autobracket closure of span{f}.
pub fn r_final(sys: &OdeModel, munu: &MuNu, opts: &Options) -> Result<usize> {
    if sys.f.is_empty() {
        return Ok(0);
    }
    let d = Distribution::from_fields(&sys.states, &sys.f, &opts.oracle)?;
    let c = distribution_closure(&d, &autobracket_ctx(sys, munu), &opts.oracle, &opts.closure)?;
    Ok(c.steps - 1)
}

/// Potentials L_{[f^i]^{(α_1..α_j)}} h̃_q for all chains up to length `depth`.
pub fn chain_potentials(
    sys: &OdeModel,
    htilde: &[Expr],
    munu: &MuNu,
    depth: usize,
    only_depth: bool,
    opts: &Options,
) -> Result<Vec<Expr>> {
    let ab = autobracket_ctx(sys, munu);
    let mut out = Vec::new();
    for f in &sys.f {
        let mut level: Vec<VectorField> = vec![f.clone()];
        for j in 0..=depth {
            if !only_depth || j == depth {
                for v in &level {
                    for h in htilde {
                        let l = simplify(&lie_scalar(v, h, &sys.states));
                        if !l.is_zero() && !out.contains(&l) {
                            out.push(l);
                        }
                    }
                }
            }
            if j == depth {
                break;
            }
            let mut next: Vec<VectorField> = Vec::new();
            for v in &level {
                for g in 0..ab.order() {
                    let b = autobracket(v, g, &ab.taus, &ab.sigma, ab.time_varying, &sys.states);
                    if b.iter().all(|e| e.is_zero()) || next.contains(&b) {
                        continue;
                    }
                    for e in &b {
                        if e.dag_size() > opts.closure.node_cap {
                            return Err(Error::NodeCap { nodes: e.dag_size(), cap: opts.closure.node_cap });
                        }
                    }
                    next.push(b);
                }
            }
            if next.is_empty() {
                break;
            }
            level = next;
        }
    }
    Ok(out)
}

/// Õ: spans ∇L over autobracket chains of f up to depth s + r.
pub fn otilde(sys: &OdeModel, htilde: &[Expr], munu: &MuNu, s: usize, r: usize, opts: &Options) -> Result<Codistribution> {
    let pots = chain_potentials(sys, htilde, munu, s + r, false, opts)?;
    Codistribution::from_potentials(&sys.states, &pots, &opts.oracle)
}

fn all_orthogonal(om: &Codistribution, fields: &[VectorField], oracle: &RankOracle) -> Result<bool> {
    for g in fields {
        if !om.in_orthogonal(g, oracle)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// s^m_x: closure of span{∇h̃} on successively augmented systems, compared
/// after projection onto the coordinates of Σ.
pub fn algorithm3_sx(sys: &OdeModel, m: usize, htilde: &[Expr], opts: &Options) -> Result<usize> {
    let coords = sys.states.clone();
    let mut s = sys.clone();
    let mut om = Codistribution::from_potentials(&s.states, htilde, &opts.oracle)?;
    let mut x_dim = om.project(&coords, &opts.oracle)?.dim();
    let bound = sys.n().saturating_sub(m) + 1;
    for k in 1..=bound + 1 {
        s = augment(&s, m);
        om = om.pad_to(&s.states);
        let mut ops = vec![Derivation { field: s.drift.clone(), time: s.time_varying(), jets: false }];
        ops.extend(s.g[..m].iter().map(|g| Derivation::along(g.clone())));
        let mut pots = Vec::new();
        for g in &om.gens {
            let p = g.potential.as_ref().ok_or(Error::MissingPotentials)?;
            for d in &ops {
                pots.push(simplify(&d.apply(p, &s.states)));
            }
        }
        om.extend_potentials(&pots, &opts.oracle)?;
        let xd = om.project(&coords, &opts.oracle)?.dim();
        if xd == x_dim {
            return Ok(k);
        }
        x_dim = xd;
    }
    Err(Error::NonConvergence(format!("s_x exceeded its bound {}", bound)))
}

/// r^m: autobracket growth of span{f} on successively augmented systems.
pub fn algorithm4_r(sys: &OdeModel, munu: &MuNu, opts: &Options) -> Result<usize> {
    if sys.f.is_empty() {
        return Ok(0);
    }
    let m = munu.m();
    let mut s = sys.clone();
    let mut delta = Distribution::from_fields(&s.states, &s.f, &opts.oracle)?;
    let bound = sys.n() + 1;
    for k in 1..=bound {
        s = augment(&s, m);
        delta = delta.pad_to(&s.states);
        let ab = autobracket_ctx(&s, munu);
        let mut t = delta.tracker(&opts.oracle)?;
        let frontier = delta.gens.clone();
        let added = crate::liegeo::autobracket_round(&mut delta, &frontier, &ab, &mut t, &opts.closure)?;
        if added.is_empty() {
            return Ok(k - 1);
        }
    }
    Err(Error::NonConvergence(format!("r exceeded its bound {}", bound)))
}

/// Outcome of Algorithm 2.
#[derive(Clone, Debug)]
pub enum Alg2 {
    Finish(Codistribution),
    Continue { kstar: Option<(usize, usize, usize)> },
}

pub fn algorithm2(
    sys: &OdeModel,
    omega: &Codistribution,
    m: usize,
    htilde: &[Expr],
    munu: &MuNu,
    ghat: &[VectorField],
    opts: &Options,
    trace: &mut Vec<Value>,
) -> Result<Alg2> {
    let tv = sys.time_varying();
    if sys.m_u() == 0 || m == 0 {
        let c = codistribution_closure(omega, &ghat_ops(ghat, m, tv), None, &opts.oracle, &opts.closure)?;
        let finish = all_orthogonal(&c.result, &ghat[m + 1..], &opts.oracle)?;
        trace.push(json!({"step": "algorithm2", "branch": "simple", "omega_star_dim": c.result.dim(), "finish": finish}));
        return Ok(if finish { Alg2::Finish(c.result) } else { Alg2::Continue { kstar: None } });
    }
    let sx = algorithm3_sx(sys, m, htilde, opts)?;
    let r = algorithm4_r(sys, munu, opts)?;
    let khat = sx + r;
    trace.push(json!({"step": "algorithm2", "branch": "general", "s_x": sx, "r": r, "k_hat": khat}));
    let mut om = omega.clone();
    let mut ops = f_ops(sys);
    ops.extend(ghat_ops(ghat, m, tv));
    let mut star = om.clone();
    for k in 1..=khat {
        for i in 0..sys.m_u() {
            for q in 0..m {
                let sub = OdeModel { f: vec![sys.f[i].clone()], ..sys.clone() };
                let pots = chain_potentials(&sub, &htilde[q..=q], munu, k - 1, true, opts)?;
                om.extend_potentials(&pots, &opts.oracle)?;
                star = codistribution_closure(&om, &ops, None, &opts.oracle, &opts.closure)?.result;
                if !all_orthogonal(&star, &ghat[m + 1..], &opts.oracle)? {
                    trace.push(json!({"step": "algorithm2", "finish": false, "k_star": k, "i_star": i + 1, "q_star": q + 1}));
                    return Ok(Alg2::Continue { kstar: Some((k, i, q)) });
                }
            }
        }
    }
    trace.push(json!({"step": "algorithm2", "finish": true, "omega_star_dim": star.dim()}));
    Ok(Alg2::Finish(star))
}

fn verdicts(o: &Codistribution, sys: &OdeModel, oracle: &RankOracle) -> Result<Vec<(String, bool)>> {
    let mut t = o.tracker(oracle)?;
    let n = sys.n();
    let mut out = Vec::with_capacity(n);
    for (i, x) in sys.states.iter().enumerate() {
        let e: Vec<Expr> = (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect();
        out.push((x.clone(), t.contains(&e)?));
    }
    Ok(out)
}

/// Observability codistribution of an input-affine system with unknown inputs.
pub fn observability(model: &OdeModel, opts: &Options) -> Result<ObservabilityResult> {
    let oracle = &opts.oracle;
    let mut trace = Vec::new();
    let mut sys = model.clone();
    let mut omega = Codistribution::from_potentials(&sys.states, &sys.outputs, oracle)?;
    trace.push(json!({"step": "init", "n": sys.n(), "m_u": sys.m_u(), "m_w": sys.m_w(), "omega_dim": omega.dim()}));
    let mut rounds = 0;
    loop {
        let pots = omega.potentials().ok_or(Error::MissingPotentials)?;
        let m = deg_w(&sys, &pots, oracle)?;
        trace.push(json!({"step": "deg_w", "round": rounds, "value": m, "omega_dim": omega.dim()}));
        if m == sys.m_w() {
            break;
        }
        rounds += 1;
        if rounds > opts.max_rounds {
            return Err(Error::IterationCap(opts.max_rounds));
        }
        let htilde = select_htilde(&sys, &pots, m, oracle)?;
        let (s2, perm) = reorder_ui(&sys, &htilde, oracle)?;
        sys = s2;
        trace.push(json!({"step": "select", "htilde": htilde.iter().map(|h| h.to_string()).collect::<Vec<_>>(), "permutation": perm}));
        let munu = compute_munu(&sys, &htilde, oracle)?;
        let ghat = compute_ghat(&sys, &munu, &htilde);
        let tv = sys.time_varying();
        let kstar = match algorithm2(&sys, &omega, m, &htilde, &munu, &ghat, opts, &mut trace)? {
            Alg2::Finish(o) => {
                let observable = verdicts(&o, &sys, oracle)?;
                trace.push(json!({"step": "finish", "dim": o.dim()}));
                return Ok(ObservabilityResult {
                    o,
                    system: sys,
                    m,
                    htilde,
                    munu,
                    ghat,
                    canonic: false,
                    s: None,
                    r: None,
                    observable,
                    trace,
                });
            }
            Alg2::Continue { kstar } => kstar,
        };
        let before = (omega.dim(), sys.n());
        let gate: Vec<VectorField> = ghat[m + 1..].to_vec();
        let xi = [Derivation::dotted(combined_ghat(&ghat, m), tv)];
        let mut ops = Vec::new();
        if sys.m_u() > 0 {
            if let Some((k, i, q)) = kstar {
                let chi = psi_chain(&sys, k - 1, i, &munu, &ghat);
                let l = simplify(&lie_scalar(&chi, &htilde[q], &sys.states));
                omega.extend_potentials(&[l], oracle)?;
            }
            ops = f_ops(&sys);
        }
        let c = codistribution_closure(&omega, &ops, Some((&xi, &gate)), oracle, &opts.closure)?;
        trace.push(json!({"step": "nested_closure", "dim": c.result.dim(), "iterations": c.steps}));
        let (s3, om3) = unaugment(&sys, &c.result, &htilde, &munu, kstar.map(|k| k.0), oracle)?;
        sys = s3;
        omega = om3;
        trace.push(json!({"step": "unaugment", "n": sys.n(), "omega_dim": omega.dim()}));
        if (omega.dim(), sys.n()) == before {
            return Err(Error::NonConvergence("main loop made no progress".into()));
        }
    }
    // final step
    let pots = omega.potentials().ok_or(Error::MissingPotentials)?;
    let htilde = match &opts.final_selection {
        Some(idx) => idx.iter().map(|i| pots[*i].clone()).collect(),
        None => select_htilde(&sys, &pots, sys.m_w(), oracle)?,
    };
    let (s2, perm) = reorder_ui(&sys, &htilde, oracle)?;
    sys = s2;
    trace.push(json!({"step": "final_select", "htilde": htilde.iter().map(|h| h.to_string()).collect::<Vec<_>>(), "permutation": perm}));
    let munu = compute_munu(&sys, &htilde, oracle)?;
    let ghat = compute_ghat(&sys, &munu, &htilde);
    let mut total = omega.clone();
    let (s, r) = if sys.m_u() > 0 {
        let s = s_final(&sys, &htilde, opts)?;
        let r = r_final(&sys, &munu, opts)?;
        let ot = otilde(&sys, &htilde, &munu, s, r, opts)?;
        trace.push(json!({"step": "otilde", "s": s, "r": r, "dim": ot.dim()}));
        total.extend(&ot, oracle)?;
        (Some(s), Some(r))
    } else {
        (None, None)
    };
    let mut ops = f_ops(&sys);
    ops.extend(ghat_ops(&ghat, sys.m_w(), sys.time_varying()));
    let c = codistribution_closure(&total, &ops, None, oracle, &opts.closure)?;
    let o = c.result;
    trace.push(json!({"step": "final", "dim": o.dim(), "iterations": c.steps}));
    let observable = verdicts(&o, &sys, oracle)?;
    Ok(ObservabilityResult {
        o,
        m: sys.m_w(),
        system: sys,
        htilde,
        munu,
        ghat,
        canonic: true,
        s,
        r,
        observable,
        trace,
    })
}

/// Whether ∇λ is in the observability codistribution.
pub fn is_observable_function(res: &ObservabilityResult, l: &Expr, oracle: &RankOracle) -> Result<bool> {
    res.o.contains(&gradient(l, &res.o.states), oracle)
}

#[cfg(test)]
mod tests;
