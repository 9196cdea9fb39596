use crate::error::{Error, Result};
use crate::liegeo::{
    generic_rank, inverse, jet, lie_bracket, lie_scalar, parse_jet, simplify, Codistribution, Derivation, RankOracle,
};
use crate::model::{derivative_name, OdeModel, StateKind, VectorField, TIME};
use crate::symexpr::{diff, Expr};
use std::collections::{BTreeMap, BTreeSet};

/// μ and its inverse ν, stored with the lower index as row:
/// `mu[β][α]` = μ^α_β.
#[derive(Clone, Debug)]
pub struct MuNu {
    pub mu: Vec<Vec<Expr>>,
    pub nu: Vec<Vec<Expr>>,
}

impl MuNu {
    pub fn m(&self) -> usize {
        self.mu.len() - 1
    }

    /// μ^α_β
    pub fn mu_ab(&self, alpha: usize, beta: usize) -> &Expr {
        &self.mu[beta][alpha]
    }

    /// ν^α_β
    pub fn nu_ab(&self, alpha: usize, beta: usize) -> &Expr {
        &self.nu[beta][alpha]
    }
}

/// Matrix of L_{g^j} λ_i: one row per potential, one column per unknown input.
pub fn reconstructability_matrix(sys: &OdeModel, pots: &[Expr]) -> Vec<Vec<Expr>> {
    pots.iter()
        .map(|p| sys.g.iter().map(|g| simplify(&lie_scalar(g, p, &sys.states))).collect())
        .collect()
}

pub fn deg_w(sys: &OdeModel, pots: &[Expr], oracle: &RankOracle) -> Result<usize> {
    if sys.m_w() == 0 || pots.is_empty() {
        return Ok(0);
    }
    Ok(generic_rank(&reconstructability_matrix(sys, pots), sys.m_w(), oracle)?.rank)
}

/// First m potentials (in order) whose reconstructability rows are independent.
pub fn select_htilde(sys: &OdeModel, pots: &[Expr], m: usize, oracle: &RankOracle) -> Result<Vec<Expr>> {
    let mut t = oracle.tracker(sys.m_w());
    let mut out = Vec::with_capacity(m);
    for (p, row) in pots.iter().zip(reconstructability_matrix(sys, pots)) {
        if out.len() == m {
            break;
        }
        if t.add(row)? {
            out.push(p.clone());
        }
    }
    if out.len() < m {
        return Err(Error::RankDeficient(format!("only {} of {} outputs selectable", out.len(), m)));
    }
    Ok(out)
}

/// Reorders unknown inputs so the first m columns of the reconstructability
/// matrix of h̃ are independent. Returns the system and the permutation.
pub fn reorder_ui(sys: &OdeModel, htilde: &[Expr], oracle: &RankOracle) -> Result<(OdeModel, Vec<usize>)> {
    let m = htilde.len();
    let rm = reconstructability_matrix(sys, htilde);
    let mut t = oracle.tracker(m);
    let mut first = Vec::new();
    let mut rest = Vec::new();
    for j in 0..sys.m_w() {
        let col: Vec<Expr> = rm.iter().map(|r| r[j].clone()).collect();
        if first.len() < m && t.add(col)? {
            first.push(j);
        } else {
            rest.push(j);
        }
    }
    if first.len() < m {
        return Err(Error::RankDeficient("reconstructability matrix lost rank".into()));
    }
    first.extend(rest);
    let mut out = sys.clone();
    out.g = first.iter().map(|j| sys.g[*j].clone()).collect();
    out.unknown_inputs = first.iter().map(|j| sys.unknown_inputs[*j].clone()).collect();
    out.ui_origin = first.iter().map(|j| sys.ui_origin[*j].clone()).collect();
    Ok((out, first))
}

fn htilde_alpha(htilde: &[Expr], alpha: usize) -> Expr {
    if alpha == 0 {
        Expr::var(TIME)
    } else {
        htilde[alpha - 1].clone()
    }
}

pub fn compute_munu(sys: &OdeModel, htilde: &[Expr], oracle: &RankOracle) -> Result<MuNu> {
    let m = htilde.len();
    let mut mu = vec![vec![Expr::zero(); m + 1]; m + 1];
    mu[0][0] = Expr::one();
    for j in 1..=m {
        let h = &htilde[j - 1];
        mu[j][0] = simplify(&Expr::add(vec![diff(h, TIME), lie_scalar(&sys.drift, h, &sys.states)]));
        for i in 1..=m {
            mu[j][i] = simplify(&lie_scalar(&sys.g[i - 1], h, &sys.states));
        }
    }
    let nu = match inverse(&mu, oracle) {
        Ok(nu) => nu,
        Err(Error::RankDeficient(_)) => return Err(Error::SingularMu),
        Err(e) => return Err(e),
    };
    Ok(MuNu { mu, nu })
}

/// ĝ^α = Σ_β ν^α_β g^β for α ≤ m, and ĝ^k = g^k − Σ_α ĝ^α L_{g^k} h̃_α for k > m.
pub fn compute_ghat(sys: &OdeModel, munu: &MuNu, htilde: &[Expr]) -> Vec<VectorField> {
    let m = munu.m();
    let n = sys.n();
    let mut out: Vec<VectorField> = (0..=m)
        .map(|a| {
            (0..n)
                .map(|r| {
                    let terms = (0..=m)
                        .filter(|b| !munu.nu_ab(a, *b).is_zero())
                        .map(|b| Expr::mul(vec![munu.nu_ab(a, b).clone(), sys.g_alpha(b)[r].clone()]))
                        .collect();
                    simplify(&Expr::add(terms))
                })
                .collect()
        })
        .collect();
    for k in m + 1..=sys.m_w() {
        let gk = sys.g_alpha(k);
        let coef: Vec<Expr> =
            (1..=m).map(|a| simplify(&lie_scalar(gk, &htilde_alpha(htilde, a), &sys.states))).collect();
        let v = (0..n)
            .map(|r| {
                let mut terms = vec![gk[r].clone()];
                for a in 1..=m {
                    if !coef[a - 1].is_zero() {
                        terms.push(Expr::neg(Expr::mul(vec![out[a][r].clone(), coef[a - 1].clone()])));
                    }
                }
                simplify(&Expr::add(terms))
            })
            .collect();
        out.push(v);
    }
    out
}

/// ĝ⁰ + Σ_β ĝ^β v_β.
pub(crate) fn combined_ghat(ghat: &[VectorField], m: usize) -> VectorField {
    let n = ghat[0].len();
    (0..n)
        .map(|r| {
            let mut terms = vec![ghat[0][r].clone()];
            for (b, g) in ghat.iter().enumerate().take(m + 1).skip(1) {
                terms.push(Expr::mul(vec![g[r].clone(), Expr::var(&jet('v', b, 0))]));
            }
            simplify(&Expr::add(terms))
        })
        .collect()
}

/// Appends `levels` derivative states for unknown input γ (1-based): the
/// input becomes the next derivative of the chain.
pub fn extend_ui(sys: &OdeModel, gamma: usize, levels: usize) -> OdeModel {
    if levels == 0 {
        return sys.clone();
    }
    let mut out = sys.clone();
    let (source, base) = sys.ui_origin[gamma - 1].clone();
    let n = sys.n();
    out.pad_fields(levels);
    let names: Vec<String> = (0..levels).map(|l| derivative_name(&source, base + l)).collect();
    let g = &sys.g[gamma - 1];
    for r in 0..n {
        if !g[r].is_zero() {
            out.drift[r] = simplify(&Expr::add(vec![
                sys.drift[r].clone(),
                Expr::mul(vec![g[r].clone(), Expr::var(&names[0])]),
            ]));
        }
    }
    for l in 0..levels - 1 {
        out.drift[n + l] = Expr::var(&names[l + 1]);
    }
    let mut e = vec![Expr::zero(); n + levels];
    e[n + levels - 1] = Expr::one();
    out.g[gamma - 1] = e;
    for (l, name) in names.iter().enumerate() {
        out.states.push(name.clone());
        out.state_kinds.push(StateKind::UnknownInput { source: source.clone(), order: base + l });
    }
    out.unknown_inputs[gamma - 1] = derivative_name(&source, base + levels);
    out.ui_origin[gamma - 1] = (source, base + levels);
    out
}

/// 𝒜: the inputs after the first m become states driven by their derivatives.
pub fn augment(sys: &OdeModel, m: usize) -> OdeModel {
    let mut out = sys.clone();
    for gamma in m + 1..=sys.m_w() {
        out = extend_ui(&out, gamma, 1);
    }
    out
}

/// ψ_k for known input i (0-based) in w-jets, rewritten in v-jets.
pub fn psi_chain(sys: &OdeModel, k: usize, i: usize, munu: &MuNu, ghat: &[VectorField]) -> VectorField {
    let m = munu.m();
    let tv = sys.time_varying();
    let mut psi = sys.f[i].clone();
    for _ in 0..k {
        let mut acc: Vec<Vec<Expr>> = vec![Vec::new(); psi.len()];
        for gamma in 0..=m {
            let br = lie_bracket(sys.g_alpha(gamma), &psi, &sys.states);
            for (a, b) in acc.iter_mut().zip(br) {
                if gamma == 0 {
                    a.push(b);
                } else {
                    a.push(Expr::mul(vec![Expr::var(&jet('w', gamma, 0)), b]));
                }
            }
        }
        let shift = Derivation { field: vec![Expr::zero(); psi.len()], time: tv, jets: true };
        for (a, p) in acc.iter_mut().zip(&psi) {
            a.push(shift.apply(p, &sys.states));
        }
        psi = acc.into_iter().map(|t| simplify(&Expr::add(t))).collect();
    }
    // w_α = Σ_β ν^α_β v_β with v_0 = 1, and its total derivatives
    let dv = Derivation::dotted(combined_ghat(ghat, m), tv);
    let mut wanted: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &psi {
        for v in e.free_vars() {
            if let Some(('w', a, o)) = parse_jet(&v) {
                let e = wanted.entry(a).or_insert(0);
                *e = (*e).max(o);
            }
        }
    }
    let mut map = BTreeMap::new();
    for (a, top) in wanted {
        let mut terms = vec![munu.nu_ab(a, 0).clone()];
        for b in 1..=m {
            terms.push(Expr::mul(vec![munu.nu_ab(a, b).clone(), Expr::var(&jet('v', b, 0))]));
        }
        let mut w = simplify(&Expr::add(terms));
        for o in 0..=top {
            map.insert(jet('w', a, o), w.clone());
            if o < top {
                w = simplify(&dv.apply(&w, &sys.states));
            }
        }
    }
    psi.iter().map(|e| simplify(&e.substitute(&map))).collect()
}

/// 𝒜⁻: rewrites v-jets in the potentials of Ω through w-jets, then turns
/// the w-jets that appear into new states.
pub fn unaugment(
    sys: &OdeModel,
    omega: &Codistribution,
    htilde: &[Expr],
    munu: &MuNu,
    kstar: Option<usize>,
    oracle: &RankOracle,
) -> Result<(OdeModel, Codistribution)> {
    let pots = omega.potentials().ok_or(Error::MissingPotentials)?;
    let mut vjets: BTreeMap<usize, usize> = BTreeMap::new();
    for p in &pots {
        for v in p.free_vars() {
            if let Some(('v', b, o)) = parse_jet(&v) {
                let e = vjets.entry(b).or_insert(0);
                *e = (*e).max(o);
            }
        }
    }
    if vjets.is_empty() {
        return Ok((sys.clone(), omega.clone()));
    }
    let m = munu.m();
    let n = sys.n();
    let mut field = sys.drift.clone();
    for (j, g) in sys.g.iter().enumerate() {
        for r in 0..n {
            if !g[r].is_zero() {
                field[r] = Expr::add(vec![field[r].clone(), Expr::mul(vec![g[r].clone(), Expr::var(&jet('w', j + 1, 0))])]);
            }
        }
    }
    let dw = Derivation { field: field.iter().map(simplify).collect(), time: true, jets: true };
    let mut map = BTreeMap::new();
    for (b, top) in vjets {
        let mut terms = vec![munu.mu_ab(0, b).clone()];
        for g in 1..=m {
            terms.push(Expr::mul(vec![munu.mu_ab(g, b).clone(), Expr::var(&jet('w', g, 0))]));
        }
        if kstar == Some(1) {
            for k in m + 1..=sys.m_w() {
                let c = simplify(&lie_scalar(&sys.g[k - 1], &htilde[b - 1], &sys.states));
                terms.push(Expr::mul(vec![c, Expr::var(&jet('w', k, 0))]));
            }
        }
        let mut v = simplify(&Expr::add(terms));
        for o in 0..=top {
            map.insert(jet('v', b, o), v.clone());
            if o < top {
                v = simplify(&dw.apply(&v, &sys.states));
            }
        }
    }
    let pots: Vec<Expr> = pots.iter().map(|p| simplify(&p.substitute(&map))).collect();
    let mut orders: BTreeMap<usize, usize> = BTreeMap::new();
    for p in &pots {
        for v in p.free_vars() {
            if let Some(('w', a, o)) = parse_jet(&v) {
                let e = orders.entry(a).or_insert(0);
                *e = (*e).max(o);
            }
        }
    }
    let mut out = sys.clone();
    let mut names = BTreeMap::new();
    for (a, top) in orders {
        let (source, base) = out.ui_origin[a - 1].clone();
        for l in 0..=top {
            names.insert(jet('w', a, l), Expr::var(&derivative_name(&source, base + l)));
        }
        out = extend_ui(&out, a, top + 1);
    }
    let pots: Vec<Expr> = pots.iter().map(|p| simplify(&p.substitute(&names))).collect();
    let leftover: BTreeSet<String> = pots.iter().flat_map(|p| p.free_vars()).filter(|v| parse_jet(v).is_some()).collect();
    if !leftover.is_empty() {
        return Err(Error::NonConvergence(format!("unresolved jets {:?}", leftover)));
    }
    let om = Codistribution::from_potentials(&out.states, &pots, oracle)?;
    Ok((out, om))
}
