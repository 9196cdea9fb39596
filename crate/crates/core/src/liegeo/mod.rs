//! Lie derivatives and brackets, generic rank, invariant closures of
//! codistributions and distributions, and symbolic null spaces.

mod nullspace;
mod rank;

pub use nullspace::{inverse, null_space};
pub use rank::{generic_rank, independent_rows, RankOracle, RankReport, RankTracker, RANK_TOL};

use crate::error::{Error, Result};
use crate::model::{CovectorField, VectorField, TIME};
use crate::symexpr::{derive, diff, rational_simplify, zero_test, Expr};
use std::collections::HashMap;

/// Default cap on the DAG size of any generated expression.
pub const NODE_CAP: usize = 20000;

/// Name of the order-`order` time derivative of jet variable `alpha` in
/// family `prefix` ('v' or 'w').
pub fn jet(prefix: char, alpha: usize, order: usize) -> String {
    format!("{}#{}#{}", prefix, alpha, order)
}

pub fn parse_jet(name: &str) -> Option<(char, usize, usize)> {
    let mut it = name.split('#');
    let p = it.next()?;
    let a = it.next()?.parse().ok()?;
    let o = it.next()?.parse().ok()?;
    if it.next().is_some() || p.len() != 1 {
        return None;
    }
    Some((p.chars().next()?, a, o))
}

pub fn is_jet(name: &str) -> bool {
    parse_jet(name).is_some()
}

pub fn gradient(l: &Expr, states: &[String]) -> CovectorField {
    states.iter().map(|x| diff(l, x)).collect()
}

fn seeds_for(f: &[Expr], states: &[String]) -> HashMap<String, Expr> {
    let mut seeds = HashMap::new();
    for (x, fx) in states.iter().zip(f) {
        if !fx.is_zero() {
            seeds.insert(x.clone(), fx.clone());
        }
    }
    seeds
}

/// L_f λ = ∇λ · f.
pub fn lie_scalar(f: &[Expr], l: &Expr, states: &[String]) -> Expr {
    derive(l, &seeds_for(f, states))
}

/// [f, τ] = ∂τ/∂x f − ∂f/∂x τ.
pub fn lie_bracket(f: &[Expr], tau: &[Expr], states: &[String]) -> VectorField {
    let sf = seeds_for(f, states);
    let st = seeds_for(tau, states);
    f.iter()
        .zip(tau)
        .map(|(fi, ti)| Expr::sub(derive(ti, &sf), derive(fi, &st)))
        .collect()
}

/// Lie derivative of a covector field: (L_f ω)_i = Σ_j ∂ω_i/∂x_j f_j + ω_j ∂f_j/∂x_i.
pub fn lie_covector(f: &[Expr], w: &[Expr], states: &[String]) -> CovectorField {
    let sf = seeds_for(f, states);
    states
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut terms = vec![derive(&w[i], &sf)];
            for (wj, fj) in w.iter().zip(f) {
                if !wj.is_zero() {
                    terms.push(Expr::mul(vec![wj.clone(), diff(fj, xi)]));
                }
            }
            Expr::add(terms)
        })
        .collect()
}

/// Autobracket Σ_β σ^γ_β [τ^β, f] + δ^γ_0 ∂f/∂t.
pub fn autobracket(
    f: &[Expr],
    gamma: usize,
    taus: &[VectorField],
    sigma: &[Vec<Expr>],
    time_varying: bool,
    states: &[String],
) -> VectorField {
    let n = f.len();
    let mut acc: Vec<Vec<Expr>> = vec![Vec::new(); n];
    for (beta, tau) in taus.iter().enumerate() {
        let s = &sigma[gamma][beta];
        if s.is_zero() {
            continue;
        }
        let br = lie_bracket(tau, f, states);
        for (a, b) in acc.iter_mut().zip(br) {
            a.push(Expr::mul(vec![s.clone(), b]));
        }
    }
    if gamma == 0 && time_varying {
        for (a, fi) in acc.iter_mut().zip(f) {
            a.push(diff(fi, TIME));
        }
    }
    acc.into_iter().map(|t| simplify(&Expr::add(t))).collect()
}

/// Simplifies rational expressions through polynomial arithmetic.
pub fn simplify(e: &Expr) -> Expr {
    if e.as_num().is_some() || e.as_var().is_some() {
        return e.clone();
    }
    if e.is_rational_function() {
        rational_simplify(e)
    } else {
        e.clone()
    }
}

/// A first-order differential operator on scalar fields: Lie derivative along
/// a field, optionally with ∂/∂t and the jet shift Σ s^(i+1) ∂/∂s^(i).
#[derive(Clone, Debug)]
pub struct Derivation {
    pub field: VectorField,
    pub time: bool,
    pub jets: bool,
}

impl Derivation {
    pub fn along(field: VectorField) -> Self {
        Derivation { field, time: false, jets: false }
    }

    pub fn dotted(field: VectorField, time: bool) -> Self {
        Derivation { field, time, jets: true }
    }

    fn seeds(&self, free: &[String], states: &[String]) -> HashMap<String, Expr> {
        let mut seeds = seeds_for(&self.field, states);
        if self.time {
            seeds.insert(TIME.to_string(), Expr::one());
        }
        if self.jets {
            for v in free {
                if let Some((p, a, o)) = parse_jet(v) {
                    seeds.insert(v.clone(), Expr::var(&jet(p, a, o + 1)));
                }
            }
        }
        seeds
    }

    pub fn apply(&self, l: &Expr, states: &[String]) -> Expr {
        let free = if self.jets { l.free_vars() } else { Vec::new() };
        derive(l, &self.seeds(&free, states))
    }

    /// Action on a covector field (Lie derivative plus componentwise extras).
    pub fn apply_covector(&self, w: &[Expr], states: &[String]) -> CovectorField {
        let base = lie_covector(&self.field, w, states);
        if !self.time && !self.jets {
            return base;
        }
        let extra = Derivation { field: vec![Expr::zero(); self.field.len()], time: self.time, jets: self.jets };
        base.iter().zip(w).map(|(b, wi)| Expr::add(vec![b.clone(), extra.apply(wi, states)])).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Covector {
    pub potential: Option<Expr>,
    pub row: CovectorField,
}

/// Codistribution given by independent generators over named coordinates.
#[derive(Clone, Debug)]
pub struct Codistribution {
    pub states: Vec<String>,
    pub gens: Vec<Covector>,
}

impl Codistribution {
    pub fn empty(states: &[String]) -> Self {
        Codistribution { states: states.to_vec(), gens: Vec::new() }
    }

    /// Span of the gradients, keeping only independent ones.
    pub fn from_potentials(states: &[String], pots: &[Expr], oracle: &RankOracle) -> Result<Self> {
        let mut c = Codistribution::empty(states);
        let mut t = oracle.tracker(states.len());
        for p in pots {
            c.try_add_potential(&mut t, p.clone())?;
        }
        Ok(c)
    }

    pub fn from_rows(states: &[String], rows: &[CovectorField], oracle: &RankOracle) -> Result<Self> {
        let mut c = Codistribution::empty(states);
        let mut t = oracle.tracker(states.len());
        for r in rows {
            if t.add(r.clone())? {
                c.gens.push(Covector { potential: None, row: r.clone() });
            }
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.gens.len()
    }

    pub fn rows(&self) -> Vec<CovectorField> {
        self.gens.iter().map(|g| g.row.clone()).collect()
    }

    pub fn potentials(&self) -> Option<Vec<Expr>> {
        self.gens.iter().map(|g| g.potential.clone()).collect()
    }

    pub fn tracker(&self, oracle: &RankOracle) -> Result<RankTracker> {
        let mut t = oracle.tracker(self.n());
        for g in &self.gens {
            t.add(g.row.clone())?;
        }
        Ok(t)
    }

    fn try_add_potential(&mut self, t: &mut RankTracker, p: Expr) -> Result<bool> {
        let row = gradient(&p, &self.states);
        if t.add(row.clone())? {
            self.gens.push(Covector { potential: Some(p), row });
            return Ok(true);
        }
        Ok(false)
    }

    /// Adds generators given by potentials; returns how many were independent.
    pub fn extend_potentials(&mut self, pots: &[Expr], oracle: &RankOracle) -> Result<usize> {
        let mut t = self.tracker(oracle)?;
        let mut k = 0;
        for p in pots {
            if self.try_add_potential(&mut t, p.clone())? {
                k += 1;
            }
        }
        Ok(k)
    }

    pub fn extend(&mut self, other: &Codistribution, oracle: &RankOracle) -> Result<usize> {
        let mut t = self.tracker(oracle)?;
        let mut k = 0;
        for g in &other.gens {
            if t.add(g.row.clone())? {
                self.gens.push(g.clone());
                k += 1;
            }
        }
        Ok(k)
    }

    pub fn contains(&self, w: &[Expr], oracle: &RankOracle) -> Result<bool> {
        self.tracker(oracle)?.contains(w)
    }

    pub fn contains_gradient(&self, l: &Expr, oracle: &RankOracle) -> Result<bool> {
        self.contains(&gradient(l, &self.states), oracle)
    }

    /// Whether g annihilates every generator.
    pub fn in_orthogonal(&self, g: &[Expr], oracle: &RankOracle) -> Result<bool> {
        let s = oracle.sampler();
        for c in &self.gens {
            let e = Expr::add(c.row.iter().zip(g).map(|(a, b)| Expr::mul(vec![a.clone(), b.clone()])).collect());
            if !zero_test(&e, &s, oracle.trials)?.zero {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Zero-pads every generator to the new coordinate list (a superset).
    pub fn pad_to(&self, states: &[String]) -> Codistribution {
        let gens = self
            .gens
            .iter()
            .map(|g| {
                let row = states
                    .iter()
                    .map(|s| match self.states.iter().position(|x| x == s) {
                        Some(i) => g.row[i].clone(),
                        None => match &g.potential {
                            Some(p) => diff(p, s),
                            None => Expr::zero(),
                        },
                    })
                    .collect();
                Covector { potential: g.potential.clone(), row }
            })
            .collect();
        Codistribution { states: states.to_vec(), gens }
    }

    /// Projection onto the given coordinates: truncates each gradient.
    pub fn project(&self, coords: &[String], oracle: &RankOracle) -> Result<Codistribution> {
        let idx: Vec<usize> = coords.iter().map(|c| self.states.iter().position(|s| s == c).unwrap()).collect();
        let rows: Vec<CovectorField> =
            self.gens.iter().map(|g| idx.iter().map(|i| g.row[*i].clone()).collect()).collect();
        Codistribution::from_rows(coords, &rows, oracle)
    }
}

/// Options shared by the closure loops.
#[derive(Clone, Debug)]
pub struct ClosureOptions {
    pub node_cap: usize,
    pub max_rounds: usize,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions { node_cap: NODE_CAP, max_rounds: 1000 }
    }
}

#[derive(Clone, Debug)]
pub struct Closure<T> {
    pub result: T,
    /// Smallest j with Ω_j = Ω_{j−1}.
    pub steps: usize,
}

fn check_cap(e: &Expr, cap: usize) -> Result<()> {
    let n = e.dag_size();
    if n > cap {
        return Err(Error::NodeCap { nodes: n, cap });
    }
    Ok(())
}

fn scalar_vanishes(l: &Expr, oracle: &RankOracle) -> Result<bool> {
    Ok(l.is_zero() || zero_test(l, &oracle.sampler(), oracle.trials)?.zero)
}

fn vector_vanishes(v: &[Expr], oracle: &RankOracle) -> Result<bool> {
    let s = oracle.sampler();
    for d in v {
        if !d.is_zero() && !zero_test(d, &s, oracle.trials)?.zero {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest codistribution containing Ω and invariant under `ops`. With a
/// condition (ξ, ζ), L_ξ ω is added only for generators ω whose derivatives
/// along every ζ vanish identically (for ω = ∇λ: L_ζ λ ≡ 0).
pub fn codistribution_closure(
    omega: &Codistribution,
    ops: &[Derivation],
    conditional: Option<(&[Derivation], &[VectorField])>,
    oracle: &RankOracle,
    opts: &ClosureOptions,
) -> Result<Closure<Codistribution>> {
    let states = omega.states.clone();
    let mut out = omega.clone();
    let mut t = out.tracker(oracle)?;
    let mut frontier: Vec<Covector> = out.gens.clone();
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > opts.max_rounds {
            return Err(Error::IterationCap(opts.max_rounds));
        }
        let mut next = Vec::new();
        for g in &frontier {
            let mut active: Vec<&Derivation> = ops.iter().collect();
            if let Some((xi, zeta)) = conditional {
                let mut pass = true;
                for z in zeta {
                    let zd = Derivation::along(z.clone());
                    let vanishes = match &g.potential {
                        Some(p) => scalar_vanishes(&zd.apply(p, &states), oracle)?,
                        None => vector_vanishes(&zd.apply_covector(&g.row, &states), oracle)?,
                    };
                    if !vanishes {
                        pass = false;
                        break;
                    }
                }
                if pass {
                    active.extend(xi.iter());
                }
            }
            for d in active {
                let cand = match &g.potential {
                    Some(p) => {
                        let l = simplify(&d.apply(p, &states));
                        check_cap(&l, opts.node_cap)?;
                        let row = gradient(&l, &states);
                        Covector { potential: Some(l), row }
                    }
                    None => {
                        let row: Vec<Expr> = d.apply_covector(&g.row, &states).iter().map(simplify).collect();
                        for e in &row {
                            check_cap(e, opts.node_cap)?;
                        }
                        Covector { potential: None, row }
                    }
                };
                if t.add(cand.row.clone())? {
                    out.gens.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        if next.is_empty() {
            return Ok(Closure { result: out, steps });
        }
        frontier = next;
    }
}

/// Distribution spanned by vector-field generators.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub states: Vec<String>,
    pub gens: Vec<VectorField>,
}

impl Distribution {
    pub fn from_fields(states: &[String], fields: &[VectorField], oracle: &RankOracle) -> Result<Self> {
        let mut t = oracle.tracker(states.len());
        let mut gens = Vec::new();
        for f in fields {
            if t.add(f.clone())? {
                gens.push(f.clone());
            }
        }
        Ok(Distribution { states: states.to_vec(), gens })
    }

    pub fn dim(&self) -> usize {
        self.gens.len()
    }

    pub fn tracker(&self, oracle: &RankOracle) -> Result<RankTracker> {
        let mut t = oracle.tracker(self.states.len());
        for g in &self.gens {
            t.add(g.clone())?;
        }
        Ok(t)
    }

    pub fn pad_to(&self, states: &[String]) -> Distribution {
        let gens = self
            .gens
            .iter()
            .map(|g| {
                states
                    .iter()
                    .map(|s| match self.states.iter().position(|x| x == s) {
                        Some(i) => g[i].clone(),
                        None => Expr::zero(),
                    })
                    .collect()
            })
            .collect();
        Distribution { states: states.to_vec(), gens }
    }
}

/// Fields and tensor defining the autobrackets [·]^γ.
#[derive(Clone, Debug)]
pub struct Autobracket {
    pub taus: Vec<VectorField>,
    pub sigma: Vec<Vec<Expr>>,
    pub time_varying: bool,
}

impl Autobracket {
    pub fn apply(&self, f: &[Expr], gamma: usize, states: &[String]) -> VectorField {
        autobracket(f, gamma, &self.taus, &self.sigma, self.time_varying, states)
    }

    pub fn order(&self) -> usize {
        self.taus.len()
    }

    pub fn check(&self, oracle: &RankOracle) -> Result<()> {
        let l = self.taus.len();
        if generic_rank(&self.sigma, l, oracle)?.rank < l {
            return Err(Error::SingularSigma);
        }
        Ok(())
    }
}

/// One closure round: Δ + Σ_γ [Δ]^γ over the frontier. Returns the new
/// generators that raised the rank.
pub fn autobracket_round(
    delta: &mut Distribution,
    frontier: &[VectorField],
    ab: &Autobracket,
    tracker: &mut RankTracker,
    opts: &ClosureOptions,
) -> Result<Vec<VectorField>> {
    let mut next = Vec::new();
    for f in frontier {
        for gamma in 0..ab.order() {
            let v = ab.apply(f, gamma, &delta.states);
            for e in &v {
                check_cap(e, opts.node_cap)?;
            }
            if tracker.add(v.clone())? {
                delta.gens.push(v.clone());
                next.push(v);
            }
        }
    }
    Ok(next)
}

/// Smallest distribution containing Δ and invariant under the autobrackets.
pub fn distribution_closure(
    delta: &Distribution,
    ab: &Autobracket,
    oracle: &RankOracle,
    opts: &ClosureOptions,
) -> Result<Closure<Distribution>> {
    ab.check(oracle)?;
    let mut out = delta.clone();
    let mut t = out.tracker(oracle)?;
    let mut frontier = out.gens.clone();
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > opts.max_rounds {
            return Err(Error::IterationCap(opts.max_rounds));
        }
        let next = autobracket_round(&mut out, &frontier, ab, &mut t, opts)?;
        if next.is_empty() {
            return Ok(Closure { result: out, steps });
        }
        frontier = next;
    }
}

/// Smallest distribution containing Δ and invariant under plain brackets.
pub fn bracket_closure(
    delta: &Distribution,
    fields: &[VectorField],
    oracle: &RankOracle,
    opts: &ClosureOptions,
) -> Result<Closure<Distribution>> {
    let mut out = delta.clone();
    let mut t = out.tracker(oracle)?;
    let mut frontier = out.gens.clone();
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > opts.max_rounds {
            return Err(Error::IterationCap(opts.max_rounds));
        }
        let mut next = Vec::new();
        for f in &frontier {
            for tau in fields {
                let v: VectorField = lie_bracket(tau, f, &out.states).iter().map(simplify).collect();
                if t.add(v.clone())? {
                    out.gens.push(v.clone());
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return Ok(Closure { result: out, steps });
        }
        frontier = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;
    use crate::symexpr::{is_identically_zero, parse, EvaluationPoint, eval_float};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn v(xs: &[&str]) -> Vec<Expr> {
        xs.iter().map(|s| p(s)).collect()
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn assert_vec_zero(a: &[Expr], b: &[Expr]) {
        for (x, y) in a.iter().zip(b) {
            assert!(is_identically_zero(&Expr::sub(x.clone(), y.clone())).unwrap(), "{} != {}", x, y);
        }
    }

    #[test]
    fn lie_scalar_examples() {
        let s = names(&["rho", "phi", "theta"]);
        assert_eq!(lie_scalar(&v(&["0", "0", "1"]), &p("phi - theta"), &s), Expr::int(-1));
        assert!(lie_scalar(&v(&["0", "0", "0"]), &p("phi - theta"), &s).is_zero());
        let m = builtin("hiv").unwrap().to_affine().unwrap();
        let l = lie_scalar(&m.g[0], &p("lambda - rho*T_U - delta*T_I"), &m.states);
        assert!(is_identically_zero(&Expr::sub(l, p("-T_U*V*(delta - rho)"))).unwrap());
    }

    #[test]
    fn unicycle_bracket() {
        let s = names(&["rho", "phi", "theta"]);
        let f1 = v(&["cos(theta - phi)", "sin(theta - phi)/rho", "0"]);
        let g1 = v(&["0", "0", "1"]);
        let br: Vec<Expr> = lie_bracket(&g1, &f1, &s).into_iter().map(|e| -e).collect();
        assert_vec_zero(&br, &v(&["sin(theta - phi)", "-cos(theta - phi)/rho", "0"]));
        assert!(lie_bracket(&f1, &f1, &s).iter().all(|e| is_identically_zero(e).unwrap()));
    }

    #[test]
    fn covector_of_gradient_is_gradient_of_lie_derivative() {
        let s = names(&["x", "y"]);
        let f = v(&["x*y + sin(y)", "x^2 - y"]);
        let l = p("x^3*y + exp(x)");
        let lhs = lie_covector(&f, &gradient(&l, &s), &s);
        let rhs = gradient(&lie_scalar(&f, &l, &s), &s);
        assert_vec_zero(&lhs, &rhs);
        assert!(lie_covector(&v(&["1", "2"]), &v(&["3", "4"]), &s).iter().all(|e| e.is_zero()));
    }

    #[test]
    fn unicycle_autobrackets() {
        let s = names(&["rho", "phi", "theta"]);
        let f1 = v(&["cos(theta - phi)", "sin(theta - phi)/rho", "0"]);
        let taus = vec![v(&["0", "0", "0"]), v(&["0", "0", "1"])];
        let nu = vec![v(&["1", "0"]), v(&["0", "-1"])];
        let a0 = autobracket(&f1, 0, &taus, &nu, false, &s);
        assert!(a0.iter().all(|e| is_identically_zero(e).unwrap()));
        let a1 = autobracket(&f1, 1, &taus, &nu, false, &s);
        assert_vec_zero(&a1, &v(&["sin(theta - phi)", "-cos(theta - phi)/rho", "0"]));
        let ab = Autobracket { taus: taus.clone(), sigma: vec![v(&["1", "0"]), v(&["1", "0"])], time_varying: false };
        assert_eq!(ab.check(&RankOracle::default()).unwrap_err(), Error::SingularSigma);
    }

    #[test]
    fn time_derivative_enters_gamma_zero_only() {
        let s = names(&["x"]);
        let taus = vec![v(&["0"]), v(&["0"])];
        let id = vec![v(&["1", "0"]), v(&["0", "1"])];
        let f = v(&["x*t"]);
        assert_eq!(autobracket(&f, 0, &taus, &id, true, &s), v(&["x"]));
        assert!(autobracket(&f, 1, &taus, &id, true, &s)[0].is_zero());
    }

    #[test]
    fn jacobi_identity() {
        let s = names(&["x", "y"]);
        let (f, g, h) = (v(&["x*y", "y^2 + 1"]), v(&["x^2", "x - y"]), v(&["y", "x*y^3"]));
        let a = lie_bracket(&f, &lie_bracket(&g, &h, &s), &s);
        let b = lie_bracket(&g, &lie_bracket(&h, &f, &s), &s);
        let c = lie_bracket(&h, &lie_bracket(&f, &g, &s), &s);
        for i in 0..2 {
            let e = Expr::add(vec![a[i].clone(), b[i].clone(), c[i].clone()]);
            assert!(is_identically_zero(&e).unwrap());
        }
    }

    #[test]
    fn hiv_first_closure() {
        let m = builtin("hiv").unwrap().to_affine().unwrap();
        let o = RankOracle::default();
        let om = Codistribution::from_potentials(&m.states, &m.outputs, &o).unwrap();
        let c = codistribution_closure(
            &om,
            &[],
            Some((&[Derivation::along(m.drift.clone())], &m.g)),
            &o,
            &ClosureOptions::default(),
        )
        .unwrap();
        assert_eq!(c.result.dim(), 4);
        let pots = c.result.potentials().unwrap();
        assert_eq!(pots[2], p("N*delta*T_I - c*V"));
        assert_eq!(pots[3], p("lambda - rho*T_U - delta*T_I"));
    }

    #[test]
    fn unicycle_s2_output_closure() {
        let s = names(&["rho", "phi", "theta"]);
        let o = RankOracle::default();
        let om = Codistribution::from_potentials(&s, &[p("phi - theta")], &o).unwrap();
        let g1 = v(&["cos(theta - phi)", "sin(theta - phi)/rho", "0"]);
        let c = codistribution_closure(&om, &[Derivation::along(g1)], None, &o, &ClosureOptions::default()).unwrap();
        assert_eq!(c.steps, 2);
        assert_eq!(c.result.dim(), 2);
        assert!(c.result.contains_gradient(&p("sin(theta - phi)/rho"), &o).unwrap());
        let full = Codistribution::from_potentials(&s, &[p("rho"), p("phi"), p("theta")], &o).unwrap();
        let c = codistribution_closure(&full, &[Derivation::along(v(&["1", "rho", "0"]))], None, &o, &ClosureOptions::default()).unwrap();
        assert_eq!(c.result.dim(), 3);
        assert_eq!(c.steps, 1);
    }

    #[test]
    fn unicycle_distribution_closures() {
        let s = names(&["rho", "phi", "theta"]);
        let o = RankOracle::default();
        let opts = ClosureOptions::default();
        let f1 = v(&["cos(theta - phi)", "sin(theta - phi)/rho", "0"]);
        let ab = Autobracket {
            taus: vec![v(&["0", "0", "0"]), v(&["0", "0", "1"])],
            sigma: vec![v(&["1", "0"]), v(&["0", "-1"])],
            time_varying: false,
        };
        let d = Distribution::from_fields(&s, &[f1.clone()], &o).unwrap();
        let c = distribution_closure(&d, &ab, &o, &opts).unwrap();
        assert_eq!(c.result.dim(), 2);
        assert_eq!(c.steps - 1, 1);
        // second scenario: f = e3, tau^1 = the original f1, nu^1_1 = rho/sin(theta - phi)
        let nu = vec![v(&["1", "0"]), v(&["0", "rho/sin(theta - phi)"])];
        let ab2 = Autobracket { taus: vec![v(&["0", "0", "0"]), f1.clone()], sigma: nu, time_varying: false };
        let d = Distribution::from_fields(&s, &[v(&["0", "0", "1"])], &o).unwrap();
        let c = distribution_closure(&d, &ab2, &o, &opts).unwrap();
        // the listed third generator is cot(theta - phi) times the second one
        assert_eq!(c.result.dim(), 2);
        assert_eq!(c.steps - 1, 1);
        let mut t = c.result.tracker(&o).unwrap();
        assert!(t.contains(&v(&["rho", "-cos(theta - phi)/sin(theta - phi)", "0"])).unwrap());
        assert!(t.contains(&v(&["rho*cos(theta - phi)/sin(theta - phi)", "-cos(theta - phi)^2/sin(theta - phi)^2", "0"])).unwrap());
    }

    #[test]
    fn membership_and_orthogonality() {
        let s = names(&["x1", "x2", "x3"]);
        let o = RankOracle::default();
        let om = Codistribution::from_rows(&s, &[v(&["0", "1", "-1"])], &o).unwrap();
        assert!(om.in_orthogonal(&v(&["0", "1", "1"]), &o).unwrap());
        assert!(!om.in_orthogonal(&v(&["0", "1", "0"]), &o).unwrap());
        let om = Codistribution::from_potentials(&s, &[p("x1")], &o).unwrap();
        assert!(om.contains(&v(&["2", "0", "0"]), &o).unwrap());
        assert!(!om.contains_gradient(&p("x1*x2"), &o).unwrap());
    }

    #[test]
    fn jet_shift_in_dotted_derivation() {
        let s = names(&["x"]);
        let l = Expr::mul(vec![Expr::var("x"), Expr::var(&jet('v', 1, 0))]);
        let d = Derivation::dotted(v(&["1"]), false);
        let r = d.apply(&l, &s);
        let mut pt = EvaluationPoint::new();
        pt.bind_float("x", 2.0);
        pt.bind_float(&jet('v', 1, 0), 3.0);
        pt.bind_float(&jet('v', 1, 1), 5.0);
        assert_eq!(eval_float(&r, &pt).unwrap().0, 3.0 + 2.0 * 5.0);
        assert_eq!(parse_jet("w#2#4"), Some(('w', 2, 4)));
        assert_eq!(parse_jet("rho"), None);
    }
}
