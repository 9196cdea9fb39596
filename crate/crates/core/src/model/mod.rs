//! Model schema: general form with parameters, the input-affine form used by
//! the analysis, conversion between them, and built-in models.

mod builtin;
mod json;

pub use builtin::{builtin, builtin_names};
pub use json::{parse_model_json, ModelFile, ScenarioFile};

use crate::error::{Error, Result};
use crate::symexpr::{derive, diff, zero_test, Expr, Sampler};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub const TIME: &str = "t";

pub type VectorField = Vec<Expr>;
pub type CovectorField = Vec<Expr>;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub initial: BTreeMap<String, f64>,
    pub params: BTreeMap<String, f64>,
    /// Profiles of time-varying parameters and inputs as expressions in t.
    pub tv_profiles: BTreeMap<String, Expr>,
    pub t_span: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct GeneralModel {
    pub name: String,
    pub states: Vec<String>,
    pub known_inputs: Vec<String>,
    /// Inputs that must already enter affinely; never appended to the state.
    pub unknown_inputs: Vec<String>,
    pub constant_params: Vec<String>,
    /// Time-varying parameters; kept as unknown inputs when they enter
    /// affinely, otherwise appended to the state.
    pub tv_params: Vec<String>,
    pub dynamics: Vec<Expr>,
    pub outputs: Vec<Expr>,
    pub scenarios: BTreeMap<String, Scenario>,
    /// Quantities that must stay positive along flows (admissibility).
    pub positive: Vec<String>,
}

/// Role of a state component of the affine model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateKind {
    State,
    KnownInput { source: String, order: usize },
    UnknownInput { source: String, order: usize },
    Constant,
}

/// Input-affine system: x' = g0 + sum f^k u_k + sum g^j w_j, y = h(x).
#[derive(Clone, Debug)]
pub struct OdeModel {
    pub name: String,
    pub states: Vec<String>,
    pub state_kinds: Vec<StateKind>,
    pub known_inputs: Vec<String>,
    pub unknown_inputs: Vec<String>,
    /// Original parameter and derivative order of each unknown input.
    pub ui_origin: Vec<(String, usize)>,
    pub known_origin: Vec<(String, usize)>,
    pub drift: VectorField,
    pub f: Vec<VectorField>,
    pub g: Vec<VectorField>,
    pub outputs: Vec<Expr>,
    pub scenarios: BTreeMap<String, Scenario>,
    pub positive: Vec<String>,
}

impl OdeModel {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn m_u(&self) -> usize {
        self.f.len()
    }

    pub fn m_w(&self) -> usize {
        self.g.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn time_varying(&self) -> bool {
        self.drift
            .iter()
            .chain(self.f.iter().flatten())
            .chain(self.g.iter().flatten())
            .chain(self.outputs.iter())
            .any(|e| e.contains_var(TIME))
    }

    /// Field for index alpha: 0 is the drift, j >= 1 is g^j.
    pub fn g_alpha(&self, alpha: usize) -> &VectorField {
        if alpha == 0 {
            &self.drift
        } else {
            &self.g[alpha - 1]
        }
    }

    /// Right-hand side with inputs as free symbols.
    pub fn full_rhs(&self) -> VectorField {
        (0..self.n())
            .map(|i| {
                let mut terms = vec![self.drift[i].clone()];
                for (k, fk) in self.f.iter().enumerate() {
                    terms.push(Expr::mul(vec![fk[i].clone(), Expr::var(&self.known_inputs[k])]));
                }
                for (j, gj) in self.g.iter().enumerate() {
                    terms.push(Expr::mul(vec![gj[i].clone(), Expr::var(&self.unknown_inputs[j])]));
                }
                Expr::add(terms)
            })
            .collect()
    }

    /// Appends new state components (with zero rows in all fields).
    pub fn pad_fields(&mut self, extra: usize) {
        let z = Expr::zero();
        self.drift.extend(std::iter::repeat_n(z.clone(), extra));
        for f in self.f.iter_mut().chain(self.g.iter_mut()) {
            f.extend(std::iter::repeat_n(z.clone(), extra));
        }
    }

    /// A short deterministic digest of the model definition.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.states.join(","));
        s.push('|');
        for e in self.full_rhs().iter().chain(self.outputs.iter()) {
            s.push_str(&e.to_string());
            s.push(';');
        }
        format!("{:016x}", crate::symexpr::name_hash(&s))
    }
}

fn is_zero_expr(e: &Expr) -> Result<bool> {
    if e.is_zero() {
        return Ok(true);
    }
    Ok(zero_test(e, &Sampler::default(), 8)?.zero)
}

impl GeneralModel {
    pub fn all_names(&self) -> Vec<&String> {
        self.states
            .iter()
            .chain(&self.known_inputs)
            .chain(&self.unknown_inputs)
            .chain(&self.constant_params)
            .chain(&self.tv_params)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in self.all_names() {
            if n == TIME {
                return Err(Error::Validation("'t' is reserved for time".into()));
            }
            if !is_identifier(n) {
                return Err(Error::Validation(format!("invalid name '{}'", n)));
            }
            if !seen.insert(n.clone()) {
                return Err(Error::Validation(format!("duplicate name '{}'", n)));
            }
        }
        if self.states.is_empty() {
            return Err(Error::Validation("model has no states".into()));
        }
        if self.dynamics.len() != self.states.len() {
            return Err(Error::Validation("one dynamics row per state is required".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::Validation("model has no outputs".into()));
        }
        for e in self.dynamics.iter().chain(self.outputs.iter()) {
            for v in e.free_vars() {
                if v != TIME && !seen.contains(&v) {
                    return Err(Error::Validation(format!("undeclared variable '{}'", v)));
                }
            }
        }
        Ok(())
    }

    /// Converts to the input-affine form. Inputs that enter non-affinely (or
    /// appear in the outputs) are appended to the state with their time
    /// derivative as the new input; constants are appended at the tail.
    pub fn to_affine(&self) -> Result<OdeModel> {
        self.validate()?;
        let inputs: Vec<&String> =
            self.known_inputs.iter().chain(&self.unknown_inputs).chain(&self.tv_params).collect();
        let mut affine: HashMap<&str, bool> = HashMap::new();
        for s in &inputs {
            let mut ok = !self.outputs.iter().any(|h| h.contains_var(s));
            if ok {
                'rows: for row in &self.dynamics {
                    if !row.contains_var(s) {
                        continue;
                    }
                    let d = diff(row, s);
                    for s2 in &inputs {
                        if !is_zero_expr(&diff(&d, s2))? {
                            ok = false;
                            break 'rows;
                        }
                    }
                }
            }
            affine.insert(s.as_str(), ok);
        }
        for s in &self.unknown_inputs {
            if !affine[s.as_str()] {
                if self.outputs.iter().any(|h| h.contains_var(s)) {
                    return Err(Error::NonAffineOutput(s.clone()));
                }
                return Err(Error::Validation(format!("unknown input '{}' does not enter affinely", s)));
            }
        }
        let mut states = self.states.clone();
        let mut kinds = vec![StateKind::State; states.len()];
        let mut rows = self.dynamics.clone();
        let mut known: Vec<(String, String, usize)> = Vec::new();
        let mut unknown: Vec<(String, String, usize)> = Vec::new();
        for u in &self.known_inputs {
            if affine[u.as_str()] {
                known.push((u.clone(), u.clone(), 0));
            } else {
                let d = derivative_name(u, 1);
                states.push(u.clone());
                kinds.push(StateKind::KnownInput { source: u.clone(), order: 0 });
                rows.push(Expr::var(&d));
                known.push((d, u.clone(), 1));
            }
        }
        for w in self.unknown_inputs.iter().chain(&self.tv_params) {
            if affine[w.as_str()] {
                unknown.push((w.clone(), w.clone(), 0));
            } else {
                let d = derivative_name(w, 1);
                states.push(w.clone());
                kinds.push(StateKind::UnknownInput { source: w.clone(), order: 0 });
                rows.push(Expr::var(&d));
                unknown.push((d, w.clone(), 1));
            }
        }
        for q in &self.constant_params {
            states.push(q.clone());
            kinds.push(StateKind::Constant);
            rows.push(Expr::zero());
        }
        let mut zero_map: BTreeMap<String, Expr> = BTreeMap::new();
        for (name, _, _) in known.iter().chain(unknown.iter()) {
            zero_map.insert(name.clone(), Expr::zero());
        }
        let drift: Vec<Expr> = rows.iter().map(|r| r.substitute(&zero_map)).collect();
        let coeff = |name: &str| -> Vec<Expr> {
            let mut seeds = HashMap::new();
            seeds.insert(name.to_string(), Expr::one());
            rows.iter().map(|r| derive(r, &seeds)).collect()
        };
        let f: Vec<VectorField> = known.iter().map(|(n, _, _)| coeff(n)).collect();
        let g: Vec<VectorField> = unknown.iter().map(|(n, _, _)| coeff(n)).collect();
        for field in f.iter().chain(g.iter()) {
            for e in field {
                for (n, _, _) in known.iter().chain(unknown.iter()) {
                    if e.contains_var(n) {
                        return Err(Error::Validation(format!("input '{}' enters non-affinely", n)));
                    }
                }
            }
        }
        Ok(OdeModel {
            name: self.name.clone(),
            states,
            state_kinds: kinds,
            known_inputs: known.iter().map(|k| k.0.clone()).collect(),
            unknown_inputs: unknown.iter().map(|k| k.0.clone()).collect(),
            ui_origin: unknown.iter().map(|k| (k.1.clone(), k.2)).collect(),
            known_origin: known.iter().map(|k| (k.1.clone(), k.2)).collect(),
            drift,
            f,
            g,
            outputs: self.outputs.clone(),
            scenarios: self.scenarios.clone(),
            positive: self.positive.clone(),
        })
    }
}

pub fn derivative_name(base: &str, order: usize) -> String {
    if order == 0 {
        base.to_string()
    } else {
        format!("{}_d{}", base, order)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    match c.next() {
        Some(ch) if ch.is_ascii_alphabetic() || ch == '_' => {}
        _ => return false,
    }
    c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}
