use super::{GeneralModel, Scenario};
use crate::error::{Error, Result};
use crate::symexpr::{parse, Expr};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub initial: BTreeMap<String, f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub tv_profiles: BTreeMap<String, String>,
    pub t_span: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub known_inputs: Vec<String>,
    #[serde(default)]
    pub unknown_inputs: Vec<String>,
    #[serde(default)]
    pub constant_params: Vec<String>,
    #[serde(default)]
    pub tv_params: Vec<String>,
    pub dynamics: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub scenarios: BTreeMap<String, ScenarioFile>,
}

fn line_col_offset(text: &str, line: usize, col: usize) -> usize {
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + col.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    text.len()
}

fn parse_field(src: &str, what: &str) -> Result<Expr> {
    parse(src).map_err(|e| match e {
        Error::Syntax { offset, message } => Error::Syntax { offset, message: format!("{}: {}", what, message) },
        other => other,
    })
}

/// Parses and validates a JSON model document.
pub fn parse_model_json(text: &str) -> Result<GeneralModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            Error::Validation(e.to_string())
        } else {
            Error::Syntax { offset: line_col_offset(text, e.line(), e.column()), message: e.to_string() }
        }
    })?;
    file.into_model()
}

impl ModelFile {
    pub fn into_model(self) -> Result<GeneralModel> {
        let mut dynamics = Vec::with_capacity(self.states.len());
        for s in &self.states {
            let src = self
                .dynamics
                .get(s)
                .ok_or_else(|| Error::Validation(format!("missing dynamics for state '{}'", s)))?;
            dynamics.push(parse_field(src, &format!("dynamics of {}", s))?);
        }
        for k in self.dynamics.keys() {
            if !self.states.contains(k) {
                return Err(Error::Validation(format!("dynamics given for unknown state '{}'", k)));
            }
        }
        let outputs = self
            .outputs
            .iter()
            .enumerate()
            .map(|(i, s)| parse_field(s, &format!("output {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let mut scenarios = BTreeMap::new();
        for (name, sc) in self.scenarios {
            let mut tv = BTreeMap::new();
            for (k, v) in sc.tv_profiles {
                let e = parse_field(&v, &format!("profile {}", k))?;
                if let Some(bad) = e.free_vars().into_iter().find(|v| v != super::TIME) {
                    return Err(Error::Validation(format!("profile of '{}' uses '{}'; only t is allowed", k, bad)));
                }
                tv.insert(k, e);
            }
            if !(sc.t_span[0].is_finite() && sc.t_span[1].is_finite() && sc.t_span[1] > sc.t_span[0]) {
                return Err(Error::Validation(format!("scenario '{}' has an invalid t_span", name)));
            }
            scenarios.insert(
                name,
                Scenario { initial: sc.initial, params: sc.params, tv_profiles: tv, t_span: (sc.t_span[0], sc.t_span[1]) },
            );
        }
        let gm = GeneralModel {
            name: self.name,
            states: self.states,
            known_inputs: self.known_inputs,
            unknown_inputs: self.unknown_inputs,
            constant_params: self.constant_params,
            tv_params: self.tv_params,
            dynamics,
            outputs,
            scenarios,
            positive: Vec::new(),
        };
        gm.validate()?;
        let names: Vec<&String> = gm.all_names();
        for (sname, sc) in &gm.scenarios {
            for k in sc.initial.keys().chain(sc.params.keys()).chain(sc.tv_profiles.keys()) {
                if !names.contains(&k) {
                    return Err(Error::Validation(format!("scenario '{}' refers to unknown name '{}'", sname, k)));
                }
            }
        }
        Ok(gm)
    }
}
