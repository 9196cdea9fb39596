//! Closed-form finite transformations of the built-in models.

use crate::error::{Error, Result};
use crate::model::builtin;
use crate::symexpr::{eval_float, parse, EvaluationPoint, Expr};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub const TAU: &str = "tau";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedForm {
    Hiv,
    SeiarSym1,
    SeiarSym2,
    /// Toggle substitution sets 1..=6; 4..=6 mirror 1..=3 with indices swapped.
    Toggle(usize),
}

impl FromStr for ClosedForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hiv" => Ok(ClosedForm::Hiv),
            "seiar_sym1" => Ok(ClosedForm::SeiarSym1),
            "seiar_sym2" => Ok(ClosedForm::SeiarSym2),
            _ => s
                .strip_prefix("toggle_set")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| (1..=6).contains(k))
                .map(ClosedForm::Toggle)
                .ok_or_else(|| Error::Validation(format!("unknown closed form '{}'", s))),
        }
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosedForm::Hiv => write!(f, "hiv"),
            ClosedForm::SeiarSym1 => write!(f, "seiar_sym1"),
            ClosedForm::SeiarSym2 => write!(f, "seiar_sym2"),
            ClosedForm::Toggle(k) => write!(f, "toggle_set{}", k),
        }
    }
}

impl ClosedForm {
    pub fn model(&self) -> &'static str {
        match self {
            ClosedForm::Hiv => "hiv",
            ClosedForm::SeiarSym1 | ClosedForm::SeiarSym2 => "seiar",
            ClosedForm::Toggle(_) => "toggle",
        }
    }

    pub fn all() -> Vec<ClosedForm> {
        let mut v = vec![ClosedForm::Hiv, ClosedForm::SeiarSym1, ClosedForm::SeiarSym2];
        v.extend((1..=6).map(ClosedForm::Toggle));
        v
    }
}

fn p(s: &str) -> Expr {
    parse(s).expect("closed-form expression")
}

/// Swaps indices 1 and 2 inside identifiers, leaving numeric literals alone.
fn mirror(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev: Option<char> = None;
    let mut in_ident = false;
    for c in s.chars() {
        in_ident = if c.is_alphabetic() || c == '_' { true } else { in_ident && c.is_alphanumeric() };
        let ident_digit = in_ident && c.is_ascii_digit() && prev.is_some_and(|p| p.is_alphanumeric());
        out.push(match c {
            '1' if ident_digit => '2',
            '2' if ident_digit => '1',
            _ => c,
        });
        prev = Some(c);
    }
    out
}

fn toggle_set(k: usize) -> Vec<(String, String)> {
    let base: Vec<(&str, &str)> = match (k - 1) % 3 {
        0 => vec![
            ("W1", "x2*((1 - n1*(1 + (x2/W1)^n1)*tau)/((x2/W1)^n1 + n1*(x2/W1)^n1*tau + n1*tau))^(1/n1)"),
            ("k01", "k01 + n1*k1*tau"),
        ],
        1 => vec![("W1", "x2*(1/((1 + (x2/W1)^n1)*exp(n1*tau) - 1))^(1/n1)"), ("k1", "k1*exp(n1*tau)")],
        _ => vec![("W1", "x2*exp(exp(-tau)*log(W1/x2))"), ("n1", "n1*exp(tau)")],
    };
    base.into_iter()
        .map(|(a, b)| if k > 3 { (mirror(a), mirror(b)) } else { (a.to_string(), b.to_string()) })
        .collect()
}

/// Transformed quantities as expressions in the baseline names and `tau`;
/// quantities not listed are unchanged.
pub fn closed_form_exprs(kind: ClosedForm) -> BTreeMap<String, Expr> {
    let pairs: Vec<(String, String)> = match kind {
        ClosedForm::Hiv => [
            ("T_U", "T_U + T_I - T_I/rho*(delta*exp(-rho*tau) + rho - delta)"),
            ("T_I", "T_I/rho*(delta*exp(-rho*tau) + rho - delta)"),
            ("delta", "delta*rho/((rho - delta)*exp(rho*tau) + delta)"),
            ("N", "N*exp(rho*tau)"),
            (
                "eta",
                "(eta*T_U*V*rho*exp(rho*tau) + (T_I*delta^2 - T_I*delta*rho - eta*T_U*V*delta)*(exp(rho*tau) - 1))\
                 /(V*(T_I*delta + T_U*rho)*exp(rho*tau) - V*T_I*delta)",
            ),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect(),
        ClosedForm::SeiarSym1 => [("S", "S + tau"), ("R", "R - tau"), ("beta", "beta*S/(S + tau)")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        ClosedForm::SeiarSym2 => [
            ("S", "S + E*(1 - exp(-tau))"),
            ("E", "E*exp(-tau)"),
            ("gamma", "gamma*exp(tau)"),
            ("beta", "(gamma*E/(A + I)*(1 - exp(tau)) - S*beta)/(E - (E + S)*exp(tau))"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect(),
        ClosedForm::Toggle(k) => toggle_set(k),
    };
    pairs.into_iter().map(|(a, b)| (a, p(&b))).collect()
}

#[cfg(test)]
#[test]
fn mirror_keeps_literals() {
    assert_eq!(mirror("k01 + n1*(1 + (x2/W1)^n1)*2"), "k02 + n2*(1 + (x1/W2)^n2)*2");
}

/// Evaluates a closed form at one time point. `baseline` binds every name the
/// expressions use; the result holds all baseline names, transformed or not.
pub fn closed_form(kind: ClosedForm, tau: f64, baseline: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let positive = builtin(kind.model())?.positive;
    let mut pt = EvaluationPoint::new();
    for (k, v) in baseline {
        pt.bind_float(k, *v);
    }
    pt.bind_float(TAU, tau);
    let mut out = baseline.clone();
    for (name, e) in closed_form_exprs(kind) {
        let (v, _) = eval_float(&e, &pt)?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("{}' is not finite at tau={}", name, tau)));
        }
        if v < 0.0 && positive.contains(&name) {
            return Err(Error::Domain(format!("{}' is negative at tau={}", name, tau)));
        }
        out.insert(name, v);
    }
    Ok(out)
}

/// Residuals of the two toggle production-rate identities after substituting
/// a closed-form set; both vanish identically.
pub fn toggle_residuals(set: usize) -> [Expr; 2] {
    let subs = closed_form_exprs(ClosedForm::Toggle(set));
    let rate = |i: &str, j: &str| p(&format!("k0{i} + k{i}/(1 + (x{j}/W{i})^n{i})"));
    let mut out = Vec::new();
    for (i, j) in [("1", "2"), ("2", "1")] {
        let r = rate(i, j);
        out.push(Expr::sub(r.substitute(&subs), r));
    }
    [out[0].clone(), out[1].clone()]
}
