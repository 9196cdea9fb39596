use super::{GeneralModel, Scenario};
use crate::error::{Error, Result};
use crate::symexpr::{parse, Expr};
use std::collections::BTreeMap;

const NAMES: &[(&str, &str)] = &[
    ("unicycle_s1", "unicycle with bearing output; linear speed known, angular speed unknown"),
    ("unicycle_s2", "unicycle with bearing output; angular speed known, linear speed unknown"),
    ("hiv", "HIV infection dynamics with time-varying infection rate eta"),
    ("seiar", "SEIAR epidemic model with time-varying contact rate beta"),
    ("toggle", "genetic toggle switch with time-varying W1, W2"),
];

pub fn builtin_names() -> &'static [(&'static str, &'static str)] {
    NAMES
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn exprs(v: &[&str]) -> Vec<Expr> {
    v.iter().map(|s| parse(s).expect("builtin expression")).collect()
}

fn values(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
    v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
}

fn scenario(initial: &[(&str, f64)], params: &[(&str, f64)], tv: &[(&str, &str)], span: (f64, f64)) -> Scenario {
    Scenario {
        initial: values(initial),
        params: values(params),
        tv_profiles: tv.iter().map(|(k, s)| (k.to_string(), parse(s).expect("builtin profile"))).collect(),
        t_span: span,
    }
}

fn unicycle(known: &str, unknown: &str) -> GeneralModel {
    let mut sc = BTreeMap::new();
    sc.insert(
        "demo".to_string(),
        scenario(
            &[("rho", 2.0), ("phi", 0.3), ("theta", 1.0)],
            &[],
            &[("v", "1 + 0.5*sin(t)"), ("omega", "0.3*cos(0.5*t)")],
            (0.0, 10.0),
        ),
    );
    GeneralModel {
        name: if known == "v" { "unicycle_s1".into() } else { "unicycle_s2".into() },
        states: strs(&["rho", "phi", "theta"]),
        known_inputs: strs(&[known]),
        unknown_inputs: strs(&[unknown]),
        constant_params: vec![],
        tv_params: vec![],
        dynamics: exprs(&["v*cos(theta - phi)", "v*sin(theta - phi)/rho", "omega"]),
        outputs: exprs(&["phi - theta"]),
        scenarios: sc,
        positive: strs(&["rho"]),
    }
}

fn hiv() -> GeneralModel {
    let params = [("lambda", 36.0), ("rho", 0.108), ("delta", 0.5), ("N", 1000.0), ("c", 3.0)];
    let eta = [("eta", "9e-5*(1 - 0.9*cos(3.141592653589793*t/1000))")];
    let mut sc = BTreeMap::new();
    sc.insert(
        "default".to_string(),
        scenario(&[("T_U", 600.0), ("T_I", 0.0), ("V", 1e5)], &params, &eta, (0.0, 201.0)),
    );
    sc.insert(
        "infected_start".to_string(),
        scenario(&[("T_U", 600.0), ("T_I", 100.0), ("V", 1e5)], &params, &eta, (0.0, 201.0)),
    );
    GeneralModel {
        name: "hiv".into(),
        states: strs(&["T_U", "T_I", "V"]),
        known_inputs: vec![],
        unknown_inputs: vec![],
        constant_params: strs(&["lambda", "rho", "delta", "N", "c"]),
        tv_params: strs(&["eta"]),
        dynamics: exprs(&["lambda - rho*T_U - eta*T_U*V", "eta*T_U*V - delta*T_I", "N*delta*T_I - c*V"]),
        outputs: exprs(&["V", "T_U + T_I"]),
        scenarios: sc,
        positive: strs(&["T_U", "T_I", "V", "lambda", "rho", "delta", "N", "c", "eta"]),
    }
}

fn seiar() -> GeneralModel {
    let initial = [("S", 1.0 - 1e-10), ("E", 0.0), ("I", 1e-10), ("A", 0.0), ("R", 0.0)];
    let params = [("mu1", 1.0 / 3.0), ("mu2", 0.1), ("gamma", 0.25), ("p", 0.14)];
    let mut sc = BTreeMap::new();
    sc.insert("default".to_string(), scenario(&initial, &params, &[("beta", "1")], (0.0, 200.0)));
    sc.insert(
        "cos".to_string(),
        scenario(&initial, &params, &[("beta", "cos(3.141592653589793*t/400)")], (0.0, 200.0)),
    );
    GeneralModel {
        name: "seiar".into(),
        states: strs(&["S", "E", "I", "A", "R"]),
        known_inputs: vec![],
        unknown_inputs: vec![],
        constant_params: strs(&["mu1", "mu2", "gamma", "p"]),
        tv_params: strs(&["beta"]),
        dynamics: exprs(&[
            "-beta*S*(I + A)",
            "beta*S*(I + A) - gamma*E",
            "gamma*p*E - mu1*I",
            "gamma*(1 - p)*E - mu2*A",
            "mu1*I + mu2*A",
        ]),
        outputs: exprs(&["I", "A", "S + E + R"]),
        scenarios: sc,
        positive: strs(&["S", "R", "mu1", "mu2", "gamma", "p"]),
    }
}

fn toggle() -> GeneralModel {
    let mut sc = BTreeMap::new();
    sc.insert(
        "default".to_string(),
        scenario(
            &[("x1", 1.0), ("x2", 0.5)],
            &[("k01", 0.2), ("k1", 3.0), ("n1", 2.0), ("k02", 0.1), ("k2", 2.5), ("n2", 2.5)],
            &[("W1", "1 + 0.2*sin(0.5*t)"), ("W2", "1.5")],
            (0.0, 20.0),
        ),
    );
    GeneralModel {
        name: "toggle".into(),
        states: strs(&["x1", "x2"]),
        known_inputs: vec![],
        unknown_inputs: vec![],
        constant_params: strs(&["k01", "k1", "n1", "k02", "k2", "n2"]),
        tv_params: strs(&["W1", "W2"]),
        dynamics: exprs(&["k01 + k1/(1 + (x2/W1)^n1) - x1", "k02 + k2/(1 + (x1/W2)^n2) - x2"]),
        outputs: exprs(&["x1", "x2"]),
        scenarios: sc,
        positive: strs(&["x1", "x2", "W1", "W2", "k01", "k1", "n1", "k02", "k2", "n2"]),
    }
}

pub fn builtin(name: &str) -> Result<GeneralModel> {
    match name {
        "unicycle_s1" => Ok(unicycle("v", "omega")),
        "unicycle_s2" => Ok(unicycle("omega", "v")),
        "hiv" => Ok(hiv()),
        "seiar" | "covid" => Ok(seiar()),
        "toggle" => Ok(toggle()),
        _ => Err(Error::UnknownModel(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn hiv_structure() {
        let m = builtin("hiv").unwrap().to_affine().unwrap();
        assert_eq!(m.states, vec!["T_U", "T_I", "V", "lambda", "rho", "delta", "N", "c"]);
        assert_eq!(m.unknown_inputs, vec!["eta"]);
        assert_eq!(m.m_u(), 0);
        let z = Expr::zero();
        let mut g1 = vec![p("-T_U*V"), p("T_U*V")];
        g1.extend(std::iter::repeat_n(z.clone(), 6));
        assert_eq!(m.g[0], g1);
        assert_eq!(m.drift[0], p("lambda - rho*T_U"));
        assert_eq!(m.drift[2], p("N*delta*T_I - c*V"));
        assert!(m.drift[3..].iter().all(|e| e.is_zero()));
        assert!(!m.time_varying());
    }

    #[test]
    fn unicycle_structure() {
        let m = builtin("unicycle_s1").unwrap().to_affine().unwrap();
        assert_eq!(m.outputs, vec![p("phi - theta")]);
        assert_eq!(m.f[0], vec![p("cos(theta - phi)"), p("sin(theta - phi)/rho"), Expr::zero()]);
        assert_eq!(m.g[0], vec![Expr::zero(), Expr::zero(), Expr::one()]);
        assert!(m.drift.iter().all(|e| e.is_zero()));
        let m2 = builtin("unicycle_s2").unwrap().to_affine().unwrap();
        assert_eq!(m2.f[0], m.g[0]);
        assert_eq!(m2.g[0], m.f[0]);
    }

    #[test]
    fn seiar_structure() {
        let m = builtin("seiar").unwrap().to_affine().unwrap();
        assert_eq!(m.outputs, vec![p("I"), p("A"), p("S + E + R")]);
        assert_eq!(m.states, vec!["S", "E", "I", "A", "R", "mu1", "mu2", "gamma", "p"]);
        assert_eq!(m.g[0][0], p("-S*(I + A)"));
        assert_eq!(m.g[0][1], p("S*(I + A)"));
        assert!(m.g[0][2..].iter().all(|e| e.is_zero()));
        assert_eq!(m.scenarios.len(), 2);
    }

    #[test]
    fn toggle_structure() {
        let m = builtin("toggle").unwrap().to_affine().unwrap();
        assert_eq!(m.states, vec!["x1", "x2", "W1", "W2", "k01", "k1", "n1", "k02", "k2", "n2"]);
        assert_eq!(m.unknown_inputs, vec!["W1_d1", "W2_d1"]);
        let e3: Vec<Expr> = (0..10).map(|i| if i == 2 { Expr::one() } else { Expr::zero() }).collect();
        let e4: Vec<Expr> = (0..10).map(|i| if i == 3 { Expr::one() } else { Expr::zero() }).collect();
        assert_eq!(m.g, vec![e3, e4]);
        assert_eq!(m.drift[0], p("k01 + k1/(1 + (x2/W1)^n1) - x1"));
        assert!(m.drift[2..].iter().all(|e| e.is_zero()));
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(builtin("lorenz"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn parameter_free_affine_model_is_idempotent() {
        let m = builtin("unicycle_s1").unwrap();
        let a = m.to_affine().unwrap();
        assert_eq!(a.states, m.states);
        assert_eq!(a.full_rhs(), m.dynamics);
    }
}
