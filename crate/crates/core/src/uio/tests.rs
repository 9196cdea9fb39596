use super::*;
use crate::model::builtin;
use crate::symexpr::{is_identically_zero, parse};

fn sys(name: &str) -> OdeModel {
    builtin(name).unwrap().to_affine().unwrap()
}

fn same(a: &Expr, b: &str) -> bool {
    is_identically_zero(&Expr::sub(a.clone(), parse(b).unwrap())).unwrap()
}

fn exprs(xs: &[&str]) -> Vec<Expr> {
    xs.iter().map(|x| parse(x).unwrap()).collect()
}

// Independent check for systems without known inputs: unknown inputs
// extended by k derivative states, k plain Lie derivatives of the outputs
// along the drift.
fn extended_verdicts(s: &OdeModel, k: usize) -> Vec<bool> {
    let n0 = s.n();
    let mut e = s.clone();
    for g in 1..=e.m_w() {
        e = extend_ui(&e, g, k);
    }
    assert_eq!(e.m_u(), 0);
    let (drift, states, outputs) = (e.drift.clone(), e.states.clone(), e.outputs.clone());
    let o = RankOracle::default();
    let mut om = Codistribution::from_potentials(&states, &outputs, &o).unwrap();
    let d = Derivation { field: drift, time: true, jets: false };
    let mut level = outputs.clone();
    for _ in 0..k {
        level = level.iter().map(|l| simplify(&d.apply(l, &states))).collect();
        om.extend_potentials(&level, &o).unwrap();
    }
    (0..n0).map(|i| om.contains_gradient(&Expr::var(&states[i]), &o).unwrap()).collect()
}

fn toy(states: &[&str], drift: &[&str], f: &[&[&str]], g: &[&[&str]], h: &[&str]) -> OdeModel {
    let names = |p: &str, k: usize| (0..k).map(|i| format!("{}{}", p, i + 1)).collect::<Vec<_>>();
    OdeModel {
        name: "toy".into(),
        states: states.iter().map(|x| x.to_string()).collect(),
        state_kinds: vec![crate::model::StateKind::State; states.len()],
        known_inputs: names("u", f.len()),
        unknown_inputs: names("w", g.len()),
        ui_origin: names("w", g.len()).into_iter().map(|x| (x, 0)).collect(),
        known_origin: names("u", f.len()).into_iter().map(|x| (x, 0)).collect(),
        drift: exprs(drift),
        f: f.iter().map(|v| exprs(v)).collect(),
        g: g.iter().map(|v| exprs(v)).collect(),
        outputs: exprs(h),
        scenarios: Default::default(),
        positive: vec![],
    }
}

#[test]
fn walkthrough_dims() {
    for (name, dim) in [("unicycle_s1", 2), ("unicycle_s2", 1), ("toggle", 4), ("hiv", 7), ("seiar", 7)] {
        let r = observability(&sys(name), &Options::default()).unwrap();
        eprintln!("{} dim {} canonic {} {:?}", name, r.dim(), r.canonic, r.observable);
        for t in &r.trace {
            eprintln!("  {}", t);
        }
        assert_eq!(r.dim(), dim, "{}", name);
    }
}

fn check_against_extension(s: &OdeModel, k: usize) -> ObservabilityResult {
    let r = observability(s, &Options::default()).unwrap();
    let want = extended_verdicts(s, k);
    let got: Vec<bool> = s.states.iter().map(|x| r.is_observable(x).unwrap()).collect();
    assert_eq!(got, want, "{} {:?}", s.name, r.trace);
    r
}

#[test]
fn builtin_verdicts_match_extension() {
    for name in ["toggle", "hiv", "seiar"] {
        check_against_extension(&sys(name), 4);
    }
}

#[test]
fn unicycle_verdicts() {
    let r = observability(&sys("unicycle_s1"), &Options::default()).unwrap();
    assert_eq!(r.is_observable("rho"), Some(true));
    assert_eq!(r.is_observable("phi"), Some(false));
    let r = observability(&sys("unicycle_s2"), &Options::default()).unwrap();
    assert!(r.observable.iter().all(|(_, b)| !b));
    assert!(r.o.contains(&exprs(&["0", "1", "-1"]), &RankOracle::default()).unwrap());
}

#[test]
fn general_branch_with_known_input() {
    // m = 1 < m_w = 2 with a known input: the loop has to go through the
    // general branch of the finish test.
    let s = toy(
        &["x1", "x2", "x3"],
        &["0", "x3", "0"],
        &[&["0", "1", "0"]],
        &[&["1", "0", "0"], &["0", "0", "1"]],
        &["x1", "x2"],
    );
    let r = observability(&s, &Options::default()).unwrap();
    assert!(r.trace.iter().any(|t| t["branch"] == "general"), "{:?}", r.trace);
    assert!(r.observable.iter().take(3).all(|(_, b)| *b));
}

#[test]
fn nested_closure_without_jets() {
    let s = toy(
        &["x1", "x2", "x3", "x4"],
        &["x2 + x3*x1", "x4", "0", "0"],
        &[],
        &[&["0", "1", "0", "0"], &["0", "0", "0", "1"]],
        &["x1", "x3"],
    );
    let r = check_against_extension(&s, 6);
    assert_eq!(r.is_observable("x4"), Some(false));
}

#[test]
fn jets_are_unaugmented() {
    let s = toy(
        &["x1", "x2", "x3", "x4"],
        &["0", "x1 + x4", "0", "x1*x2 + x3"],
        &[],
        &[&["1", "0", "0", "0"], &["0", "0", "1", "0"]],
        &["x1", "x2"],
    );
    let r = check_against_extension(&s, 6);
    assert!(r.system.n() > 4, "{:?}", r.trace);
    assert!(r.observable.iter().all(|(_, b)| *b));
}

#[test]
fn munu_inverse_and_hiv_goldens() {
    let s = sys("hiv");
    let o = RankOracle::default();
    let h = exprs(&["lambda - rho*T_U - delta*T_I"]);
    let mn = compute_munu(&s, &h, &o).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let e = Expr::add((0..2).map(|l| Expr::mul(vec![mn.mu[i][l].clone(), mn.nu[l][j].clone()])).collect());
            let want = if i == j { Expr::one() } else { Expr::zero() };
            assert!(is_identically_zero(&Expr::sub(e, want)).unwrap());
        }
    }
    assert!(same(mn.mu_ab(1, 1), "T_U*V*(rho - delta)"));
    assert!(same(mn.nu_ab(1, 1), "1/(T_U*V*(rho - delta))"));
    let gh = compute_ghat(&s, &mn, &h);
    assert!(same(&gh[1][0], "1/(delta - rho)"));
    assert!(same(&gh[1][1], "-1/(delta - rho)"));
    assert!(gh[1][2..].iter().all(|e| e.is_zero()));
}

#[test]
fn unicycle_s2_ghat() {
    let s = sys("unicycle_s2");
    let o = RankOracle::default();
    let h = exprs(&["phi - theta"]);
    let mn = compute_munu(&s, &h, &o).unwrap();
    let gh = compute_ghat(&s, &mn, &h);
    assert!(same(&gh[1][0], "rho*cos(theta - phi)/sin(theta - phi)"));
    assert!(same(&gh[1][1], "1"));
    assert!(gh[1][2].is_zero());
}

#[test]
fn extend_ui_builds_a_chain() {
    let s = sys("hiv");
    let e = extend_ui(&s, 1, 2);
    assert_eq!(&e.states[8..], &["eta", "eta_d1"]);
    assert_eq!(e.unknown_inputs, vec!["eta_d2"]);
    assert!(same(&e.drift[0], "lambda - rho*T_U - eta*T_U*V"));
    assert!(same(&e.drift[8], "eta_d1"));
    assert!(e.g[0][9].is_one() && e.g[0][..9].iter().all(|x| x.is_zero()));
}

#[test]
fn selection_and_reordering() {
    let s = toy(&["x1", "x2"], &["0", "0"], &[], &[&["0", "1"], &["1", "0"]], &["x1"]);
    let o = RankOracle::default();
    let h = select_htilde(&s, &exprs(&["x2", "x1"]), 1, &o).unwrap();
    assert_eq!(h, exprs(&["x2"]));
    let (r, perm) = reorder_ui(&s, &exprs(&["x1"]), &o).unwrap();
    assert_eq!(perm, vec![1, 0]);
    assert_eq!(r.unknown_inputs, vec!["w2", "w1"]);
    assert_eq!(deg_w(&s, &exprs(&["x1", "x2"]), &o).unwrap(), 2);
}
