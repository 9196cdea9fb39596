use super::expr::{Expr, Func, Node};
use std::collections::HashMap;

/// Partial derivative with respect to one variable.
pub fn diff(e: &Expr, var: &str) -> Expr {
    let mut seeds = HashMap::new();
    seeds.insert(var.to_string(), Expr::one());
    derive(e, &seeds)
}

/// Applies the derivation that sends each variable `v` to `seeds[v]` (and every
/// other variable to zero). With `seeds = f` this is the directional derivative
/// along the vector field `f` in a single pass.
pub fn derive(e: &Expr, seeds: &HashMap<String, Expr>) -> Expr {
    let mut d = Deriver { seeds, memo: HashMap::new() };
    d.go(e)
}

struct Deriver<'a> {
    seeds: &'a HashMap<String, Expr>,
    memo: HashMap<usize, Expr>,
}

impl<'a> Deriver<'a> {
    fn touches(&self, e: &Expr) -> bool {
        self.seeds.keys().any(|k| e.may_contain(k))
    }

    fn go(&mut self, e: &Expr) -> Expr {
        if !self.touches(e) {
            return Expr::zero();
        }
        if let Some(r) = self.memo.get(&e.ptr()) {
            return r.clone();
        }
        let out = match e.node() {
            Node::Num(_) => Expr::zero(),
            Node::Var(n) => self.seeds.get(&**n).cloned().unwrap_or_else(Expr::zero),
            Node::Sum(ch) => Expr::add(ch.iter().map(|c| self.go(c)).collect()),
            Node::Product(ch) => {
                let mut terms = Vec::new();
                for i in 0..ch.len() {
                    let di = self.go(&ch[i]);
                    if di.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = Vec::with_capacity(ch.len());
                    for (j, c) in ch.iter().enumerate() {
                        if j != i {
                            fs.push(c.clone());
                        }
                    }
                    fs.push(di);
                    terms.push(Expr::mul(fs));
                }
                Expr::add(terms)
            }
            Node::Power(b, x) => {
                let db = self.go(b);
                let dx = self.go(x);
                if dx.is_zero() {
                    if db.is_zero() {
                        Expr::zero()
                    } else {
                        let em1 = Expr::sub(x.clone(), Expr::one());
                        Expr::mul(vec![x.clone(), Expr::pow(b.clone(), em1), db])
                    }
                } else {
                    let inner = Expr::add(vec![
                        Expr::mul(vec![dx, Expr::log(b.clone())]),
                        Expr::mul(vec![x.clone(), db, Expr::recip(b.clone())]),
                    ]);
                    Expr::mul(vec![e.clone(), inner])
                }
            }
            Node::Negate(x) => Expr::neg(self.go(x)),
            Node::Reciprocal(x) => {
                let dx = self.go(x);
                Expr::neg(Expr::mul(vec![dx, Expr::powi(x.clone(), -2)]))
            }
            Node::Func(f, x) => {
                let dx = self.go(x);
                if dx.is_zero() {
                    Expr::zero()
                } else {
                    match f {
                        Func::Sin => Expr::mul(vec![Expr::cos(x.clone()), dx]),
                        Func::Cos => Expr::neg(Expr::mul(vec![Expr::sin(x.clone()), dx])),
                        Func::Log => Expr::div(dx, x.clone()),
                        Func::Exp => Expr::mul(vec![e.clone(), dx]),
                    }
                }
            }
        };
        self.memo.insert(e.ptr(), out.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn polynomial_rules() {
        assert_eq!(diff(&p("x^3 + 2*x*y"), "x"), p("3*x^2 + 2*y"));
        assert_eq!(diff(&p("1/x"), "x"), p("-1/x^2"));
    }

    #[test]
    fn chain_rule() {
        assert_eq!(diff(&p("sin(x^2)"), "x"), p("2*x*cos(x^2)"));
        assert_eq!(diff(&p("log(x*y)"), "x"), p("1/x"));
        assert_eq!(diff(&p("exp(2*x)"), "x"), p("2*exp(2*x)"));
    }

    #[test]
    fn symbolic_exponent() {
        let d = diff(&p("x^n"), "n");
        assert_eq!(d, p("x^n*log(x)"));
        let d = diff(&p("x^n"), "x");
        assert_eq!(d, p("n*x^(n - 1)"));
    }

    #[test]
    fn directional_derivative_in_one_pass() {
        let mut f = HashMap::new();
        f.insert("x".to_string(), p("y"));
        f.insert("y".to_string(), p("-x"));
        assert!(derive(&p("x^2 + y^2"), &f).is_zero());
    }
}
