use super::expr::{Expr, Func, Node};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Auto,
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(BigRational),
    Float(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => rat_to_f64(r),
            Value::Float(f) => *f,
        }
    }
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Variable bindings for evaluation. Exact bindings also carry a float image.
#[derive(Clone, Debug, Default)]
pub struct EvaluationPoint {
    exact: BTreeMap<String, BigRational>,
    float: BTreeMap<String, f64>,
    pub mode: Mode,
}

impl EvaluationPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_mode(mode: Mode) -> Self {
        EvaluationPoint { mode, ..Default::default() }
    }

    pub fn bind_rational(&mut self, name: &str, r: BigRational) {
        self.float.insert(name.to_string(), rat_to_f64(&r));
        self.exact.insert(name.to_string(), r);
    }

    pub fn bind_float(&mut self, name: &str, f: f64) {
        self.exact.remove(name);
        self.float.insert(name.to_string(), f);
    }

    pub fn get_float(&self, name: &str) -> Option<f64> {
        self.float.get(name).copied()
    }

    pub fn get_rational(&self, name: &str) -> Option<&BigRational> {
        self.exact.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.float.keys()
    }
}

#[derive(Debug)]
pub(crate) enum ExactFail {
    NotExact,
    Err(Error),
}

impl From<Error> for ExactFail {
    fn from(e: Error) -> Self {
        ExactFail::Err(e)
    }
}

/// Evaluates according to the point's mode; `Auto` tries exact arithmetic first.
pub fn evaluate(e: &Expr, p: &EvaluationPoint) -> Result<Value> {
    match p.mode {
        Mode::Float => Ok(Value::Float(eval_float(e, p)?.0)),
        Mode::Exact => match eval_exact(e, p) {
            Ok(r) => Ok(Value::Exact(r)),
            Err(ExactFail::Err(err)) => Err(err),
            Err(ExactFail::NotExact) => {
                Err(Error::Domain("expression has no exact rational value".into()))
            }
        },
        Mode::Auto => match eval_exact(e, p) {
            Ok(r) => Ok(Value::Exact(r)),
            Err(ExactFail::Err(err)) => Err(err),
            Err(ExactFail::NotExact) => Ok(Value::Float(eval_float(e, p)?.0)),
        },
    }
}

/// Evaluates several expressions at one point, sharing work between common
/// subexpressions. Entries without an exact value fall back to floats, and
/// floats within the relative zero tolerance of their magnitude become 0.
pub fn evaluate_all(es: &[Expr], p: &EvaluationPoint) -> Result<Vec<Value>> {
    let mut exact = HashMap::new();
    let mut float = HashMap::new();
    let mut out = Vec::with_capacity(es.len());
    for e in es {
        if p.mode != Mode::Float {
            match exact_rec(e, p, &mut exact) {
                Ok(r) => {
                    out.push(Value::Exact(r));
                    continue;
                }
                Err(ExactFail::Err(err)) => return Err(err),
                Err(ExactFail::NotExact) if p.mode == Mode::Exact => {
                    return Err(Error::Domain("expression has no exact rational value".into()))
                }
                Err(ExactFail::NotExact) => {}
            }
        }
        let (v, mag) = float_rec(e, p, &mut float)?;
        out.push(Value::Float(if v.abs() <= super::ZERO_TOL * mag { 0.0 } else { v }));
    }
    Ok(out)
}

const MAX_EXACT_EXPONENT: u32 = 4096;

pub(crate) fn eval_exact(e: &Expr, p: &EvaluationPoint) -> std::result::Result<BigRational, ExactFail> {
    let mut memo = HashMap::new();
    exact_rec(e, p, &mut memo)
}

fn exact_rec(
    e: &Expr,
    p: &EvaluationPoint,
    memo: &mut HashMap<usize, BigRational>,
) -> std::result::Result<BigRational, ExactFail> {
    if let Some(v) = memo.get(&e.ptr()) {
        return Ok(v.clone());
    }
    let v = match e.node() {
        Node::Num(r) => r.clone(),
        Node::Var(n) => match p.exact.get(&**n) {
            Some(r) => r.clone(),
            None if p.float.contains_key(&**n) => return Err(ExactFail::NotExact),
            None => return Err(Error::Domain(format!("unbound variable '{}'", n)).into()),
        },
        Node::Sum(ch) => {
            let mut acc = BigRational::zero();
            for c in ch {
                acc += exact_rec(c, p, memo)?;
            }
            acc
        }
        Node::Product(ch) => {
            let mut acc = BigRational::one();
            for c in ch {
                acc *= exact_rec(c, p, memo)?;
            }
            acc
        }
        Node::Negate(x) => -exact_rec(x, p, memo)?,
        Node::Reciprocal(x) => {
            let v = exact_rec(x, p, memo)?;
            if v.is_zero() {
                return Err(Error::DivisionByZero.into());
            }
            v.recip()
        }
        Node::Power(b, x) => {
            let bv = exact_rec(b, p, memo)?;
            let xv = exact_rec(x, p, memo)?;
            exact_pow(&bv, &xv)?
        }
        Node::Func(f, x) => {
            let xv = exact_rec(x, p, memo)?;
            match f {
                Func::Sin if xv.is_zero() => BigRational::zero(),
                Func::Cos | Func::Exp if xv.is_zero() => BigRational::one(),
                Func::Log if xv.is_one() => BigRational::zero(),
                Func::Log if !xv.is_positive() => {
                    return Err(Error::Domain("log of a non-positive value".into()).into())
                }
                _ => return Err(ExactFail::NotExact),
            }
        }
    };
    memo.insert(e.ptr(), v.clone());
    Ok(v)
}

fn exact_root(n: &BigInt, q: u32) -> Option<BigInt> {
    let r = n.nth_root(q);
    if Pow::pow(&r, q) == *n {
        Some(r)
    } else {
        None
    }
}

fn exact_pow(b: &BigRational, x: &BigRational) -> std::result::Result<BigRational, ExactFail> {
    let num = x.numer().abs().to_u32().ok_or(ExactFail::NotExact)?;
    let den = x.denom().to_u32().ok_or(ExactFail::NotExact)?;
    if num > MAX_EXACT_EXPONENT || den > 64 {
        return Err(ExactFail::NotExact);
    }
    if b.is_zero() {
        if x.is_negative() {
            return Err(Error::DivisionByZero.into());
        }
        return Ok(BigRational::zero());
    }
    let base = if den == 1 {
        b.clone()
    } else {
        if b.is_negative() && den % 2 == 0 {
            return Err(Error::Domain("even root of a negative value".into()).into());
        }
        let sign = if b.is_negative() { -BigInt::one() } else { BigInt::one() };
        let rn = exact_root(&b.numer().abs(), den).ok_or(ExactFail::NotExact)?;
        let rd = exact_root(b.denom(), den).ok_or(ExactFail::NotExact)?;
        BigRational::new(sign * rn, rd)
    };
    let mut v = Pow::pow(&base, num);
    if x.is_negative() {
        v = v.recip();
    }
    Ok(v)
}

/// Float value together with a magnitude scale used for relative zero tests:
/// sums carry the sum of absolute term values, products the product of factor
/// magnitudes.
pub fn eval_float(e: &Expr, p: &EvaluationPoint) -> Result<(f64, f64)> {
    let mut memo = HashMap::new();
    float_rec(e, p, &mut memo)
}

fn check(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain("non-finite value".into()))
    }
}

fn float_rec(e: &Expr, p: &EvaluationPoint, memo: &mut HashMap<usize, (f64, f64)>) -> Result<(f64, f64)> {
    if let Some(v) = memo.get(&e.ptr()) {
        return Ok(*v);
    }
    let v = match e.node() {
        Node::Num(r) => {
            let f = rat_to_f64(r);
            (f, f.abs())
        }
        Node::Var(n) => {
            let f = p
                .float
                .get(&**n)
                .copied()
                .ok_or_else(|| Error::Domain(format!("unbound variable '{}'", n)))?;
            (f, f.abs())
        }
        Node::Sum(ch) => {
            let (mut s, mut m) = (0.0, 0.0);
            for c in ch {
                let (v, mv) = float_rec(c, p, memo)?;
                s += v;
                m += mv;
            }
            (s, m)
        }
        Node::Product(ch) => {
            let (mut s, mut m) = (1.0, 1.0);
            for c in ch {
                let (v, mv) = float_rec(c, p, memo)?;
                s *= v;
                m *= mv;
            }
            (check(s)?, m)
        }
        Node::Negate(x) => {
            let (v, m) = float_rec(x, p, memo)?;
            (-v, m)
        }
        Node::Reciprocal(x) => {
            let (v, m) = float_rec(x, p, memo)?;
            if v == 0.0 || m > 0.0 && v.abs() <= 1e-12 * m {
                return Err(Error::DivisionByZero);
            }
            let r = check(1.0 / v)?;
            (r, r.abs())
        }
        Node::Power(b, x) => {
            let (bv, bm) = float_rec(b, p, memo)?;
            let (xv, _) = float_rec(x, p, memo)?;
            let is_int = xv.fract() == 0.0;
            if bv == 0.0 && xv < 0.0 {
                return Err(Error::DivisionByZero);
            }
            if bv < 0.0 && !is_int {
                return Err(Error::Domain("non-integer power of a negative value".into()));
            }
            let r = check(bv.powf(xv))?;
            let m = if xv >= 0.0 { bm.powf(xv) } else { r.abs() };
            (r, if m.is_finite() { m } else { r.abs() })
        }
        Node::Func(f, x) => {
            let (xv, _) = float_rec(x, p, memo)?;
            let r = match f {
                Func::Sin => xv.sin(),
                Func::Cos => xv.cos(),
                Func::Exp => check(xv.exp())?,
                Func::Log => {
                    if xv <= 0.0 {
                        return Err(Error::Domain("log of a non-positive value".into()));
                    }
                    xv.ln()
                }
            };
            let m = match f {
                Func::Sin | Func::Cos => r.abs().max(1e-300),
                _ => r.abs(),
            };
            (r, m)
        }
    };
    memo.insert(e.ptr(), v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse::parse;

    fn pt(pairs: &[(&str, i64, i64)]) -> EvaluationPoint {
        let mut p = EvaluationPoint::new();
        for (n, a, b) in pairs {
            p.bind_rational(n, BigRational::new(BigInt::from(*a), BigInt::from(*b)));
        }
        p
    }

    #[test]
    fn exact_rational_arithmetic() {
        let p = pt(&[("x", 1, 3), ("y", 2, 1)]);
        let v = evaluate(&parse("x*y + 1/y").unwrap(), &p).unwrap();
        assert_eq!(v, Value::Exact(BigRational::new(7.into(), 6.into())));
    }

    #[test]
    fn perfect_roots_stay_exact() {
        let p = pt(&[("x", 4, 9)]);
        let v = evaluate(&parse("x^(1/2)").unwrap(), &p).unwrap();
        assert_eq!(v, Value::Exact(BigRational::new(2.into(), 3.into())));
        let p = pt(&[("x", 2, 1)]);
        match evaluate(&parse("x^(1/2)").unwrap(), &p).unwrap() {
            Value::Float(f) => assert!((f - 2f64.sqrt()).abs() < 1e-15),
            v => panic!("{:?}", v),
        }
    }

    #[test]
    fn singularities_are_reported() {
        let p = pt(&[("x", 1, 1)]);
        assert_eq!(evaluate(&parse("1/(x-1)").unwrap(), &p), Err(Error::DivisionByZero));
        let p = pt(&[("x", -1, 1)]);
        assert!(matches!(evaluate(&parse("log(x)").unwrap(), &p), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_mode_refuses_transcendentals() {
        let mut p = pt(&[("x", 1, 2)]);
        p.mode = Mode::Exact;
        assert!(evaluate(&parse("sin(x)").unwrap(), &p).is_err());
        p.mode = Mode::Float;
        let v = evaluate(&parse("sin(x)").unwrap(), &p).unwrap();
        assert!((v.to_f64() - 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn magnitude_tracks_cancellation() {
        let p = pt(&[("x", 3, 1)]);
        let (v, m) = eval_float(&parse("x^2 - 9").unwrap(), &p).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(m, 18.0);
    }
}
