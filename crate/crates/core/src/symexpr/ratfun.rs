//! Rational functions kept as coefficient times a product of primitive
//! polynomial factors with integer exponents.

use super::expr::{Expr, Node};
use super::poly::Poly;
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct RatFun {
    pub coef: BigRational,
    /// Primitive factors (integer coefficients, positive leading term) with
    /// nonzero exponents; negative exponents are denominators.
    pub factors: Vec<(Poly, i32)>,
}

impl RatFun {
    pub fn zero() -> RatFun {
        RatFun { coef: BigRational::zero(), factors: Vec::new() }
    }

    pub fn constant(c: BigRational) -> RatFun {
        RatFun { coef: c, factors: Vec::new() }
    }

    pub fn one() -> RatFun {
        RatFun::constant(BigRational::one())
    }

    pub fn var(name: &str) -> RatFun {
        RatFun { coef: BigRational::one(), factors: vec![(Poly::var(name), 1)] }
    }

    pub fn is_zero(&self) -> bool {
        self.coef.is_zero()
    }

    /// Splits a nonzero polynomial into constant, variable and primitive factors.
    pub fn from_poly(p: &Poly) -> RatFun {
        if p.is_zero() {
            return RatFun::zero();
        }
        let c = p.content();
        let p = p.scale(&c.recip());
        let m = p.mono_content();
        let rest = p.div_mono(&m);
        let mut factors: Vec<(Poly, i32)> =
            m.0.iter().map(|(v, e)| (Poly::var(v), *e as i32)).collect();
        if rest.as_constant().is_none() {
            factors.push((rest, 1));
        }
        RatFun { coef: c, factors }
    }

    fn exponent_of(&self, p: &Poly) -> i32 {
        self.factors.iter().find(|(q, _)| q == p).map(|(_, e)| *e).unwrap_or(0)
    }

    fn push(&mut self, p: Poly, e: i32) {
        if e == 0 {
            return;
        }
        if let Some(slot) = self.factors.iter_mut().find(|(q, _)| *q == p) {
            slot.1 += e;
        } else {
            self.factors.push((p, e));
        }
        self.factors.retain(|(_, e)| *e != 0);
    }

    pub fn mul(&self, o: &RatFun) -> RatFun {
        if self.is_zero() || o.is_zero() {
            return RatFun::zero();
        }
        let mut r = self.clone();
        r.coef *= &o.coef;
        for (p, e) in &o.factors {
            r.push(p.clone(), *e);
        }
        r.cancel();
        r
    }

    /// Splits numerator factors divisible by denominator factors (and vice
    /// versa) until no exact division remains.
    fn cancel(&mut self) {
        loop {
            let mut hit: Option<(usize, Poly)> = None;
            'search: for (i, (p, ep)) in self.factors.iter().enumerate() {
                if p.terms.len() < 2 {
                    continue;
                }
                for (q, eq) in &self.factors {
                    if (*ep > 0) == (*eq > 0) || q.terms.len() < 2 || q == p {
                        continue;
                    }
                    if q.total_degree() > p.total_degree() {
                        continue;
                    }
                    if let Some(r) = p.div_exact(q) {
                        let _ = r;
                        hit = Some((i, q.clone()));
                        break 'search;
                    }
                }
            }
            let (i, q) = match hit {
                Some(h) => h,
                None => return,
            };
            let (p, e) = self.factors.remove(i);
            let r = p.div_exact(&q).unwrap();
            self.push(q, e);
            let split = RatFun::from_poly(&r);
            self.coef *= num_traits::Pow::pow(&split.coef, e);
            for (f, k) in split.factors {
                self.push(f, k * e);
            }
        }
    }

    pub fn inv(&self) -> Result<RatFun> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(RatFun {
            coef: self.coef.recip(),
            factors: self.factors.iter().map(|(p, e)| (p.clone(), -e)).collect(),
        })
    }

    pub fn div(&self, o: &RatFun) -> Result<RatFun> {
        Ok(self.mul(&o.inv()?))
    }

    pub fn neg(&self) -> RatFun {
        let mut r = self.clone();
        r.coef = -r.coef;
        r
    }

    pub fn powi(&self, k: i32) -> Result<RatFun> {
        if k == 0 {
            return Ok(RatFun::one());
        }
        if self.is_zero() {
            return if k > 0 { Ok(RatFun::zero()) } else { Err(Error::DivisionByZero) };
        }
        let c = num_traits::Pow::pow(&self.coef, k);
        Ok(RatFun { coef: c, factors: self.factors.iter().map(|(p, e)| (p.clone(), e * k)).collect() })
    }

    pub fn add(&self, o: &RatFun) -> RatFun {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let mut common: Vec<(Poly, i32)> = Vec::new();
        let mut all: Vec<&Poly> = self.factors.iter().map(|(p, _)| p).collect();
        for (p, _) in &o.factors {
            if !all.contains(&p) {
                all.push(p);
            }
        }
        let mut a = Poly::constant(self.coef.clone());
        let mut b = Poly::constant(o.coef.clone());
        for p in all {
            let (ea, eb) = (self.exponent_of(p), o.exponent_of(p));
            let m = ea.min(eb);
            if m != 0 {
                common.push((p.clone(), m));
            }
            if ea > m {
                a = a.mul(&p.pow((ea - m) as u32));
            }
            if eb > m {
                b = b.mul(&p.pow((eb - m) as u32));
            }
        }
        let s = a.add(&b);
        if s.is_zero() {
            return RatFun::zero();
        }
        let sum = RatFun::from_poly(&s);
        let mut r = RatFun { coef: sum.coef, factors: common };
        for (mut q, e) in sum.factors {
            if q.terms.len() > 1 {
                let dens: Vec<Poly> =
                    r.factors.iter().filter(|(_, k)| *k < 0).map(|(p, _)| p.clone()).collect();
                for d in dens {
                    while r.exponent_of(&d) < 0 && q.as_constant().is_none() {
                        match q.div_exact(&d) {
                            Some(qq) => {
                                r.push(d.clone(), 1);
                                q = qq;
                            }
                            None => break,
                        }
                    }
                }
            }
            match q.as_constant() {
                Some(k) => r.coef *= num_traits::Pow::pow(&k, e),
                None => r.push(q, e),
            }
        }
        r
    }

    pub fn sub(&self, o: &RatFun) -> RatFun {
        self.add(&o.neg())
    }

    pub fn numerator(&self) -> Poly {
        let mut p = Poly::constant(self.coef.clone());
        for (f, e) in &self.factors {
            if *e > 0 {
                p = p.mul(&f.pow(*e as u32));
            }
        }
        p
    }

    pub fn denominator(&self) -> Poly {
        let mut p = Poly::constant(BigRational::one());
        for (f, e) in &self.factors {
            if *e < 0 {
                p = p.mul(&f.pow((-e) as u32));
            }
        }
        p
    }

    pub fn to_expr(&self) -> Expr {
        let mut fs = vec![Expr::num(self.coef.clone())];
        for (p, e) in &self.factors {
            fs.push(Expr::powi(p.to_expr(), *e as i64));
        }
        Expr::mul(fs)
    }

    pub fn from_expr(e: &Expr) -> Option<RatFun> {
        let mut memo = HashMap::new();
        from_expr_rec(e, &mut memo).ok().flatten()
    }
}

fn from_expr_rec(e: &Expr, memo: &mut HashMap<usize, RatFun>) -> Result<Option<RatFun>> {
    if let Some(r) = memo.get(&e.ptr()) {
        return Ok(Some(r.clone()));
    }
    let r = match e.node() {
        Node::Num(c) => RatFun::constant(c.clone()),
        Node::Var(v) => RatFun::var(v),
        Node::Sum(ch) => {
            let mut acc = RatFun::zero();
            for c in ch {
                match from_expr_rec(c, memo)? {
                    Some(x) => acc = acc.add(&x),
                    None => return Ok(None),
                }
            }
            acc
        }
        Node::Product(ch) => {
            let mut acc = RatFun::one();
            for c in ch {
                match from_expr_rec(c, memo)? {
                    Some(x) => acc = acc.mul(&x),
                    None => return Ok(None),
                }
            }
            acc
        }
        Node::Negate(x) => match from_expr_rec(x, memo)? {
            Some(v) => v.neg(),
            None => return Ok(None),
        },
        Node::Reciprocal(x) => match from_expr_rec(x, memo)? {
            Some(v) => v.inv()?,
            None => return Ok(None),
        },
        Node::Power(b, x) => {
            let k = match x.as_integer().and_then(|k| k.to_i32()) {
                Some(k) => k,
                None => return Ok(None),
            };
            match from_expr_rec(b, memo)? {
                Some(v) => v.powi(k)?,
                None => return Ok(None),
            }
        }
        Node::Func(..) => return Ok(None),
    };
    memo.insert(e.ptr(), r.clone());
    Ok(Some(r))
}

/// Rewrites factors so that whenever one factor polynomial divides another,
/// the larger one is split. Applied jointly to a family of functions.
pub fn refine_factors(v: &mut [RatFun]) {
    loop {
        let mut all: Vec<Poly> = Vec::new();
        for r in v.iter() {
            for (p, _) in &r.factors {
                if !all.contains(p) {
                    all.push(p.clone());
                }
            }
        }
        let mut split: Option<(Poly, Poly, Poly)> = None;
        'outer: for q in &all {
            for p in &all {
                if p == q || p.total_degree() > q.total_degree() || p.terms.len() > q.terms.len() {
                    continue;
                }
                if let Some(r) = q.div_exact(p) {
                    split = Some((q.clone(), p.clone(), r));
                    break 'outer;
                }
            }
        }
        let (q, p, r) = match split {
            Some(s) => s,
            None => return,
        };
        let rest = RatFun::from_poly(&r);
        for f in v.iter_mut() {
            let e = f.exponent_of(&q);
            if e == 0 {
                continue;
            }
            f.factors.retain(|(x, _)| *x != q);
            f.push(p.clone(), e);
            let rest_e = rest.powi(e).unwrap();
            *f = f.mul(&rest_e);
        }
    }
}

/// Multiplies a vector of rational functions by a common scalar so that all
/// entries become polynomials without common factor, with the first nonzero
/// entry having positive leading coefficient.
pub fn clear_common(v: &[RatFun]) -> Vec<RatFun> {
    let mut v = v.to_vec();
    refine_factors(&mut v);
    let nz: Vec<&RatFun> = v.iter().filter(|r| !r.is_zero()).collect();
    if nz.is_empty() {
        return v;
    }
    let mut polys: Vec<Poly> = Vec::new();
    for r in &nz {
        for (p, _) in &r.factors {
            if !polys.contains(p) {
                polys.push(p.clone());
            }
        }
    }
    let mut scale = RatFun::one();
    for p in polys {
        let m = nz.iter().map(|r| r.exponent_of(&p)).min().unwrap();
        if m != 0 {
            scale.push(p, -m);
        }
    }
    let mut g = BigInt::zero();
    let mut l = BigInt::one();
    for r in &nz {
        g = g.gcd(r.coef.numer());
        l = l.lcm(r.coef.denom());
    }
    let mut c = BigRational::new(l, g);
    if nz[0].coef.is_negative() {
        c = -c;
    }
    scale.coef = c;
    v.iter().map(|r| r.mul(&scale)).collect()
}

impl RatFun {
    /// Evaluates at a float point; None on a vanishing denominator.
    pub fn eval_f64(&self, vals: &HashMap<String, f64>) -> Option<f64> {
        let mut acc = self.coef.to_f64()?;
        for (p, e) in &self.factors {
            let mut s = 0.0;
            for (m, c) in &p.terms {
                let mut t = c.to_f64()?;
                for (v, k) in &m.0 {
                    t *= vals.get(&**v)?.powi(*k as i32);
                }
                s += t;
            }
            if *e < 0 && s == 0.0 {
                return None;
            }
            acc *= s.powi(*e);
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse::parse;

    fn rf(s: &str) -> RatFun {
        RatFun::from_expr(&parse(s).unwrap()).unwrap()
    }

    #[test]
    fn cancels_common_factors() {
        let r = rf("(x^2 - y^2)/(x - y)");
        assert_eq!(r.to_expr(), parse("x + y").unwrap());
        let r = rf("1/(x-1) - 1/(x-1)");
        assert!(r.is_zero());
        let r = rf("a/(a*b - a*c)");
        assert_eq!(r.to_expr(), parse("1/(b - c)").unwrap());
    }

    #[test]
    fn sum_of_fractions() {
        let r = rf("1/x + 1/y");
        assert_eq!(r.to_expr(), parse("(x + y)/(x*y)").unwrap());
    }

    #[test]
    fn clearing_denominators() {
        let v = vec![rf("1/(d*(d - r))"), rf("-1/(d*(d - r))"), RatFun::zero(), rf("1/(d-r)")];
        let c = clear_common(&v);
        let e: Vec<Expr> = c.iter().map(|r| r.to_expr()).collect();
        assert_eq!(e[0], parse("1").unwrap());
        assert_eq!(e[1], parse("-1").unwrap());
        assert!(e[2].is_zero());
        assert_eq!(e[3], parse("d").unwrap());
    }

    #[test]
    fn non_rational_is_rejected() {
        assert!(RatFun::from_expr(&parse("sin(x)").unwrap()).is_none());
        assert!(RatFun::from_expr(&parse("x^n").unwrap()).is_none());
    }
}
