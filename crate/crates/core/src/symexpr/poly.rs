//! Sparse multivariate polynomials over Q.

use super::expr::Expr;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Monomial as (variable, exponent) pairs sorted by variable name. Ordered
/// lexicographically with the alphabetically first variable most significant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Mono(pub Vec<(Arc<str>, u32)>);

impl Mono {
    pub fn one() -> Mono {
        Mono(Vec::new())
    }

    pub fn var(name: &str) -> Mono {
        Mono(vec![(Arc::from(name), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut out = Vec::with_capacity(self.0.len() + o.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < o.0.len() {
            if j >= o.0.len() || (i < self.0.len() && self.0[i].0 < o.0[j].0) {
                out.push(self.0[i].clone());
                i += 1;
            } else if i >= self.0.len() || o.0[j].0 < self.0[i].0 {
                out.push(o.0[j].clone());
                j += 1;
            } else {
                out.push((self.0[i].0.clone(), self.0[i].1 + o.0[j].1));
                i += 1;
                j += 1;
            }
        }
        Mono(out)
    }

    /// self / o when o divides self.
    pub fn div(&self, o: &Mono) -> Option<Mono> {
        let mut out = Vec::new();
        let mut j = 0;
        for (v, e) in &self.0 {
            if j < o.0.len() && o.0[j].0 < *v {
                return None;
            }
            if j < o.0.len() && o.0[j].0 == *v {
                if o.0[j].1 > *e {
                    return None;
                }
                if *e > o.0[j].1 {
                    out.push((v.clone(), e - o.0[j].1));
                }
                j += 1;
            } else {
                out.push((v.clone(), *e));
            }
        }
        if j < o.0.len() {
            return None;
        }
        Some(Mono(out))
    }

    pub fn gcd(&self, o: &Mono) -> Mono {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            if let Some((_, f)) = o.0.iter().find(|(w, _)| w == v) {
                out.push((v.clone(), (*e).min(*f)));
            }
        }
        Mono(out)
    }

    fn exp_of(&self, v: &str) -> u32 {
        self.0.iter().find(|(w, _)| &**w == v).map(|(_, e)| *e).unwrap_or(0)
    }

    pub fn to_expr(&self) -> Expr {
        Expr::mul(self.0.iter().map(|(v, e)| Expr::powi(Expr::var(v), *e as i64)).collect())
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Mono) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            let a = self.0.get(i);
            let b = o.0.get(j);
            match (a, b) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Mono) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    pub terms: BTreeMap<Mono, BigRational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Mono::one(), c);
        }
        p
    }

    pub fn var(name: &str) -> Poly {
        let mut p = Poly::zero();
        p.terms.insert(Mono::var(name), BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), -c.clone());
        }
        r
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                r.add_term(m1.mul(m2), c1 * c2);
            }
        }
        r
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut r = Poly::constant(BigRational::one());
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    fn mul_term(&self, m: &Mono, c: &BigRational) -> Poly {
        Poly { terms: self.terms.iter().map(|(m2, c2)| (m2.mul(m), c2 * c)).collect() }
    }

    /// Exact quotient self / d, or None when d does not divide self.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.leading()?;
        let (dm, dc) = (dm.clone(), dc.clone());
        let mut r = self.clone();
        let mut q = Poly::zero();
        while let Some((rm, rc)) = r.leading() {
            let m = rm.div(&dm)?;
            let c = rc / &dc;
            r = r.sub(&d.mul_term(&m, &c));
            q.add_term(m, c);
        }
        Some(q)
    }

    /// Rational content with the sign of the leading coefficient.
    pub fn content(&self) -> BigRational {
        let mut g = BigInt::zero();
        let mut l = BigInt::one();
        for c in self.terms.values() {
            g = g.gcd(c.numer());
            l = l.lcm(c.denom());
        }
        let mut r = BigRational::new(g, l);
        if self.leading().is_some_and(|(_, c)| c.is_negative()) {
            r = -r;
        }
        r
    }

    /// Largest monomial dividing every term.
    pub fn mono_content(&self) -> Mono {
        let mut it = self.terms.keys();
        let mut g = match it.next() {
            Some(m) => m.clone(),
            None => return Mono::one(),
        };
        for m in it {
            g = g.gcd(m);
        }
        g
    }

    pub fn div_mono(&self, m: &Mono) -> Poly {
        Poly { terms: self.terms.iter().map(|(k, c)| (k.div(m).unwrap(), c.clone())).collect() }
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.terms.keys().map(|m| m.exp_of(v)).max().unwrap_or(0)
    }

    pub fn to_expr(&self) -> Expr {
        Expr::add(
            self.terms
                .iter()
                .map(|(m, c)| Expr::mul(vec![Expr::num(c.clone()), m.to_expr()]))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::var("x")
    }
    fn y() -> Poly {
        Poly::var("y")
    }
    fn c(i: i64) -> Poly {
        Poly::constant(BigRational::from_integer(i.into()))
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let a = Mono::var("x").mul(&Mono::var("y"));
        let b = Mono::var("y");
        assert!(a > b);
        assert!(Mono::var("x") > Mono::var("y").mul(&Mono::var("y")));
        let m = Mono::var("z");
        assert!(a.mul(&m) > b.mul(&m));
    }

    #[test]
    fn exact_division() {
        let p = x().add(&y()).mul(&x().sub(&y()));
        assert_eq!(p.div_exact(&x().add(&y())).unwrap(), x().sub(&y()));
        assert!(p.div_exact(&x().add(&c(1))).is_none());
    }

    #[test]
    fn content_and_monomial_content() {
        let p = x().mul(&y()).scale(&BigRational::from_integer((-4).into())).add(&x().scale(&BigRational::from_integer(6.into())));
        assert_eq!(p.content(), BigRational::from_integer((-2).into()));
        assert_eq!(p.mono_content(), Mono::var("x"));
    }
}
