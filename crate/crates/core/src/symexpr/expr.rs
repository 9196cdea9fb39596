use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Log,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Log => "log",
            Func::Exp => "exp",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "log" => Some(Func::Log),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Num(BigRational),
    Var(Arc<str>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, Expr),
    Negate(Expr),
    Reciprocal(Expr),
    Func(Func, Expr),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
    size: u64,
    bloom: u64,
}

/// Immutable, reference-counted expression in canonical form.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn mix(h: u64, v: u64) -> u64 {
    fnv_bytes(h, &v.to_le_bytes())
}

pub(crate) fn name_hash(name: &str) -> u64 {
    fnv_bytes(FNV_OFFSET, name.as_bytes())
}

fn rational_hash(r: &BigRational) -> u64 {
    let (s, n) = r.numer().to_bytes_le();
    let mut h = fnv_bytes(mix(FNV_OFFSET, s as u64), &n);
    let (_, d) = r.denom().to_bytes_le();
    h = fnv_bytes(mix(h, 0xdead), &d);
    h
}

impl Expr {
    fn make(node: Node) -> Expr {
        let (tag, mut h, size, bloom) = match &node {
            Node::Num(r) => (1u64, rational_hash(r), 1u64, 0u64),
            Node::Var(n) => {
                let nh = name_hash(n);
                (2, nh, 1, 1u64 << (nh % 64))
            }
            Node::Sum(ch) | Node::Product(ch) => {
                let mut h = FNV_OFFSET;
                let mut size = 1u64;
                let mut bloom = 0;
                for c in ch {
                    h = mix(h, c.0.hash);
                    size = size.saturating_add(c.0.size);
                    bloom |= c.0.bloom;
                }
                let tag = if matches!(node, Node::Sum(_)) { 3 } else { 4 };
                (tag, h, size, bloom)
            }
            Node::Power(b, e) => (
                5,
                mix(mix(FNV_OFFSET, b.0.hash), e.0.hash),
                1u64.saturating_add(b.0.size).saturating_add(e.0.size),
                b.0.bloom | e.0.bloom,
            ),
            Node::Negate(x) => (6, mix(FNV_OFFSET, x.0.hash), x.0.size + 1, x.0.bloom),
            Node::Reciprocal(x) => (7, mix(FNV_OFFSET, x.0.hash), x.0.size + 1, x.0.bloom),
            Node::Func(f, x) => (
                8 + *f as u64,
                mix(FNV_OFFSET, x.0.hash),
                x.0.size + 1,
                x.0.bloom,
            ),
        };
        h = mix(h, tag);
        Expr(Arc::new(Inner { node, hash: h, size, bloom }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    /// Tree size, counting shared subtrees once per occurrence (saturating).
    pub fn tree_size(&self) -> u64 {
        self.0.size
    }

    /// Number of distinct nodes in the expression DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            e.for_each_child(|c| stack.push(c.clone()));
        }
        seen.len()
    }

    pub(crate) fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn may_contain(&self, name: &str) -> bool {
        let nh = name_hash(name);
        self.0.bloom & (1u64 << (nh % 64)) != 0
    }

    pub fn for_each_child<F: FnMut(&Expr)>(&self, mut f: F) {
        match self.node() {
            Node::Num(_) | Node::Var(_) => {}
            Node::Sum(ch) | Node::Product(ch) => ch.iter().for_each(f),
            Node::Power(b, e) => {
                f(b);
                f(e)
            }
            Node::Negate(x) | Node::Reciprocal(x) | Node::Func(_, x) => f(x),
        }
    }

    // ---- leaves ----

    pub fn num(r: BigRational) -> Expr {
        Expr::make(Node::Num(r))
    }

    pub fn int(i: i64) -> Expr {
        Expr::num(BigRational::from_integer(BigInt::from(i)))
    }

    pub fn frac(p: i64, q: i64) -> Expr {
        Expr::num(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: &str) -> Expr {
        Expr::make(Node::Var(Arc::from(name)))
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.node() {
            Node::Var(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    pub fn as_integer(&self) -> Option<BigInt> {
        self.as_num().filter(|r| r.is_integer()).map(|r| r.to_integer())
    }

    // ---- canonical constructors ----

    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut acc: BTreeMap<Expr, BigRational> = BTreeMap::new();
        let mut constant = BigRational::zero();
        for t in terms {
            push_term(&mut acc, &mut constant, &t, &BigRational::one());
        }
        let mut out: Vec<Expr> = Vec::with_capacity(acc.len() + 1);
        for (m, c) in acc {
            if !c.is_zero() {
                out.push(scale_mono(c, m));
            }
        }
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::make(Node::Sum(out)),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut b = ProductBuilder::new();
        for f in &factors {
            b.push_factor(f);
            if b.zero {
                return Expr::zero();
            }
        }
        b.build()
    }

    pub fn pow(base: Expr, exp: Expr) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base;
        }
        if base.is_one() {
            return Expr::one();
        }
        let mut b = ProductBuilder::new();
        b.push_pow(&base, &exp);
        b.build()
    }

    pub fn powi(base: Expr, k: i64) -> Expr {
        Expr::pow(base, Expr::int(k))
    }

    pub fn neg(x: Expr) -> Expr {
        Expr::mul(vec![Expr::int(-1), x])
    }

    pub fn recip(x: Expr) -> Expr {
        Expr::pow(x, Expr::int(-1))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, Expr::recip(b)])
    }

    pub fn func(f: Func, x: Expr) -> Expr {
        match f {
            Func::Sin if x.is_zero() => return Expr::zero(),
            Func::Cos if x.is_zero() => return Expr::one(),
            Func::Exp => {
                if x.is_zero() {
                    return Expr::one();
                }
                if let Node::Func(Func::Log, y) = x.node() {
                    return y.clone();
                }
            }
            Func::Log => {
                if x.is_one() {
                    return Expr::zero();
                }
                if let Node::Func(Func::Exp, y) = x.node() {
                    return y.clone();
                }
            }
            _ => {}
        }
        Expr::make(Node::Func(f, x))
    }

    pub fn sin(x: Expr) -> Expr {
        Expr::func(Func::Sin, x)
    }
    pub fn cos(x: Expr) -> Expr {
        Expr::func(Func::Cos, x)
    }
    pub fn log(x: Expr) -> Expr {
        Expr::func(Func::Log, x)
    }
    pub fn exp(x: Expr) -> Expr {
        Expr::func(Func::Exp, x)
    }

    /// Rebuilds the tree bottom-up through the canonical constructors.
    pub fn simplify(&self) -> Expr {
        let mut memo = std::collections::HashMap::new();
        simplify_rec(self, &mut memo)
    }

    /// Numeric coefficient and remaining monomial (`None` for a pure number).
    pub fn split_coeff(&self) -> (BigRational, Option<Expr>) {
        match self.node() {
            Node::Num(c) => (c.clone(), None),
            Node::Negate(x) => {
                let (c, m) = x.split_coeff();
                (-c, m)
            }
            Node::Product(ch) => {
                if let Node::Num(c) = ch[0].node() {
                    let rest = if ch.len() == 2 {
                        ch[1].clone()
                    } else {
                        Expr::make(Node::Product(ch[1..].to_vec()))
                    };
                    (c.clone(), Some(rest))
                } else {
                    (BigRational::one(), Some(self.clone()))
                }
            }
            _ => (BigRational::one(), Some(self.clone())),
        }
    }

    pub fn has_negative_coeff(&self) -> bool {
        self.split_coeff().0.is_negative()
    }

    /// Free variable names, sorted.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            if let Node::Var(n) = e.node() {
                out.insert(n.to_string());
            }
            e.for_each_child(|c| stack.push(c.clone()));
        }
        out.into_iter().collect()
    }

    pub fn contains_var(&self, name: &str) -> bool {
        if !self.may_contain(name) {
            return false;
        }
        match self.node() {
            Node::Var(n) => &**n == name,
            Node::Num(_) => false,
            _ => {
                let mut found = false;
                self.for_each_child(|c| {
                    if !found && c.contains_var(name) {
                        found = true;
                    }
                });
                found
            }
        }
    }

    /// True when no transcendental function or non-integer exponent occurs.
    pub fn is_rational_function(&self) -> bool {
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Func(..) => return false,
                Node::Power(_, ex) if ex.as_integer().is_none() => return false,
                _ => {}
            }
            e.for_each_child(|c| stack.push(c.clone()));
        }
        true
    }

    /// Substitutes variables by expressions, re-canonicalising on the way up.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        let mut memo = std::collections::HashMap::new();
        substitute_rec(self, map, &mut memo)
    }
}

fn simplify_rec(e: &Expr, memo: &mut std::collections::HashMap<usize, Expr>) -> Expr {
    if let Some(r) = memo.get(&e.ptr()) {
        return r.clone();
    }
    let out = match e.node() {
        Node::Num(r) => Expr::num(r.clone()),
        Node::Var(_) => e.clone(),
        Node::Sum(ch) => Expr::add(ch.iter().map(|c| simplify_rec(c, memo)).collect()),
        Node::Product(ch) => Expr::mul(ch.iter().map(|c| simplify_rec(c, memo)).collect()),
        Node::Power(b, x) => Expr::pow(simplify_rec(b, memo), simplify_rec(x, memo)),
        Node::Negate(x) => Expr::neg(simplify_rec(x, memo)),
        Node::Reciprocal(x) => Expr::recip(simplify_rec(x, memo)),
        Node::Func(f, x) => Expr::func(*f, simplify_rec(x, memo)),
    };
    memo.insert(e.ptr(), out.clone());
    out
}

fn substitute_rec(
    e: &Expr,
    map: &BTreeMap<String, Expr>,
    memo: &mut std::collections::HashMap<usize, Expr>,
) -> Expr {
    if let Some(r) = memo.get(&e.ptr()) {
        return r.clone();
    }
    if !map.keys().any(|k| e.may_contain(k)) {
        return e.clone();
    }
    let out = match e.node() {
        Node::Num(_) => e.clone(),
        Node::Var(n) => map.get(&**n).cloned().unwrap_or_else(|| e.clone()),
        Node::Sum(ch) => Expr::add(ch.iter().map(|c| substitute_rec(c, map, memo)).collect()),
        Node::Product(ch) => Expr::mul(ch.iter().map(|c| substitute_rec(c, map, memo)).collect()),
        Node::Power(b, x) => Expr::pow(substitute_rec(b, map, memo), substitute_rec(x, map, memo)),
        Node::Negate(x) => Expr::neg(substitute_rec(x, map, memo)),
        Node::Reciprocal(x) => Expr::recip(substitute_rec(x, map, memo)),
        Node::Func(f, x) => Expr::func(*f, substitute_rec(x, map, memo)),
    };
    memo.insert(e.ptr(), out.clone());
    out
}

fn push_term(
    acc: &mut BTreeMap<Expr, BigRational>,
    constant: &mut BigRational,
    t: &Expr,
    scale: &BigRational,
) {
    match t.node() {
        Node::Num(c) => *constant += c * scale,
        Node::Sum(ch) => {
            for c in ch {
                push_term(acc, constant, c, scale);
            }
        }
        _ => {
            let (c, m) = t.split_coeff();
            let c = c * scale;
            match m {
                None => *constant += c,
                Some(m) => {
                    if let Node::Sum(ch) = m.node() {
                        for x in ch {
                            push_term(acc, constant, x, &c);
                        }
                    } else {
                        *acc.entry(m).or_insert_with(BigRational::zero) += c;
                    }
                }
            }
        }
    }
}

fn scale_mono(c: BigRational, m: Expr) -> Expr {
    if c.is_one() {
        return m;
    }
    if c == -BigRational::one() {
        return Expr::make(Node::Negate(m));
    }
    let mut ch = vec![Expr::num(c)];
    match m.node() {
        Node::Product(fs) => ch.extend(fs.iter().cloned()),
        _ => ch.push(m),
    }
    Expr::make(Node::Product(ch))
}

/// Rational content of a sum with the sign of its leading term; dividing by it
/// leaves a primitive sum with positive leading coefficient.
pub(crate) fn sum_content(terms: &[Expr]) -> BigRational {
    let mut num_gcd = BigInt::zero();
    let mut den_lcm = BigInt::one();
    for t in terms {
        let (c, _) = t.split_coeff();
        num_gcd = num_gcd.gcd(c.numer());
        den_lcm = den_lcm.lcm(c.denom());
    }
    let mut content = BigRational::new(num_gcd, den_lcm);
    if terms[0].split_coeff().0.is_negative() {
        content = -content;
    }
    content
}

fn scale_sum(terms: &[Expr], by: &BigRational) -> Expr {
    let out: Vec<Expr> = terms
        .iter()
        .map(|t| {
            let (c, m) = t.split_coeff();
            let c = c / by;
            match m {
                None => Expr::num(c),
                Some(m) => scale_mono(c, m),
            }
        })
        .collect();
    Expr::make(Node::Sum(out))
}

fn rational_pow(r: &BigRational, k: &BigInt) -> Option<BigRational> {
    let k = k.to_i32()?;
    if r.is_zero() && k < 0 {
        return None;
    }
    Some(num_traits::Pow::pow(r, k))
}

struct ProductBuilder {
    coef: BigRational,
    zero: bool,
    map: BTreeMap<Expr, Vec<Expr>>,
}

impl ProductBuilder {
    fn new() -> Self {
        ProductBuilder { coef: BigRational::one(), zero: false, map: BTreeMap::new() }
    }

    fn push_factor(&mut self, f: &Expr) {
        match f.node() {
            Node::Num(c) => {
                if c.is_zero() {
                    self.zero = true;
                }
                self.coef *= c;
            }
            Node::Product(ch) => {
                for c in ch {
                    self.push_factor(c);
                }
            }
            Node::Negate(x) => {
                self.coef = -self.coef.clone();
                self.push_factor(x);
            }
            Node::Power(b, e) => self.push_pow(b, e),
            Node::Reciprocal(x) => self.push_pow(x, &Expr::int(-1)),
            _ => self.push_pow(f, &Expr::one()),
        }
    }

    fn push_pow(&mut self, b: &Expr, e: &Expr) {
        if e.is_zero() {
            return;
        }
        if let Some(k) = e.as_integer() {
            match b.node() {
                Node::Num(c) => {
                    if c.is_zero() {
                        if k.is_positive() {
                            self.zero = true;
                            self.coef = BigRational::zero();
                        } else {
                            self.map.entry(b.clone()).or_default().push(e.clone());
                        }
                    } else if let Some(p) = rational_pow(c, &k) {
                        self.coef *= p;
                    } else {
                        self.map.entry(b.clone()).or_default().push(e.clone());
                    }
                }
                Node::Product(ch) => {
                    for c in ch {
                        self.push_pow(c, e);
                    }
                }
                Node::Negate(x) => {
                    if k.is_odd() {
                        self.coef = -self.coef.clone();
                    }
                    self.push_pow(x, e);
                }
                Node::Power(b2, e2) => {
                    let ne = Expr::mul(vec![e2.clone(), e.clone()]);
                    self.push_pow(b2, &ne);
                }
                Node::Reciprocal(x) => {
                    let ne = Expr::num(BigRational::from_integer(-k));
                    self.push_pow(x, &ne);
                }
                Node::Sum(terms) => {
                    let content = sum_content(terms);
                    if content.is_one() {
                        self.map.entry(b.clone()).or_default().push(e.clone());
                    } else {
                        let prim = scale_sum(terms, &content);
                        if let Some(p) = rational_pow(&content, &k) {
                            self.coef *= p;
                        }
                        self.map.entry(prim).or_default().push(e.clone());
                    }
                }
                _ => self.map.entry(b.clone()).or_default().push(e.clone()),
            }
        } else {
            match b.node() {
                Node::Reciprocal(x) => {
                    let ne = Expr::neg(e.clone());
                    self.push_pow(x, &ne);
                }
                _ => self.map.entry(b.clone()).or_default().push(e.clone()),
            }
        }
    }

    fn build(self) -> Expr {
        if self.zero || self.coef.is_zero() {
            return Expr::zero();
        }
        let mut coef = self.coef;
        let mut factors: Vec<Expr> = Vec::with_capacity(self.map.len());
        for (b, exps) in self.map {
            let e = if exps.len() == 1 { exps.into_iter().next().unwrap() } else { Expr::add(exps) };
            if e.is_zero() {
                continue;
            }
            if let (Node::Num(c), Some(k)) = (b.node(), e.as_integer()) {
                if let Some(p) = rational_pow(c, &k) {
                    coef *= p;
                    continue;
                }
            }
            if e.is_one() {
                factors.push(b);
            } else if e.has_negative_coeff() {
                let pe = Expr::neg(e);
                let inner = if pe.is_one() { b } else { Expr::make(Node::Power(b, pe)) };
                factors.push(Expr::make(Node::Reciprocal(inner)));
            } else {
                factors.push(Expr::make(Node::Power(b, e)));
            }
        }
        if coef.is_zero() {
            return Expr::zero();
        }
        factors.sort();
        if factors.is_empty() {
            return Expr::num(coef);
        }
        if factors.len() == 1 {
            let f = factors.pop().unwrap();
            if coef.is_one() {
                return f;
            }
            if let Node::Sum(terms) = f.node() {
                let mut acc = BTreeMap::new();
                let mut constant = BigRational::zero();
                for t in terms {
                    push_term(&mut acc, &mut constant, t, &coef);
                }
                let mut out: Vec<Expr> = acc
                    .into_iter()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(m, c)| scale_mono(c, m))
                    .collect();
                if !constant.is_zero() {
                    out.push(Expr::num(constant));
                }
                return match out.len() {
                    0 => Expr::zero(),
                    1 => out.pop().unwrap(),
                    _ => Expr::make(Node::Sum(out)),
                };
            }
            return scale_mono(coef, f);
        }
        let body = Expr::make(Node::Product(factors));
        scale_mono(coef, body)
    }
}

// ---- ordering / equality ----

fn rank(n: &Node) -> u8 {
    match n {
        Node::Num(_) => 0,
        Node::Var(_) => 1,
        Node::Func(..) => 2,
        Node::Power(..) => 3,
        Node::Product(_) => 4,
        Node::Sum(_) => 5,
        Node::Negate(_) => 6,
        Node::Reciprocal(_) => 7,
    }
}

fn cmp_slices(a: &[Expr], b: &[Expr]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

impl Ord for Expr {
    fn cmp(&self, other: &Expr) -> Ordering {
        if self.ptr_eq(other) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        let r = rank(a).cmp(&rank(b));
        if r != Ordering::Equal {
            return r;
        }
        match (a, b) {
            (Node::Num(x), Node::Num(y)) => x.cmp(y),
            (Node::Var(x), Node::Var(y)) => x.cmp(y),
            (Node::Sum(x), Node::Sum(y)) | (Node::Product(x), Node::Product(y)) => {
                cmp_slices(x, y)
            }
            (Node::Power(b1, e1), Node::Power(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Node::Negate(x), Node::Negate(y)) | (Node::Reciprocal(x), Node::Reciprocal(y)) => {
                x.cmp(y)
            }
            (Node::Func(f, x), Node::Func(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
            _ => unreachable!(),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Expr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        self.ptr_eq(other)
            || (self.0.hash == other.0.hash && self.cmp(other) == Ordering::Equal)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

// ---- operators ----

macro_rules! binop {
    ($tr:ident, $m:ident, $f:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $f(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $f(self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $f(self, rhs.clone())
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $f(self.clone(), rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::add(vec![a, b]));
binop!(Sub, sub, Expr::sub);
binop!(Mul, mul, |a, b| Expr::mul(vec![a, b]));
binop!(Div, div, Expr::div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self.clone())
    }
}

impl From<i64> for Expr {
    fn from(i: i64) -> Expr {
        Expr::int(i)
    }
}

// ---- rendering ----

fn render_num(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Wraps anything that is not an atom for use as a power base.
fn render_atomic(e: &Expr) -> String {
    match e.node() {
        Node::Var(n) => n.to_string(),
        Node::Num(r) if r.is_integer() && !r.is_negative() => render_num(r),
        Node::Func(..) => e.to_string(),
        _ => format!("({})", e),
    }
}

/// Renders a factor inside a product.
fn render_factor(e: &Expr) -> String {
    match e.node() {
        Node::Sum(_) | Node::Negate(_) | Node::Reciprocal(_) => format!("({})", e),
        Node::Num(r) if !r.is_integer() || r.is_negative() => format!("({})", e),
        _ => e.to_string(),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(r) => write!(f, "{}", render_num(r)),
            Node::Var(n) => write!(f, "{}", n),
            Node::Sum(terms) => {
                let (pos, neg): (Vec<&Expr>, Vec<&Expr>) =
                    terms.iter().partition(|t| !t.has_negative_coeff());
                let mut first = true;
                for t in pos.iter().chain(neg.iter()) {
                    if t.has_negative_coeff() {
                        let body = Expr::neg((*t).clone());
                        if first {
                            write!(f, "-{}", render_factor_or_product(&body))?;
                        } else {
                            write!(f, " - {}", render_factor_or_product(&body))?;
                        }
                    } else if first {
                        write!(f, "{}", t)?;
                    } else {
                        write!(f, " + {}", t)?;
                    }
                    first = false;
                }
                Ok(())
            }
            Node::Product(ch) => {
                let mut num: Vec<String> = Vec::new();
                let mut den: Vec<String> = Vec::new();
                let mut lead = String::new();
                for (i, c) in ch.iter().enumerate() {
                    match c.node() {
                        Node::Num(r) if i == 0 => {
                            let ar = r.abs();
                            if r.is_negative() {
                                lead.push('-');
                            }
                            if !ar.numer().is_one() {
                                num.push(ar.numer().to_string());
                            }
                            if !ar.denom().is_one() {
                                den.push(ar.denom().to_string());
                            }
                        }
                        Node::Reciprocal(x) => den.push(render_factor(x)),
                        _ => num.push(render_factor(c)),
                    }
                }
                let mut s = lead;
                if num.is_empty() {
                    s.push('1');
                } else {
                    s.push_str(&num.join("*"));
                }
                for d in den {
                    s.push('/');
                    s.push_str(&d);
                }
                write!(f, "{}", s)
            }
            Node::Power(b, e) => write!(f, "{}^{}", render_atomic(b), render_atomic(e)),
            Node::Negate(x) => write!(f, "-{}", render_factor_or_product(x)),
            Node::Reciprocal(x) => write!(f, "1/{}", render_factor(x)),
            Node::Func(fun, x) => write!(f, "{}({})", fun.name(), x),
        }
    }
}

fn render_factor_or_product(e: &Expr) -> String {
    match e.node() {
        Node::Product(_) | Node::Reciprocal(_) => e.to_string(),
        _ => render_factor(e),
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}
