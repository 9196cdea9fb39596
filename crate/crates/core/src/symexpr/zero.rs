use super::eval::{eval_exact, eval_float, EvaluationPoint, ExactFail, Mode};
use super::expr::{name_hash, Expr};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Relative tolerance for float zero tests: |v| <= ZERO_TOL * magnitude.
pub const ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 5;
pub const DEFAULT_SEED: u64 = 0x5eed_1e5;

/// Deterministic generator of random rational points. The value of a variable
/// depends only on (seed, point index, variable name), so adding variables does
/// not perturb the others.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub seed: u64,
    pub mode: Mode,
    ranges: BTreeMap<String, (BigRational, BigRational)>,
    fixed: BTreeMap<String, BigRational>,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { seed, mode: Mode::Auto, ranges: BTreeMap::new(), fixed: BTreeMap::new() }
    }

    /// Restricts a variable to the open interval (lo, hi).
    pub fn with_range(mut self, name: &str, lo: BigRational, hi: BigRational) -> Self {
        self.ranges.insert(name.to_string(), (lo, hi));
        self
    }

    pub fn with_fixed(mut self, name: &str, v: BigRational) -> Self {
        self.fixed.insert(name.to_string(), v);
        self
    }

    pub fn value(&self, index: u64, name: &str) -> BigRational {
        if let Some(v) = self.fixed.get(name) {
            return v.clone();
        }
        let key = name_hash(name) ^ self.seed.rotate_left(17) ^ index.wrapping_mul(0x9e3779b97f4a7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let p: i64 = rng.random_range(1..=97);
        let q: i64 = rng.random_range(1..=97);
        match self.ranges.get(name) {
            None => BigRational::new(BigInt::from(p), BigInt::from(q)),
            Some((lo, hi)) => {
                let u = BigRational::new(BigInt::from(p), BigInt::from(p + q));
                lo + (hi - lo) * u
            }
        }
    }

    pub fn point<S: AsRef<str>>(&self, index: u64, vars: &[S]) -> EvaluationPoint {
        let mut p = EvaluationPoint::with_mode(self.mode);
        for v in vars {
            p.bind_rational(v.as_ref(), self.value(index, v.as_ref()));
        }
        p
    }
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::new(DEFAULT_SEED)
    }
}

/// Zero test of a single value at one point: exact when possible.
pub fn zero_at(e: &Expr, p: &EvaluationPoint) -> Result<bool> {
    if p.mode != Mode::Float {
        match eval_exact(e, p) {
            Ok(v) => return Ok(v.is_zero()),
            Err(ExactFail::Err(err)) => return Err(err),
            Err(ExactFail::NotExact) => {
                if p.mode == Mode::Exact {
                    return Err(Error::Domain("expression has no exact rational value".into()));
                }
            }
        }
    }
    let (v, m) = eval_float(e, p)?;
    Ok(v.abs() <= ZERO_TOL * m)
}

#[derive(Clone, Debug)]
pub struct ZeroTest {
    pub zero: bool,
    /// Index of the sample point where a nonzero value was found.
    pub witness: Option<u64>,
    pub points_used: usize,
}

/// Probabilistic identity test: canonical form first, then `trials`
/// non-singular random points. Singular points are skipped and resampled.
pub fn zero_test(e: &Expr, sampler: &Sampler, trials: usize) -> Result<ZeroTest> {
    if e.is_zero() {
        return Ok(ZeroTest { zero: true, witness: None, points_used: 0 });
    }
    if e.as_num().is_some() {
        return Ok(ZeroTest { zero: false, witness: Some(0), points_used: 0 });
    }
    let vars = e.free_vars();
    let mut good = 0usize;
    let mut idx = 0u64;
    let max_attempts = 50 * trials.max(1) as u64;
    while good < trials {
        if idx >= max_attempts {
            return Err(Error::InconclusiveSingular);
        }
        let p = sampler.point(idx, &vars);
        match zero_at(e, &p) {
            Ok(true) => good += 1,
            Ok(false) => return Ok(ZeroTest { zero: false, witness: Some(idx), points_used: good + 1 }),
            Err(err) if err.is_singular() => {}
            Err(err) => return Err(err),
        }
        idx += 1;
    }
    Ok(ZeroTest { zero: true, witness: None, points_used: good })
}

pub fn is_identically_zero(e: &Expr) -> Result<bool> {
    Ok(zero_test(e, &Sampler::default(), DEFAULT_TRIALS)?.zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse::parse;

    #[test]
    fn identities_and_non_identities() {
        assert!(is_identically_zero(&parse("(x+y)^2 - x^2 - 2*x*y - y^2").unwrap()).unwrap());
        let t = zero_test(&parse("x*y - x").unwrap(), &Sampler::default(), 5).unwrap();
        assert!(!t.zero);
        assert!(t.witness.is_some());
    }

    #[test]
    fn transcendental_identity() {
        assert!(is_identically_zero(&parse("sin(x)^2 + cos(x)^2 - 1").unwrap()).unwrap());
        assert!(is_identically_zero(&parse("sin(a-b) + sin(b-a)").unwrap()).unwrap());
        assert!(!is_identically_zero(&parse("sin(x)^2 - 1").unwrap()).unwrap());
    }

    #[test]
    fn singular_points_are_resampled() {
        let s = Sampler::new(1);
        let x0 = Expr::num(s.value(0, "x"));
        let x = Expr::var("x");
        // singular exactly at sample point 0
        let e = Expr::sub(
            Expr::div(Expr::sub(Expr::powi(x.clone(), 2), Expr::powi(x0.clone(), 2)), Expr::sub(x.clone(), x0.clone())),
            Expr::add(vec![x.clone(), x0.clone()]),
        );
        assert!(zero_at(&e, &s.point(0, &["x"])).unwrap_err().is_singular());
        let t = zero_test(&e, &s, 5).unwrap();
        assert!(t.zero);
        assert_eq!(t.points_used, 5);
        let s = Sampler::new(1).with_fixed("y", BigRational::from_integer(1.into()));
        let e = parse("x/(y - 1)").unwrap();
        assert_eq!(zero_test(&e, &s, 5).unwrap_err(), Error::InconclusiveSingular);
    }

    #[test]
    fn sampler_is_stable_per_name() {
        let s = Sampler::new(7);
        let a = s.point(3, &["x", "y"]);
        let b = s.point(3, &["y", "z", "x"]);
        assert_eq!(a.get_rational("x"), b.get_rational("x"));
        assert_eq!(a.get_rational("y"), b.get_rational("y"));
    }

    #[test]
    fn ranged_values_stay_inside() {
        let lo = BigRational::new(1.into(), 100.into());
        let hi = BigRational::new(1.into(), 10.into());
        let s = Sampler::new(3).with_range("tau", lo.clone(), hi.clone());
        for i in 0..50 {
            let v = s.value(i, "tau");
            assert!(v > lo && v < hi);
        }
    }
}
