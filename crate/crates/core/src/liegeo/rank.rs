//! Generic rank of symbolic matrices, estimated at random points.

use crate::error::{Error, Result};
use crate::symexpr::{evaluate_all, rat_to_f64, EvaluationPoint, Expr, Mode, Sampler, Value, DEFAULT_SEED, DEFAULT_TRIALS};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeSet;

/// Relative threshold below which a float residual counts as zero.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct RankOracle {
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub tol: f64,
}

impl Default for RankOracle {
    fn default() -> Self {
        RankOracle { trials: DEFAULT_TRIALS, seed: DEFAULT_SEED, mode: Mode::Auto, tol: RANK_TOL }
    }
}

impl RankOracle {
    pub fn new(trials: usize, seed: u64, mode: Mode) -> Self {
        RankOracle { trials: trials.max(1), seed, mode, tol: RANK_TOL }
    }

    pub fn sampler(&self) -> Sampler {
        let mut s = Sampler::new(self.seed);
        s.mode = self.mode;
        s
    }

    pub fn tracker(&self, n: usize) -> RankTracker {
        RankTracker::new(self.clone(), n)
    }
}

#[derive(Clone, Debug)]
enum Echelon {
    /// Rows normalised to a unit pivot, fully reduced against each other.
    Exact(Vec<(usize, Vec<BigRational>)>),
    /// Orthonormal basis of the row space.
    Float(Vec<Vec<f64>>),
}

#[derive(Clone, Debug)]
struct PointState {
    index: u64,
    point: EvaluationPoint,
    bound: BTreeSet<String>,
    ech: Echelon,
}

impl PointState {
    fn rank(&self) -> usize {
        match &self.ech {
            Echelon::Exact(r) => r.len(),
            Echelon::Float(r) => r.len(),
        }
    }
}

/// Incremental rank estimator: keeps one echelon form per sample point and
/// accepts a row when it raises the rank at some point.
#[derive(Clone, Debug)]
pub struct RankTracker {
    oracle: RankOracle,
    sampler: Sampler,
    n: usize,
    rows: Vec<Vec<Expr>>,
    points: Vec<PointState>,
    next_index: u64,
}

fn to_float(row: &[Value]) -> Vec<f64> {
    row.iter().map(|v| v.to_f64()).collect()
}

fn gram_schmidt(basis: &[Vec<f64>], row: &[f64], tol: f64) -> Option<Vec<f64>> {
    let norm0 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm0 == 0.0 || !norm0.is_finite() {
        return None;
    }
    let mut v: Vec<f64> = row.iter().map(|x| x / norm0).collect();
    for _ in 0..2 {
        for b in basis {
            let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= d * bi;
            }
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= tol {
        return None;
    }
    Some(v.into_iter().map(|x| x / norm).collect())
}

fn reduce_exact(ech: &[(usize, Vec<BigRational>)], row: &mut [BigRational]) {
    for (p, r) in ech {
        if row[*p].is_zero() {
            continue;
        }
        let c = row[*p].clone();
        for (x, y) in row.iter_mut().zip(r) {
            if !y.is_zero() {
                *x -= &c * y;
            }
        }
    }
}

impl Echelon {
    /// Inserts the row if independent; returns whether it was.
    fn insert(&mut self, row: &[Value], tol: f64) -> bool {
        let all_exact = row.iter().all(|v| matches!(v, Value::Exact(_)));
        if let Echelon::Exact(ech) = self {
            if all_exact {
                let mut r: Vec<BigRational> = row
                    .iter()
                    .map(|v| match v {
                        Value::Exact(x) => x.clone(),
                        Value::Float(_) => unreachable!(),
                    })
                    .collect();
                reduce_exact(ech, &mut r);
                let Some(p) = r.iter().position(|x| !x.is_zero()) else {
                    return false;
                };
                let inv = BigRational::one() / &r[p];
                for x in r.iter_mut() {
                    *x *= &inv;
                }
                for (_, other) in ech.iter_mut() {
                    if !other[p].is_zero() {
                        let c = other[p].clone();
                        for (x, y) in other.iter_mut().zip(&r) {
                            if !y.is_zero() {
                                *x -= &c * y;
                            }
                        }
                    }
                }
                ech.push((p, r));
                return true;
            }
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for (_, r) in ech.iter() {
                let f: Vec<f64> = r.iter().map(rat_to_f64).collect();
                if let Some(b) = gram_schmidt(&basis, &f, tol) {
                    basis.push(b);
                }
            }
            *self = Echelon::Float(basis);
        }
        match self {
            Echelon::Float(basis) => match gram_schmidt(basis, &to_float(row), tol) {
                Some(b) => {
                    basis.push(b);
                    true
                }
                None => false,
            },
            Echelon::Exact(_) => unreachable!(),
        }
    }

    fn contains(&self, row: &[Value], tol: f64) -> bool {
        let mut c = self.clone();
        !c.insert(row, tol)
    }
}

impl RankTracker {
    pub fn new(oracle: RankOracle, n: usize) -> Self {
        let sampler = oracle.sampler();
        let mut t = RankTracker { oracle, sampler, n, rows: Vec::new(), points: Vec::new(), next_index: 0 };
        for _ in 0..t.oracle.trials {
            let idx = t.next_index;
            t.next_index += 1;
            t.points.push(t.fresh_point(idx));
        }
        t
    }

    fn fresh_point(&self, index: u64) -> PointState {
        PointState {
            index,
            point: EvaluationPoint::with_mode(self.oracle.mode),
            bound: BTreeSet::new(),
            ech: Echelon::Exact(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<Expr>] {
        &self.rows
    }

    fn eval_row(sampler: &Sampler, ps: &mut PointState, row: &[Expr]) -> Result<Vec<Value>> {
        for e in row {
            for v in e.free_vars() {
                if !ps.bound.contains(&v) {
                    ps.point.bind_rational(&v, sampler.value(ps.index, &v));
                    ps.bound.insert(v);
                }
            }
        }
        evaluate_all(row, &ps.point)
    }

    /// Rebuilds a point from scratch at fresh sample indices until every
    /// stored row evaluates.
    fn replace_point(&mut self, slot: usize) -> Result<()> {
        let limit = 50 * self.oracle.trials as u64 + self.next_index;
        loop {
            if self.next_index >= limit {
                return Err(Error::InconclusiveSingular);
            }
            let idx = self.next_index;
            self.next_index += 1;
            let mut ps = self.fresh_point(idx);
            let mut ok = true;
            for r in &self.rows {
                match Self::eval_row(&self.sampler, &mut ps, r) {
                    Ok(v) => {
                        ps.ech.insert(&v, self.oracle.tol);
                    }
                    Err(e) if e.is_singular() => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok {
                self.points[slot] = ps;
                return Ok(());
            }
        }
    }

    fn eval_everywhere(&mut self, row: &[Expr]) -> Result<Vec<Vec<Value>>> {
        let mut out = Vec::with_capacity(self.points.len());
        for slot in 0..self.points.len() {
            let mut attempts = 0;
            loop {
                match Self::eval_row(&self.sampler, &mut self.points[slot], row) {
                    Ok(v) => {
                        out.push(v);
                        break;
                    }
                    Err(e) if e.is_singular() => {
                        attempts += 1;
                        if attempts > 50 {
                            return Err(Error::InconclusiveSingular);
                        }
                        self.replace_point(slot)?;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }

    /// Adds the row if it raises the generic rank; returns whether it did.
    pub fn add(&mut self, row: Vec<Expr>) -> Result<bool> {
        assert_eq!(row.len(), self.n, "row length does not match ambient dimension");
        if row.iter().all(|e| e.is_zero()) {
            return Ok(false);
        }
        let vals = self.eval_everywhere(&row)?;
        let before = self.rank();
        let tol = self.oracle.tol;
        let mut candidate = self.points.clone();
        for (ps, v) in candidate.iter_mut().zip(&vals) {
            ps.ech.insert(v, tol);
        }
        let after = candidate.iter().map(|p| p.rank()).max().unwrap_or(0);
        if after > before {
            self.points = candidate;
            self.rows.push(row);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Whether the row lies in the span of the accepted rows.
    pub fn contains(&mut self, row: &[Expr]) -> Result<bool> {
        if row.iter().all(|e| e.is_zero()) {
            return Ok(true);
        }
        let vals = self.eval_everywhere(row)?;
        let r = self.rank();
        let tol = self.oracle.tol;
        for (ps, v) in self.points.iter().zip(&vals) {
            if ps.rank() == r && !ps.ech.contains(v, tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn rank(&self) -> usize {
        self.points.iter().map(|p| p.rank()).max().unwrap_or(0)
    }

    /// Sample index of the first point attaining the current rank.
    pub fn witness(&self) -> u64 {
        let r = self.rank();
        self.points.iter().find(|p| p.rank() == r).map(|p| p.index).unwrap_or(0)
    }

    /// The witness point with all variables of the accepted rows bound.
    pub fn witness_point(&self) -> EvaluationPoint {
        let r = self.rank();
        self.points.iter().find(|p| p.rank() == r).map(|p| p.point.clone()).unwrap_or_default()
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankReport {
    pub rank: usize,
    pub witness: u64,
}

/// Generic rank of a symbolic matrix given by rows.
pub fn generic_rank(rows: &[Vec<Expr>], n: usize, oracle: &RankOracle) -> Result<RankReport> {
    let mut t = oracle.tracker(n);
    for r in rows {
        t.add(r.clone())?;
        if t.rank() == n {
            break;
        }
    }
    Ok(RankReport { rank: t.rank(), witness: t.witness() })
}

/// Indices of a maximal independent subset chosen greedily in order.
pub fn independent_rows(rows: &[Vec<Expr>], n: usize, oracle: &RankOracle) -> Result<Vec<usize>> {
    let mut t = oracle.tracker(n);
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if t.add(r.clone())? {
            out.push(i);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows(v: &[&[&str]]) -> Vec<Vec<Expr>> {
        v.iter().map(|r| r.iter().map(|s| parse(s).unwrap()).collect()).collect()
    }

    #[test]
    fn simple_ranks() {
        let o = RankOracle::default();
        assert_eq!(generic_rank(&rows(&[&["0", "1", "-1"]]), 3, &o).unwrap().rank, 1);
        let m = rows(&[&["x", "y"], &["x^2", "x*y"]]);
        assert_eq!(generic_rank(&m, 2, &o).unwrap().rank, 1);
        let m = rows(&[&["x", "y"], &["y", "x"]]);
        assert_eq!(generic_rank(&m, 2, &o).unwrap().rank, 2);
    }

    #[test]
    fn product_of_random_integer_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<Vec<i64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(-9..=9)).collect()).collect();
        let b: Vec<Vec<i64>> = (0..3).map(|_| (0..6).map(|_| rng.random_range(-9..=9)).collect()).collect();
        // independent oracle: rank of the factors by exact elimination over i128
        fn int_rank(m: &[Vec<i64>]) -> usize {
            let mut m: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|x| *x as i128).collect()).collect();
            let (rows, cols) = (m.len(), m[0].len());
            let mut r = 0;
            for c in 0..cols {
                let Some(p) = (r..rows).find(|i| m[*i][c] != 0) else { continue };
                m.swap(r, p);
                for i in 0..rows {
                    if i != r && m[i][c] != 0 {
                        let (a, b) = (m[r][c], m[i][c]);
                        for j in 0..cols {
                            m[i][j] = m[i][j] * a - m[r][j] * b;
                        }
                    }
                }
                r += 1;
            }
            r
        }
        assert_eq!(int_rank(&a), 3);
        assert_eq!(int_rank(&b), 3);
        let prod: Vec<Vec<Expr>> = (0..4)
            .map(|i| (0..6).map(|j| Expr::int((0..3).map(|k| a[i][k] * b[k][j]).sum())).collect())
            .collect();
        assert_eq!(generic_rank(&prod, 6, &RankOracle::default()).unwrap().rank, 3);
    }

    #[test]
    fn float_rows_use_tolerance() {
        let m = rows(&[&["sin(x)", "cos(x)"], &["2*sin(x)", "2*cos(x)"]]);
        assert_eq!(generic_rank(&m, 2, &RankOracle::default()).unwrap().rank, 1);
        let m = rows(&[&["sin(x)", "cos(x)"], &["cos(x)", "sin(x)"]]);
        assert_eq!(generic_rank(&m, 2, &RankOracle::default()).unwrap().rank, 2);
    }

    #[test]
    fn tracker_membership_and_monotonicity() {
        let mut t = RankOracle::default().tracker(3);
        assert!(t.add(rows(&[&["x", "0", "1"]]).remove(0)).unwrap());
        assert!(!t.add(rows(&[&["2*x", "0", "2"]]).remove(0)).unwrap());
        assert!(t.contains(&rows(&[&["x*y", "0", "y"]])[0]).unwrap());
        assert!(!t.contains(&rows(&[&["0", "1", "0"]])[0]).unwrap());
        assert_eq!(t.rank(), 1);
    }

    #[test]
    fn singular_rows_resample() {
        let o = RankOracle::new(3, 5, Mode::Auto);
        let s = o.sampler();
        let x0 = Expr::num(s.value(0, "x"));
        let bad = Expr::div(Expr::one(), Expr::sub(Expr::var("x"), x0));
        let mut t = o.tracker(2);
        assert!(t.add(vec![bad, Expr::one()]).unwrap());
        assert_eq!(t.rank(), 1);
        assert_ne!(t.witness(), 0);
    }
}
