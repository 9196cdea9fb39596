use super::{simplify, Codistribution, RankOracle};
use crate::error::{Error, Result};
use crate::model::VectorField;
use crate::symexpr::ratfun::clear_common;
use crate::symexpr::{eval_float, EvaluationPoint, Expr, RatFun};
use std::collections::HashMap;

trait Field: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Result<Self>;
    fn value(&self, p: &Witness) -> Option<f64>;
}

struct Witness {
    point: EvaluationPoint,
    floats: HashMap<String, f64>,
}

impl Field for RatFun {
    fn zero() -> Self {
        RatFun::zero()
    }
    fn one() -> Self {
        RatFun::one()
    }
    fn is_zero(&self) -> bool {
        RatFun::is_zero(self)
    }
    fn sub(&self, o: &Self) -> Self {
        RatFun::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        RatFun::mul(self, o)
    }
    fn div(&self, o: &Self) -> Result<Self> {
        RatFun::div(self, o)
    }
    fn value(&self, p: &Witness) -> Option<f64> {
        self.eval_f64(&p.floats)
    }
}

impl Field for Expr {
    fn zero() -> Self {
        Expr::zero()
    }
    fn one() -> Self {
        Expr::one()
    }
    fn is_zero(&self) -> bool {
        Expr::is_zero(self)
    }
    fn sub(&self, o: &Self) -> Self {
        simplify(&Expr::sub(self.clone(), o.clone()))
    }
    fn mul(&self, o: &Self) -> Self {
        Expr::mul(vec![self.clone(), o.clone()])
    }
    fn div(&self, o: &Self) -> Result<Self> {
        Ok(Expr::div(self.clone(), o.clone()))
    }
    fn value(&self, p: &Witness) -> Option<f64> {
        eval_float(self, &p.point).ok().map(|v| v.0)
    }
}

/// Reduced row echelon form with pivots validated at the witness point.
/// Returns the pivot column of each row.
fn rref<F: Field>(m: &mut [Vec<F>], n: usize, w: &Witness, tol: f64) -> Result<Vec<usize>> {
    let r = m.len();
    let width = m.first().map_or(n, |x| x.len());
    let mut pivots = Vec::with_capacity(r);
    let mut row = 0;
    for col in 0..n {
        if row == r {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, ri) in m.iter().enumerate().skip(row) {
            if ri[col].is_zero() {
                continue;
            }
            let scale = ri.iter().filter_map(|e| e.value(w)).fold(0.0f64, |a, b| a.max(b.abs()));
            let Some(v) = ri[col].value(w) else { continue };
            let rel = if scale > 0.0 { v.abs() / scale } else { 0.0 };
            if rel > tol && best.is_none_or(|(_, b)| rel > b) {
                best = Some((i, rel));
            }
        }
        let Some((p, _)) = best else { continue };
        m.swap(row, p);
        let piv = m[row][col].clone();
        for j in 0..width {
            if j == col {
                m[row][j] = F::one();
            } else if !m[row][j].is_zero() {
                m[row][j] = m[row][j].div(&piv)?;
            }
        }
        for i in 0..r {
            if i == row || m[i][col].is_zero() {
                continue;
            }
            let c = m[i][col].clone();
            for j in 0..width {
                if j == col {
                    m[i][j] = F::zero();
                } else if !m[row][j].is_zero() {
                    m[i][j] = m[i][j].sub(&c.mul(&m[row][j]));
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if row < r && width == n {
        return Err(Error::PivotDegeneracy(format!("only {} of {} pivots found at the witness point", row, r)));
    }
    Ok(pivots)
}

fn kernel<F: Field>(m: &[Vec<F>], pivots: &[usize], n: usize) -> Vec<Vec<F>> {
    let mut out = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut xi = vec![F::zero(); n];
        xi[free] = F::one();
        for (row, pc) in pivots.iter().enumerate() {
            if !m[row][free].is_zero() {
                xi[*pc] = F::zero().sub(&m[row][free]);
            }
        }
        out.push(xi);
    }
    out
}

/// Generators of Ω^⊥ by symbolic elimination; each generator is scaled to
/// have no common denominator.
pub fn null_space(omega: &Codistribution, oracle: &RankOracle) -> Result<Vec<VectorField>> {
    let n = omega.n();
    if omega.dim() >= n {
        return Ok(Vec::new());
    }
    let tracker = omega.tracker(oracle)?;
    if tracker.rank() < omega.dim() {
        return Err(Error::RankDeficient("codistribution generators are dependent".into()));
    }
    let point = tracker.witness_point();
    let floats = point.names().filter_map(|k| point.get_float(k).map(|v| (k.clone(), v))).collect();
    let w = Witness { point, floats };
    let rows = omega.rows();
    let rat: Option<Vec<Vec<RatFun>>> =
        rows.iter().map(|r| r.iter().map(RatFun::from_expr).collect::<Option<Vec<_>>>()).collect();
    let out: Vec<VectorField> = match rat {
        Some(mut m) => {
            let piv = rref(&mut m, n, &w, oracle.tol)?;
            kernel(&m, &piv, n).iter().map(|xi| clear_common(xi).iter().map(|r| r.to_expr()).collect()).collect()
        }
        None => {
            let mut m = rows.clone();
            let piv = rref(&mut m, n, &w, oracle.tol)?;
            kernel(&m, &piv, n).into_iter().map(|xi| xi.iter().map(|e| e.simplify()).collect()).collect()
        }
    };
    for xi in &out {
        if !omega.in_orthogonal(xi, oracle)? {
            return Err(Error::PivotDegeneracy("null-space generator failed verification".into()));
        }
    }
    Ok(out)
}

/// Symbolic inverse of a square matrix, pivots validated at a random point.
pub fn inverse(m: &[Vec<Expr>], oracle: &RankOracle) -> Result<Vec<Vec<Expr>>> {
    let k = m.len();
    let mut t = oracle.tracker(k);
    for r in m {
        t.add(r.clone())?;
    }
    if t.rank() < k {
        return Err(Error::RankDeficient(format!("matrix has generic rank {} < {}", t.rank(), k)));
    }
    let point = t.witness_point();
    let floats = point.names().filter_map(|x| point.get_float(x).map(|v| (x.clone(), v))).collect();
    let w = Witness { point, floats };
    let aug = |one: Expr, zero: Expr| -> Vec<Vec<Expr>> {
        m.iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..k).map(|j| if i == j { one.clone() } else { zero.clone() }));
                row
            })
            .collect()
    };
    let rat: Option<Vec<Vec<RatFun>>> =
        m.iter().map(|r| r.iter().map(RatFun::from_expr).collect::<Option<Vec<_>>>()).collect();
    let out: Vec<Vec<Expr>> = match rat {
        Some(r) => {
            let mut a: Vec<Vec<RatFun>> = r
                .into_iter()
                .enumerate()
                .map(|(i, mut row)| {
                    row.extend((0..k).map(|j| if i == j { RatFun::one() } else { RatFun::zero() }));
                    row
                })
                .collect();
            let piv = rref(&mut a, k, &w, oracle.tol)?;
            if piv.len() < k {
                return Err(Error::RankDeficient("singular at the witness point".into()));
            }
            a.iter().map(|row| row[k..].iter().map(|x| x.to_expr()).collect()).collect()
        }
        None => {
            let mut a = aug(Expr::one(), Expr::zero());
            let piv = rref(&mut a, k, &w, oracle.tol)?;
            if piv.len() < k {
                return Err(Error::RankDeficient("singular at the witness point".into()));
            }
            a.iter().map(|row| row[k..].iter().map(|x| x.simplify()).collect()).collect()
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn v(xs: &[&str]) -> Vec<Expr> {
        xs.iter().map(|s| parse(s).unwrap()).collect()
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn inverse_of_rational_and_transcendental_matrices() {
        let o = RankOracle::default();
        let m = vec![v(&["1", "0"]), v(&["x*y - 1", "-x*(y - 2)"])];
        let inv = inverse(&m, &o).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = Expr::add((0..2).map(|l| Expr::mul(vec![m[i][l].clone(), inv[l][j].clone()])).collect());
                let want = if i == j { Expr::one() } else { Expr::zero() };
                assert!(crate::symexpr::is_identically_zero(&Expr::sub(e, want)).unwrap());
            }
        }
        let m = vec![v(&["1", "0"]), v(&["0", "sin(theta - phi)/rho"])];
        let inv = inverse(&m, &o).unwrap();
        assert!(crate::symexpr::is_identically_zero(&Expr::sub(inv[1][1].clone(), parse("rho/sin(theta - phi)").unwrap())).unwrap());
        assert!(matches!(inverse(&[v(&["x", "y"]), v(&["2*x", "2*y"])], &o), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn full_rank_has_empty_kernel() {
        let s = names(&["x", "y"]);
        let o = RankOracle::default();
        let om = Codistribution::from_rows(&s, &[v(&["1", "x"]), v(&["y", "1"])], &o).unwrap();
        assert!(null_space(&om, &o).unwrap().is_empty());
    }

    #[test]
    fn rational_kernel_is_cleared() {
        let s = names(&["x", "y", "z"]);
        let o = RankOracle::default();
        let om = Codistribution::from_rows(&s, &[v(&["y", "x", "0"]), v(&["0", "z", "y"])], &o).unwrap();
        let ns = null_space(&om, &o).unwrap();
        assert_eq!(ns.len(), 1);
        // direction [x, -y, z] up to a scalar factor
        let want = v(&["x", "-y", "z"]);
        let ok = ns[0] == want || ns[0].iter().map(|e| -e.clone()).collect::<Vec<_>>() == want;
        assert!(ok, "{:?}", ns[0]);
    }

    #[test]
    fn transcendental_kernel() {
        let s = names(&["rho", "phi", "theta"]);
        let o = RankOracle::default();
        let rows = [v(&["0", "1", "-1"]), v(&["-sin(theta - phi)/rho^2", "-cos(theta - phi)/rho", "cos(theta - phi)/rho"])];
        let om = Codistribution::from_rows(&s, &rows, &o).unwrap();
        let ns = null_space(&om, &o).unwrap();
        assert_eq!(ns.len(), 1);
        assert!(om.in_orthogonal(&ns[0], &o).unwrap());
    }
}
