//! Fixed-step RK4, τ-flows with blow-up detection and grid interpolation.

use crate::symexpr::Tape;

/// Largest τ step of the flow integrator.
pub const TAU_STEP: f64 = 0.01;
/// Largest relative change of any component in one τ step.
pub const REL_STEP: f64 = 0.05;
/// Growth factor beyond which a τ-flow is declared blown up.
pub const GROWTH_CAP: f64 = 1e8;
const MIN_STEP: f64 = 1e-13;

pub struct Blowup {
    pub tau: f64,
    pub reason: String,
}

/// Autonomous flow dz/dτ = F(z; p) with fixed parameters p appended to z.
pub struct TauFlow<'a> {
    pub tape: &'a Tape,
    pub dim: usize,
    /// (index, name) of components that must stay non-negative.
    pub positive: &'a [(usize, String)],
    pub names: &'a [String],
}

impl TauFlow<'_> {
    fn rhs(&self, z: &[f64], fixed: &[f64], buf: &mut Vec<f64>, scratch: &mut Vec<f64>, out: &mut [f64]) {
        scratch.clear();
        scratch.extend_from_slice(z);
        scratch.extend_from_slice(fixed);
        self.tape.eval(scratch, buf, out);
    }

    pub fn run(&self, z0: &[f64], fixed: &[f64], tau: f64) -> Result<Vec<f64>, Blowup> {
        let d = self.dim;
        let mut z = z0.to_vec();
        let mut buf = Vec::new();
        let mut sc = Vec::new();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut tmp = vec![0.0; d];
        let dir = tau.signum();
        let mut s = 0.0f64;
        while (tau - s).abs() > 0.0 {
            self.rhs(&z, fixed, &mut buf, &mut sc, &mut k1);
            let (mut h, mut limit) = (TAU_STEP, 0);
            for i in 0..d {
                let hi = REL_STEP * (1.0 + z[i].abs()) / k1[i].abs();
                if !(hi >= h) {
                    (h, limit) = (hi, i);
                }
            }
            if !(h >= MIN_STEP) {
                return Err(Blowup { tau: s, reason: format!("step size underflow in {}", self.names[limit]) });
            }
            let rest = (tau - s).abs();
            if rest - h < 1e-12 * (1.0 + tau.abs()) {
                h = rest;
            }
            let hs = h * dir;
            for i in 0..d {
                tmp[i] = z[i] + 0.5 * hs * k1[i];
            }
            self.rhs(&tmp, fixed, &mut buf, &mut sc, &mut k2);
            for i in 0..d {
                tmp[i] = z[i] + 0.5 * hs * k2[i];
            }
            self.rhs(&tmp, fixed, &mut buf, &mut sc, &mut k3);
            for i in 0..d {
                tmp[i] = z[i] + hs * k3[i];
            }
            self.rhs(&tmp, fixed, &mut buf, &mut sc, &mut k4);
            for i in 0..d {
                z[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s = if h == rest { tau } else { s + hs };
            for i in 0..d {
                if !z[i].is_finite() {
                    return Err(Blowup { tau: s, reason: format!("{} is not finite", self.names[i]) });
                }
                if z[i].abs() > GROWTH_CAP * (1.0 + z0[i].abs()) {
                    return Err(Blowup { tau: s, reason: format!("{} diverges", self.names[i]) });
                }
            }
            for (i, n) in self.positive {
                if z[*i] < 0.0 {
                    return Err(Blowup { tau: s, reason: format!("{} becomes negative", n) });
                }
            }
        }
        Ok(z)
    }
}

/// Uniform-grid samples of a vector function, interpolated with local
/// six-point Lagrange polynomials.
pub struct Interp<'a> {
    pub t0: f64,
    pub h: f64,
    pub values: &'a [Vec<f64>],
}

pub const STENCIL: usize = 6;

impl Interp<'_> {
    pub fn at(&self, t: f64, out: &mut [f64]) {
        let n = self.values.len();
        let u = (t - self.t0) / self.h;
        let k = STENCIL.min(n);
        let i = u.floor() as isize;
        let s = (i - (k as isize - 1) / 2).clamp(0, (n - k) as isize) as usize;
        let r = u - s as f64;
        if (r - r.round()).abs() < 1e-12 {
            let j = (r.round() as usize).min(k - 1);
            out.copy_from_slice(&self.values[s + j]);
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..k {
            let mut l = 1.0;
            for q in 0..k {
                if q != j {
                    l *= (r - q as f64) / (j as f64 - q as f64);
                }
            }
            for (o, v) in out.iter_mut().zip(&self.values[s + j]) {
                *o += l * v;
            }
        }
    }
}

/// Classic RK4 over `steps` equal steps of size h, with `sub` substeps per
/// step; returns the state at every step boundary.
pub fn rk4<F: FnMut(f64, &[f64], &mut [f64])>(
    mut f: F,
    t0: f64,
    x0: &[f64],
    h: f64,
    steps: usize,
    sub: usize,
) -> Vec<Vec<f64>> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let hs = h / sub as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    for i in 0..steps {
        for j in 0..sub {
            let t = t0 + i as f64 * h + j as f64 * hs;
            f(t, &x, &mut k1);
            for q in 0..d {
                tmp[q] = x[q] + 0.5 * hs * k1[q];
            }
            f(t + 0.5 * hs, &tmp, &mut k2);
            for q in 0..d {
                tmp[q] = x[q] + 0.5 * hs * k2[q];
            }
            f(t + 0.5 * hs, &tmp, &mut k3);
            for q in 0..d {
                tmp[q] = x[q] + hs * k3[q];
            }
            f(t + hs, &tmp, &mut k4);
            for q in 0..d {
                x[q] += hs / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
            }
        }
        out.push(x.clone());
    }
    out
}

/// Per-component sup norms of a sampled trajectory.
pub fn sup_norms(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let mut s = vec![0.0f64; d];
    for r in rows {
        for (a, v) in s.iter_mut().zip(r) {
            *a = a.max(v.abs());
        }
    }
    s
}

/// Largest deviation relative to the per-component sup norm of `reference`,
/// with its row and component. Non-finite values count as infinite.
pub fn rel_deviation(a: &[Vec<f64>], reference: &[Vec<f64>], stride: usize) -> (f64, usize, usize) {
    let norms = sup_norms(reference);
    let mut worst = (0.0, 0, 0);
    for (i, r) in reference.iter().enumerate() {
        let ra = &a[i * stride];
        for k in 0..r.len() {
            let scale = if norms[k] > 0.0 { norms[k] } else { 1.0 };
            let d = (ra[k] - r[k]).abs() / scale;
            let d = if d.is_nan() { f64::INFINITY } else { d };
            if d > worst.0 {
                worst = (d, i, k);
            }
        }
    }
    worst
}
