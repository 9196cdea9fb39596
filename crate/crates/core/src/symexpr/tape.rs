//! Compiled straight-line f64 programs for repeated numerical evaluation.

use super::eval::rat_to_f64;
use super::expr::{Expr, Func, Node};
use crate::error::{Error, Result};
use num_traits::ToPrimitive;
use std::collections::HashMap;

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Load(usize),
    Sum(u32, u32),
    Prod(u32, u32),
    Pow(u32, u32),
    PowI(u32, i32),
    Neg(u32),
    Recip(u32),
    Fun(Func, u32),
}

/// Evaluates a fixed list of expressions over a fixed variable ordering.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    args: Vec<u32>,
    outputs: Vec<u32>,
    pub vars: Vec<String>,
}

impl Tape {
    pub fn compile(exprs: &[Expr], vars: &[String]) -> Result<Tape> {
        let slots: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut t = Tape { ops: Vec::new(), args: Vec::new(), outputs: Vec::new(), vars: vars.to_vec() };
        let mut memo: HashMap<usize, u32> = HashMap::new();
        for e in exprs {
            let o = t.emit(e, &slots, &mut memo)?;
            t.outputs.push(o);
        }
        Ok(t)
    }

    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        (self.ops.len() - 1) as u32
    }

    fn emit(&mut self, e: &Expr, slots: &HashMap<&str, usize>, memo: &mut HashMap<usize, u32>) -> Result<u32> {
        if let Some(i) = memo.get(&e.ptr()) {
            return Ok(*i);
        }
        let id = match e.node() {
            Node::Num(r) => self.push(Op::Const(rat_to_f64(r))),
            Node::Var(n) => {
                let s = *slots
                    .get(&**n)
                    .ok_or_else(|| Error::Validation(format!("unbound variable '{}'", n)))?;
                self.push(Op::Load(s))
            }
            Node::Sum(ch) | Node::Product(ch) => {
                let ids: Vec<u32> = ch.iter().map(|c| self.emit(c, slots, memo)).collect::<Result<_>>()?;
                let start = self.args.len() as u32;
                self.args.extend(ids);
                let len = ch.len() as u32;
                if matches!(e.node(), Node::Sum(_)) {
                    self.push(Op::Sum(start, len))
                } else {
                    self.push(Op::Prod(start, len))
                }
            }
            Node::Power(b, x) => {
                let bi = self.emit(b, slots, memo)?;
                match x.as_integer().and_then(|k| k.to_i32()) {
                    Some(k) => self.push(Op::PowI(bi, k)),
                    None => {
                        let xi = self.emit(x, slots, memo)?;
                        self.push(Op::Pow(bi, xi))
                    }
                }
            }
            Node::Negate(x) => {
                let a = self.emit(x, slots, memo)?;
                self.push(Op::Neg(a))
            }
            Node::Reciprocal(x) => {
                let a = self.emit(x, slots, memo)?;
                self.push(Op::Recip(a))
            }
            Node::Func(f, x) => {
                let a = self.emit(x, slots, memo)?;
                self.push(Op::Fun(*f, a))
            }
        };
        memo.insert(e.ptr(), id);
        Ok(id)
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Writes all outputs into `out`. Domain violations surface as NaN or inf.
    pub fn eval(&self, x: &[f64], buf: &mut Vec<f64>, out: &mut [f64]) {
        buf.clear();
        buf.reserve(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Load(i) => x[i],
                Op::Sum(s, l) => self.args[s as usize..(s + l) as usize].iter().map(|a| buf[*a as usize]).sum(),
                Op::Prod(s, l) => {
                    self.args[s as usize..(s + l) as usize].iter().map(|a| buf[*a as usize]).product()
                }
                Op::Pow(a, b) => buf[a as usize].powf(buf[b as usize]),
                Op::PowI(a, k) => buf[a as usize].powi(k),
                Op::Neg(a) => -buf[a as usize],
                Op::Recip(a) => 1.0 / buf[a as usize],
                Op::Fun(f, a) => {
                    let v = buf[a as usize];
                    match f {
                        Func::Sin => v.sin(),
                        Func::Cos => v.cos(),
                        Func::Exp => v.exp(),
                        Func::Log => {
                            if v > 0.0 {
                                v.ln()
                            } else {
                                f64::NAN
                            }
                        }
                    }
                }
            };
            buf.push(v);
        }
        for (o, i) in out.iter_mut().zip(self.outputs.iter()) {
            *o = buf[*i as usize];
        }
    }

    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = Vec::new();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval(x, &mut buf, &mut out);
        out
    }
}
