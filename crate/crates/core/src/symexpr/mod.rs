//! Canonical symbolic expressions: construction, parsing, differentiation,
//! evaluation and probabilistic zero testing.

mod diff;
mod eval;
mod expr;
mod parse;
pub mod poly;
pub mod ratfun;
mod tape;
mod zero;

pub use diff::{derive, diff};
pub use eval::{eval_float, evaluate, evaluate_all, rat_to_f64, EvaluationPoint, Mode, Value};
pub use expr::{Expr, Func, Node};
pub(crate) use expr::name_hash;
pub use parse::{parse, parse_decimal};
pub use ratfun::RatFun;
pub use tape::Tape;
pub use zero::{is_identically_zero, zero_at, zero_test, Sampler, ZeroTest, DEFAULT_SEED, DEFAULT_TRIALS, ZERO_TOL};

/// Simplifies a rational expression through exact polynomial arithmetic;
/// other expressions are returned in canonical form.
pub fn rational_simplify(e: &Expr) -> Expr {
    match RatFun::from_expr(e) {
        Some(r) => r.to_expr(),
        None => e.clone(),
    }
}
