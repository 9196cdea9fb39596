//! Recursive-descent parser for model expressions.
//!
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'

use super::expr::{Expr, Func};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.pos >= p.src.len() {
        return Err(p.err("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err(&format!("unexpected '{}'", p.src[p.pos] as char)));
    }
    Ok(e)
}

/// Parses a decimal literal (optionally with exponent) into an exact rational.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{}{}", int_part, frac_part);
    let n: BigInt = digits.parse().ok()?;
    let scale = exp - frac_part.len() as i64;
    let ten = BigRational::from_integer(BigInt::from(10));
    let factor = if scale >= 0 {
        Pow::pow(&ten, scale as u64)
    } else {
        BigRational::one() / Pow::pow(&ten, (-scale) as u64)
    };
    Some(BigRational::from_integer(n) * factor)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax { offset: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                b'-' => {
                    self.pos += 1;
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::add(terms) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = Expr::mul(vec![acc, f]);
                }
                b'/' => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = Expr::div(acc, f);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::neg(self.factor()?));
        }
        let b = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.factor()?;
            return Ok(Expr::pow(b, e));
        }
        Ok(b)
    }

    fn base(&mut self) -> Result<Expr> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.err("unexpected end of input")),
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if self.peek() == Some(b'(') {
                let f = Func::from_name(name)
                    .ok_or(Error::UnknownFunction { name: name.to_string(), offset: start })?;
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                return Ok(Expr::func(f, arg));
            }
            return Ok(Expr::var(name));
        }
        Err(self.err(&format!("unexpected '{}'", c as char)))
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        match parse_decimal(text) {
            Some(r) => Ok(if r.is_zero() { Expr::zero() } else { Expr::num(r) }),
            None => Err(Error::Syntax { offset: start, message: format!("bad number '{}'", text) }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::expr::Node;

    #[test]
    fn parses_precedence() {
        let e = parse("a + b*c^2").unwrap();
        let a = Expr::var("a");
        let want = a + Expr::var("b") * Expr::powi(Expr::var("c"), 2);
        assert_eq!(e, want);
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("x^y^z").unwrap();
        let want = Expr::pow(Expr::var("x"), Expr::pow(Expr::var("y"), Expr::var("z")));
        assert_eq!(e, want);
    }

    #[test]
    fn sin_over_rho_shape() {
        let e = parse("sin(theta-phi)/rho").unwrap();
        match e.node() {
            Node::Product(ch) => {
                assert_eq!(ch.len(), 2);
                assert!(matches!(ch[0].node(), Node::Func(Func::Sin, _)));
                assert!(matches!(ch[1].node(), Node::Reciprocal(_)));
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn syntax_error_offset() {
        match parse("x + * y") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{:?}", other),
        }
        match parse("(x + y") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn unknown_function() {
        match parse("1 + tanh(x)") {
            Err(Error::UnknownFunction { name, offset }) => {
                assert_eq!(name, "tanh");
                assert_eq!(offset, 4);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse("0.1").unwrap(), Expr::frac(1, 10));
        assert_eq!(parse("9e-5").unwrap(), Expr::frac(9, 100000));
        assert_eq!(parse("2.5E2").unwrap(), Expr::int(250));
    }

    #[test]
    fn unary_minus() {
        assert_eq!(parse("-x^2").unwrap(), Expr::neg(Expr::powi(Expr::var("x"), 2)));
        assert_eq!(parse("2^-1").unwrap(), Expr::frac(1, 2));
    }

    #[test]
    fn render_round_trips() {
        for s in [
            "k01 + k1/(1 + (x2/W1)^n1) - x1",
            "lambda - rho*T_U - eta*T_U*V",
            "v*sin(theta - phi)/rho",
            "-beta*S*(I + A)",
            "x^(1/2) + 2/3*y - 3*z/(x - y)^2",
            "exp(-tau)*log(W1/x2)",
        ] {
            let e = parse(s).unwrap();
            let back = parse(&e.to_string()).unwrap();
            assert_eq!(back, e, "{} -> {}", s, e);
        }
    }
}
