//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' exponent)?
//! exponent:= ['-'] INT ('^' exponent)? | '(' ['-'] INT ')'
//! primary := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are parsed into exact rationals: `3`, `0.25`, `1e-3`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{Expr, Func, SymError, Symbol, SymbolTable};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Int(i64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns (token, byte offset of its first char).
    fn next(&mut self) -> Result<(Tok, usize), SymError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || (c == '.' && rest[1..].starts_with(|d: char| d.is_ascii_digit())) {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let len = rest
                .find(|d: char| !(d.is_ascii_alphanumeric() || d == '_'))
                .unwrap_or(rest.len());
            self.pos += len;
            return Ok((Tok::Ident(rest[..len].to_string()), start));
        }
        if "+-*/^(),".contains(c) {
            self.pos += 1;
            return Ok((Tok::Op(c), start));
        }
        Err(SymError::Syntax {
            offset: start,
            message: format!("unexpected character '{c}'"),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), SymError> {
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        let mut int_part = String::new();
        let mut frac_part = String::new();
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            int_part.push(bytes[i] as char);
            i += 1;
        }
        let mut is_int = true;
        if i < bytes.len() && bytes[i] == b'.' {
            is_int = false;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                frac_part.push(bytes[i] as char);
                i += 1;
            }
        }
        let mut exp: i64 = 0;
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            let mut sign = 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                if bytes[j] == b'-' {
                    sign = -1;
                }
                j += 1;
            }
            let exp_start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp_start {
                is_int = false;
                exp = sign * self.src[exp_start..j].parse::<i64>().map_err(|_| SymError::Syntax {
                    offset: exp_start,
                    message: "exponent out of range".into(),
                })?;
                i = j;
            }
        }
        self.pos = i;
        let digits = format!("{int_part}{frac_part}");
        let mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| SymError::Syntax {
                offset: start,
                message: "malformed number".into(),
            })?
        };
        let scale = exp - frac_part.len() as i64;
        if scale.abs() > 4000 {
            return Err(SymError::Syntax {
                offset: start,
                message: "number exponent out of range".into(),
            });
        }
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
        };
        if is_int {
            if let Ok(v) = int_part.parse::<i64>() {
                return Ok((Tok::Int(v), start));
            }
        }
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    symbols: Option<&'a SymbolTable>,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), SymError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SymError> {
        Err(SymError::Syntax {
            offset: self.at,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, SymError> {
        let mut acc = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.bump()?;
                    acc = acc + self.term()?;
                }
                Tok::Op('-') => {
                    self.bump()?;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SymError> {
        let mut acc = self.unary()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.bump()?;
                    acc = acc * self.unary()?;
                }
                Tok::Op('/') => {
                    self.bump()?;
                    let rhs = self.unary()?;
                    acc = acc.div(&rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SymError> {
        match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Ok(self.unary()?.neg())
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, SymError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let k = self.exponent()?;
            let k = i32::try_from(k).or_else(|_| self.err("exponent too large"))?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, SymError> {
        let paren = self.tok == Tok::Op('(');
        if paren {
            self.bump()?;
        }
        let neg = self.tok == Tok::Op('-');
        if neg {
            self.bump()?;
        }
        let Tok::Int(mut k) = self.tok else {
            return self.err("exponent must be an integer literal");
        };
        self.bump()?;
        if paren {
            if self.tok != Tok::Op(')') {
                return self.err("expected ')'");
            }
            self.bump()?;
        }
        if neg {
            k = -k;
        }
        if !paren && self.tok == Tok::Op('^') {
            self.bump()?;
            let inner = self.exponent()?;
            let inner = u32::try_from(inner).or_else(|_| self.err("negative tower exponent"))?;
            k = k.checked_pow(inner).map_or_else(|| self.err("exponent overflow"), Ok)?;
        }
        Ok(k)
    }

    fn primary(&mut self) -> Result<Expr, SymError> {
        match self.tok.clone() {
            Tok::Int(v) => {
                self.bump()?;
                Ok(Expr::int(v))
            }
            Tok::Num(r) => {
                self.bump()?;
                Ok(Expr::num(r))
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if self.tok == Tok::Op('(') {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(SymError::Syntax {
                            offset: at,
                            message: format!("unknown function '{name}'"),
                        });
                    };
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::Op(')') {
                        return self.err("expected ')'");
                    }
                    self.bump()?;
                    return Ok(Expr::call(func, arg));
                }
                if let Some(table) = self.symbols {
                    if !table.contains(&name) {
                        return Err(SymError::Undeclared { name, offset: at });
                    }
                }
                Ok(Expr::sym(&Symbol::new(&name)))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                if self.tok != Tok::Op(')') {
                    return self.err("expected ')'");
                }
                self.bump()?;
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Op(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

fn parse_impl(text: &str, symbols: Option<&SymbolTable>) -> Result<Expr, SymError> {
    let mut p = Parser {
        lexer: Lexer::new(text),
        tok: Tok::End,
        at: 0,
        symbols,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses `text`, requiring every identifier to be declared in `symbols`.
pub fn parse(text: &str, symbols: &SymbolTable) -> Result<Expr, SymError> {
    parse_impl(text, Some(symbols))
}

/// Parses without a symbol table; any identifier becomes a symbol.
pub fn parse_free(text: &str) -> Result<Expr, SymError> {
    parse_impl(text, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symx::{eval_with, normalize};

    fn table() -> SymbolTable {
        SymbolTable::new(&["x1", "x2", "x3", "x4"], &["J"])
    }

    #[test]
    fn parses_power_plus() {
        let e = parse("x4^2+1", &table()).unwrap();
        let v = eval_with(&e, &|s| (s.name() == "x4").then_some(2.0)).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn syntax_error_has_offset() {
        match parse("x1 +* 2", &table()) {
            Err(SymError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undeclared_identifier() {
        match parse("x1 + y", &table()) {
            Err(SymError::Undeclared { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn literals_are_exact() {
        let t = table();
        assert_eq!(normalize(&parse("0.25", &t).unwrap()), Expr::ratio(1, 4));
        assert_eq!(normalize(&parse("3/4", &t).unwrap()), Expr::ratio(3, 4));
        assert_eq!(normalize(&parse("1e-3", &t).unwrap()), Expr::ratio(1, 1000));
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_minus() {
        let t = table();
        let e = parse("x1^2^3", &t).unwrap();
        assert_eq!(normalize(&e), normalize(&parse("x1^8", &t).unwrap()));
        let e = parse("-x1^2", &t).unwrap();
        let v = eval_with(&e, &|_| Some(3.0)).unwrap();
        assert_eq!(v, -9.0);
        let e = parse("(x4^2+1)^(-1)", &t).unwrap();
        assert_eq!(eval_with(&e, &|_| Some(0.0)).unwrap(), 1.0);
        let e = parse("x1^-1", &t).unwrap();
        assert_eq!(eval_with(&e, &|_| Some(4.0)).unwrap(), 0.25);
    }

    #[test]
    fn non_integer_exponent_rejected() {
        assert!(parse("x1^x2", &table()).is_err());
        assert!(parse("x1^0.5", &table()).is_err());
    }

    #[test]
    fn functions_and_whitespace() {
        let e = parse("  sin( x1 ) *x2", &table()).unwrap();
        let v = eval_with(&e, &|s| Some(if s.name() == "x1" { 0.0 } else { 2.0 })).unwrap();
        assert_eq!(v, 0.0);
        assert!(parse("foo(x1)", &table()).is_err());
    }

    #[test]
    fn display_round_trips() {
        let t = table();
        for src in [
            "(x3-2*x1)*(x4^2+1)",
            "-J*x1/(x2 - 3/4)",
            "sqrt(x1^2 + 1) - exp(-x2)",
            "x1^(-2)*(x2 + 1)^3",
        ] {
            let e = parse(src, &t).unwrap();
            let again = parse(&e.to_string(), &t).unwrap();
            assert_eq!(normalize(&e), normalize(&again), "{src} -> {e}");
        }
    }
}
