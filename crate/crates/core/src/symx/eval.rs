use std::ops::{Add, Mul, Neg, Sub};

use super::expr::{rational_to_f64, Expr, Func, Node, Symbol};
use super::{Point, SymError};

/// Numeric types an expression can be evaluated over.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64, like: &Self) -> Self;
    fn value(&self) -> f64;
    fn recip(&self) -> Result<Self, SymError>;
    fn powi(&self, k: i32) -> Result<Self, SymError>;
    fn call(&self, f: Func) -> Result<Self, SymError>;
}

impl Scalar for f64 {
    fn from_f64(v: f64, _: &Self) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn recip(&self) -> Result<Self, SymError> {
        if *self == 0.0 {
            return Err(SymError::DivisionByZero);
        }
        Ok(1.0 / self)
    }

    fn powi(&self, k: i32) -> Result<Self, SymError> {
        if k < 0 && *self == 0.0 {
            return Err(SymError::DivisionByZero);
        }
        Ok(f64::powi(*self, k))
    }

    fn call(&self, f: Func) -> Result<Self, SymError> {
        Ok(match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Exp => self.exp(),
            Func::Sqrt => {
                if *self < 0.0 {
                    return Err(SymError::Domain("sqrt"));
                }
                self.sqrt()
            }
        })
    }
}

fn check(v: f64) -> Result<f64, SymError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SymError::NonFinite)
    }
}

/// Evaluates `e` with symbol values supplied by `lookup`.
pub fn eval_with(e: &Expr, lookup: &dyn Fn(&Symbol) -> Option<f64>) -> Result<f64, SymError> {
    let v = match e.node() {
        Node::Num(r) => rational_to_f64(r),
        Node::Sym(s) => lookup(s).ok_or_else(|| SymError::Unbound(s.name().to_string()))?,
        Node::Add(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += eval_with(t, lookup)?;
            }
            acc
        }
        Node::Mul(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= eval_with(f, lookup)?;
            }
            acc
        }
        Node::Neg(a) => -eval_with(a, lookup)?,
        Node::Div(a, b) => {
            let num = eval_with(a, lookup)?;
            num * Scalar::recip(&eval_with(b, lookup)?)?
        }
        Node::Pow(a, k) => Scalar::powi(&eval_with(a, lookup)?, *k)?,
        Node::Call(f, a) => Scalar::call(&eval_with(a, lookup)?, *f)?,
    };
    check(v)
}

/// Evaluates `e` at a point; every symbol must be bound by the point.
pub fn eval(e: &Expr, p: &Point) -> Result<f64, SymError> {
    eval_with(e, &|s| p.lookup(s))
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Slot(usize),
    Add(usize),
    Mul(usize),
    Neg,
    Div,
    Pow(i32),
    Call(Func),
}

/// Expression compiled to a stack program over a fixed slot layout, for
/// repeated evaluation in integrators and samplers.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
}

impl Compiled {
    /// Compiles `e`; symbols are resolved to indices of `slots`.
    pub fn new(e: &Expr, slots: &[Symbol]) -> Result<Self, SymError> {
        let mut ops = Vec::new();
        emit(e, slots, &mut ops)?;
        Ok(Compiled { ops })
    }

    /// Evaluates with `args` laid out as the compile-time slots (non-empty).
    pub fn eval<S: Scalar>(&self, args: &[S]) -> Result<S, SymError> {
        let like = &args[0];
        let mut stack: Vec<S> = Vec::with_capacity(16);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(S::from_f64(*c, like)),
                Op::Slot(i) => stack.push(args[*i].clone()),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let mut acc = stack[at].clone();
                    for v in stack.drain(at..).skip(1) {
                        acc = acc + v;
                    }
                    stack.push(acc);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let mut acc = stack[at].clone();
                    for v in stack.drain(at..).skip(1) {
                        acc = acc * v;
                    }
                    stack.push(acc);
                }
                Op::Neg => {
                    let a = stack.pop().expect("stack");
                    stack.push(-a);
                }
                Op::Div => {
                    let b = stack.pop().expect("stack");
                    let a = stack.pop().expect("stack");
                    stack.push(a * b.recip()?);
                }
                Op::Pow(k) => {
                    let a = stack.pop().expect("stack");
                    stack.push(a.powi(*k)?);
                }
                Op::Call(f) => {
                    let a = stack.pop().expect("stack");
                    stack.push(a.call(*f)?);
                }
            }
        }
        let out = stack.pop().expect("program leaves one value");
        check(out.value())?;
        Ok(out)
    }
}

fn emit(e: &Expr, slots: &[Symbol], ops: &mut Vec<Op>) -> Result<(), SymError> {
    match e.node() {
        Node::Num(r) => ops.push(Op::Const(rational_to_f64(r))),
        Node::Sym(s) => {
            let i = slots
                .iter()
                .position(|t| t == s)
                .ok_or_else(|| SymError::Unbound(s.name().to_string()))?;
            ops.push(Op::Slot(i));
        }
        Node::Add(ts) => {
            for t in ts {
                emit(t, slots, ops)?;
            }
            ops.push(Op::Add(ts.len()));
        }
        Node::Mul(fs) => {
            for f in fs {
                emit(f, slots, ops)?;
            }
            ops.push(Op::Mul(fs.len()));
        }
        Node::Neg(a) => {
            emit(a, slots, ops)?;
            ops.push(Op::Neg);
        }
        Node::Div(a, b) => {
            emit(a, slots, ops)?;
            emit(b, slots, ops)?;
            ops.push(Op::Div);
        }
        Node::Pow(a, k) => {
            emit(a, slots, ops)?;
            ops.push(Op::Pow(*k));
        }
        Node::Call(f, a) => {
            emit(a, slots, ops)?;
            ops.push(Op::Call(*f));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symx::parse_free;

    fn at(s: &str, vals: &[(&str, f64)]) -> Result<f64, SymError> {
        let e = parse_free(s).unwrap();
        eval_with(&e, &|sym| vals.iter().find(|(n, _)| *n == sym.name()).map(|(_, v)| *v))
    }

    #[test]
    fn arithmetic() {
        assert_eq!(at("x1^2+x2", &[("x1", 1.0), ("x2", 3.0)]).unwrap(), 4.0);
        assert_eq!(at("(x4^2+1)^(-1)", &[("x4", 0.0)]).unwrap(), 1.0);
    }

    #[test]
    fn errors_are_surfaced() {
        assert_eq!(at("1/x3", &[("x3", 0.0)]), Err(SymError::DivisionByZero));
        assert_eq!(at("x3^(-2)", &[("x3", 0.0)]), Err(SymError::DivisionByZero));
        assert_eq!(at("sqrt(x3)", &[("x3", -1.0)]), Err(SymError::Domain("sqrt")));
        assert!(matches!(at("x1 + y", &[("x1", 1.0)]), Err(SymError::Unbound(n)) if n == "y"));
        assert_eq!(at("exp(x1)", &[("x1", 1000.0)]), Err(SymError::NonFinite));
    }

    #[test]
    fn compiled_matches_tree() {
        let e = parse_free("sin(x1)*x2/(1 + x1^2) - sqrt(x2)*exp(-x1)").unwrap();
        let slots = [Symbol::new("x1"), Symbol::new("x2")];
        let c = Compiled::new(&e, &slots).unwrap();
        for (a, b) in [(0.3, 1.2), (-1.0, 4.0), (2.5, 0.1)] {
            let tree = at(&e.to_string(), &[("x1", a), ("x2", b)]).unwrap();
            assert!((c.eval(&[a, b]).unwrap() - tree).abs() < 1e-14);
        }
    }
}
