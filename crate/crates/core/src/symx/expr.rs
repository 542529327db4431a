use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Interned symbol name. Ordering is by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// Elementary functions understood by the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(BigRational),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Call(Func, Expr),
}

/// Immutable symbolic scalar expression. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn num(r: BigRational) -> Self {
        Expr::from_node(Node::Num(r))
    }

    pub fn int(i: i64) -> Self {
        Expr::num(BigRational::from_integer(BigInt::from(i)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Expr::num(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn sym(s: &Symbol) -> Self {
        Expr::from_node(Node::Sym(s.clone()))
    }

    pub fn var(name: &str) -> Self {
        Expr::sym(&Symbol::new(name))
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Structural zero test; use `normalize` for semantic zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_one())
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut out = Vec::new();
        let mut constant = BigRational::zero();
        for t in terms {
            match t.node() {
                Node::Num(r) => constant += r,
                Node::Add(inner) => {
                    for s in inner {
                        match s.node() {
                            Node::Num(r) => constant += r,
                            _ => out.push(s.clone()),
                        }
                    }
                }
                _ => out.push(t),
            }
        }
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Add(out)),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut out = Vec::new();
        let mut constant = BigRational::one();
        for t in factors {
            match t.node() {
                Node::Num(r) => constant *= r,
                Node::Mul(inner) => {
                    for s in inner {
                        match s.node() {
                            Node::Num(r) => constant *= r,
                            _ => out.push(s.clone()),
                        }
                    }
                }
                _ => out.push(t),
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        if !constant.is_one() || out.is_empty() {
            out.insert(0, Expr::num(constant));
        }
        match out.len() {
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Mul(out)),
        }
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Num(r) => Expr::num(-r),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn div(&self, rhs: &Expr) -> Expr {
        if rhs.is_one() {
            return self.clone();
        }
        if self.is_zero() && !rhs.is_zero() {
            return Expr::zero();
        }
        match (self.node(), rhs.node()) {
            (Node::Num(a), Node::Num(b)) if !b.is_zero() => Expr::num(a / b),
            _ => Expr::from_node(Node::Div(self.clone(), rhs.clone())),
        }
    }

    pub fn powi(&self, k: i32) -> Expr {
        match k {
            0 => Expr::one(),
            1 => self.clone(),
            _ => match self.node() {
                Node::Num(r) if !r.is_zero() || k > 0 => Expr::num(pow_rational(r, k)),
                Node::Pow(base, e) => match e.checked_mul(k) {
                    Some(ek) => base.powi(ek),
                    None => Expr::from_node(Node::Pow(self.clone(), k)),
                },
                _ => Expr::from_node(Node::Pow(self.clone(), k)),
            },
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::from_node(Node::Call(f, arg))
    }

    /// All symbols occurring in the tree.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Add(v) | Node::Mul(v) => v.iter().for_each(|e| e.collect_symbols(out)),
            Node::Neg(e) | Node::Pow(e, _) | Node::Call(_, e) => e.collect_symbols(out),
            Node::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(t) => t == s,
            Node::Add(v) | Node::Mul(v) => v.iter().any(|e| e.depends_on(s)),
            Node::Neg(e) | Node::Pow(e, _) | Node::Call(_, e) => e.depends_on(s),
            Node::Div(a, b) => a.depends_on(s) || b.depends_on(s),
        }
    }

    pub fn has_calls(&self) -> bool {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => false,
            Node::Call(..) => true,
            Node::Add(v) | Node::Mul(v) => v.iter().any(Expr::has_calls),
            Node::Neg(e) | Node::Pow(e, _) => e.has_calls(),
            Node::Div(a, b) => a.has_calls() || b.has_calls(),
        }
    }

    /// Replace symbols by expressions (simultaneous substitution).
    pub fn subst(&self, map: &dyn Fn(&Symbol) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Num(_) => self.clone(),
            Node::Sym(s) => map(s).unwrap_or_else(|| self.clone()),
            Node::Add(v) => Expr::sum(v.iter().map(|e| e.subst(map))),
            Node::Mul(v) => Expr::product(v.iter().map(|e| e.subst(map))),
            Node::Neg(e) => e.subst(map).neg(),
            Node::Div(a, b) => a.subst(map).div(&b.subst(map)),
            Node::Pow(e, k) => e.subst(map).powi(*k),
            Node::Call(f, e) => Expr::call(*f, e.subst(map)),
        }
    }

    pub fn subst_pairs(&self, pairs: &[(Symbol, Expr)]) -> Expr {
        self.subst(&|s| pairs.iter().find(|(k, _)| k == s).map(|(_, v)| v.clone()))
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => 1,
            Node::Add(v) | Node::Mul(v) => 1 + v.iter().map(Expr::node_count).sum::<usize>(),
            Node::Neg(e) | Node::Pow(e, _) | Node::Call(_, e) => 1 + e.node_count(),
            Node::Div(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

pub(crate) fn pow_rational(r: &BigRational, k: i32) -> BigRational {
    if k >= 0 {
        num_traits::pow(r.clone(), k as usize)
    } else {
        num_traits::pow(r.recip(), k.unsigned_abs() as usize)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::sum([a.clone(), b.neg()]));
binop!(Mul, mul, |a, b| Expr::product([a.clone(), b.clone()]));
binop!(Div, div, |a, b| Expr::div(a, b));

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// Printing precedence levels.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Num(r) => {
            if r.is_negative() {
                PREC_NEG
            } else if r.is_integer() {
                PREC_ATOM
            } else {
                PREC_MUL
            }
        }
        Node::Sym(_) | Node::Call(..) => PREC_ATOM,
        Node::Add(_) => PREC_ADD,
        Node::Mul(v) => {
            if v.first().and_then(Expr::as_num).is_some_and(|r| r.is_negative()) {
                PREC_NEG
            } else {
                PREC_MUL
            }
        }
        Node::Div(..) => PREC_MUL,
        Node::Neg(_) => PREC_NEG,
        Node::Pow(..) => PREC_POW,
    }
}

fn write_with(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, r: &BigRational) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

/// Splits a term into (is_negative, magnitude) for pretty sums.
fn split_sign(e: &Expr) -> (bool, Expr) {
    match e.node() {
        Node::Neg(inner) => (true, inner.clone()),
        Node::Num(r) if r.is_negative() => (true, Expr::num(-r)),
        Node::Mul(v) => match v.first().and_then(Expr::as_num) {
            Some(r) if r.is_negative() => {
                let mut rest = vec![Expr::num(-r)];
                rest.extend(v[1..].iter().cloned());
                (true, Expr::product(rest))
            }
            _ => (false, e.clone()),
        },
        _ => (false, e.clone()),
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.node() {
        Node::Num(r) => write_num(f, r),
        Node::Sym(s) => write!(f, "{s}"),
        Node::Add(v) => {
            for (i, t) in v.iter().enumerate() {
                if i == 0 {
                    write_with(f, t, PREC_ADD)?;
                } else {
                    let (neg, mag) = split_sign(t);
                    write!(f, "{}", if neg { " - " } else { " + " })?;
                    write_with(f, &mag, PREC_MUL)?;
                }
            }
            Ok(())
        }
        Node::Mul(v) => {
            let mut iter = v.iter();
            if let Some(first) = iter.next() {
                match first.as_num() {
                    Some(r) if r == &-BigRational::one() && v.len() > 1 => write!(f, "-")?,
                    Some(r) if r.is_negative() => {
                        write!(f, "-")?;
                        write_with(f, &Expr::num(-r), PREC_POW)?;
                        write!(f, "*")?;
                    }
                    Some(r) if !r.is_integer() => {
                        write!(f, "(")?;
                        write_num(f, r)?;
                        write!(f, ")*")?;
                    }
                    _ => {
                        write_with(f, first, PREC_MUL)?;
                        if v.len() > 1 {
                            write!(f, "*")?;
                        }
                    }
                }
            }
            for (i, t) in iter.enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                }
                write_with(f, t, PREC_NEG + 1)?;
            }
            Ok(())
        }
        Node::Neg(inner) => {
            write!(f, "-")?;
            write_with(f, inner, PREC_NEG + 1)
        }
        Node::Div(a, b) => {
            write_with(f, a, PREC_MUL)?;
            write!(f, "/")?;
            write_with(f, b, PREC_NEG + 1)
        }
        Node::Pow(base, k) => {
            write_with(f, base, PREC_ATOM)?;
            if *k < 0 {
                write!(f, "^({k})")
            } else {
                write!(f, "^{k}")
            }
        }
        Node::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, arg)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_fold_constants() {
        let x = Expr::var("x1");
        assert_eq!(Expr::sum([Expr::int(2), Expr::int(3)]), Expr::int(5));
        assert_eq!(Expr::product([Expr::int(0), x.clone()]), Expr::zero());
        assert_eq!(Expr::product([Expr::int(1), x.clone()]), x);
        assert_eq!(x.neg().neg(), x);
    }

    #[test]
    fn display_is_readable() {
        let x = Expr::var("x1");
        let y = Expr::var("x2");
        let e = &(&x * &x) - &(Expr::int(2) * &y);
        assert_eq!(e.to_string(), "x1*x1 - 2*x2");
        assert_eq!((&x + &y).powi(2).to_string(), "(x1 + x2)^2");
        assert_eq!(x.powi(-1).to_string(), "x1^(-1)");
        assert_eq!((Expr::ratio(3, 4) * &x).to_string(), "(3/4)*x1");
    }

    #[test]
    fn symbols_and_dependence() {
        let e = Expr::call(Func::Sin, Expr::var("a")) * Expr::var("b");
        let names: Vec<_> = e.symbols().into_iter().map(|s| s.name().to_string()).collect();
        assert_eq!(names, vec!["a", "b"]);
        assert!(e.depends_on(&Symbol::new("a")));
        assert!(!e.depends_on(&Symbol::new("c")));
    }
}
