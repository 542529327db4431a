//! Symbolic scalar expressions: parsing, differentiation, normalization,
//! evaluation and probabilistic equivalence.

mod diff;
mod equiv;
mod eval;
mod expr;
mod jet;
pub(crate) mod linear;
mod parse;
pub(crate) mod poly;

use std::collections::BTreeMap;

use thiserror::Error;

pub use diff::diff;
pub use equiv::{equiv, equiv_with, EquivConfig};
pub use eval::{eval, eval_with, Compiled, Scalar};
pub use expr::{Expr, Func, Node, Symbol};
pub use jet::Jet;
pub use parse::{parse, parse_free};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared identifier `{name}` at offset {offset}")]
    Undeclared { name: String, offset: usize },
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error in {0}")]
    Domain(&'static str),
    #[error("non-finite value")]
    NonFinite,
    #[error("no sampled point was inside the domain of both expressions")]
    Unsampleable,
}

/// Declared state and parameter names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    pub states: Vec<Symbol>,
    pub params: Vec<Symbol>,
}

impl SymbolTable {
    pub fn new(states: &[&str], params: &[&str]) -> Self {
        SymbolTable {
            states: states.iter().map(|s| Symbol::new(s)).collect(),
            params: params.iter().map(|s| Symbol::new(s)).collect(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.states.iter().chain(&self.params).any(|s| s.name() == name)
    }

    pub fn state_index(&self, s: &Symbol) -> Option<usize> {
        self.states.iter().position(|t| t == s)
    }

    pub fn is_param(&self, s: &Symbol) -> bool {
        self.params.contains(s)
    }
}

/// A point in a named chart together with parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub chart: String,
    pub symbols: Vec<Symbol>,
    pub values: Vec<f64>,
    pub params: BTreeMap<Symbol, f64>,
}

impl Point {
    pub fn new(chart: &str, symbols: &[Symbol], values: Vec<f64>, params: BTreeMap<Symbol, f64>) -> Self {
        assert_eq!(symbols.len(), values.len(), "point length must match chart dimension");
        Point {
            chart: chart.to_string(),
            symbols: symbols.to_vec(),
            values,
            params,
        }
    }

    pub fn lookup(&self, s: &Symbol) -> Option<f64> {
        self.symbols
            .iter()
            .position(|t| t == s)
            .map(|i| self.values[i])
            .or_else(|| self.params.get(s).copied())
    }
}

/// Canonical form: a single expanded numerator over a product of primitive
/// factors, with transcendental calls as opaque atoms. Expressions containing
/// a symbolic division by zero are returned unchanged.
pub fn normalize(e: &Expr) -> Expr {
    match poly::to_ratfn(e) {
        Ok(r) => r.to_expr(),
        Err(_) => e.clone(),
    }
}

/// True when `e` normalizes to zero.
pub fn is_zero(e: &Expr) -> bool {
    matches!(poly::to_ratfn(e), Ok(r) if r.is_zero())
}

/// True when `a - b` normalizes to zero.
pub fn same(a: &Expr, b: &Expr) -> bool {
    is_zero(&(a - b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn normalize_decides_polynomial_identities() {
        assert!(normalize(&p("(x1+1)^2 - x1^2 - 2*x1 - 1")).is_zero());
        assert_eq!(normalize(&p("(x1^2-1)/(x1-1)")), normalize(&p("x1+1")));
    }

    #[test]
    fn trig_identity_is_not_simplified() {
        let e = normalize(&p("sin(x1)^2 + cos(x1)^2"));
        assert!(!e.is_one());
        assert!(e.has_calls());
    }

    #[test]
    fn normalize_is_idempotent_on_rational_functions() {
        for s in [
            "(x4^2+1)^(-1)*(x3-2*x1)*(x4^2+1)",
            "M*R/L*x1 - n_p*M/(J*L)*x2*x3",
            "1/(x^2-1) + 1/(x-1) - 3/(x+1)^2",
            "x/(2*y) + sin(x/2 + x/2)",
        ] {
            let once = normalize(&p(s));
            assert_eq!(normalize(&once), once, "{s}");
        }
    }

    #[test]
    fn point_lookup() {
        let syms = [Symbol::new("x1"), Symbol::new("x2")];
        let mut params = BTreeMap::new();
        params.insert(Symbol::new("J"), 0.5);
        let q = Point::new("x", &syms, vec![1.0, 3.0], params);
        assert_eq!(eval(&p("x1^2 + x2 + J"), &q).unwrap(), 4.5);
    }
}
