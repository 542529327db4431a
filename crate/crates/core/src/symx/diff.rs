use super::expr::{Expr, Func, Node, Symbol};

/// Exact partial derivative of `e` with respect to `v`. The result is built
/// with the folding constructors but is not normalized.
pub fn diff(e: &Expr, v: &Symbol) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(s) => {
            if s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(terms) => Expr::sum(terms.iter().map(|t| diff(t, v))),
        Node::Mul(factors) => Expr::sum((0..factors.len()).map(|i| {
            let d = diff(&factors[i], v);
            if d.is_zero() {
                return d;
            }
            Expr::product(
                factors
                    .iter()
                    .enumerate()
                    .map(|(j, f)| if i == j { d.clone() } else { f.clone() }),
            )
        })),
        Node::Neg(a) => diff(a, v).neg(),
        Node::Div(a, b) => {
            let da = diff(a, v);
            let db = diff(b, v);
            let first = da.div(b);
            if db.is_zero() {
                return first;
            }
            first - Expr::product([a.clone(), db]).div(&b.powi(2))
        }
        Node::Pow(a, k) => Expr::product([Expr::int(*k as i64), a.powi(k - 1), diff(a, v)]),
        Node::Call(f, a) => {
            let da = diff(a, v);
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, a.clone()),
                Func::Cos => Expr::call(Func::Sin, a.clone()).neg(),
                Func::Exp => e.clone(),
                Func::Sqrt => Expr::ratio(1, 2).div(e),
            };
            Expr::product([outer, da])
        }
    }
}
