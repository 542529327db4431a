use flatcheck::symx::{diff, equiv, eval_with, normalize, parse_free, same, Expr, Func, Symbol};
use proptest::prelude::*;

const VARS: [&str; 3] = ["a", "b", "c"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0..3usize).prop_map(|i| Expr::var(VARS[i])),
        (-4i64..5).prop_map(Expr::int),
        (1i64..4, 2i64..5).prop_map(|(n, d)| Expr::ratio(n, d)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| x + y),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| x - y),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| x * y),
            (inner.clone(), 0i32..4).prop_map(|(x, k)| x.powi(k)),
            // denominators kept away from zero
            (inner.clone(), inner.clone()).prop_map(|(x, y)| x.div(&(Expr::one() + &y * &y))),
            inner.clone().prop_map(|x| Expr::call(Func::Sin, x)),
            inner.prop_map(|x| Expr::call(Func::Cos, x)),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0]
}

fn at(e: &Expr, p: [f64; 3]) -> f64 {
    eval_with(e, &|s: &Symbol| VARS.iter().position(|v| *v == s.name()).map(|i| p[i])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivative_matches_central_difference(e in expr(), p in point(), i in 0..3usize) {
        let d = diff(&e, &Symbol::new(VARS[i]));
        let h = 1e-5;
        let (mut lo, mut hi) = (p, p);
        lo[i] -= h;
        hi[i] += h;
        let fd = (at(&e, hi) - at(&e, lo)) / (2.0 * h);
        let exact = at(&d, p);
        prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{e}: {exact} vs {fd}");
    }

    #[test]
    fn normalize_is_idempotent(e in expr()) {
        let n = normalize(&e);
        prop_assert_eq!(normalize(&n), n);
    }

    #[test]
    fn normalize_preserves_values(e in expr(), p in point()) {
        let (a, b) = (at(&e, p), at(&normalize(&e), p));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{e}: {a} vs {b}");
    }

    #[test]
    fn equiv_is_reflexive_and_symmetric(x in expr(), y in expr()) {
        prop_assert!(equiv(&x, &x, 20, 1, 1e-9).unwrap());
        let xy = equiv(&x, &y, 20, 2, 1e-9).unwrap();
        let yx = equiv(&y, &x, 20, 2, 1e-9).unwrap();
        prop_assert_eq!(xy, yx);
    }

    #[test]
    fn display_round_trips(e in expr()) {
        let back = parse_free(&e.to_string()).unwrap();
        prop_assert!(same(&back, &e), "{e} -> {back}");
    }
}

#[test]
fn product_rule_is_exact() {
    let f = parse_free("sin(a)*(a^2 + b)/(1 + c^2)").unwrap();
    let d = diff(&f, &Symbol::new("a"));
    let want = parse_free("cos(a)*(a^2+b)/(1+c^2) + 2*a*sin(a)/(1+c^2)").unwrap();
    assert!(same(&d, &want), "{d}");
}
