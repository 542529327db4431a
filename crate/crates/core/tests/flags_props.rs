use std::collections::BTreeMap;

use flatcheck::cauchy::{annihilator, cauchy_space};
use flatcheck::diffgeo::pairing;
use flatcheck::flags::{compute_flags, compute_flags_of, feedback_flags, reference_points};
use flatcheck::harness::SampleBox;
use flatcheck::symx::{is_zero, normalize, parse_free, Expr, SymbolTable};
use flatcheck::system::SystemSpec;
use proptest::prelude::*;

fn system(f: &[&str], g1: &[&str], g2: &[&str]) -> SystemSpec {
    let p = |v: &[&str]| v.iter().map(|s| parse_free(s).unwrap()).collect::<Vec<_>>();
    SystemSpec::new(SymbolTable::new(&["x1", "x2", "x3", "x4"], &[]), BTreeMap::new(), p(f), p(g1), p(g2), 0).unwrap()
}

fn four_state() -> SystemSpec {
    system(
        &["0", "x1^2 + x2", "1", "x1*x4"],
        &["x4^2+1", "(x3-2*x1)*(x4^2+1)", "0", "(x1^2+x2)*(x4^2+1)"],
        &["0", "0", "1", "0"],
    )
}

fn chained5() -> SystemSpec {
    let p = |v: &[&str]| v.iter().map(|s| parse_free(s).unwrap()).collect::<Vec<_>>();
    SystemSpec::new(
        SymbolTable::new(&["x1", "x2", "x3", "x4", "x5"], &[]),
        BTreeMap::new(),
        p(&["0", "0", "0", "0", "0"]),
        p(&["x2", "x3", "x4", "0", "1"]),
        p(&["0", "0", "0", "1", "0"]),
        0,
    )
    .unwrap()
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

/// Components: a random quadratic in x1..x4 with small integer coefficients.
fn quad() -> impl Strategy<Value = String> {
    prop::collection::vec(-2i64..3, 5)
        .prop_map(|c| format!("{} + {}*x1 + {}*x2*x3 + {}*x4^2 + {}*x1*x4", c[0], c[1], c[2], c[3], c[4]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lie_flag_inside_derived_flag(
        g1 in prop::collection::vec(quad(), 4),
        g2 in prop::collection::vec(quad(), 4),
        q in point(4),
    ) {
        let g1: Vec<&str> = g1.iter().map(String::as_str).collect();
        let g2: Vec<&str> = g2.iter().map(String::as_str).collect();
        let spec = system(&["0"; 4], &g1, &g2);
        let Ok(table) = compute_flags_of(&spec, &spec.g1, &spec.g2, &reference_points(&spec), 1e-9) else {
            return Ok(());
        };
        let (df, dg) = table.dims_at(&q, 1e-9).unwrap();
        for k in 0..df.len() {
            prop_assert!(df[k] <= dg[k]);
            prop_assert_eq!(table.joint_rank_at(k, &q, 1e-9).unwrap(), dg[k]);
        }
    }

    #[test]
    fn flag_dimensions_are_feedback_invariant(
        b in [-3i64..4, -3i64..4, -3i64..4, -3i64..4],
        q in point(4),
    ) {
        prop_assume!(b[0] * b[3] - b[1] * b[2] != 0);
        let spec = four_state();
        let plain = compute_flags(&spec).unwrap();
        // a state-dependent scaling of the first row on top of the constant matrix
        let s = parse_free("1/(x4^2+1)").unwrap();
        let beta = [
            normalize(&(Expr::int(b[0]) * s.clone())),
            normalize(&(Expr::int(b[1]) * s)),
            Expr::int(b[2]),
            Expr::int(b[3]),
        ];
        let fed = feedback_flags(&spec, &beta).unwrap();
        prop_assert_eq!(plain.dims_at(&q, 1e-9).unwrap(), fed.dims_at(&q, 1e-9).unwrap());
    }

    #[test]
    fn retracting_space_contains_annihilator(q in point(5)) {
        for spec in [four_state(), chained5()] {
            let n = spec.n();
            let table = compute_flags(&spec).unwrap();
            let refs = SampleBox::cube(n, 1.0, 3, 0).all_points();
            for k in 1..=n - 3 {
                let lambda = annihilator(&spec, &table, k, &refs).unwrap();
                let cs = cauchy_space(&spec, &lambda, &q[..n], 1e-9).unwrap();
                let p = spec.point(q[..n].to_vec());
                for w in &lambda.forms {
                    prop_assert!(cs.residual(&w.eval(&p).unwrap()) <= 1e-10);
                }
                prop_assert_eq!(cs.dim_a() + cs.dim_c(), n);
            }
        }
    }
}

#[test]
fn annihilator_kills_derived_flag() {
    for spec in [four_state(), chained5()] {
        let n = spec.n();
        let table = compute_flags(&spec).unwrap();
        let refs = SampleBox::cube(n, 1.0, 3, 0).all_points();
        for k in 1..=n - 3 {
            let lambda = annihilator(&spec, &table, k, &refs).unwrap();
            assert_eq!(lambda.forms.len(), n - 2 - k);
            for w in &lambda.forms {
                for g in &table.derived[k] {
                    assert!(is_zero(&pairing(w, &g.field).unwrap()), "k = {k}, {}", g.word);
                }
            }
        }
    }
}
