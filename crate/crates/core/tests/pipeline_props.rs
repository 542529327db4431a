use std::collections::BTreeMap;

use flatcheck::chained::{find_output_pair, verify_chained};
use flatcheck::cli::{run_construction, Command, RunConfig};
use flatcheck::harness::{integrate_x, round_trip, HarnessError, NumericRealization, SampleBox, Signal};
use flatcheck::symx::{parse_free, same, Expr, SymbolTable};
use flatcheck::system::SystemSpec;
use proptest::prelude::*;

fn chained(n: usize, drift: Vec<Expr>) -> SystemSpec {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut g1: Vec<Expr> = names[1..n - 1].iter().map(|s| Expr::var(s)).collect();
    g1.push(Expr::zero());
    g1.push(Expr::one());
    let mut g2 = vec![Expr::zero(); n];
    g2[n - 2] = Expr::one();
    SystemSpec::new(SymbolTable::new(&refs, &[]), BTreeMap::new(), drift, g1, g2, 0).unwrap()
}

/// Small-coefficient quadratic drift in triangular position for n = 4:
/// φ1(x1, x2, x4), φ2(x1, x2, x3, x4).
fn drift() -> impl Strategy<Value = (String, String)> {
    (prop::collection::vec(-2i64..3, 4), prop::collection::vec(-2i64..3, 4)).prop_map(|(a, b)| {
        (
            format!("({}*x1*x4 + {}*x2^2 + {}*x1 + {}*x4^2)/10", a[0], a[1], a[2], a[3]),
            format!("({}*x2 + {}*x3^2 + {}*x1*x3 + {}*x4)/10", b[0], b[1], b[2], b[3]),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn triangular_drift_survives_the_round_trip((p1, p2) in drift()) {
        let phi = [parse_free(&p1).unwrap(), parse_free(&p2).unwrap()];
        let mut spec = chained(4, vec![phi[0].clone(), phi[1].clone(), Expr::zero(), Expr::zero()]);
        spec.h1 = Some(Expr::var("x4"));
        spec.h2 = Some(Expr::var("x1"));
        let cfg = RunConfig::new(Command::Verify, "inline");
        let (real, _) = run_construction(&spec, &cfg).unwrap();
        let got = real.phi.as_ref().unwrap();
        for (g, want) in got.iter().zip(&phi) {
            let want = want.subst(&|s| Some(Expr::var(&s.name().replace('x', "z"))));
            prop_assert!(same(g, &want), "{g} vs {want}");
        }

        let nr = NumericRealization::new(&spec, &real).unwrap();
        let signal = Signal::new(Expr::one(), parse_free("sin(t)").unwrap()).unwrap();
        let x0 = [0.1, -0.1, 0.0, 0.0];
        let reference = integrate_x(&nr, &x0, &signal, 0.5, 1e-4, 500).unwrap();
        match round_trip(&nr, &x0, &signal, 1e-3, &reference, 1e-3) {
            Ok(rt) => prop_assert!(rt.max_rel_error <= 1e-6, "{rt:?}"),
            // the drawn drift may legitimately lose regularity
            Err(HarnessError::Regularity { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn driftless_chained_benchmark_closes_the_loop() {
    for n in 4..=6 {
        let spec = chained(n, vec![Expr::zero(); n]);
        let refs = SampleBox::cube(n, 1.0, 5, 0).all_points();
        let (pair, chart, fb) = find_output_pair(&spec, 2, &refs).unwrap();
        assert!(same(&pair.h1, &Expr::var(&format!("x{n}"))), "{}", pair.h1);
        assert!(verify_chained(&chart, &fb, &spec, &refs).pass);
        assert!(fb.beta[0].is_one() && fb.beta[1].is_zero() && fb.beta[2].is_zero() && fb.beta[3].is_one());
        assert!(chart.jacobian_dets.iter().all(|d| d.abs() > 1e-9));
    }
}
