use std::path::PathBuf;

use flatcheck::cli::{load_spec, run_construction, Command, RunConfig};
use flatcheck::harness::{flat_samples, integrate_x, reconstruct, simulate, HarnessError, NumericRealization, Signal};
use flatcheck::symx::parse_free;

fn realize(name: &str) -> (flatcheck::system::SystemSpec, NumericRealization) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    let spec = load_spec(&path, 0).unwrap();
    let (real, _) = run_construction(&spec, &RunConfig::new(Command::Simulate, &path)).unwrap();
    let nr = NumericRealization::new(&spec, &real).unwrap();
    (spec, nr)
}

#[test]
fn chained_trajectory_matches_closed_form() {
    let (_, nr) = realize("chained4.spec");
    let signal = Signal::new(parse_free("1").unwrap(), parse_free("sin(t)").unwrap()).unwrap();
    let traj = simulate(&nr, &[0.0; 4], &signal, 2.0, 1e-3, 1e-3).unwrap();
    for (t, z) in traj.t.iter().zip(&traj.z) {
        let want = [t * t / 2.0 + t.cos() - 1.0, t - t.sin(), 1.0 - t.cos(), *t];
        for (a, b) in z.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "t = {t}: {z:?} vs {want:?}");
        }
    }
    assert!(traj.consistency < 1e-12);
}

#[test]
fn regularity_loss_aborts_with_time_and_index() {
    let (_, nr) = realize("chained4.spec");
    let signal = Signal::new(parse_free("cos(t)").unwrap(), parse_free("0").unwrap()).unwrap();
    match simulate(&nr, &[0.0; 4], &signal, 2.0, 1e-3, 1e-3) {
        Err(HarnessError::Regularity { t, index, .. }) => {
            assert!((t - std::f64::consts::FRAC_PI_2).abs() < 2e-3, "t = {t}");
            assert_eq!(index, 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn reconstruction_recovers_states_and_inputs() {
    let (_, nr) = realize("fourstate.spec");
    let signal = Signal::new(parse_free("1 + 0.3*sin(5*t)").unwrap(), parse_free("cos(7*t)").unwrap()).unwrap();
    let x0 = nr.to_x(&[0.1, 0.1, 0.0, 0.1], None).unwrap();
    let xs = integrate_x(&nr, &x0, &signal, 1.0, 1e-4, 1000).unwrap();
    let samples = flat_samples(&nr, &xs, &signal).unwrap();
    let rec = reconstruct(&nr, &samples, 1e-3).unwrap();
    for (k, (t, x)) in xs.iter().enumerate() {
        let v = signal.at(*t).unwrap();
        let u = nr.inputs(x, v).unwrap();
        for (a, b) in rec.x[k].iter().zip(x).chain(rec.u[k].iter().zip(&u)) {
            assert!((a - b).abs() < 1e-9, "t = {t}");
        }
        assert!((rec.v[k][0] - v[0]).abs() < 1e-9 && (rec.v[k][1] - v[1]).abs() < 1e-9);
    }
    assert!(rec.min_regularity.iter().all(|r| *r >= 0.69));
}
