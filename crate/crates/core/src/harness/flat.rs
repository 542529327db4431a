use serde::Serialize;

use super::sim::{integrate_x, NumericRealization, Signal, Trajectory};
use super::HarnessError;
use crate::symx::{Jet, Scalar};

/// Flat output y = (z1, zn) at one instant, with derivatives as jets.
#[derive(Debug, Clone)]
pub struct FlatSample {
    pub t: f64,
    pub y1: Jet,
    pub y2: Jet,
}

/// Flat-output samples along an x-trajectory; derivatives of y come from
/// the triangular dynamics at each sampled state.
pub fn flat_samples(
    nr: &NumericRealization,
    xs: &[(f64, Vec<f64>)],
    signal: &Signal,
) -> Result<Vec<FlatSample>, HarnessError> {
    let n = nr.n;
    xs.iter()
        .map(|(t, x)| {
            let z = nr.to_z(x)?;
            let jets = nr.z_jets(&z, *t, signal, n - 1)?;
            Ok(FlatSample {
                t: *t,
                y1: jets[0].clone(),
                y2: jets[n - 1].clone(),
            })
        })
        .collect()
}

/// Safeguarded Newton for g(w) = 0 with bisection fallback.
fn solve_scalar(
    g: &dyn Fn(f64) -> Result<(f64, f64), HarnessError>,
    guess: f64,
    t: f64,
    level: usize,
) -> Result<f64, HarnessError> {
    let mut w = guess;
    for _ in 0..50 {
        let Ok((val, d)) = g(w) else { break };
        if val == 0.0 {
            return Ok(w);
        }
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = val / d;
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    // bracket outward from the guess
    let sign = |w: f64| g(w).ok().map(|(v, _)| v.signum());
    let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
    let mut found = false;
    for _ in 0..60 {
        if let (Some(a), Some(b)) = (sign(lo), sign(hi)) {
            if a * b <= 0.0 {
                found = true;
                break;
            }
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
    }
    if !found {
        return Err(HarnessError::RootFailure { t, level, lo, hi });
    }
    let slo = sign(lo).unwrap_or(0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match sign(mid) {
            Some(s) if s == slo => lo = mid,
            Some(_) => hi = mid,
            None => return Err(HarnessError::RootFailure { t, level, lo, hi }),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Recovers z, v, x and u from y = (z1, zn): z1 = y1, zn = y2, v1 = ẏ2, then
/// z_{i+1} from ż_i = φ_i + z_{i+1} v1 for i = 1…n−2, and v2 = ż_{n−1}.
pub fn reconstruct(nr: &NumericRealization, samples: &[FlatSample], threshold: f64) -> Result<Trajectory, HarnessError> {
    let n = nr.n;
    let mut traj = Trajectory {
        min_regularity: vec![f64::INFINITY; n - 2],
        ..Trajectory::default()
    };
    let mut prev_z: Option<Vec<f64>> = None;
    let mut prev_x: Option<Vec<f64>> = None;
    for s in samples {
        let order = s.y1.order().min(s.y2.order());
        if order < n - 1 {
            return Err(HarnessError::Dimension {
                expected: n - 1,
                got: order,
            });
        }
        let mut z: Vec<Jet> = vec![Jet::constant(0.0, order); n];
        z[0] = s.y1.truncate(order);
        z[n - 1] = s.y2.truncate(order);
        let v1 = s.y2.differentiate();
        for i in 0..n - 2 {
            let o = z[i].order() - 1;
            let zdot = z[i].differentiate();
            let v1o = v1.truncate(o);
            let mut args: Vec<Jet> = z.iter().map(|j| j.truncate(o)).collect();
            let at = |w: &Jet, args: &mut Vec<Jet>| -> Result<(Jet, Jet), HarnessError> {
                args[i + 1] = w.clone();
                let (p, d) = nr.phi_jet(i, args)?;
                Ok((p + w.clone() * v1o.clone() - zdot.clone(), d + v1o.clone()))
            };
            let scalar = |w: f64| -> Result<(f64, f64), HarnessError> {
                let mut a: Vec<Jet> = args.iter().map(|j| j.truncate(0)).collect();
                let (f, d) = at(&Jet::constant(w, 0), &mut a)?;
                Ok((f.0[0], d.0[0]))
            };
            let guess = prev_z.as_ref().map_or(0.0, |p| p[i + 1]);
            let w0 = solve_scalar(&scalar, guess, s.t, i + 1)?;
            let mut w = Jet::constant(w0, o);
            for _ in 0..=o {
                let (f, d) = at(&w, &mut args)?;
                if d.0[0].abs() < threshold {
                    return Err(HarnessError::Regularity {
                        t: s.t,
                        index: i + 1,
                        value: d.0[0],
                    });
                }
                w = w - f * d.recip()?;
            }
            let (_, d) = at(&w, &mut args)?;
            traj.min_regularity[i] = traj.min_regularity[i].min(d.value().abs());
            z[i + 1] = w;
        }
        let v = [v1.0[0], z[n - 2].differentiate().0[0]];
        let zv: Vec<f64> = z.iter().map(|j| j.0[0]).collect();
        let x = nr.to_x(&zv, prev_x.as_deref())?;
        traj.t.push(s.t);
        traj.u.push(nr.inputs(&x, v)?);
        traj.v.push(v);
        traj.z.push(zv.clone());
        traj.x.push(x.clone());
        prev_z = Some(zv);
        prev_x = Some(x);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrip {
    pub dt: f64,
    /// max over samples of |(x, u)_reconstructed − (x, u)_reference|,
    /// relative to max(1, |reference|).
    pub max_rel_error: f64,
    pub samples: usize,
    pub min_regularity: Vec<f64>,
}

/// Simulates the original dynamics at step `dt`, reads off y along the
/// result, reconstructs states and inputs from y alone and compares them
/// with `reference` (x at the times the reference lists, which must be
/// multiples of `dt`).
pub fn round_trip(
    nr: &NumericRealization,
    x0: &[f64],
    signal: &Signal,
    dt: f64,
    reference: &[(f64, Vec<f64>)],
    threshold: f64,
) -> Result<RoundTrip, HarnessError> {
    let spacing = reference.get(1).map_or(dt, |r| r.0 - reference[0].0);
    let stride = ((spacing / dt).round() as usize).max(1);
    let horizon = reference.last().map_or(0.0, |r| r.0);
    let xs = integrate_x(nr, x0, signal, horizon, dt, stride)?;
    let samples = flat_samples(nr, &xs, signal)?;
    let rec = reconstruct(nr, &samples, threshold)?;
    let mut err: f64 = 0.0;
    for (k, (t, xr)) in reference.iter().enumerate() {
        let v = signal.at(*t)?;
        let ur = nr.inputs(xr, v)?;
        let scale = xr.iter().chain(&ur).fold(1.0_f64, |m, a| m.max(a.abs()));
        let gap = rec.x[k]
            .iter()
            .zip(xr)
            .chain(rec.u[k].iter().zip(&ur))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        err = err.max(gap / scale);
    }
    Ok(RoundTrip {
        dt,
        max_rel_error: err,
        samples: reference.len(),
        min_regularity: rec.min_regularity,
    })
}
