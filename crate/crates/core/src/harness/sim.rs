use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::HarnessError;
use crate::symx::{diff, normalize, Compiled, Expr, Jet, Symbol};
use crate::system::SystemSpec;
use crate::triangular::{flat_output_exprs, v1_symbol, TriangularRealization};

/// v(t) given as two expressions in `t`.
#[derive(Debug, Clone)]
pub struct Signal {
    pub exprs: [Expr; 2],
    compiled: [Compiled; 2],
}

impl Signal {
    pub fn time_symbol() -> Symbol {
        Symbol::new("t")
    }

    pub fn new(v1: Expr, v2: Expr) -> Result<Self, HarnessError> {
        let slots = [Signal::time_symbol()];
        let compiled = [Compiled::new(&v1, &slots)?, Compiled::new(&v2, &slots)?];
        Ok(Signal {
            exprs: [v1, v2],
            compiled,
        })
    }

    pub fn at(&self, t: f64) -> Result<[f64; 2], HarnessError> {
        Ok([self.compiled[0].eval(&[t])?, self.compiled[1].eval(&[t])?])
    }

    /// Taylor jets of v around `t`.
    pub fn jet(&self, t: f64, order: usize) -> Result<[Jet; 2], HarnessError> {
        let s = [Jet::variable(t, order)];
        Ok([self.compiled[0].eval(&s)?, self.compiled[1].eval(&s)?])
    }
}

/// A triangular realization compiled for numeric work.
pub struct NumericRealization {
    pub n: usize,
    params: Vec<f64>,
    f: Vec<Compiled>,
    g1: Vec<Compiled>,
    g2: Vec<Compiled>,
    alpha: Vec<Compiled>,
    beta: Vec<Compiled>,
    forward: Vec<Compiled>,
    jacobian: Vec<Vec<Compiled>>,
    inverse: Option<Vec<Compiled>>,
    phi_z: Option<Vec<Compiled>>,
    /// ∂φ_i/∂z_{i+1} in z.
    slope_z: Option<Vec<Compiled>>,
    phi_x: Vec<Compiled>,
    /// ∂φ_i/∂z_{i+1} pulled back to x.
    slope_x: Vec<Compiled>,
}

fn compile_all(es: &[Expr], slots: &[Symbol]) -> Result<Vec<Compiled>, HarnessError> {
    es.iter()
        .map(|e| Compiled::new(e, slots).map_err(HarnessError::from))
        .collect()
}

fn with_params(v: &[f64], params: &[f64]) -> Vec<f64> {
    let mut a = v.to_vec();
    a.extend_from_slice(params);
    a
}

impl NumericRealization {
    pub fn new(spec: &SystemSpec, real: &TriangularRealization) -> Result<Self, HarnessError> {
        let n = spec.n();
        let xs = spec.slots();
        let mut zs = real.z_symbols().to_vec();
        zs.extend(spec.params().iter().cloned());
        let zsyms = real.z_symbols();
        let flat = flat_output_exprs(spec, real);
        let v1 = Expr::sym(&v1_symbol());
        let slope_x: Vec<Expr> = flat.regularity_x.iter().map(|r| normalize(&(r - &v1))).collect();
        let (phi_z, slope_z) = match &real.phi {
            Some(phi) => {
                let slopes: Vec<Expr> = phi
                    .iter()
                    .enumerate()
                    .map(|(i, p)| normalize(&diff(p, &zsyms[i + 1])))
                    .collect();
                (Some(compile_all(phi, &zs)?), Some(compile_all(&slopes, &zs)?))
            }
            None => (None, None),
        };
        let jac: Vec<Vec<Expr>> = real
            .chart
            .forward
            .iter()
            .map(|z| spec.states().iter().map(|s| normalize(&diff(z, s))).collect())
            .collect();
        Ok(NumericRealization {
            n,
            params: spec.param_vector(),
            f: spec.f.compile(&xs)?,
            g1: spec.g1.compile(&xs)?,
            g2: spec.g2.compile(&xs)?,
            alpha: compile_all(&real.feedback.alpha, &xs)?,
            beta: compile_all(&real.feedback.beta, &xs)?,
            forward: compile_all(&real.chart.forward, &xs)?,
            jacobian: jac.iter().map(|r| compile_all(r, &xs)).collect::<Result<_, _>>()?,
            inverse: match &real.chart.inverse {
                Some(inv) => Some(compile_all(inv, &zs)?),
                None => None,
            },
            phi_z,
            slope_z,
            phi_x: compile_all(&real.phi_x, &xs)?,
            slope_x: compile_all(&slope_x, &xs)?,
        })
    }

    pub fn has_symbolic_inverse(&self) -> bool {
        self.inverse.is_some() && self.phi_z.is_some()
    }

    fn eval_all(cs: &[Compiled], args: &[f64]) -> Result<Vec<f64>, HarnessError> {
        cs.iter().map(|c| c.eval(args).map_err(HarnessError::from)).collect()
    }

    pub fn to_z(&self, x: &[f64]) -> Result<Vec<f64>, HarnessError> {
        Self::eval_all(&self.forward, &with_params(x, &self.params))
    }

    /// Closed-form inverse when available, otherwise damped Newton from
    /// `guess` (or the origin).
    pub fn to_x(&self, z: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>, HarnessError> {
        if let Some(inv) = &self.inverse {
            return Self::eval_all(inv, &with_params(z, &self.params));
        }
        let n = self.n;
        let mut x = DVector::from_column_slice(guess.unwrap_or(&vec![0.0; n]));
        let target = DVector::from_column_slice(z);
        for _ in 0..100 {
            let r = DVector::from_vec(self.to_z(x.as_slice())?) - &target;
            let rn = r.norm();
            if rn <= 1e-13 * (1.0 + target.norm()) {
                return Ok(x.as_slice().to_vec());
            }
            let args = with_params(x.as_slice(), &self.params);
            let mut j = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    j[(a, b)] = self.jacobian[a][b].eval(&args)?;
                }
            }
            let step = j.lu().solve(&r).ok_or(HarnessError::InversionFailed)?;
            let mut lambda = 1.0;
            loop {
                let cand = &x - &step * lambda;
                if let Ok(zc) = self.to_z(cand.as_slice()) {
                    if (DVector::from_vec(zc) - &target).norm() < rn {
                        x = cand;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-8 {
                    return Err(HarnessError::InversionFailed);
                }
            }
        }
        Err(HarnessError::InversionFailed)
    }

    /// (∂z/∂x) ẋ at x.
    pub fn push_forward(&self, x: &[f64], xdot: &[f64]) -> Result<Vec<f64>, HarnessError> {
        let args = with_params(x, &self.params);
        self.jacobian
            .iter()
            .map(|row| {
                row.iter()
                    .zip(xdot)
                    .map(|(c, d)| Ok(c.eval(&args)? * d))
                    .sum::<Result<f64, HarnessError>>()
            })
            .collect()
    }

    /// u = α + β v at x.
    pub fn inputs(&self, x: &[f64], v: [f64; 2]) -> Result<[f64; 2], HarnessError> {
        let a = with_params(x, &self.params);
        let al = Self::eval_all(&self.alpha, &a)?;
        let b = Self::eval_all(&self.beta, &a)?;
        Ok([al[0] + b[0] * v[0] + b[1] * v[1], al[1] + b[2] * v[0] + b[3] * v[1]])
    }

    /// ẋ = f + g1 u1 + g2 u2 with u = α + β v.
    pub fn x_rhs(&self, x: &[f64], v: [f64; 2]) -> Result<Vec<f64>, HarnessError> {
        let a = with_params(x, &self.params);
        let u = self.inputs(x, v)?;
        let f = Self::eval_all(&self.f, &a)?;
        let g1 = Self::eval_all(&self.g1, &a)?;
        let g2 = Self::eval_all(&self.g2, &a)?;
        Ok((0..self.n).map(|i| f[i] + g1[i] * u[0] + g2[i] * u[1]).collect())
    }

    fn phi_at(&self, z: &[f64], x_guess: Option<&[f64]>) -> Result<Vec<f64>, HarnessError> {
        match &self.phi_z {
            Some(p) => Self::eval_all(p, &with_params(z, &self.params)),
            None => {
                let x = self.to_x(z, x_guess)?;
                Self::eval_all(&self.phi_x, &with_params(&x, &self.params))
            }
        }
    }

    /// Triangular dynamics ż_i = φ_i + z_{i+1} v1, ż_{n−1} = v2, ż_n = v1.
    pub fn z_rhs(&self, z: &[f64], v: [f64; 2], x_guess: Option<&[f64]>) -> Result<Vec<f64>, HarnessError> {
        let n = self.n;
        let phi = self.phi_at(z, x_guess)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n - 2 {
            out.push(phi[i] + z[i + 1] * v[0]);
        }
        out.push(v[1]);
        out.push(v[0]);
        Ok(out)
    }

    /// r_i = v1 + ∂φ_i/∂z_{i+1} at x.
    pub fn regularity(&self, x: &[f64], v1: f64) -> Result<Vec<f64>, HarnessError> {
        let s = Self::eval_all(&self.slope_x, &with_params(x, &self.params))?;
        Ok(s.into_iter().map(|d| v1 + d).collect())
    }

    fn require_z(&self) -> Result<(&[Compiled], &[Compiled]), HarnessError> {
        match (&self.phi_z, &self.slope_z) {
            (Some(p), Some(s)) => Ok((p, s)),
            _ => Err(HarnessError::NoInverse),
        }
    }

    /// Taylor jets of z(t + s) along the triangular dynamics, by Picard
    /// iteration from z at time `t`.
    pub fn z_jets(&self, z: &[f64], t: f64, signal: &Signal, order: usize) -> Result<Vec<Jet>, HarnessError> {
        let (phi, _) = self.require_z()?;
        let n = self.n;
        let v = signal.jet(t, order)?;
        let mut jets: Vec<Jet> = z.iter().map(|c| Jet::constant(*c, 0)).collect();
        for k in 0..order {
            let mut args = jets.clone();
            args.extend(self.params.iter().map(|p| Jet::constant(*p, k)));
            let mut rhs = Vec::with_capacity(n);
            for i in 0..n - 2 {
                let p = phi[i].eval(&args)?;
                rhs.push(p + jets[i + 1].clone() * v[0].truncate(k));
            }
            rhs.push(v[1].truncate(k));
            rhs.push(v[0].truncate(k));
            jets = rhs.iter().zip(z).map(|(r, c)| r.integrate(*c)).collect();
        }
        Ok(jets)
    }

    pub(super) fn phi_jet(&self, i: usize, z: &[Jet]) -> Result<(Jet, Jet), HarnessError> {
        let (phi, slope) = self.require_z()?;
        let order = z[0].order();
        let mut args = z.to_vec();
        args.extend(self.params.iter().map(|p| Jet::constant(*p, order)));
        Ok((phi[i].eval(&args)?, slope[i].eval(&args)?))
    }
}

/// State, input and flat-output samples on a uniform time grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
    /// min over the grid of |r_i|, per i.
    pub min_regularity: Vec<f64>,
    /// max over the grid of |z − φ(x)| between the two integrations.
    pub consistency: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let n = self.z.first().map_or(0, Vec::len);
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("z{i}")));
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(["v1", "v2", "u1", "u2"].map(String::from));
        out.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.t[k]];
            row.extend(&self.z[k]);
            row.extend(&self.x[k]);
            row.extend(self.v[k]);
            row.extend(self.u[k]);
            out.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One classical RK4 step with compensated accumulation.
pub(super) fn rk4_step(
    y: &mut [f64],
    comp: &mut [f64],
    t: f64,
    dt: f64,
    rhs: &mut dyn FnMut(f64, &[f64]) -> Result<Vec<f64>, HarnessError>,
) -> Result<(), HarnessError> {
    let n = y.len();
    let shift = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> { (0..n).map(|i| base[i] + h * k[i]).collect() };
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + dt / 2.0, &shift(y, &k1, dt / 2.0))?;
    let k3 = rhs(t + dt / 2.0, &shift(y, &k2, dt / 2.0))?;
    let k4 = rhs(t + dt, &shift(y, &k3, dt))?;
    for i in 0..n {
        let inc = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - comp[i];
        let s = y[i] + inc;
        comp[i] = (s - y[i]) - inc;
        y[i] = s;
    }
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(HarnessError::NonFinite { t: t + dt })
    }
}

/// Fixed-step RK4 of the original dynamics ẋ = f + g(α + βv) from `x0`,
/// sampled every `stride` steps.
pub fn integrate_x(
    nr: &NumericRealization,
    x0: &[f64],
    signal: &Signal,
    horizon: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<(f64, Vec<f64>)>, HarnessError> {
    let steps = (horizon / dt).round() as usize;
    let mut x = x0.to_vec();
    let mut comp = vec![0.0; x.len()];
    let mut out = vec![(0.0, x.clone())];
    let mut rhs = |t: f64, y: &[f64]| nr.x_rhs(y, signal.at(t)?);
    for k in 0..steps {
        let t = k as f64 * dt;
        rk4_step(&mut x, &mut comp, t, dt, &mut rhs)?;
        if (k + 1) % stride == 0 {
            out.push(((k + 1) as f64 * dt, x.clone()));
        }
    }
    Ok(out)
}

/// Integrates the triangular dynamics in z and the original dynamics in x
/// from the matched initial state, checking regularity along the way.
pub fn simulate(
    nr: &NumericRealization,
    z0: &[f64],
    signal: &Signal,
    horizon: f64,
    dt: f64,
    threshold: f64,
) -> Result<Trajectory, HarnessError> {
    let n = nr.n;
    if z0.len() != n {
        return Err(HarnessError::Dimension {
            expected: n,
            got: z0.len(),
        });
    }
    let steps = (horizon / dt).round() as usize;
    let mut z = z0.to_vec();
    let mut x = nr.to_x(z0, None)?;
    let (mut cz, mut cx) = (vec![0.0; n], vec![0.0; n]);
    let mut traj = Trajectory {
        min_regularity: vec![f64::INFINITY; n - 2],
        ..Trajectory::default()
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        let v = signal.at(t)?;
        let r = nr.regularity(&x, v[0])?;
        for (i, ri) in r.iter().enumerate() {
            if ri.abs() < threshold {
                return Err(HarnessError::Regularity {
                    t,
                    index: i + 1,
                    value: *ri,
                });
            }
            traj.min_regularity[i] = traj.min_regularity[i].min(ri.abs());
        }
        let zx = nr.to_z(&x)?;
        let gap = zx.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        traj.consistency = traj.consistency.max(gap);
        traj.t.push(t);
        traj.z.push(z.clone());
        traj.x.push(x.clone());
        traj.v.push(v);
        traj.u.push(nr.inputs(&x, v)?);
        if k == steps {
            break;
        }
        let xg = x.clone();
        rk4_step(&mut z, &mut cz, t, dt, &mut |t, y| nr.z_rhs(y, signal.at(t)?, Some(&xg)))?;
        rk4_step(&mut x, &mut cx, t, dt, &mut |t, y| nr.x_rhs(y, signal.at(t)?))?;
    }
    Ok(traj)
}
