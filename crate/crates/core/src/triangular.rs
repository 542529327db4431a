//! Drift-cancelling feedback, extraction of the triangular form
//!
//! ż_i = φ_i + z_{i+1} v1 (i ≤ n−2),  ż_{n−1} = v2,  ż_n = v1,
//!
//! and the flat output y = (z1, zn) with its regularity conditions.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::chained::{Chart, FeedbackMatrix};
use crate::diffgeo::{lie_derivative_fn, GeoError, VectorField};
use crate::symx::linear::rref;
use crate::symx::poly::to_ratfn;
use crate::symx::{diff, normalize, Compiled, Expr, SymError, Symbol};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriangularError {
    #[error("∂φ_{i}/∂z_{j} does not vanish (witness x = {witness:?}, value {value:e})")]
    Structure {
        i: usize,
        j: usize,
        witness: Vec<f64>,
        value: f64,
    },
    #[error("closed-loop drift component {0} is not cancelled")]
    DriftNotCancelled(usize),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Eval(#[from] SymError),
}

/// ᾱ = −(⟨dz_n, f⟩, ⟨dz_{n−1}, f⟩), α = β ᾱ.
pub fn drift_feedback(spec: &SystemSpec, chart: &Chart, fb: &FeedbackMatrix) -> (FeedbackMatrix, [Expr; 2]) {
    let n = spec.n();
    let abar = [
        normalize(&lie_derivative_fn(&spec.f, &chart.forward[n - 1]).neg()),
        normalize(&lie_derivative_fn(&spec.f, &chart.forward[n - 2]).neg()),
    ];
    let b = &fb.beta;
    let alpha = [
        normalize(&(&b[0] * &abar[0] + &b[1] * &abar[1])),
        normalize(&(&b[2] * &abar[0] + &b[3] * &abar[1])),
    ];
    (
        FeedbackMatrix {
            beta: fb.beta.clone(),
            alpha,
        },
        abar,
    )
}

#[derive(Debug, Clone)]
pub struct TriangularRealization {
    pub chart: Chart,
    pub feedback: FeedbackMatrix,
    pub alpha_bar: [Expr; 2],
    /// f̂ = f + α1 g1 + α2 g2 in x.
    pub closed_loop_drift: VectorField,
    /// φ_i as functions of x.
    pub phi_x: Vec<Expr>,
    /// φ_i in z, when the chart has a closed-form inverse.
    pub phi: Option<Vec<Expr>>,
    /// "symbolic" or "numeric".
    pub structure_method: String,
    /// The x coordinates the chart is written in.
    pub chart_states: Vec<Symbol>,
}

impl TriangularRealization {
    pub fn n(&self) -> usize {
        self.chart.forward.len()
    }

    pub fn z_symbols(&self) -> &[Symbol] {
        &self.chart.z_coords.symbols
    }
}

/// Pushes the closed-loop drift through the chart and checks the triangular
/// dependence of φ. Without a closed-form inverse the check runs at `refs`
/// using ∂φ/∂z = ∂φ/∂x · (∂z/∂x)⁻¹.
pub fn extract_triangular(
    spec: &SystemSpec,
    chart: &Chart,
    fb: &FeedbackMatrix,
    alpha_bar: &[Expr; 2],
    refs: &[Vec<f64>],
) -> Result<TriangularRealization, TriangularError> {
    let n = spec.n();
    let fhat = spec
        .f
        .add(&spec.g1.scale(&fb.alpha[0]))?
        .add(&spec.g2.scale(&fb.alpha[1]))?;
    for i in [n - 2, n - 1] {
        if !lie_derivative_fn(&fhat, &chart.forward[i]).is_zero() {
            return Err(TriangularError::DriftNotCancelled(i + 1));
        }
    }
    let phi_x: Vec<Expr> = (0..n - 2)
        .map(|i| lie_derivative_fn(&fhat, &chart.forward[i]))
        .collect();
    let zs = &chart.z_coords.symbols;
    let (phi, method) = match &chart.inverse {
        Some(inv) => {
            let pairs: Vec<(Symbol, Expr)> = spec.states().iter().cloned().zip(inv.iter().cloned()).collect();
            let phi: Vec<Expr> = phi_x.iter().map(|p| normalize(&p.subst_pairs(&pairs))).collect();
            for (i, p) in phi.iter().enumerate().take(n.saturating_sub(3)) {
                for j in i + 2..n - 1 {
                    let d = normalize(&diff(p, &zs[j]));
                    if d.is_zero() {
                        continue;
                    }
                    // symbolic residue: find where it is largest
                    let dx = normalize(&d.subst_pairs(
                        &zs.iter().cloned().zip(chart.forward.iter().cloned()).collect::<Vec<_>>(),
                    ));
                    let c = Compiled::new(&dx, &spec.slots())?;
                    let (witness, value) = worst(spec, &c, refs);
                    if !d.has_calls() || value > 1e-9 {
                        return Err(TriangularError::Structure {
                            i: i + 1,
                            j: j + 1,
                            witness,
                            value,
                        });
                    }
                }
            }
            (Some(phi), "symbolic")
        }
        None => {
            check_structure_numeric(spec, chart, &phi_x, refs)?;
            (None, "numeric")
        }
    };
    Ok(TriangularRealization {
        chart: chart.clone(),
        feedback: fb.clone(),
        alpha_bar: alpha_bar.clone(),
        closed_loop_drift: fhat,
        phi_x,
        phi,
        structure_method: method.into(),
        chart_states: spec.states().to_vec(),
    })
}

fn worst(spec: &SystemSpec, c: &Compiled, refs: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let params = spec.param_vector();
    let mut best = (refs.first().cloned().unwrap_or_default(), 0.0);
    for q in refs {
        let mut a = q.clone();
        a.extend(&params);
        if let Ok(v) = c.eval(&a) {
            if v.abs() > best.1 {
                best = (q.clone(), v.abs());
            }
        }
    }
    best
}

fn check_structure_numeric(spec: &SystemSpec, chart: &Chart, phi_x: &[Expr], refs: &[Vec<f64>]) -> Result<(), TriangularError> {
    let n = spec.n();
    let slots = spec.slots();
    let params = spec.param_vector();
    let grad = |e: &Expr| -> Result<Vec<Compiled>, SymError> {
        spec.states().iter().map(|s| Compiled::new(&normalize(&diff(e, s)), &slots)).collect()
    };
    let jac: Vec<Vec<Compiled>> = chart.forward.iter().map(grad).collect::<Result<_, _>>()?;
    let dphi: Vec<Vec<Compiled>> = phi_x.iter().map(grad).collect::<Result<_, _>>()?;
    for q in refs {
        let mut a = q.clone();
        a.extend(&params);
        let Ok(m) = eval_matrix(&jac, &a) else { continue };
        let Some(minv) = m.try_inverse() else { continue };
        for i in 0..n.saturating_sub(3) {
            let Ok(g) = eval_matrix(std::slice::from_ref(&dphi[i]), &a) else { continue };
            let dz = g * &minv;
            let scale = dz.amax().max(1.0);
            for j in i + 2..n - 1 {
                if dz[(0, j)].abs() > 1e-8 * scale {
                    return Err(TriangularError::Structure {
                        i: i + 1,
                        j: j + 1,
                        witness: q.clone(),
                        value: dz[(0, j)].abs(),
                    });
                }
            }
        }
    }
    Ok(())
}

fn eval_matrix(rows: &[Vec<Compiled>], args: &[f64]) -> Result<DMatrix<f64>, SymError> {
    let mut m = DMatrix::zeros(rows.len(), rows[0].len());
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in r.iter().enumerate() {
            m[(i, j)] = c.eval(args)?;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatOutput {
    /// (z1, zn) in x.
    pub y: [String; 2],
    pub indices: [usize; 2],
    /// r_i = v1 + ∂φ_i/∂z_{i+1} in z.
    pub regularity_z: Vec<String>,
    /// Same with z = φ(x) substituted, still in terms of v1.
    pub regularity_x: Vec<String>,
    /// Same with v1 = (β⁻¹(u − α))_1, i.e. in terms of the original inputs.
    pub regularity_u: Vec<String>,
}

pub struct FlatOutputExprs {
    pub y: [Expr; 2],
    pub regularity_z: Vec<Expr>,
    pub regularity_x: Vec<Expr>,
    pub regularity_u: Vec<Expr>,
}

pub fn v1_symbol() -> Symbol {
    Symbol::new("v1")
}

pub fn input_symbols() -> [Symbol; 2] {
    [Symbol::new("u1"), Symbol::new("u2")]
}

/// ∂φ_i/∂z_{i+1} as a function of x: from φ in z when available, otherwise
/// via the chain rule with the symbolic inverse Jacobian column.
fn phi_slope_x(real: &TriangularRealization, i: usize) -> Expr {
    let zs = real.z_symbols();
    match &real.phi {
        Some(phi) => {
            let d = normalize(&diff(&phi[i], &zs[i + 1]));
            let pairs: Vec<(Symbol, Expr)> = zs.iter().cloned().zip(real.chart.forward.iter().cloned()).collect();
            normalize(&d.subst_pairs(&pairs))
        }
        None => {
            // s·J = ∇φ  ⇔  Jᵀ sᵀ = ∇φᵀ, solved over rational functions
            let states = &real.chart_states;
            let n = states.len();
            let rf = |e: &Expr| to_ratfn(&normalize(e)).ok();
            let mut rows = Vec::with_capacity(n);
            for k in 0..n {
                let mut row = Vec::with_capacity(n + 1);
                for j in 0..n {
                    let Some(v) = rf(&diff(&real.chart.forward[j], &states[k])) else { return Expr::zero() };
                    row.push(v);
                }
                let Some(g) = rf(&diff(&real.phi_x[i], &states[k])) else { return Expr::zero() };
                row.push(g);
                rows.push(row);
            }
            let ech = rref(rows, n + 1, &|_| 1.0);
            ech.pivots
                .iter()
                .find(|(_, c)| *c == i + 1)
                .map(|(r, _)| normalize(&ech.rows[*r][n].to_expr()))
                .unwrap_or_else(Expr::zero)
        }
    }
}

pub fn flat_output_exprs(_spec: &SystemSpec, real: &TriangularRealization) -> FlatOutputExprs {
    let n = real.n();
    let zs = real.z_symbols();
    let v1 = Expr::sym(&v1_symbol());
    let u = input_symbols().map(|s| Expr::sym(&s));
    let v_of_u = real.feedback.inverse_inputs([&u[0], &u[1]]);
    let mut rz = Vec::new();
    let mut rx = Vec::new();
    let mut ru = Vec::new();
    for i in 0..n - 2 {
        if let Some(phi) = &real.phi {
            rz.push(normalize(&(&v1 + &diff(&phi[i], &zs[i + 1]))));
        }
        let slope = phi_slope_x(real, i);
        rx.push(normalize(&(&v1 + &slope)));
        ru.push(normalize(&(&v_of_u[0] + &slope)));
    }
    FlatOutputExprs {
        y: [real.chart.forward[0].clone(), real.chart.forward[n - 1].clone()],
        regularity_z: rz,
        regularity_x: rx,
        regularity_u: ru,
    }
}

pub fn flat_output(spec: &SystemSpec, real: &TriangularRealization) -> FlatOutput {
    let e = flat_output_exprs(spec, real);
    let s = |v: &[Expr]| v.iter().map(Expr::to_string).collect();
    FlatOutput {
        y: [e.y[0].to_string(), e.y[1].to_string()],
        indices: [1, real.n()],
        regularity_z: s(&e.regularity_z),
        regularity_x: s(&e.regularity_x),
        regularity_u: s(&e.regularity_u),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDependence {
    pub object: String,
    pub params: Vec<String>,
}

/// Which parameters each constructed object depends on after normalization.
pub fn parameter_scan(spec: &SystemSpec, real: &TriangularRealization, flat: &FlatOutputExprs) -> Vec<ParamDependence> {
    let scan = |name: &str, es: &[Expr]| {
        let mut used = BTreeSet::new();
        for e in es {
            for s in normalize(e).symbols() {
                if spec.symbols.is_param(&s) {
                    used.insert(s.name().to_string());
                }
            }
        }
        ParamDependence {
            object: name.into(),
            params: used.into_iter().collect(),
        }
    };
    let phi = real.phi.clone().unwrap_or_else(|| real.phi_x.clone());
    vec![
        scan("chart", &real.chart.forward),
        scan("beta", &real.feedback.beta),
        scan("alpha", &real.feedback.alpha),
        scan("phi", &phi),
        scan("regularity", &flat.regularity_u),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chained::{chart_with_feedback, find_output_pair};
    use crate::harness::SampleBox;
    use crate::symx::{equiv_with, parse_free, same, EquivConfig, SymbolTable};
    use std::collections::BTreeMap;

    fn p(v: &[&str]) -> Vec<Expr> {
        v.iter().map(|s| parse_free(s).unwrap()).collect()
    }

    #[test]
    fn four_state_triangular() {
        let s = SystemSpec::new(
            SymbolTable::new(&["x1", "x2", "x3", "x4"], &[]),
            BTreeMap::new(),
            p(&["0", "x1^2 + x2", "1", "x1*x4"]),
            p(&["x4^2+1", "(x3-2*x1)*(x4^2+1)", "0", "(x1^2+x2)*(x4^2+1)"]),
            p(&["0", "0", "1", "0"]),
            0,
        )
        .unwrap();
        let refs = SampleBox::cube(4, 1.0, 5, 0).all_points();
        let (chart, fb) = chart_with_feedback(&s, p(&["x4", "x1^2+x2", "x3", "x1"]), None, &refs).unwrap();
        let (fb, abar) = drift_feedback(&s, &chart, &fb);
        assert!(abar[0].is_zero() && same(&abar[1], &Expr::int(-1)));
        let real = extract_triangular(&s, &chart, &fb, &abar, &refs).unwrap();
        let phi = real.phi.as_ref().unwrap();
        assert!(same(&phi[0], &parse_free("z1*z4").unwrap()));
        assert!(same(&phi[1], &parse_free("z2").unwrap()));
        let flat = flat_output_exprs(&s, &real);
        assert_eq!(flat.y[0].to_string(), "x4");
        assert_eq!(flat.y[1].to_string(), "x1");
        for r in &flat.regularity_z {
            assert_eq!(r.to_string(), "v1");
        }
    }

    #[test]
    fn motor_triangular_matches_printed_phi() {
        let s = crate::chained::tests::motor();
        let refs = SampleBox::cube(3, 1.0, 5, 0).all_points();
        let (_, chart, fb) = find_output_pair(&s, 2, &refs).unwrap();
        let (fb, abar) = drift_feedback(&s, &chart, &fb);
        assert!(same(
            &fb.alpha[0],
            &parse_free("(R*x2 + n_p*L*x1*x3)/(M*R)").unwrap()
        ));
        assert!(same(
            &fb.alpha[1],
            &parse_free("(R*x3 - n_p*L*x1*x2)/(M*R)").unwrap()
        ));
        let real = extract_triangular(&s, &chart, &fb, &abar, &refs).unwrap();
        let printed = parse_free(
            "(-2*J^2*L^6*z1*z2^2 - 8*n_p^2*M^6*R^4*z1*z3^2 + 4*n_p^2*M^6*R^4*z2*z3^3 + J^2*L^6*z2^3*z3 - 8*L*M^5*R^4*T_L)/(8*J*L^2*M^4*R^3)",
        )
        .unwrap();
        let phi1 = &real.phi.as_ref().unwrap()[0];
        assert!(same(phi1, &printed), "{phi1}");
        let flat = flat_output_exprs(&s, &real);
        let printed_u = parse_free("v1 + n_p*L*(n_p*x2^3 + 2*J*R*x1*x3 + n_p*x2*x3^2)/(2*J*M*R^2)").unwrap();
        assert!(same(&flat.regularity_x[0], &printed_u), "{}", flat.regularity_x[0]);
        let cfg = EquivConfig::new(50, 3, 1e-9).with_range(&Symbol::new("u1"), -1.0, 1.0);
        let ru = &flat.regularity_u[0];
        let expected = parse_free("u1 - (R*x2 + n_p*L*x1*x3)/(M*R) + n_p*L*(n_p*x2^3 + 2*J*R*x1*x3 + n_p*x2*x3^2)/(2*J*M*R^2)").unwrap();
        assert!(equiv_with(ru, &expected, &cfg).unwrap());
        let mut numeric = real.clone();
        numeric.phi = None;
        let fx = flat_output_exprs(&s, &numeric);
        assert!(same(&fx.regularity_x[0], &printed_u), "{}", fx.regularity_x[0]);
        let deps = parameter_scan(&s, &real, &flat);
        for d in &deps {
            let has_tl = d.params.iter().any(|p| p == "T_L");
            assert_eq!(has_tl, d.object == "phi", "{d:?}");
        }
    }
}
