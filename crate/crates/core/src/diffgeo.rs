//! Vector fields, one- and two-forms over a fixed chart, with Lie brackets,
//! exterior and interior derivatives and Lie derivatives of forms.

use std::sync::Arc;

use thiserror::Error;

use crate::symx::{diff, eval, normalize, Compiled, Expr, Point, SymError, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("chart mismatch: `{0}` vs `{1}`")]
    ChartMismatch(String, String),
    #[error("expected {expected} components, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] SymError),
}

/// A named coordinate chart: the ordered coordinate symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coords {
    pub name: String,
    pub symbols: Vec<Symbol>,
}

impl Coords {
    pub fn new(name: &str, symbols: &[Symbol]) -> Arc<Self> {
        Arc::new(Coords {
            name: name.to_string(),
            symbols: symbols.to_vec(),
        })
    }

    pub fn from_names(name: &str, names: &[&str]) -> Arc<Self> {
        let syms: Vec<Symbol> = names.iter().map(|s| Symbol::new(s)).collect();
        Coords::new(name, &syms)
    }

    pub fn dim(&self) -> usize {
        self.symbols.len()
    }
}

fn same_chart(a: &Coords, b: &Coords) -> Result<(), GeoError> {
    if a == b {
        Ok(())
    } else {
        Err(GeoError::ChartMismatch(a.name.clone(), b.name.clone()))
    }
}

fn check_len(coords: &Coords, got: usize) -> Result<(), GeoError> {
    if coords.dim() == got {
        Ok(())
    } else {
        Err(GeoError::Dimension {
            expected: coords.dim(),
            got,
        })
    }
}

fn eval_all(exprs: &[Expr], p: &Point) -> Result<Vec<f64>, SymError> {
    exprs.iter().map(|e| eval(e, p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub coords: Arc<Coords>,
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(coords: &Arc<Coords>, comps: Vec<Expr>) -> Result<Self, GeoError> {
        check_len(coords, comps.len())?;
        Ok(VectorField {
            coords: coords.clone(),
            comps: comps.iter().map(normalize).collect(),
        })
    }

    pub fn zero(coords: &Arc<Coords>) -> Self {
        VectorField {
            coords: coords.clone(),
            comps: vec![Expr::zero(); coords.dim()],
        }
    }

    /// The coordinate field ∂/∂x_i.
    pub fn coordinate(coords: &Arc<Coords>, i: usize) -> Self {
        let mut comps = vec![Expr::zero(); coords.dim()];
        comps[i] = Expr::one();
        VectorField {
            coords: coords.clone(),
            comps,
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeoError> {
        same_chart(&self.coords, &other.coords)?;
        VectorField::new(
            &self.coords,
            self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn scale(&self, k: &Expr) -> VectorField {
        VectorField {
            coords: self.coords.clone(),
            comps: self.comps.iter().map(|c| normalize(&(k * c))).collect(),
        }
    }

    pub fn eval(&self, p: &Point) -> Result<Vec<f64>, SymError> {
        eval_all(&self.comps, p)
    }

    /// Compiles the components over `slots` (coordinates, then parameters).
    pub fn compile(&self, slots: &[Symbol]) -> Result<Vec<Compiled>, SymError> {
        self.comps.iter().map(|c| Compiled::new(c, slots)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub coords: Arc<Coords>,
    pub coeffs: Vec<Expr>,
}

impl OneForm {
    pub fn new(coords: &Arc<Coords>, coeffs: Vec<Expr>) -> Result<Self, GeoError> {
        check_len(coords, coeffs.len())?;
        Ok(OneForm {
            coords: coords.clone(),
            coeffs: coeffs.iter().map(normalize).collect(),
        })
    }

    /// The coordinate form dx_i.
    pub fn coordinate(coords: &Arc<Coords>, i: usize) -> Self {
        let mut coeffs = vec![Expr::zero(); coords.dim()];
        coeffs[i] = Expr::one();
        OneForm {
            coords: coords.clone(),
            coeffs,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Expr::is_zero)
    }

    pub fn add(&self, other: &OneForm) -> Result<OneForm, GeoError> {
        same_chart(&self.coords, &other.coords)?;
        OneForm::new(
            &self.coords,
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn scale(&self, k: &Expr) -> OneForm {
        OneForm {
            coords: self.coords.clone(),
            coeffs: self.coeffs.iter().map(|c| normalize(&(k * c))).collect(),
        }
    }

    pub fn eval(&self, p: &Point) -> Result<Vec<f64>, SymError> {
        eval_all(&self.coeffs, p)
    }
}

/// Two-form stored by its coefficients on dx_i∧dx_j, i < j.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    pub coords: Arc<Coords>,
    coeffs: Vec<Expr>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl TwoForm {
    pub fn zero(coords: &Arc<Coords>) -> Self {
        let n = coords.dim();
        TwoForm {
            coords: coords.clone(),
            coeffs: vec![Expr::zero(); n * (n - 1) / 2],
        }
    }

    /// Coefficient of dx_i∧dx_j for any i, j (antisymmetric extension).
    pub fn get(&self, i: usize, j: usize) -> Expr {
        let n = self.coords.dim();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.coeffs[pair_index(n, i, j)].clone(),
            std::cmp::Ordering::Greater => self.coeffs[pair_index(n, j, i)].neg(),
            std::cmp::Ordering::Equal => Expr::zero(),
        }
    }

    /// Sets the coefficient of dx_i∧dx_j, i < j.
    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        let n = self.coords.dim();
        self.coeffs[pair_index(n, i, j)] = normalize(&e);
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Expr::is_zero)
    }

    pub fn eval(&self, p: &Point) -> Result<nalgebra::DMatrix<f64>, SymError> {
        let n = self.coords.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = eval(&self.coeffs[pair_index(n, i, j)], p)?;
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Ok(m)
    }
}

/// [X, Y]_i = Σ_j (X_j ∂Y_i/∂x_j − Y_j ∂X_i/∂x_j).
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, GeoError> {
    same_chart(&x.coords, &y.coords)?;
    let syms = &x.coords.symbols;
    let comps = (0..x.dim())
        .map(|i| {
            Expr::sum(syms.iter().enumerate().flat_map(|(j, s)| {
                [
                    &x.comps[j] * &diff(&y.comps[i], s),
                    -(&y.comps[j] * &diff(&x.comps[i], s)),
                ]
            }))
        })
        .collect();
    VectorField::new(&x.coords, comps)
}

/// L_X h = Σ_j X_j ∂h/∂x_j.
pub fn lie_derivative_fn(x: &VectorField, h: &Expr) -> Expr {
    normalize(&Expr::sum(
        x.coords
            .symbols
            .iter()
            .zip(&x.comps)
            .map(|(s, xj)| xj * &diff(h, s)),
    ))
}

pub fn exterior_derivative_fn(coords: &Arc<Coords>, h: &Expr) -> OneForm {
    OneForm {
        coords: coords.clone(),
        coeffs: coords.symbols.iter().map(|s| normalize(&diff(h, s))).collect(),
    }
}

/// (dω)_{ij} = ∂ω_j/∂x_i − ∂ω_i/∂x_j.
pub fn exterior_derivative_1form(w: &OneForm) -> TwoForm {
    let n = w.coords.dim();
    let syms = &w.coords.symbols;
    let mut out = TwoForm::zero(&w.coords);
    for i in 0..n {
        for j in i + 1..n {
            out.set(i, j, diff(&w.coeffs[j], &syms[i]) - diff(&w.coeffs[i], &syms[j]));
        }
    }
    out
}

/// ⟨ω, X⟩.
pub fn pairing(w: &OneForm, x: &VectorField) -> Result<Expr, GeoError> {
    same_chart(&w.coords, &x.coords)?;
    Ok(normalize(&Expr::sum(w.coeffs.iter().zip(&x.comps).map(|(a, b)| a * b))))
}

/// (i_X ω)_j = Σ_i X_i ω_ij.
pub fn interior_product(x: &VectorField, w: &TwoForm) -> Result<OneForm, GeoError> {
    same_chart(&x.coords, &w.coords)?;
    let n = x.dim();
    let coeffs = (0..n)
        .map(|j| Expr::sum((0..n).map(|i| &x.comps[i] * &w.get(i, j))))
        .collect();
    OneForm::new(&x.coords, coeffs)
}

/// α∧β with coefficient α_i β_j − α_j β_i on dx_i∧dx_j.
pub fn wedge(a: &OneForm, b: &OneForm) -> Result<TwoForm, GeoError> {
    same_chart(&a.coords, &b.coords)?;
    let n = a.coords.dim();
    let mut out = TwoForm::zero(&a.coords);
    for i in 0..n {
        for j in i + 1..n {
            out.set(i, j, &a.coeffs[i] * &b.coeffs[j] - &a.coeffs[j] * &b.coeffs[i]);
        }
    }
    Ok(out)
}

/// L_X ω by Cartan's formula i_X dω + d(i_X ω).
pub fn lie_derivative_1form(x: &VectorField, w: &OneForm) -> Result<OneForm, GeoError> {
    let a = interior_product(x, &exterior_derivative_1form(w))?;
    let b = exterior_derivative_fn(&x.coords, &pairing(w, x)?);
    a.add(&b)
}

/// L_X ω by the component formula Σ_i (X_i ∂ω_j/∂x_i + ω_i ∂X_i/∂x_j).
pub fn lie_derivative_1form_components(x: &VectorField, w: &OneForm) -> Result<OneForm, GeoError> {
    same_chart(&x.coords, &w.coords)?;
    let syms = &x.coords.symbols;
    let n = x.dim();
    let coeffs = (0..n)
        .map(|j| {
            Expr::sum((0..n).flat_map(|i| {
                [
                    &x.comps[i] * &diff(&w.coeffs[j], &syms[i]),
                    &w.coeffs[i] * &diff(&x.comps[i], &syms[j]),
                ]
            }))
        })
        .collect();
    OneForm::new(&x.coords, coeffs)
}
