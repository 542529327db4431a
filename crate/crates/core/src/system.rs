//! The system description ẋ = f(x) + g1(x) u1 + g2(x) u2 and its bindings.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diffgeo::{Coords, GeoError, VectorField};
use crate::symx::{Expr, Point, Symbol, SymbolTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("a system needs at least two states, got {0}")]
    TooSmall(usize),
    #[error("g1 and g2 are both identically zero")]
    NoControls,
    #[error("{what}: expected {expected} entries, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// A two-input control-affine system.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub symbols: SymbolTable,
    pub coords: Arc<Coords>,
    /// Every parameter has a value; see `user_bound` for which were supplied.
    pub param_values: BTreeMap<Symbol, f64>,
    pub user_bound: Vec<Symbol>,
    pub f: VectorField,
    pub g1: VectorField,
    pub g2: VectorField,
    pub chart: Option<Vec<Expr>>,
    /// Row-major β11, β12, β21, β22.
    pub beta: Option<[Expr; 4]>,
    pub h1: Option<Expr>,
    pub h2: Option<Expr>,
    pub sample_box: Option<Vec<(f64, f64)>>,
    /// Closed-loop inputs v1(t), v2(t) for simulation.
    pub inputs: Option<(Expr, Expr)>,
    pub z0: Option<Vec<f64>>,
}

impl SystemSpec {
    /// Builds a system; unbound parameters receive deterministic values in
    /// [0.5, 2] drawn from `seed`.
    pub fn new(
        symbols: SymbolTable,
        param_values: BTreeMap<Symbol, f64>,
        f: Vec<Expr>,
        g1: Vec<Expr>,
        g2: Vec<Expr>,
        seed: u64,
    ) -> Result<Self, SpecError> {
        let n = symbols.states.len();
        if n < 2 {
            return Err(SpecError::TooSmall(n));
        }
        let coords = Coords::new("x", &symbols.states);
        for (what, v) in [("f", &f), ("g1", &g1), ("g2", &g2)] {
            if v.len() != n {
                return Err(SpecError::Dimension {
                    what: what.into(),
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let f = VectorField::new(&coords, f)?;
        let g1 = VectorField::new(&coords, g1)?;
        let g2 = VectorField::new(&coords, g2)?;
        if g1.is_zero() && g2.is_zero() {
            return Err(SpecError::NoControls);
        }
        let user_bound: Vec<Symbol> = symbols
            .params
            .iter()
            .filter(|p| param_values.contains_key(*p))
            .cloned()
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_9a7a);
        let mut values = BTreeMap::new();
        for p in &symbols.params {
            let v = match param_values.get(p) {
                Some(v) => *v,
                None => rng.random_range(0.5..2.0),
            };
            values.insert(p.clone(), v);
        }
        Ok(SystemSpec {
            symbols,
            coords,
            param_values: values,
            user_bound,
            f,
            g1,
            g2,
            chart: None,
            beta: None,
            h1: None,
            h2: None,
            sample_box: None,
            inputs: None,
            z0: None,
        })
    }

    pub fn n(&self) -> usize {
        self.coords.dim()
    }

    pub fn states(&self) -> &[Symbol] {
        &self.coords.symbols
    }

    pub fn params(&self) -> &[Symbol] {
        &self.symbols.params
    }

    /// Coordinates followed by parameters, the slot layout for compiled code.
    pub fn slots(&self) -> Vec<Symbol> {
        let mut s = self.coords.symbols.clone();
        s.extend(self.symbols.params.iter().cloned());
        s
    }

    pub fn param_vector(&self) -> Vec<f64> {
        self.symbols.params.iter().map(|p| self.param_values[p]).collect()
    }

    pub fn point(&self, x: Vec<f64>) -> Point {
        Point::new("x", &self.coords.symbols, x, self.param_values.clone())
    }

    /// The sampling box, `[-1, 1]^n` unless declared.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        self.sample_box
            .clone()
            .unwrap_or_else(|| vec![(-1.0, 1.0); self.n()])
    }

    /// Same system with the control fields replaced.
    pub fn with_controls(&self, g1: VectorField, g2: VectorField) -> SystemSpec {
        SystemSpec {
            g1,
            g2,
            ..self.clone()
        }
    }
}
