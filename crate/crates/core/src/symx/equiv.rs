use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expr::{Expr, Symbol};
use super::poly::{to_ratfn, Var};
use super::{eval_with, SymError};

/// Sampling setup for [`equiv_with`].
#[derive(Debug, Clone)]
pub struct EquivConfig {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    /// Per-symbol sampling intervals; others use `default_range`.
    pub ranges: BTreeMap<Symbol, (f64, f64)>,
    pub default_range: (f64, f64),
}

impl EquivConfig {
    pub fn new(trials: usize, seed: u64, tol: f64) -> Self {
        EquivConfig {
            trials,
            seed,
            tol,
            ranges: BTreeMap::new(),
            default_range: (-2.0, 2.0),
        }
    }

    pub fn with_range(mut self, s: &Symbol, lo: f64, hi: f64) -> Self {
        self.ranges.insert(s.clone(), (lo, hi));
        self
    }

    /// Pins symbols to fixed values (e.g. bound parameters).
    pub fn with_values(mut self, values: &BTreeMap<Symbol, f64>) -> Self {
        for (s, v) in values {
            self.ranges.insert(s.clone(), (*v, *v));
        }
        self
    }
}

/// Equivalence test: exact when both sides are rational functions, otherwise
/// `|a - b| <= tol * (1 + |a|)` at `trials` random points, resampling points
/// where either side is undefined.
pub fn equiv(a: &Expr, b: &Expr, trials: usize, seed: u64, tol: f64) -> Result<bool, SymError> {
    equiv_with(a, b, &EquivConfig::new(trials, seed, tol))
}

pub fn equiv_with(a: &Expr, b: &Expr, cfg: &EquivConfig) -> Result<bool, SymError> {
    if let (Ok(ra), Ok(rb)) = (to_ratfn(a), to_ratfn(b)) {
        let d = ra.sub(&rb);
        if d.is_zero() {
            return Ok(true);
        }
        if !d.vars().iter().any(|v| matches!(v, Var::Atom(..))) {
            return Ok(false);
        }
    }
    let mut syms = a.symbols();
    syms.extend(b.symbols());
    let syms: Vec<Symbol> = syms.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut accepted = 0;
    let mut attempts = 0;
    let max_attempts = 20 * cfg.trials.max(1);
    while accepted < cfg.trials && attempts < max_attempts {
        attempts += 1;
        let vals: Vec<f64> = syms
            .iter()
            .map(|s| {
                let (lo, hi) = cfg.ranges.get(s).copied().unwrap_or(cfg.default_range);
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            })
            .collect();
        let lookup = |s: &Symbol| syms.iter().position(|t| t == s).map(|i| vals[i]);
        let (va, vb) = match (eval_with(a, &lookup), eval_with(b, &lookup)) {
            (Ok(x), Ok(y)) => (x, y),
            _ => continue,
        };
        accepted += 1;
        if (va - vb).abs() > cfg.tol * (1.0 + va.abs()) {
            return Ok(false);
        }
    }
    if accepted == 0 {
        return Err(SymError::Unsampleable);
    }
    Ok(true)
}
