//! Lie flag F_k and derived flag G_k of span{g1, g2}, and condition 1.
//!
//! F_{k+1} adds the left-iterated brackets [Y, X] with Y ∈ {g1, g2} and X a
//! generator introduced at level k; G_{k+1} adds brackets of all pairs of
//! generators of G_k. After each level, generators that do not raise the
//! rank at any reference point are dropped (their words are still counted).

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::diffgeo::{lie_bracket, GeoError, VectorField};
use crate::harness::SampleBox;
use crate::linalg::rank;
use crate::symx::{normalize, Compiled, Expr, SymError};
use crate::system::SystemSpec;

#[derive(Debug, Clone)]
pub struct Generator {
    pub word: String,
    pub field: VectorField,
    compiled: Vec<Compiled>,
}

impl Generator {
    fn new(word: String, field: VectorField, slots: &[crate::symx::Symbol]) -> Result<Self, GeoError> {
        let compiled = field.compile(slots)?;
        Ok(Generator {
            word,
            field,
            compiled,
        })
    }

    fn eval(&self, args: &[f64]) -> Result<Vec<f64>, SymError> {
        self.compiled.iter().map(|c| c.eval(args)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimRecord {
    pub point: Vec<f64>,
    pub dim_f: Vec<usize>,
    pub dim_g: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FlagTable {
    /// Highest level, n − 2.
    pub depth: usize,
    /// Generators of F_k; level k+1 extends level k.
    pub lie: Vec<Vec<Generator>>,
    /// Generators of G_k; level k+1 extends level k.
    pub derived: Vec<Vec<Generator>>,
    /// Number of bracket words in P_k before zero-pruning.
    pub lie_words: Vec<usize>,
    /// Number of bracket words in Q_k before zero-pruning.
    pub derived_words: Vec<usize>,
    pub records: Vec<DimRecord>,
    n: usize,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlagError {
    #[error("feedback matrix has identically zero determinant")]
    SingularFeedback,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

struct Builder<'a> {
    slots: Vec<crate::symx::Symbol>,
    refs: &'a [Vec<f64>],
    params: Vec<f64>,
    tol: f64,
    n: usize,
}

impl Builder<'_> {
    fn args(&self, p: &[f64]) -> Vec<f64> {
        let mut a = p.to_vec();
        a.extend(&self.params);
        a
    }

    fn matrix(&self, gens: &[Generator], p: &[f64]) -> Option<DMatrix<f64>> {
        let args = self.args(p);
        let cols: Result<Vec<Vec<f64>>, _> = gens.iter().map(|g| g.eval(&args)).collect();
        let cols = cols.ok()?;
        Some(DMatrix::from_fn(self.n, cols.len(), |i, j| cols[j][i]))
    }

    /// Appends candidates that raise the rank at some reference point.
    fn extend(&self, kept: &mut Vec<Generator>, candidates: Vec<Generator>) {
        for cand in candidates {
            let mut raises = false;
            let mut full_everywhere = true;
            for p in self.refs {
                let Some(m) = self.matrix(kept, p) else { continue };
                let r = rank(&m, self.tol);
                if r < self.n {
                    full_everywhere = false;
                }
                let Ok(v) = cand.eval(&self.args(p)) else { continue };
                let mut m2 = m.clone().insert_column(m.ncols(), 0.0);
                for i in 0..self.n {
                    m2[(i, m.ncols())] = v[i];
                }
                if rank(&m2, self.tol) > r {
                    raises = true;
                    break;
                }
            }
            if full_everywhere && !self.refs.is_empty() {
                return;
            }
            if raises {
                kept.push(cand);
            }
        }
    }
}

fn bracket_gen(a: &Generator, b: &Generator, slots: &[crate::symx::Symbol]) -> Result<Option<Generator>, GeoError> {
    let f = lie_bracket(&a.field, &b.field)?;
    if f.is_zero() {
        return Ok(None);
    }
    Ok(Some(Generator::new(format!("[{},{}]", a.word, b.word), f, slots)?))
}

/// Reference points used for generator pruning.
pub fn reference_points(spec: &SystemSpec) -> Vec<Vec<f64>> {
    SampleBox::new(spec.sample_box(), 4, 0x0f1a9).all_points()
}

pub fn compute_flags(spec: &SystemSpec) -> Result<FlagTable, GeoError> {
    compute_flags_of(spec, &spec.g1, &spec.g2, &reference_points(spec), 1e-9)
}

/// Flags of span{x1, x2} using `refs` for pruning.
pub fn compute_flags_of(
    spec: &SystemSpec,
    x1: &VectorField,
    x2: &VectorField,
    refs: &[Vec<f64>],
    tol: f64,
) -> Result<FlagTable, GeoError> {
    let n = spec.n();
    let depth = n - 2;
    let b = Builder {
        slots: spec.slots(),
        refs,
        params: spec.param_vector(),
        tol,
        n,
    };
    let p0 = vec![
        Generator::new("g1".into(), x1.clone(), &b.slots)?,
        Generator::new("g2".into(), x2.clone(), &b.slots)?,
    ];
    let p0: Vec<Generator> = p0.into_iter().filter(|g| !g.field.is_zero()).collect();

    let mut lie = vec![p0.clone()];
    let mut derived = vec![p0.clone()];
    let mut lie_words = vec![2];
    let mut derived_words = vec![2];

    // P_k as retained at the previous level
    let mut frontier = p0.clone();
    for _k in 0..depth {
        // Lie flag
        lie_words.push(2 * frontier.len());
        let mut cands = Vec::new();
        for y in &p0 {
            for x in &frontier {
                if let Some(g) = bracket_gen(y, x, &b.slots)? {
                    cands.push(g);
                }
            }
        }
        let mut next = lie.last().expect("level 0").clone();
        let before = next.len();
        b.extend(&mut next, cands);
        frontier = next[before..].to_vec();
        lie.push(next);

        // derived flag: brackets of all pairs not bracketed before
        let prev = derived.last().expect("level 0").clone();
        let old = if derived.len() >= 2 {
            derived[derived.len() - 2].len()
        } else {
            0
        };
        let mut cands = Vec::new();
        let mut words = 0;
        for i in 0..prev.len() {
            for j in (i + 1)..prev.len() {
                if j < old {
                    continue;
                }
                words += 1;
                if let Some(g) = bracket_gen(&prev[i], &prev[j], &b.slots)? {
                    cands.push(g);
                }
            }
        }
        derived_words.push(words);
        let mut next = prev;
        b.extend(&mut next, cands);
        derived.push(next);
    }

    Ok(FlagTable {
        depth,
        lie,
        derived,
        lie_words,
        derived_words,
        records: Vec::new(),
        n,
        params: spec.param_vector(),
    })
}

impl FlagTable {
    fn args(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        a.extend(&self.params);
        a
    }

    fn matrix(&self, gens: &[Generator], x: &[f64]) -> Result<DMatrix<f64>, SymError> {
        let args = self.args(x);
        let cols = gens
            .iter()
            .map(|g| g.eval(&args))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DMatrix::from_fn(self.n, cols.len(), |i, j| cols[j][i]))
    }

    /// Pointwise dimensions of F_k and G_k for 0 ≤ k ≤ depth.
    pub fn dims_at(&self, x: &[f64], tol: f64) -> Result<(Vec<usize>, Vec<usize>), SymError> {
        let mut df = Vec::new();
        let mut dg = Vec::new();
        for k in 0..=self.depth {
            df.push(rank(&self.matrix(&self.lie[k], x)?, tol));
            dg.push(rank(&self.matrix(&self.derived[k], x)?, tol));
        }
        Ok((df, dg))
    }

    /// Rank of F_k and G_k generators stacked together.
    pub fn joint_rank_at(&self, k: usize, x: &[f64], tol: f64) -> Result<usize, SymError> {
        let mut gens = self.lie[k].clone();
        gens.extend(self.derived[k].iter().cloned());
        Ok(rank(&self.matrix(&gens, x)?, tol))
    }

    /// Generator matrix of G_k at `x` (columns are generators).
    pub fn derived_matrix(&self, k: usize, x: &[f64]) -> Result<DMatrix<f64>, SymError> {
        self.matrix(&self.derived[k], x)
    }

    pub fn record(&mut self, x: &[f64], tol: f64) -> Result<DimRecord, SymError> {
        let (dim_f, dim_g) = self.dims_at(x, tol)?;
        let r = DimRecord {
            point: x.to_vec(),
            dim_f,
            dim_g,
        };
        self.records.push(r.clone());
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition1Failure {
    pub point_index: usize,
    pub level: usize,
    pub dim_f: usize,
    pub dim_g: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition1Report {
    pub pass: bool,
    pub points_checked: usize,
    pub points_rejected: usize,
    pub records: Vec<DimRecord>,
    pub first_failure: Option<Condition1Failure>,
    pub lie_words: Vec<String>,
    pub derived_words: Vec<String>,
}

/// dim F_k = dim G_k = 2 + k for 0 ≤ k ≤ n − 2 at every point.
pub fn check_condition1(table: &mut FlagTable, points: &[Vec<f64>], tol: f64) -> Condition1Report {
    let mut records = Vec::new();
    let mut first_failure = None;
    let mut rejected = 0;
    for (idx, x) in points.iter().enumerate() {
        let rec = match table.record(x, tol) {
            Ok(r) => r,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        if first_failure.is_none() {
            for k in 0..=table.depth {
                let expected = 2 + k;
                if rec.dim_f[k] != expected || rec.dim_g[k] != expected {
                    first_failure = Some(Condition1Failure {
                        point_index: idx,
                        level: k,
                        dim_f: rec.dim_f[k],
                        dim_g: rec.dim_g[k],
                        expected,
                    });
                    break;
                }
            }
        }
        records.push(rec);
    }
    let checked = records.len();
    Condition1Report {
        pass: first_failure.is_none() && checked > 0,
        points_checked: checked,
        points_rejected: rejected,
        records,
        first_failure,
        lie_words: table.lie[table.depth].iter().map(|g| g.word.clone()).collect(),
        derived_words: table.derived[table.depth].iter().map(|g| g.word.clone()).collect(),
    }
}

/// Flags of span{β11 g1 + β12 g2, β21 g1 + β22 g2}.
pub fn feedback_flags(spec: &SystemSpec, beta: &[Expr; 4]) -> Result<FlagTable, FlagError> {
    let det = normalize(&(&beta[0] * &beta[3] - &beta[1] * &beta[2]));
    if det.is_zero() {
        return Err(FlagError::SingularFeedback);
    }
    let h1 = spec.g1.scale(&beta[0]).add(&spec.g2.scale(&beta[1]))?;
    let h2 = spec.g1.scale(&beta[2]).add(&spec.g2.scale(&beta[3]))?;
    Ok(compute_flags_of(spec, &h1, &h2, &reference_points(spec), 1e-9)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symx::{parse_free, SymbolTable};
    use std::collections::BTreeMap;

    fn system(states: &[&str], f: &[&str], g1: &[&str], g2: &[&str]) -> SystemSpec {
        let p = |v: &[&str]| v.iter().map(|s| parse_free(s).unwrap()).collect::<Vec<_>>();
        SystemSpec::new(SymbolTable::new(states, &[]), BTreeMap::new(), p(f), p(g1), p(g2), 0).unwrap()
    }

    #[test]
    fn four_state_dims_at_origin() {
        let s = system(
            &["x1", "x2", "x3", "x4"],
            &["0", "x1^2+x2", "1", "x1*x4"],
            &["x4^2+1", "(x3-2*x1)*(x4^2+1)", "0", "(x1^2+x2)*(x4^2+1)"],
            &["0", "0", "1", "0"],
        );
        let t = compute_flags(&s).unwrap();
        let (df, dg) = t.dims_at(&[0.0; 4], 1e-9).unwrap();
        assert_eq!(df, vec![2, 3, 4]);
        assert_eq!(dg, vec![2, 3, 4]);
        let words: Vec<&str> = t.derived[1].iter().map(|g| g.word.as_str()).collect();
        assert_eq!(words, vec!["g1", "g2", "[g1,g2]"]);
    }

    #[test]
    fn commuting_constant_fields() {
        let s = system(&["x1", "x2", "x3"], &["0", "0", "0"], &["1", "0", "0"], &["0", "1", "0"]);
        let t = compute_flags(&s).unwrap();
        assert_eq!(t.derived[1].len(), 2);
        let (df, dg) = t.dims_at(&[0.1, 0.2, 0.3], 1e-9).unwrap();
        assert_eq!((df, dg), (vec![2, 2], vec![2, 2]));
    }

    #[test]
    fn word_counts_double() {
        let s = system(
            &["z1", "z2", "z3", "z4", "z5"],
            &["0", "0", "0", "0", "0"],
            &["z2", "z3", "z4", "0", "1"],
            &["0", "0", "0", "1", "0"],
        );
        let t = compute_flags(&s).unwrap();
        assert_eq!(t.lie_words, vec![2, 4, 2, 2]);
        let (df, dg) = t.dims_at(&[0.3, -0.2, 0.5, 0.1, 0.7], 1e-9).unwrap();
        assert_eq!(df, vec![2, 3, 4, 5]);
        assert_eq!(dg, vec![2, 3, 4, 5]);
    }

    #[test]
    fn singular_feedback_rejected() {
        let s = system(&["x1", "x2", "x3"], &["0", "0", "0"], &["1", "0", "0"], &["0", "1", "0"]);
        let beta = [Expr::one(), Expr::int(2), Expr::int(2), Expr::int(4)];
        assert!(matches!(feedback_flags(&s, &beta), Err(FlagError::SingularFeedback)));
    }
}
