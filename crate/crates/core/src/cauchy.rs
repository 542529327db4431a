//! Annihilators Λ^k = (G_k)^⊥, the Cauchy characteristic space A(Λ)_q, the
//! retracting space C(Λ)_q = A(Λ)_q^⊥, and condition 2.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::diffgeo::{exterior_derivative_1form, lie_derivative_1form, GeoError, OneForm, TwoForm};
use crate::flags::FlagTable;
use crate::linalg::{nullspace, range, rank, relative_residual};
use crate::symx::linear::{clear_denominators, rref};
use crate::symx::poly::{to_ratfn, RatFn};
use crate::symx::{normalize, SymError};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CauchyError {
    #[error("level {k} is outside 1..={max} (empty for n ≤ 3)")]
    VacuousLevel { k: usize, max: i64 },
    #[error("G_{k} does not have rank {expected} at the reference point")]
    RankDrop { k: usize, expected: usize },
    #[error("no reference point")]
    NoReference,
    #[error("codistribution generators are dependent at the point")]
    DependentGenerators,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Eval(#[from] SymError),
}

/// Generators of a codistribution, with the level of G_k they annihilate.
#[derive(Debug, Clone)]
pub struct Codistribution {
    pub level: usize,
    pub forms: Vec<OneForm>,
    d_forms: Vec<TwoForm>,
}

impl Codistribution {
    pub fn new(level: usize, forms: Vec<OneForm>) -> Self {
        let d_forms = forms.iter().map(exterior_derivative_1form).collect();
        Codistribution {
            level,
            forms,
            d_forms,
        }
    }
}

/// Λ^k by symbolic elimination on the generator matrix of G_k, with pivots
/// chosen by magnitude at the first reference point; each generator is then
/// cleared of denominators.
pub fn annihilator(
    spec: &SystemSpec,
    table: &FlagTable,
    k: usize,
    refs: &[Vec<f64>],
) -> Result<Codistribution, CauchyError> {
    let n = spec.n();
    if k < 1 || (k as i64) > n as i64 - 3 {
        return Err(CauchyError::VacuousLevel {
            k,
            max: n as i64 - 3,
        });
    }
    let q = refs.first().ok_or(CauchyError::NoReference)?;
    let expected = 2 + k;
    let m = table.derived_matrix(k, q)?;
    if rank(&m, 1e-9) != expected {
        return Err(CauchyError::RankDrop { k, expected });
    }
    let point = spec.point(q.clone());
    let score = |r: &RatFn| r.eval(&|s| point.lookup(s)).map(f64::abs).unwrap_or(0.0);
    // rows are generators: the nullspace of this matrix is the annihilator
    let rows: Vec<Vec<RatFn>> = table.derived[k]
        .iter()
        .map(|g| {
            g.field
                .comps
                .iter()
                .map(|c| to_ratfn(c).expect("generator components are normalized"))
                .collect()
        })
        .collect();
    let ech = rref(rows, n, &score);
    let mut forms = Vec::new();
    for v in ech.nullspace() {
        let v = clear_denominators(&v);
        forms.push(OneForm::new(&spec.coords, v.iter().map(RatFn::to_expr).collect())?);
    }
    Ok(Codistribution::new(k, forms))
}

/// A(Λ)_q and C(Λ)_q at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSpaces {
    pub point: Vec<f64>,
    /// Orthonormal columns spanning A(Λ)_q.
    pub a_basis: DMatrix<f64>,
    /// Orthonormal columns spanning C(Λ)_q (covector components).
    pub c_basis: DMatrix<f64>,
}

impl CharacteristicSpaces {
    pub fn dim_a(&self) -> usize {
        self.a_basis.ncols()
    }

    pub fn dim_c(&self) -> usize {
        self.c_basis.ncols()
    }

    /// Relative distance of a covector from C(Λ)_q.
    pub fn residual(&self, w: &[f64]) -> f64 {
        relative_residual(&self.c_basis, &DVector::from_column_slice(w))
    }
}

pub fn cauchy_space(
    spec: &SystemSpec,
    lambda: &Codistribution,
    q: &[f64],
    tol: f64,
) -> Result<CharacteristicSpaces, CauchyError> {
    let n = spec.n();
    let point = spec.point(q.to_vec());
    let m = lambda.forms.len();
    let mut l = DMatrix::zeros(m, n);
    for (i, w) in lambda.forms.iter().enumerate() {
        for (j, v) in w.eval(&point)?.into_iter().enumerate() {
            l[(i, j)] = v;
        }
    }
    if m > 0 && rank(&l, tol) < m {
        return Err(CauchyError::DependentGenerators);
    }
    // projector onto the orthogonal complement of span{λ^i_q}
    let p_perp = if m == 0 {
        DMatrix::identity(n, n)
    } else {
        let span = range(&l.transpose(), tol);
        DMatrix::identity(n, n) - &span * span.transpose()
    };
    let mut stacked = l.clone();
    for dl in &lambda.d_forms {
        let omega = dl.eval(&point)?;
        // (i_X dλ)_j = Σ_i X_i ω_ij, i.e. ωᵀ X
        let block = &p_perp * omega.transpose();
        let rows = stacked.nrows();
        stacked = stacked.insert_rows(rows, n, 0.0);
        stacked.view_mut((rows, 0), (n, n)).copy_from(&block);
    }
    let a_basis = nullspace(&stacked, tol);
    let c_basis = if a_basis.ncols() == 0 {
        DMatrix::identity(n, n)
    } else {
        nullspace(&a_basis.transpose(), tol)
    };
    Ok(CharacteristicSpaces {
        point: q.to_vec(),
        a_basis,
        c_basis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub k: usize,
    pub generators: Vec<Vec<String>>,
    pub lie_derivatives: Vec<Vec<String>>,
    /// "symbolic" when C^k is a constant coordinate coframe at all points,
    /// otherwise "numeric".
    pub method: String,
    pub coframe: Option<Vec<usize>>,
    pub max_residual: f64,
    pub failing_points: usize,
    pub points_checked: usize,
    /// Largest distance of a Λ^k generator from C^k (should be ~0).
    pub max_containment_residual: f64,
    pub dims: Option<(usize, usize)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition2Report {
    /// "pass", "fail" or "vacuous".
    pub verdict: String,
    pub levels: Vec<LevelResult>,
    pub error: Option<String>,
}

/// Indices S with C = span{dx_i : i ∈ S} at this point, if C is a
/// coordinate coframe.
fn coordinate_coframe(c: &CharacteristicSpaces, tol: f64) -> Option<Vec<usize>> {
    let n = c.a_basis.nrows();
    let s: Vec<usize> = (0..n)
        .filter(|&i| c.a_basis.row(i).iter().all(|v| v.abs() <= tol))
        .collect();
    (s.len() == c.dim_c()).then_some(s)
}

/// L_f ω ∈ C^k for every generator ω of Λ^k, 1 ≤ k ≤ n − 3, at each point.
pub fn check_condition2(
    spec: &SystemSpec,
    table: &FlagTable,
    points: &[Vec<f64>],
    rank_tol: f64,
    tol: f64,
) -> Condition2Report {
    let n = spec.n();
    if n <= 3 {
        return Condition2Report {
            verdict: "vacuous".into(),
            levels: Vec::new(),
            error: None,
        };
    }
    let mut levels = Vec::new();
    for k in 1..=(n - 3) {
        let lambda = match annihilator(spec, table, k, points) {
            Ok(l) => l,
            Err(e) => {
                return Condition2Report {
                    verdict: "fail".into(),
                    levels,
                    error: Some(format!("level {k}: {e}")),
                }
            }
        };
        let lf: Vec<OneForm> = match lambda
            .forms
            .iter()
            .map(|w| lie_derivative_1form(&spec.f, w))
            .collect::<Result<_, _>>()
        {
            Ok(v) => v,
            Err(e) => {
                return Condition2Report {
                    verdict: "fail".into(),
                    levels,
                    error: Some(e.to_string()),
                }
            }
        };
        let mut max_residual: f64 = 0.0;
        let mut max_contain: f64 = 0.0;
        let mut failing = 0;
        let mut checked = 0;
        let mut coframe: Option<Option<Vec<usize>>> = None;
        let mut dims = None;
        for q in points {
            let Ok(cs) = cauchy_space(spec, &lambda, q, rank_tol) else { continue };
            let point = spec.point(q.clone());
            let mut worst: f64 = 0.0;
            let mut ok = true;
            for w in &lf {
                match w.eval(&point) {
                    Ok(v) => worst = worst.max(cs.residual(&v)),
                    Err(_) => ok = false,
                }
            }
            if !ok {
                continue;
            }
            for w in &lambda.forms {
                if let Ok(v) = w.eval(&point) {
                    max_contain = max_contain.max(cs.residual(&v));
                }
            }
            checked += 1;
            dims.get_or_insert((cs.dim_a(), cs.dim_c()));
            let cf = coordinate_coframe(&cs, 1e-10);
            coframe = Some(match coframe {
                None => cf,
                Some(prev) if prev == cf => prev,
                Some(_) => None,
            });
            max_residual = max_residual.max(worst);
            if worst > tol {
                failing += 1;
            }
        }
        let coframe = coframe.flatten();
        let (method, pass) = match &coframe {
            Some(s) => {
                // membership ⇔ coefficients outside S vanish identically
                let symbolic_ok = lf
                    .iter()
                    .all(|w| (0..n).filter(|j| !s.contains(j)).all(|j| normalize(&w.coeffs[j]).is_zero()));
                ("symbolic", symbolic_ok && checked > 0)
            }
            None => ("numeric", failing == 0 && checked > 0),
        };
        levels.push(LevelResult {
            k,
            generators: lambda
                .forms
                .iter()
                .map(|w| w.coeffs.iter().map(|c| c.to_string()).collect())
                .collect(),
            lie_derivatives: lf
                .iter()
                .map(|w| w.coeffs.iter().map(|c| c.to_string()).collect())
                .collect(),
            method: method.into(),
            coframe,
            max_residual,
            failing_points: failing,
            points_checked: checked,
            max_containment_residual: max_contain,
            dims,
            pass,
        });
    }
    let pass = levels.iter().all(|l| l.pass);
    Condition2Report {
        verdict: if pass { "pass" } else { "fail" }.into(),
        levels,
        error: None,
    }
}
