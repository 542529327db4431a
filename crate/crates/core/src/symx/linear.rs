//! Gaussian elimination over rational functions.

use super::poly::RatFn;

/// Result of reducing a matrix to reduced row echelon form.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub rows: Vec<Vec<RatFn>>,
    /// (row, column) of each pivot, in order.
    pub pivots: Vec<(usize, usize)>,
    /// Pivot values as found, before the row was normalized.
    pub pivot_values: Vec<RatFn>,
    pub cols: usize,
}

/// Reduces `m` column by column; among rows with a nonzero entry the one
/// with the largest `score` becomes the pivot (ties go to the first row).
pub fn rref(m: Vec<Vec<RatFn>>, cols: usize, score: &dyn Fn(&RatFn) -> f64) -> Echelon {
    let mut rows = m;
    let mut pivots = Vec::new();
    let mut pivot_values = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate().skip(r) {
            if row[c].is_zero() {
                continue;
            }
            let s = score(&row[c]);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        let Some((i, _)) = best else { continue };
        rows.swap(r, i);
        let pv = rows[r][c].clone();
        let inv = pv.inv().expect("pivot is nonzero");
        for x in rows[r].iter_mut().skip(c) {
            *x = x.mul(&inv);
        }
        let pivot_row = rows[r].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for j in c..cols {
                if !pivot_row[j].is_zero() {
                    row[j] = row[j].sub(&factor.mul(&pivot_row[j]));
                }
            }
        }
        pivots.push((r, c));
        pivot_values.push(pv);
        r += 1;
    }
    Echelon {
        rows,
        pivots,
        pivot_values,
        cols,
    }
}

impl Echelon {
    pub fn free_columns(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|c| !self.pivots.iter().any(|(_, pc)| pc == c))
            .collect()
    }

    /// Nullspace vector with a 1 in free column `free`.
    pub fn null_vector(&self, free: usize) -> Vec<RatFn> {
        let mut v = vec![RatFn::zero(); self.cols];
        v[free] = RatFn::one();
        for (r, c) in &self.pivots {
            v[*c] = self.rows[*r][free].neg();
        }
        v
    }

    pub fn nullspace(&self) -> Vec<Vec<RatFn>> {
        self.free_columns().into_iter().map(|f| self.null_vector(f)).collect()
    }
}

/// Multiplies `v` by the product of all denominator factors appearing in
/// it, giving a vector of polynomials.
pub fn clear_denominators(v: &[RatFn]) -> Vec<RatFn> {
    let mut scale = RatFn::one();
    for x in v {
        let y = x.mul(&scale);
        if !y.is_polynomial() {
            scale = scale.mul(&RatFn::from_poly(y.denom()));
        }
    }
    v.iter().map(|x| x.mul(&scale)).collect()
}
