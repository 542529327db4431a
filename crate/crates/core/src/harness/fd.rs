use super::HarnessError;
use crate::diffgeo::VectorField;
use crate::symx::{Compiled, Symbol};

fn jacobian_fd(c: &[Compiled], q: &[f64], params: &[f64], h: f64) -> Result<Vec<Vec<f64>>, HarnessError> {
    let n = q.len();
    let mut jac = vec![vec![0.0; n]; c.len()];
    for j in 0..n {
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[j] += h;
        minus[j] -= h;
        plus.extend_from_slice(params);
        minus.extend_from_slice(params);
        for (i, ci) in c.iter().enumerate() {
            jac[i][j] = (ci.eval(&plus)? - ci.eval(&minus)?) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Central-difference [X, Y] = J_Y X − J_X Y at `q`; `slots` is the state
/// layout followed by parameters bound to `params`.
pub fn fd_bracket(
    x: &VectorField,
    y: &VectorField,
    slots: &[Symbol],
    q: &[f64],
    params: &[f64],
    h: f64,
) -> Result<Vec<f64>, HarnessError> {
    let cx = x.compile(slots)?;
    let cy = y.compile(slots)?;
    let mut args = q.to_vec();
    args.extend_from_slice(params);
    let xv: Vec<f64> = cx.iter().map(|c| c.eval(&args)).collect::<Result<_, _>>()?;
    let yv: Vec<f64> = cy.iter().map(|c| c.eval(&args)).collect::<Result<_, _>>()?;
    let jx = jacobian_fd(&cx, q, params, h)?;
    let jy = jacobian_fd(&cy, q, params, h)?;
    let n = q.len();
    Ok((0..n)
        .map(|i| (0..n).map(|j| jy[i][j] * xv[j] - jx[i][j] * yv[j]).sum())
        .collect())
}
