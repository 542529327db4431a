//! Truncated Taylor series in one variable. `Jet[k]` holds f^(k)(t0)/k!.

use std::ops::{Add, Mul, Neg, Sub};

use super::eval::Scalar;
use super::expr::Func;
use super::SymError;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet(c)
    }

    /// The series of `t0 + s`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut j = Jet::constant(t0, order);
        if order >= 1 {
            j.0[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.0.get(k).copied().unwrap_or(0.0) * fact
    }

    /// d/ds, dropping one order.
    pub fn differentiate(&self) -> Jet {
        if self.0.len() == 1 {
            return Jet(vec![0.0]);
        }
        Jet((1..self.0.len()).map(|k| self.0[k] * k as f64).collect())
    }

    /// Antiderivative with constant `c0`, gaining one order.
    pub fn integrate(&self, c0: f64) -> Jet {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(c0);
        for (k, c) in self.0.iter().enumerate() {
            out.push(c / (k + 1) as f64);
        }
        Jet(out)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let mut c = self.0.clone();
        c.resize(order + 1, 0.0);
        Jet(c)
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let n = self.0.len().min(other.0.len());
        Jet((0..n).map(|k| f(self.0[k], other.0[k])).collect())
    }

    fn exp_series(&self) -> Jet {
        let n = self.0.len();
        let mut e = vec![0.0; n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.0[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.0.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.0[0].sin();
        c[0] = self.0[0].cos();
        for k in 1..n {
            let (mut ds, mut dc) = (0.0, 0.0);
            for j in 1..=k {
                ds += j as f64 * self.0[j] * c[k - j];
                dc -= j as f64 * self.0[j] * s[k - j];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Jet(s), Jet(c))
    }

    fn sqrt_series(&self) -> Result<Jet, SymError> {
        let a0 = self.0[0];
        if a0 < 0.0 {
            return Err(SymError::Domain("sqrt"));
        }
        if a0 == 0.0 && self.0.len() > 1 {
            return Err(SymError::DivisionByZero);
        }
        let n = self.0.len();
        let mut r = vec![0.0; n];
        r[0] = a0.sqrt();
        for k in 1..n {
            let mut s = self.0[k];
            for j in 1..k {
                s -= r[j] * r[k - j];
            }
            r[k] = s / (2.0 * r[0]);
        }
        Ok(Jet(r))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.iter().map(|a| -a).collect())
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.0.len().min(rhs.0.len());
        Jet((0..n)
            .map(|k| (0..=k).map(|j| self.0[j] * rhs.0[k - j]).sum())
            .collect())
    }
}

impl Scalar for Jet {
    fn from_f64(v: f64, like: &Self) -> Self {
        Jet::constant(v, like.order())
    }

    fn value(&self) -> f64 {
        self.0[0]
    }

    fn recip(&self) -> Result<Self, SymError> {
        let a0 = self.0[0];
        if a0 == 0.0 {
            return Err(SymError::DivisionByZero);
        }
        let n = self.0.len();
        let mut r = vec![0.0; n];
        r[0] = 1.0 / a0;
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.0[j] * r[k - j]).sum();
            r[k] = -s / a0;
        }
        Ok(Jet(r))
    }

    fn powi(&self, k: i32) -> Result<Self, SymError> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..k.unsigned_abs() {
            out = out * base.clone();
        }
        Ok(out)
    }

    fn call(&self, f: Func) -> Result<Self, SymError> {
        Ok(match f {
            Func::Exp => self.exp_series(),
            Func::Sin => self.sin_cos().0,
            Func::Cos => self.sin_cos().1,
            Func::Sqrt => self.sqrt_series()?,
        })
    }
}
