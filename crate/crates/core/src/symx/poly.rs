//! Multivariate polynomials and rational functions with exact rational
//! coefficients. This is the canonical representation behind `normalize`.
//!
//! Transcendental calls (`sin(..)` etc.) enter as opaque indeterminates whose
//! argument is itself normalized. Denominators are kept as products of
//! primitive integer polynomials ("factors") forming a basis in which no
//! factor divides another; the numerator is never divisible by a factor.
//! A rational function is zero iff its numerator is.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::expr::{rational_to_f64, Expr, Func, Node, Symbol};
use super::{eval_with, SymError};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Sym(Symbol),
    Atom(Func, Expr),
}

impl Var {
    pub fn depends_on(&self, s: &Symbol) -> bool {
        match self {
            Var::Sym(t) => t == s,
            Var::Atom(_, arg) => arg.depends_on(s),
        }
    }

    fn to_expr(&self) -> Expr {
        match self {
            Var::Sym(s) => Expr::sym(s),
            Var::Atom(f, arg) => Expr::call(*f, arg.clone()),
        }
    }
}

/// Sparse exponent vector sorted by variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Mono(pub Vec<(Var, u32)>);

impl Mono {
    pub fn one() -> Self {
        Mono(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Mono(vec![(v, 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, v: &Var) -> u32 {
        self.0.iter().find(|(w, _)| w == v).map_or(0, |(_, e)| *e)
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Mono(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Mono) -> Option<Mono> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (v, e) in &self.0 {
            if j < other.0.len() && &other.0[j].0 == v {
                let f = other.0[j].1;
                if f > *e {
                    return None;
                }
                if e > &f {
                    out.push((v.clone(), e - f));
                }
                j += 1;
            } else if j < other.0.len() && other.0[j].0 < *v {
                return None;
            } else {
                out.push((v.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Mono(out))
    }

    fn min_with(&self, other: &Mono) -> Mono {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let f = other.exponent(v);
            if f > 0 {
                out.push((v.clone(), (*e).min(f)));
            }
        }
        Mono(out)
    }

    fn to_expr(&self) -> Vec<Expr> {
        self.0.iter().map(|(v, e)| v.to_expr().powi(*e as i32)).collect()
    }
}

impl Ord for Mono {
    /// Graded lexicographic order (a monomial order).
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        match ea.cmp(eb) {
                            Ordering::Equal => {}
                            ord => return ord,
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Mono, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn var(v: Var) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::var(v), BigRational::one());
        p
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Mono, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Mono::degree).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    fn mul_term(&self, m: &Mono, c: &BigRational) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(mm, cc)| (mm.mul(m), cc * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let (lm_d, lc_d) = d.leading()?;
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if self.total_degree() < d.total_degree() {
            return None;
        }
        let mut rem = self.clone();
        let mut q = Poly::zero();
        let mut guard = 0usize;
        while let Some((lm, lc)) = rem.leading() {
            let m = lm.div(lm_d)?;
            let c = lc / lc_d;
            rem = rem.sub(&d.mul_term(&m, &c));
            q.add_term(m, c);
            guard += 1;
            if guard > 100_000 {
                return None;
            }
        }
        Some(q)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        self.terms.keys().any(|m| m.0.iter().any(|(v, _)| v.depends_on(s)))
    }

    /// Rational content `c` with `self / c` primitive over the integers and
    /// having a positive leading coefficient.
    fn content(&self) -> BigRational {
        let mut g = BigInt::zero();
        let mut l = BigInt::one();
        for c in self.terms.values() {
            g = g.gcd(c.numer());
            l = l.lcm(c.denom());
        }
        if g.is_zero() {
            return BigRational::one();
        }
        let sign = match self.leading() {
            Some((_, c)) if c.is_negative() => -BigInt::one(),
            _ => BigInt::one(),
        };
        BigRational::new(sign * g, l)
    }

    fn mono_gcd(&self) -> Mono {
        let mut iter = self.terms.keys();
        let Some(first) = iter.next() else {
            return Mono::one();
        };
        let mut g = first.clone();
        for m in iter {
            if g.is_one() {
                break;
            }
            g = g.min_with(m);
        }
        g
    }

    pub fn eval(&self, lookup: &dyn Fn(&Symbol) -> Option<f64>) -> Result<f64, SymError> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for (v, e) in &m.0 {
                let x = match v {
                    Var::Sym(s) => lookup(s).ok_or_else(|| SymError::Unbound(s.name().to_string()))?,
                    Var::Atom(f, arg) => eval_with(&Expr::call(*f, arg.clone()), lookup)?,
                };
                t *= x.powi(*e as i32);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn to_expr(&self) -> Expr {
        if self.terms.is_empty() {
            return Expr::zero();
        }
        Expr::sum(self.terms.iter().rev().map(|(m, c)| {
            let mut factors = vec![Expr::num(c.clone())];
            factors.extend(m.to_expr());
            Expr::product(factors)
        }))
    }
}

/// Splits `p` into rational content and primitive factors: single variables
/// (the monomial content) plus the remaining primitive part.
fn split_poly(p: &Poly) -> (BigRational, Vec<(Poly, u32)>) {
    let c = p.content();
    let prim = p.scale(&c.recip());
    let m = prim.mono_gcd();
    let mut out = Vec::new();
    let rest = if m.is_one() {
        prim
    } else {
        for (v, e) in &m.0 {
            out.push((Poly::var(v.clone()), *e));
        }
        Poly {
            terms: prim
                .terms
                .iter()
                .map(|(mm, cc)| (mm.div(&m).expect("monomial gcd divides"), cc.clone()))
                .collect(),
        }
    };
    if !rest.is_constant() {
        out.push((rest, 1));
    }
    (c, out)
}

/// Inserts `f` into a factor basis in which no element divides another.
fn push_refined(basis: &mut Vec<Poly>, f: Poly) {
    let mut f = f;
    let mut changed = true;
    while changed {
        changed = false;
        for b in basis.iter() {
            if b.len() <= f.len() || b.total_degree() <= f.total_degree() {
                if let Some(q) = f.div_exact(b) {
                    f = q;
                    changed = true;
                    break;
                }
            }
        }
    }
    let (_, parts) = split_poly(&f);
    for (part, _) in parts {
        if basis.contains(&part) {
            continue;
        }
        if let Some(pos) = basis.iter().position(|b| b.div_exact(&part).is_some()) {
            let b = basis.remove(pos);
            let q = b.div_exact(&part).expect("checked");
            basis.push(part);
            push_refined(basis, q);
        } else {
            basis.push(part);
        }
    }
}

/// Writes `f = c * prod basis[i]^e_i`.
fn decompose(f: &Poly, basis: &[Poly]) -> (BigRational, Vec<u32>) {
    let mut exps = vec![0u32; basis.len()];
    let mut rest = f.clone();
    let mut progress = true;
    while progress && !rest.is_constant() {
        progress = false;
        for (i, b) in basis.iter().enumerate() {
            if let Some(q) = rest.div_exact(b) {
                rest = q;
                exps[i] += 1;
                progress = true;
            }
        }
    }
    debug_assert!(rest.is_constant(), "factor not expressible over basis");
    (rest.as_constant().unwrap_or_else(BigRational::one), exps)
}

/// Rational function `num / prod(factor^exp)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatFn {
    num: Poly,
    den: BTreeMap<Poly, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroDivision;

impl RatFn {
    pub fn zero() -> Self {
        RatFn::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        RatFn::from_poly(Poly::one())
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFn {
            num: p,
            den: BTreeMap::new(),
        }
    }

    pub fn constant(c: BigRational) -> Self {
        RatFn::from_poly(Poly::constant(c))
    }

    pub fn var(v: Var) -> Self {
        RatFn::from_poly(Poly::var(v))
    }

    pub fn denom_factors(&self) -> impl Iterator<Item = (&Poly, &u32)> {
        self.den.iter()
    }

    pub fn denom(&self) -> Poly {
        self.den
            .iter()
            .fold(Poly::one(), |acc, (f, e)| acc.mul(&f.pow(*e)))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut v = self.num.vars();
        for f in self.den.keys() {
            v.extend(f.vars());
        }
        v
    }

    fn cancel(mut self) -> Self {
        if self.num.is_zero() {
            self.den.clear();
            return self;
        }
        let keys: Vec<Poly> = self.den.keys().cloned().collect();
        for f in keys {
            let e = self.den.get_mut(&f).expect("key present");
            while *e > 0 {
                match self.num.div_exact(&f) {
                    Some(q) => {
                        self.num = q;
                        *e -= 1;
                    }
                    None => break,
                }
            }
        }
        self.den.retain(|_, e| *e > 0);
        self
    }

    /// Common refined basis for two denominators and each one's exponents in it.
    fn common_basis(a: &RatFn, b: &RatFn) -> (Vec<Poly>, (BigRational, Vec<u32>), (BigRational, Vec<u32>)) {
        let mut basis: Vec<Poly> = a.den.keys().cloned().collect();
        for k in b.den.keys() {
            if !basis.contains(k) {
                push_refined(&mut basis, k.clone());
            }
        }
        let expand = |r: &RatFn| {
            let mut c = BigRational::one();
            let mut exps = vec![0u32; basis.len()];
            for (f, e) in &r.den {
                let (cf, ex) = match basis.iter().position(|b| b == f) {
                    Some(i) => {
                        let mut ex = vec![0u32; basis.len()];
                        ex[i] = 1;
                        (BigRational::one(), ex)
                    }
                    None => decompose(f, &basis),
                };
                c *= crate::symx::expr::pow_rational(&cf, *e as i32);
                for (slot, x) in exps.iter_mut().zip(ex) {
                    *slot += x * e;
                }
            }
            (c, exps)
        };
        let ea = expand(a);
        let eb = expand(b);
        (basis, ea, eb)
    }

    fn assemble(num: Poly, basis: &[Poly], exps: &[u32]) -> RatFn {
        let den = basis
            .iter()
            .zip(exps)
            .filter(|(_, e)| **e > 0)
            .map(|(f, e)| (f.clone(), *e))
            .collect();
        RatFn { num, den }.cancel()
    }

    fn pow_basis(basis: &[Poly], exps: &[u32]) -> Poly {
        basis
            .iter()
            .zip(exps)
            .fold(Poly::one(), |acc, (f, e)| if *e == 0 { acc } else { acc.mul(&f.pow(*e)) })
    }

    pub fn add(&self, other: &RatFn) -> RatFn {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        if self.den.is_empty() && other.den.is_empty() {
            return RatFn::from_poly(self.num.add(&other.num));
        }
        if self.den == other.den {
            return RatFn {
                num: self.num.add(&other.num),
                den: self.den.clone(),
            }
            .cancel();
        }
        let (basis, (ca, ea), (cb, eb)) = RatFn::common_basis(self, other);
        let d: Vec<u32> = ea.iter().zip(&eb).map(|(x, y)| *x.max(y)).collect();
        let da: Vec<u32> = d.iter().zip(&ea).map(|(x, y)| x - y).collect();
        let db: Vec<u32> = d.iter().zip(&eb).map(|(x, y)| x - y).collect();
        let na = self.num.scale(&ca.recip()).mul(&RatFn::pow_basis(&basis, &da));
        let nb = other.num.scale(&cb.recip()).mul(&RatFn::pow_basis(&basis, &db));
        RatFn::assemble(na.add(&nb), &basis, &d)
    }

    pub fn neg(&self) -> RatFn {
        RatFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &RatFn) -> RatFn {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RatFn) -> RatFn {
        if self.is_zero() || other.is_zero() {
            return RatFn::zero();
        }
        if other.den.is_empty() && self.den.is_empty() {
            return RatFn::from_poly(self.num.mul(&other.num));
        }
        let (basis, (ca, ea), (cb, eb)) = RatFn::common_basis(self, other);
        let d: Vec<u32> = ea.iter().zip(&eb).map(|(x, y)| x + y).collect();
        let num = self.num.mul(&other.num).scale(&(ca * cb).recip());
        RatFn::assemble(num, &basis, &d)
    }

    pub fn inv(&self) -> Result<RatFn, ZeroDivision> {
        if self.num.is_zero() {
            return Err(ZeroDivision);
        }
        let (c, parts) = split_poly(&self.num);
        let mut basis: Vec<Poly> = Vec::new();
        for (p, _) in &parts {
            push_refined(&mut basis, p.clone());
        }
        let mut exps = vec![0u32; basis.len()];
        let mut extra = BigRational::one();
        for (p, e) in &parts {
            let (cf, ex) = decompose(p, &basis);
            extra *= crate::symx::expr::pow_rational(&cf, *e as i32);
            for (slot, x) in exps.iter_mut().zip(ex) {
                *slot += x * e;
            }
        }
        let num = self.denom().scale(&(c * extra).recip());
        Ok(RatFn::assemble(num, &basis, &exps))
    }

    pub fn powi(&self, k: i32) -> Result<RatFn, ZeroDivision> {
        if k < 0 {
            return self.inv()?.powi(-k);
        }
        let k = k as u32;
        Ok(RatFn {
            num: self.num.pow(k),
            den: self.den.iter().map(|(f, e)| (f.clone(), e * k)).collect(),
        })
    }

    pub fn eval(&self, lookup: &dyn Fn(&Symbol) -> Option<f64>) -> Result<f64, SymError> {
        let mut den = 1.0;
        for (f, e) in &self.den {
            den *= f.eval(lookup)?.powi(*e as i32);
        }
        if den == 0.0 {
            return Err(SymError::DivisionByZero);
        }
        let v = self.num.eval(lookup)? / den;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SymError::NonFinite)
        }
    }

    pub fn to_expr(&self) -> Expr {
        let num = self.num.to_expr();
        if self.den.is_empty() {
            return num;
        }
        let den = Expr::product(self.den.iter().map(|(f, e)| f.to_expr().powi(*e as i32)));
        num.div(&den)
    }

    /// Returns `(a, b)` with `self = a*s + b` and neither `a` nor `b`
    /// depending on `s`, if such a split exists.
    pub fn as_linear_in(&self, s: &Symbol) -> Option<(RatFn, RatFn)> {
        if self.den.keys().any(|f| f.depends_on(s)) {
            return None;
        }
        let v = Var::Sym(s.clone());
        let mut a = Poly::zero();
        let mut b = Poly::zero();
        for (m, c) in self.num.terms() {
            if m.0.iter().any(|(w, _)| matches!(w, Var::Atom(..)) && w.depends_on(s)) {
                return None;
            }
            match m.exponent(&v) {
                0 => b.add_term(m.clone(), c.clone()),
                1 => {
                    let rest = m.div(&Mono::var(v.clone())).expect("exponent is one");
                    a.add_term(rest, c.clone());
                }
                _ => return None,
            }
        }
        let den = RatFn {
            num: Poly::one(),
            den: self.den.clone(),
        };
        Some((
            RatFn::from_poly(a).mul(&den),
            RatFn::from_poly(b).mul(&den),
        ))
    }

    /// Coefficients of `self` as a polynomial in the indeterminates that
    /// depend on `xs`, with coefficients free of `xs`. `None` when a
    /// denominator depends on `xs`.
    pub fn coefficients_in(&self, xs: &BTreeSet<Symbol>) -> Option<BTreeMap<Mono, RatFn>> {
        let is_x = |v: &Var| xs.iter().any(|s| v.depends_on(s));
        if self.den.keys().any(|f| f.vars().iter().any(is_x)) {
            return None;
        }
        let mut groups: BTreeMap<Mono, Poly> = BTreeMap::new();
        for (m, c) in self.num.terms() {
            let (xpart, rest): (Vec<_>, Vec<_>) = m.0.iter().cloned().partition(|(v, _)| is_x(v));
            groups
                .entry(Mono(xpart))
                .or_default()
                .add_term(Mono(rest), c.clone());
        }
        let den = RatFn {
            num: Poly::one(),
            den: self.den.clone(),
        };
        Some(
            groups
                .into_iter()
                .map(|(m, p)| (m, RatFn::from_poly(p).mul(&den)))
                .collect(),
        )
    }
}

/// Reciprocal of `e`, inverting product factors separately so that a
/// factored denominator keeps its factorization.
fn to_ratfn_inv(e: &Expr) -> Result<RatFn, ZeroDivision> {
    match e.node() {
        Node::Mul(v) => {
            let mut acc = RatFn::one();
            for t in v {
                acc = acc.mul(&to_ratfn_inv(t)?);
            }
            Ok(acc)
        }
        Node::Pow(a, k) => to_ratfn_inv(a)?.powi(*k),
        Node::Neg(a) => Ok(to_ratfn_inv(a)?.neg()),
        _ => to_ratfn(e)?.inv(),
    }
}

/// Converts an expression into its rational-function normal form.
pub fn to_ratfn(e: &Expr) -> Result<RatFn, ZeroDivision> {
    Ok(match e.node() {
        Node::Num(r) => RatFn::constant(r.clone()),
        Node::Sym(s) => RatFn::var(Var::Sym(s.clone())),
        Node::Add(v) => {
            let mut acc = RatFn::zero();
            for t in v {
                acc = acc.add(&to_ratfn(t)?);
            }
            acc
        }
        Node::Mul(v) => {
            let mut acc = RatFn::one();
            for t in v {
                acc = acc.mul(&to_ratfn(t)?);
                if acc.is_zero() {
                    break;
                }
            }
            acc
        }
        Node::Neg(a) => to_ratfn(a)?.neg(),
        Node::Div(a, b) => to_ratfn(a)?.mul(&to_ratfn_inv(b)?),
        Node::Pow(a, k) => to_ratfn(a)?.powi(*k)?,
        Node::Call(f, arg) => {
            let narg = to_ratfn(arg)?;
            if let Some(c) = narg.as_constant() {
                if c.is_zero() {
                    match f {
                        Func::Sin | Func::Sqrt => return Ok(RatFn::zero()),
                        Func::Cos | Func::Exp => return Ok(RatFn::one()),
                    }
                }
                if c.is_one() && *f == Func::Sqrt {
                    return Ok(RatFn::one());
                }
            }
            RatFn::var(Var::Atom(*f, narg.to_expr()))
        }
    })
}
