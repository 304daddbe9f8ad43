//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients `∂^α f / α!` of a function of `m`
//! variables about a fixed expansion point, for every multi-index with
//! `|α| ≤ d`. Coefficients are stored densely in graded order, so the jet of
//! degree `d' < d` is a prefix of the degree-`d` coefficient vector and
//! truncation is a slice.
//!
//! Differentiating a jet with respect to one of its variables yields a jet of
//! one lower degree; chaining derivative operators therefore consumes the
//! degree budget and runs out with [`GeomError::InsufficientDegree`].

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use crate::error::{GeomError, Result};

/// Largest number of variables a jet may carry.
pub const MAX_VARS: usize = 8;
/// Largest truncation degree supported by the monomial tables.
pub const MAX_DEGREE: usize = 8;

/// Exponent vector of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    /// First-order index `e_slot` in `vars` variables.
    pub fn unit(slot: usize, vars: usize) -> Self {
        let mut e = vec![0; vars];
        e[slot] = 1;
        MultiIndex(e)
    }

    pub fn zero(vars: usize) -> Self {
        MultiIndex(vec![0; vars])
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `α! = Π α_i!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e).map(f64::from).product::<f64>())
            .product()
    }
}

impl From<&[u32]> for MultiIndex {
    fn from(e: &[u32]) -> Self {
        MultiIndex(e.to_vec())
    }
}

fn pack(exps: &[u8]) -> u64 {
    exps.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &e)| acc | (u64::from(e) << (8 * i)))
}

/// Monomial layout and product schedule for a fixed variable count.
pub struct MonomialTable {
    vars: usize,
    exps: Vec<[u8; MAX_VARS]>,
    degree_of: Vec<u8>,
    /// `count_upto[d]` = number of monomials of total degree ≤ d.
    count_upto: Vec<usize>,
    /// `raise[v][k]` = index of `exps[k] + e_v`, `u32::MAX` past the top degree.
    raise: Vec<Vec<u32>>,
    /// Product pairs grouped by result index: pairs for result `k` live in
    /// `pairs[starts[k]..starts[k + 1]]`.
    starts: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    lookup: HashMap<u64, u32>,
}

impl MonomialTable {
    fn build(vars: usize) -> Self {
        let mut exps: Vec<[u8; MAX_VARS]> = Vec::new();
        let mut degree_of = Vec::new();
        let mut count_upto = Vec::with_capacity(MAX_DEGREE + 1);
        for d in 0..=MAX_DEGREE {
            let mut cur = [0u8; MAX_VARS];
            enumerate_degree(vars, d, 0, &mut cur, &mut |e| {
                exps.push(*e);
                degree_of.push(d as u8);
            });
            count_upto.push(exps.len());
        }
        let lookup: HashMap<u64, u32> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (pack(&e[..vars]), i as u32))
            .collect();
        let raise = (0..vars)
            .map(|v| {
                exps.iter()
                    .map(|e| {
                        let mut r = *e;
                        r[v] += 1;
                        lookup.get(&pack(&r[..vars])).copied().unwrap_or(u32::MAX)
                    })
                    .collect()
            })
            .collect();

        let mut starts = Vec::with_capacity(exps.len() + 1);
        let mut pairs = Vec::new();
        for k in &exps {
            starts.push(pairs.len() as u32);
            let mut sub = [0u8; MAX_VARS];
            loop {
                let mut rest = [0u8; MAX_VARS];
                for v in 0..vars {
                    rest[v] = k[v] - sub[v];
                }
                pairs.push((lookup[&pack(&sub[..vars])], lookup[&pack(&rest[..vars])]));
                // odometer over sub ≤ k
                let mut v = 0;
                loop {
                    if v == vars {
                        break;
                    }
                    if sub[v] < k[v] {
                        sub[v] += 1;
                        break;
                    }
                    sub[v] = 0;
                    v += 1;
                }
                if v == vars {
                    break;
                }
            }
        }
        starts.push(pairs.len() as u32);

        MonomialTable {
            vars,
            exps,
            degree_of,
            count_upto,
            raise,
            starts,
            pairs,
            lookup,
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    /// Number of coefficients of a jet truncated at `degree`.
    pub fn len(&self, degree: usize) -> usize {
        self.count_upto[degree]
    }

    fn index_of(&self, exps: &[u32]) -> Option<usize> {
        if exps.len() != self.vars || exps.iter().any(|&e| e > u32::from(u8::MAX)) {
            return None;
        }
        let small: Vec<u8> = exps.iter().map(|&e| e as u8).collect();
        self.lookup.get(&pack(&small)).map(|&i| i as usize)
    }
}

fn enumerate_degree(
    vars: usize,
    remaining: usize,
    slot: usize,
    cur: &mut [u8; MAX_VARS],
    out: &mut impl FnMut(&[u8; MAX_VARS]),
) {
    if vars == 0 {
        if remaining == 0 {
            out(cur);
        }
        return;
    }
    if slot == vars - 1 {
        cur[slot] = remaining as u8;
        out(cur);
        cur[slot] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[slot] = e as u8;
        enumerate_degree(vars, remaining - e, slot + 1, cur, out);
    }
    cur[slot] = 0;
}

/// Handle to the shared monomial table for a given variable count.
#[derive(Clone, Copy)]
pub struct JetSpace {
    table: &'static MonomialTable,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace({} vars)", self.table.vars)
    }
}

impl PartialEq for JetSpace {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.table, other.table)
    }
}

impl JetSpace {
    pub fn new(vars: usize) -> Result<Self> {
        if vars > MAX_VARS {
            return Err(GeomError::TooManyVariables { vars, max: MAX_VARS });
        }
        static TABLES: OnceLock<Mutex<HashMap<usize, &'static MonomialTable>>> = OnceLock::new();
        let mut tables = TABLES
            .get_or_init(|| Mutex::new(HashMap::new()))
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        let table = *tables
            .entry(vars)
            .or_insert_with(|| Box::leak(Box::new(MonomialTable::build(vars))));
        Ok(JetSpace { table })
    }

    pub fn vars(&self) -> usize {
        self.table.vars
    }

    pub fn table(&self) -> &'static MonomialTable {
        self.table
    }

    pub fn constant(&self, value: f64, degree: usize) -> Jet {
        assert!(degree <= MAX_DEGREE, "degree {degree} exceeds kernel budget");
        let mut coeffs = vec![0.0; self.table.len(degree)];
        coeffs[0] = value;
        Jet {
            table: self.table,
            degree,
            coeffs,
        }
    }

    pub fn zero(&self, degree: usize) -> Jet {
        self.constant(0.0, degree)
    }

    /// Jet of the coordinate function `t_slot` expanded about `value`.
    pub fn seed(&self, slot: usize, value: f64, degree: usize) -> Result<Jet> {
        if slot >= self.vars() {
            return Err(GeomError::SlotOutOfRange {
                slot,
                vars: self.vars(),
            });
        }
        if degree == 0 || degree > MAX_DEGREE {
            return Err(GeomError::DegreeOutOfRange { degree, max: MAX_DEGREE });
        }
        let mut j = self.constant(value, degree);
        // first-order monomials follow the constant in graded order
        let idx = self.table.raise[slot][0] as usize;
        j.coeffs[idx] = 1.0;
        Ok(j)
    }
}

/// Seeded variable jet; free-function form of [`JetSpace::seed`].
pub fn jet_seed(slot: usize, value: f64, vars: usize, degree: usize) -> Result<Jet> {
    JetSpace::new(vars)?.seed(slot, value, degree)
}

/// Truncated Taylor polynomial in graded dense storage.
#[derive(Clone)]
pub struct Jet {
    table: &'static MonomialTable,
    degree: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                m.entry(&&self.table.exps[i][..self.table.vars], c);
            }
        }
        m.finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.table, other.table)
            && self.degree == other.degree
            && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn space(&self) -> JetSpace {
        JetSpace { table: self.table }
    }

    pub fn vars(&self) -> usize {
        self.table.vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Value of the underlying function at the expansion point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient at `alpha`; zero above the truncation degree.
    pub fn coeff(&self, alpha: &MultiIndex) -> Option<f64> {
        let idx = self.table.index_of(alpha.exponents())?;
        Some(self.coeffs.get(idx).copied().unwrap_or(0.0))
    }

    /// Iterator over `(exponents, coefficient)` for every stored monomial.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> + '_ {
        let vars = self.table.vars;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (&self.table.exps[i][..vars], c))
    }

    /// Mixed partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &MultiIndex) -> Result<f64> {
        if alpha.exponents().len() != self.vars() {
            return Err(GeomError::SlotOutOfRange {
                slot: alpha.exponents().len(),
                vars: self.vars(),
            });
        }
        if alpha.order() > self.degree {
            return Err(GeomError::InsufficientDegree {
                needed: alpha.order(),
                available: self.degree,
            });
        }
        let c = self.coeff(alpha).unwrap_or(0.0);
        Ok(c * alpha.factorial())
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Copy truncated to `degree` (no-op when already at or below it).
    pub fn truncate(&self, degree: usize) -> Jet {
        if degree >= self.degree {
            return self.clone();
        }
        Jet {
            table: self.table,
            degree,
            coeffs: self.coeffs[..self.table.len(degree)].to_vec(),
        }
    }

    fn check_space(&self, other: &Jet) {
        assert!(
            std::ptr::eq(self.table, other.table),
            "jets live in different spaces ({} vs {} vars)",
            self.table.vars,
            other.table.vars
        );
    }

    /// `∂f/∂t_var`, one degree lower.
    pub fn deriv(&self, var: usize) -> Result<Jet> {
        if var >= self.vars() {
            return Err(GeomError::SlotOutOfRange {
                slot: var,
                vars: self.vars(),
            });
        }
        if self.degree == 0 {
            return Err(GeomError::InsufficientDegree {
                needed: 1,
                available: 0,
            });
        }
        let d = self.degree - 1;
        let n = self.table.len(d);
        let raise = &self.table.raise[var];
        let coeffs = (0..n)
            .map(|k| {
                let r = raise[k] as usize;
                f64::from(self.table.exps[k][var] + 1) * self.coeffs[r]
            })
            .collect();
        Ok(Jet {
            table: self.table,
            degree: d,
            coeffs,
        })
    }

    /// Product with the coordinate function `t_slot` expanded about `value`.
    /// Same result as multiplying by a seed, at linear cost.
    pub fn mul_coordinate(&self, slot: usize, value: f64) -> Jet {
        let mut out: Vec<f64> = self.coeffs.iter().map(|c| c * value).collect();
        if self.degree > 0 {
            let raise = &self.table.raise[slot];
            for k in 0..self.table.len(self.degree - 1) {
                out[raise[k] as usize] += self.coeffs[k];
            }
        }
        Jet {
            table: self.table,
            degree: self.degree,
            coeffs: out,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            table: self.table,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += s * other`, truncating to the lower degree.
    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        self.check_space(other);
        if other.degree < self.degree {
            self.degree = other.degree;
            self.coeffs.truncate(self.table.len(other.degree));
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Truncated Cauchy product.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_space(other);
        let degree = self.degree.min(other.degree);
        let n = self.table.len(degree);
        if self.is_constant() {
            return other.truncate(degree).scale(self.coeffs[0]);
        }
        if other.is_constant() {
            return self.truncate(degree).scale(other.coeffs[0]);
        }
        let a = &self.coeffs;
        let b = &other.coeffs;
        let starts = &self.table.starts;
        let pairs = &self.table.pairs;
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = 0.0;
            for &(i, j) in &pairs[starts[k] as usize..starts[k + 1] as usize] {
                acc += a[i as usize] * b[j as usize];
            }
            coeffs.push(acc);
        }
        Jet {
            table: self.table,
            degree,
            coeffs,
        }
    }

    /// Composition `g(self)` for a univariate `g` whose Taylor coefficients
    /// about the constant term are `c[0..=degree]`.
    fn compose(&self, c: &[f64]) -> Jet {
        let d = self.degree;
        let mut tail = self.clone();
        tail.coeffs[0] = 0.0;
        let mut acc = self.space().constant(c[d], d);
        for j in (0..d).rev() {
            acc = acc.mul_jet(&tail);
            acc.coeffs[0] += c[j];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 == 0.0 || !a0.is_finite() {
            return Err(GeomError::ZeroConstantTerm);
        }
        let c: Vec<f64> = (0..=self.degree)
            .map(|j| (-1f64).powi(j as i32) / a0.powi(j as i32 + 1))
            .collect();
        Ok(self.compose(&c))
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.mul_jet(&other.recip()?))
    }

    fn require_positive(&self, op: &'static str) -> Result<f64> {
        let a0 = self.value();
        if a0 > 0.0 && a0.is_finite() {
            Ok(a0)
        } else {
            Err(GeomError::NonPositiveConstantTerm { op, value: a0 })
        }
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a0 = self.require_positive("sqrt")?;
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut binom = 1.0;
        for j in 0..=self.degree {
            c.push(binom * a0.powf(0.5 - j as f64));
            binom *= (0.5 - j as f64) / (j as f64 + 1.0);
        }
        Ok(self.compose(&c))
    }

    pub fn ln(&self) -> Result<Jet> {
        let a0 = self.require_positive("ln")?;
        let c: Vec<f64> = (0..=self.degree)
            .map(|j| {
                if j == 0 {
                    a0.ln()
                } else {
                    let s = if j % 2 == 1 { 1.0 } else { -1.0 };
                    s / (j as f64 * a0.powi(j as i32))
                }
            })
            .collect();
        Ok(self.compose(&c))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut fact = 1.0;
        for j in 0..=self.degree {
            if j > 0 {
                fact *= j as f64;
            }
            c.push(e / fact);
        }
        self.compose(&c)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    fn trig(&self, phase: usize) -> Jet {
        let (s, co) = self.value().sin_cos();
        let cycle = [s, co, -s, -co];
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut fact = 1.0;
        for j in 0..=self.degree {
            if j > 0 {
                fact *= j as f64;
            }
            c.push(cycle[(j + phase) % 4] / fact);
        }
        self.compose(&c)
    }

    /// Real power, computed as `exp(r ln a)`.
    pub fn powf(&self, r: f64) -> Result<Jet> {
        self.require_positive("pow")?;
        Ok(self.ln()?.scale(r).exp())
    }

    /// Integer power by repeated squaring; negative powers go through `recip`.
    pub fn powi(&self, k: i32) -> Result<Jet> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = self.space().constant(1.0, self.degree);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_jet(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul_jet(&sq);
            }
        }
        Ok(acc)
    }

    /// Re-expresses a jet in a larger space, sending variable `v` to
    /// `var_map[v]`. Degree is preserved.
    pub fn embed(&self, target: JetSpace, var_map: &[usize]) -> Result<Jet> {
        assert_eq!(var_map.len(), self.vars());
        let t = target.table;
        let mut out = target.zero(self.degree);
        let mut e = vec![0u32; t.vars];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            e.iter_mut().for_each(|x| *x = 0);
            for (v, &dst) in var_map.iter().enumerate() {
                if dst >= t.vars {
                    return Err(GeomError::SlotOutOfRange {
                        slot: dst,
                        vars: t.vars,
                    });
                }
                e[dst] += u32::from(self.table.exps[k][v]);
            }
            let idx = t.index_of(&e).expect("embedded monomial within degree");
            out.coeffs[idx] += c;
        }
        Ok(out)
    }

    /// Degree of the monomial stored at position `k`.
    pub fn monomial_degree(&self, k: usize) -> usize {
        self.table.degree_of[k] as usize
    }
}

/// Binary jet operation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Unary function selector for [`jet_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetFn {
    Sqrt,
    Ln,
    Exp,
    Pow(f64),
}

pub fn jet_arith(a: &Jet, b: &Jet, op: ArithOp) -> Result<Jet> {
    if a.vars() != b.vars() {
        return Err(GeomError::SpaceMismatch {
            left: a.vars(),
            right: b.vars(),
        });
    }
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.checked_div(b)?,
    })
}

pub fn jet_map(a: &Jet, f: JetFn) -> Result<Jet> {
    match f {
        JetFn::Sqrt => a.sqrt(),
        JetFn::Ln => a.ln(),
        JetFn::Exp => Ok(a.exp()),
        JetFn::Pow(r) => a.powf(r),
    }
}

pub fn jet_partial(a: &Jet, alpha: &MultiIndex) -> Result<f64> {
    a.partial(alpha)
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Add<Jet> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub<Jet> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, -1.0);
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] -= rhs;
        out
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn graded_prefix_layout() {
        let s = JetSpace::new(2).unwrap();
        let t = s.table();
        assert_eq!(t.len(0), 1);
        assert_eq!(t.len(1), 3);
        assert_eq!(t.len(2), 6);
        for k in 0..t.len(3) {
            let d = t.degree_of[k] as usize;
            assert!(k >= if d == 0 { 0 } else { t.len(d - 1) });
        }
    }

    #[test]
    fn seed_coefficients() {
        let a = jet_seed(0, 2.0, 2, 2).unwrap();
        assert_eq!(a.coeff(&MultiIndex::zero(2)), Some(2.0));
        assert_eq!(a.coeff(&MultiIndex::unit(0, 2)), Some(1.0));
        assert_eq!(a.coeff(&MultiIndex::unit(1, 2)), Some(0.0));
        let nz = a.coeffs().iter().filter(|c| **c != 0.0).count();
        assert_eq!(nz, 2);

        let b = jet_seed(1, 0.0, 2, 3).unwrap();
        assert_eq!(b.coeffs().iter().filter(|c| **c != 0.0).count(), 1);
        assert_eq!(b.coeff(&MultiIndex::unit(1, 2)), Some(1.0));

        let c = jet_seed(0, 5.0, 1, 2).unwrap();
        assert_eq!(c.partial(&MultiIndex::unit(0, 1)).unwrap(), 1.0);
    }

    #[test]
    fn seed_slot_out_of_range() {
        assert!(matches!(
            jet_seed(2, 0.0, 2, 2),
            Err(GeomError::SlotOutOfRange { .. })
        ));
    }

    #[test]
    fn product_and_quotient_identities() {
        let s = JetSpace::new(1).unwrap();
        let u = s.seed(0, 0.0, 2).unwrap();
        let p = &u + 1.0;
        let q = &(-&u) + 1.0;
        let prod = &p * &q;
        assert_eq!(prod.coeffs(), &[1.0, 0.0, -1.0]);

        let ratio = p.checked_div(&p).unwrap();
        assert!(approx(ratio.value(), 1.0, 1e-15));
        assert!(ratio.coeffs()[1..].iter().all(|c| c.abs() < 1e-15));

        assert!(matches!(
            p.checked_div(&u),
            Err(GeomError::ZeroConstantTerm)
        ));
    }

    #[test]
    fn sqrt_binomial_series() {
        let s = JetSpace::new(1).unwrap();
        let u = s.seed(0, 0.0, 2).unwrap();
        let a = &u.scale(2.0) + 1.0;
        let r = a.sqrt().unwrap();
        assert!(approx(r.coeffs()[0], 1.0, 1e-15));
        assert!(approx(r.coeffs()[1], 1.0, 1e-15));
        assert!(approx(r.coeffs()[2], -0.5, 1e-15));
        let neg = &u - 1.0;
        assert!(matches!(
            neg.ln(),
            Err(GeomError::NonPositiveConstantTerm { op: "ln", .. })
        ));
        assert!(neg.sqrt().is_err());
        assert!(neg.powf(0.3).is_err());
    }

    #[test]
    fn partial_examples() {
        let s = JetSpace::new(2).unwrap();
        let u = s.seed(0, 1.0, 3).unwrap();
        let sq = &u * &u;
        assert!(approx(sq.partial(&MultiIndex::new(vec![2, 0])).unwrap(), 2.0, 1e-15));

        let u0 = s.seed(0, 0.0, 2).unwrap();
        let v0 = s.seed(1, 0.0, 2).unwrap();
        let uv = &u0 * &v0;
        assert_eq!(uv.partial(&MultiIndex::new(vec![1, 1])).unwrap(), 1.0);
        assert!(matches!(
            uv.partial(&MultiIndex::new(vec![2, 1])),
            Err(GeomError::InsufficientDegree { .. })
        ));

        // (1+u)^5: third derivative at 0 is 5*4*3
        let one = JetSpace::new(1).unwrap();
        let w = &one.seed(0, 0.0, 4).unwrap() + 1.0;
        let p5 = w.powi(5).unwrap();
        assert!(approx(p5.partial(&MultiIndex::new(vec![3])).unwrap(), 60.0, 1e-14));
    }

    #[test]
    fn deriv_lowers_degree() {
        let s = JetSpace::new(2).unwrap();
        let x = s.seed(0, 0.5, 3).unwrap();
        let y = s.seed(1, -0.25, 3).unwrap();
        let f = &(&x * &x) * &y; // x^2 y
        let fx = f.deriv(0).unwrap();
        assert_eq!(fx.degree(), 2);
        assert!(approx(fx.value(), 2.0 * 0.5 * -0.25, 1e-15));
        let fxy = fx.deriv(1).unwrap();
        assert!(approx(fxy.value(), 1.0, 1e-15));
        let c = s.constant(1.0, 0);
        assert!(matches!(c.deriv(0), Err(GeomError::InsufficientDegree { .. })));
    }

    #[test]
    fn mul_coordinate_matches_seed_product() {
        let s = JetSpace::new(3).unwrap();
        let a = s.seed(0, 0.3, 4).unwrap().exp();
        let b = &a * &s.seed(2, 1.7, 4).unwrap();
        let c = a.mul_coordinate(2, 1.7);
        for (p, q) in b.coeffs().iter().zip(c.coeffs()) {
            assert!(approx(*p, *q, 1e-15));
        }
    }

    #[test]
    fn embed_into_larger_space() {
        let small = JetSpace::new(2).unwrap();
        let big = JetSpace::new(4).unwrap();
        let f = &small.seed(0, 0.2, 3).unwrap() * &small.seed(1, 0.4, 3).unwrap();
        let g = f.embed(big, &[0, 1]).unwrap();
        let direct = &big.seed(0, 0.2, 3).unwrap() * &big.seed(1, 0.4, 3).unwrap();
        assert_eq!(g, direct);
    }

    #[test]
    fn trig_pythagoras() {
        let s = JetSpace::new(2).unwrap();
        let a = &s.seed(0, 0.4, 5).unwrap() * &s.seed(1, 1.1, 5).unwrap();
        let one = &(&a.sin() * &a.sin()) + &(&a.cos() * &a.cos());
        assert!(approx(one.value(), 1.0, 1e-15));
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
    }
}
