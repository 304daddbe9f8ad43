//! Closed-form metrics and sprays used as fixtures, and a deterministic
//! sampler of admissible tangent points.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};
use crate::spray::{fundamental_tensor, FinslerMetric, MetricSpray, Spray, TangentPoint};

fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = &a[0] * &b[0];
    for (p, q) in a.iter().zip(b).skip(1) {
        acc += &(p * q);
    }
    acc
}

fn scalar_jets(x: &[f64]) -> Vec<Jet> {
    let s = JetSpace::new(0).expect("0-variable space");
    x.iter().map(|&v| s.constant(v, 0)).collect()
}

/// The matrix `a_ij(x)` of a Riemannian metric.
pub enum AlphaMatrix {
    /// `a_ij = c(x) δ_ij`
    Conformal(Jet),
    Full(Vec<Jet>),
}

impl AlphaMatrix {
    pub fn quadratic(&self, y: &[Jet]) -> Jet {
        match self {
            AlphaMatrix::Conformal(c) => c * &dot(y, y),
            AlphaMatrix::Full(a) => {
                let n = y.len();
                let mut acc: Option<Jet> = None;
                for i in 0..n {
                    let row = dot(&a[i * n..(i + 1) * n], y);
                    let t = &row * &y[i];
                    match acc.as_mut() {
                        None => acc = Some(t),
                        Some(s) => *s += &t,
                    }
                }
                acc.expect("n ≥ 1")
            }
        }
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        match self {
            AlphaMatrix::Conformal(c) => {
                let mut a = vec![0.0; n * n];
                for i in 0..n {
                    a[i * n + i] = c.value();
                }
                a
            }
            AlphaMatrix::Full(a) => a.iter().map(Jet::value).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RiemannianKind {
    Flat,
    /// Flat plane in polar coordinates `(r, φ)`, `r > 0`.
    FlatPolar,
    /// Unit sphere in stereographic coordinates, `a = 4/(1+|x|²)² δ`.
    RoundSphere,
    /// Poincaré ball, `a = 4/(1−|x|²)² δ`.
    HyperbolicBall,
    /// `a = e^{2λ(x)} δ`
    Conformal(Expr),
    /// Arbitrary symmetric `a_ij(x)`, row-major.
    General(Vec<Expr>),
}

#[derive(Debug, Clone)]
pub struct RiemannianMetric {
    pub dim: usize,
    pub kind: RiemannianKind,
}

impl RiemannianMetric {
    pub fn matrix(&self, x: &[Jet]) -> Result<AlphaMatrix> {
        let proto = &x[0];
        let one = proto.space().constant(1.0, proto.degree());
        Ok(match &self.kind {
            RiemannianKind::Flat => AlphaMatrix::Conformal(one),
            RiemannianKind::FlatPolar => {
                let zero = proto.space().zero(proto.degree());
                AlphaMatrix::Full(vec![one, zero.clone(), zero, &x[0] * &x[0]])
            }
            RiemannianKind::RoundSphere => {
                let d = dot(x, x) + 1.0;
                AlphaMatrix::Conformal(d.powi(-2)?.scale(4.0))
            }
            RiemannianKind::HyperbolicBall => {
                let d = -dot(x, x) + 1.0;
                AlphaMatrix::Conformal(d.powi(-2)?.scale(4.0))
            }
            RiemannianKind::Conformal(lambda) => {
                AlphaMatrix::Conformal(lambda.eval_jet(x)?.scale(2.0).exp())
            }
            RiemannianKind::General(a) => {
                AlphaMatrix::Full(a.iter().map(|e| e.eval_jet(x)).collect::<Result<_>>()?)
            }
        })
    }

    pub fn matrix_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.matrix(&scalar_jets(x))?.values(self.dim))
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            RiemannianKind::FlatPolar | RiemannianKind::RoundSphere if self.dim != 2 => {
                Err(GeomError::InvalidParams(format!(
                    "{} is two-dimensional",
                    self.label()
                )))
            }
            RiemannianKind::Conformal(e) => e.check_dim(self.dim),
            RiemannianKind::General(a) => {
                if a.len() != self.dim * self.dim {
                    return Err(GeomError::InvalidParams(format!(
                        "riemannian matrix needs {} entries, got {}",
                        self.dim * self.dim,
                        a.len()
                    )));
                }
                for e in a {
                    e.check_dim(self.dim)?;
                }
                for i in 0..self.dim {
                    for j in 0..i {
                        if a[i * self.dim + j] != a[j * self.dim + i] {
                            return Err(GeomError::InvalidParams(
                                "riemannian matrix must be symmetric".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl FinslerMetric for RiemannianMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        match &self.kind {
            RiemannianKind::Flat => format!("euclidean({})", self.dim),
            RiemannianKind::FlatPolar => "flat-polar(2)".into(),
            RiemannianKind::RoundSphere => "round-sphere(2)".into(),
            RiemannianKind::HyperbolicBall => format!("hyperbolic-ball({})", self.dim),
            RiemannianKind::Conformal(l) => format!("conformal-flat({};lambda={l})", self.dim),
            RiemannianKind::General(a) => {
                let s: Vec<String> = a.iter().map(|e| e.to_string()).collect();
                format!("riemannian({};a={})", self.dim, s.join(","))
            }
        }
    }

    fn admissible(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.kind {
            RiemannianKind::FlatPolar => x[0] > 0.0,
            RiemannianKind::HyperbolicBall => x.iter().map(|v| v * v).sum::<f64>() < 1.0,
            RiemannianKind::General(_) | RiemannianKind::Conformal(_) => self
                .matrix_values(x)
                .map(|a| a.iter().all(|v| v.is_finite()))
                .unwrap_or(false),
            _ => true,
        }
    }

    fn norm(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        self.norm_squared(x, y)?.sqrt()
    }

    fn norm_squared(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        Ok(self.matrix(x)?.quadratic(y))
    }

    fn is_riemannian(&self) -> bool {
        true
    }
}

/// `F = α + β` with `α` Riemannian and `β = b_i(x) y^i`, where
/// `b_i(x) = b0_i + Σ_j bx_ij x^j`.
#[derive(Debug, Clone)]
pub struct RandersMetric {
    pub alpha: RiemannianMetric,
    pub b0: Vec<f64>,
    /// Row-major `n × n`.
    pub bx: Vec<f64>,
}

impl RandersMetric {
    pub fn b_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let n = self.alpha.dim;
        (0..n)
            .map(|i| {
                let mut acc = x[0].space().constant(self.b0[i], x[0].degree());
                for (j, xj) in x.iter().enumerate() {
                    let c = self.bx[i * n + j];
                    if c != 0.0 {
                        acc.add_scaled(xj, c);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn b_values(&self, x: &[f64]) -> Vec<f64> {
        let n = self.alpha.dim;
        (0..n)
            .map(|i| self.b0[i] + (0..n).map(|j| self.bx[i * n + j] * x[j]).sum::<f64>())
            .collect()
    }

    /// `‖β‖_α` at `x`.
    pub fn b_norm(&self, x: &[f64]) -> Result<f64> {
        let n = self.alpha.dim;
        let a = self.alpha.matrix_values(x)?;
        let l = crate::spray::cholesky(&a, n)?;
        // ‖b‖² = bᵀ a⁻¹ b = |L⁻¹ b|²
        let b = self.b_values(x);
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s / l[i * n + i];
        }
        Ok(z.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Closed form of `ln σ_BH`:
    /// `σ_BH = (1 − ‖β‖²_α)^{(n+1)/2} √det a`.
    pub fn bh_ln_sigma(&self, x: &[Jet]) -> Result<Jet> {
        let n = self.alpha.dim;
        let b = self.b_jets(x);
        let (b2, ln_det) = match self.alpha.matrix(x)? {
            AlphaMatrix::Conformal(c) => (dot(&b, &b).checked_div(&c)?, c.ln()?.scale(n as f64)),
            AlphaMatrix::Full(a) => {
                let z = crate::spray::solve_jets(a.clone(), b.clone(), n)?;
                (dot(&b, &z), ln_det_spd(a, n)?)
            }
        };
        let one = x[0].space().constant(1.0, x[0].degree());
        Ok((&one - &b2).ln()?.scale((n as f64 + 1.0) / 2.0) + ln_det.scale(0.5))
    }
}

/// `ln det a` of a positive-definite jet matrix by elimination without
/// pivoting.
fn ln_det_spd(mut a: Vec<Jet>, n: usize) -> Result<Jet> {
    let mut acc: Option<Jet> = None;
    for c in 0..n {
        let piv = a[c * n + c].clone();
        let inv = piv.recip()?;
        for r in c + 1..n {
            let f = &a[r * n + c] * &inv;
            for k in c..n {
                let t = &f * &a[c * n + k];
                a[r * n + k] -= &t;
            }
        }
        let l = piv.ln()?;
        acc = Some(match acc {
            None => l,
            Some(s) => s + l,
        });
    }
    Ok(acc.expect("n ≥ 1"))
}

impl FinslerMetric for RandersMetric {
    fn dim(&self) -> usize {
        self.alpha.dim
    }

    fn label(&self) -> String {
        let fmt_list = |v: &[f64]| {
            v.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "randers(alpha={};b={};bx={})",
            self.alpha.label(),
            fmt_list(&self.b0),
            fmt_list(&self.bx)
        )
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.alpha.admissible(x) && self.b_norm(x).map(|b| b < 1.0).unwrap_or(false)
    }

    fn norm(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let alpha = self.alpha.norm(x, y)?;
        let beta = dot(&self.b_jets(x), y);
        Ok(alpha + beta)
    }
}

/// Funk metric of the unit ball.
#[derive(Debug, Clone)]
pub struct FunkMetric {
    pub dim: usize,
}

impl FinslerMetric for FunkMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        format!("funk({})", self.dim)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().map(|v| v * v).sum::<f64>() < 1.0
    }

    fn norm(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let xx = dot(x, x);
        let xy = dot(x, y);
        let yy = dot(y, y);
        let one_minus = -&xx + 1.0;
        let root = (&one_minus * &yy + &xy * &xy).sqrt()?;
        (root + xy).checked_div(&one_minus)
    }
}

/// `F = (α₁⁴ + 2c α₁²α₂² + α₂⁴)^{1/4}` on a product of two Riemannian
/// factors.
#[derive(Debug, Clone)]
pub struct FourthRootMetric {
    pub first: RiemannianMetric,
    pub second: RiemannianMetric,
    pub c: f64,
}

impl FourthRootMetric {
    fn split<'a>(&self, v: &'a [Jet]) -> (&'a [Jet], &'a [Jet]) {
        v.split_at(self.first.dim)
    }
}

impl FinslerMetric for FourthRootMetric {
    fn dim(&self) -> usize {
        self.first.dim + self.second.dim
    }

    fn label(&self) -> String {
        format!(
            "fourth-root({}+{};c={})",
            self.first.label(),
            self.second.label(),
            self.c
        )
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.first.admissible(&x[..self.first.dim])
            && self.second.admissible(&x[self.first.dim..])
    }

    fn norm(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        self.norm_squared(x, y)?.sqrt()
    }

    fn norm_squared(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let (x1, x2) = self.split(x);
        let (y1, y2) = self.split(y);
        let a1 = self.first.norm_squared(x1, y1)?;
        let a2 = self.second.norm_squared(x2, y2)?;
        let quartic = &(&a1 * &a1) + &(&a2 * &a2);
        let mixed = &a1 * &a2;
        let mut p = quartic;
        p.add_scaled(&mixed, 2.0 * self.c);
        p.sqrt()
    }
}

/// Square metric `F = (α + β)²/α` with
/// `α = (1+4|x|²) sqrt(((1+4|x|²)|y|² − 4⟨x,y⟩^k)/(1+4|x|²))`, `β = 2⟨x,y⟩`,
/// where `k = 2` when `squared`, `k = 1` otherwise.
#[derive(Debug, Clone)]
pub struct SquareMetric {
    pub dim: usize,
    pub squared: bool,
}

impl FinslerMetric for SquareMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        format!("square-metric({};squared={})", self.dim, self.squared)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.len() == self.dim
    }

    fn norm(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let s = dot(x, x).scale(4.0) + 1.0;
        let xy = dot(x, y);
        let inner_term = if self.squared { &xy * &xy } else { xy.clone() };
        let mut inner = &s * &dot(y, y);
        inner.add_scaled(&inner_term, -4.0);
        let alpha = &s * &inner.checked_div(&s)?.sqrt()?;
        let beta = xy.scale(2.0);
        let sum = &alpha + &beta;
        (&sum * &sum).checked_div(&alpha)
    }
}

/// `G̃^i = G^i + (a_m(x) y^m) y^i` for a one-form `a`.
#[derive(Debug, Clone)]
pub struct PerturbedSpray {
    pub base: Arc<dyn Spray>,
    pub oneform: Vec<Expr>,
}

impl Spray for PerturbedSpray {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn label(&self) -> String {
        let a: Vec<String> = self.oneform.iter().map(|e| e.to_string()).collect();
        format!("projective-perturbation({};a={})", self.base.label(), a.join(";"))
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.base.admissible(x)
    }

    fn coefficients(&self, p: &TangentPoint, degree: usize) -> Result<Vec<Jet>> {
        let n = p.dim();
        let g = self.base.coefficients(p, degree)?;
        let s = crate::spray::seeds(p, degree)?;
        let mut proj = s.space.zero(degree);
        for (m, e) in self.oneform.iter().enumerate() {
            proj += &e.eval_jet(&s.x)?.mul_coordinate(n + m, p.y[m]);
        }
        Ok(g.into_iter()
            .enumerate()
            .map(|(i, gi)| gi + proj.mul_coordinate(n + i, p.y[i]))
            .collect())
    }
}

/// Chart of a factor metric in the fourth-root family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorChart {
    Cartesian,
    Polar,
}

/// Declarative description of a catalog fixture.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Euclidean { dim: usize },
    RoundSphere,
    HyperbolicBall { dim: usize },
    ConformalFlat { dim: usize, lambda: Expr },
    FlatPolar,
    Riemannian { dim: usize, a: Vec<Expr> },
    Randers { alpha: Box<MetricSpec>, b0: Vec<f64>, bx: Vec<f64> },
    Funk { dim: usize },
    FourthRoot { n1: usize, n2: usize, c: f64, charts: (FactorChart, FactorChart) },
    Square { dim: usize, squared: bool },
    ProjectivePerturbation { base: Box<MetricSpec>, oneform: Vec<Expr> },
}

/// A built fixture: either a metric (with its geodesic spray) or a bare spray.
#[derive(Debug, Clone)]
pub enum Built {
    Metric(Arc<dyn FinslerMetric>),
    Spray(Arc<dyn Spray>),
}

impl Built {
    pub fn spray(&self) -> Arc<dyn Spray> {
        match self {
            Built::Metric(m) => Arc::new(MetricSpray::new(m.clone())),
            Built::Spray(s) => s.clone(),
        }
    }

    pub fn metric(&self) -> Option<Arc<dyn FinslerMetric>> {
        match self {
            Built::Metric(m) => Some(m.clone()),
            Built::Spray(_) => None,
        }
    }
}

/// Region of base points the sampler draws from.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleBox {
    Ball { center: Vec<f64>, radius: f64 },
    Cube { lo: Vec<f64>, hi: Vec<f64> },
}

impl SampleBox {
    pub fn ball(dim: usize, radius: f64) -> SampleBox {
        SampleBox::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }

    pub fn cube(dim: usize, half: f64) -> SampleBox {
        SampleBox::Cube {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SampleBox::Ball { center, .. } => center.len(),
            SampleBox::Cube { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SampleBox::Ball { center, radius } => {
                x.iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    < radius * radius
            }
            SampleBox::Cube { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h),
        }
    }

    fn center(&self) -> Vec<f64> {
        match self {
            SampleBox::Ball { center, .. } => center.clone(),
            SampleBox::Cube { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    /// Parses `ball:R`, `ball:R@c1,c2,..`, `cube:H` or `cube:lo:hi`.
    pub fn parse(s: &str, dim: usize) -> Result<SampleBox> {
        let bad = || GeomError::InvalidParams(format!("bad box {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "ball" => {
                let (r, c) = match rest.split_once('@') {
                    Some((r, c)) => (r, Some(c)),
                    None => (rest, None),
                };
                let radius: f64 = r.trim().parse().map_err(|_| bad())?;
                let center = match c {
                    Some(c) => parse_list(c)?,
                    None => vec![0.0; dim],
                };
                if center.len() != dim || !(radius > 0.0) {
                    return Err(bad());
                }
                Ok(SampleBox::Ball { center, radius })
            }
            "cube" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let nums: Vec<f64> = parts
                    .iter()
                    .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                let (lo, hi) = match nums.as_slice() {
                    [h] => (-h.abs(), h.abs()),
                    [l, h] if l < h => (*l, *h),
                    _ => return Err(bad()),
                };
                Ok(SampleBox::Cube {
                    lo: vec![lo; dim],
                    hi: vec![hi; dim],
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SampleBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleBox::Ball { center, radius } => {
                if center.iter().all(|c| *c == 0.0) {
                    write!(f, "ball:{radius}")
                } else {
                    let c: Vec<String> = center.iter().map(|v| v.to_string()).collect();
                    write!(f, "ball:{radius}@{}", c.join(","))
                }
            }
            SampleBox::Cube { lo, hi } => {
                let l: Vec<String> = lo.iter().map(|v| v.to_string()).collect();
                let h: Vec<String> = hi.iter().map(|v| v.to_string()).collect();
                write!(f, "cube:[{}]:[{}]", l.join(","), h.join(","))
            }
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| GeomError::InvalidParams(format!("bad number {p:?}")))
        })
        .collect()
}

fn parse_matrix(s: &str, n: usize) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_list).collect::<Result<_>>()?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(GeomError::InvalidParams(format!(
            "matrix {s:?} is not {n}×{n}"
        )));
    }
    Ok(rows.concat())
}

/// Family names with their parameter keys and defaults.
pub struct FamilyInfo {
    pub name: &'static str,
    pub kind: &'static str,
    pub params: &'static [(&'static str, &'static str)],
}

pub fn families() -> Vec<FamilyInfo> {
    vec![
        FamilyInfo { name: "euclidean", kind: "metric", params: &[("dim", "3")] },
        FamilyInfo { name: "round-sphere", kind: "metric", params: &[] },
        FamilyInfo { name: "hyperbolic-ball", kind: "metric", params: &[("dim", "2|3")] },
        FamilyInfo {
            name: "conformal-flat-2d",
            kind: "metric",
            params: &[("dim", "2"), ("lambda", "x1^2")],
        },
        FamilyInfo { name: "flat-polar", kind: "metric", params: &[] },
        FamilyInfo {
            name: "riemannian",
            kind: "metric",
            params: &[("dim", "2"), ("a", "row-major expressions, rows ';' columns ','")],
        },
        FamilyInfo {
            name: "randers",
            kind: "metric",
            params: &[
                ("dim", "3"),
                ("alpha", "conformal-flat-2d|euclidean|hyperbolic-ball|round-sphere"),
                ("lambda", "conformal exponent of alpha"),
                ("b", "b0 components"),
                ("bx", "linear part of b, rows ';'"),
            ],
        },
        FamilyInfo { name: "funk", kind: "metric", params: &[("dim", "3")] },
        FamilyInfo {
            name: "fourth-root",
            kind: "metric",
            params: &[
                ("n1", "2"),
                ("n2", "2"),
                ("c", "0.5"),
                ("chart1", "cartesian|polar"),
                ("chart2", "cartesian|polar"),
            ],
        },
        FamilyInfo {
            name: "square-metric",
            kind: "metric",
            params: &[("dim", "3"), ("squared", "true")],
        },
        FamilyInfo {
            name: "projective-perturbation",
            kind: "spray",
            params: &[
                ("base", "any metric family; its params use the prefix base."),
                ("oneform", "a_1;a_2;..."),
            ],
        },
    ]
}

impl MetricSpec {
    pub fn family(&self) -> &'static str {
        match self {
            MetricSpec::Euclidean { .. } => "euclidean",
            MetricSpec::RoundSphere => "round-sphere",
            MetricSpec::HyperbolicBall { .. } => "hyperbolic-ball",
            MetricSpec::ConformalFlat { .. } => "conformal-flat-2d",
            MetricSpec::FlatPolar => "flat-polar",
            MetricSpec::Riemannian { .. } => "riemannian",
            MetricSpec::Randers { .. } => "randers",
            MetricSpec::Funk { .. } => "funk",
            MetricSpec::FourthRoot { .. } => "fourth-root",
            MetricSpec::Square { .. } => "square-metric",
            MetricSpec::ProjectivePerturbation { .. } => "projective-perturbation",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::Euclidean { dim }
            | MetricSpec::HyperbolicBall { dim }
            | MetricSpec::ConformalFlat { dim, .. }
            | MetricSpec::Riemannian { dim, .. }
            | MetricSpec::Funk { dim }
            | MetricSpec::Square { dim, .. } => *dim,
            MetricSpec::RoundSphere | MetricSpec::FlatPolar => 2,
            MetricSpec::Randers { alpha, .. } => alpha.dim(),
            MetricSpec::FourthRoot { n1, n2, .. } => n1 + n2,
            MetricSpec::ProjectivePerturbation { base, .. } => base.dim(),
        }
    }

    pub fn conformal_flat_2d() -> MetricSpec {
        MetricSpec::ConformalFlat {
            dim: 2,
            lambda: Expr::parse("x1^2").expect("literal"),
        }
    }

    /// A Randers metric with non-closed, position-dependent `β` over a
    /// conformally flat `α`.
    pub fn generic_randers(dim: usize) -> MetricSpec {
        let lambda = match dim {
            2 => "0.1*x1*x2",
            _ => "0.1*x1*x2 - 0.05*x3",
        };
        let b0: Vec<f64> = [0.2, -0.1, 0.15, 0.05][..dim].to_vec();
        let pattern = [
            [0.0, 0.3, 0.0, 0.1],
            [-0.1, 0.0, 0.2, 0.0],
            [0.1, -0.2, 0.05, 0.0],
            [0.0, 0.1, 0.0, -0.1],
        ];
        let bx = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| pattern[i][j]))
            .collect();
        MetricSpec::Randers {
            alpha: Box::new(MetricSpec::ConformalFlat {
                dim,
                lambda: Expr::parse(lambda).expect("literal"),
            }),
            b0,
            bx,
        }
    }

    pub fn fourth_root(c: f64) -> MetricSpec {
        MetricSpec::FourthRoot {
            n1: 2,
            n2: 2,
            c,
            charts: (FactorChart::Cartesian, FactorChart::Cartesian),
        }
    }

    /// `a_i(x) = 0.02(i+1) + 0.1(i+1) x^{i+2} + 0.05 (x^{i+1})²` (indices mod n).
    pub fn default_oneform(dim: usize) -> Vec<Expr> {
        (0..dim)
            .map(|i| {
                let next = (i + 1) % dim + 1;
                let own = i + 1;
                Expr::parse(&format!(
                    "{} + {}*x{next} + 0.05*x{own}^2",
                    0.02 * (i + 1) as f64,
                    0.1 * (i + 1) as f64
                ))
                .expect("generated expression")
            })
            .collect()
    }

    pub fn perturbed(base: MetricSpec) -> MetricSpec {
        let oneform = MetricSpec::default_oneform(base.dim());
        MetricSpec::ProjectivePerturbation {
            base: Box::new(base),
            oneform,
        }
    }

    /// The Riemannian metric of a Riemannian family.
    pub fn riemannian_metric(&self) -> Result<RiemannianMetric> {
        let (dim, kind) = match self {
            MetricSpec::Euclidean { dim } => (*dim, RiemannianKind::Flat),
            MetricSpec::RoundSphere => (2, RiemannianKind::RoundSphere),
            MetricSpec::HyperbolicBall { dim } => (*dim, RiemannianKind::HyperbolicBall),
            MetricSpec::ConformalFlat { dim, lambda } => {
                (*dim, RiemannianKind::Conformal(lambda.clone()))
            }
            MetricSpec::FlatPolar => (2, RiemannianKind::FlatPolar),
            MetricSpec::Riemannian { dim, a } => (*dim, RiemannianKind::General(a.clone())),
            other => {
                return Err(GeomError::InvalidParams(format!(
                    "{} is not a Riemannian family",
                    other.family()
                )))
            }
        };
        if dim < 2 {
            return Err(GeomError::InvalidParams(format!("dimension {dim} < 2")));
        }
        let m = RiemannianMetric { dim, kind };
        m.validate()?;
        Ok(m)
    }

    /// The metric of the Randers family, validated at the origin.
    pub fn randers_metric(&self) -> Result<RandersMetric> {
        let MetricSpec::Randers { alpha, b0, bx } = self else {
            return Err(GeomError::InvalidParams(format!(
                "{} is not a Randers family",
                self.family()
            )));
        };
        let alpha = alpha.riemannian_metric()?;
        let n = alpha.dim;
        if b0.len() != n || bx.len() != n * n {
            return Err(GeomError::InvalidParams(format!(
                "randers needs {n} b components and {n}×{n} bx"
            )));
        }
        let m = RandersMetric {
            alpha,
            b0: b0.clone(),
            bx: bx.clone(),
        };
        let origin = vec![0.0; n];
        let b = m.b_norm(&origin)?;
        if !(b < 1.0) {
            return Err(GeomError::InvalidParams(format!(
                "randers requires ‖b‖_α < 1, got {b} at the origin"
            )));
        }
        Ok(m)
    }

    /// Builds the fixture, validating family parameters.
    pub fn build(&self) -> Result<Built> {
        if self.dim() < 2 || 2 * self.dim() > crate::jet::MAX_VARS {
            return Err(GeomError::InvalidParams(format!(
                "dimension {} outside 2..={}",
                self.dim(),
                crate::jet::MAX_VARS / 2
            )));
        }
        Ok(match self {
            MetricSpec::Randers { .. } => Built::Metric(Arc::new(self.randers_metric()?)),
            MetricSpec::Funk { dim } => Built::Metric(Arc::new(FunkMetric { dim: *dim })),
            MetricSpec::FourthRoot { n1, n2, c, charts } => {
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(GeomError::InvalidParams(format!(
                        "fourth-root requires 0 < c ≤ 1, got {c}"
                    )));
                }
                let factor = |dim: usize, chart: FactorChart| -> Result<RiemannianMetric> {
                    match chart {
                        FactorChart::Cartesian => Ok(RiemannianMetric {
                            dim,
                            kind: RiemannianKind::Flat,
                        }),
                        FactorChart::Polar if dim == 2 => Ok(RiemannianMetric {
                            dim,
                            kind: RiemannianKind::FlatPolar,
                        }),
                        FactorChart::Polar => Err(GeomError::InvalidParams(
                            "polar factor must be two-dimensional".into(),
                        )),
                    }
                };
                Built::Metric(Arc::new(FourthRootMetric {
                    first: factor(*n1, charts.0)?,
                    second: factor(*n2, charts.1)?,
                    c: *c,
                }))
            }
            MetricSpec::Square { dim, squared } => Built::Metric(Arc::new(SquareMetric {
                dim: *dim,
                squared: *squared,
            })),
            MetricSpec::ProjectivePerturbation { base, oneform } => {
                if oneform.len() != base.dim() {
                    return Err(GeomError::InvalidParams(format!(
                        "one-form needs {} components",
                        base.dim()
                    )));
                }
                for e in oneform {
                    e.check_dim(base.dim())?;
                }
                Built::Spray(Arc::new(PerturbedSpray {
                    base: base.build()?.spray(),
                    oneform: oneform.clone(),
                }))
            }
            riem => Built::Metric(Arc::new(riem.riemannian_metric()?)),
        })
    }

    /// Sampling region that keeps clear of chart boundaries.
    pub fn default_box(&self) -> SampleBox {
        let n = self.dim();
        match self {
            MetricSpec::Funk { .. } => SampleBox::ball(n, 0.5),
            MetricSpec::HyperbolicBall { .. } => SampleBox::ball(n, 0.6),
            MetricSpec::RoundSphere => SampleBox::cube(n, 1.0),
            MetricSpec::FlatPolar => SampleBox::Cube {
                lo: vec![0.5, -1.0],
                hi: vec![1.5, 1.0],
            },
            MetricSpec::FourthRoot { n1, charts, .. } => {
                let mut lo = vec![-0.5; n];
                let mut hi = vec![0.5; n];
                if charts.0 == FactorChart::Polar {
                    lo[0] = 0.5;
                    hi[0] = 1.5;
                }
                if charts.1 == FactorChart::Polar {
                    lo[*n1] = 0.5;
                    hi[*n1] = 1.5;
                }
                SampleBox::Cube { lo, hi }
            }
            MetricSpec::ProjectivePerturbation { base, .. } => base.default_box(),
            _ => SampleBox::cube(n, 0.5),
        }
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(
            self,
            MetricSpec::Euclidean { .. }
                | MetricSpec::RoundSphere
                | MetricSpec::HyperbolicBall { .. }
                | MetricSpec::ConformalFlat { .. }
                | MetricSpec::FlatPolar
                | MetricSpec::Riemannian { .. }
        )
    }

    /// Builds a spec from a family name and string parameters; `dim` is
    /// taken from `params["dim"]` when present.
    pub fn from_params(family: &str, params: &BTreeMap<String, String>) -> Result<MetricSpec> {
        let get = |k: &str| params.get(k).map(String::as_str);
        let dim = |default: usize| -> Result<usize> {
            match get("dim") {
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| GeomError::InvalidParams(format!("bad dim {s:?}"))),
                None => Ok(default),
            }
        };
        let known: &[&str] = match family {
            "euclidean" | "hyperbolic-ball" | "funk" => &["dim"],
            "round-sphere" | "round-sphere-stereographic" | "flat-polar" => &["dim"],
            "conformal-flat-2d" | "conformal-flat" => &["dim", "lambda"],
            "riemannian" => &["dim", "a"],
            "randers" => &["dim", "alpha", "lambda", "b", "bx"],
            "fourth-root" => &["dim", "n1", "n2", "c", "chart1", "chart2"],
            "square-metric" => &["dim", "squared"],
            "projective-perturbation" => &["dim", "base", "oneform"],
            other => {
                return Err(GeomError::InvalidParams(format!(
                    "unknown family {other:?}"
                )))
            }
        };
        for k in params.keys() {
            if !known.contains(&k.as_str()) && !k.starts_with("base.") {
                return Err(GeomError::InvalidParams(format!(
                    "unknown parameter {k:?} for {family}"
                )));
            }
        }
        let spec = match family {
            "euclidean" => MetricSpec::Euclidean { dim: dim(3)? },
            "round-sphere" | "round-sphere-stereographic" => MetricSpec::RoundSphere,
            "flat-polar" => MetricSpec::FlatPolar,
            "hyperbolic-ball" => MetricSpec::HyperbolicBall { dim: dim(2)? },
            "conformal-flat-2d" | "conformal-flat" => MetricSpec::ConformalFlat {
                dim: dim(2)?,
                lambda: Expr::parse(get("lambda").unwrap_or("x1^2"))?,
            },
            "riemannian" => {
                let n = dim(2)?;
                let a = get("a").ok_or_else(|| {
                    GeomError::InvalidParams("riemannian requires parameter a".into())
                })?;
                let entries: Vec<Expr> = a
                    .split(';')
                    .flat_map(|row| row.split(','))
                    .map(Expr::parse)
                    .collect::<Result<_>>()?;
                MetricSpec::Riemannian { dim: n, a: entries }
            }
            "funk" => MetricSpec::Funk { dim: dim(3)? },
            "randers" => {
                let n = dim(3)?;
                let generic = MetricSpec::generic_randers(n);
                let MetricSpec::Randers {
                    alpha: g_alpha,
                    b0: g_b0,
                    bx: g_bx,
                } = generic
                else {
                    unreachable!()
                };
                let alpha = match get("alpha") {
                    None => match get("lambda") {
                        None => *g_alpha,
                        Some(l) => MetricSpec::ConformalFlat {
                            dim: n,
                            lambda: Expr::parse(l)?,
                        },
                    },
                    Some("euclidean") => MetricSpec::Euclidean { dim: n },
                    Some("hyperbolic-ball") => MetricSpec::HyperbolicBall { dim: n },
                    Some("round-sphere") => MetricSpec::RoundSphere,
                    Some("conformal-flat-2d") | Some("conformal-flat") => {
                        MetricSpec::ConformalFlat {
                            dim: n,
                            lambda: Expr::parse(get("lambda").unwrap_or("x1^2"))?,
                        }
                    }
                    Some(other) => {
                        return Err(GeomError::InvalidParams(format!(
                            "unsupported randers alpha {other:?}"
                        )))
                    }
                };
                let b0 = match get("b") {
                    Some(s) => parse_list(s)?,
                    None => g_b0,
                };
                let bx = match get("bx") {
                    Some(s) => parse_matrix(s, n)?,
                    // an explicit constant b without bx means a constant form
                    None if get("b").is_some() => vec![0.0; n * n],
                    None => g_bx,
                };
                MetricSpec::Randers {
                    alpha: Box::new(alpha),
                    b0,
                    bx,
                }
            }
            "fourth-root" => {
                let num = |k: &str, d: usize| -> Result<usize> {
                    get(k).map_or(Ok(d), |s| {
                        s.trim()
                            .parse()
                            .map_err(|_| GeomError::InvalidParams(format!("bad {k} {s:?}")))
                    })
                };
                let chart = |k: &str| -> Result<FactorChart> {
                    match get(k) {
                        None | Some("cartesian") => Ok(FactorChart::Cartesian),
                        Some("polar") => Ok(FactorChart::Polar),
                        Some(o) => Err(GeomError::InvalidParams(format!("bad {k} {o:?}"))),
                    }
                };
                let c = match get("c") {
                    Some(s) => s
                        .trim()
                        .parse()
                        .map_err(|_| GeomError::InvalidParams(format!("bad c {s:?}")))?,
                    None => 0.5,
                };
                MetricSpec::FourthRoot {
                    n1: num("n1", 2)?,
                    n2: num("n2", 2)?,
                    c,
                    charts: (chart("chart1")?, chart("chart2")?),
                }
            }
            "square-metric" => MetricSpec::Square {
                dim: dim(3)?,
                squared: match get("squared") {
                    None | Some("true") => true,
                    Some("false") => false,
                    Some(o) => {
                        return Err(GeomError::InvalidParams(format!("bad squared {o:?}")))
                    }
                },
            },
            "projective-perturbation" => {
                let base_family = get("base").unwrap_or("randers");
                let mut base_params: BTreeMap<String, String> = params
                    .iter()
                    .filter_map(|(k, v)| k.strip_prefix("base.").map(|k| (k.to_string(), v.clone())))
                    .collect();
                if let Some(d) = get("dim") {
                    base_params.entry("dim".into()).or_insert_with(|| d.to_string());
                }
                let base = MetricSpec::from_params(base_family, &base_params)?;
                let oneform = match get("oneform") {
                    Some(s) => s.split(';').map(Expr::parse).collect::<Result<_>>()?,
                    None => MetricSpec::default_oneform(base.dim()),
                };
                MetricSpec::ProjectivePerturbation {
                    base: Box::new(base),
                    oneform,
                }
            }
            _ => unreachable!(),
        };
        spec.build()?;
        Ok(spec)
    }
}

/// Deterministic admissible points: base points uniform in `region`, fibre
/// vectors with uniform direction and `½ ≤ |y| ≤ 2`.
pub fn sample(
    spray: &dyn Spray,
    count: usize,
    seed: u64,
    region: &SampleBox,
) -> Result<Vec<TangentPoint>> {
    let n = spray.dim();
    if region.dim() != n {
        return Err(GeomError::InvalidParams(format!(
            "box dimension {} vs spray dimension {n}",
            region.dim()
        )));
    }
    if !spray.admissible(&region.center()) {
        return Err(GeomError::InvalidParams(format!(
            "sampling box {region} is centered outside the chart of {}",
            spray.label()
        )));
    }
    let metric = spray.metric();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let (mut drawn, mut rejected) = (0usize, 0usize);
    while out.len() < count {
        drawn += 1;
        let x = draw_in(region, &mut rng);
        let dir = loop {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r2: f64 = v.iter().map(|c| c * c).sum();
            if r2 <= 1.0 && r2 > 1e-6 {
                let r = r2.sqrt();
                break v.into_iter().map(|c| c / r).collect::<Vec<_>>();
            }
        };
        let radius = rng.random_range(0.5..=2.0);
        let y: Vec<f64> = dir.iter().map(|c| c * radius).collect();
        let ok = spray.admissible(&x)
            && TangentPoint::new(x.clone(), y.clone())
                .ok()
                .is_some_and(|p| metric.as_ref().is_none_or(|m| fundamental_tensor(m.as_ref(), &p).is_ok()));
        if ok {
            out.push(TangentPoint::new(x, y)?);
        } else {
            rejected += 1;
            if drawn >= 20 && rejected * 10 > drawn * 9 {
                return Err(GeomError::SamplerRejection { rejected, drawn });
            }
        }
    }
    Ok(out)
}

fn draw_in(region: &SampleBox, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match region {
        SampleBox::Cube { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(l, h)| if l < h { rng.random_range(*l..*h) } else { *l })
            .collect(),
        SampleBox::Ball { center, radius } => loop {
            let v: Vec<f64> = center
                .iter()
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            if v.iter().map(|c| c * c).sum::<f64>() < 1.0 {
                break v
                    .iter()
                    .zip(center)
                    .map(|(c, o)| o + radius * c)
                    .collect();
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spray::seeds;

    fn f_value(m: &dyn FinslerMetric, x: &[f64], y: &[f64]) -> f64 {
        let p = TangentPoint::new(x.to_vec(), y.to_vec()).unwrap();
        let s = seeds(&p, 1).unwrap();
        m.norm(&s.x, &s.y).unwrap().value()
    }

    #[test]
    fn fourth_root_with_unit_coupling_is_riemannian_product() {
        let Built::Metric(m) = MetricSpec::fourth_root(1.0).build().unwrap() else {
            panic!()
        };
        let x = [0.1, -0.2, 0.3, 0.05];
        let y = [0.4, 1.1, -0.7, 0.2];
        let f = f_value(m.as_ref(), &x, &y);
        let want: f64 = y.iter().map(|v| v * v).sum::<f64>();
        assert!((f * f - want).abs() < 1e-13);
    }

    #[test]
    fn funk_at_origin_is_euclidean() {
        let m = FunkMetric { dim: 3 };
        let y = [0.3, -1.2, 0.8];
        let f = f_value(&m, &[0.0; 3], &y);
        let want = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((f - want).abs() < 1e-14);
    }

    #[test]
    fn constant_randers_closed_form() {
        let mut p = BTreeMap::new();
        p.insert("alpha".to_string(), "euclidean".to_string());
        p.insert("b".to_string(), "0.3,0,0".to_string());
        let spec = MetricSpec::from_params("randers", &p).unwrap();
        let Built::Metric(m) = spec.build().unwrap() else { panic!() };
        let x = [0.2, 0.1, -0.3];
        let y = [0.5, -0.4, 1.0];
        let f = f_value(m.as_ref(), &x, &y);
        let want = y.iter().map(|v| v * v).sum::<f64>().sqrt() + 0.3 * y[0];
        assert!((f - want).abs() < 1e-14);
        let pt = TangentPoint::new(x.to_vec(), y.to_vec()).unwrap();
        assert!(fundamental_tensor(m.as_ref(), &pt).is_ok());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = BTreeMap::new();
        p.insert("alpha".to_string(), "euclidean".to_string());
        p.insert("b".to_string(), "1.2,0,0".to_string());
        let err = MetricSpec::from_params("randers", &p).unwrap_err();
        assert!(err.to_string().contains("‖b‖_α < 1"), "{err}");

        let mut q = BTreeMap::new();
        q.insert("c".to_string(), "1.5".to_string());
        assert!(MetricSpec::from_params("fourth-root", &q).is_err());
        assert!(MetricSpec::from_params("no-such-family", &BTreeMap::new()).is_err());
        let mut r = BTreeMap::new();
        r.insert("colour".to_string(), "red".to_string());
        assert!(MetricSpec::from_params("funk", &r).is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_admissible() {
        let spray = MetricSpec::Funk { dim: 3 }.build().unwrap().spray();
        let region = SampleBox::ball(3, 0.9);
        let a = sample(spray.as_ref(), 50, 11, &region).unwrap();
        let b = sample(spray.as_ref(), 50, 11, &region).unwrap();
        assert_eq!(a, b);
        for p in &a {
            let r: f64 = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r < 0.9);
            let ny: f64 = p.y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((0.5..=2.0 + 1e-12).contains(&ny));
            assert!(spray.admissible(&p.x));
        }
        let c = sample(spray.as_ref(), 50, 12, &region).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_rejects_box_outside_chart() {
        let spray = MetricSpec::Funk { dim: 2 }.build().unwrap().spray();
        let region = SampleBox::Ball {
            center: vec![3.0, 0.0],
            radius: 0.5,
        };
        assert!(sample(spray.as_ref(), 5, 1, &region).is_err());
    }

    #[test]
    fn box_parsing() {
        assert_eq!(SampleBox::parse("ball:0.9", 3).unwrap(), SampleBox::ball(3, 0.9));
        assert_eq!(SampleBox::parse("cube:0.5", 2).unwrap(), SampleBox::cube(2, 0.5));
        assert!(SampleBox::parse("sphere:1", 2).is_err());
        assert!(SampleBox::parse("cube:1:0", 2).is_err());
    }
}
