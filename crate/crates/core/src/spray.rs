//! Sprays, Finsler metrics and the Berwald curvature stack, evaluated
//! pointwise through jets in the `2n` variables `(x, y)`.
//!
//! Jet variable `i < n` is the base coordinate `x^{i+1}`; variable `n + i` is
//! the fibre coordinate `y^{i+1}`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::jet::{Jet, JetSpace};
use crate::tensor::Tensor;

/// A base point together with a nonzero tangent vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<TangentPoint> {
        if x.len() != y.len() || x.is_empty() {
            return Err(GeomError::InvalidParams(format!(
                "x has {} coordinates, y has {}",
                x.len(),
                y.len()
            )));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(GeomError::Inadmissible("y = 0".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(GeomError::Inadmissible("non-finite coordinate".into()));
        }
        Ok(TangentPoint { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn with_y(&self, y: Vec<f64>) -> Result<TangentPoint> {
        TangentPoint::new(self.x.clone(), y)
    }

    pub fn scaled(&self, lambda: f64) -> Result<TangentPoint> {
        self.with_y(self.y.iter().map(|v| v * lambda).collect())
    }
}

/// Coordinate jets seeded at a tangent point.
pub struct Seeds {
    pub space: JetSpace,
    pub x: Vec<Jet>,
    pub y: Vec<Jet>,
}

pub fn seeds(p: &TangentPoint, degree: usize) -> Result<Seeds> {
    let n = p.dim();
    let space = JetSpace::new(2 * n)?;
    let x = (0..n)
        .map(|i| space.seed(i, p.x[i], degree))
        .collect::<Result<_>>()?;
    let y = (0..n)
        .map(|i| space.seed(n + i, p.y[i], degree))
        .collect::<Result<_>>()?;
    Ok(Seeds { space, x, y })
}

/// A Finsler metric given by a jet-valued evaluator of `F(x, y)`.
pub trait FinslerMetric: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    /// Base-point admissibility (chart domain, parameter constraints).
    fn admissible(&self, x: &[f64]) -> bool;

    /// `F` as a jet; `x` and `y` may live in any jet space, which lets the
    /// same code serve the full `(x, y)` expansion and the quadrature over
    /// directions with only `x` carried as variables.
    fn norm(&self, x: &[Jet], y: &[Jet]) -> Result<Jet>;

    fn norm_squared(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let f = self.norm(x, y)?;
        Ok(&f * &f)
    }

    fn is_riemannian(&self) -> bool {
        false
    }
}

/// A spray given by a jet-valued evaluator of its coefficients `G^i`.
pub trait Spray: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn admissible(&self, x: &[f64]) -> bool;

    /// Jets of `G^1..G^n` at `p`, truncated at `degree`.
    fn coefficients(&self, p: &TangentPoint, degree: usize) -> Result<Vec<Jet>>;

    /// The metric this spray is induced by, if any.
    fn metric(&self) -> Option<Arc<dyn FinslerMetric>> {
        None
    }
}

pub(crate) fn check_admissible(admissible: bool, label: &str, p: &TangentPoint) -> Result<()> {
    if admissible {
        Ok(())
    } else {
        Err(GeomError::Inadmissible(format!(
            "{label} at x = {:?}",
            p.x
        )))
    }
}

/// Geodesic spray of a Finsler metric.
#[derive(Debug, Clone)]
pub struct MetricSpray {
    metric: Arc<dyn FinslerMetric>,
}

impl MetricSpray {
    pub fn new(metric: Arc<dyn FinslerMetric>) -> MetricSpray {
        MetricSpray { metric }
    }
}

impl Spray for MetricSpray {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn label(&self) -> String {
        self.metric.label()
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.metric.admissible(x)
    }

    fn coefficients(&self, p: &TangentPoint, degree: usize) -> Result<Vec<Jet>> {
        geodesic_coefficients(self.metric.as_ref(), p, degree)
    }

    fn metric(&self) -> Option<Arc<dyn FinslerMetric>> {
        Some(self.metric.clone())
    }
}

/// Value-level fundamental tensor at a point.
#[derive(Debug, Clone, Serialize)]
pub struct FundamentalTensor {
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub ylow: Vec<f64>,
}

/// Cholesky factor of a symmetric matrix, rejecting pivots at or below
/// `1e-12` times the largest diagonal entry.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 1e-12 * scale) {
            return Err(GeomError::NotPositiveDefinite { pivot: d });
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[k * n + i] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    inv
}

pub fn fundamental_tensor(metric: &dyn FinslerMetric, p: &TangentPoint) -> Result<FundamentalTensor> {
    let n = p.dim();
    check_admissible(metric.admissible(&p.x), &metric.label(), p)?;
    let s = seeds(p, 2)?;
    let f2 = metric.norm_squared(&s.x, &s.y)?;
    if !(f2.value() > 0.0) {
        return Err(GeomError::Inadmissible(format!("F² = {} ≤ 0", f2.value())));
    }
    let mut g = vec![0.0; n * n];
    let mut ylow = vec![0.0; n];
    for i in 0..n {
        let fi = f2.deriv(n + i)?;
        ylow[i] = 0.5 * fi.value();
        for j in 0..n {
            g[i * n + j] = 0.5 * fi.deriv(n + j)?.value();
        }
    }
    let l = cholesky(&g, n)?;
    let ginv = cholesky_inverse(&l, n);
    Ok(FundamentalTensor { g, ginv, ylow })
}

/// Solves `A x = b` over jets by Gaussian elimination with partial pivoting
/// on the constant terms. `a` is row-major `n × n`.
pub fn solve_jets(mut a: Vec<Jet>, mut b: Vec<Jet>, n: usize) -> Result<Vec<Jet>> {
    let mut inv_diag = Vec::with_capacity(n);
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&p, &q| {
                a[p * n + c]
                    .value()
                    .abs()
                    .total_cmp(&a[q * n + c].value().abs())
            })
            .expect("non-empty");
        if piv != c {
            for j in 0..n {
                a.swap(c * n + j, piv * n + j);
            }
            b.swap(c, piv);
        }
        let inv = a[c * n + c].recip()?;
        for r in c + 1..n {
            let factor = &a[r * n + c] * &inv;
            if factor.is_constant() && factor.value() == 0.0 {
                continue;
            }
            for j in c + 1..n {
                let t = &factor * &a[c * n + j];
                a[r * n + j] -= &t;
            }
            let t = &factor * &b[c];
            b[r] -= &t;
        }
        inv_diag.push(inv);
    }
    let mut x: Vec<Option<Jet>> = vec![None; n];
    for c in (0..n).rev() {
        let mut s = b[c].clone();
        for j in c + 1..n {
            let xj = x[j].as_ref().expect("solved");
            s -= &(&a[c * n + j] * xj);
        }
        x[c] = Some(&s * &inv_diag[c]);
    }
    Ok(x.into_iter().map(|v| v.expect("solved")).collect())
}

/// Geodesic coefficients `G^i = ¼ g^{il}{[F²]_{x^k y^l} y^k − [F²]_{x^l}}`
/// as jets of the requested degree.
pub fn geodesic_coefficients(
    metric: &dyn FinslerMetric,
    p: &TangentPoint,
    degree: usize,
) -> Result<Vec<Jet>> {
    let n = p.dim();
    if metric.dim() != n {
        return Err(GeomError::InvalidParams(format!(
            "metric dimension {} but point dimension {n}",
            metric.dim()
        )));
    }
    // positivity and convexity at the point itself
    fundamental_tensor(metric, p)?;
    let s = seeds(p, degree + 2)?;
    let f2 = metric.norm_squared(&s.x, &s.y)?;
    if !f2.is_finite() {
        return Err(GeomError::Inadmissible("F² jet not finite".into()));
    }
    let fy: Vec<Jet> = (0..n).map(|l| f2.deriv(n + l)).collect::<Result<_>>()?;
    let mut g = Vec::with_capacity(n * n);
    for fl in &fy {
        for j in 0..n {
            g.push(fl.deriv(n + j)?.scale(0.5));
        }
    }
    let mut rhs = Vec::with_capacity(n);
    for (l, fl) in fy.iter().enumerate() {
        let mut acc = f2.deriv(l)?.truncate(degree).scale(-1.0);
        for k in 0..n {
            let t = fl.deriv(k)?.mul_coordinate(n + k, p.y[k]);
            acc += &t;
        }
        rhs.push(acc.scale(0.25));
    }
    solve_jets(g, rhs, n)
}

/// Value-level Berwald connection data.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionEval {
    pub n: Vec<f64>,
    pub gamma: Vec<f64>,
    pub b: Vec<f64>,
}

/// Value-level curvature bundle.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureEval {
    pub rik: Vec<f64>,
    pub r3: Vec<f64>,
    pub r4: Vec<f64>,
    pub ric: f64,
    pub rscalar: f64,
    pub t: Vec<f64>,
}

/// Jets of a spray and its Berwald connection at one point, with the
/// derivative operators that connection defines.
#[derive(Debug, Clone)]
pub struct Frame {
    point: TangentPoint,
    space: JetSpace,
    n: usize,
    g: Vec<Jet>,
    nl: Tensor,
    gamma: Tensor,
}

impl Frame {
    /// Builds the frame from coefficient jets of degree ≥ 2.
    pub fn new(point: TangentPoint, g: Vec<Jet>) -> Result<Frame> {
        let n = point.dim();
        if g.len() != n {
            return Err(GeomError::InvalidParams(format!(
                "{} spray coefficients in dimension {n}",
                g.len()
            )));
        }
        let space = g[0].space();
        let gt = Tensor::new(n, 1, 0, g.clone());
        let nl = gt.vderiv(n)?;
        let gamma = nl.vderiv(n)?;
        Ok(Frame {
            point,
            space,
            n,
            g,
            nl,
            gamma,
        })
    }

    pub fn from_spray(spray: &dyn Spray, p: &TangentPoint, degree: usize) -> Result<Frame> {
        check_admissible(spray.admissible(&p.x), &spray.label(), p)?;
        Frame::new(p.clone(), spray.coefficients(p, degree)?)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &TangentPoint {
        &self.point
    }

    pub fn space(&self) -> JetSpace {
        self.space
    }

    pub fn y(&self) -> &[f64] {
        &self.point.y
    }

    /// Jet variable of `y^{i+1}`.
    pub fn y_slot(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn coefficients(&self) -> &[Jet] {
        &self.g
    }

    pub fn coefficients_tensor(&self) -> Tensor {
        Tensor::new(self.n, 1, 0, self.g.clone())
    }

    /// `N^i_j = ∂G^i/∂y^j`
    pub fn nonlinear(&self) -> &Tensor {
        &self.nl
    }

    /// `Γ^i_{jk} = ∂²G^i/∂y^j∂y^k`
    pub fn gamma(&self) -> &Tensor {
        &self.gamma
    }

    /// `B^i_{jkl} = ∂³G^i/∂y^j∂y^k∂y^l`, stored as `[i][j][k][l]`.
    pub fn berwald(&self) -> Result<Tensor> {
        self.gamma.vderiv(self.n)
    }

    /// The coordinate function `y^i` as a jet of the given degree.
    pub fn y_jet(&self, i: usize, degree: usize) -> Jet {
        self.space
            .constant(1.0, degree)
            .mul_coordinate(self.y_slot(i), self.point.y[i])
    }

    /// The canonical vertical field `y^i` as a `(1,0)` tensor.
    pub fn y_field(&self, degree: usize) -> Tensor {
        let comps = (0..self.n).map(|i| self.y_jet(i, degree)).collect();
        Tensor::new(self.n, 1, 0, comps)
    }

    pub fn vderiv(&self, t: &Tensor) -> Result<Tensor> {
        t.vderiv(self.n)
    }

    pub fn vderiv_scalar(&self, f: &Jet) -> Result<Tensor> {
        self.vderiv(&Tensor::scalar(self.n, f.clone()))
    }

    /// `T_{..m..} y^m` over lower slot `slot`.
    pub fn contract_y(&self, t: &Tensor, slot: usize) -> Tensor {
        t.contract_y(slot, &self.point.y, self.n)
    }

    /// `δf/δx^k = ∂f/∂x^k − N^l_k ∂f/∂y^l`
    pub fn delta(&self, f: &Jet) -> Result<Vec<Jet>> {
        let n = self.n;
        let dy: Vec<Jet> = (0..n).map(|l| f.deriv(n + l)).collect::<Result<_>>()?;
        (0..n)
            .map(|k| {
                let mut acc = f.deriv(k)?;
                for (l, dyl) in dy.iter().enumerate() {
                    let t = self.nl.get(&[l, k]) * dyl;
                    acc -= &t;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Horizontal derivative `f_{|k}` of a scalar, as a `(0,1)` tensor.
    pub fn hderiv(&self, f: &Jet) -> Result<Tensor> {
        Ok(Tensor::new(self.n, 0, 1, self.delta(f)?))
    }

    /// Horizontal covariant derivative with respect to the Berwald
    /// connection; appends one lower index.
    pub fn hcov(&self, t: &Tensor) -> Result<Tensor> {
        let n = self.n;
        let rank = t.rank();
        let deltas: Vec<Vec<Jet>> = t
            .comps()
            .iter()
            .map(|c| self.delta(c))
            .collect::<Result<_>>()?;
        let mut base = vec![0usize; rank];
        let mut moved = vec![0usize; rank];
        Tensor::from_fn(n, t.up(), t.low() + 1, |idx| {
            base.copy_from_slice(&idx[..rank]);
            let m = idx[rank];
            let mut acc = deltas[t.flat(&base)][m].clone();
            for a in 0..rank {
                let upper = a < t.up();
                for l in 0..n {
                    moved.copy_from_slice(&base);
                    moved[a] = l;
                    let comp = t.get(&moved);
                    if upper {
                        acc += &(self.gamma.get(&[base[a], l, m]) * comp);
                    } else {
                        acc -= &(self.gamma.get(&[l, base[a], m]) * comp);
                    }
                }
            }
            Ok(acc)
        })
    }

    /// `R^i_k` (stored `[i][k]`) from the coordinate formula.
    pub fn riemann(&self) -> Result<Tensor> {
        let n = self.n;
        let gx: Vec<Vec<Jet>> = self
            .g
            .iter()
            .map(|gi| (0..n).map(|k| gi.deriv(k)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Tensor::from_fn(n, 1, 1, |idx| {
            let (i, k) = (idx[0], idx[1]);
            let mut acc = gx[i][k].scale(2.0);
            // − y^j ∂²G^i/∂x^j∂y^k
            for j in 0..n {
                let t = self.nl.get(&[i, k]).deriv(j)?.mul_coordinate(n + j, self.point.y[j]);
                acc -= &t;
            }
            for j in 0..n {
                acc.add_scaled(&(&self.g[j] * self.gamma.get(&[i, j, k])), 2.0);
                acc -= &(self.nl.get(&[i, j]) * self.nl.get(&[j, k]));
            }
            Ok(acc)
        })
    }

    /// All base curvature quantities, as jets.
    pub fn curvature(&self) -> Result<Curvature> {
        Curvature::from_riemann(self, self.riemann()?)
    }

    /// Value-level connection bundle.
    pub fn connection_eval(&self) -> Result<ConnectionEval> {
        Ok(ConnectionEval {
            n: self.nl.values(),
            gamma: self.gamma.values(),
            b: self.berwald()?.values(),
        })
    }
}

/// `R^i_k`, the Ricci curvature, the Ricci scalar and `T^i_j` of a spray.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub rik: Tensor,
    pub ric: Jet,
    pub r: Jet,
    pub t: Tensor,
}

impl Curvature {
    pub fn from_riemann(frame: &Frame, rik: Tensor) -> Result<Curvature> {
        let n = frame.dim();
        if n < 2 {
            return Err(GeomError::Dimension {
                dim: n,
                reason: "Ricci scalar needs n ≥ 2",
            });
        }
        let ric = rik.contract(0, 1).as_scalar().clone();
        let r = ric.scale(1.0 / (n as f64 - 1.0));
        let t = t_tensor(frame, &rik, &r)?;
        Ok(Curvature { rik, ric, r, t })
    }

    /// `R^i_{kl} = ⅓(R^i_{k·l} − R^i_{l·k})`
    pub fn r3(&self, frame: &Frame) -> Result<Tensor> {
        let n = frame.dim();
        let d = frame.vderiv(&self.rik)?;
        Tensor::from_fn(n, 1, 2, |idx| {
            let (i, k, l) = (idx[0], idx[1], idx[2]);
            Ok((d.get(&[i, k, l]) - d.get(&[i, l, k])).scale(1.0 / 3.0))
        })
    }

    /// `R_j^i_{kl} = ∂R^i_{kl}/∂y^j`, stored `[i][j][k][l]`.
    pub fn r4(&self, frame: &Frame) -> Result<Tensor> {
        let n = frame.dim();
        let d = frame.vderiv(&self.r3(frame)?)?; // [i][k][l][j]
        Tensor::from_fn(n, 1, 3, |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            Ok(d.get(&[i, k, l, j]).clone())
        })
    }

    pub fn eval(&self, frame: &Frame) -> Result<CurvatureEval> {
        Ok(CurvatureEval {
            rik: self.rik.values(),
            r3: self.r3(frame)?.values(),
            r4: self.r4(frame)?.values(),
            ric: self.ric.value(),
            rscalar: self.r.value(),
            t: self.t.values(),
        })
    }
}

/// `T^i_j = R^i_j − (R δ^i_j − ½ R_{·j} y^i)` for any `(R^i_j, R)` pair.
pub fn t_tensor(frame: &Frame, rik: &Tensor, r: &Jet) -> Result<Tensor> {
    let n = frame.dim();
    let ry = frame.vderiv_scalar(r)?;
    Tensor::from_fn(n, 1, 1, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc = rik.get(&[i, j]).clone();
        if i == j {
            acc -= r;
        }
        let t = ry.get(&[j]).mul_coordinate(frame.y_slot(i), frame.y()[i]);
        acc.add_scaled(&t, 0.5);
        Ok(acc)
    })
}

/// Value-level `R^i_k`, Ricci and `T` for a spray at a point.
pub fn riemann(spray: &dyn Spray, p: &TangentPoint, degree: usize) -> Result<CurvatureEval> {
    let frame = Frame::from_spray(spray, p, degree)?;
    frame.curvature()?.eval(&frame)
}

/// Value-level connection for a spray at a point.
pub fn connection(spray: &dyn Spray, p: &TangentPoint, degree: usize) -> Result<ConnectionEval> {
    if degree < 3 {
        return Err(GeomError::InsufficientDegree {
            needed: 3,
            available: degree,
        });
    }
    Frame::from_spray(spray, p, degree)?.connection_eval()
}

/// `∂f/∂y^k` at the frame's point.
pub fn vderiv(frame: &Frame, f: &Jet, k: usize) -> Result<f64> {
    Ok(f.deriv(frame.y_slot(k))?.value())
}

/// `δf/δx^k` at the frame's point.
pub fn hderiv(frame: &Frame, f: &Jet, k: usize) -> Result<f64> {
    Ok(frame.delta(f)?[k].value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{MetricSpec, RiemannianKind, RiemannianMetric};

    fn metric(spec: &MetricSpec) -> Arc<dyn FinslerMetric> {
        spec.build().unwrap().metric().unwrap()
    }

    fn pt(x: &[f64], y: &[f64]) -> TangentPoint {
        TangentPoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn f_value(m: &dyn FinslerMetric, p: &TangentPoint) -> f64 {
        let s = seeds(p, 1).unwrap();
        m.norm(&s.x, &s.y).unwrap().value()
    }

    #[test]
    fn euclidean_spray_vanishes() {
        let m = metric(&MetricSpec::Euclidean { dim: 3 });
        let p = pt(&[0.3, -0.1, 0.2], &[1.0, 0.5, -0.7]);
        let g = geodesic_coefficients(m.as_ref(), &p, 4).unwrap();
        for gi in &g {
            assert!(gi.coeffs().iter().all(|c| c.abs() < 1e-14));
        }
        let ft = fundamental_tensor(m.as_ref(), &p).unwrap();
        assert_eq!(ft.g, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(ft.ylow, p.y);
    }

    #[test]
    fn riemannian_fundamental_tensor_and_flat_berwald() {
        let spec = MetricSpec::conformal_flat_2d();
        let m = metric(&spec);
        let p = pt(&[0.4, -0.3], &[0.8, 1.1]);
        let ft = fundamental_tensor(m.as_ref(), &p).unwrap();
        let c = (2.0f64 * 0.16).exp();
        assert!((ft.g[0] - c).abs() < 1e-13 && ft.g[1].abs() < 1e-13);
        let frame = Frame::from_spray(spec.build().unwrap().spray().as_ref(), &p, 4).unwrap();
        assert!(frame.berwald().unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn randers_fundamental_tensor_matches_closed_form() {
        // g_ij = (F/α)(a_ij − α_i α_j) + (b_i + α_i)(b_j + α_j), α_i = a_ij y^j / α
        let b = [0.3, -0.1, 0.05];
        let m = crate::catalog::RandersMetric {
            alpha: RiemannianMetric { dim: 3, kind: RiemannianKind::Flat },
            b0: b.to_vec(),
            bx: vec![0.0; 9],
        };
        let y = [0.7, -1.2, 0.4];
        let p = pt(&[0.1, 0.2, 0.3], &y);
        let ft = fundamental_tensor(&m, &p).unwrap();
        let alpha = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let f = alpha + b.iter().zip(&y).map(|(u, v)| u * v).sum::<f64>();
        for i in 0..3 {
            for j in 0..3 {
                let (ai, aj) = (y[i] / alpha, y[j] / alpha);
                let delta = if i == j { 1.0 } else { 0.0 };
                let want = f / alpha * (delta - ai * aj) + (b[i] + ai) * (b[j] + aj);
                assert!((ft.g[i * 3 + j] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn funk_spray_is_half_f_times_y() {
        let m = metric(&MetricSpec::Funk { dim: 3 });
        let p = pt(&[0.2, -0.3, 0.1], &[0.9, 0.4, -1.3]);
        let g = geodesic_coefficients(m.as_ref(), &p, 3).unwrap();
        let s = seeds(&p, 3).unwrap();
        let f = m.norm(&s.x, &s.y).unwrap();
        for i in 0..3 {
            let want = (&f * &s.y[i]).scale(0.5);
            for (a, b) in g[i].coeffs().iter().zip(want.coeffs()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn funk_spray_at_origin_against_difference_quotients() {
        // G^i from the defining formula with every partial of F² replaced by
        // central differences of the closed form.
        let m = metric(&MetricSpec::Funk { dim: 2 });
        let y = [0.6, -1.1];
        let p = pt(&[0.0, 0.0], &y);
        let g = geodesic_coefficients(m.as_ref(), &p, 0).unwrap();
        let f2 = |x: [f64; 2], y: [f64; 2]| f_value(m.as_ref(), &pt(&x, &y)).powi(2);
        let h = 1e-4;
        let e = |k: usize| {
            let mut v = [0.0; 2];
            v[k] = h;
            v
        };
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let x0 = [0.0, 0.0];
        let mut gm = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for l in 0..2 {
            for j in 0..2 {
                let d = |sa: f64, sb: f64| f2(x0, add(add(y, e(l), sa), e(j), sb));
                gm[l][j] = 0.5 * (d(1.0, 1.0) - d(1.0, -1.0) - d(-1.0, 1.0) + d(-1.0, -1.0)) / (4.0 * h * h);
            }
            let fx = (f2(e(l), y) - f2(add(x0, e(l), -1.0), y)) / (2.0 * h);
            let mut mixed = 0.0;
            for k in 0..2 {
                let d = |sa: f64, sb: f64| f2(add(x0, e(k), sa), add(y, e(l), sb));
                mixed += y[k] * (d(1.0, 1.0) - d(1.0, -1.0) - d(-1.0, 1.0) + d(-1.0, -1.0)) / (4.0 * h * h);
            }
            rhs[l] = 0.25 * (mixed - fx);
        }
        let det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
        let oracle = [
            (gm[1][1] * rhs[0] - gm[0][1] * rhs[1]) / det,
            (gm[0][0] * rhs[1] - gm[1][0] * rhs[0]) / det,
        ];
        let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
        for i in 0..2 {
            assert!((g[i].value() - oracle[i]).abs() < 1e-5);
            assert!((g[i].value() - 0.5 * norm * y[i]).abs() < 1e-12);
        }
    }

    /// Gauss curvature of `e^{2λ} δ` from Christoffel symbols built by
    /// central differences of the metric coefficient.
    fn gauss_curvature_fd(lambda: impl Fn(f64, f64) -> f64, x: [f64; 2]) -> f64 {
        let h = 1e-3;
        let c = |a: f64, b: f64| (2.0 * lambda(a, b)).exp();
        // K = −(1/2c) Δ ln c for conformal metrics; ln c = 2λ
        let l = |a: f64, b: f64| c(a, b).ln();
        let lap = (l(x[0] + h, x[1]) + l(x[0] - h, x[1]) + l(x[0], x[1] + h) + l(x[0], x[1] - h)
            - 4.0 * l(x[0], x[1]))
            / (h * h);
        -lap / (2.0 * c(x[0], x[1]))
    }

    #[test]
    fn surface_curvature_scalar_is_gauss_times_f_squared() {
        let cases: Vec<(MetricSpec, Box<dyn Fn(f64, f64) -> f64>)> = vec![
            (
                MetricSpec::RoundSphere,
                Box::new(|a: f64, b: f64| (2.0 / (1.0 + a * a + b * b)).ln()),
            ),
            (MetricSpec::conformal_flat_2d(), Box::new(|a: f64, _b: f64| a * a)),
        ];
        for (spec, lambda) in cases {
            let spray = spec.build().unwrap().spray();
            let m = spec.build().unwrap().metric().unwrap();
            for (x, y) in [([0.3, -0.2], [1.0, 0.4]), ([-0.5, 0.1], [-0.3, 1.7])] {
                let p = pt(&x, &y);
                let c = riemann(spray.as_ref(), &p, 4).unwrap();
                let k = gauss_curvature_fd(&lambda, x);
                let f2 = f_value(m.as_ref(), &p).powi(2);
                assert!((c.rscalar - k * f2).abs() < 1e-5 * f2, "{} vs {}", c.rscalar, k * f2);
            }
        }
        // exact value on the sphere
        let spray = MetricSpec::RoundSphere.build().unwrap().spray();
        let m = MetricSpec::RoundSphere.build().unwrap().metric().unwrap();
        let p = pt(&[0.7, -0.4], &[0.2, 1.3]);
        let r = riemann(spray.as_ref(), &p, 4).unwrap().rscalar;
        assert!((r - f_value(m.as_ref(), &p).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn funk_has_constant_flag_curvature_minus_quarter() {
        let spec = MetricSpec::Funk { dim: 3 };
        let spray = spec.build().unwrap().spray();
        let m = spec.build().unwrap().metric().unwrap();
        let p = pt(&[0.1, 0.25, -0.3], &[0.5, -0.9, 0.6]);
        let frame = Frame::from_spray(spray.as_ref(), &p, 3).unwrap();
        let c = frame.curvature().unwrap();
        let s = seeds(&p, 1).unwrap();
        let f = m.norm(&s.x, &s.y).unwrap();
        let fv = f.value();
        for i in 0..3 {
            for k in 0..3 {
                let fk = f.deriv(3 + k).unwrap().value();
                let delta = if i == k { 1.0 } else { 0.0 };
                let want = -0.25 * (fv * fv * delta - fv * fk * p.y[i]);
                assert!((c.rik.get(&[i, k]).value() - want).abs() < 1e-10);
            }
        }
        assert!(c.t.max_abs() < 1e-10);
    }

    #[test]
    fn homogeneity_and_connection_symmetry() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let a = connection(spray.as_ref(), &p, 3).unwrap();
        let b = connection(spray.as_ref(), &p.scaled(2.0).unwrap(), 3).unwrap();
        for (u, v) in a.n.iter().zip(&b.n) {
            assert!((2.0 * u - v).abs() < 1e-12);
        }
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((a.gamma[i * 9 + j * 3 + k] - a.gamma[i * 9 + k * 3 + j]).abs() < 1e-12);
                }
                // N^i_j = Γ^i_jk y^k
                let contracted: f64 = (0..3).map(|k| a.gamma[i * 9 + j * 3 + k] * p.y[k]).sum();
                assert!((contracted - a.n[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert!(matches!(
            connection(spray.as_ref(), &p, 2),
            Err(GeomError::InsufficientDegree { .. })
        ));
    }

    #[test]
    fn gamma_matches_difference_quotients_of_n() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let gamma = connection(spray.as_ref(), &p, 3).unwrap().gamma;
        let h = 1e-5;
        for k in 0..3 {
            let mut yp = p.y.clone();
            let mut ym = p.y.clone();
            yp[k] += h;
            ym[k] -= h;
            let np = connection(spray.as_ref(), &p.with_y(yp).unwrap(), 3).unwrap().n;
            let nm = connection(spray.as_ref(), &p.with_y(ym).unwrap(), 3).unwrap().n;
            for i in 0..3 {
                for j in 0..3 {
                    let fd = (np[i * 3 + j] - nm[i * 3 + j]) / (2.0 * h);
                    let jet = gamma[i * 9 + j * 3 + k];
                    assert!((fd - jet).abs() <= 1e-5 * jet.abs().max(1.0), "{fd} vs {jet}");
                }
            }
        }
    }

    #[test]
    fn covariant_derivatives_of_y_and_identity_vanish() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let frame = Frame::from_spray(spray.as_ref(), &p, 3).unwrap();
        let y = frame.y_field(3);
        assert!(frame.hcov(&y).unwrap().max_abs() < 1e-12);
        let s = frame.space();
        let id = Tensor::from_fn(3, 1, 1, |ix| Ok(s.constant(if ix[0] == ix[1] { 1.0 } else { 0.0 }, 3))).unwrap();
        assert!(frame.hcov(&id).unwrap().max_abs() < 1e-12);
        // F² is parallel for the geodesic spray of F
        let m = spray.metric().unwrap();
        let sd = seeds(&p, 5).unwrap();
        let f2 = m.norm_squared(&sd.x, &sd.y).unwrap();
        let d = frame.hderiv(&f2).unwrap();
        assert!(d.max_abs() < 1e-11, "{:?}", d.values());
    }

    #[test]
    fn ricci_identities_and_bianchi_on_funk() {
        let spray = MetricSpec::Funk { dim: 3 }.build().unwrap().spray();
        let p = pt(&[0.2, -0.1, 0.3], &[0.7, 0.3, -1.1]);
        let frame = Frame::from_spray(spray.as_ref(), &p, 5).unwrap();
        let c = frame.curvature().unwrap();
        let r = &c.r;
        // f_{|m·k} = f_{·k|m}
        let a = frame.vderiv(&frame.hderiv(r).unwrap()).unwrap();
        let b = frame.hcov(&frame.vderiv_scalar(r).unwrap()).unwrap();
        let scale = a.max_abs().max(1.0);
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v).abs() < 1e-10 * scale);
        }
        // f_{|k|m} − f_{|m|k} = f_{·l} R^l_{km}, and its y-contraction
        let hh = frame.hcov(&frame.hderiv(r).unwrap()).unwrap();
        let r3 = c.r3(&frame).unwrap();
        let ry = frame.vderiv_scalar(r).unwrap();
        for k in 0..3 {
            for m in 0..3 {
                let lhs = hh.get(&[k, m]).value() - hh.get(&[m, k]).value();
                let rhs: f64 = (0..3).map(|l| ry.get(&[l]).value() * r3.get(&[l, k, m]).value()).sum();
                assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
            }
        }
        // R^i_{k|p} − R^i_{p|k} + R^i_{pk|l} y^l = 0
        let rk = frame.hcov(&c.rik).unwrap();
        let r3y = frame.contract_y(&frame.hcov(&r3).unwrap(), 3);
        for i in 0..3 {
            for k in 0..3 {
                for q in 0..3 {
                    let res = rk.get(&[i, k, q]).value() - rk.get(&[i, q, k]).value()
                        + r3y.get(&[i, q, k]).value();
                    assert!(res.abs() < 1e-9, "{res}");
                }
            }
        }
        // R4 contracted with y^j gives R3, R3 with y^l gives R^i_k
        let r4y = frame.contract_y(&c.r4(&frame).unwrap(), 1);
        for (u, v) in r4y.values().iter().zip(r3.values()) {
            assert!((u - v).abs() < 1e-10);
        }
        let r3l = frame.contract_y(&r3, 2);
        for (u, v) in r3l.values().iter().zip(c.rik.values()) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
