//! The projective spray of a spray with a volume form, the Weyl curvature
//! and the Berwald-Weyl curvature.
//!
//! `|` is the horizontal covariant derivative of the base spray and `‖` that
//! of the projective spray `Ĝ^i = G^i − S y^i/(n+1)`; both are the same
//! [`Frame::hcov`] operator on different frames.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::measures::{self, ChiRoute, VolumeForm};
use crate::spray::{Curvature, Frame, Spray, TangentPoint};
use crate::tensor::Tensor;

/// Jet degree of `G` when the metric is expanded to `degree`.
pub fn spray_degree(degree: usize) -> Result<usize> {
    degree.checked_sub(2).ok_or(GeomError::InsufficientDegree {
        needed: 2,
        available: degree,
    })
}

/// `Ĝ^i = G^i − S y^i/(n+1)` of a spray and volume form.
#[derive(Debug, Clone)]
pub struct ProjectiveSpray {
    pub base: std::sync::Arc<dyn Spray>,
    pub volume: VolumeForm,
}

impl Spray for ProjectiveSpray {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn label(&self) -> String {
        format!("projective({};{})", self.base.label(), self.volume)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.base.admissible(x)
    }

    /// Coefficients of degree `degree`; the base spray is expanded one
    /// degree higher.
    fn coefficients(&self, p: &TangentPoint, degree: usize) -> Result<Vec<Jet>> {
        let frame = Frame::from_spray(self.base.as_ref(), p, degree + 1)?;
        let ls = self.volume.ln_sigma(self.base.as_ref(), &frame, degree + 1)?;
        let s = measures::s_curvature(&frame, &ls)?;
        Ok(hat_coefficients(&frame, &s))
    }
}

fn hat_coefficients(frame: &Frame, s: &Jet) -> Vec<Jet> {
    let n = frame.dim();
    let k = 1.0 / (n as f64 + 1.0);
    frame
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, gi)| {
            let mut h = gi.clone();
            h.add_scaled(&s.mul_coordinate(frame.y_slot(i), frame.y()[i]), -k);
            h
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum WeylRoute {
    ViaChi,
    ViaHat,
}

impl WeylRoute {
    pub const ALL: [WeylRoute; 2] = [WeylRoute::ViaChi, WeylRoute::ViaHat];

    pub fn name(self) -> &'static str {
        match self {
            WeylRoute::ViaChi => "viaChi",
            WeylRoute::ViaHat => "viaHat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum WoRoute {
    Definition,
    ViaBase,
    DivW,
    DivR,
}

impl WoRoute {
    pub const ALL: [WoRoute; 4] = [
        WoRoute::Definition,
        WoRoute::ViaBase,
        WoRoute::DivW,
        WoRoute::DivR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WoRoute::Definition => "definition",
            WoRoute::ViaBase => "viaBase",
            WoRoute::DivW => "divW",
            WoRoute::DivR => "divR",
        }
    }

    /// Routes defined in dimension `n`.
    pub fn available(n: usize) -> Vec<WoRoute> {
        WoRoute::ALL
            .into_iter()
            .filter(|r| *r != WoRoute::DivW || n >= 3)
            .collect()
    }
}

/// `f(x)` of a change of volume form, evaluated at a point.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeChange {
    #[serde(skip)]
    pub f: Expr,
    pub f0: f64,
    pub fm: Vec<f64>,
    /// `Ξ = S/(n+1) + f_0`
    pub xi: f64,
}

/// Value-level projective data at one point.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectiveEval {
    pub ghat: Vec<f64>,
    pub nhat: Vec<f64>,
    pub gammahat: Vec<f64>,
    pub shat: f64,
    pub chihat: Vec<f64>,
    pub rhat_ik: Vec<f64>,
    pub rhat: f64,
    pub that: Vec<f64>,
    pub w: Vec<f64>,
    pub wo: BTreeMap<WoRoute, Vec<f64>>,
}

/// Everything about `(G, dV)` at one tangent point: the base frame, the
/// S-curvature and the frame of the projective spray, with curvature of
/// both computed on first use.
pub struct ProjectivePoint {
    base: Frame,
    ln_sigma: Jet,
    s: Jet,
    hat: Frame,
    curv: OnceLock<Curvature>,
    hat_curv: OnceLock<Curvature>,
}

impl ProjectivePoint {
    /// `degree` is the truncation degree of the metric inputs.
    pub fn new(
        spray: &dyn Spray,
        volume: &VolumeForm,
        p: &TangentPoint,
        degree: usize,
    ) -> Result<ProjectivePoint> {
        let dg = spray_degree(degree)?;
        let base = Frame::from_spray(spray, p, dg)?;
        let ln_sigma = volume.ln_sigma(spray, &base, dg)?;
        ProjectivePoint::from_parts(base, ln_sigma)
    }

    pub fn from_parts(base: Frame, ln_sigma: Jet) -> Result<ProjectivePoint> {
        let s = measures::s_curvature(&base, &ln_sigma)?;
        let hat = Frame::new(base.point().clone(), hat_coefficients(&base, &s))?;
        Ok(ProjectivePoint {
            base,
            ln_sigma,
            s,
            hat,
            curv: OnceLock::new(),
            hat_curv: OnceLock::new(),
        })
    }

    /// The same spray with another volume form, reusing the base frame.
    pub fn with_ln_sigma(&self, ln_sigma: Jet) -> Result<ProjectivePoint> {
        let pp = ProjectivePoint::from_parts(self.base.clone(), ln_sigma)?;
        if let Some(c) = self.curv.get() {
            let _ = pp.curv.set(c.clone());
        }
        Ok(pp)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    fn k(&self) -> f64 {
        1.0 / (self.dim() as f64 + 1.0)
    }

    pub fn base(&self) -> &Frame {
        &self.base
    }

    pub fn hat(&self) -> &Frame {
        &self.hat
    }

    pub fn ln_sigma(&self) -> &Jet {
        &self.ln_sigma
    }

    pub fn s(&self) -> &Jet {
        &self.s
    }

    pub fn curvature(&self) -> Result<&Curvature> {
        if let Some(c) = self.curv.get() {
            return Ok(c);
        }
        let c = self.base.curvature()?;
        Ok(self.curv.get_or_init(|| c))
    }

    pub fn hat_curvature(&self) -> Result<&Curvature> {
        if let Some(c) = self.hat_curv.get() {
            return Ok(c);
        }
        let c = self.hat.curvature()?;
        Ok(self.hat_curv.get_or_init(|| c))
    }

    pub fn tau(&self) -> Result<Jet> {
        measures::tau(&self.base, &self.s)
    }

    pub fn chi(&self, route: ChiRoute) -> Result<Tensor> {
        match route {
            ChiRoute::FromS => measures::chi_from_s(&self.base, &self.s),
            ChiRoute::FromT => measures::chi_from_t(&self.base, self.curvature()?),
            ChiRoute::FromR => measures::chi_from_r(&self.base, self.curvature()?),
        }
    }

    /// S-curvature of `Ĝ` with the same volume form.
    pub fn hat_s(&self) -> Result<Jet> {
        measures::s_curvature(&self.hat, &self.ln_sigma)
    }

    /// χ of `Ĝ` from its own S-curvature.
    pub fn hat_chi(&self) -> Result<Tensor> {
        measures::chi_from_s(&self.hat, &self.hat_s()?)
    }

    pub fn weyl(&self, route: WeylRoute) -> Result<Tensor> {
        match route {
            WeylRoute::ViaHat => Ok(self.hat_curvature()?.t.clone()),
            WeylRoute::ViaChi => {
                let chi = self.chi(ChiRoute::FromS)?;
                let t = &self.curvature()?.t;
                let n = self.dim();
                let k = 3.0 * self.k();
                Tensor::from_fn(n, 1, 1, |ix| {
                    let (i, j) = (ix[0], ix[1]);
                    let mut acc = t.get(&[i, j]).clone();
                    let add = chi.get(&[j]).mul_coordinate(self.base.y_slot(i), self.base.y()[i]);
                    acc.add_scaled(&add, k);
                    Ok(acc)
                })
            }
        }
    }

    /// `R_{|k} − ½ R_{·k|m} y^m` on a frame with Ricci scalar `r`.
    fn half_form(frame: &Frame, r: &Jet) -> Result<Tensor> {
        let a = frame.hderiv(r)?;
        let b = frame.contract_y(&frame.hcov(&frame.vderiv_scalar(r)?)?, 1);
        Ok(a.sub(&b.scale(0.5)))
    }

    /// `χ_{k|m} y^m` with χ from the S-curvature.
    fn chi_dot(&self) -> Result<Tensor> {
        let chi = self.chi(ChiRoute::FromS)?;
        Ok(self.base.contract_y(&self.base.hcov(&chi)?, 1))
    }

    /// `W^m_k v_m` for a covector `v`.
    fn w_contract(w: &Tensor, v: &Tensor) -> Tensor {
        let n = w.dim();
        let comps = (0..n)
            .map(|k| {
                let mut acc = w.get(&[0, k]) * v.get(&[0]);
                for m in 1..n {
                    acc += &(w.get(&[m, k]) * v.get(&[m]));
                }
                acc
            })
            .collect();
        Tensor::new(n, 0, 1, comps)
    }

    pub fn berwald_weyl(&self, route: WoRoute) -> Result<Tensor> {
        let n = self.dim();
        match route {
            WoRoute::Definition => {
                ProjectivePoint::half_form(&self.hat, &self.hat_curvature()?.r)
            }
            WoRoute::ViaBase => {
                let k = self.k();
                let curv = self.curvature()?;
                let w = self.weyl(WeylRoute::ViaChi)?;
                let sy = self.base.vderiv_scalar(&self.s)?;
                Ok(ProjectivePoint::half_form(&self.base, &curv.r)?
                    .sub(&self.chi_dot()?.scale(k))
                    .sub(&ProjectivePoint::w_contract(&w, &sy).scale(k)))
            }
            WoRoute::DivW => {
                if n < 3 {
                    return Err(GeomError::Dimension {
                        dim: n,
                        reason: "the divW route divides by n − 2",
                    });
                }
                let w = self.weyl(WeylRoute::ViaHat)?;
                Ok(self.hat.hcov(&w)?.contract(0, 2).scale(1.0 / (n as f64 - 2.0)))
            }
            WoRoute::DivR => {
                let rik = &self.hat_curvature()?.rik;
                Ok(self.hat.hcov(rik)?.contract(0, 2).scale(1.0 / (n as f64 - 1.0)))
            }
        }
    }

    /// `½{3R̂_{‖k} − (R̂_{‖m} y^m)_{·k}}`
    pub fn berwald_weyl_rewritten(&self) -> Result<Tensor> {
        let r = &self.hat_curvature()?.r;
        let a = self.hat.hderiv(r)?;
        let b = self.hat.vderiv(&self.hat.contract_y(&a, 0))?;
        Ok(a.scale(1.5).sub(&b.scale(0.5)))
    }

    pub fn eval(&self) -> Result<ProjectiveEval> {
        let hc = self.hat_curvature()?;
        let mut wo = BTreeMap::new();
        for r in WoRoute::available(self.dim()) {
            wo.insert(r, self.berwald_weyl(r)?.values());
        }
        Ok(ProjectiveEval {
            ghat: self.hat.coefficients().iter().map(Jet::value).collect(),
            nhat: self.hat.nonlinear().values(),
            gammahat: self.hat.gamma().values(),
            shat: self.hat_s()?.value(),
            chihat: self.hat_chi()?.values(),
            rhat_ik: hc.rik.values(),
            rhat: hc.r.value(),
            that: hc.t.values(),
            w: self.weyl(WeylRoute::ViaHat)?.values(),
            wo,
        })
    }

    /// `f_0`, `f_m` and `Ξ` for a function of `x`.
    pub fn volume_change(&self, f: &Expr) -> Result<VolumeChange> {
        let fj = self.f_jet(f, 1)?;
        let n = self.dim();
        let fm: Vec<f64> = (0..n)
            .map(|m| fj.deriv(m).map(|d| d.value()))
            .collect::<Result<_>>()?;
        let f0 = fm.iter().zip(self.base.y()).map(|(a, b)| a * b).sum();
        Ok(VolumeChange {
            f: f.clone(),
            f0,
            fm,
            xi: self.s.value() * self.k() + f0,
        })
    }

    /// `f(x)` as a jet in the `(x, y)` space.
    pub fn f_jet(&self, f: &Expr, degree: usize) -> Result<Jet> {
        let n = self.dim();
        f.check_dim(n)?;
        let space = self.base.space();
        let x: Vec<Jet> = (0..n)
            .map(|i| space.seed(i, self.base.point().x[i], degree.max(1)))
            .collect::<Result<_>>()?;
        Ok(f.eval_jet(&x)?.truncate(degree))
    }

    /// `ln σ̃` of `dṼ = e^{−(n+1)f} dV`.
    pub fn rescaled_ln_sigma(&self, f: &Expr) -> Result<Jet> {
        let mut l = self.ln_sigma.clone();
        let fj = self.f_jet(f, self.ln_sigma.degree())?;
        l.add_scaled(&fj, -(self.dim() as f64 + 1.0));
        Ok(l)
    }

    /// Berwald-Weyl curvature recomputed under `dṼ = e^{−(n+1)f} dV`, and
    /// the residual against `W^o_k − W^m_k f_m`.
    pub fn volume_change_wo(&self, f: &Expr) -> Result<(Tensor, Tensor)> {
        let other = self.with_ln_sigma(self.rescaled_ln_sigma(f)?)?;
        let direct = other.berwald_weyl(WoRoute::Definition)?;
        let predicted = self.predicted_wo_change(f)?;
        Ok((direct.clone(), direct.sub(&predicted)))
    }

    fn predicted_wo_change(&self, f: &Expr) -> Result<Tensor> {
        let w = self.weyl(WeylRoute::ViaHat)?;
        let fm = self.f_gradient(f, w.degree())?;
        Ok(self
            .berwald_weyl(WoRoute::Definition)?
            .sub(&ProjectivePoint::w_contract(&w, &fm)))
    }

    fn f_gradient(&self, f: &Expr, degree: usize) -> Result<Tensor> {
        let fj = self.f_jet(f, degree + 1)?;
        let comps = (0..self.dim()).map(|m| fj.deriv(m)).collect::<Result<_>>()?;
        Ok(Tensor::new(self.dim(), 0, 1, comps))
    }

    /// Residuals of the two pointwise conditions of the BWeyl-flatness
    /// criterion for a given `f`: `W^o_k − W^m_k f_m` and
    /// `W^m_{k|m} − (n−2) W^m_k Ξ_{·m}` with `Ξ = S/(n+1) + f_0`.
    pub fn bweyl_residual(&self, f: &Expr) -> Result<(Tensor, Tensor)> {
        let n = self.dim();
        if n < 3 {
            return Err(GeomError::Dimension {
                dim: n,
                reason: "the BWeyl-flatness criterion needs n ≥ 3",
            });
        }
        let w = self.weyl(WeylRoute::ViaChi)?;
        let fm = self.f_gradient(f, w.degree())?;
        let b = self
            .berwald_weyl(WoRoute::Definition)?
            .sub(&ProjectivePoint::w_contract(&w, &fm));
        let div = self.base.hcov(&w)?.contract(0, 2);
        let xi_y = self.base.vderiv_scalar(&self.s)?.scale(self.k()).add(&fm);
        let c = div.sub(&ProjectivePoint::w_contract(&w, &xi_y).scale(n as f64 - 2.0));
        Ok((b, c))
    }
}

/// Ricci scalar divided by `F²` at several directions over one base point;
/// spread of the ratios, which vanishes for an Einstein metric.
pub fn einstein_spread(
    spray: &dyn Spray,
    x: &[f64],
    directions: &[Vec<f64>],
    degree: usize,
) -> Result<f64> {
    let metric = spray.metric().ok_or_else(|| {
        GeomError::InvalidParams("the Einstein check needs a metric".into())
    })?;
    let mut ratios = Vec::with_capacity(directions.len());
    for y in directions {
        let p = TangentPoint::new(x.to_vec(), y.clone())?;
        let frame = Frame::from_spray(spray, &p, degree.max(3))?;
        let r = frame.curvature()?.r.value();
        let s = crate::spray::seeds(&p, 1)?;
        let f2 = metric.norm_squared(&s.x, &s.y)?.value();
        ratios.push(r / f2);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo)
}

/// `W^o_k − F³(θ/F)_{·k}` for an Einstein metric with `Ric = (n−1)σF²`,
/// `θ = σ_{x^m} y^m`; `sigma` is a jet of `σ` in the `(x, y)` space of the
/// frame. Fails with [`GeomError::NotEinstein`] when `R/F²` varies over the
/// sample directions by more than `tol`.
pub fn einstein_wo_check(
    spray: &dyn Spray,
    volume: &VolumeForm,
    p: &TangentPoint,
    sigma: &Jet,
    degree: usize,
    tol: f64,
) -> Result<Tensor> {
    let n = p.dim();
    let dirs: Vec<Vec<f64>> = (0..6)
        .map(|j| {
            let t = 0.7 + j as f64;
            (0..n).map(|i| ((i + 1) as f64 * t).cos() + 0.1).collect()
        })
        .collect();
    let spread = einstein_spread(spray, &p.x, &dirs, 3)?;
    if spread > tol {
        return Err(GeomError::NotEinstein { spread });
    }
    let pp = ProjectivePoint::new(spray, volume, p, degree)?;
    let wo = pp.berwald_weyl(WoRoute::Definition)?;
    let metric = spray.metric().expect("checked above");
    let frame = pp.base();
    let s = crate::spray::seeds(p, wo.degree() + 1)?;
    let f = metric.norm(&s.x, &s.y)?;
    let mut theta = frame.space().zero(wo.degree() + 1);
    for m in 0..n {
        theta += &sigma.deriv(m)?.mul_coordinate(frame.y_slot(m), p.y[m]);
    }
    let ratio = theta.checked_div(&f)?;
    let f3 = &(&f * &f) * &f;
    let comps: Vec<Jet> = (0..n)
        .map(|k| Ok(&f3 * &ratio.deriv(frame.y_slot(k))?))
        .collect::<Result<_>>()?;
    Ok(wo.sub(&Tensor::new(n, 0, 1, comps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::MetricSpec;
    use crate::DEFAULT_DEGREE;

    fn pt(x: &[f64], y: &[f64]) -> TangentPoint {
        TangentPoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn max_diff(a: &Tensor, b: &Tensor) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn projective_spray_has_no_s_curvature() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let vol = VolumeForm::parse("explicit:exp(x1)").unwrap();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let pp = ProjectivePoint::new(spray.as_ref(), &vol, &p, 7).unwrap();
        assert!(pp.hat_s().unwrap().value().abs() < 1e-12);
        assert!(pp.hat_chi().unwrap().max_abs() < 1e-11);
        // the projective spray as a standalone spray agrees with the frame
        let ps = ProjectiveSpray { base: spray.clone(), volume: vol };
        let g = ps.coefficients(&p, 2).unwrap();
        for (a, b) in g.iter().zip(pp.hat().coefficients()) {
            assert!((a.value() - b.value()).abs() < 1e-13);
        }
    }

    #[test]
    fn chi_routes_agree_and_orderings_match() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let pp = ProjectivePoint::new(spray.as_ref(), &VolumeForm::Coordinate, &p, 6).unwrap();
        let s = pp.chi(ChiRoute::FromS).unwrap();
        let t = pp.chi(ChiRoute::FromT).unwrap();
        let r = pp.chi(ChiRoute::FromR).unwrap();
        let scale = s.max_abs().max(1e-3);
        assert!(max_diff(&s, &t) < 1e-9 * scale.max(1.0), "{:?} {:?}", s.values(), t.values());
        assert!(max_diff(&s, &r) < 1e-9 * scale.max(1.0));
        let sw = measures::chi_from_s_swapped(pp.base(), pp.s()).unwrap();
        assert!(max_diff(&s, &sw) < 1e-9);
        // χ_k y^k = 0
        let c: f64 = s.values().iter().zip(&p.y).map(|(a, b)| a * b).sum();
        assert!(c.abs() < 1e-11);
    }

    #[test]
    fn four_routes_agree_on_randers() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let vol = VolumeForm::parse("explicit:exp(x1)").unwrap();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let pp = ProjectivePoint::new(spray.as_ref(), &vol, &p, DEFAULT_DEGREE).unwrap();
        let d = pp.berwald_weyl(WoRoute::Definition).unwrap();
        let scale = d.max_abs().max(1e-6);
        for r in [WoRoute::ViaBase, WoRoute::DivW, WoRoute::DivR] {
            let o = pp.berwald_weyl(r).unwrap();
            assert!(max_diff(&d, &o) < 1e-7 * scale.max(1.0), "{r:?}: {:?} vs {:?}", d.values(), o.values());
        }
        let rw = pp.berwald_weyl_rewritten().unwrap();
        assert!(max_diff(&d, &rw) < 1e-8 * scale.max(1.0));
        let c: f64 = d.values().iter().zip(&p.y).map(|(a, b)| a * b).sum();
        assert!(c.abs() < 1e-9 * scale.max(1.0));
        assert!(d.max_abs() > 1e-4, "generic fixture should have W^o ≠ 0");
    }

    #[test]
    fn scalar_curvature_spray_has_vanishing_wo() {
        let spray = MetricSpec::Funk { dim: 3 }.build().unwrap().spray();
        let vol = VolumeForm::parse("explicit:exp(x1)").unwrap();
        let p = pt(&[0.2, -0.1, 0.3], &[0.7, 0.3, -1.1]);
        let pp = ProjectivePoint::new(spray.as_ref(), &vol, &p, DEFAULT_DEGREE).unwrap();
        assert!(pp.weyl(WeylRoute::ViaHat).unwrap().max_abs() < 1e-9);
        for r in WoRoute::ALL {
            assert!(pp.berwald_weyl(r).unwrap().max_abs() < 1e-8, "{r:?}");
        }
        let sphere = MetricSpec::RoundSphere.build().unwrap().spray();
        let p2 = pt(&[0.1, 0.2], &[1.0, 0.3]);
        let pp2 = ProjectivePoint::new(sphere.as_ref(), &vol, &p2, DEFAULT_DEGREE).unwrap();
        assert!(matches!(
            pp2.berwald_weyl(WoRoute::DivW),
            Err(GeomError::Dimension { dim: 2, .. })
        ));
        assert!(pp2.berwald_weyl(WoRoute::Definition).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn criterion_residuals_are_proportional() {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let p = pt(&[0.1, -0.2, 0.15], &[0.4, 0.9, -0.5]);
        let pp = ProjectivePoint::new(spray.as_ref(), &VolumeForm::Coordinate, &p, DEFAULT_DEGREE).unwrap();
        let f = Expr::parse("0.1*x1*x2").unwrap();
        let (b, c) = pp.bweyl_residual(&f).unwrap();
        assert!(max_diff(&c, &b.scale(1.0)) < 1e-7 * b.max_abs().max(1.0));
        let (_, res) = pp.volume_change_wo(&f).unwrap();
        assert!(res.max_abs() < 1e-8, "{:?}", res.values());
    }
}
