//! Volume forms, the S-curvature, τ and the χ-curvature.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};
use crate::par::Execution;
use crate::spray::{Curvature, FinslerMetric, Frame, Spray};
use crate::tensor::Tensor;

pub const DEFAULT_BH_NODES: usize = 64;

/// A volume form `dV = σ(x) dx¹…dxⁿ`, evaluated through `ln σ`.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumeForm {
    Coordinate,
    /// Closed-form `σ(x)`.
    Explicit(Expr),
    /// Busemann–Hausdorff density of the spray's metric, by quadrature over
    /// the unit sphere with `nodes` nodes per angle.
    BusemannHausdorff { nodes: usize },
    /// `σ = σ_base · e^{factor·f(x)}`.
    Rescaled {
        base: Box<VolumeForm>,
        f: Expr,
        factor: f64,
    },
}

impl VolumeForm {
    pub fn bh() -> VolumeForm {
        VolumeForm::BusemannHausdorff {
            nodes: DEFAULT_BH_NODES,
        }
    }

    /// `coordinate`, `explicit:<σ(x)>`, `bh`, `bh:<nodes>` or
    /// `busemann-hausdorff`.
    pub fn parse(s: &str) -> Result<VolumeForm> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        match (kind, arg) {
            ("coordinate", None) => Ok(VolumeForm::Coordinate),
            ("explicit", Some(e)) => Ok(VolumeForm::Explicit(Expr::parse(e)?)),
            ("bh" | "busemann-hausdorff", None) => Ok(VolumeForm::bh()),
            ("bh" | "busemann-hausdorff", Some(n)) => {
                let nodes = n
                    .parse()
                    .map_err(|_| GeomError::InvalidParams(format!("bad node count {n:?}")))?;
                Ok(VolumeForm::BusemannHausdorff { nodes })
            }
            _ => Err(GeomError::InvalidParams(format!("unknown volume form {s:?}"))),
        }
    }

    pub fn with_nodes(self, nodes: usize) -> VolumeForm {
        match self {
            VolumeForm::BusemannHausdorff { .. } => VolumeForm::BusemannHausdorff { nodes },
            VolumeForm::Rescaled { base, f, factor } => VolumeForm::Rescaled {
                base: Box::new(base.with_nodes(nodes)),
                f,
                factor,
            },
            other => other,
        }
    }

    pub fn uses_quadrature(&self) -> bool {
        match self {
            VolumeForm::BusemannHausdorff { .. } => true,
            VolumeForm::Rescaled { base, .. } => base.uses_quadrature(),
            _ => false,
        }
    }

    /// `e^{factor·f} dV`.
    pub fn rescaled(&self, f: Expr, factor: f64) -> VolumeForm {
        VolumeForm::Rescaled {
            base: Box::new(self.clone()),
            f,
            factor,
        }
    }

    /// Jet of `ln σ` in the `n` base variables, at `x`.
    pub fn ln_sigma_x(&self, spray: &dyn Spray, x: &[f64], degree: usize) -> Result<Jet> {
        let n = x.len();
        let space = JetSpace::new(n)?;
        let seeds = |d: usize| -> Result<Vec<Jet>> {
            if d == 0 {
                Ok(x.iter().map(|&v| space.constant(v, 0)).collect())
            } else {
                (0..n).map(|i| space.seed(i, x[i], d)).collect()
            }
        };
        match self {
            VolumeForm::Coordinate => Ok(space.zero(degree)),
            VolumeForm::Explicit(e) => {
                e.check_dim(n)?;
                e.eval_jet(&seeds(degree)?)?.ln()
            }
            VolumeForm::BusemannHausdorff { nodes } => {
                let metric = spray.metric().ok_or_else(|| {
                    GeomError::InvalidParams(format!(
                        "Busemann-Hausdorff volume needs a metric; {} is a bare spray",
                        spray.label()
                    ))
                })?;
                bh_ln_sigma(metric.as_ref(), &seeds(degree)?, *nodes, Execution::default())
            }
            VolumeForm::Rescaled { base, f, factor } => {
                f.check_dim(n)?;
                let mut l = base.ln_sigma_x(spray, x, degree)?;
                l.add_scaled(&f.eval_jet(&seeds(degree)?)?, *factor);
                Ok(l)
            }
        }
    }

    /// `ln σ` embedded in the `2n`-variable `(x, y)` space of `frame`.
    pub fn ln_sigma(&self, spray: &dyn Spray, frame: &Frame, degree: usize) -> Result<Jet> {
        let n = frame.dim();
        let lx = self.ln_sigma_x(spray, &frame.point().x, degree)?;
        let map: Vec<usize> = (0..n).collect();
        lx.embed(frame.space(), &map)
    }
}

impl fmt::Display for VolumeForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolumeForm::Coordinate => write!(f, "coordinate"),
            VolumeForm::Explicit(e) => write!(f, "explicit:{e}"),
            VolumeForm::BusemannHausdorff { nodes } => write!(f, "bh:{nodes}"),
            VolumeForm::Rescaled { base, f: g, factor } => {
                write!(f, "{base}*exp({factor}*({g}))")
            }
        }
    }
}

/// Area of the unit sphere `S^{n−1}`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

fn min_nodes(n: usize) -> usize {
    if n == 2 {
        8
    } else {
        4
    }
}

/// Unit directions and weights of the product rule on `S^{n−1}`: trapezoid
/// in the azimuth, Gauss–Legendre with the `sin^k` Jacobian in the polar
/// angles. Grouped by the first polar angle (or by azimuth when `n = 2`).
pub fn sphere_rule(n: usize, nodes: usize) -> Result<Vec<Vec<(Vec<f64>, f64)>>> {
    if n < 2 {
        return Err(GeomError::Dimension {
            dim: n,
            reason: "sphere quadrature needs n ≥ 2",
        });
    }
    if nodes < min_nodes(n) {
        return Err(GeomError::InvalidParams(format!(
            "{nodes} quadrature nodes < minimum {} in dimension {n}",
            min_nodes(n)
        )));
    }
    let azimuth: Vec<(f64, f64)> = (0..nodes)
        .map(|j| (2.0 * PI * j as f64 / nodes as f64, 2.0 * PI / nodes as f64))
        .collect();
    if n == 2 {
        return Ok(azimuth
            .iter()
            .map(|&(phi, w)| vec![(vec![phi.cos(), phi.sin()], w)])
            .collect());
    }
    let gl = GaussLegendre::new(NonZeroUsize::new(nodes).expect("nodes ≥ 4"));
    let polar: Vec<(f64, f64)> = gl
        .as_node_weight_pairs()
        .iter()
        .map(|&(t, w)| (0.5 * PI * (t + 1.0), 0.5 * PI * w))
        .collect();
    // enumerate the remaining n−3 polar angles and the azimuth
    let mut tails: Vec<(Vec<f64>, f64)> = azimuth
        .iter()
        .map(|&(phi, w)| (vec![phi.cos(), phi.sin()], w))
        .collect();
    for level in 1..n - 2 {
        let power = level as i32;
        let mut next = Vec::with_capacity(tails.len() * polar.len());
        for &(psi, wp) in &polar {
            let (c, s) = (psi.cos(), psi.sin());
            for (dir, w) in &tails {
                let mut d = Vec::with_capacity(dir.len() + 1);
                d.push(c);
                d.extend(dir.iter().map(|v| v * s));
                next.push((d, w * wp * s.powi(power)));
            }
        }
        tails = next;
    }
    let top = (n - 2) as i32;
    Ok(polar
        .iter()
        .map(|&(psi, wp)| {
            let (c, s) = (psi.cos(), psi.sin());
            tails
                .iter()
                .map(|(dir, w)| {
                    let mut d = Vec::with_capacity(n);
                    d.push(c);
                    d.extend(dir.iter().map(|v| v * s));
                    (d, w * wp * s.powi(top))
                })
                .collect()
        })
        .collect())
}

/// `ln σ_BH` as a jet in whatever variables `x` carries:
/// `σ_BH = |S^{n−1}| / ∫_{S^{n−1}} F(x, θ)^{−n} dθ`.
pub fn bh_ln_sigma(
    metric: &dyn FinslerMetric,
    x: &[Jet],
    nodes: usize,
    exec: Execution,
) -> Result<Jet> {
    let n = metric.dim();
    if x.len() != n {
        return Err(GeomError::InvalidParams(format!(
            "{} base coordinates for a metric of dimension {n}",
            x.len()
        )));
    }
    let xv: Vec<f64> = x.iter().map(Jet::value).collect();
    if !metric.admissible(&xv) {
        return Err(GeomError::Inadmissible(format!(
            "{} at x = {xv:?}",
            metric.label()
        )));
    }
    let space = x[0].space();
    let degree = x[0].degree();
    let groups = sphere_rule(n, nodes)?;
    let partial = exec.map(&groups, |group| -> Result<Jet> {
        let mut acc = space.zero(degree);
        for (dir, w) in group {
            let y: Vec<Jet> = dir.iter().map(|&v| space.constant(v, degree)).collect();
            let f = metric.norm(x, &y)?;
            if !(f.value() > 0.0) || !f.is_finite() {
                return Err(GeomError::Inadmissible(format!(
                    "F = {} in direction {dir:?}",
                    f.value()
                )));
            }
            acc.add_scaled(&f.powi(-(n as i32))?, *w);
        }
        Ok(acc)
    });
    let mut total = space.zero(degree);
    for p in partial {
        total += &p?;
    }
    Ok(-total.ln()? + sphere_area(n).ln())
}

/// Change of `ln σ_BH(x)` when the node count doubles.
pub fn bh_drift(metric: &dyn FinslerMetric, x: &[f64], nodes: usize) -> Result<f64> {
    let space = JetSpace::new(x.len())?;
    let xs: Vec<Jet> = x.iter().map(|&v| space.constant(v, 0)).collect();
    let a = bh_ln_sigma(metric, &xs, nodes, Execution::default())?.value();
    let b = bh_ln_sigma(metric, &xs, 2 * nodes, Execution::default())?.value();
    Ok((a - b).abs())
}

/// `ln σ_BH(x)` at value level, rejecting node counts whose doubling moves
/// the result by more than `tol`.
pub fn bh_density_checked(
    metric: &dyn FinslerMetric,
    x: &[f64],
    nodes: usize,
    tol: f64,
) -> Result<f64> {
    let drift = bh_drift(metric, x, nodes)?;
    if drift > tol {
        return Err(GeomError::QuadratureDrift { drift, tol });
    }
    let space = JetSpace::new(x.len())?;
    let xs: Vec<Jet> = x.iter().map(|&v| space.constant(v, 0)).collect();
    Ok(bh_ln_sigma(metric, &xs, nodes, Execution::default())?.value())
}

/// `S = ∂G^m/∂y^m − y^m ∂(ln σ)/∂x^m`
pub fn s_curvature(frame: &Frame, ln_sigma: &Jet) -> Result<Jet> {
    let n = frame.dim();
    let nl = frame.nonlinear();
    let mut s = nl.get(&[0, 0]).clone();
    for m in 1..n {
        s += nl.get(&[m, m]);
    }
    for m in 0..n {
        let t = ln_sigma.deriv(m)?.mul_coordinate(frame.y_slot(m), frame.y()[m]);
        s -= &t;
    }
    Ok(s)
}

/// `τ = (S/(n+1))² + S_{|m} y^m/(n+1)`
pub fn tau(frame: &Frame, s: &Jet) -> Result<Jet> {
    let k = 1.0 / (frame.dim() as f64 + 1.0);
    let s0 = frame.contract_y(&frame.hderiv(s)?, 0);
    let mut t = (s * s).scale(k * k);
    t.add_scaled(s0.as_scalar(), k);
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ChiRoute {
    FromS,
    FromT,
    FromR,
}

impl ChiRoute {
    pub const ALL: [ChiRoute; 3] = [ChiRoute::FromS, ChiRoute::FromT, ChiRoute::FromR];

    pub fn name(self) -> &'static str {
        match self {
            ChiRoute::FromS => "fromS",
            ChiRoute::FromT => "fromT",
            ChiRoute::FromR => "fromR",
        }
    }
}

/// `χ_i = ½(S_{·i|m} y^m − S_{|i})`
pub fn chi_from_s(frame: &Frame, s: &Jet) -> Result<Tensor> {
    let sv = frame.vderiv_scalar(s)?;
    let a = frame.contract_y(&frame.hcov(&sv)?, 1);
    Ok(a.sub(&frame.hderiv(s)?).scale(0.5))
}

/// `χ_k = ½(S_{|m·k} y^m − S_{|k})`, the ordering used alongside τ.
pub fn chi_from_s_swapped(frame: &Frame, s: &Jet) -> Result<Tensor> {
    let sh = frame.hderiv(s)?;
    let a = frame.contract_y(&frame.vderiv(&sh)?, 0);
    Ok(a.sub(&sh).scale(0.5))
}

/// `χ_i = −⅓ T^m_{i·m}`
pub fn chi_from_t(frame: &Frame, curv: &Curvature) -> Result<Tensor> {
    Ok(frame.vderiv(&curv.t)?.contract(0, 2).scale(-1.0 / 3.0))
}

/// `χ_i = −(1/6)(2R^m_{i·m} + (n−1)R_{·i})`
pub fn chi_from_r(frame: &Frame, curv: &Curvature) -> Result<Tensor> {
    let n = frame.dim() as f64;
    let div = frame.vderiv(&curv.rik)?.contract(0, 2);
    let ry = frame.vderiv_scalar(&curv.r)?;
    Ok(div.scale(2.0).add(&ry.scale(n - 1.0)).scale(-1.0 / 6.0))
}

/// Value-level S, τ and χ.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureEval {
    pub s: f64,
    pub tau: f64,
    pub chi: Vec<f64>,
}

/// S, τ and χ (default route `fromT`) for a spray and volume at a point;
/// `degree` is the jet degree of `G`.
pub fn measure_eval(
    spray: &dyn Spray,
    volume: &VolumeForm,
    p: &crate::spray::TangentPoint,
    degree: usize,
) -> Result<MeasureEval> {
    let frame = Frame::from_spray(spray, p, degree)?;
    let ls = volume.ln_sigma(spray, &frame, degree)?;
    let s = s_curvature(&frame, &ls)?;
    let t = tau(&frame, &s)?;
    let curv = frame.curvature()?;
    Ok(MeasureEval {
        s: s.value(),
        tau: t.value(),
        chi: chi_from_t(&frame, &curv)?.values(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::MetricSpec;
    use crate::spray::TangentPoint;

    #[test]
    fn sphere_rule_integrates_constants_and_moments() {
        for n in 2..=4 {
            let rule = sphere_rule(n, 16).unwrap();
            let total: f64 = rule.iter().flatten().map(|(_, w)| w).sum();
            assert!((total - sphere_area(n)).abs() < 1e-12, "n = {n}");
            // ∫ θ_1² = |S^{n−1}|/n
            let m2: f64 = rule.iter().flatten().map(|(d, w)| w * d[0] * d[0]).sum();
            assert!((m2 - sphere_area(n) / n as f64).abs() < 1e-12);
            for (d, _) in rule.iter().flatten() {
                let r: f64 = d.iter().map(|v| v * v).sum();
                assert!((r - 1.0).abs() < 1e-14);
            }
        }
        assert!(sphere_rule(3, 2).is_err());
    }

    #[test]
    fn bh_density_of_riemannian_metric_is_root_det() {
        let spec = MetricSpec::HyperbolicBall { dim: 3 };
        let m = spec.build().unwrap().metric().unwrap();
        let x = [0.2, -0.1, 0.3];
        let ln = bh_density_checked(m.as_ref(), &x, 32, 1e-10).unwrap();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let want = 1.5 * (4.0 / (1.0 - r2).powi(2)).ln();
        assert!((ln - want).abs() < 1e-12, "{ln} vs {want}");
    }

    #[test]
    fn bh_density_of_funk_is_one() {
        // the Funk indicatrix is a translate of the unit sphere
        let m = MetricSpec::Funk { dim: 3 }.build().unwrap().metric().unwrap();
        let ln = bh_density_checked(m.as_ref(), &[0.3, -0.2, 0.1], 64, 1e-8).unwrap();
        assert!(ln.abs() < 1e-10, "{ln}");
    }

    #[test]
    fn volume_form_round_trips_through_text() {
        for s in ["coordinate", "explicit:exp(x1)", "bh:32"] {
            assert_eq!(VolumeForm::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(VolumeForm::parse("bh").unwrap(), VolumeForm::bh());
        assert!(VolumeForm::parse("holmes-thompson").is_err());
    }

    #[test]
    fn euclidean_coordinate_measures_vanish() {
        let spray = MetricSpec::Euclidean { dim: 3 }.build().unwrap().spray();
        let p = TangentPoint::new(vec![0.1, 0.2, 0.3], vec![1.0, -0.5, 0.2]).unwrap();
        let m = measure_eval(spray.as_ref(), &VolumeForm::Coordinate, &p, 4).unwrap();
        assert_eq!(m.s, 0.0);
        assert_eq!(m.tau, 0.0);
        assert!(m.chi.iter().all(|c| *c == 0.0));
    }
}
