//! The identity suite, theorem checks, and the finite-difference and
//! Gauss-curvature oracles.
//!
//! A check evaluates to a [`Measure`]: a residual and the magnitude of the
//! terms that were supposed to cancel. It passes when
//! `residual ≤ tol · scale + floor`.

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::catalog::{self, FactorChart, MetricSpec, PerturbedSpray, RiemannianMetric, SampleBox};
use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};
use crate::measures::{self, ChiRoute, VolumeForm};
use crate::par::Execution;
use crate::projective::{spray_degree, ProjectivePoint, WeylRoute, WoRoute};
use crate::spray::{fundamental_tensor, seeds, Curvature, FinslerMetric, Frame, Spray, TangentPoint};
use crate::tensor::Tensor;
use crate::DEFAULT_DEGREE;

pub const TOL_JET: f64 = 1e-7;
pub const TOL_QUAD: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-9;
/// Node-doubling drift allowed for the Busemann–Hausdorff quadrature.
pub const TOL_BH_DRIFT: f64 = 1e-8;
pub const DEFAULT_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub jet: f64,
    pub quad: f64,
    pub floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            jet: TOL_JET,
            quad: TOL_QUAD,
            floor: ABS_FLOOR,
        }
    }
}

/// Residual of one check at one point, with the magnitude it is judged
/// against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measure {
    pub residual: f64,
    pub scale: f64,
}

impl Measure {
    /// `scale` is the magnitude of the constituent terms; `1e−12` is added.
    pub fn new(residual: f64, magnitude: f64) -> Measure {
        Measure {
            residual,
            scale: magnitude + 1e-12,
        }
    }

    /// A quantity that should vanish, judged against `magnitude`.
    pub fn vanishing(values: &[f64], magnitude: f64) -> Measure {
        Measure::new(max_abs(values), magnitude.max(max_abs(values)))
    }

    /// Two evaluations of the same quantity.
    pub fn agree(a: &[f64], b: &[f64]) -> Measure {
        assert_eq!(a.len(), b.len());
        let r = a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        Measure::new(r, max_abs(a).max(max_abs(b)))
    }

    /// A reference evaluation against several others.
    pub fn agree_all(reference: &[f64], others: &[Vec<f64>]) -> Measure {
        let mut m = Measure::new(0.0, max_abs(reference));
        for o in others {
            let a = Measure::agree(reference, o);
            m.residual = m.residual.max(a.residual);
            m.scale = m.scale.max(a.scale);
        }
        m
    }

    pub fn passes(&self, tol: f64, floor: f64) -> bool {
        self.residual <= tol * self.scale + floor
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// One check at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub point: TangentPoint,
    pub residual: f64,
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    pub fn from_measure(id: &str, point: &TangentPoint, m: Measure, tol: f64, floor: f64) -> Self {
        CheckResult {
            id: id.to_string(),
            point: point.clone(),
            residual: m.residual,
            scale: m.scale,
            tol,
            pass: m.residual.is_finite() && m.passes(tol, floor),
            error: None,
        }
    }

    pub fn from_error(id: &str, point: &TangentPoint, e: &GeomError, tol: f64) -> Self {
        CheckResult {
            id: id.to_string(),
            point: point.clone(),
            residual: f64::NAN,
            scale: f64::NAN,
            tol,
            pass: false,
            error: Some(e.to_string()),
        }
    }

    /// Residual in units of the allowed error; above 1 means failure.
    pub fn excess(&self, floor: f64) -> f64 {
        if self.residual.is_nan() {
            f64::INFINITY
        } else {
            self.residual / (self.tol * self.scale + floor)
        }
    }
}

/// Aggregate of one check over all sampled points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub id: String,
    pub description: String,
    pub fixture: String,
    pub tol: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub failed: usize,
    pub max_residual: f64,
    /// Scale at the worst point.
    pub scale: f64,
    pub worst_point: Option<TangentPoint>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureInfo {
    pub metric: String,
    pub volume: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub fixtures: Vec<FixtureInfo>,
    pub seed: u64,
    pub points: usize,
    pub degree: usize,
    pub checks: Vec<CheckSummary>,
    pub pass: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn check(&self, id: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckSummary> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Everything about one sampled point a check may ask for.
pub struct PointCtx {
    spray: Arc<dyn Spray>,
    volume: VolumeForm,
    point: TangentPoint,
    degree: usize,
    f: Expr,
    pp: ProjectivePoint,
    rescaled: OnceLock<ProjectivePoint>,
}

impl PointCtx {
    /// `degree` is the truncation degree of metric inputs; `f` is the
    /// function of `x` used by the volume-change checks.
    pub fn new(
        spray: Arc<dyn Spray>,
        volume: VolumeForm,
        point: TangentPoint,
        degree: usize,
        f: Expr,
    ) -> Result<PointCtx> {
        let pp = ProjectivePoint::new(spray.as_ref(), &volume, &point, degree)?;
        Ok(PointCtx {
            spray,
            volume,
            point,
            degree,
            f,
            pp,
            rescaled: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    pub fn point(&self) -> &TangentPoint {
        &self.point
    }

    pub fn spray(&self) -> &dyn Spray {
        self.spray.as_ref()
    }

    pub fn volume(&self) -> &VolumeForm {
        &self.volume
    }

    pub fn metric(&self) -> Option<Arc<dyn FinslerMetric>> {
        self.spray.metric()
    }

    pub fn projective(&self) -> &ProjectivePoint {
        &self.pp
    }

    pub fn frame(&self) -> &Frame {
        self.pp.base()
    }

    pub fn curvature(&self) -> Result<&Curvature> {
        self.pp.curvature()
    }

    fn k(&self) -> f64 {
        1.0 / (self.dim() as f64 + 1.0)
    }

    fn y(&self) -> &[f64] {
        &self.point.y
    }

    /// The same spray under `dṼ = e^{−(n+1)f} dV`.
    pub fn rescaled(&self) -> Result<&ProjectivePoint> {
        if let Some(p) = self.rescaled.get() {
            return Ok(p);
        }
        let p = self.pp.with_ln_sigma(self.pp.rescaled_ln_sigma(&self.f)?)?;
        Ok(self.rescaled.get_or_init(|| p))
    }

    /// The same spray under another volume form.
    pub fn with_volume(&self, volume: &VolumeForm) -> Result<ProjectivePoint> {
        let dg = spray_degree(self.degree)?;
        let ls = volume.ln_sigma(self.spray.as_ref(), self.frame(), dg)?;
        self.pp.with_ln_sigma(ls)
    }

    /// `F` as a jet of the given degree; `None` for a bare spray.
    fn norm(&self, degree: usize) -> Result<Option<Jet>> {
        match self.metric() {
            None => Ok(None),
            Some(m) => {
                let s = seeds(&self.point, degree)?;
                Ok(Some(m.norm(&s.x, &s.y)?))
            }
        }
    }
}

/// `R_{|k} − ½ R_{·k|m} y^m` and its two terms.
fn half_form_terms(frame: &Frame, r: &Jet) -> Result<(Tensor, Tensor)> {
    let a = frame.hderiv(r)?;
    let b = frame.contract_y(&frame.hcov(&frame.vderiv_scalar(r)?)?, 1).scale(0.5);
    Ok((a, b))
}

/// `χ_{k|m} y^m`
fn chi_dot(frame: &Frame, chi: &Tensor) -> Result<Tensor> {
    Ok(frame.contract_y(&frame.hcov(chi)?, 1))
}

/// `Σ_m W^m_k v_m`
fn w_contract(w: &Tensor, v: &[f64]) -> Vec<f64> {
    let n = w.dim();
    (0..n)
        .map(|k| (0..n).map(|m| w.get(&[m, k]).value() * v[m]).sum())
        .collect()
}

fn y_norm(y: &[f64]) -> f64 {
    max_abs(y)
}

/// Magnitude of the two terms in the definition of `W^o`.
pub fn wo_scale(pp: &ProjectivePoint) -> Result<f64> {
    let (a, b) = half_form_terms(pp.hat(), &pp.hat_curvature()?.r)?;
    Ok(a.max_abs().max(b.max_abs()))
}

/// Whether `num/den` is constant on `TM` near the point: all first
/// partials of the ratio, against the size of the terms in them.
fn ratio_constant(num: &Jet, den: &Jet) -> Result<Measure> {
    let q = num.checked_div(den)?;
    let vars = q.vars();
    let d = den.value();
    let mut res = Vec::with_capacity(vars);
    let mut mag: f64 = 0.0;
    for v in 0..vars {
        res.push(q.deriv(v)?.value());
        mag = mag
            .max((num.deriv(v)?.value() / d).abs())
            .max((num.value() * den.deriv(v)?.value() / (d * d)).abs());
    }
    Ok(Measure::new(max_abs(&res), mag))
}

type CheckFn = fn(&PointCtx) -> Result<Option<Measure>>;

/// How a check's tolerance is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Tier {
    /// Pure jet pipeline.
    Jet,
    /// Consumes the volume form: quadrature tier when the volume form is
    /// computed by quadrature.
    Volume,
    Pinned(f64),
}

impl Tier {
    fn resolve(self, volume: &VolumeForm, tol: &Tolerances) -> f64 {
        match self {
            Tier::Jet => tol.jet,
            Tier::Volume if volume.uses_quadrature() => tol.quad,
            Tier::Volume => tol.jet,
            Tier::Pinned(t) => t,
        }
    }
}

/// A registered identity.
pub struct Check {
    pub id: &'static str,
    pub description: &'static str,
    pub tier: Tier,
    eval: CheckFn,
}

impl Check {
    pub fn eval(&self, ctx: &PointCtx) -> Result<Option<Measure>> {
        (self.eval)(ctx)
    }
}

macro_rules! check {
    ($id:literal, $desc:literal, $tier:expr, $f:expr) => {
        Check {
            id: $id,
            description: $desc,
            tier: $tier,
            eval: $f,
        }
    };
}

/// Every invariant of the spray, measure and projective layers, each once.
pub fn registry() -> &'static [Check] {
    &REGISTRY
}

pub const REGISTRY_SIZE: usize = 52;

static REGISTRY: [Check; REGISTRY_SIZE] = [
    // spray and metric
    check!("euler.G", "G^i_{·m} y^m = 2 G^i", Tier::Jet, euler_g),
    check!("euler.N", "N^i_{j·m} y^m = N^i_j", Tier::Jet, euler_n),
    check!("euler.F", "F_{·m} y^m = F", Tier::Jet, euler_f),
    check!("metric.positive", "F > 0 and g_ij positive definite", Tier::Jet, metric_positive),
    check!("gamma.symmetric", "Γ^i_{jk} = Γ^i_{kj}", Tier::Jet, gamma_symmetric),
    check!("connection.N", "N^i_j = Γ^i_{jk} y^k", Tier::Jet, n_is_gamma_y),
    check!("berwald.y", "y^j B_j^i_{kl} = 0", Tier::Jet, berwald_y),
    check!("berwald.riemannian", "B = 0 for a Riemannian metric", Tier::Jet, berwald_riemannian),
    check!("riemann.y", "R^i_k y^k = 0", Tier::Jet, riemann_y),
    check!("riemann.R3", "R^i_{kl} = −R^i_{lk}", Tier::Jet, riemann_r3),
    check!("riemann.contractions", "y^j R_j^i_{kl} = R^i_{kl} and R^i_{kl} y^l = R^i_k", Tier::Jet, riemann_contractions),
    check!("T.trace", "T^m_m = 0", Tier::Jet, t_trace),
    check!("T.y", "T^i_j y^j = 0", Tier::Jet, t_y),
    check!("ricci.commute-vertical", "f_{|m·k} = f_{·k|m} for f = R", Tier::Jet, ricci_1),
    check!("ricci.commute-horizontal", "f_{|k|m} − f_{|m|k} = f_{·l} R^l_{km} for f = R", Tier::Jet, ricci_2),
    check!("ricci.commute-y", "f_{|k|0} − f_{|0|k} = f_{·l} R^l_k for f = R", Tier::Jet, ricci_3),
    check!("bianchi.first", "R^i_{k|p} − R^i_{p|k} + R^i_{pk|l} y^l = 0", Tier::Jet, bianchi_first),
    check!("bianchi.trace", "R_{|p} − ⅓R_{·p|m}y^m = (R^m_{p|m} − ⅓R^m_{p·m|l}y^l)/(n−1)", Tier::Jet, bianchi_trace),
    check!("hcov.y", "y^i_{|m} = 0", Tier::Jet, hcov_y),
    check!("weyl.two-dimensional", "W = 0 in dimension two", Tier::Jet, weyl_two_dim),
    // volume and S-curvature
    check!("volume.x-only", "ln σ has no y-dependence", Tier::Volume, volume_x_only),
    check!("S.homogeneous", "S_{·m} y^m = S", Tier::Volume, s_homogeneous),
    check!("tau.homogeneous", "τ_{·m} y^m = 2τ", Tier::Volume, tau_homogeneous),
    check!("chi.y", "χ_k y^k = 0", Tier::Volume, chi_y),
    check!("chi.routes", "χ from S, from T and from R agree", Tier::Volume, chi_routes),
    check!("chi.ordering", "½(S_{·k|m} − …) and ½(S_{|m·k} − …) forms of χ agree", Tier::Volume, chi_ordering),
    check!("chi.volume", "χ from S does not depend on the volume form", Tier::Volume, chi_volume),
    check!("chi.riemann-trace", "R^m_{i·m} = −3χ_i − ½(n−1) R_{·i}", Tier::Volume, chi_riemann_trace),
    check!("S.volume-change", "S̃ = S + (n+1) f_0 under dṼ = e^{−(n+1)f} dV", Tier::Volume, s_volume_change),
    check!("bh.drift", "doubling the quadrature nodes moves ln σ_BH by ≤ 1e−8", Tier::Pinned(TOL_BH_DRIFT), bh_drift),
    // projective spray
    check!("hat.S", "Ŝ = 0", Tier::Volume, hat_s),
    check!("hat.chi", "χ̂ = 0", Tier::Volume, hat_chi),
    check!("hat.N", "N̂^i_k = N^i_k − Sδ^i_k/(n+1) − S_{·k} y^i/(n+1)", Tier::Volume, hat_n),
    check!("hat.Gamma", "Γ̂ in terms of Γ and S", Tier::Volume, hat_gamma),
    check!("hat.delta", "δ̂_k = δ_k + S_{·k} Y/(n+1) + S ∂_{y^k}/(n+1) on G^i", Tier::Volume, hat_delta),
    check!("hat.hderiv", "f_{‖k} = f_{|k} + Y(f) S_{·k}/(n+1) + S f_{·k}/(n+1) for f = R", Tier::Volume, hat_hderiv),
    check!("hat.R", "R̂ = R + τ", Tier::Volume, hat_r_scalar),
    check!("hat.Riemann", "R̂^i_k = R^i_k + τδ^i_k − ½τ_{·k} y^i + 3χ_k y^i/(n+1)", Tier::Volume, hat_riemann),
    check!("weyl.routes", "W from T and χ equals T̂", Tier::Volume, weyl_routes),
    check!("weyl.trace", "W^m_m = 0", Tier::Volume, weyl_trace),
    check!("weyl.y", "W^i_k y^k = 0", Tier::Volume, weyl_y),
    check!("weyl.volume", "T̂ does not depend on the volume form", Tier::Volume, weyl_volume),
    check!("ricci-scalar.divergence", "R_{|p} − ½R_{·p|m}y^m − (χ_{p|m}y^m + R^m_{p|m})/(n−1) = 0", Tier::Volume, ricci_scalar_divergence),
    check!("weyl.divergence", "W^m_{k|m} = (n−2)(R_{|k} − ½R_{·k|m}y^m − χ_{k|m}y^m/(n+1))", Tier::Volume, weyl_divergence),
    check!("T.divergence", "T^m_{k|m} = (n−2)(R_{|k} − ½R_{·k|m}y^m) − χ_{k|m}y^m", Tier::Volume, t_divergence),
    check!("wo.routes", "W^o by definition, via G, via div W and via div R̂ agree", Tier::Volume, wo_routes),
    check!("wo.rewrite", "W^o = ½(3R̂_{‖k} − (R̂_{‖m} y^m)_{·k})", Tier::Volume, wo_rewrite),
    check!("wo.y", "W^o_k y^k = 0", Tier::Volume, wo_y),
    check!("wo.volume-change", "W̃^o_k = W^o_k − W^m_k f_m", Tier::Volume, wo_volume_change),
    check!("bweyl.equivalence", "W^m_{k|m} − (n−2)W^m_kΞ_{·m} = (n−2)(W^o_k − W^m_k f_m)", Tier::Volume, bweyl_equivalence),
    check!("projective.W", "W is unchanged by G^i ↦ G^i + (a_m y^m) y^i", Tier::Volume, projective_w),
    check!("projective.Wo", "W^o at fixed dV is unchanged by G^i ↦ G^i + (a_m y^m) y^i", Tier::Volume, projective_wo),
];

fn euler_g(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let g = fr.coefficients_tensor();
    let lhs = fr.contract_y(&fr.vderiv(&g)?, 1);
    Ok(Some(Measure::agree(&lhs.values(), &g.scale(2.0).values())))
}

fn euler_n(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let n = fr.nonlinear();
    let lhs = fr.contract_y(&fr.vderiv(n)?, 2);
    Ok(Some(Measure::agree(&lhs.values(), &n.values())))
}

fn euler_f(c: &PointCtx) -> Result<Option<Measure>> {
    let Some(f) = c.norm(2)? else { return Ok(None) };
    let lhs = Tensor::scalar(c.dim(), f.clone()).vderiv(c.dim())?.contract_y(0, c.y(), c.dim());
    Ok(Some(Measure::agree(&lhs.values(), &[f.value()])))
}

fn metric_positive(c: &PointCtx) -> Result<Option<Measure>> {
    let Some(m) = c.metric() else { return Ok(None) };
    let f = c.norm(1)?.expect("metric").value();
    fundamental_tensor(m.as_ref(), c.point())?;
    // positive definiteness is enforced by the factorization above
    Ok(Some(Measure::new(if f > 0.0 { 0.0 } else { f.abs() + 1.0 }, f.abs())))
}

fn gamma_symmetric(c: &PointCtx) -> Result<Option<Measure>> {
    let g = c.frame().gamma();
    let n = c.dim();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                a.push(g.get(&[i, j, k]).value());
                b.push(g.get(&[i, k, j]).value());
            }
        }
    }
    Ok(Some(Measure::agree(&a, &b)))
}

fn n_is_gamma_y(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let lhs = fr.contract_y(fr.gamma(), 2);
    Ok(Some(Measure::agree(&lhs.values(), &fr.nonlinear().values())))
}

fn berwald_y(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let b = fr.berwald()?;
    // B is stored [i][j][k][l]
    let r = fr.contract_y(&b, 1);
    Ok(Some(Measure::vanishing(&r.values(), b.max_abs() * y_norm(c.y()))))
}

fn berwald_riemannian(c: &PointCtx) -> Result<Option<Measure>> {
    match c.metric() {
        Some(m) if m.is_riemannian() => {
            let b = c.frame().berwald()?;
            Ok(Some(Measure::vanishing(&b.values(), c.frame().gamma().max_abs())))
        }
        _ => Ok(None),
    }
}

fn riemann_y(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let rik = &c.curvature()?.rik;
    let r = fr.contract_y(rik, 1);
    Ok(Some(Measure::vanishing(&r.values(), rik.max_abs() * y_norm(c.y()))))
}

fn riemann_r3(c: &PointCtx) -> Result<Option<Measure>> {
    let r3 = c.curvature()?.r3(c.frame())?;
    let n = c.dim();
    let mut res = Vec::new();
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                res.push(r3.get(&[i, k, l]).value() + r3.get(&[i, l, k]).value());
            }
        }
    }
    Ok(Some(Measure::vanishing(&res, r3.max_abs())))
}

fn riemann_contractions(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let r3 = cv.r3(fr)?;
    let r4 = cv.r4(fr)?;
    let mut lhs = fr.contract_y(&r4, 1).values();
    lhs.extend(fr.contract_y(&r3, 2).values());
    let mut rhs = r3.values();
    rhs.extend(cv.rik.values());
    Ok(Some(Measure::agree(&lhs, &rhs)))
}

fn t_trace(c: &PointCtx) -> Result<Option<Measure>> {
    let cv = c.curvature()?;
    let tr = cv.t.contract(0, 1).as_scalar().value();
    let mag = cv.ric.value().abs().max(cv.r.value().abs() * c.dim() as f64);
    Ok(Some(Measure::vanishing(&[tr], mag)))
}

fn t_y(c: &PointCtx) -> Result<Option<Measure>> {
    let cv = c.curvature()?;
    let r = c.frame().contract_y(&cv.t, 1);
    let mag = cv.rik.max_abs().max(cv.r.value().abs()) * y_norm(c.y());
    Ok(Some(Measure::vanishing(&r.values(), mag)))
}

fn transpose(t: &Tensor) -> Vec<f64> {
    let n = t.dim();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(t.get(&[b, a]).value());
        }
    }
    out
}

fn ricci_1(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let r = &c.curvature()?.r;
    // [m][k] = f_{|m·k}
    let a = fr.vderiv(&fr.hderiv(r)?)?;
    // [k][m] = f_{·k|m}
    let b = fr.hcov(&fr.vderiv_scalar(r)?)?;
    Ok(Some(Measure::agree(&a.values(), &transpose(&b))))
}

fn ricci_2(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let n = c.dim();
    let hh = fr.hcov(&fr.hderiv(&cv.r)?)?;
    let r3 = cv.r3(fr)?;
    let ry = fr.vderiv_scalar(&cv.r)?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..n {
        for m in 0..n {
            lhs.push(hh.get(&[k, m]).value() - hh.get(&[m, k]).value());
            rhs.push((0..n).map(|l| ry.get(&[l]).value() * r3.get(&[l, k, m]).value()).sum());
        }
    }
    let mag = hh.max_abs();
    let mut m = Measure::agree(&lhs, &rhs);
    m.scale = m.scale.max(mag);
    Ok(Some(m))
}

fn ricci_3(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let n = c.dim();
    let hk = fr.hderiv(&cv.r)?;
    let hh = fr.hcov(&hk)?;
    let a = fr.contract_y(&hh, 1);
    let f0 = fr.contract_y(&hk, 0);
    let b = fr.hderiv(f0.as_scalar())?;
    let ry = fr.vderiv_scalar(&cv.r)?;
    let lhs: Vec<f64> = a.values().iter().zip(b.values()).map(|(u, v)| u - v).collect();
    let rhs: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|l| ry.get(&[l]).value() * cv.rik.get(&[l, k]).value()).sum())
        .collect();
    let mut m = Measure::agree(&lhs, &rhs);
    m.scale = m.scale.max(a.max_abs()).max(b.max_abs());
    Ok(Some(m))
}

fn bianchi_first(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let n = c.dim();
    let rk = fr.hcov(&cv.rik)?;
    let r3y = fr.contract_y(&fr.hcov(&cv.r3(fr)?)?, 3);
    let mut res = Vec::new();
    for i in 0..n {
        for k in 0..n {
            for p in 0..n {
                res.push(
                    rk.get(&[i, k, p]).value() - rk.get(&[i, p, k]).value()
                        + r3y.get(&[i, p, k]).value(),
                );
            }
        }
    }
    Ok(Some(Measure::vanishing(&res, rk.max_abs().max(r3y.max_abs()))))
}

fn bianchi_trace(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let n = c.dim() as f64;
    let a = fr.hderiv(&cv.r)?;
    let b = fr.contract_y(&fr.hcov(&fr.vderiv_scalar(&cv.r)?)?, 1);
    let lhs = a.sub(&b.scale(1.0 / 3.0));
    let div = fr.hcov(&cv.rik)?.contract(0, 2);
    let tr = fr.contract_y(&fr.hcov(&fr.vderiv(&cv.rik)?.contract(0, 2))?, 1);
    let rhs = div.sub(&tr.scale(1.0 / 3.0)).scale(1.0 / (n - 1.0));
    let mut m = Measure::agree(&lhs.values(), &rhs.values());
    m.scale = m.scale.max(a.max_abs()).max(div.max_abs()).max(tr.max_abs());
    Ok(Some(m))
}

fn hcov_y(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let d = fr.coefficients()[0].degree();
    let r = fr.hcov(&fr.y_field(d))?;
    Ok(Some(Measure::vanishing(&r.values(), fr.nonlinear().max_abs())))
}

fn weyl_two_dim(c: &PointCtx) -> Result<Option<Measure>> {
    if c.dim() != 2 {
        return Ok(None);
    }
    let w = c.projective().weyl(WeylRoute::ViaChi)?;
    let cv = c.curvature()?;
    Ok(Some(Measure::vanishing(&w.values(), cv.rik.max_abs().max(cv.r.value().abs()))))
}

fn volume_x_only(c: &PointCtx) -> Result<Option<Measure>> {
    let n = c.dim();
    let ls = c.projective().ln_sigma();
    let mut res: f64 = 0.0;
    let mut mag: f64 = 0.0;
    for (alpha, v) in ls.terms() {
        mag = mag.max(v.abs());
        if alpha[n..].iter().any(|&e| e > 0) {
            res = res.max(v.abs());
        }
    }
    Ok(Some(Measure::new(res, mag)))
}

fn s_homogeneous(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let s = c.projective().s();
    let lhs = fr.contract_y(&fr.vderiv_scalar(s)?, 0);
    Ok(Some(Measure::agree(&lhs.values(), &[s.value()])))
}

fn tau_homogeneous(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let tau = c.projective().tau()?;
    let lhs = fr.contract_y(&fr.vderiv_scalar(&tau)?, 0);
    Ok(Some(Measure::agree(&lhs.values(), &[2.0 * tau.value()])))
}

fn chi_y(c: &PointCtx) -> Result<Option<Measure>> {
    let chi = c.projective().chi(ChiRoute::FromS)?;
    let r = c.frame().contract_y(&chi, 0);
    let s = c.projective().s();
    let mag = chi.max_abs().max(s.value().abs()) * y_norm(c.y());
    Ok(Some(Measure::vanishing(&r.values(), mag)))
}

fn chi_routes(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let s = pp.chi(ChiRoute::FromS)?.values();
    let t = pp.chi(ChiRoute::FromT)?.values();
    let r = pp.chi(ChiRoute::FromR)?.values();
    let mut m = Measure::agree_all(&s, &[t, r]);
    m.scale = m.scale.max(c.curvature()?.t.max_abs());
    Ok(Some(m))
}

fn chi_ordering(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let a = pp.chi(ChiRoute::FromS)?;
    let b = measures::chi_from_s_swapped(pp.base(), pp.s())?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m.scale.max(pp.base().hderiv(pp.s())?.max_abs());
    Ok(Some(m))
}

fn chi_volume(c: &PointCtx) -> Result<Option<Measure>> {
    let a = c.projective().chi(ChiRoute::FromS)?;
    let b = c.rescaled()?.chi(ChiRoute::FromS)?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m.scale.max(c.rescaled()?.base().hderiv(c.rescaled()?.s())?.max_abs());
    Ok(Some(m))
}

fn chi_riemann_trace(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let n = c.dim() as f64;
    let lhs = fr.vderiv(&cv.rik)?.contract(0, 2);
    let chi = c.projective().chi(ChiRoute::FromS)?;
    let ry = fr.vderiv_scalar(&cv.r)?;
    let rhs = chi.scale(-3.0).sub(&ry.scale(0.5 * (n - 1.0)));
    let mut m = Measure::agree(&lhs.values(), &rhs.values());
    m.scale = m.scale.max(ry.max_abs() * n);
    Ok(Some(m))
}

fn s_volume_change(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let vc = pp.volume_change(&c.f)?;
    let n = c.dim() as f64;
    let direct = c.rescaled()?.s().value();
    let predicted = pp.s().value() + (n + 1.0) * vc.f0;
    let mut m = Measure::agree(&[direct], &[predicted]);
    m.scale = m.scale.max(pp.s().value().abs()).max(((n + 1.0) * vc.f0).abs());
    Ok(Some(m))
}

fn bh_nodes(v: &VolumeForm) -> Option<usize> {
    match v {
        VolumeForm::BusemannHausdorff { nodes } => Some(*nodes),
        VolumeForm::Rescaled { base, .. } => bh_nodes(base),
        _ => None,
    }
}

fn bh_drift(c: &PointCtx) -> Result<Option<Measure>> {
    let (Some(nodes), Some(m)) = (bh_nodes(c.volume()), c.metric()) else {
        return Ok(None);
    };
    let d = measures::bh_drift(m.as_ref(), &c.point().x, nodes)?;
    Ok(Some(Measure { residual: d, scale: 1.0 }))
}

fn hat_s(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let mag = pp.s().value().abs().max(pp.hat().nonlinear().contract(0, 1).max_abs());
    Ok(Some(Measure::vanishing(&[pp.hat_s()?.value()], mag)))
}

fn hat_chi(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let chi = pp.hat_chi()?;
    let mag = pp.base().hderiv(pp.s())?.max_abs().max(pp.s().value().abs());
    Ok(Some(Measure::vanishing(&chi.values(), mag)))
}

fn hat_n(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let fr = pp.base();
    let n = c.dim();
    let k = c.k();
    let s = pp.s().value();
    let sy = fr.vderiv_scalar(pp.s())?.values();
    let nn = fr.nonlinear();
    let mut rhs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1.0 } else { 0.0 };
            rhs.push(nn.get(&[i, j]).value() - k * s * d - k * sy[j] * c.y()[i]);
        }
    }
    Ok(Some(Measure::agree(&pp.hat().nonlinear().values(), &rhs)))
}

fn hat_gamma(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let fr = pp.base();
    let n = c.dim();
    let k = c.k();
    let sy = fr.vderiv_scalar(pp.s())?;
    let syy = fr.vderiv(&sy)?;
    let g = fr.gamma();
    let mut rhs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let dij = if i == j { 1.0 } else { 0.0 };
                let dil = if i == l { 1.0 } else { 0.0 };
                rhs.push(
                    g.get(&[i, j, l]).value()
                        - k * sy.get(&[l]).value() * dij
                        - k * sy.get(&[j]).value() * dil
                        - k * syy.get(&[l, j]).value() * c.y()[i],
                );
            }
        }
    }
    Ok(Some(Measure::agree(&pp.hat().gamma().values(), &rhs)))
}

/// Both sides of `f_{‖k} = f_{|k} + Y(f) S_{·k}/(n+1) + S f_{·k}/(n+1)`.
fn delta_sides(c: &PointCtx, f: &Jet) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let pp = c.projective();
    let fr = pp.base();
    let n = c.dim();
    let k = c.k();
    let hat: Vec<f64> = pp.hat().delta(f)?.iter().map(Jet::value).collect();
    let base: Vec<f64> = fr.delta(f)?.iter().map(Jet::value).collect();
    let fy: Vec<f64> = (0..n).map(|m| f.deriv(fr.y_slot(m)).map(|d| d.value())).collect::<Result<_>>()?;
    let yf: f64 = fy.iter().zip(c.y()).map(|(a, b)| a * b).sum();
    let sy = fr.vderiv_scalar(pp.s())?.values();
    let s = pp.s().value();
    let rhs: Vec<f64> = (0..n).map(|j| base[j] + k * yf * sy[j] + k * s * fy[j]).collect();
    let mag = max_abs(&base).max(max_abs(&fy) * s.abs()).max(yf.abs() * max_abs(&sy));
    Ok((hat, rhs, mag))
}

fn hat_delta(c: &PointCtx) -> Result<Option<Measure>> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut mag: f64 = 0.0;
    for g in c.frame().coefficients() {
        let (a, b, m) = delta_sides(c, g)?;
        lhs.extend(a);
        rhs.extend(b);
        mag = mag.max(m);
    }
    let mut m = Measure::agree(&lhs, &rhs);
    m.scale = m.scale.max(mag);
    Ok(Some(m))
}

fn hat_hderiv(c: &PointCtx) -> Result<Option<Measure>> {
    let r = c.curvature()?.r.clone();
    let (a, b, mag) = delta_sides(c, &r)?;
    let mut m = Measure::agree(&a, &b);
    m.scale = m.scale.max(mag);
    Ok(Some(m))
}

fn tau_terms(c: &PointCtx) -> Result<f64> {
    let pp = c.projective();
    let k = c.k();
    let s = pp.s().value();
    let s0 = pp.base().contract_y(&pp.base().hderiv(pp.s())?, 0).as_scalar().value();
    Ok((k * s).powi(2).max((k * s0).abs()))
}

fn hat_r_scalar(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let r = c.curvature()?.r.value();
    let tau = pp.tau()?.value();
    let rhat = pp.hat_curvature()?.r.value();
    let mut m = Measure::agree(&[rhat], &[r + tau]);
    m.scale = m.scale.max(r.abs()).max(tau_terms(c)?);
    Ok(Some(m))
}

fn hat_riemann(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let fr = pp.base();
    let n = c.dim();
    let k = c.k();
    let rik = &c.curvature()?.rik;
    let tau = pp.tau()?;
    let ty = fr.vderiv_scalar(&tau)?.values();
    let chi = pp.chi(ChiRoute::FromS)?.values();
    let y = c.y();
    let mut rhs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1.0 } else { 0.0 };
            rhs.push(
                rik.get(&[i, j]).value() + tau.value() * d - 0.5 * ty[j] * y[i]
                    + 3.0 * k * chi[j] * y[i],
            );
        }
    }
    let lhs = pp.hat_curvature()?.rik.values();
    let mut m = Measure::agree(&lhs, &rhs);
    m.scale = m.scale.max(rik.max_abs()).max(tau_terms(c)?);
    Ok(Some(m))
}

fn weyl_routes(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let a = pp.weyl(WeylRoute::ViaHat)?;
    let b = pp.weyl(WeylRoute::ViaChi)?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m.scale.max(c.curvature()?.rik.max_abs()).max(pp.hat_curvature()?.rik.max_abs());
    Ok(Some(m))
}

fn weyl_mag(c: &PointCtx) -> Result<f64> {
    let cv = c.curvature()?;
    Ok(cv.rik.max_abs().max(cv.r.value().abs()).max(c.projective().hat_curvature()?.rik.max_abs()))
}

fn weyl_trace(c: &PointCtx) -> Result<Option<Measure>> {
    let w = c.projective().weyl(WeylRoute::ViaHat)?;
    let tr = w.contract(0, 1).as_scalar().value();
    Ok(Some(Measure::vanishing(&[tr], weyl_mag(c)? * c.dim() as f64)))
}

fn weyl_y(c: &PointCtx) -> Result<Option<Measure>> {
    let w = c.projective().weyl(WeylRoute::ViaHat)?;
    let r = c.frame().contract_y(&w, 1);
    Ok(Some(Measure::vanishing(&r.values(), weyl_mag(c)? * y_norm(c.y()))))
}

fn weyl_volume(c: &PointCtx) -> Result<Option<Measure>> {
    let a = c.projective().weyl(WeylRoute::ViaHat)?;
    let other = c.rescaled()?;
    let b = other.weyl(WeylRoute::ViaHat)?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m.scale.max(weyl_mag(c)?).max(other.hat_curvature()?.rik.max_abs());
    Ok(Some(m))
}

fn ricci_scalar_divergence(c: &PointCtx) -> Result<Option<Measure>> {
    let fr = c.frame();
    let cv = c.curvature()?;
    let n = c.dim() as f64;
    let (a, b) = half_form_terms(fr, &cv.r)?;
    let chi = c.projective().chi(ChiRoute::FromS)?;
    let cd = chi_dot(fr, &chi)?;
    let div = fr.hcov(&cv.rik)?.contract(0, 2);
    let res = a.sub(&b).sub(&cd.add(&div).scale(1.0 / (n - 1.0)));
    let mag = a.max_abs().max(b.max_abs()).max(cd.max_abs()).max(div.max_abs());
    Ok(Some(Measure::vanishing(&res.values(), mag)))
}

fn weyl_divergence(c: &PointCtx) -> Result<Option<Measure>> {
    let n = c.dim();
    if n < 3 {
        return Ok(None);
    }
    let fr = c.frame();
    let cv = c.curvature()?;
    let w = c.projective().weyl(WeylRoute::ViaChi)?;
    let lhs = fr.hcov(&w)?.contract(0, 2);
    let (a, b) = half_form_terms(fr, &cv.r)?;
    let cd = chi_dot(fr, &c.projective().chi(ChiRoute::FromS)?)?;
    let rhs = a.sub(&b).sub(&cd.scale(c.k())).scale(n as f64 - 2.0);
    let mut m = Measure::agree(&lhs.values(), &rhs.values());
    m.scale = m.scale.max(a.max_abs()).max(b.max_abs()).max(cd.max_abs());
    Ok(Some(m))
}

fn t_divergence(c: &PointCtx) -> Result<Option<Measure>> {
    let n = c.dim() as f64;
    let fr = c.frame();
    let cv = c.curvature()?;
    let lhs = fr.hcov(&cv.t)?.contract(0, 2);
    let (a, b) = half_form_terms(fr, &cv.r)?;
    let cd = chi_dot(fr, &c.projective().chi(ChiRoute::FromS)?)?;
    let rhs = a.sub(&b).scale(n - 2.0).sub(&cd);
    let mut m = Measure::agree(&lhs.values(), &rhs.values());
    m.scale = m.scale.max(a.max_abs()).max(b.max_abs()).max(cd.max_abs());
    Ok(Some(m))
}

fn wo_routes(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let def = pp.berwald_weyl(WoRoute::Definition)?.values();
    let others: Vec<Vec<f64>> = WoRoute::available(c.dim())
        .into_iter()
        .filter(|r| *r != WoRoute::Definition)
        .map(|r| pp.berwald_weyl(r).map(|t| t.values()))
        .collect::<Result<_>>()?;
    let mut m = Measure::agree_all(&def, &others);
    m.scale = m.scale.max(wo_scale(pp)?);
    Ok(Some(m))
}

fn wo_rewrite(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let a = pp.berwald_weyl(WoRoute::Definition)?;
    let b = pp.berwald_weyl_rewritten()?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m.scale.max(wo_scale(pp)?);
    Ok(Some(m))
}

fn wo_y(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let wo = pp.berwald_weyl(WoRoute::Definition)?;
    let r = c.frame().contract_y(&wo, 0);
    Ok(Some(Measure::vanishing(&r.values(), wo_scale(pp)? * y_norm(c.y()))))
}

fn wo_volume_change(c: &PointCtx) -> Result<Option<Measure>> {
    let pp = c.projective();
    let (direct, res) = pp.volume_change_wo(&c.f)?;
    let mag = direct
        .max_abs()
        .max(wo_scale(pp)?)
        .max(wo_scale(c.rescaled()?)?);
    Ok(Some(Measure::vanishing(&res.values(), mag)))
}

fn bweyl_equivalence(c: &PointCtx) -> Result<Option<Measure>> {
    let n = c.dim();
    if n < 3 {
        return Ok(None);
    }
    let pp = c.projective();
    let (b, cc) = pp.bweyl_residual(&c.f)?;
    let div = pp.base().hcov(&pp.weyl(WeylRoute::ViaChi)?)?.contract(0, 2);
    let mut m = Measure::agree(&cc.values(), &b.scale(n as f64 - 2.0).values());
    m.scale = m.scale.max(div.max_abs()).max(wo_scale(pp)? * (n as f64 - 2.0));
    Ok(Some(m))
}

/// The projective point of `G^i + (a_m y^m) y^i` with the same `ln σ`.
fn perturbed(c: &PointCtx) -> Result<ProjectivePoint> {
    let sp = PerturbedSpray {
        base: c.spray.clone(),
        oneform: MetricSpec::default_oneform(c.dim()),
    };
    let dg = spray_degree(c.degree)?;
    let frame = Frame::from_spray(&sp, c.point(), dg)?;
    ProjectivePoint::from_parts(frame, c.projective().ln_sigma().clone())
}

fn projective_w(c: &PointCtx) -> Result<Option<Measure>> {
    let other = perturbed(c)?;
    let a = c.projective().weyl(WeylRoute::ViaHat)?;
    let b = other.weyl(WeylRoute::ViaHat)?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m
        .scale
        .max(weyl_mag(c)?)
        .max(other.curvature()?.rik.max_abs());
    Ok(Some(m))
}

fn projective_wo(c: &PointCtx) -> Result<Option<Measure>> {
    let other = perturbed(c)?;
    let a = c.projective().berwald_weyl(WoRoute::Definition)?;
    let b = other.berwald_weyl(WoRoute::Definition)?;
    let mut m = Measure::agree(&a.values(), &b.values());
    m.scale = m.scale.max(wo_scale(c.projective())?).max(wo_scale(&other)?);
    Ok(Some(m))
}

type ClaimFn = Box<dyn Fn(&PointCtx) -> Result<Option<Measure>> + Send + Sync>;

/// A check bound to a fixture.
struct Claim {
    id: String,
    description: String,
    tier: Tier,
    eval: ClaimFn,
}

impl Claim {
    fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        tier: Tier,
        eval: impl Fn(&PointCtx) -> Result<Option<Measure>> + Send + Sync + 'static,
    ) -> Claim {
        Claim {
            id: id.into(),
            description: description.into(),
            tier,
            eval: Box::new(eval),
        }
    }
}

/// A metric or spray with a volume form and the claims checked on it.
struct Fixture {
    spec: MetricSpec,
    volume: VolumeForm,
    region: Option<SampleBox>,
    f: Expr,
    claims: Vec<Claim>,
}

struct RunSettings {
    points: usize,
    seed: u64,
    degree: usize,
    tol: Tolerances,
    exec: Execution,
}

fn default_f() -> Expr {
    Expr::parse("0.1*x1*x2").expect("literal")
}

/// Samples the fixture and evaluates every claim at every point.
fn run_fixture(fx: &Fixture, s: &RunSettings) -> Result<(FixtureInfo, Vec<CheckSummary>, Vec<CheckResult>)> {
    let spray = fx.spec.build()?.spray();
    let region = fx.region.clone().unwrap_or_else(|| fx.spec.default_box());
    let pts = catalog::sample(spray.as_ref(), s.points, s.seed, &region)?;
    let info = FixtureInfo {
        metric: spray.label(),
        volume: fx.volume.to_string(),
    };
    let tols: Vec<f64> = fx.claims.iter().map(|c| c.tier.resolve(&fx.volume, &s.tol)).collect();
    let per_point: Vec<Vec<Option<CheckResult>>> = s.exec.map(&pts, |p| {
        let ctx = PointCtx::new(spray.clone(), fx.volume.clone(), p.clone(), s.degree, fx.f.clone());
        fx.claims
            .iter()
            .zip(&tols)
            .map(|(cl, &tol)| {
                let out = match &ctx {
                    Err(e) => Err(e.clone()),
                    Ok(ctx) => (cl.eval)(ctx),
                };
                match out {
                    Ok(None) => None,
                    Ok(Some(m)) => Some(CheckResult::from_measure(&cl.id, p, m, tol, s.tol.floor)),
                    Err(e) => Some(CheckResult::from_error(&cl.id, p, &e, tol)),
                }
            })
            .collect()
    });
    let mut summaries = Vec::with_capacity(fx.claims.len());
    let mut all = Vec::new();
    let label = format!("{} | {}", info.metric, info.volume);
    for (ci, cl) in fx.claims.iter().enumerate() {
        let rs: Vec<&CheckResult> = per_point.iter().filter_map(|row| row[ci].as_ref()).collect();
        summaries.push(summarize(cl, &label, tols[ci], pts.len(), &rs, s.tol.floor));
        all.extend(rs.into_iter().cloned());
    }
    Ok((info, summaries, all))
}

fn summarize(
    cl: &Claim,
    fixture: &str,
    tol: f64,
    total: usize,
    rs: &[&CheckResult],
    floor: f64,
) -> CheckSummary {
    let worst = rs
        .iter()
        .max_by(|a, b| a.excess(floor).total_cmp(&b.excess(floor)))
        .copied();
    let max_residual = rs
        .iter()
        .map(|r| if r.residual.is_nan() { f64::INFINITY } else { r.residual })
        .fold(0.0, f64::max);
    let failed = rs.iter().filter(|r| !r.pass).count();
    CheckSummary {
        id: cl.id.clone(),
        description: cl.description.clone(),
        fixture: fixture.to_string(),
        tol,
        evaluated: rs.len(),
        skipped: total - rs.len(),
        failed,
        max_residual,
        scale: worst.map_or(0.0, |w| w.scale),
        worst_point: worst.map(|w| w.point.clone()),
        pass: failed == 0,
        error: rs.iter().find_map(|r| r.error.clone()),
    }
}

fn run(name: &str, fixtures: Vec<Fixture>, s: &RunSettings, notes: Vec<String>) -> Result<SuiteReport> {
    let mut report = SuiteReport {
        name: name.to_string(),
        fixtures: Vec::new(),
        seed: s.seed,
        points: s.points,
        degree: s.degree,
        checks: Vec::new(),
        pass: true,
        notes,
        results: Vec::new(),
    };
    for fx in &fixtures {
        let (info, sums, results) = run_fixture(fx, s)?;
        report.fixtures.push(info);
        report.checks.extend(sums);
        report.results.extend(results);
    }
    report.pass = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub points: usize,
    pub seed: u64,
    pub region: Option<SampleBox>,
    pub degree: usize,
    pub tol: Tolerances,
    pub exec: Execution,
    /// Function of `x` for the volume-change checks.
    pub f: Expr,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            points: DEFAULT_POINTS,
            seed: 0,
            region: None,
            degree: DEFAULT_DEGREE,
            tol: Tolerances::default(),
            exec: Execution::default(),
            f: default_f(),
        }
    }
}

impl SuiteOptions {
    fn settings(&self) -> RunSettings {
        RunSettings {
            points: self.points,
            seed: self.seed,
            degree: self.degree,
            tol: self.tol,
            exec: self.exec,
        }
    }
}

fn registry_claims() -> Vec<Claim> {
    registry()
        .iter()
        .map(|c| Claim::new(c.id, c.description, c.tier, c.eval))
        .collect()
}

/// Runs every registered identity on a fixture. Errors only on
/// configuration problems; failures at single points are recorded.
pub fn identity_suite(spec: &MetricSpec, volume: &VolumeForm, opts: &SuiteOptions) -> Result<SuiteReport> {
    let fx = Fixture {
        spec: spec.clone(),
        volume: volume.clone(),
        region: opts.region.clone(),
        f: opts.f.clone(),
        claims: registry_claims(),
    };
    run("identities", vec![fx], &opts.settings(), Vec::new())
}

/// Runs the named registered checks only.
pub fn run_checks(
    spec: &MetricSpec,
    volume: &VolumeForm,
    ids: &[&str],
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    let mut claims = Vec::with_capacity(ids.len());
    for id in ids {
        let c = registry()
            .iter()
            .find(|c| c.id == *id)
            .ok_or_else(|| GeomError::UnknownFixture(format!("check {id}")))?;
        claims.push(Claim::new(c.id, c.description, c.tier, c.eval));
    }
    let fx = Fixture {
        spec: spec.clone(),
        volume: volume.clone(),
        region: opts.region.clone(),
        f: opts.f.clone(),
        claims,
    };
    run("checks", vec![fx], &opts.settings(), Vec::new())
}

pub const THEOREMS: [&str; 8] = ["thm12", "thm15", "cor14", "cor33", "prop32", "thm43", "ex17", "ex45"];

#[derive(Debug, Clone)]
pub struct TheoremOptions {
    pub points: usize,
    pub seed: u64,
    pub degree: usize,
    pub tol: Tolerances,
    /// Replaces the fixtures' volume forms where the statement holds for
    /// any volume form.
    pub volumes: Vec<VolumeForm>,
    pub bh_nodes: usize,
    /// Node count per angle for Busemann–Hausdorff quadrature in dimension 4.
    pub bh_nodes_4d: usize,
    pub exec: Execution,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        TheoremOptions {
            points: DEFAULT_POINTS,
            seed: 0,
            degree: DEFAULT_DEGREE,
            tol: Tolerances::default(),
            volumes: Vec::new(),
            bh_nodes: measures::DEFAULT_BH_NODES,
            bh_nodes_4d: 32,
            exec: Execution::default(),
        }
    }
}

/// Tolerance of the vanishing statements about `W^o`.
pub const TOL_WO: f64 = 1e-6;
/// Tolerance for the volume independence of `W^o` in dimension two.
pub const TOL_COR14: f64 = 1e-8;

fn wo_vanishes(id: &str) -> Claim {
    Claim::new(id, "W^o = 0 by every route", Tier::Pinned(TOL_WO), |c: &PointCtx| {
        let pp = c.projective();
        let mut vals = Vec::new();
        for r in WoRoute::available(c.dim()) {
            vals.extend(pp.berwald_weyl(r)?.values());
        }
        Ok(Some(Measure::vanishing(&vals, wo_scale(pp)?)))
    })
}

fn weyl_vanishes(id: &str) -> Claim {
    Claim::new(id, "W = 0", Tier::Jet, |c: &PointCtx| {
        let w = c.projective().weyl(WeylRoute::ViaHat)?;
        Ok(Some(Measure::vanishing(&w.values(), weyl_mag(c)?)))
    })
}

fn constant_ratio(id: &str, description: &str, tier: Tier, which: fn(&PointCtx) -> Result<(Jet, Jet)>) -> Claim {
    Claim::new(id, description, tier, move |c: &PointCtx| {
        let (num, den) = which(c)?;
        Ok(Some(ratio_constant(&num, &den)?))
    })
}

/// `S/F` with `F` at the degree of `S`.
fn s_over_f(c: &PointCtx) -> Result<(Jet, Jet)> {
    let s = c.projective().s().clone();
    let f = c.norm(s.degree())?.ok_or_else(|| GeomError::InvalidParams("needs a metric".into()))?;
    Ok((s, f))
}

/// `R/F²`
fn r_over_f2(c: &PointCtx) -> Result<(Jet, Jet)> {
    let r = c.curvature()?.r.clone();
    let f = c.norm(r.degree())?.ok_or_else(|| GeomError::InvalidParams("needs a metric".into()))?;
    Ok((r, &f * &f))
}

fn fixture(spec: MetricSpec, volume: VolumeForm, claims: Vec<Claim>) -> Fixture {
    Fixture {
        spec,
        volume,
        region: None,
        f: default_f(),
        claims,
    }
}

fn tag(id: &str, spec: &MetricSpec, volume: &VolumeForm) -> String {
    let sp = spec.build().map(|b| b.spray().label()).unwrap_or_else(|_| spec.family().to_string());
    format!("{id}[{sp}|{volume}]")
}

/// Runs the fixtures of a named statement and reports its conclusion as
/// residuals.
pub fn theorem_check(name: &str, opts: &TheoremOptions) -> Result<SuiteReport> {
    let s = RunSettings {
        points: opts.points,
        seed: opts.seed,
        degree: opts.degree,
        tol: opts.tol,
        exec: opts.exec,
    };
    let vols = |defaults: Vec<VolumeForm>| {
        if opts.volumes.is_empty() {
            defaults
        } else {
            opts.volumes.clone()
        }
    };
    let bh = VolumeForm::BusemannHausdorff { nodes: opts.bh_nodes };
    let mut notes = Vec::new();
    let fixtures: Vec<Fixture> = match name {
        "thm12" => {
            let spec = MetricSpec::Funk { dim: 3 };
            vols(vec![
                VolumeForm::Coordinate,
                VolumeForm::parse("explicit:exp(x1)")?,
                VolumeForm::parse("explicit:1 + 0.5*x2^2 + 0.25*x1*x3")?,
            ])
            .into_iter()
            .map(|v| {
                let claims = vec![
                    weyl_vanishes(&tag("thm12.W", &spec, &v)),
                    wo_vanishes(&tag("thm12.Wo", &spec, &v)),
                ];
                fixture(spec.clone(), v, claims)
            })
            .collect()
        }
        "thm15" => [MetricSpec::Funk { dim: 3 }, MetricSpec::HyperbolicBall { dim: 3 }]
            .into_iter()
            .map(|spec| {
                let claims = vec![
                    constant_ratio(&tag("thm15.constant-S", &spec, &bh), "S/F is constant", Tier::Volume, s_over_f),
                    constant_ratio(&tag("thm15.constant-Ricci", &spec, &bh), "R/F² is constant", Tier::Jet, r_over_f2),
                    Claim::new(tag("thm15.Wo", &spec, &bh), "W^o = 0 for the Busemann–Hausdorff volume", Tier::Volume, |c: &PointCtx| {
                        let pp = c.projective();
                        let wo = pp.berwald_weyl(WoRoute::Definition)?;
                        Ok(Some(Measure::vanishing(&wo.values(), wo_scale(pp)?)))
                    }),
                ];
                fixture(spec, bh.clone(), claims)
            })
            .collect(),
        "cor14" => {
            let defaults = vec![VolumeForm::Coordinate, VolumeForm::parse("explicit:exp(x1 - 0.5*x2^2)")?];
            let vs = vols(defaults.clone());
            let (a, b) = match vs.as_slice() {
                [a] => (a.clone(), defaults[1].clone()),
                [a, b, ..] => (a.clone(), b.clone()),
                [] => unreachable!(),
            };
            [MetricSpec::conformal_flat_2d(), MetricSpec::generic_randers(2)]
                .into_iter()
                .map(|spec| {
                    let other = b.clone();
                    let claims = vec![
                        Claim::new(
                            tag("cor14.independent", &spec, &b),
                            "W^o agrees for two volume forms",
                            Tier::Pinned(TOL_COR14),
                            move |c: &PointCtx| {
                                let pa = c.projective();
                                let pb = c.with_volume(&other)?;
                                let wa = pa.berwald_weyl(WoRoute::Definition)?;
                                let wb = pb.berwald_weyl(WoRoute::Definition)?;
                                let mut m = Measure::agree(&wa.values(), &wb.values());
                                m.scale = m.scale.max(wo_scale(pa)?).max(wo_scale(&pb)?);
                                Ok(Some(m))
                            },
                        ),
                        Claim::new(
                            tag("cor14.formula", &spec, &a),
                            "W^o = R_{|k} − ½R_{·k|m}y^m − ⅓χ_{k|m}y^m",
                            Tier::Volume,
                            |c: &PointCtx| {
                                let fr = c.frame();
                                let (x, y) = half_form_terms(fr, &c.curvature()?.r)?;
                                let cd = chi_dot(fr, &c.projective().chi(ChiRoute::FromT)?)?;
                                let rhs = x.sub(&y).sub(&cd.scale(1.0 / 3.0));
                                let wo = c.projective().berwald_weyl(WoRoute::Definition)?;
                                let mut m = Measure::agree(&wo.values(), &rhs.values());
                                m.scale = m.scale.max(x.max_abs()).max(y.max_abs()).max(cd.max_abs());
                                Ok(Some(m))
                            },
                        ),
                    ];
                    fixture(spec, a.clone(), claims)
                })
                .collect()
        }
        "cor33" => {
            let specs = [
                MetricSpec::RoundSphere,
                MetricSpec::HyperbolicBall { dim: 2 },
                MetricSpec::Funk { dim: 2 },
            ];
            let vs = vols(vec![VolumeForm::parse("explicit:exp(x1)")?]);
            specs
                .iter()
                .flat_map(|spec| {
                    vs.iter().map(move |v| {
                        let claims = vec![
                            constant_ratio(&tag("cor33.constant-flag", spec, v), "R/F² is constant", Tier::Jet, r_over_f2),
                            wo_vanishes(&tag("cor33.Wo", spec, v)),
                        ];
                        fixture(spec.clone(), v.clone(), claims)
                    })
                })
                .collect()
        }
        "prop32" => {
            let conformal = MetricSpec::conformal_flat_2d();
            let sphere = MetricSpec::RoundSphere;
            let pairs = [
                (conformal, VolumeForm::parse("explicit:exp(2*x1^2)")?),
                (sphere, VolumeForm::parse("explicit:4/(1 + x1^2 + x2^2)^2")?),
            ];
            pairs
                .into_iter()
                .map(|(spec, default_vol)| {
                    let v = opts.volumes.first().cloned().unwrap_or(default_vol);
                    let riem = spec.riemannian_metric().expect("riemannian fixture");
                    let tol = opts.tol.jet;
                    let mut claims = vec![
                        Claim::new(tag("prop32.einstein", &spec, &v), "W^o = F³(θ/F)_{·k}, θ = K_{x^m} y^m", Tier::Pinned(TOL_WO), move |c: &PointCtx| {
                            let pp = c.projective();
                            let fr = pp.base();
                            let k = gauss_curvature(&riem, fr.space(), &c.point().x, 2)?;
                            let res = crate::projective::einstein_wo_check(c.spray(), c.volume(), c.point(), &k, c.degree, tol)?;
                            let wo = pp.berwald_weyl(WoRoute::Definition)?;
                            let mag = wo_scale(pp)?.max(wo.max_abs());
                            Ok(Some(Measure::vanishing(&res.values(), mag)))
                        }),
                    ];
                    if matches!(spec, MetricSpec::RoundSphere) {
                        claims.push(wo_vanishes(&tag("prop32.sphere-Wo", &spec, &v)));
                    }
                    fixture(spec, v, claims)
                })
                .collect()
        }
        "thm43" => {
            let randers = MetricSpec::generic_randers(3);
            let funk = MetricSpec::Funk { dim: 3 };
            let vs = vols(vec![VolumeForm::Coordinate]);
            let mut out = Vec::new();
            for v in &vs {
                for (spec, f) in [
                    (randers.clone(), "0.1*x1*x2"),
                    (randers.clone(), "0.05*x2 - 0.1*x1*x3 + 0.2*x3^2"),
                    (funk.clone(), "0"),
                ] {
                    let fx = Expr::parse(f)?;
                    let id = |s: &str| format!("{}{{f={f}}}", tag(s, &spec, v));
                    let claims = vec![
                        Claim::new(id("thm43.conditions"), "divergence residual = (n−2) × W^o change residual", Tier::Volume, bweyl_equivalence),
                        Claim::new(id("thm43.wo-change"), "W̃^o_k = W^o_k − W^m_k f_m", Tier::Pinned(TOL_WO), wo_volume_change),
                        Claim::new(id("thm43.s-change"), "S̃ = S + (n+1) f_0", Tier::Pinned(1e-10), s_volume_change),
                    ];
                    let mut fxr = fixture(spec, v.clone(), claims);
                    fxr.f = fx;
                    out.push(fxr);
                }
            }
            out
        }
        "ex17" => {
            let spec = MetricSpec::FourthRoot {
                n1: 2,
                n2: 2,
                c: 0.5,
                charts: (FactorChart::Polar, FactorChart::Polar),
            };
            let v = VolumeForm::BusemannHausdorff { nodes: opts.bh_nodes_4d };
            let claims = vec![
                Claim::new(tag("ex17.B", &spec, &v), "B = 0", Tier::Jet, |c: &PointCtx| {
                    let b = c.frame().berwald()?;
                    Ok(Some(Measure::vanishing(&b.values(), c.frame().gamma().max_abs())))
                }),
                Claim::new(tag("ex17.Ric", &spec, &v), "Ric = 0", Tier::Jet, |c: &PointCtx| {
                    let cv = c.curvature()?;
                    let mag = c.frame().nonlinear().max_abs().powi(2);
                    Ok(Some(Measure::vanishing(&[cv.ric.value()], mag)))
                }),
                Claim::new(tag("ex17.S", &spec, &v), "S = 0 for the Busemann–Hausdorff volume", Tier::Pinned(TOL_QUAD), |c: &PointCtx| {
                    let pp = c.projective();
                    let fr = pp.base();
                    let trace = fr.nonlinear().contract(0, 1).max_abs();
                    Ok(Some(Measure::vanishing(&[pp.s().value()], trace)))
                }),
                Claim::new(tag("ex17.Wo", &spec, &v), "W^o = 0 for the Busemann–Hausdorff volume", Tier::Pinned(TOL_QUAD), |c: &PointCtx| {
                    let pp = c.projective();
                    let wo = pp.berwald_weyl(WoRoute::Definition)?;
                    Ok(Some(Measure::vanishing(&wo.values(), wo_scale(pp)?)))
                }),
            ];
            vec![fixture(spec, v, claims)]
        }
        "ex45" => {
            let n = 3;
            let spec = MetricSpec::Square { dim: n, squared: true };
            let flat = square_metric_flat_volume(n)?;
            let v = opts.volumes.first().cloned().unwrap_or(VolumeForm::Coordinate);
            let witness = square_metric_witness(n, &v)?;
            notes.extend(square_metric_notes(&spec, opts)?);
            let gate = vec![
                Claim::new(tag("ex45.projectively-ricci-flat", &spec, &flat), "R̂ = 0", Tier::Jet, |c: &PointCtx| {
                    let r = c.curvature()?.r.value();
                    let rhat = c.projective().hat_curvature()?.r.value();
                    Ok(Some(Measure::vanishing(&[rhat], r.abs().max(tau_terms(c)?))))
                }),
                Claim::new(tag("ex45.Wo", &spec, &flat), "W^o = 0", Tier::Pinned(TOL_WO), |c: &PointCtx| {
                    let pp = c.projective();
                    let wo = pp.berwald_weyl(WoRoute::Definition)?;
                    Ok(Some(Measure::vanishing(&wo.values(), wo_scale(pp)?)))
                }),
            ];
            let criterion = vec![
                Claim::new(tag("ex45.wo-witness", &spec, &v), "W^o_k = W^m_k f_m for the witnessing f", Tier::Pinned(TOL_WO), |c: &PointCtx| {
                    let pp = c.projective();
                    let (b, _) = pp.bweyl_residual(&c.f)?;
                    let w = pp.weyl(WeylRoute::ViaChi)?;
                    let vc = pp.volume_change(&c.f)?;
                    let mag = wo_scale(pp)?.max(max_abs(&w_contract(&w, &vc.fm)));
                    Ok(Some(Measure::vanishing(&b.values(), mag)))
                }),
                Claim::new(tag("ex45.divergence-witness", &spec, &v), "W^m_{k|m} = (n−2) W^m_k Ξ_{·m} for the witnessing f", Tier::Pinned(TOL_WO), |c: &PointCtx| {
                    let pp = c.projective();
                    let (_, cc) = pp.bweyl_residual(&c.f)?;
                    let div = pp.base().hcov(&pp.weyl(WeylRoute::ViaChi)?)?.contract(0, 2);
                    Ok(Some(Measure::vanishing(&cc.values(), div.max_abs().max(wo_scale(pp)?))))
                }),
            ];
            let mut second = fixture(spec.clone(), v, criterion);
            second.f = witness;
            vec![fixture(spec, flat, gate), second]
        }
        other => return Err(GeomError::UnknownFixture(other.to_string())),
    };
    run(name, fixtures, &s, notes)
}

/// `|x|²` as an expression.
fn radius_squared(n: usize) -> String {
    (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ")
}

/// The volume form `(1+4|x|²)^{−(n+2)/2} dx` under which the square metric
/// has vanishing projective Ricci scalar.
pub fn square_metric_flat_volume(n: usize) -> Result<VolumeForm> {
    VolumeForm::parse(&format!(
        "explicit:(1 + 4*({}))^(-{})",
        radius_squared(n),
        (n as f64 + 2.0) / 2.0
    ))
}

/// `f` with `dV = e^{(n+1)f} dṼ`, `dṼ` the projectively Ricci-flat volume.
fn square_metric_witness(n: usize, volume: &VolumeForm) -> Result<Expr> {
    let flat = format!("{}*ln(1 + 4*({}))", (n as f64 + 2.0) / 2.0, radius_squared(n));
    let own = match volume {
        VolumeForm::Coordinate => "0".to_string(),
        VolumeForm::Explicit(e) => format!("ln({e})"),
        other => {
            return Err(GeomError::InvalidParams(format!(
                "the square-metric check needs a closed-form volume, got {other}"
            )))
        }
    };
    Expr::parse(&format!("(({own}) + {flat})/{}", n + 1))
}

/// Values of `R̂` for the coordinate and Busemann–Hausdorff volumes at the
/// first sample point, which are not zero.
fn square_metric_notes(spec: &MetricSpec, opts: &TheoremOptions) -> Result<Vec<String>> {
    let spray = spec.build()?.spray();
    let p = catalog::sample(spray.as_ref(), 1, opts.seed, &spec.default_box())?;
    let mut out = Vec::new();
    for v in [VolumeForm::Coordinate, VolumeForm::BusemannHausdorff { nodes: opts.bh_nodes }] {
        let pp = ProjectivePoint::new(spray.as_ref(), &v, &p[0], opts.degree)?;
        out.push(format!(
            "R̂ = {:.6} under the {v} volume at the first sample point",
            pp.hat_curvature()?.r.value()
        ));
    }
    Ok(out)
}

/// Busemann–Hausdorff quadrature against the closed form of a Randers
/// density at one base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureCheck {
    pub x: Vec<f64>,
    /// `σ_BH` by quadrature against the closed form.
    pub density: f64,
    pub density_scale: f64,
    /// Taylor coefficients of `ln σ_BH` up to the requested degree.
    pub partials: f64,
    pub partials_scale: f64,
    /// Change of `ln σ_BH` when the node count doubles.
    pub drift: f64,
}

/// Samples base points of a Randers fixture and compares the quadrature
/// density with its closed form.
pub fn randers_bh_check(
    spec: &MetricSpec,
    points: usize,
    seed: u64,
    nodes: usize,
    degree: usize,
    exec: Execution,
) -> Result<Vec<QuadratureCheck>> {
    let metric = spec.randers_metric()?;
    let spray = spec.build()?.spray();
    let pts = catalog::sample(spray.as_ref(), points, seed, &spec.default_box())?;
    let n = metric.alpha.dim;
    let space = JetSpace::new(n)?;
    exec.map(&pts, |p| {
        let xs: Vec<Jet> = (0..n).map(|i| space.seed(i, p.x[i], degree)).collect::<Result<_>>()?;
        let quad = measures::bh_ln_sigma(&metric, &xs, nodes, Execution::Sequential)?;
        let closed = metric.bh_ln_sigma(&xs)?;
        let (q, c) = (quad.value().exp(), closed.value().exp());
        let pq: Vec<f64> = quad.terms().map(|(_, v)| v).collect();
        let pc: Vec<f64> = closed.terms().map(|(_, v)| v).collect();
        let m = Measure::agree(&pq, &pc);
        Ok(QuadratureCheck {
            x: p.x.clone(),
            density: (q - c).abs(),
            density_scale: c.abs(),
            partials: m.residual,
            partials_scale: m.scale,
            drift: measures::bh_drift(&metric, &p.x, nodes)?,
        })
    })
    .into_iter()
    .collect()
}

/// Variable of a finite-difference step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdVar {
    X(usize),
    Y(usize),
}

impl FdVar {
    /// Jet variable in the `(x, y)` space of dimension `n`.
    pub fn slot(self, n: usize) -> usize {
        match self {
            FdVar::X(i) => i,
            FdVar::Y(i) => n + i,
        }
    }

    pub fn all(n: usize) -> Vec<FdVar> {
        (0..n).map(FdVar::X).chain((0..n).map(FdVar::Y)).collect()
    }
}

fn shifted(p: &TangentPoint, var: FdVar, h: f64) -> Result<TangentPoint> {
    let mut q = p.clone();
    match var {
        FdVar::X(i) => q.x[i] += h,
        FdVar::Y(i) => q.y[i] += h,
    }
    TangentPoint::new(q.x, q.y)
}

fn central<F>(field: &F, p: &TangentPoint, vars: &[FdVar], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&TangentPoint) -> Result<Vec<f64>>,
{
    let at = |steps: &[(FdVar, f64)]| -> Result<Vec<f64>> {
        let mut q = p.clone();
        for &(v, s) in steps {
            q = shifted(&q, v, s)?;
        }
        field(&q)
    };
    let comb = |terms: Vec<(f64, Vec<f64>)>, denom: f64| -> Vec<f64> {
        let len = terms[0].1.len();
        (0..len)
            .map(|i| terms.iter().map(|(c, v)| c * v[i]).sum::<f64>() / denom)
            .collect()
    };
    match vars {
        [v] => Ok(comb(vec![(1.0, at(&[(*v, h)])?), (-1.0, at(&[(*v, -h)])?)], 2.0 * h)),
        [a, b] if a == b => Ok(comb(
            vec![(1.0, at(&[(*a, h)])?), (-2.0, field(p)?), (1.0, at(&[(*a, -h)])?)],
            h * h,
        )),
        [a, b] => Ok(comb(
            vec![
                (1.0, at(&[(*a, h), (*b, h)])?),
                (-1.0, at(&[(*a, h), (*b, -h)])?),
                (-1.0, at(&[(*a, -h), (*b, h)])?),
                (1.0, at(&[(*a, -h), (*b, -h)])?),
            ],
            4.0 * h * h,
        )),
        _ => Err(GeomError::InvalidParams(format!(
            "finite differences of order {} not supported",
            vars.len()
        ))),
    }
}

/// Central finite-difference partial derivative of order 1 or 2 of a
/// vector-valued field, with one Richardson step (error `O(h⁴)`).
pub fn fd_oracle<F>(field: F, p: &TangentPoint, vars: &[FdVar], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&TangentPoint) -> Result<Vec<f64>>,
{
    let coarse = central(&field, p, vars, step)?;
    let fine = central(&field, p, vars, step / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Values of `G^i`, `N^i_j`, `R` and `S` at a point.
fn fd_fields(spray: &dyn Spray, volume: &VolumeForm, q: &TangentPoint) -> Result<Vec<Vec<f64>>> {
    let frame = Frame::from_spray(spray, q, 3)?;
    let ls = volume.ln_sigma(spray, &frame, 3)?;
    let s = measures::s_curvature(&frame, &ls)?;
    Ok(vec![
        frame.coefficients().iter().map(Jet::value).collect(),
        frame.nonlinear().values(),
        vec![frame.curvature()?.r.value()],
        vec![s.value()],
    ])
}

pub const FD_FIELDS: [&str; 4] = ["G", "N", "R", "S"];

/// Agreement of jet partials of `G^i`, `N^i_j`, `R` and `S` with finite
/// differences: every first partial and the second partials along each
/// variable and each adjacent pair. One measure per field and order,
/// named `G:d1`, `G:d2`, …
pub fn fd_agreement(
    spray: &dyn Spray,
    volume: &VolumeForm,
    p: &TangentPoint,
    step1: f64,
    step2: f64,
) -> Result<Vec<(String, Measure)>> {
    let n = p.dim();
    let frame = Frame::from_spray(spray, p, 5)?;
    let ls = volume.ln_sigma(spray, &frame, 5)?;
    let s = measures::s_curvature(&frame, &ls)?;
    let r = frame.curvature()?.r;
    let jets: Vec<Vec<Jet>> = vec![
        frame.coefficients().to_vec(),
        frame.nonlinear().comps().to_vec(),
        vec![r],
        vec![s],
    ];
    let vars = FdVar::all(n);
    let mut orders: Vec<(usize, Vec<FdVar>)> = vars.iter().map(|v| (1, vec![*v])).collect();
    for (i, v) in vars.iter().enumerate() {
        orders.push((2, vec![*v, *v]));
        orders.push((2, vec![*v, vars[(i + 1) % vars.len()]]));
    }
    let mut acc: Vec<[(f64, f64); 2]> = vec![[(0.0, 0.0); 2]; FD_FIELDS.len()];
    for (order, vs) in &orders {
        let h = if *order == 1 { step1 } else { step2 };
        let flat = |q: &TangentPoint| -> Result<Vec<f64>> {
            Ok(fd_fields(spray, volume, q)?.concat())
        };
        let fd = fd_oracle(flat, p, vs, h)?;
        let mut offset = 0;
        for (fi, field) in jets.iter().enumerate() {
            for (ci, jet) in field.iter().enumerate() {
                let mut d = jet.clone();
                for v in vs {
                    d = d.deriv(v.slot(n))?;
                }
                let exact = d.value();
                let slot = &mut acc[fi][*order - 1];
                slot.0 = slot.0.max((fd[offset + ci] - exact).abs());
                slot.1 = slot.1.max(exact.abs());
            }
            offset += field.len();
        }
    }
    let mut out = Vec::new();
    for (fi, name) in FD_FIELDS.iter().enumerate() {
        for o in 0..2 {
            let (res, mag) = acc[fi][o];
            out.push((format!("{name}:d{}", o + 1), Measure::new(res, mag)));
        }
    }
    Ok(out)
}

/// Gauss curvature of a two-dimensional Riemannian metric from its
/// Christoffel symbols, as a jet of the given degree in the base variables
/// of `space` (which may carry further variables).
pub fn gauss_curvature(metric: &RiemannianMetric, space: JetSpace, x: &[f64], degree: usize) -> Result<Jet> {
    if metric.dim != 2 {
        return Err(GeomError::Dimension {
            dim: metric.dim,
            reason: "Gauss curvature is defined for surfaces",
        });
    }
    let d = degree + 2;
    let xs: Vec<Jet> = (0..2).map(|i| space.seed(i, x[i], d)).collect::<Result<_>>()?;
    let a: Vec<Jet> = match metric.matrix(&xs)? {
        catalog::AlphaMatrix::Conformal(c) => {
            let z = space.zero(d);
            vec![c.clone(), z.clone(), z, c]
        }
        catalog::AlphaMatrix::Full(a) => a,
    };
    let at = |i: usize, j: usize| &a[i * 2 + j];
    let det = &(at(0, 0) * at(1, 1)) - &(at(0, 1) * at(1, 0));
    let inv_det = det.recip()?;
    let inv = [
        at(1, 1) * &inv_det,
        -(at(0, 1) * &inv_det),
        -(at(1, 0) * &inv_det),
        at(0, 0) * &inv_det,
    ];
    // da[m][i][j] = ∂_m a_ij
    let da: Vec<Vec<Jet>> = (0..2)
        .map(|m| a.iter().map(|e| e.deriv(m)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    // gamma[k][i][j] = Γ^k_ij
    let mut gamma = Vec::with_capacity(8);
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = space.zero(d - 1);
                for l in 0..2 {
                    let t = &(&da[i][j * 2 + l] + &da[j][i * 2 + l]) - &da[l][i * 2 + j];
                    acc += &(&inv[k * 2 + l] * &t);
                }
                gamma.push(acc.scale(0.5));
            }
        }
    }
    let g = |k: usize, i: usize, j: usize| &gamma[k * 4 + i * 2 + j];
    // R^l_{101} = ∂_0 Γ^l_11 − ∂_1 Γ^l_10 + Γ^l_0m Γ^m_11 − Γ^l_1m Γ^m_10
    let mut k_num = space.zero(d - 2);
    for l in 0..2 {
        let mut r = &g(l, 1, 1).deriv(0)? - &g(l, 1, 0).deriv(1)?;
        for m in 0..2 {
            r += &(g(l, 0, m) * g(m, 1, 1));
            r -= &(g(l, 1, m) * g(m, 1, 0));
        }
        k_num += &(at(0, l) * &r);
    }
    k_num.checked_div(&det).map(|k| k.truncate(degree))
}
