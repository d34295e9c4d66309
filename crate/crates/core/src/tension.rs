//! Tension field of a vector field `σ : (M, g) → (TM, G)` and the pointwise
//! identities built from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::geometry::{
    field_calculus, field_calculus_stencil, scalar_laplacian, FieldCalculus, HalfNormSquared, LocalField, Manifold,
    Vector, VectorField, STENCIL_STEP,
};
use crate::kk::{KkMetricSpec, MetricAt};
use crate::profile::ScalarProfile;

/// Default tolerance for analytic evaluations.
pub const ANALYTIC_TOL: f64 = 1e-8;
/// Default tolerance for stencil evaluations.
pub const STENCIL_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensionFlags {
    pub harmonic_map: bool,
    pub harmonic_section: bool,
    /// `τᵛ ∥ σ`; a unit harmonic section only when `|σ|` is constant.
    pub unit_section: bool,
}

/// `τ(σ) = (τʰ)ʰ + (τᵛ)ᵛ` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct TensionResult {
    pub point: Vector,
    pub horizontal: Vector,
    pub vertical: Vector,
    /// `|τ|_G` at `(p, σ(p))`.
    pub norm_g: f64,
    pub horizontal_norm: f64,
    pub vertical_norm: f64,
    /// Norm of the part of `τᵛ` orthogonal to `σ`.
    pub unit_residual: f64,
    /// `|σ|²` at the point.
    pub norm_sq: f64,
    pub flags: TensionFlags,
}

/// Which derivative path feeds the tension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalculusPath {
    #[default]
    Analytic,
    Stencil,
}

impl CalculusPath {
    pub fn default_tol(self) -> f64 {
        match self {
            CalculusPath::Analytic => ANALYTIC_TOL,
            CalculusPath::Stencil => STENCIL_TOL,
        }
    }

    pub fn calculus(self, m: &Manifold, field: &dyn VectorField, p: &Vector) -> Result<FieldCalculus> {
        match self {
            CalculusPath::Analytic => field_calculus(m, field, p),
            CalculusPath::Stencil => field_calculus_stencil(m, field, p, STENCIL_STEP),
        }
    }
}

/// Tension of `field` at `p` on the analytic path.
pub fn tension(m: &Manifold, spec: &KkMetricSpec, field: &dyn VectorField, p: &Vector) -> Result<TensionResult> {
    let fc = field_calculus(m, field, p)?;
    tension_from_calculus(m, spec, &fc, ANALYTIC_TOL)
}

/// Horizontal part `−(B/A) Σ R(∇_{e_i}σ, σ)e_i + (2A'/A) X(σ)`.
pub fn horizontal_tension(m: &Manifold, v: &MetricAt, fc: &FieldCalculus) -> Vector {
    let p = &fc.point;
    let mut curv = Vector::zeros(p.len());
    for (e, d) in fc.frame.iter().zip(&fc.derivatives) {
        curv += m.curvature(p, d, &fc.value, e);
    }
    curv * (-v.b / v.a) + &fc.grad_half_norm * (2.0 * v.da / v.a)
}

/// Vertical part, the harmonic-section operator.
pub fn vertical_tension(m: &Manifold, v: &MetricAt, fc: &FieldCalculus) -> Vector {
    let x = &fc.grad_half_norm;
    let x_sq = m.norm_sq(&fc.point, x);
    let dim = m.dim() as f64;
    let coeff = (-dim * v.da + (v.dc - 2.0 * v.db * v.c / v.b) * x_sq + (v.c - v.db) * fc.jacobian_norm_sq)
        / v.radial();
    -&fc.rough_laplacian + fc.derivative_along(m, x) * (2.0 * v.db / v.b) + &fc.value * coeff
}

pub fn tension_from_calculus(m: &Manifold, spec: &KkMetricSpec, fc: &FieldCalculus, tol: f64) -> Result<TensionResult> {
    let p = &fc.point;
    let v = spec.at_checked(fc.norm_sq)?;
    let horizontal = horizontal_tension(m, &v, fc);
    let vertical = vertical_tension(m, &v, fc);
    let h_sq = m.norm_sq(p, &horizontal);
    let v_sq = m.norm_sq(p, &vertical);
    let along = m.inner(p, &vertical, &fc.value);
    let norm_g = (v.a * h_sq + v.b * v_sq + v.c * along * along).max(0.0).sqrt();
    let unit_residual = if fc.norm_sq > 0.0 {
        m.norm_sq(p, &(&vertical - &fc.value * (along / fc.norm_sq))).sqrt()
    } else {
        v_sq.sqrt()
    };
    let vertical_norm = v_sq.sqrt();
    Ok(TensionResult {
        point: p.clone(),
        horizontal,
        vertical,
        norm_g,
        horizontal_norm: h_sq.sqrt(),
        vertical_norm,
        unit_residual,
        norm_sq: fc.norm_sq,
        flags: TensionFlags {
            harmonic_map: norm_g < tol,
            harmonic_section: vertical_norm < tol,
            unit_section: unit_residual < tol,
        },
    })
}

/// `κ(Div σ · σ − ∇_σ σ)`, the horizontal tension for `A = B` on a base of
/// constant sectional curvature `κ`.
pub fn constant_curvature_horizontal(m: &Manifold, fc: &FieldCalculus) -> Option<Vector> {
    let kappa = m.constant_curvature()?;
    Some((&fc.value * fc.divergence - fc.self_derivative(m)) * kappa)
}

/// `B(k²) + k² B'(k²)`; vanishes exactly when a non-parallel field of
/// constant norm `k` can be harmonic.
pub fn constant_norm_condition(b: &ScalarProfile, k: f64) -> f64 {
    let t = k * k;
    let (v, d) = b.eval(t);
    v + t * d
}

/// `∇*∇σ − |∇σ|²σ` for a unit field.
pub fn unit_section_residual(m: &Manifold, field: &dyn VectorField, p: &Vector) -> Result<Vector> {
    let fc = field_calculus(m, field, p)?;
    if (fc.norm_sq.sqrt() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "unit section residual needs |σ| = 1, got {}",
            fc.norm_sq.sqrt()
        )));
    }
    Ok(&fc.rough_laplacian - &fc.value * fc.jacobian_norm_sq)
}

/// `−(B + tC)⟨τᵛ, σ⟩/|σ|²`: how far the harmonic-section equation is from
/// balancing along `σ`.
pub fn sigma_defect(m: &Manifold, spec: &KkMetricSpec, field: &dyn VectorField, p: &Vector) -> Result<f64> {
    let fc = field_calculus(m, field, p)?;
    if fc.norm_sq <= 0.0 {
        return Err(Error::Domain("defect along σ is undefined where σ vanishes".into()));
    }
    let v = spec.at_checked(fc.norm_sq)?;
    let tv = vertical_tension(m, &v, &fc);
    Ok(-v.radial() * m.inner(p, &tv, &fc.value) / fc.norm_sq)
}

/// `Div[Div(X)X − ∇_X X] + K` for the unit field `X`; zero by the surface
/// curvature identity.
pub fn surface_identity_residual(m: &Manifold, unit_field: &dyn VectorField, p: &Vector) -> Result<f64> {
    if m.dim() != 2 {
        return Err(Error::Unsupported(format!("surface identity on {}", m.id())));
    }
    let k = m.gaussian_curvature(p)?;
    let local = LocalField::new(m, unit_field, p)?;
    let x = m.tangent_project(p, local.value())?;
    if (m.norm_sq(p, &x) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("surface identity needs a unit field".into()));
    }
    let frame = m.frame(p);
    let g = |a: &Vector, b: &Vector| m.inner(p, a, b);
    let mut div = 0.0;
    let mut x_div = 0.0;
    let mut second_trace = 0.0;
    let mut composed = 0.0;
    for e in &frame {
        let de = local.derivative(e);
        div += g(&de, e);
        x_div += g(&local.second(&x, e), e);
        second_trace += g(&local.second(e, &x), e);
        composed += g(&local.derivative(&de), e);
    }
    Ok(x_div + div * div - second_trace - composed + k)
}

/// `⟨∇*∇σ, σ⟩ − Ric(σ, σ) − ½|L_σ g|² + (Div σ)²`, whose integral vanishes on
/// closed manifolds.
pub fn yano_integrand(m: &Manifold, fc: &FieldCalculus) -> f64 {
    m.inner(&fc.point, &fc.rough_laplacian, &fc.value) - m.ricci_quadratic(&fc.point, &fc.value)
        - 0.5 * fc.lie_norm_sq
        + fc.divergence * fc.divergence
}

/// One named pointwise identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedResidual {
    pub name: String,
    pub value: Option<f64>,
    pub skipped: Option<String>,
}

impl NamedResidual {
    fn done(name: &str, value: f64) -> Self {
        NamedResidual {
            name: name.into(),
            value: Some(value),
            skipped: None,
        }
    }

    fn skipped(name: &str, reason: impl Into<String>) -> Self {
        NamedResidual {
            name: name.into(),
            value: None,
            skipped: Some(reason.into()),
        }
    }
}

/// Pointwise identity residuals at `p`:
///
/// * `bochner`: `Δ(|σ|²/2) = ⟨∇*∇σ, σ⟩ − |∇σ|²`
/// * `section_norm`: for a harmonic section,
///   `Δ(|σ|²/2) = (−(B + tB')|∇σ|² + (2B' + tC')|X(σ)|² − m A' t)/(B + tC)`
/// * `horizontal_constant_curvature`: `τʰ` against `(B/A)κ(Div σ σ − ∇_σσ) + (2A'/A)X(σ)`
/// * `surface`: the curvature identity for `σ/|σ|` on surfaces
/// * `yano_integrand`: the value of the Yano integrand (not a residual)
pub fn identity_checks(m: &Manifold, spec: &KkMetricSpec, field: &dyn VectorField, p: &Vector) -> Result<Vec<NamedResidual>> {
    let fc = field_calculus(m, field, p)?;
    let v = spec.at_checked(fc.norm_sq)?;
    let lap = scalar_laplacian(m, &HalfNormSquared(field), p)?;
    let mut out = Vec::new();

    let bochner = m.inner(p, &fc.rough_laplacian, &fc.value) - fc.jacobian_norm_sq;
    out.push(NamedResidual::done("bochner", (lap - bochner).abs()));

    let t = fc.norm_sq;
    let x_sq = m.norm_sq(p, &fc.grad_half_norm);
    let rhs = (-(v.b + t * v.db) * fc.jacobian_norm_sq + (2.0 * v.db + t * v.dc) * x_sq
        - m.dim() as f64 * v.da * t)
        / v.radial();
    out.push(NamedResidual::done("section_norm", (lap - rhs).abs()));

    match m.constant_curvature() {
        Some(kappa) => {
            let th = horizontal_tension(m, &v, &fc);
            let expected = (&fc.value * fc.divergence - fc.self_derivative(m)) * (kappa * v.b / v.a)
                + &fc.grad_half_norm * (2.0 * v.da / v.a);
            out.push(NamedResidual::done(
                "horizontal_constant_curvature",
                m.norm_sq(p, &(th - expected)).sqrt(),
            ));
        }
        None => out.push(NamedResidual::skipped(
            "horizontal_constant_curvature",
            "base curvature is not constant",
        )),
    }

    if m.dim() != 2 {
        out.push(NamedResidual::skipped("surface", "base is not a surface"));
    } else {
        let unit = UnitOf(field);
        match surface_identity_residual(m, &unit, p) {
            Ok(r) => out.push(NamedResidual::done("surface", r.abs())),
            Err(e) => out.push(NamedResidual::skipped("surface", e.to_string())),
        }
    }

    out.push(NamedResidual::done("yano_integrand", yano_integrand(m, &fc)));
    Ok(out)
}

struct UnitOf<'a>(&'a dyn VectorField);

impl VectorField for UnitOf<'_> {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<crate::geometry::Jet> {
        let jet = self.0.jet(m, x)?;
        crate::geometry::normalize_jet(m, x, &jet, crate::fields::NORMALIZATION_FLOOR)
            .ok_or_else(|| Error::Domain("field vanishes".into()))
    }
}

/// Max and mean of a residual over the sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
}

impl ResidualStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return ResidualStats { max: 0.0, mean: 0.0 };
        }
        ResidualStats {
            max: values.iter().copied().fold(0.0, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Harmonicity class of a field over a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "harmonic map")]
    HarmonicMap,
    #[serde(rename = "harmonic section")]
    HarmonicSection,
    #[serde(rename = "unit harmonic section")]
    UnitHarmonicSection,
    #[serde(rename = "not harmonic")]
    NotHarmonic,
    #[serde(rename = "obstructed")]
    Obstructed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::HarmonicMap => "harmonic map",
            Verdict::HarmonicSection => "harmonic section",
            Verdict::UnitHarmonicSection => "unit harmonic section",
            Verdict::NotHarmonic => "not harmonic",
            Verdict::Obstructed => "obstructed",
        }
    }
}

/// Tension residuals of one (field, metric) pair over sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub field_id: String,
    pub metric_id: String,
    pub manifold_id: String,
    pub samples: usize,
    pub tol: f64,
    pub norm_g: ResidualStats,
    pub horizontal: ResidualStats,
    pub vertical: ResidualStats,
    pub unit: ResidualStats,
    pub verdict: Verdict,
}

/// Evaluates the tension at every point (in parallel) and classifies the
/// field by the worst point.
pub fn residual_report(
    m: &Manifold,
    spec: &KkMetricSpec,
    field: &FieldSpec,
    points: &[Vector],
    path: CalculusPath,
    tol: f64,
) -> Result<ResidualReport> {
    let results: Vec<TensionResult> = points
        .par_iter()
        .map(|p| {
            let fc = path.calculus(m, field, p)?;
            tension_from_calculus(m, spec, &fc, tol)
        })
        .collect::<Result<_>>()?;
    let collect = |f: fn(&TensionResult) -> f64| ResidualStats::of(&results.iter().map(f).collect::<Vec<_>>());
    let norm_g = collect(|r| r.norm_g);
    let horizontal = collect(|r| r.horizontal_norm);
    let vertical = collect(|r| r.vertical_norm);
    let unit = collect(|r| r.unit_residual);
    // τᵛ ∥ σ is the equation of critical points among sections of constant
    // norm, so it only classifies fields whose norm is constant
    let norms = results.iter().map(|r| r.norm_sq);
    let norm_spread = norms.clone().fold(f64::NEG_INFINITY, f64::max) - norms.fold(f64::INFINITY, f64::min);
    let verdict = if norm_g.max < tol {
        Verdict::HarmonicMap
    } else if vertical.max < tol {
        Verdict::HarmonicSection
    } else if unit.max < tol && norm_spread < tol {
        Verdict::UnitHarmonicSection
    } else {
        Verdict::NotHarmonic
    };
    Ok(ResidualReport {
        field_id: field.id(),
        metric_id: spec.id(),
        manifold_id: m.id(),
        samples: results.len(),
        tol,
        norm_g,
        horizontal,
        vertical,
        unit,
        verdict,
    })
}
