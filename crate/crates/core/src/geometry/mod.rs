//! Concrete Riemannian base manifolds: round spheres embedded in Euclidean
//! space, and two-tori with a flat or conformally flat metric.
//!
//! Curvature follows `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, so that the
//! unit sphere satisfies `R(X,Y)Y = X` for orthonormal `X, Y`. Laplacians are
//! nonnegative: `Δf = −tr Hess f` and `∇*∇σ = −tr ∇²σ`.

mod calculus;
mod jet;

pub use calculus::*;
pub use jet::*;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Maximum distance from the manifold accepted for an input point.
pub const ON_MANIFOLD_TOL: f64 = 1e-8;
/// Maximum normal component accepted for an input tangent vector.
pub const TANGENCY_TOL: f64 = 1e-12;

/// One term `amp · sin(kx·x + phase_x) · sin(ky·y + phase_y)`.
///
/// `kx = 0, phase_x = π/2` turns the first factor into the constant 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amp: f64,
    pub kx: f64,
    pub ky: f64,
    #[serde(default)]
    pub phase_x: f64,
    #[serde(default)]
    pub phase_y: f64,
}

/// A smooth doubly 2π-periodic function with closed-form derivatives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TorusFunction {
    pub terms: Vec<TrigTerm>,
}

impl TorusFunction {
    pub fn zero() -> Self {
        TorusFunction { terms: Vec::new() }
    }

    /// `amp · sin x · sin y`
    pub fn sin_product(amp: f64) -> Self {
        TorusFunction {
            terms: vec![TrigTerm {
                amp,
                kx: 1.0,
                ky: 1.0,
                phase_x: 0.0,
                phase_y: 0.0,
            }],
        }
    }

    /// `amp · sin y`, invariant under translations in `x`.
    pub fn sin_y(amp: f64) -> Self {
        TorusFunction {
            terms: vec![TrigTerm {
                amp,
                kx: 0.0,
                ky: 1.0,
                phase_x: PI / 2.0,
                phase_y: 0.0,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            let ok = [t.kx, t.ky, t.amp, t.phase_x, t.phase_y]
                .iter()
                .all(|v| v.is_finite());
            if !ok || t.kx.fract() != 0.0 || t.ky.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "torus function term needs finite values and integer wave numbers, got {t:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amp * (t.kx * x + t.phase_x).sin() * (t.ky * y + t.phase_y).sin())
            .sum()
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let (sx, cx) = (t.kx * x + t.phase_x).sin_cos();
            let (sy, cy) = (t.ky * y + t.phase_y).sin_cos();
            g[0] += t.amp * t.kx * cx * sy;
            g[1] += t.amp * t.ky * sx * cy;
        }
        g
    }

    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for t in &self.terms {
            let (sx, cx) = (t.kx * x + t.phase_x).sin_cos();
            let (sy, cy) = (t.ky * y + t.phase_y).sin_cos();
            h[0][0] -= t.amp * t.kx * t.kx * sx * sy;
            h[1][1] -= t.amp * t.ky * t.ky * sx * sy;
            h[0][1] += t.amp * t.kx * t.ky * cx * cy;
        }
        h[1][0] = h[0][1];
        h
    }

    pub fn flat_laplacian(&self, x: f64, y: f64) -> f64 {
        let h = self.hessian(x, y);
        h[0][0] + h[1][1]
    }

    pub fn jet(&self, x: f64, y: f64) -> ScalarJet {
        let g = self.gradient(x, y);
        let h = self.hessian(x, y);
        ScalarJet {
            value: self.value(x, y),
            gradient: Vector::from_row_slice(&g),
            hessian: Matrix::from_row_slice(2, 2, &[h[0][0], h[0][1], h[1][0], h[1][1]]),
        }
    }
}

/// A concrete base manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    /// The unit sphere `Sⁿ ⊂ ℝⁿ⁺¹`.
    RoundSphere { n: usize },
    /// `ℝ² / (L₁ℤ × L₂ℤ)` with the Euclidean metric.
    FlatTorus { periods: [f64; 2] },
    /// `ℝ² / (2πℤ)²` with the metric `e^{2u}(dx² + dy²)`.
    ConformalTorus { u: TorusFunction },
}

impl Manifold {
    pub fn sphere(n: usize) -> Self {
        Manifold::RoundSphere { n }
    }

    pub fn flat_torus(l1: f64, l2: f64) -> Self {
        Manifold::FlatTorus { periods: [l1, l2] }
    }

    pub fn square_flat_torus() -> Self {
        Manifold::FlatTorus {
            periods: [2.0 * PI, 2.0 * PI],
        }
    }

    pub fn conformal_torus(u: TorusFunction) -> Self {
        Manifold::ConformalTorus { u }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Manifold::RoundSphere { n } if *n < 2 => Err(Error::InvalidInput(format!(
                "round sphere needs dimension >= 2, got {n}"
            ))),
            Manifold::FlatTorus { periods } if !periods.iter().all(|l| l.is_finite() && *l > 0.0) => {
                Err(Error::InvalidInput(format!(
                    "torus periods must be positive, got {periods:?}"
                )))
            }
            Manifold::ConformalTorus { u } => u.validate(),
            _ => Ok(()),
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::RoundSphere { n } => *n,
            _ => 2,
        }
    }

    /// Number of ambient (or coordinate) components of points and vectors.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::RoundSphere { n } => n + 1,
            _ => 2,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Manifold::RoundSphere { .. })
    }

    pub fn periods(&self) -> Option<[f64; 2]> {
        match self {
            Manifold::RoundSphere { .. } => None,
            Manifold::FlatTorus { periods } => Some(*periods),
            Manifold::ConformalTorus { .. } => Some([2.0 * PI, 2.0 * PI]),
        }
    }

    /// Stable identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            Manifold::RoundSphere { n } => format!("S{n}"),
            Manifold::FlatTorus { periods } => format!("T2[{}x{}]", periods[0], periods[1]),
            Manifold::ConformalTorus { u } => {
                let terms: Vec<String> = u
                    .terms
                    .iter()
                    .map(|t| format!("{}:{}:{}:{}:{}", t.amp, t.kx, t.ky, t.phase_x, t.phase_y))
                    .collect();
                format!("T2conf[{}]", terms.join(";"))
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Manifold::RoundSphere { n } => sphere_volume(*n),
            Manifold::FlatTorus { periods } => periods[0] * periods[1],
            Manifold::ConformalTorus { .. } => f64::NAN,
        }
    }

    /// Distance of `p` from the manifold (zero for tori).
    pub fn off_manifold_distance(&self, p: &Vector) -> f64 {
        match self {
            Manifold::RoundSphere { .. } => (p.norm() - 1.0).abs(),
            _ => 0.0,
        }
    }

    pub fn check_point(&self, p: &Vector) -> Result<()> {
        if p.len() != self.ambient_dim() || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "expected a finite point with {} components, got {}",
                self.ambient_dim(),
                p.len()
            )));
        }
        let distance = self.off_manifold_distance(p);
        if distance > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { distance });
        }
        Ok(())
    }

    pub fn check_tangent(&self, p: &Vector, v: &Vector) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::InvalidInput(format!(
                "expected a vector with {} components, got {}",
                self.ambient_dim(),
                v.len()
            )));
        }
        if self.is_sphere() {
            let normal = p.dot(v).abs();
            if normal > TANGENCY_TOL * v.norm().max(1.0) {
                return Err(Error::NotTangent { normal });
            }
        }
        Ok(())
    }

    /// Projects an ambient vector onto `T_pM`.
    pub fn tangent_project(&self, p: &Vector, v: &Vector) -> Result<Vector> {
        self.check_point(p)?;
        if v.len() != self.ambient_dim() {
            return Err(Error::InvalidInput(format!(
                "expected a vector with {} components, got {}",
                self.ambient_dim(),
                v.len()
            )));
        }
        Ok(self.project_unchecked(p, v))
    }

    pub(crate) fn project_unchecked(&self, p: &Vector, v: &Vector) -> Vector {
        match self {
            Manifold::RoundSphere { .. } => v - p * (p.dot(v) / p.norm_squared()),
            _ => v.clone(),
        }
    }

    /// Retraction onto the manifold (normalization on spheres).
    pub fn retract(&self, p: &Vector) -> Vector {
        match self {
            Manifold::RoundSphere { .. } => p / p.norm(),
            _ => p.clone(),
        }
    }

    /// Jet of the conformal exponent `u` at `x` (only for conformal tori).
    pub fn conformal_factor_jet(&self, x: &Vector) -> Option<ScalarJet> {
        match self {
            Manifold::ConformalTorus { u } if !u.is_zero() => Some(u.jet(x[0], x[1])),
            _ => None,
        }
    }

    fn conformal_exponent(&self, p: &Vector) -> f64 {
        match self {
            Manifold::ConformalTorus { u } => u.value(p[0], p[1]),
            _ => 0.0,
        }
    }

    /// `g_p(x, y)`
    pub fn inner(&self, p: &Vector, x: &Vector, y: &Vector) -> f64 {
        match self {
            Manifold::ConformalTorus { .. } => (2.0 * self.conformal_exponent(p)).exp() * x.dot(y),
            _ => x.dot(y),
        }
    }

    pub fn norm_sq(&self, p: &Vector, x: &Vector) -> f64 {
        self.inner(p, x, x)
    }

    /// Riemannian volume density relative to the coordinate measure.
    pub fn volume_density(&self, p: &Vector) -> f64 {
        match self {
            Manifold::ConformalTorus { .. } => (2.0 * self.conformal_exponent(p)).exp(),
            _ => 1.0,
        }
    }

    /// Deterministic orthonormal frame of `T_pM`.
    ///
    /// On spheres, Gram–Schmidt runs over the projected ambient basis vectors,
    /// always taking next the candidate with the largest remaining norm.
    pub fn frame(&self, p: &Vector) -> Vec<Vector> {
        match self {
            Manifold::RoundSphere { n } => {
                let dim = n + 1;
                let mut candidates: Vec<Vector> = (0..dim)
                    .map(|k| {
                        let mut e = Vector::zeros(dim);
                        e[k] = 1.0;
                        self.project_unchecked(p, &e)
                    })
                    .collect();
                let mut frame = Vec::with_capacity(*n);
                while frame.len() < *n {
                    let (best, _) = candidates
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (i, c.norm()))
                        .fold((0, -1.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
                    let chosen = candidates.swap_remove(best);
                    let e = &chosen / chosen.norm();
                    for c in candidates.iter_mut() {
                        let d = c.dot(&e);
                        *c -= &e * d;
                    }
                    frame.push(e);
                }
                frame
            }
            _ => {
                let s = (-self.conformal_exponent(p)).exp();
                vec![
                    Vector::from_row_slice(&[s, 0.0]),
                    Vector::from_row_slice(&[0.0, s]),
                ]
            }
        }
    }

    /// Sectional curvature when it is constant.
    pub fn constant_curvature(&self) -> Option<f64> {
        match self {
            Manifold::RoundSphere { .. } => Some(1.0),
            Manifold::FlatTorus { .. } => Some(0.0),
            Manifold::ConformalTorus { u } if u.is_zero() => Some(0.0),
            Manifold::ConformalTorus { .. } => None,
        }
    }

    fn torus_curvature(&self, p: &Vector) -> f64 {
        match self {
            Manifold::ConformalTorus { u } => {
                -(-2.0 * u.value(p[0], p[1])).exp() * u.flat_laplacian(p[0], p[1])
            }
            _ => 0.0,
        }
    }

    /// Gaussian curvature of a surface.
    pub fn gaussian_curvature(&self, p: &Vector) -> Result<f64> {
        self.check_point(p)?;
        match self {
            Manifold::RoundSphere { n: 2 } => Ok(1.0),
            Manifold::RoundSphere { n } => Err(Error::Unsupported(format!(
                "Gaussian curvature of the {n}-dimensional sphere"
            ))),
            _ => Ok(self.torus_curvature(p)),
        }
    }

    /// `R(x, y)z` at `p`, without input validation.
    pub fn curvature(&self, p: &Vector, x: &Vector, y: &Vector, z: &Vector) -> Vector {
        let k = match self {
            Manifold::RoundSphere { .. } => 1.0,
            _ => self.torus_curvature(p),
        };
        (x * self.inner(p, y, z) - y * self.inner(p, x, z)) * k
    }

    /// `Ric(v, v)` at `p`.
    pub fn ricci_quadratic(&self, p: &Vector, v: &Vector) -> f64 {
        match self {
            Manifold::RoundSphere { n } => (*n as f64 - 1.0) * v.norm_squared(),
            _ => self.torus_curvature(p) * self.norm_sq(p, v),
        }
    }
}

/// Volume of the unit n-sphere, `2π^{(n+1)/2} / Γ((n+1)/2)`.
pub fn sphere_volume(n: usize) -> f64 {
    // Vol(S^n) = 2π/(n−1) · Vol(S^{n−2})
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * sphere_volume(n - 2),
    }
}

/// A point together with a tangent vector at it.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTangent {
    pub point: Vector,
    pub vector: Vector,
}

impl PointTangent {
    pub fn new(m: &Manifold, point: Vector, vector: Vector) -> Result<Self> {
        m.check_point(&point)?;
        m.check_tangent(&point, &vector)?;
        Ok(PointTangent { point, vector })
    }
}

/// `R(X,Y)Z` for three tangent vectors at a common base point.
pub fn riemann(m: &Manifold, x: &PointTangent, y: &PointTangent, z: &PointTangent) -> Result<Vector> {
    if x.point != y.point || x.point != z.point {
        return Err(Error::MismatchedBase);
    }
    m.check_point(&x.point)?;
    for v in [x, y, z] {
        m.check_tangent(&v.point, &v.vector)?;
    }
    Ok(m.curvature(&x.point, &x.vector, &y.vector, &z.vector))
}
