//! Kaluza-Klein metrics on the tangent bundle and their Levi-Civita
//! connection on horizontal and vertical lifts.
//!
//! At `(p, e) ∈ TM`, with `t = |e|²`:
//!
//! ```text
//! G(Xʰ, Yʰ) = A(t) g(X, Y)
//! G(Xʰ, Yᵛ) = 0
//! G(Xᵛ, Yᵛ) = B(t) g(X, Y) + C(t) g(X, e) g(e, Y)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LocalField, Manifold, Vector, VectorField};
use crate::profile::ScalarProfile;

/// Spacing of the positivity grid.
pub const VALIDATION_STEP: f64 = 1e-3;

/// The profiles `(A, B, C)` of a Kaluza-Klein metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KkMetricSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub a: ScalarProfile,
    #[serde(rename = "B")]
    pub b: ScalarProfile,
    #[serde(rename = "C")]
    pub c: ScalarProfile,
    /// Upper end of the positivity check.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

fn default_t_max() -> f64 {
    4.0
}

/// Profile values and slopes at a fixed `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricAt {
    pub t: f64,
    pub a: f64,
    pub da: f64,
    pub b: f64,
    pub db: f64,
    pub c: f64,
    pub dc: f64,
}

impl MetricAt {
    /// `B + tC`, the eigenvalue of the vertical block along `e`.
    pub fn radial(&self) -> f64 {
        self.b + self.t * self.c
    }
}

impl KkMetricSpec {
    pub fn new(a: ScalarProfile, b: ScalarProfile, c: ScalarProfile) -> Self {
        KkMetricSpec {
            name: None,
            a,
            b,
            c,
            t_max: default_t_max(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    /// `A = B = 1`, `C = 0`.
    pub fn sasaki() -> Self {
        KkMetricSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::constant(1.0),
            ScalarProfile::constant(0.0),
        )
        .named("sasaki")
    }

    /// `A = 1`, `B = (1 + t)^{-m}`, `C = r (1 + t)^{-m}`.
    pub fn g_mr(m: f64, r: f64) -> Result<Self> {
        if !(r >= 0.0) || !m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "g_mr needs a finite m and r >= 0, got m = {m}, r = {r}"
            )));
        }
        let b = ScalarProfile::power_law(1.0, 1.0, 1.0, -m);
        let c = if r == 0.0 {
            ScalarProfile::constant(0.0)
        } else {
            ScalarProfile::power_law(r, 1.0, 1.0, -m)
        };
        Ok(KkMetricSpec::new(ScalarProfile::constant(1.0), b, c).named(format!("g_mr(m={m},r={r})")))
    }

    /// `g_{1,1}`: `B = C = 1/(1 + t)`.
    pub fn cheeger_gromoll() -> Self {
        KkMetricSpec::g_mr(1.0, 1.0)
            .expect("valid parameters")
            .named("cheeger-gromoll")
    }

    /// `A = 1`, `B = K e^{rate·t}`, `C = 0`.
    pub fn exponential(k: f64, rate: f64) -> Self {
        KkMetricSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::exp(k, rate),
            ScalarProfile::constant(0.0),
        )
        .named(format!("exp(K={k},rate={rate})"))
    }

    /// Named family lookup: `sasaki`, `cheeger-gromoll`, `g_mr` (needs `m`,
    /// `r`).
    pub fn preset(name: &str, m: Option<f64>, r: Option<f64>) -> Result<Self> {
        match name {
            "sasaki" => Ok(KkMetricSpec::sasaki()),
            "cheeger-gromoll" => Ok(KkMetricSpec::cheeger_gromoll()),
            "g_mr" => {
                let m = m.ok_or_else(|| Error::InvalidInput("g_mr needs parameter m".into()))?;
                KkMetricSpec::g_mr(m, r.unwrap_or(0.0))
            }
            other => Err(Error::InvalidInput(format!("unknown metric preset '{other}'"))),
        }
    }

    pub fn id(&self) -> String {
        self.name.clone().unwrap_or_else(|| "custom".into())
    }

    pub fn at(&self, t: f64) -> MetricAt {
        let (a, da) = self.a.eval(t);
        let (b, db) = self.b.eval(t);
        let (c, dc) = self.c.eval(t);
        MetricAt { t, a, da, b, db, c, dc }
    }

    /// Values at `t`, rejecting a degenerate metric.
    pub fn at_checked(&self, t: f64) -> Result<MetricAt> {
        let v = self.at(t);
        if !(v.a > 0.0) || !(v.b > 0.0) || !(v.radial() > 0.0) {
            return Err(Error::MetricDegenerate {
                t,
                value: v.a.min(v.b).min(v.radial()),
            });
        }
        Ok(v)
    }

    /// Positivity of `A`, `B` and `B + tC` on `[0, t_max]`.
    pub fn validate(&self) -> ValidationReport {
        let steps = (self.t_max / VALIDATION_STEP).ceil().max(1.0) as usize;
        let grid = |i: usize| (i as f64 * VALIDATION_STEP).min(self.t_max);
        let mut report = ValidationReport {
            t_max: self.t_max,
            min_a: f64::INFINITY,
            min_b: f64::INFINITY,
            min_radial: f64::INFINITY,
            failure: None,
            certified: false,
            pass: true,
        };
        let mut prev = 0.0;
        for i in 0..=steps {
            let t = grid(i);
            let v = self.at(t);
            report.min_a = report.min_a.min(v.a);
            report.min_b = report.min_b.min(v.b);
            report.min_radial = report.min_radial.min(v.radial());
            if report.failure.is_none() {
                let bad = [("A", v.a), ("B", v.b), ("B+tC", v.radial())]
                    .into_iter()
                    .find(|(_, x)| !(*x > 0.0));
                if let Some((which, _)) = bad {
                    let at = if i == 0 {
                        0.0
                    } else {
                        self.refine_failure(which, prev, t)
                    };
                    report.failure = Some(ValidationFailure {
                        t: at,
                        profile: which.to_string(),
                    });
                    report.pass = false;
                }
            }
            prev = t;
        }
        // exact bound when each profile has a monotone closed form and C ≥ 0
        let lower = |p: &ScalarProfile| p.expr.certified_lower_bound(0.0, self.t_max);
        if let (Some(a), Some(b), Some(c)) = (lower(&self.a), lower(&self.b), lower(&self.c)) {
            report.certified = report.pass && a > 0.0 && b > 0.0 && c >= 0.0;
        }
        report
    }

    fn refine_failure(&self, which: &str, mut lo: f64, mut hi: f64) -> f64 {
        let value = |t: f64| {
            let v = self.at(t);
            match which {
                "A" => v.a,
                "B" => v.b,
                _ => v.radial(),
            }
        };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if value(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Worst central-difference mismatch of the three profile derivatives.
    pub fn derivative_mismatch(&self) -> f64 {
        [&self.a, &self.b, &self.c]
            .iter()
            .map(|p| p.derivative_mismatch(self.t_max))
            .fold(0.0, f64::max)
    }
}

/// Where positivity first fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub t: f64,
    pub profile: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub t_max: f64,
    pub min_a: f64,
    pub min_b: f64,
    /// Minimum of `B + tC`.
    pub min_radial: f64,
    pub failure: Option<ValidationFailure>,
    /// Positivity also follows from closed-form lower bounds.
    pub certified: bool,
    pub pass: bool,
}

/// A tangent vector of `TM` at `(p, e)`, split as `Xʰ + Yᵛ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftPair {
    pub point: Vector,
    pub fibre: Vector,
    pub horizontal: Vector,
    pub vertical: Vector,
}

impl LiftPair {
    pub fn new(m: &Manifold, point: Vector, fibre: Vector, horizontal: Vector, vertical: Vector) -> Result<Self> {
        m.check_point(&point)?;
        for v in [&fibre, &horizontal, &vertical] {
            m.check_tangent(&point, v)?;
        }
        Ok(LiftPair {
            point,
            fibre,
            horizontal,
            vertical,
        })
    }

    pub fn horizontal_lift(m: &Manifold, point: Vector, fibre: Vector, x: Vector) -> Result<Self> {
        let zero = Vector::zeros(x.len());
        LiftPair::new(m, point, fibre, x, zero)
    }

    pub fn vertical_lift(m: &Manifold, point: Vector, fibre: Vector, x: Vector) -> Result<Self> {
        let zero = Vector::zeros(x.len());
        LiftPair::new(m, point, fibre, zero, x)
    }

    fn same_base(&self, other: &LiftPair) -> bool {
        self.point == other.point && self.fibre == other.fibre
    }
}

/// `G(x, y)` at the common base `(p, e)` of the two lifts.
pub fn metric_on_lifts(m: &Manifold, spec: &KkMetricSpec, x: &LiftPair, y: &LiftPair) -> Result<f64> {
    if !x.same_base(y) {
        return Err(Error::MismatchedBase);
    }
    let p = &x.point;
    let e = &x.fibre;
    let v = spec.at(m.norm_sq(p, e));
    let horizontal = v.a * m.inner(p, &x.horizontal, &y.horizontal);
    let vertical = v.b * m.inner(p, &x.vertical, &y.vertical)
        + v.c * m.inner(p, &x.vertical, e) * m.inner(p, e, &y.vertical);
    Ok(horizontal + vertical)
}

/// Which pair of lifts enters `∇̄_{X*} Y*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftCase {
    /// `∇̄_{Xʰ} Yʰ`
    Hh,
    /// `∇̄_{Xʰ} Yᵛ`
    Hv,
    /// `∇̄_{Xᵛ} Yʰ`
    Vh,
    /// `∇̄_{Xᵛ} Yᵛ`
    Vv,
}

impl FromStr for LiftCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hh" => Ok(LiftCase::Hh),
            "hv" => Ok(LiftCase::Hv),
            "vh" => Ok(LiftCase::Vh),
            "vv" => Ok(LiftCase::Vv),
            other => Err(Error::InvalidInput(format!(
                "unknown lift case '{other}' (expected hh, hv, vh or vv)"
            ))),
        }
    }
}

impl fmt::Display for LiftCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LiftCase::Hh => "hh",
            LiftCase::Hv => "hv",
            LiftCase::Vh => "vh",
            LiftCase::Vv => "vv",
        };
        f.write_str(s)
    }
}

/// `∇̄_{X*} Y*` at `(p, e)`, where `X*` lifts the tangent vector `x` and `Y*`
/// lifts the vector field `y`.
///
/// The vertical–vertical case never has a horizontal component.
pub fn connection_eval(
    m: &Manifold,
    spec: &KkMetricSpec,
    point: &Vector,
    fibre: &Vector,
    case: LiftCase,
    x: &Vector,
    y: &dyn VectorField,
) -> Result<LiftPair> {
    m.check_point(point)?;
    m.check_tangent(point, fibre)?;
    m.check_tangent(point, x)?;
    let p = point;
    let e = fibre;
    let v = spec.at_checked(m.norm_sq(p, e))?;
    let local = LocalField::new(m, y, p)?;
    let yv = m.project_unchecked(p, local.value());
    let g = |a: &Vector, b: &Vector| m.inner(p, a, b);
    let zero = Vector::zeros(p.len());
    let (horizontal, vertical) = match case {
        LiftCase::Hh => {
            let h = local.derivative(x);
            let vert = e * (-v.da / v.radial() * g(x, &yv)) - m.curvature(p, x, &yv, e) * 0.5;
            (h, vert)
        }
        LiftCase::Hv => {
            let h = m.curvature(p, &yv, e, x) * (-v.b / (2.0 * v.a)) + x * (v.da / v.a * g(&yv, e));
            (h, local.derivative(x))
        }
        LiftCase::Vh => {
            let h = m.curvature(p, e, x, &yv) * (v.b / (2.0 * v.a)) + &yv * (v.da / v.a * g(x, e));
            (h, zero.clone())
        }
        LiftCase::Vv => {
            let xe = g(x, e);
            let ye = g(&yv, e);
            let vert = (&yv * xe + x * ye) * (v.db / v.b)
                + e * ((v.dc - 2.0 * v.db * v.c / v.b) / v.radial() * xe * ye)
                + e * ((v.c - v.db) / v.radial() * g(x, &yv));
            (zero.clone(), vert)
        }
    };
    Ok(LiftPair {
        point: p.clone(),
        fibre: e.clone(),
        horizontal,
        vertical,
    })
}

/// Step of the finite differences in [`koszul_residuals`].
pub const KOSZUL_STEP: f64 = 1e-3;

/// Worst finite-difference defects of metric compatibility and torsion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KoszulResiduals {
    pub metric: f64,
    pub torsion: f64,
}

impl KoszulResiduals {
    pub fn max(self, other: Self) -> Self {
        KoszulResiduals {
            metric: self.metric.max(other.metric),
            torsion: self.torsion.max(other.torsion),
        }
    }
}

fn richardson(f: impl Fn(f64) -> Result<Vector>, h: f64) -> Result<Vector> {
    let d1 = (f(h)? - f(-h)?) / (2.0 * h);
    let d2 = (f(h / 2.0)? - f(-h / 2.0)?) / h;
    Ok((d2 * 4.0 - d1) / 3.0)
}

fn lift_of(m: &Manifold, field: &dyn VectorField, vertical: bool, p: &Vector, e: &Vector) -> Result<LiftPair> {
    let z = field.value(m, p)?;
    if vertical {
        LiftPair::vertical_lift(m, p.clone(), e.clone(), z)
    } else {
        LiftPair::horizontal_lift(m, p.clone(), e.clone(), z)
    }
}

/// `∇̄_W Z*` for `W = Xʰ + Yᵛ`.
#[allow(clippy::too_many_arguments)]
fn nabla(
    m: &Manifold,
    spec: &KkMetricSpec,
    p: &Vector,
    e: &Vector,
    x: &Vector,
    y: &Vector,
    field: &dyn VectorField,
    vertical: bool,
) -> Result<LiftPair> {
    let (from_h, from_v) = if vertical {
        (LiftCase::Hv, LiftCase::Vv)
    } else {
        (LiftCase::Hh, LiftCase::Vh)
    };
    let a = connection_eval(m, spec, p, e, from_h, x, field)?;
    let b = connection_eval(m, spec, p, e, from_v, y, field)?;
    Ok(LiftPair {
        horizontal: a.horizontal + b.horizontal,
        vertical: a.vertical + b.vertical,
        ..a
    })
}

/// `TSⁿ ⊂ ℝⁿ⁺¹ × ℝⁿ⁺¹`: `Xʰ + Yᵛ ↦ (X, Y − ⟨e, X⟩p)`.
fn ambient(pair: &LiftPair) -> Vector {
    let d = pair.fibre.dot(&pair.horizontal);
    let w = &pair.vertical - &pair.point * d;
    Vector::from_iterator(2 * w.len(), pair.horizontal.iter().chain(w.iter()).copied())
}

/// Extension of a lifted field to a neighbourhood of `TSⁿ`, using the
/// polynomial formula of the base field off the sphere.
fn extension(m: &Manifold, field: &dyn VectorField, vertical: bool, q: &Vector) -> Result<Vector> {
    let d = q.len() / 2;
    let x = q.rows(0, d).into_owned();
    let v = q.rows(d, d).into_owned();
    let z = field.value(m, &x)?;
    let (a, b) = if vertical {
        (Vector::zeros(d), z)
    } else {
        let s = v.dot(&z);
        (z, -(&x * s))
    };
    Ok(Vector::from_iterator(2 * d, a.iter().chain(b.iter()).copied()))
}

/// Checks `connection_eval` against the two properties that characterise
/// the Levi-Civita connection, at `(p, e)` on a round sphere.
///
/// Metric compatibility is tested along the curve `(p + sX, e + sY)`
/// renormalized into `TSⁿ`, whose velocity is `Xʰ + Yᵛ`; torsion uses
/// ambient finite differences of the lifted fields. Both are maximized over
/// every pair of `fields` and every combination of lifts.
#[allow(clippy::too_many_arguments)]
pub fn koszul_residuals(
    m: &Manifold,
    spec: &KkMetricSpec,
    p: &Vector,
    e: &Vector,
    x: &Vector,
    y: &Vector,
    fields: &[&dyn VectorField],
) -> Result<KoszulResiduals> {
    if !matches!(m, Manifold::RoundSphere { .. }) {
        return Err(Error::Unsupported(format!("Koszul residuals on {}", m.id())));
    }
    m.check_point(p)?;
    for v in [e, x, y] {
        m.check_tangent(p, v)?;
    }
    let h = KOSZUL_STEP;
    let q = Vector::from_iterator(2 * p.len(), p.iter().chain(e.iter()).copied());
    let mut worst = KoszulResiduals::default();
    for (i, z1) in fields.iter().enumerate() {
        for z2 in &fields[i..] {
            for l1 in [false, true] {
                for l2 in [false, true] {
                    let along = |s: f64| -> Result<Vector> {
                        let w = p + x * s;
                        let xs = &w / w.norm();
                        let u = e + y * s;
                        let vs = &u - &xs * xs.dot(&u);
                        let a = lift_of(m, *z1, l1, &xs, &vs)?;
                        let b = lift_of(m, *z2, l2, &xs, &vs)?;
                        Ok(Vector::from_element(1, metric_on_lifts(m, spec, &a, &b)?))
                    };
                    let lhs = richardson(along, h)?[0];
                    let a = lift_of(m, *z1, l1, p, e)?;
                    let b = lift_of(m, *z2, l2, p, e)?;
                    let da = nabla(m, spec, p, e, x, y, *z1, l1)?;
                    let db = nabla(m, spec, p, e, x, y, *z2, l2)?;
                    let rhs = metric_on_lifts(m, spec, &da, &b)? + metric_on_lifts(m, spec, &a, &db)?;

                    let d12 = nabla(m, spec, p, e, &a.horizontal, &a.vertical, *z2, l2)?;
                    let d21 = nabla(m, spec, p, e, &b.horizontal, &b.vertical, *z1, l1)?;
                    let u = extension(m, *z1, l1, &q)?;
                    let v = extension(m, *z2, l2, &q)?;
                    let dv_u = richardson(|s| extension(m, *z2, l2, &(&q + &u * s)), h)?;
                    let du_v = richardson(|s| extension(m, *z1, l1, &(&q + &v * s)), h)?;
                    let torsion = (ambient(&d12) - ambient(&d21) - (dv_u - du_v)).norm();
                    worst = worst.max(KoszulResiduals {
                        metric: (lhs - rhs).abs(),
                        torsion,
                    });
                }
            }
        }
    }
    Ok(worst)
}
