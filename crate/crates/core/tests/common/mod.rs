//! Independent oracles shared by the integration tests.
//!
//! The Koszul oracle embeds `TS³ ⊂ ℝ⁴ × ℝ⁴`. A tangent vector `Xʰ + Yᵛ` at
//! `(p, e)` has ambient coordinates `(X, Y − ⟨e, X⟩p)`, lifted base fields
//! are extended off `TS³` by explicit formulas, and brackets and directional
//! derivatives come from finite differences in the ambient space.

#![allow(dead_code)]

use kkharmonic::kk::{connection_eval, metric_on_lifts, LiftCase, LiftPair};
use kkharmonic::{FieldSpec, KkMetricSpec, Manifold, Vector};

/// A base field on `S³` given by its ambient formula, together with the
/// catalog entry it must agree with on the sphere.
pub struct AmbientField {
    pub spec: FieldSpec,
    pub formula: Box<dyn Fn(&Vector) -> Vector + Sync>,
}

pub fn killing_s3(t1: f64, t2: f64) -> AmbientField {
    AmbientField {
        spec: FieldSpec::killing(&[t1, t2]),
        formula: Box::new(move |x| Vector::from_row_slice(&[-t1 * x[1], t1 * x[0], -t2 * x[3], t2 * x[2]])),
    }
}

pub fn conformal_s3(a: [f64; 4]) -> AmbientField {
    AmbientField {
        spec: FieldSpec::conformal(&a),
        formula: Box::new(move |x| {
            let a = Vector::from_row_slice(&a);
            &a - x * a.dot(x)
        }),
    }
}

pub fn quadratic_s3(d: [f64; 4]) -> AmbientField {
    AmbientField {
        spec: FieldSpec::quadratic(&[(d[0], 1), (d[1], 1), (d[2], 1), (d[3], 1)]),
        formula: Box::new(move |x| {
            let mx = Vector::from_fn(4, |i, _| d[i] * x[i]);
            let q = x.dot(&mx);
            &mx - x * q
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lift {
    H,
    V,
}

fn split(q: &Vector) -> (Vector, Vector) {
    (q.rows(0, 4).into_owned(), q.rows(4, 4).into_owned())
}

fn join(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(8, a.iter().chain(b.iter()).copied())
}

/// Ambient extension of the lift of `z` to a neighbourhood of `TS³`.
pub fn extension(z: &AmbientField, lift: Lift, q: &Vector) -> Vector {
    let (x, v) = split(q);
    let zx = (z.formula)(&x);
    match lift {
        Lift::H => {
            let d = v.dot(&zx);
            join(&zx, &(-(&x * d)))
        }
        Lift::V => join(&Vector::zeros(4), &zx),
    }
}

pub fn ambient(pair: &LiftPair) -> Vector {
    let d = pair.fibre.dot(&pair.horizontal);
    join(&pair.horizontal, &(&pair.vertical - &pair.point * d))
}

fn add(a: LiftPair, b: LiftPair) -> LiftPair {
    LiftPair {
        horizontal: &a.horizontal + &b.horizontal,
        vertical: &a.vertical + &b.vertical,
        ..a
    }
}

/// `∇̄_W Z*` for `W = Xʰ + Yᵛ`, assembled from the four lift cases.
pub fn connection(
    m: &Manifold,
    spec: &KkMetricSpec,
    p: &Vector,
    e: &Vector,
    x: &Vector,
    y: &Vector,
    z: &AmbientField,
    lift: Lift,
) -> LiftPair {
    let (from_h, from_v) = match lift {
        Lift::H => (LiftCase::Hh, LiftCase::Vh),
        Lift::V => (LiftCase::Hv, LiftCase::Vv),
    };
    let a = connection_eval(m, spec, p, e, from_h, x, &z.spec).unwrap();
    let b = connection_eval(m, spec, p, e, from_v, y, &z.spec).unwrap();
    add(a, b)
}

fn lift_at(m: &Manifold, z: &AmbientField, lift: Lift, p: &Vector, e: &Vector) -> LiftPair {
    let zp = (z.formula)(p);
    match lift {
        Lift::H => LiftPair::horizontal_lift(m, p.clone(), e.clone(), zp).unwrap(),
        Lift::V => LiftPair::vertical_lift(m, p.clone(), e.clone(), zp).unwrap(),
    }
}

fn project(x: &Vector, w: &Vector) -> Vector {
    w - x * x.dot(w)
}

/// Richardson-extrapolated central difference.
fn derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(h / 2.0) - f(-h / 2.0)) / h;
    (4.0 * d2 - d1) / 3.0
}

fn derivative_vec(f: impl Fn(f64) -> Vector, h: f64) -> Vector {
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(h / 2.0) - f(-h / 2.0)) / h;
    (d2 * 4.0 - d1) / 3.0
}

/// `|W·G(Z₁*, Z₂*) − G(∇̄_W Z₁*, Z₂*) − G(Z₁*, ∇̄_W Z₂*)|` at `(p, e)`.
#[allow(clippy::too_many_arguments)]
pub fn metric_compat_residual(
    m: &Manifold,
    spec: &KkMetricSpec,
    p: &Vector,
    e: &Vector,
    x: &Vector,
    y: &Vector,
    (z1, l1): (&AmbientField, Lift),
    (z2, l2): (&AmbientField, Lift),
) -> f64 {
    // a curve in TS³ with velocity Xʰ + Yᵛ
    let g_along = |s: f64| {
        let xs = {
            let w = p + x * s;
            &w / w.norm()
        };
        let vs = project(&xs, &(e + y * s));
        metric_on_lifts(m, spec, &lift_at(m, z1, l1, &xs, &vs), &lift_at(m, z2, l2, &xs, &vs)).unwrap()
    };
    let lhs = derivative(g_along, 1e-3);
    let d1 = connection(m, spec, p, e, x, y, z1, l1);
    let d2 = connection(m, spec, p, e, x, y, z2, l2);
    let rhs = metric_on_lifts(m, spec, &d1, &lift_at(m, z2, l2, p, e)).unwrap()
        + metric_on_lifts(m, spec, &lift_at(m, z1, l1, p, e), &d2).unwrap();
    (lhs - rhs).abs()
}

/// `|∇̄_U V − ∇̄_V U − [U, V]|` in ambient coordinates, for lifted fields.
pub fn torsion_residual(
    m: &Manifold,
    spec: &KkMetricSpec,
    p: &Vector,
    e: &Vector,
    (z1, l1): (&AmbientField, Lift),
    (z2, l2): (&AmbientField, Lift),
) -> f64 {
    let q = join(p, e);
    let zero = Vector::zeros(4);
    let w_of = |z: &AmbientField, l: Lift| {
        let zp = (z.formula)(p);
        match l {
            Lift::H => (zp, zero.clone()),
            Lift::V => (zero.clone(), zp),
        }
    };
    let (x1, y1) = w_of(z1, l1);
    let (x2, y2) = w_of(z2, l2);
    let d12 = ambient(&connection(m, spec, p, e, &x1, &y1, z2, l2));
    let d21 = ambient(&connection(m, spec, p, e, &x2, &y2, z1, l1));
    let u = extension(z1, l1, &q);
    let v = extension(z2, l2, &q);
    let dv_u = derivative_vec(|s| extension(z2, l2, &(&q + &u * s)), 1e-3);
    let du_v = derivative_vec(|s| extension(z1, l1, &(&q + &v * s)), 1e-3);
    (d12 - d21 - (dv_u - du_v)).norm()
}

/// Largest metric-compatibility and torsion residual over all lift
/// combinations of the field pairs at `(p, e)`.
pub fn koszul_residuals(
    m: &Manifold,
    spec: &KkMetricSpec,
    p: &Vector,
    e: &Vector,
    x: &Vector,
    y: &Vector,
    fields: &[AmbientField],
) -> (f64, f64) {
    let mut compat: f64 = 0.0;
    let mut torsion: f64 = 0.0;
    for (i, z1) in fields.iter().enumerate() {
        for z2 in &fields[i..] {
            for l1 in [Lift::H, Lift::V] {
                for l2 in [Lift::H, Lift::V] {
                    compat = compat.max(metric_compat_residual(m, spec, p, e, x, y, (z1, l1), (z2, l2)));
                    torsion = torsion.max(torsion_residual(m, spec, p, e, (z1, l1), (z2, l2)));
                }
            }
        }
    }
    (compat, torsion)
}
