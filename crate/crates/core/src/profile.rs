//! Scalar profiles `t ↦ f(t)` of the squared fibre norm `t = |e|²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a profile was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    OdeConstructed,
    Constant,
}

/// Expression tree of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileExpr {
    Constant { value: f64 },
    /// `k·e^{rate·t}`
    Exp { k: f64, rate: f64 },
    /// `k·(base + slope·t)^exponent`
    PowerLaw {
        k: f64,
        base: f64,
        slope: f64,
        exponent: f64,
    },
    /// `a0 + slope·t`
    Linear { a0: f64, slope: f64 },
    Sum { terms: Vec<ProfileExpr> },
    /// Cubic Hermite interpolation of samples `values[i] ≈ f(t0 + i·h)` with
    /// matching derivatives; linear extrapolation outside the table.
    Tabulated {
        t0: f64,
        h: f64,
        values: Vec<f64>,
        derivatives: Vec<f64>,
    },
    /// `inner` on `t ≤ t_end`, continued by the C¹ exponential tail
    /// `v·exp((s/v)(t − t_end))` with `v, s` the value and slope at `t_end`.
    Prolonged { inner: Box<ProfileExpr>, t_end: f64 },
}

impl ProfileExpr {
    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// Value and first derivative.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            ProfileExpr::Constant { value } => (*value, 0.0),
            ProfileExpr::Exp { k, rate } => {
                let v = k * (rate * t).exp();
                (v, rate * v)
            }
            ProfileExpr::PowerLaw {
                k,
                base,
                slope,
                exponent,
            } => {
                let b = base + slope * t;
                let v = k * b.powf(*exponent);
                let d = if *exponent == 0.0 {
                    0.0
                } else {
                    k * exponent * slope * b.powf(exponent - 1.0)
                };
                (v, d)
            }
            ProfileExpr::Linear { a0, slope } => (a0 + slope * t, *slope),
            ProfileExpr::Sum { terms } => terms.iter().fold((0.0, 0.0), |acc, e| {
                let (v, d) = e.eval(t);
                (acc.0 + v, acc.1 + d)
            }),
            ProfileExpr::Tabulated {
                t0,
                h,
                values,
                derivatives,
            } => hermite(*t0, *h, values, derivatives, t),
            ProfileExpr::Prolonged { inner, t_end } => {
                if t <= *t_end {
                    inner.eval(t)
                } else {
                    let (v, s) = inner.eval(*t_end);
                    let rate = s / v;
                    let w = v * (rate * (t - t_end)).exp();
                    (w, rate * w)
                }
            }
        }
    }

    /// A lower bound of the profile on `[t0, t1]` derived from the
    /// expression alone, when one is available without sampling.
    pub fn certified_lower_bound(&self, t0: f64, t1: f64) -> Option<f64> {
        match self {
            ProfileExpr::Constant { value } => Some(*value),
            ProfileExpr::Exp { .. } | ProfileExpr::Linear { .. } => {
                Some(self.value(t0).min(self.value(t1)))
            }
            ProfileExpr::PowerLaw { base, slope, .. } => {
                // monotone while the base stays positive
                if base + slope * t0 > 0.0 && base + slope * t1 > 0.0 {
                    Some(self.value(t0).min(self.value(t1)))
                } else {
                    None
                }
            }
            ProfileExpr::Sum { terms } => terms
                .iter()
                .map(|e| e.certified_lower_bound(t0, t1))
                .sum::<Option<f64>>(),
            ProfileExpr::Tabulated { .. } | ProfileExpr::Prolonged { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("profile {what} must be finite")))
            }
        };
        match self {
            ProfileExpr::Constant { value } => finite(*value, "constant"),
            ProfileExpr::Exp { k, rate } => finite(*k, "scale").and(finite(*rate, "rate")),
            ProfileExpr::PowerLaw {
                k,
                base,
                slope,
                exponent,
            } => finite(*k + *base + *slope + *exponent, "power law parameter"),
            ProfileExpr::Linear { a0, slope } => finite(a0 + slope, "linear coefficient"),
            ProfileExpr::Sum { terms } => terms.iter().try_for_each(|e| e.validate()),
            ProfileExpr::Tabulated {
                h,
                values,
                derivatives,
                ..
            } => {
                if values.len() < 2 || values.len() != derivatives.len() || !(*h > 0.0) {
                    Err(Error::InvalidInput(
                        "tabulated profile needs at least two samples with derivatives and a positive step".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            ProfileExpr::Prolonged { inner, t_end } => {
                inner.validate()?;
                if inner.value(*t_end) <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "cannot prolong a profile that is not positive at t = {t_end}"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn hermite(t0: f64, h: f64, values: &[f64], derivatives: &[f64], t: f64) -> (f64, f64) {
    let last = values.len() - 1;
    let x = (t - t0) / h;
    if x <= 0.0 {
        return (values[0] + derivatives[0] * (t - t0), derivatives[0]);
    }
    if x >= last as f64 {
        let t_last = t0 + h * last as f64;
        return (values[last] + derivatives[last] * (t - t_last), derivatives[last]);
    }
    let i = (x.floor() as usize).min(last - 1);
    let s = x - i as f64;
    let (y0, y1) = (values[i], values[i + 1]);
    let (m0, m1) = (derivatives[i] * h, derivatives[i + 1] * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * m1;
    let d = (6.0 * s2 - 6.0 * s) * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * m1;
    (v, d / h)
}

/// A profile together with its provenance.
///
/// When deserializing, a missing `provenance` is inferred from the
/// expression as in [`ScalarProfile::closed_form`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawProfile")]
pub struct ScalarProfile {
    pub expr: ProfileExpr,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    expr: ProfileExpr,
    #[serde(default)]
    provenance: Option<Provenance>,
}

impl From<RawProfile> for ScalarProfile {
    fn from(raw: RawProfile) -> Self {
        match raw.provenance {
            Some(provenance) => ScalarProfile {
                expr: raw.expr,
                provenance,
            },
            None => ScalarProfile::closed_form(raw.expr),
        }
    }
}

impl ScalarProfile {
    pub fn constant(value: f64) -> Self {
        ScalarProfile {
            expr: ProfileExpr::Constant { value },
            provenance: Provenance::Constant,
        }
    }

    pub fn closed_form(expr: ProfileExpr) -> Self {
        let provenance = match expr {
            ProfileExpr::Constant { .. } => Provenance::Constant,
            _ => Provenance::ClosedForm,
        };
        ScalarProfile { expr, provenance }
    }

    /// `k·e^{rate·t}`
    pub fn exp(k: f64, rate: f64) -> Self {
        Self::closed_form(ProfileExpr::Exp { k, rate })
    }

    /// `k·(base + slope·t)^exponent`
    pub fn power_law(k: f64, base: f64, slope: f64, exponent: f64) -> Self {
        Self::closed_form(ProfileExpr::PowerLaw {
            k,
            base,
            slope,
            exponent,
        })
    }

    pub fn linear(a0: f64, slope: f64) -> Self {
        Self::closed_form(ProfileExpr::Linear { a0, slope })
    }

    /// `self + c`
    pub fn plus_constant(&self, c: f64) -> Self {
        ScalarProfile {
            expr: ProfileExpr::Sum {
                terms: vec![self.expr.clone(), ProfileExpr::Constant { value: c }],
            },
            provenance: self.provenance,
        }
    }

    /// Continues the profile past `t_end` with a positive C¹ exponential tail.
    pub fn prolonged(self, t_end: f64) -> Self {
        ScalarProfile {
            expr: ProfileExpr::Prolonged {
                inner: Box::new(self.expr),
                t_end,
            },
            provenance: self.provenance,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.expr.value(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.expr.derivative(t)
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        self.expr.eval(t)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.expr, ProfileExpr::Constant { .. })
    }

    /// Largest relative mismatch between the derivative and a central
    /// difference of the value, over an evenly spaced grid of `[0, t_max]`.
    pub fn derivative_mismatch(&self, t_max: f64) -> f64 {
        let samples = 200;
        let h = 1e-5;
        (0..=samples)
            .map(|i| {
                let t = h + (t_max - h).max(0.0) * i as f64 / samples as f64;
                let fd = (self.value(t + h) - self.value(t - h)) / (2.0 * h);
                let d = self.derivative(t);
                let scale = d.abs().max(self.value(t).abs()).max(1.0);
                (fd - d).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

impl From<ProfileExpr> for ScalarProfile {
    fn from(expr: ProfileExpr) -> Self {
        ScalarProfile::closed_form(expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms_and_derivatives() {
        let b = ScalarProfile::exp(2.0, -0.5);
        assert_relative_eq!(b.value(2.0), 2.0 * (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(b.derivative(2.0), -(-1.0f64).exp(), epsilon = 1e-15);
        let p = ScalarProfile::power_law(1.0, 1.0, 1.0, -2.0);
        assert_relative_eq!(p.value(1.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(p.derivative(1.0), -0.25, epsilon = 1e-15);
        for prof in [b, p, ScalarProfile::linear(1.0, -0.3), ScalarProfile::constant(3.0)] {
            assert!(prof.derivative_mismatch(4.0) < 1e-7);
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 1.0 + t - 0.5 * t * t + 0.25 * t * t * t;
        let df = |t: f64| 1.0 - t + 0.75 * t * t;
        let h = 0.1;
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * h).collect();
        let table = ProfileExpr::Tabulated {
            t0: 0.0,
            h,
            values: ts.iter().map(|&t| f(t)).collect(),
            derivatives: ts.iter().map(|&t| df(t)).collect(),
        };
        for t in [0.0, 0.037, 0.55, 1.234, 1.999, 2.0] {
            let (v, d) = table.eval(t);
            assert_relative_eq!(v, f(t), epsilon = 1e-13);
            assert_relative_eq!(d, df(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn prolongation_is_c1_and_positive() {
        let base = ScalarProfile::power_law(1.0, 1.0, -1.0, 2.0).prolonged(0.5);
        let (v, d) = base.eval(0.5);
        let (v2, d2) = base.eval(0.5 + 1e-12);
        assert!((v - v2).abs() < 1e-8 && (d - d2).abs() < 1e-8);
        for t in [0.6, 1.0, 3.0, 10.0] {
            assert!(base.value(t) > 0.0);
        }
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(ScalarProfile::exp(1.0, -1.0).expr.certified_lower_bound(0.0, 1.0), Some((-1.0f64).exp()));
        assert_eq!(ScalarProfile::linear(1.0, -1.0).expr.certified_lower_bound(0.0, 2.0), Some(-1.0));
        assert_eq!(
            ScalarProfile::power_law(1.0, 1.0, -1.0, 2.0).expr.certified_lower_bound(0.0, 2.0),
            None
        );
    }
}
