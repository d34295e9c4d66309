//! Metric profiles that make the catalog fields harmonic, and certificates
//! for the cases where no Kaluza-Klein metric can.
//!
//! Each solvable family reduces the harmonic-section equation to a linear
//! first-order ODE `α(t)B' + β(t)B = γ(t)` in `t = |σ|²`, where `γ` collects
//! the `C` terms. With `C = 0` the solutions are closed forms; for a given
//! `C` the ODE is integrated numerically.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{axis_info, FieldSpec};
use crate::geometry::Manifold;
use crate::kk::KkMetricSpec;
use crate::profile::{ProfileExpr, Provenance, ScalarProfile};

/// RK4 step for constructed profiles.
pub const ODE_STEP: f64 = 1e-4;
/// Spacing of the residual back-substitution grid.
pub const RESIDUAL_STEP: f64 = 1e-3;

/// A field family whose harmonic-section equation is an ODE in `t = |σ|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Two-eigenvalue quadratic gradient `μ` / `0` on `Sⁿ`.
    Quadratic { n: usize, mu: f64 },
    /// Equal-speed rotation `λ` on `S^{2p}` with a `(2k+1)`-dimensional axis.
    KillingEven { p: usize, k: usize, lambda: f64 },
    /// Equal-speed rotation `λ` on `S^{2p+1}` with a `2k`-dimensional axis.
    KillingOdd { p: usize, k: usize, lambda: f64 },
    /// Conformal field with `|a|² = a_norm_sq` on `Sⁿ`, metric `A = B + A₀`.
    EnlargedConformal { n: usize, a_norm_sq: f64 },
    /// Single-plane rotation `λ` on `S^{2p}`, metric `A = B + A₀`.
    EnlargedKilling { p: usize, lambda: f64 },
}

impl Family {
    pub fn id(&self) -> String {
        match self {
            Family::Quadratic { n, mu } => format!("quadratic(n={n},mu={mu})"),
            Family::KillingEven { p, k, lambda } => format!("killing_even(p={p},k={k},lambda={lambda})"),
            Family::KillingOdd { p, k, lambda } => format!("killing_odd(p={p},k={k},lambda={lambda})"),
            Family::EnlargedConformal { n, a_norm_sq } => format!("enlarged_conformal(n={n},a2={a_norm_sq})"),
            Family::EnlargedKilling { p, lambda } => format!("enlarged_killing(p={p},lambda={lambda})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("{}: {msg}", self.id())));
        match *self {
            Family::Quadratic { n, mu } if n < 2 || !(mu > 0.0) => bad("needs n >= 2 and mu > 0".into()),
            Family::KillingEven { p, k, lambda } if p < 1 || k >= p || lambda == 0.0 || !lambda.is_finite() => {
                bad("needs p >= 1, k <= p - 1 and lambda != 0".into())
            }
            Family::KillingOdd { p, k, lambda } if k > p || lambda == 0.0 || !lambda.is_finite() => {
                bad("needs k <= p and lambda != 0".into())
            }
            Family::EnlargedConformal { n, a_norm_sq } if n < 2 || !(a_norm_sq > 0.0) => {
                bad("needs n >= 2 and |a|^2 > 0".into())
            }
            Family::EnlargedKilling { p, lambda } if p < 1 || lambda == 0.0 || !lambda.is_finite() => {
                bad("needs p >= 1 and lambda != 0".into())
            }
            _ => Ok(()),
        }
    }

    /// Whether the metric has `A = B + A₀` rather than constant `A`.
    pub fn enlarged(&self) -> bool {
        matches!(self, Family::EnlargedConformal { .. } | Family::EnlargedKilling { .. })
    }

    /// Largest value of `|σ|²` attained by the associated field.
    pub fn t_peak(&self) -> f64 {
        match *self {
            Family::Quadratic { mu, .. } => mu * mu / 4.0,
            Family::KillingEven { lambda, .. } | Family::KillingOdd { lambda, .. } | Family::EnlargedKilling { lambda, .. } => {
                lambda * lambda
            }
            Family::EnlargedConformal { a_norm_sq, .. } => a_norm_sq,
        }
    }

    pub fn manifold(&self) -> Manifold {
        match *self {
            Family::Quadratic { n, .. } | Family::EnlargedConformal { n, .. } => Manifold::sphere(n),
            Family::KillingEven { p, .. } | Family::EnlargedKilling { p, .. } => Manifold::sphere(2 * p),
            Family::KillingOdd { p, .. } => Manifold::sphere(2 * p + 1),
        }
    }

    /// The field whose harmonicity the family's ODE encodes.
    pub fn field(&self) -> FieldSpec {
        match *self {
            Family::Quadratic { n, mu } => FieldSpec::quadratic_two(n, mu, (n + 1) / 2),
            Family::KillingEven { p, k, lambda } => FieldSpec::killing_equal(lambda, p - k),
            Family::KillingOdd { p, k, lambda } => FieldSpec::killing_equal(lambda, p + 1 - k),
            Family::EnlargedConformal { n, a_norm_sq } => {
                let mut a = vec![0.0; n + 1];
                a[n] = a_norm_sq.sqrt();
                FieldSpec::Conformal { a }
            }
            Family::EnlargedKilling { lambda, .. } => FieldSpec::killing_equal(lambda, 1),
        }
    }

    /// `(α, β, γ)` of `αB' + βB = γ` at `t`, given `C(t)` and `C'(t)`.
    pub fn ode(&self, t: f64, c: f64, dc: f64) -> (f64, f64, f64) {
        match *self {
            Family::Quadratic { n, mu } => {
                let (nf, mu2) = (n as f64, mu * mu);
                (
                    (nf - 3.0) / 2.0 * mu2 - (nf - 5.0) * t,
                    nf + 3.0,
                    t * (mu2 - 4.0 * t) * dc + ((nf + 1.0) / 2.0 * mu2 - 2.0 * (nf + 3.0) * t) * c,
                )
            }
            Family::KillingEven { p, k, lambda } => {
                let (pf, kf, l2) = (p as f64, k as f64, lambda * lambda);
                let s = t / l2;
                (
                    2.0 * l2 * (pf - kf - 1.0),
                    2.0 * pf - 1.0,
                    l2 * (2.0 * (pf - kf) - (2.0 * pf + 1.0) * s) * c + l2 * l2 * s * (1.0 - s) * dc,
                )
            }
            Family::KillingOdd { p, k, lambda } => {
                let (pf, kf, l2) = (p as f64, k as f64, lambda * lambda);
                let s = t / l2;
                (
                    l2 * (pf - kf),
                    pf,
                    l2 * ((pf + 1.0 - kf) - (pf + 1.0) * s) * c + 0.5 * l2 * l2 * s * (1.0 - s) * dc,
                )
            }
            Family::EnlargedConformal { n, a_norm_sq } => {
                let nf = n as f64;
                let l2 = a_norm_sq - t;
                ((nf - 2.0) * l2 + nf, 1.0, l2 * t * dc + (nf * l2 - t) * c)
            }
            Family::EnlargedKilling { p, lambda } => {
                let (pf, l2) = (p as f64, lambda * lambda);
                let s = t / l2;
                (
                    2.0 * pf,
                    2.0 * pf - 1.0,
                    l2 * l2 * s * (1.0 - s) * dc + l2 * (2.0 - (2.0 * pf + 1.0) * s) * c,
                )
            }
        }
    }

    /// The obstruction case this family belongs to, if any.
    fn obstruction_case(&self) -> Option<ObstructionCase> {
        match *self {
            Family::Quadratic { n, mu } => Some(ObstructionCase::Quadratic { n, mu }),
            Family::KillingEven { p, k, lambda } => Some(ObstructionCase::KillingEven {
                p,
                thetas: vec![lambda; p - k],
            }),
            Family::KillingOdd { p, k, lambda } => Some(ObstructionCase::KillingOdd {
                p,
                thetas: vec![lambda; p + 1 - k],
            }),
            _ => None,
        }
    }
}

/// A family together with the `C` profile to build `B` against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileProblem {
    pub family: Family,
    #[serde(rename = "C")]
    pub c: ScalarProfile,
    /// `B(0)`.
    #[serde(default = "one")]
    pub k: f64,
    /// `A₀` for the enlarged families.
    #[serde(default = "one")]
    pub a0: f64,
}

fn one() -> f64 {
    1.0
}

impl ProfileProblem {
    pub fn new(family: Family, c: ScalarProfile) -> Self {
        ProfileProblem { family, c, k: 1.0, a0: 1.0 }
    }
}

/// Either a metric making the family's field harmonic, or a certificate that
/// none exists.
#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    Solved(KkMetricSpec),
    Obstructed(Obstruction),
}

impl Solution {
    pub fn solved(self) -> Option<KkMetricSpec> {
        match self {
            Solution::Solved(s) => Some(s),
            Solution::Obstructed(_) => None,
        }
    }
}

fn assemble(family: &Family, b: ScalarProfile, c: ScalarProfile, a0: f64) -> KkMetricSpec {
    let a = if family.enlarged() {
        b.plus_constant(a0)
    } else {
        ScalarProfile::constant(1.0)
    };
    KkMetricSpec::new(a, b, c)
        .with_t_max(1.0 + family.t_peak())
        .named(family.id())
}

/// The `C = 0` closed-form profile of the family with `B(0) = k`, or the
/// obstruction certificate when the parameters are outside the solvable
/// range.
pub fn closed_form_b(family: &Family, k: f64, a0: f64) -> Result<Solution> {
    family.validate()?;
    if !(k > 0.0) || (family.enlarged() && !(a0 > 0.0)) {
        return Err(Error::InvalidInput("profile scale K and A0 must be positive".into()));
    }
    if let Some(case) = family.obstruction_case() {
        if let CheckOutcome::Obstructed(mut certs) = obstruction_check(&case, &[]) {
            return Ok(Solution::Obstructed(certs.remove(0)));
        }
    }
    let peak = family.t_peak();
    let b = match *family {
        Family::Quadratic { n: 5, mu } => ScalarProfile::exp(k, -8.0 / (mu * mu)),
        Family::Quadratic { n, mu } => {
            let nf = n as f64;
            ScalarProfile::power_law(k, (nf - 3.0) / 2.0 * mu * mu, -(nf - 5.0), (nf + 3.0) / (nf - 5.0))
                .prolonged(peak)
        }
        Family::KillingEven { p, k: axis, lambda } => {
            let (pf, kf) = (p as f64, axis as f64);
            ScalarProfile::exp(k, -(2.0 * pf - 1.0) / (2.0 * lambda * lambda * (pf - 1.0 - kf)))
        }
        Family::KillingOdd { k: 0, lambda, .. } => ScalarProfile::exp(k, -1.0 / (lambda * lambda)),
        Family::KillingOdd { p, k: axis, lambda } => {
            let (pf, kf) = (p as f64, axis as f64);
            ScalarProfile::exp(k, -pf / (lambda * lambda * (pf - kf)))
        }
        Family::EnlargedConformal { n: 2, .. } => ScalarProfile::exp(k, -0.5),
        Family::EnlargedConformal { n, a_norm_sq } => {
            let nf = n as f64;
            ScalarProfile::power_law(k, nf + (nf - 2.0) * a_norm_sq, -(nf - 2.0), 1.0 / (nf - 2.0)).prolonged(peak)
        }
        Family::EnlargedKilling { p, .. } => ScalarProfile::exp(k, 1.0 / (2.0 * p as f64) - 1.0),
    };
    Ok(Solution::Solved(assemble(family, b, ScalarProfile::constant(0.0), a0)))
}

/// The alternative constant-norm profile `K(1 + t)^{-(1 + 1/λ²)}` for the
/// Hopf-type fields (`k = 0` on odd spheres).
pub fn hopf_power_law(p: usize, lambda: f64, k: f64) -> KkMetricSpec {
    let family = Family::KillingOdd { p, k: 0, lambda };
    let b = ScalarProfile::power_law(k, 1.0, 1.0, -(1.0 + 1.0 / (lambda * lambda)));
    assemble(&family, b, ScalarProfile::constant(0.0), 1.0).named(format!("hopf_power(lambda={lambda})"))
}

/// Unequal-speed rotation on `S^{2p}` with constant `B = B₀`, `C = 0` and
/// `A(t) = A₀ − (2p−1)B₀t/(2p)` on `[0, t_peak]`, prolonged beyond.
pub fn unequal_speed_enlarged(p: usize, thetas: &[f64], b0: f64, a0: f64) -> Result<KkMetricSpec> {
    let t_peak = thetas.iter().map(|t| t * t).fold(0.0, f64::max);
    let slope = -(2.0 * p as f64 - 1.0) / (2.0 * p as f64) * b0;
    if !(b0 > 0.0) || !(a0 + slope * t_peak > 0.0) {
        return Err(Error::InvalidInput(format!(
            "A must stay positive on [0, {t_peak}]: need A0 > {}",
            -slope * t_peak
        )));
    }
    let a = ScalarProfile::linear(a0, slope).prolonged(t_peak);
    Ok(KkMetricSpec::new(a, ScalarProfile::constant(b0), ScalarProfile::constant(0.0))
        .with_t_max(1.0 + t_peak)
        .named(format!("unequal_killing(p={p},B0={b0},A0={a0})")))
}

/// A profile built by integrating the family ODE, with its accuracy
/// certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Constructed {
    pub spec: KkMetricSpec,
    /// Largest `|αB' + βB − γ|` over the residual grid of `[0, t_peak]`.
    pub ode_residual: f64,
}

/// Integrates `αB' + βB = γ` from `B(0) = K` with classical RK4 on a
/// `1e-4` grid, stores the result as a C¹ Hermite table, and continues it
/// past `t_peak` with a positive exponential tail.
pub fn construct_b_from_c(problem: &ProfileProblem) -> Result<Constructed> {
    let family = &problem.family;
    family.validate()?;
    if let Some(case) = family.obstruction_case() {
        if let CheckOutcome::Obstructed(certs) = obstruction_check(&case, &[]) {
            return Err(Error::InvalidInput(format!(
                "{} has no solution: {}",
                family.id(),
                certs[0].inequality
            )));
        }
    }
    let peak = family.t_peak();
    let steps = (peak / ODE_STEP).ceil().max(1.0) as usize;
    let h = peak / steps as f64;
    let slope = |t: f64, b: f64| {
        let (c, dc) = problem.c.eval(t);
        let (alpha, beta, gamma) = family.ode(t, c, dc);
        (gamma - beta * b) / alpha
    };
    let mut values = Vec::with_capacity(steps + 1);
    let mut derivatives = Vec::with_capacity(steps + 1);
    let mut b = problem.k;
    for i in 0..=steps {
        let t = i as f64 * h;
        if !(b > 0.0) {
            return Err(Error::ConstructionFailed { t, value: b });
        }
        values.push(b);
        derivatives.push(slope(t, b));
        if i < steps {
            let k1 = slope(t, b);
            let k2 = slope(t + 0.5 * h, b + 0.5 * h * k1);
            let k3 = slope(t + 0.5 * h, b + 0.5 * h * k2);
            let k4 = slope(t + h, b + h * k3);
            b += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    let table = ProfileExpr::Tabulated {
        t0: 0.0,
        h,
        values,
        derivatives,
    };
    let b = ScalarProfile {
        expr: ProfileExpr::Prolonged {
            inner: Box::new(table),
            t_end: peak,
        },
        provenance: Provenance::OdeConstructed,
    };
    let spec = assemble(family, b, problem.c.clone(), problem.a0);
    let ode_residual = ode_residual(family, &spec);
    let report = spec.validate();
    if let Some(f) = report.failure {
        return Err(Error::ConstructionFailed {
            t: f.t,
            value: spec.at(f.t).radial().min(spec.at(f.t).b),
        });
    }
    Ok(Constructed { spec, ode_residual })
}

/// Largest residual of the family ODE for `spec` on the `1e-3` grid of
/// `[0, t_peak]`.
pub fn ode_residual(family: &Family, spec: &KkMetricSpec) -> f64 {
    let peak = family.t_peak();
    let steps = (peak / RESIDUAL_STEP).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| {
            let t = peak * i as f64 / steps as f64;
            let v = spec.at(t);
            let (alpha, beta, gamma) = family.ode(t, v.c, v.dc);
            (alpha * v.db + beta * v.b - gamma).abs()
        })
        .fold(0.0, f64::max)
}

/// Samples `(t, B, B')` on `[0, t_max]` as CSV.
pub fn profile_csv(profile: &ScalarProfile, t_max: f64, samples: usize) -> String {
    let mut out = String::from("t,B,dB\n");
    let n = samples.max(1);
    for i in 0..=n {
        let t = t_max * i as f64 / n as f64;
        let (v, d) = profile.eval(t);
        let _ = writeln!(out, "{t:.16e},{v:.16e},{d:.16e}");
    }
    out
}

/// A case of the classification in which harmonicity may be impossible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ObstructionCase {
    /// Two-eigenvalue quadratic gradient field on `Sⁿ` (constant `A`).
    Quadratic { n: usize, mu: f64 },
    /// Conformal gradient field on `Sⁿ` with `|a|² = a_norm_sq` (constant `A`).
    Conformal { n: usize, a_norm_sq: f64 },
    /// Rotation with the given nonzero speeds on `S^{2p}`.
    KillingEven { p: usize, thetas: Vec<f64> },
    /// Rotation with the given nonzero speeds on `S^{2p+1}`.
    KillingOdd { p: usize, thetas: Vec<f64> },
}

impl ObstructionCase {
    pub fn id(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            ObstructionCase::Quadratic { n, mu } => format!("quadratic(n={n},mu={mu})"),
            ObstructionCase::Conformal { n, a_norm_sq } => format!("conformal(n={n},a2={a_norm_sq})"),
            ObstructionCase::KillingEven { p, thetas } => format!("killing_even(p={p},thetas={})", list(thetas)),
            ObstructionCase::KillingOdd { p, thetas } => format!("killing_odd(p={p},thetas={})", list(thetas)),
        }
    }
}

/// A numeric witness that a required relation cannot hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    pub case_id: String,
    /// The relation harmonicity would force.
    pub inequality: String,
    pub metric_id: Option<String>,
    pub witness_t: Option<f64>,
    /// Value of the relation's left side minus its right side.
    pub witness_value: f64,
    /// By how much the witness violates the relation (positive when it does).
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckOutcome {
    Feasible,
    Obstructed(Vec<Obstruction>),
}

/// Certificates for the impossible cases, one per candidate metric when the
/// witness depends on the metric (Sasaki when no candidate is given).
pub fn obstruction_check(case: &ObstructionCase, candidates: &[KkMetricSpec]) -> CheckOutcome {
    let default = [KkMetricSpec::sasaki()];
    let specs = if candidates.is_empty() { &default[..] } else { candidates };
    let case_id = case.id();
    // `B(t) + tC(t) = 0` is forced at `t`
    let radial = |t: f64, why: &str| -> CheckOutcome {
        CheckOutcome::Obstructed(
            specs
                .iter()
                .map(|s| {
                    let value = s.at(t).radial();
                    Obstruction {
                        case_id: case_id.clone(),
                        inequality: format!("B(t) + tC(t) = 0 at t = {t} ({why})"),
                        metric_id: Some(s.id()),
                        witness_t: Some(t),
                        witness_value: value,
                        margin: value,
                    }
                })
                .collect(),
        )
    };
    let fixed = |inequality: String, value: f64, margin: f64| {
        CheckOutcome::Obstructed(vec![Obstruction {
            case_id: case_id.clone(),
            inequality,
            metric_id: None,
            witness_t: None,
            witness_value: value,
            margin,
        }])
    };
    match case {
        ObstructionCase::Quadratic { n, mu } => {
            let t = mu * mu / 4.0;
            if n % 2 == 0 {
                radial(t, "even sphere, where B' = C is forced")
            } else if *n == 3 {
                CheckOutcome::Obstructed(
                    specs
                        .iter()
                        .map(|s| {
                            let v = s.at(t);
                            let lhs = (mu * mu - 4.0 * t) * v.c;
                            Obstruction {
                                case_id: case_id.clone(),
                                inequality: format!("(mu^2 - 4t)C(t) >= 2B(t) at t = {t}"),
                                metric_id: Some(s.id()),
                                witness_t: Some(t),
                                witness_value: lhs - 2.0 * v.b,
                                margin: 2.0 * v.b - lhs,
                            }
                        })
                        .collect(),
                )
            } else {
                CheckOutcome::Feasible
            }
        }
        ObstructionCase::Conformal { a_norm_sq, .. } => radial(*a_norm_sq, "at a zero of the height function"),
        ObstructionCase::KillingEven { p, thetas } | ObstructionCase::KillingOdd { p, thetas } => {
            let even = matches!(case, ObstructionCase::KillingEven { .. });
            let speeds: Vec<f64> = thetas.iter().copied().filter(|t| *t != 0.0).collect();
            let ambient = if even { 2 * p + 1 } else { 2 * p + 2 };
            let axis = axis_info(&speeds, ambient);
            let equal = speeds.windows(2).all(|w| w[0].abs() == w[1].abs());
            let sum: f64 = speeds.iter().map(|t| t * t).sum();
            if speeds.is_empty() {
                return CheckOutcome::Feasible;
            }
            if equal {
                if axis.maximal {
                    radial(speeds[0] * speeds[0], "maximal invariant axis")
                } else {
                    CheckOutcome::Feasible
                }
            } else if even {
                let c = (2 * axis.k + 1) as f64;
                fixed(format!("-(2k+1) sum theta^2 > 0 with k = {}", axis.k), -c * sum, c * sum)
            } else if axis.k > 0 {
                let c = axis.k as f64;
                fixed(format!("-k sum theta^2 > 0 with k = {}", axis.k), -c * sum, c * sum)
            } else {
                let fastest = speeds.iter().map(|t| t * t).fold(0.0, f64::max);
                let value = sum - (*p as f64 + 1.0) * fastest;
                fixed(
                    "sum theta^2 - (p+1) theta_j^2 > 0 at the fastest plane j".to_string(),
                    value,
                    -value,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_examples() {
        let s = closed_form_b(&Family::Quadratic { n: 5, mu: 1.0 }, 1.0, 1.0).unwrap().solved().unwrap();
        assert_relative_eq!(s.b.value(0.2), (-1.6f64).exp(), epsilon = 1e-15);
        let s = closed_form_b(&Family::KillingEven { p: 2, k: 0, lambda: 1.0 }, 1.0, 1.0)
            .unwrap()
            .solved()
            .unwrap();
        assert_relative_eq!(s.b.value(1.0), (-1.5f64).exp(), epsilon = 1e-15);
        let s = closed_form_b(&Family::KillingOdd { p: 1, k: 0, lambda: 1.0 }, 1.0, 1.0)
            .unwrap()
            .solved()
            .unwrap();
        assert_relative_eq!(s.b.value(0.5), (-0.5f64).exp(), epsilon = 1e-15);
        assert!(crate::tension::constant_norm_condition(&s.b, 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_solve_their_odes() {
        let families = [
            Family::Quadratic { n: 5, mu: 1.3 },
            Family::Quadratic { n: 7, mu: 1.0 },
            Family::Quadratic { n: 9, mu: 0.7 },
            Family::KillingEven { p: 2, k: 0, lambda: 1.0 },
            Family::KillingEven { p: 3, k: 1, lambda: 0.6 },
            Family::KillingOdd { p: 2, k: 1, lambda: 1.0 },
            Family::KillingOdd { p: 3, k: 2, lambda: 1.4 },
            Family::EnlargedConformal { n: 2, a_norm_sq: 1.0 },
            Family::EnlargedConformal { n: 4, a_norm_sq: 2.0 },
            Family::EnlargedKilling { p: 1, lambda: 1.0 },
            Family::EnlargedKilling { p: 2, lambda: 0.5 },
        ];
        for f in families {
            let spec = closed_form_b(&f, 1.0, 1.0).unwrap().solved().unwrap();
            assert!(ode_residual(&f, &spec) < 1e-10, "{}", f.id());
            assert!(spec.validate().pass);
        }
    }

    #[test]
    fn construction_matches_closed_form() {
        let f = Family::Quadratic { n: 5, mu: 1.0 };
        let built = construct_b_from_c(&ProfileProblem::new(f.clone(), ScalarProfile::constant(0.0))).unwrap();
        for i in 0..=250 {
            let t = i as f64 * 1e-3;
            assert!((built.spec.b.value(t) - (-8.0 * t).exp()).abs() < 1e-9);
        }
        assert!(built.ode_residual < 1e-8);
        let odd = construct_b_from_c(&ProfileProblem::new(
            Family::KillingOdd { p: 2, k: 1, lambda: 1.0 },
            ScalarProfile::constant(0.0),
        ))
        .unwrap();
        assert!((odd.spec.b.value(0.7) - (-1.4f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn construction_with_c() {
        let f = Family::KillingEven { p: 2, k: 0, lambda: 1.0 };
        let built = construct_b_from_c(&ProfileProblem::new(f, ScalarProfile::constant(0.1))).unwrap();
        assert!(built.ode_residual < 1e-8);
        assert_eq!(built.spec.b.provenance, Provenance::OdeConstructed);
        let (v, d) = built.spec.b.eval(1.0);
        let (v2, d2) = built.spec.b.eval(1.0 + 1e-10);
        assert!((v - v2).abs() < 1e-8 && (d - d2).abs() < 1e-8);
    }

    #[test]
    fn obstructions() {
        match obstruction_check(&ObstructionCase::Quadratic { n: 3, mu: 1.0 }, &[]) {
            CheckOutcome::Obstructed(c) => {
                assert_eq!(c[0].witness_t, Some(0.25));
                assert!(c[0].margin > 1e-6);
            }
            _ => panic!("n = 3 must be obstructed"),
        }
        match obstruction_check(&ObstructionCase::Conformal { n: 2, a_norm_sq: 1.0 }, &[]) {
            CheckOutcome::Obstructed(c) => assert_eq!(c[0].witness_value, 1.0),
            _ => panic!(),
        }
        match obstruction_check(&ObstructionCase::KillingEven { p: 2, thetas: vec![1.0, 2.0] }, &[]) {
            CheckOutcome::Obstructed(c) => assert_eq!(c[0].witness_value, -5.0),
            _ => panic!(),
        }
        match obstruction_check(&ObstructionCase::KillingOdd { p: 1, thetas: vec![1.0, 2.0] }, &[]) {
            CheckOutcome::Obstructed(c) => assert_eq!(c[0].witness_value, -3.0),
            _ => panic!(),
        }
        assert_eq!(
            obstruction_check(&ObstructionCase::KillingEven { p: 2, thetas: vec![1.0, 1.0] }, &[]),
            CheckOutcome::Feasible
        );
        assert!(matches!(
            closed_form_b(&Family::KillingEven { p: 2, k: 1, lambda: 1.0 }, 1.0, 1.0).unwrap(),
            Solution::Obstructed(_)
        ));
    }

    #[test]
    fn csv_table() {
        let csv = profile_csv(&ScalarProfile::exp(1.0, -1.0), 1.0, 4);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,B,dB");
        assert_eq!(lines.len(), 6);
    }
}
