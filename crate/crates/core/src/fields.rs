//! Catalog of explicit vector fields on spheres and tori, with the closed-form
//! covariant quantities used as oracles for the generic calculus.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_jet, FieldCalculus, Jet, Manifold, Matrix, Vector, VectorField};

/// Normalized fields are undefined where the inner field is shorter than this.
pub const NORMALIZATION_FLOOR: f64 = 1e-9;

/// One Fourier mode `cos·cos φ + sin·sin φ`, `φ = 2π(kx·x/L₁ + ky·y/L₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub kx: i32,
    pub ky: i32,
    pub cos: [f64; 2],
    #[serde(default)]
    pub sin: [f64; 2],
}

/// A named vector field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// `grad λ` on `Sⁿ` for the height function `λ(x) = ⟨a, x⟩`; equals `a − λx`.
    Conformal { a: Vec<f64> },
    /// `½ grad (xᵀMx)` on `Sⁿ` with `M` diagonal, given as `(eigenvalue, multiplicity)`
    /// blocks in coordinate order; equals `Mx − (xᵀMx)x`.
    QuadraticGradient { eigs: Vec<(f64, usize)> },
    /// `Σ θᵢ (−x_{2i}, x_{2i−1})`, one rotation speed per coordinate plane.
    KillingRotation { thetas: Vec<f64> },
    /// Constant coordinate components on a torus (parallel on the flat torus).
    ParallelTorus { v: [f64; 2] },
    /// A trigonometric polynomial field on a torus.
    TrigTorus { modes: Vec<TrigMode> },
    /// `σ / |σ|`, defined where `|σ| ≥ 1e-9`.
    Normalized { inner: Box<FieldSpec> },
    Scaled { inner: Box<FieldSpec>, factor: f64 },
}

impl FieldSpec {
    pub fn conformal(a: &[f64]) -> Self {
        FieldSpec::Conformal { a: a.to_vec() }
    }

    pub fn quadratic(eigs: &[(f64, usize)]) -> Self {
        FieldSpec::QuadraticGradient {
            eigs: eigs.to_vec(),
        }
    }

    /// Two-eigenvalue quadratic field `μ` (multiplicity `p`) and `0`
    /// (multiplicity `n + 1 − p`) on `Sⁿ`.
    pub fn quadratic_two(n: usize, mu: f64, p: usize) -> Self {
        FieldSpec::quadratic(&[(mu, p), (0.0, n + 1 - p)])
    }

    /// Builds a quadratic field from an arbitrary symmetric matrix, in the
    /// coordinates of its eigenbasis. Eigenvalues closer than `1e-10` are
    /// merged into one block.
    pub fn quadratic_from_matrix(m: &Matrix) -> Result<Self> {
        if !m.is_square() || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidInput("quadratic form must be a symmetric matrix".into()));
        }
        let eig = m.clone().symmetric_eigen();
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let mut blocks: Vec<(f64, usize)> = Vec::new();
        for v in values {
            match blocks.last_mut() {
                Some((mean, count)) if (*mean - v).abs() < 1e-10 => {
                    *mean = (*mean * *count as f64 + v) / (*count as f64 + 1.0);
                    *count += 1;
                }
                _ => blocks.push((v, 1)),
            }
        }
        Ok(FieldSpec::QuadraticGradient { eigs: blocks })
    }

    pub fn killing(thetas: &[f64]) -> Self {
        FieldSpec::KillingRotation {
            thetas: thetas.to_vec(),
        }
    }

    /// Equal-speed rotation in `planes` coordinate planes.
    pub fn killing_equal(lambda: f64, planes: usize) -> Self {
        FieldSpec::killing(&vec![lambda; planes])
    }

    pub fn parallel(v: [f64; 2]) -> Self {
        FieldSpec::ParallelTorus { v }
    }

    pub fn normalized(self) -> Self {
        FieldSpec::Normalized { inner: Box::new(self) }
    }

    pub fn scaled(self, factor: f64) -> Self {
        FieldSpec::Scaled {
            inner: Box::new(self),
            factor,
        }
    }

    /// Stable identifier for reports.
    pub fn id(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            FieldSpec::Conformal { a } => format!("conformal({})", list(a)),
            FieldSpec::QuadraticGradient { eigs } => {
                let parts: Vec<String> = eigs.iter().map(|(e, m)| format!("{e}x{m}")).collect();
                format!("quadratic({})", parts.join(","))
            }
            FieldSpec::KillingRotation { thetas } => format!("killing({})", list(thetas)),
            FieldSpec::ParallelTorus { v } => format!("parallel({},{})", v[0], v[1]),
            FieldSpec::TrigTorus { modes } => {
                let mut s = String::from("trig(");
                for (i, m) in modes.iter().enumerate() {
                    if i > 0 {
                        s.push(';');
                    }
                    let _ = write!(
                        s,
                        "{}:{}:{},{}:{},{}",
                        m.kx, m.ky, m.cos[0], m.cos[1], m.sin[0], m.sin[1]
                    );
                }
                s.push(')');
                s
            }
            FieldSpec::Normalized { inner } => format!("normalized({})", inner.id()),
            FieldSpec::Scaled { inner, factor } => format!("scaled({factor},{})", inner.id()),
        }
    }

    /// Checks that the field lives on `m`.
    pub fn check_compatible(&self, m: &Manifold) -> Result<()> {
        let sphere_n = match m {
            Manifold::RoundSphere { n } => Some(*n),
            _ => None,
        };
        let bad = |what: &str| {
            Err(Error::InvalidInput(format!(
                "field {} is not defined on {} ({what})",
                self.id(),
                m.id()
            )))
        };
        match self {
            FieldSpec::Conformal { a } => match sphere_n {
                Some(n) if a.len() == n + 1 => Ok(()),
                _ => bad("needs a sphere of matching ambient dimension"),
            },
            FieldSpec::QuadraticGradient { eigs } => match sphere_n {
                Some(n) if eigs.iter().map(|e| e.1).sum::<usize>() == n + 1 => Ok(()),
                _ => bad("multiplicities must sum to n + 1"),
            },
            FieldSpec::KillingRotation { thetas } => match sphere_n {
                Some(n) if 2 * thetas.len() <= n + 1 => Ok(()),
                _ => bad("too many rotation planes"),
            },
            FieldSpec::ParallelTorus { .. } | FieldSpec::TrigTorus { .. } => match sphere_n {
                None => Ok(()),
                Some(_) => bad("torus field"),
            },
            FieldSpec::Normalized { inner } => inner.check_compatible(m),
            FieldSpec::Scaled { inner, .. } => inner.check_compatible(m),
        }
    }

    /// Value at a point of `m`.
    pub fn evaluate(&self, m: &Manifold, p: &Vector) -> Result<Vector> {
        m.check_point(p)?;
        self.check_compatible(m)?;
        self.value(m, p)
    }

    /// Sup of `|σ|²` over the manifold, when known in closed form.
    pub fn sup_norm_sq(&self) -> Option<f64> {
        match self {
            FieldSpec::Conformal { a } => Some(a.iter().map(|x| x * x).sum()),
            FieldSpec::QuadraticGradient { eigs } => {
                let hi = eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
                let lo = eigs.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
                Some((hi - lo).powi(2) / 4.0)
            }
            FieldSpec::KillingRotation { thetas } => {
                Some(thetas.iter().map(|t| t * t).fold(0.0, f64::max))
            }
            FieldSpec::ParallelTorus { v } => Some(v[0] * v[0] + v[1] * v[1]),
            FieldSpec::Normalized { .. } => Some(1.0),
            FieldSpec::Scaled { inner, factor } => inner.sup_norm_sq().map(|s| s * factor * factor),
            FieldSpec::TrigTorus { .. } => None,
        }
    }

    /// Whether `p` is an admissible sample point (away from zeros of
    /// normalized fields).
    pub fn is_admissible(&self, m: &Manifold, p: &Vector) -> bool {
        match self {
            FieldSpec::Normalized { inner } => match inner.value(m, p) {
                Ok(v) => m.norm_sq(p, &v).sqrt() >= NORMALIZATION_FLOOR && inner.is_admissible(m, p),
                Err(_) => false,
            },
            FieldSpec::Scaled { inner, .. } => inner.is_admissible(m, p),
            _ => true,
        }
    }

    fn diagonal(eigs: &[(f64, usize)]) -> Vec<f64> {
        eigs.iter()
            .flat_map(|&(e, mult)| std::iter::repeat(e).take(mult))
            .collect()
    }
}

impl VectorField for FieldSpec {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<Jet> {
        let dim = m.ambient_dim();
        if x.len() != dim {
            return Err(Error::InvalidInput(format!(
                "point has {} components, expected {dim}",
                x.len()
            )));
        }
        match self {
            FieldSpec::Conformal { a } => {
                self.check_compatible(m)?;
                let a = Vector::from_row_slice(a);
                let lambda = a.dot(x);
                let mut jet = Jet::zeros(dim);
                jet.value = &a - x * lambda;
                jet.jacobian = -(x * a.transpose()) - Matrix::identity(dim, dim) * lambda;
                for k in 0..dim {
                    let mut h = Matrix::zeros(dim, dim);
                    for i in 0..dim {
                        h[(i, k)] -= a[i];
                        h[(k, i)] -= a[i];
                    }
                    jet.hessians[k] = h;
                }
                Ok(jet)
            }
            FieldSpec::QuadraticGradient { eigs } => {
                self.check_compatible(m)?;
                let d = Self::diagonal(eigs);
                let lambda: f64 = (0..dim).map(|i| d[i] * x[i] * x[i]).sum();
                let mut jet = Jet::zeros(dim);
                for k in 0..dim {
                    jet.value[k] = (d[k] - lambda) * x[k];
                    for j in 0..dim {
                        jet.jacobian[(k, j)] = delta(k, j) * (d[k] - lambda) - 2.0 * d[j] * x[j] * x[k];
                    }
                    let mut h = Matrix::zeros(dim, dim);
                    for i in 0..dim {
                        for j in 0..dim {
                            h[(i, j)] = -2.0
                                * (d[j] * delta(i, j) * x[k]
                                    + d[j] * x[j] * delta(i, k)
                                    + d[i] * x[i] * delta(j, k));
                        }
                    }
                    jet.hessians[k] = h;
                }
                Ok(jet)
            }
            FieldSpec::KillingRotation { thetas } => {
                self.check_compatible(m)?;
                let rot = rotation_matrix(thetas, dim);
                let mut jet = Jet::zeros(dim);
                jet.value = &rot * x;
                jet.jacobian = rot;
                Ok(jet)
            }
            FieldSpec::ParallelTorus { v } => {
                self.check_compatible(m)?;
                let mut jet = Jet::zeros(2);
                jet.value = Vector::from_row_slice(v);
                Ok(jet)
            }
            FieldSpec::TrigTorus { modes } => {
                self.check_compatible(m)?;
                let periods = m.periods().expect("torus");
                let mut jet = Jet::zeros(2);
                for mode in modes {
                    let w = [
                        2.0 * PI * mode.kx as f64 / periods[0],
                        2.0 * PI * mode.ky as f64 / periods[1],
                    ];
                    let (s, c) = (w[0] * x[0] + w[1] * x[1]).sin_cos();
                    for k in 0..2 {
                        let val = mode.cos[k] * c + mode.sin[k] * s;
                        let der = -mode.cos[k] * s + mode.sin[k] * c;
                        jet.value[k] += val;
                        for j in 0..2 {
                            jet.jacobian[(k, j)] += der * w[j];
                            for i in 0..2 {
                                jet.hessians[k][(i, j)] -= val * w[i] * w[j];
                            }
                        }
                    }
                }
                Ok(jet)
            }
            FieldSpec::Normalized { inner } => {
                let jet = inner.jet(m, x)?;
                normalize_jet(m, x, &jet, NORMALIZATION_FLOOR).ok_or_else(|| {
                    Error::Domain(format!(
                        "{} vanishes (|σ| < {NORMALIZATION_FLOOR:e}) and cannot be normalized",
                        inner.id()
                    ))
                })
            }
            FieldSpec::Scaled { inner, factor } => Ok(inner.jet(m, x)?.scale(*factor)),
        }
    }

    fn value(&self, m: &Manifold, x: &Vector) -> Result<Vector> {
        match self {
            FieldSpec::Normalized { inner } => {
                let v = inner.value(m, x)?;
                let norm = m.norm_sq(x, &v).sqrt();
                if !(norm >= NORMALIZATION_FLOOR) {
                    return Err(Error::Domain(format!(
                        "{} vanishes (|σ| < {NORMALIZATION_FLOOR:e}) and cannot be normalized",
                        inner.id()
                    )));
                }
                Ok(v / norm)
            }
            FieldSpec::Scaled { inner, factor } => Ok(inner.value(m, x)? * *factor),
            _ => Ok(self.jet(m, x)?.value),
        }
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Antisymmetric matrix of the rotation field with the given plane speeds.
pub fn rotation_matrix(thetas: &[f64], dim: usize) -> Matrix {
    let mut rot = Matrix::zeros(dim, dim);
    for (i, &t) in thetas.iter().enumerate() {
        rot[(2 * i, 2 * i + 1)] = -t;
        rot[(2 * i + 1, 2 * i)] = t;
    }
    rot
}

/// Dimension data of the invariant axis of a rotation field's flow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisInfo {
    /// Dimension of the fixed subspace in the ambient space.
    pub dim: usize,
    /// `dim = 2k + 1` on even spheres `S^{2p}`, `dim = 2k` on odd spheres `S^{2p+1}`.
    pub k: usize,
    /// Half the sphere dimension, rounded down.
    pub p: usize,
    /// `k = p − 1` on even spheres, `k = p` on odd spheres.
    pub maximal: bool,
}

/// Invariant-axis data of `Σ θᵢ σ_{2i}` on the sphere of the given ambient
/// dimension. Zero speeds count as part of the axis.
pub fn axis_info(thetas: &[f64], ambient_dim: usize) -> AxisInfo {
    let active = thetas.iter().filter(|t| **t != 0.0).count();
    let dim = ambient_dim.saturating_sub(2 * active);
    let n = ambient_dim.saturating_sub(1);
    let p = n / 2;
    if n % 2 == 0 {
        let k = dim.saturating_sub(1) / 2;
        AxisInfo {
            dim,
            k,
            p,
            maximal: p >= 1 && k == p - 1,
        }
    } else {
        let k = dim / 2;
        AxisInfo {
            dim,
            k,
            p,
            maximal: k == p,
        }
    }
}

struct LinearPart {
    value: Vector,
    /// Ambient matrix `L` with `∇_v σ = L v` for tangent `v`.
    map: Matrix,
    rough: Vector,
    grad_half_norm: Vector,
    jacobian_norm_sq: f64,
    divergence: f64,
    norm_sq: f64,
}

/// Closed-form field calculus for the catalog fields that admit one.
///
/// The frame matches [`Manifold::frame`], so the covariant Jacobian is
/// directly comparable with the generic calculus.
pub fn closed_form_oracle(field: &FieldSpec, m: &Manifold, p: &Vector) -> Result<FieldCalculus> {
    m.check_point(p)?;
    field.check_compatible(m)?;
    let frame = m.frame(p);
    if let FieldSpec::ParallelTorus { v } = field {
        let flat = match m {
            Manifold::FlatTorus { .. } => true,
            Manifold::ConformalTorus { u } => u.is_zero(),
            _ => false,
        };
        if !flat {
            return Err(Error::Unsupported("constant field on a curved torus".into()));
        }
        let value = Vector::from_row_slice(v);
        let zero = Vector::zeros(2);
        return Ok(FieldCalculus::assemble(
            m,
            p.clone(),
            value,
            frame,
            vec![zero.clone(), zero.clone()],
            zero,
        ));
    }
    let n = match m {
        Manifold::RoundSphere { n } => *n,
        _ => {
            return Err(Error::Unsupported(format!(
                "no closed forms for {} on {}",
                field.id(),
                m.id()
            )))
        }
    };
    let lin = sphere_linear_part(field, n, p)?;
    let derivatives: Vec<Vector> = frame.iter().map(|e| &lin.map * e).collect();
    let mut fc = FieldCalculus::assemble(m, p.clone(), lin.value, frame, derivatives, lin.rough);
    fc.grad_half_norm = lin.grad_half_norm;
    fc.jacobian_norm_sq = lin.jacobian_norm_sq;
    fc.divergence = lin.divergence;
    fc.norm_sq = lin.norm_sq;
    Ok(fc)
}

fn sphere_linear_part(field: &FieldSpec, n: usize, p: &Vector) -> Result<LinearPart> {
    let dim = n + 1;
    let nf = n as f64;
    let proj = Matrix::identity(dim, dim) - p * p.transpose();
    match field {
        FieldSpec::Conformal { a } => {
            let a = Vector::from_row_slice(a);
            let lambda = a.dot(p);
            let sigma = &a - p * lambda;
            Ok(LinearPart {
                map: &proj * -lambda,
                rough: sigma.clone(),
                grad_half_norm: &sigma * -lambda,
                jacobian_norm_sq: nf * lambda * lambda,
                divergence: -nf * lambda,
                norm_sq: a.norm_squared() - lambda * lambda,
                value: sigma,
            })
        }
        FieldSpec::QuadraticGradient { eigs } => {
            let d = FieldSpec::diagonal(eigs);
            let mat = Matrix::from_diagonal(&Vector::from_row_slice(&d));
            let mp = &mat * p;
            let m2p = &mat * &mp;
            let lambda = p.dot(&mp);
            let lambda2 = p.dot(&m2p);
            let sigma = &mp - p * lambda;
            let sigma2 = &m2p - p * lambda2;
            let trace: f64 = d.iter().sum();
            let frob: f64 = d.iter().map(|x| x * x).sum();
            Ok(LinearPart {
                map: &proj * &mat * &proj - &proj * lambda,
                rough: &sigma * (nf + 3.0),
                grad_half_norm: sigma2 - &sigma * (2.0 * lambda),
                jacobian_norm_sq: frob - 2.0 * lambda2 - 2.0 * lambda * trace
                    + (nf + 3.0) * lambda * lambda,
                divergence: trace - (nf + 1.0) * lambda,
                norm_sq: lambda2 - lambda * lambda,
                value: sigma,
            })
        }
        FieldSpec::KillingRotation { thetas } => {
            let rot = rotation_matrix(thetas, dim);
            let xi = &rot * p;
            let q = xi.norm_squared();
            let speeds: f64 = thetas.iter().map(|t| t * t).sum();
            let nabla_xi_xi = &rot * &xi + p * q;
            Ok(LinearPart {
                map: &proj * &rot,
                rough: &xi * (nf - 1.0),
                grad_half_norm: -nabla_xi_xi,
                jacobian_norm_sq: 2.0 * (speeds - q),
                divergence: 0.0,
                norm_sq: q,
                value: xi,
            })
        }
        FieldSpec::Scaled { inner, factor } => {
            let c = *factor;
            let lin = sphere_linear_part(inner, n, p)?;
            Ok(LinearPart {
                value: lin.value * c,
                map: lin.map * c,
                rough: lin.rough * c,
                grad_half_norm: lin.grad_half_norm * (c * c),
                jacobian_norm_sq: lin.jacobian_norm_sq * c * c,
                divergence: lin.divergence * c,
                norm_sq: lin.norm_sq * c * c,
            })
        }
        FieldSpec::Normalized { inner } => {
            let (base, sign) = match inner.as_ref() {
                FieldSpec::Scaled { inner, factor } if *factor != 0.0 => (inner.as_ref(), factor.signum()),
                other => (other, 1.0),
            };
            if !matches!(base, FieldSpec::KillingRotation { .. }) {
                return Err(Error::Unsupported(format!(
                    "no closed forms for the normalization of {}",
                    inner.id()
                )));
            }
            let k = sphere_linear_part(base, n, p)?;
            let q = k.norm_sq;
            let r = q.sqrt();
            if r < NORMALIZATION_FLOOR {
                return Err(Error::Domain("normalized Killing field at a zero".into()));
            }
            let x = &k.grad_half_norm;
            let x_sq = x.norm_squared();
            // f = q^{-1/2}: grad f = −X(ξ)/r³, Δf = φ'Δq − φ''|grad q|²
            let grad_f = x * (-1.0 / (r * r * r));
            let lap_q = 2.0 * ((nf - 1.0) * q - k.jacobian_norm_sq);
            let d_phi = -0.5 / (q * r);
            let dd_phi = 0.75 / (q * q * r);
            let lap_f = d_phi * lap_q - dd_phi * 4.0 * x_sq;
            let rough = &k.rough / r + &k.value * lap_f - &k.map * &grad_f * 2.0;
            let map = &k.map / r - &k.value * x.transpose() / (q * r);
            Ok(LinearPart {
                value: &k.value * (sign / r),
                map: map * sign,
                rough: rough * sign,
                grad_half_norm: Vector::zeros(dim),
                jacobian_norm_sq: k.jacobian_norm_sq / q - x_sq / (q * q),
                divergence: 0.0,
                norm_sq: 1.0,
            })
        }
        other => Err(Error::Unsupported(format!("no closed forms for {}", other.id()))),
    }
}
