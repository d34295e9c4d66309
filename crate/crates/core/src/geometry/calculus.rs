//! Pointwise covariant calculus of vector fields.

use super::{Jet, Manifold, Matrix, PointTangent, ScalarField, Vector, VectorField};
use crate::error::Result;

/// Default step of the value-only stencils.
pub const STENCIL_STEP: f64 = 1e-4;

/// Christoffel symbols of `e^{2u}(dx² + dy²)` and their first derivatives.
#[derive(Clone, Debug)]
struct TorusConnection {
    du: [f64; 2],
    ddu: [[f64; 2]; 2],
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

impl TorusConnection {
    fn at(m: &Manifold, p: &Vector) -> Self {
        match m {
            Manifold::ConformalTorus { u } => TorusConnection {
                du: u.gradient(p[0], p[1]),
                ddu: u.hessian(p[0], p[1]),
            },
            _ => TorusConnection {
                du: [0.0; 2],
                ddu: [[0.0; 2]; 2],
            },
        }
    }

    /// `Γ^k_{ij}`
    fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        delta(i, k) * self.du[j] + delta(j, k) * self.du[i] - delta(i, j) * self.du[k]
    }

    /// `∂_m Γ^k_{ij}`
    fn d_gamma(&self, m: usize, k: usize, i: usize, j: usize) -> f64 {
        delta(i, k) * self.ddu[j][m] + delta(j, k) * self.ddu[i][m] - delta(i, j) * self.ddu[k][m]
    }
}

/// A vector field frozen at one point through its 2-jet, able to produce
/// first and second covariant derivatives there.
#[derive(Clone, Debug)]
pub struct LocalField<'m> {
    manifold: &'m Manifold,
    point: Vector,
    jet: Jet,
    torus: Option<TorusConnection>,
}

impl<'m> LocalField<'m> {
    pub fn new(m: &'m Manifold, field: &dyn VectorField, p: &Vector) -> Result<Self> {
        m.check_point(p)?;
        let jet = field.jet(m, p)?;
        Ok(Self::from_jet(m, p.clone(), jet))
    }

    pub fn from_jet(m: &'m Manifold, point: Vector, jet: Jet) -> Self {
        let torus = (!m.is_sphere()).then(|| TorusConnection::at(m, &point));
        LocalField {
            manifold: m,
            point,
            jet,
            torus,
        }
    }

    pub fn point(&self) -> &Vector {
        &self.point
    }

    pub fn value(&self) -> &Vector {
        &self.jet.value
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    /// `∇_x σ`
    pub fn derivative(&self, x: &Vector) -> Vector {
        match &self.torus {
            None => self
                .manifold
                .project_unchecked(&self.point, &(&self.jet.jacobian * x)),
            Some(conn) => {
                let s = &self.jet.value;
                let mut out = &self.jet.jacobian * x;
                for k in 0..2 {
                    for j in 0..2 {
                        for l in 0..2 {
                            out[k] += conn.gamma(k, j, l) * x[j] * s[l];
                        }
                    }
                }
                out
            }
        }
    }

    /// `∇²_{y,z} σ = ∇_y ∇_z σ − ∇_{∇_y z} σ`
    pub fn second(&self, y: &Vector, z: &Vector) -> Vector {
        let jet = &self.jet;
        match &self.torus {
            None => {
                let p = &self.point;
                let m = self.manifold;
                let d2 = Vector::from_iterator(
                    jet.dim(),
                    jet.hessians.iter().map(|h| (y.transpose() * h * z)[(0, 0)]),
                );
                let jp = &jet.jacobian * p;
                m.project_unchecked(p, &d2) - m.project_unchecked(p, &jp) * y.dot(z)
                    + y * jet.value.dot(z)
            }
            Some(conn) => {
                let s = &jet.value;
                // (∇_j Y)^k and ∂_i (∇_j Y)^k in coordinates
                let mut cov = [[0.0; 2]; 2];
                for j in 0..2 {
                    for k in 0..2 {
                        let mut v = jet.jacobian[(k, j)];
                        for l in 0..2 {
                            v += conn.gamma(k, j, l) * s[l];
                        }
                        cov[j][k] = v;
                    }
                }
                let mut out = Vector::zeros(2);
                for i in 0..2 {
                    for j in 0..2 {
                        let w = y[i] * z[j];
                        if w == 0.0 {
                            continue;
                        }
                        for k in 0..2 {
                            let mut d = jet.hessians[k][(i, j)];
                            for l in 0..2 {
                                d += conn.d_gamma(i, k, j, l) * s[l]
                                    + conn.gamma(k, j, l) * jet.jacobian[(l, i)];
                            }
                            for l in 0..2 {
                                d += conn.gamma(k, i, l) * cov[j][l] - conn.gamma(l, i, j) * cov[l][k];
                            }
                            out[k] += w * d;
                        }
                    }
                }
                out
            }
        }
    }

    /// Full set of derived quantities in the manifold's deterministic frame.
    pub fn calculus(&self) -> FieldCalculus {
        let frame = self.manifold.frame(&self.point);
        let derivatives: Vec<Vector> = frame.iter().map(|e| self.derivative(e)).collect();
        let mut rough = Vector::zeros(self.point.len());
        for e in &frame {
            rough -= self.second(e, e);
        }
        FieldCalculus::assemble(
            self.manifold,
            self.point.clone(),
            self.jet.value.clone(),
            frame,
            derivatives,
            rough,
        )
    }
}

/// Derived first- and second-order quantities of a vector field at a point.
///
/// Column `j` of `covariant_jacobian` holds the frame components of
/// `∇_{e_j}σ`, i.e. `J[(i, j)] = g(∇_{e_j}σ, e_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCalculus {
    pub point: Vector,
    pub value: Vector,
    pub frame: Vec<Vector>,
    /// `∇_{e_i}σ` for each frame vector.
    pub derivatives: Vec<Vector>,
    pub covariant_jacobian: Matrix,
    /// `∇*∇σ`
    pub rough_laplacian: Vector,
    /// `X(σ) = grad |σ|²/2`
    pub grad_half_norm: Vector,
    pub jacobian_norm_sq: f64,
    pub divergence: f64,
    /// `|L_σ g|²`
    pub lie_norm_sq: f64,
    pub norm_sq: f64,
}

impl FieldCalculus {
    pub fn assemble(
        m: &Manifold,
        point: Vector,
        value: Vector,
        frame: Vec<Vector>,
        derivatives: Vec<Vector>,
        rough_laplacian: Vector,
    ) -> Self {
        let n = frame.len();
        let jac = Matrix::from_fn(n, n, |i, j| m.inner(&point, &derivatives[j], &frame[i]));
        let mut grad_half_norm = Vector::zeros(point.len());
        for (e, d) in frame.iter().zip(&derivatives) {
            grad_half_norm += e * m.inner(&point, d, &value);
        }
        let jacobian_norm_sq = derivatives.iter().map(|d| m.norm_sq(&point, d)).sum();
        let sym = &jac + jac.transpose();
        FieldCalculus {
            covariant_jacobian: jac.clone(),
            divergence: jac.trace(),
            lie_norm_sq: sym.norm_squared(),
            norm_sq: m.norm_sq(&point, &value),
            jacobian_norm_sq,
            grad_half_norm,
            rough_laplacian,
            point,
            value,
            frame,
            derivatives,
        }
    }

    /// `∇_v σ` for an arbitrary tangent vector `v`, by linearity in the frame.
    pub fn derivative_along(&self, m: &Manifold, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.point.len());
        for (e, d) in self.frame.iter().zip(&self.derivatives) {
            out += d * m.inner(&self.point, v, e);
        }
        out
    }

    /// `∇_σ σ`
    pub fn self_derivative(&self, m: &Manifold) -> Vector {
        self.derivative_along(m, &self.value)
    }
}

/// `∇_X σ` from the analytic jet of the field.
pub fn covariant_derivative(m: &Manifold, field: &dyn VectorField, x: &PointTangent) -> Result<Vector> {
    m.check_tangent(&x.point, &x.vector)?;
    Ok(LocalField::new(m, field, &x.point)?.derivative(&x.vector))
}

/// Analytic field calculus at `p`.
pub fn field_calculus(m: &Manifold, field: &dyn VectorField, p: &Vector) -> Result<FieldCalculus> {
    Ok(LocalField::new(m, field, p)?.calculus())
}

/// Field calculus from field values only.
///
/// On spheres the stencil runs along the geodesics `exp_p(±h e_i)` and brings
/// values back by parallel transport, so that first and second central
/// differences approximate `∇_{e_i}σ` and `∇²_{e_i,e_i}σ`. On tori the
/// coordinate derivatives of the components are differenced and combined
/// with the Christoffel symbols of the metric.
pub fn field_calculus_stencil(
    m: &Manifold,
    field: &dyn VectorField,
    p: &Vector,
    h: f64,
) -> Result<FieldCalculus> {
    m.check_point(p)?;
    match m {
        Manifold::RoundSphere { .. } => {
            let sigma = m.project_unchecked(p, &field.value(m, p)?);
            let frame = m.frame(p);
            let (s, c) = h.sin_cos();
            let mut derivatives = Vec::with_capacity(frame.len());
            let mut rough = Vector::zeros(p.len());
            for e in &frame {
                let mut transported = [Vector::zeros(0), Vector::zeros(0)];
                for (slot, sign) in transported.iter_mut().zip([1.0, -1.0]) {
                    let q = p * c + e * (sign * s);
                    let v = m.project_unchecked(&q, &field.value(m, &q)?);
                    *slot = sphere_transport(&q, p, &v);
                }
                let [plus, minus] = transported;
                derivatives.push(m.project_unchecked(p, &((&plus - &minus) / (2.0 * h))));
                rough -= m.project_unchecked(p, &((&plus - &sigma * 2.0 + &minus) / (h * h)));
            }
            Ok(FieldCalculus::assemble(m, p.clone(), sigma, frame, derivatives, rough))
        }
        _ => {
            let jet = numerical_torus_jet(m, field, p, h)?;
            Ok(LocalField::from_jet(m, p.clone(), jet).calculus())
        }
    }
}

/// Parallel transport on the unit sphere along the minimizing geodesic from
/// `x` to `y`, for `v ∈ T_x`.
pub fn sphere_transport(x: &Vector, y: &Vector, v: &Vector) -> Vector {
    v - (x + y) * (y.dot(v) / (1.0 + x.dot(y)))
}

/// Geodesic `exp_p(v)` on the unit sphere.
pub fn sphere_exp(p: &Vector, v: &Vector) -> Vector {
    let t = v.norm();
    if t == 0.0 {
        return p.clone();
    }
    p * t.cos() + v * (t.sin() / t)
}

fn numerical_torus_jet(m: &Manifold, field: &dyn VectorField, p: &Vector, h: f64) -> Result<Jet> {
    let at = |dx: f64, dy: f64| -> Result<Vector> {
        field.value(m, &Vector::from_row_slice(&[p[0] + dx, p[1] + dy]))
    };
    let center = at(0.0, 0.0)?;
    let mut jet = Jet::zeros(2);
    jet.value = center.clone();
    let shifts = [(h, 0.0), (0.0, h)];
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (j, &(dx, dy)) in shifts.iter().enumerate() {
        let vp = at(dx, dy)?;
        let vm = at(-dx, -dy)?;
        for k in 0..2 {
            jet.jacobian[(k, j)] = (vp[k] - vm[k]) / (2.0 * h);
            jet.hessians[k][(j, j)] = (vp[k] - 2.0 * center[k] + vm[k]) / (h * h);
        }
        plus.push(vp);
        minus.push(vm);
    }
    let pp = at(h, h)?;
    let pm = at(h, -h)?;
    let mp = at(-h, h)?;
    let mm = at(-h, -h)?;
    for k in 0..2 {
        let mixed = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h);
        jet.hessians[k][(0, 1)] = mixed;
        jet.hessians[k][(1, 0)] = mixed;
    }
    Ok(jet)
}

/// Nonnegative Laplacian `Δf = −tr Hess f`, so that `Δλ = nλ` for a height
/// function on `Sⁿ`.
pub fn scalar_laplacian(m: &Manifold, f: &dyn ScalarField, p: &Vector) -> Result<f64> {
    m.check_point(p)?;
    let jet = f.jet(m, p)?;
    match m {
        Manifold::RoundSphere { n } => {
            let trace: f64 = m
                .frame(p)
                .iter()
                .map(|e| (e.transpose() * &jet.hessian * e)[(0, 0)])
                .sum();
            Ok(-(trace - *n as f64 * jet.gradient.dot(p)))
        }
        Manifold::FlatTorus { .. } => Ok(-jet.hessian.trace()),
        Manifold::ConformalTorus { u } => Ok(-(-2.0 * u.value(p[0], p[1])).exp() * jet.hessian.trace()),
    }
}

/// Riemannian gradient of a scalar field at `p`.
pub fn scalar_gradient(m: &Manifold, f: &dyn ScalarField, p: &Vector) -> Result<Vector> {
    m.check_point(p)?;
    let jet = f.jet(m, p)?;
    Ok(match m {
        Manifold::RoundSphere { .. } => m.project_unchecked(p, &jet.gradient),
        _ => jet.gradient / m.volume_density(p),
    })
}
