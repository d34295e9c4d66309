//! Second-order jets of ambient (or coordinate) expressions.
//!
//! Fields on spheres are given by smooth extensions to the ambient space and
//! fields on tori by their coordinate components. Every covariant quantity in
//! this crate is assembled from the value, first and second derivatives of
//! those expressions at a single point.

use super::{Manifold, Matrix, Vector};
use crate::error::Result;

/// Value, gradient and Hessian of a scalar expression at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: Matrix,
}

impl ScalarJet {
    pub fn constant(value: f64, dim: usize) -> Self {
        ScalarJet {
            value,
            gradient: Vector::zeros(dim),
            hessian: Matrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn mul(&self, other: &ScalarJet) -> ScalarJet {
        let gradient = &other.gradient * self.value + &self.gradient * other.value;
        let hessian = &other.hessian * self.value
            + &self.hessian * other.value
            + &self.gradient * other.gradient.transpose()
            + &other.gradient * self.gradient.transpose();
        ScalarJet {
            value: self.value * other.value,
            gradient,
            hessian,
        }
    }

    /// Jet of `phi(self)` given `phi`, `phi'` and `phi''` at the current value.
    pub fn compose(&self, phi: f64, d_phi: f64, dd_phi: f64) -> ScalarJet {
        ScalarJet {
            value: phi,
            gradient: &self.gradient * d_phi,
            hessian: &self.hessian * d_phi
                + &self.gradient * self.gradient.transpose() * dd_phi,
        }
    }

    pub fn exp(&self) -> ScalarJet {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn scale(&self, c: f64) -> ScalarJet {
        ScalarJet {
            value: self.value * c,
            gradient: &self.gradient * c,
            hessian: &self.hessian * c,
        }
    }
}

/// Value, Jacobian and per-component Hessians of a vector expression.
///
/// `jacobian[(k, j)]` is the derivative of component `k` along coordinate `j`;
/// `hessians[k]` is the Hessian of component `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: Vector,
    pub jacobian: Matrix,
    pub hessians: Vec<Matrix>,
}

impl Jet {
    pub fn zeros(dim: usize) -> Self {
        Jet {
            value: Vector::zeros(dim),
            jacobian: Matrix::zeros(dim, dim),
            hessians: vec![Matrix::zeros(dim, dim); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            value: &self.value * c,
            jacobian: &self.jacobian * c,
            hessians: self.hessians.iter().map(|h| h * c).collect(),
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        Jet {
            value: &self.value + &other.value,
            jacobian: &self.jacobian + &other.jacobian,
            hessians: self
                .hessians
                .iter()
                .zip(&other.hessians)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Product with a scalar expression, by the Leibniz rule.
    pub fn mul_scalar(&self, f: &ScalarJet) -> Jet {
        let n = self.dim();
        let value = &self.value * f.value;
        let jacobian = &self.jacobian * f.value + &self.value * f.gradient.transpose();
        let hessians = (0..n)
            .map(|k| {
                let row = self.jacobian.row(k).transpose();
                &self.hessians[k] * f.value
                    + &row * f.gradient.transpose()
                    + &f.gradient * row.transpose()
                    + &f.hessian * self.value[k]
            })
            .collect();
        Jet {
            value,
            jacobian,
            hessians,
        }
    }

    /// Jet of the Euclidean squared norm of the expression.
    pub fn euclidean_norm_sq(&self) -> ScalarJet {
        let mut hessian = self.jacobian.transpose() * &self.jacobian;
        for (k, h) in self.hessians.iter().enumerate() {
            hessian += h * self.value[k];
        }
        ScalarJet {
            value: self.value.norm_squared(),
            gradient: self.jacobian.transpose() * &self.value * 2.0,
            hessian: hessian * 2.0,
        }
    }

    /// Jet of the Riemannian squared norm `g(S, S)` on `m`.
    pub fn metric_norm_sq(&self, m: &Manifold, x: &Vector) -> ScalarJet {
        let euclid = self.euclidean_norm_sq();
        match m.conformal_factor_jet(x) {
            Some(u) => u.scale(2.0).exp().mul(&euclid),
            None => euclid,
        }
    }
}

/// A smooth tangent vector field that can report its 2-jet.
pub trait VectorField: Send + Sync {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<Jet>;

    fn value(&self, m: &Manifold, x: &Vector) -> Result<Vector> {
        Ok(self.jet(m, x)?.value)
    }
}

/// A smooth scalar function that can report its 2-jet.
pub trait ScalarField: Send + Sync {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<ScalarJet>;
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<Jet> {
        (**self).jet(m, x)
    }

    fn value(&self, m: &Manifold, x: &Vector) -> Result<Vector> {
        (**self).value(m, x)
    }
}

/// `λ(x) = ⟨a, x⟩` restricted to a sphere.
#[derive(Clone, Debug)]
pub struct HeightFunction {
    pub a: Vector,
}

impl ScalarField for HeightFunction {
    fn jet(&self, _m: &Manifold, x: &Vector) -> Result<ScalarJet> {
        let n = x.len();
        Ok(ScalarJet {
            value: self.a.dot(x),
            gradient: self.a.clone(),
            hessian: Matrix::zeros(n, n),
        })
    }
}

/// `|σ|² / 2` for a vector field σ, measured with the manifold metric.
pub struct HalfNormSquared<F>(pub F);

impl<F: VectorField> ScalarField for HalfNormSquared<F> {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<ScalarJet> {
        Ok(self.0.jet(m, x)?.metric_norm_sq(m, x).scale(0.5))
    }
}

/// Metric normalization `S / |S|` of a jet, or `None` when `|S|` is below `floor`.
pub fn normalize_jet(m: &Manifold, x: &Vector, jet: &Jet, floor: f64) -> Option<Jet> {
    let q = jet.metric_norm_sq(m, x);
    if !(q.value.sqrt() >= floor) {
        return None;
    }
    let r = q.value.powf(-0.5);
    let inv = q.compose(r, -0.5 * r / q.value, 0.75 * r / (q.value * q.value));
    Some(jet.mul_scalar(&inv))
}
