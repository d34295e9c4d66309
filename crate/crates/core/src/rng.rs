//! Reproducible sampling.
//!
//! All random points come from `ChaCha8Rng` seeded with a `u64`. Sphere
//! points are normalized vectors of independent standard normals
//! (`rand_distr::StandardNormal`, ziggurat); torus points are uniform in the
//! fundamental domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fields::{FieldSpec, TrigMode};
use crate::geometry::{Manifold, Vector};

pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut SampleRng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

pub fn sample_point(m: &Manifold, rng: &mut SampleRng) -> Vector {
    match m.periods() {
        None => loop {
            let v = gaussian_vector(rng, m.ambient_dim());
            let r = v.norm();
            if r > 1e-6 {
                break v / r;
            }
        },
        Some([l1, l2]) => Vector::from_row_slice(&[rng.random::<f64>() * l1, rng.random::<f64>() * l2]),
    }
}

/// Gaussian tangent vector at `p` (Euclidean components).
pub fn sample_tangent(m: &Manifold, p: &Vector, rng: &mut SampleRng) -> Vector {
    let v = gaussian_vector(rng, m.ambient_dim());
    if m.is_sphere() {
        &v - p * p.dot(&v)
    } else {
        v
    }
}

/// `count` sample points at which `field` is defined.
pub fn admissible_points(m: &Manifold, field: &FieldSpec, count: usize, rng: &mut SampleRng) -> Vec<Vector> {
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let p = sample_point(m, rng);
        if field.is_admissible(m, &p) {
            out.push(p);
        }
    }
    out
}

/// Random trigonometric field with wave numbers in `[-max_k, max_k]` and
/// coefficient scale `amplitude`.
pub fn random_trig_field(rng: &mut SampleRng, modes: usize, max_k: i32, amplitude: f64) -> FieldSpec {
    let coeff = |rng: &mut SampleRng| amplitude * rng.sample::<f64, _>(StandardNormal);
    let list = (0..modes)
        .map(|_| TrigMode {
            kx: rng.random_range(-max_k..=max_k),
            ky: rng.random_range(-max_k..=max_k),
            cos: [coeff(rng), coeff(rng)],
            sin: [coeff(rng), coeff(rng)],
        })
        .collect();
    FieldSpec::TrigTorus { modes: list }
}

/// `field` plus fresh coefficients on the same wave numbers, so that the
/// difference does not pair to zero with the field by orthogonality of
/// Fourier modes. Non-trigonometric fields are returned unchanged.
pub fn trig_variation(field: &FieldSpec, rng: &mut SampleRng, amplitude: f64) -> FieldSpec {
    let FieldSpec::TrigTorus { modes } = field else {
        return field.clone();
    };
    let coeff = |rng: &mut SampleRng| amplitude * rng.sample::<f64, _>(StandardNormal);
    FieldSpec::TrigTorus {
        modes: modes
            .iter()
            .map(|m| TrigMode {
                kx: m.kx,
                ky: m.ky,
                cos: [m.cos[0] + coeff(rng), m.cos[1] + coeff(rng)],
                sin: [m.sin[0] + coeff(rng), m.sin[1] + coeff(rng)],
            })
            .collect(),
    }
}
