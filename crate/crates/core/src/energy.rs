//! Energy of sections, its first variation, the unit-section flow on tori
//! and the conformal-change identity for surfaces.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{field_calculus, Jet, Manifold, TorusFunction, Vector, VectorField};
use crate::kk::KkMetricSpec;
use crate::rng::{sample_point, seeded, SampleRng};
use crate::tension::{tension, yano_integrand};

/// Nodes and positive weights approximating the Riemannian volume measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub rule: QuadratureRule,
    pub nodes: Vec<Vector>,
    pub weights: Vec<f64>,
}

/// How a quadrature was built; recorded in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Gauss–Legendre in each polar angle, uniform in the azimuth.
    GaussLegendre { polar: usize, azimuth: usize },
    MonteCarlo { samples: usize, seed: u64 },
    /// Trapezoid rule on the uniform `n × n` grid.
    TorusGrid { n: usize },
}

/// `(Pₙ(x), Pₙ'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, `n ≥ 2`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

impl Quadrature {
    /// Default rule for `m`: product Gauss–Legendre on `S²` and `S³`,
    /// Monte Carlo with `resolution²` samples on higher spheres, and the
    /// `resolution × resolution` grid on tori.
    pub fn for_manifold(m: &Manifold, resolution: usize, seed: u64) -> Result<Self> {
        match m {
            Manifold::RoundSphere { n: 2 | 3 } => Self::sphere_gauss(m, resolution, 2 * resolution),
            Manifold::RoundSphere { .. } => Ok(Self::monte_carlo(m, resolution * resolution, seed)),
            _ => Self::torus_grid(m, resolution),
        }
    }

    pub fn sphere_gauss(m: &Manifold, polar: usize, azimuth: usize) -> Result<Self> {
        let n = match m {
            Manifold::RoundSphere { n } if *n == 2 || *n == 3 => *n,
            _ => return Err(Error::Unsupported(format!("Gauss–Legendre rule on {}", m.id()))),
        };
        if polar < 2 || azimuth == 0 {
            return Err(Error::InvalidInput("quadrature needs at least two polar nodes and one azimuthal node".into()));
        }
        let (x, w) = gauss_legendre(polar);
        let angles: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (PI * (x + 1.0) / 2.0, PI / 2.0 * w)).collect();
        let dphi = 2.0 * PI / azimuth as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for k in 0..azimuth {
            let (sp, cp) = (k as f64 * dphi).sin_cos();
            for &(psi, wpsi) in &angles {
                let (s, c) = psi.sin_cos();
                if n == 2 {
                    nodes.push(Vector::from_row_slice(&[s * cp, s * sp, c]));
                    weights.push(wpsi * s * dphi);
                } else {
                    for &(chi, wchi) in &angles {
                        let (s2, c2) = chi.sin_cos();
                        nodes.push(Vector::from_row_slice(&[s * s2 * cp, s * s2 * sp, s * c2, c]));
                        weights.push(wpsi * wchi * s * s * s2 * dphi);
                    }
                }
            }
        }
        Ok(Quadrature {
            rule: QuadratureRule::GaussLegendre { polar, azimuth },
            nodes,
            weights,
        })
    }

    /// Equal weights `Vol/N` at seeded uniform points.
    pub fn monte_carlo(m: &Manifold, samples: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let nodes: Vec<Vector> = (0..samples).map(|_| sample_point(m, &mut rng)).collect();
        let w = m.volume() / samples.max(1) as f64;
        Quadrature {
            rule: QuadratureRule::MonteCarlo { samples, seed },
            weights: vec![w; nodes.len()],
            nodes,
        }
    }

    pub fn torus_grid(m: &Manifold, n: usize) -> Result<Self> {
        let [l1, l2] = m
            .periods()
            .ok_or_else(|| Error::Unsupported(format!("grid rule on {}", m.id())))?;
        if n == 0 {
            return Err(Error::InvalidInput("grid needs at least one node".into()));
        }
        let (h1, h2) = (l1 / n as f64, l2 / n as f64);
        let mut nodes = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = Vector::from_row_slice(&[i as f64 * h1, j as f64 * h2]);
                weights.push(h1 * h2 * m.volume_density(&p));
                nodes.push(p);
            }
        }
        Ok(Quadrature {
            rule: QuadratureRule::TorusGrid { n },
            nodes,
            weights,
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ wᵢ f(xᵢ)`, evaluated in parallel and summed in node order.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Vector) -> Result<f64> + Sync,
    {
        Ok(self.integrate_with_error(f)?.0)
    }

    /// The integral and, for Monte Carlo rules, its standard error.
    pub fn integrate_with_error<F>(&self, f: F) -> Result<(f64, Option<f64>)>
    where
        F: Fn(&Vector) -> Result<f64> + Sync,
    {
        let values: Vec<f64> = self.nodes.par_iter().map(&f).collect::<Result<_>>()?;
        let total = values.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        let error = match self.rule {
            QuadratureRule::MonteCarlo { samples, .. } if samples > 1 => {
                let n = samples as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                Some(self.total_weight() * (var / n).sqrt())
            }
            _ => None,
        };
        Ok((total, error))
    }
}

/// `|dσ|² = mA(|σ|²) + B(|σ|²)|∇σ|² + C(|σ|²)|X(σ)|²` at `p`.
pub fn energy_density(m: &Manifold, spec: &KkMetricSpec, field: &dyn VectorField, p: &Vector) -> Result<f64> {
    let fc = field_calculus(m, field, p)?;
    let v = spec.at_checked(fc.norm_sq)?;
    Ok(m.dim() as f64 * v.a + v.b * fc.jacobian_norm_sq + v.c * m.norm_sq(p, &fc.grad_half_norm))
}

/// `E(σ) = ½∫|dσ|²`.
pub fn energy(m: &Manifold, spec: &KkMetricSpec, field: &dyn VectorField, quad: &Quadrature) -> Result<f64> {
    Ok(0.5 * quad.integrate(|p| energy_density(m, spec, field, p))?)
}

/// `∫ ⟨∇*∇σ, σ⟩ − Ric(σ, σ) − ½|L_σ g|² + (Div σ)²`.
pub fn yano_integral(m: &Manifold, field: &dyn VectorField, quad: &Quadrature) -> Result<f64> {
    quad.integrate(|p| Ok(yano_integrand(m, &field_calculus(m, field, p)?)))
}

/// `σ + sV`
struct Shifted<'a> {
    base: &'a dyn VectorField,
    variation: &'a dyn VectorField,
    s: f64,
}

impl VectorField for Shifted<'_> {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<Jet> {
        Ok(self.base.jet(m, x)?.add(&self.variation.jet(m, x)?.scale(self.s)))
    }
}

/// Outcome of the first-variation check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// `d/ds E(σ + sV)` at `s = 0`.
    pub de_ds: f64,
    /// `∫ G(τ(σ), Vᵛ) = ∫ B⟨τᵛ, V⟩ + C⟨τᵛ, σ⟩⟨V, σ⟩`.
    pub pairing: f64,
    /// `|dE/ds + pairing| / max(|pairing|, 1e-12)`
    pub residual: f64,
}

/// Step of the symmetric difference quotient in `s`.
pub const VARIATION_STEP: f64 = 1e-2;

fn richardson(e: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let h = VARIATION_STEP;
    let d1 = (e(h)? - e(-h)?) / (2.0 * h);
    let d2 = (e(h / 2.0)? - e(-h / 2.0)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Compares the derivative of the energy along `σ + sV` with the pairing
/// of the tension field against the vertical lift of `V`.
///
/// On torus grids the energy is discretized with sixth-order central
/// differences, so the residual measures the discretization error and
/// shrinks under refinement. On spheres the energy uses the analytic jets.
pub fn variation_duality_residual(
    m: &Manifold,
    spec: &KkMetricSpec,
    field: &dyn VectorField,
    variation: &dyn VectorField,
    quad: &Quadrature,
) -> Result<DualityReport> {
    let pairing = quad.integrate(|p| {
        let t = tension(m, spec, field, p)?;
        let s = field.value(m, p)?;
        let v = variation.value(m, p)?;
        let at = spec.at_checked(m.norm_sq(p, &s))?;
        Ok(at.b * m.inner(p, &t.vertical, &v) + at.c * m.inner(p, &t.vertical, &s) * m.inner(p, &v, &s))
    })?;
    let de_ds = match quad.rule {
        QuadratureRule::TorusGrid { n } => {
            let base = DiscreteField::sample(m, field, n)?;
            let var = DiscreteField::sample(m, variation, n)?;
            richardson(|s| grid_energy(m, spec, &base.combine(&var, s)))?
        }
        _ => richardson(|s| {
            energy(
                m,
                spec,
                &Shifted {
                    base: field,
                    variation,
                    s,
                },
                quad,
            )
        })?,
    };
    Ok(DualityReport {
        de_ds,
        pairing,
        residual: (de_ds + pairing).abs() / pairing.abs().max(1e-12),
    })
}

/// Samples of a section on the uniform `n × n` grid of a torus, stored as
/// components in the orthonormal frame `e^{-u}∂ₓ, e^{-u}∂ᵧ`.
///
/// Node `(i, j)` sits at `(i·L₁/n, j·L₂/n)` and is stored at `i + n·j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteField {
    pub n: usize,
    pub periods: [f64; 2],
    pub values: Vec<[f64; 2]>,
    pub unit_constrained: bool,
}

fn torus_exponent(m: &Manifold) -> Option<&TorusFunction> {
    match m {
        Manifold::ConformalTorus { u } => Some(u),
        _ => None,
    }
}

impl DiscreteField {
    fn check(m: &Manifold, n: usize) -> Result<[f64; 2]> {
        let periods = m
            .periods()
            .ok_or_else(|| Error::Unsupported(format!("grid fields on {}", m.id())))?;
        if n < 8 {
            return Err(Error::InvalidInput(format!("grid size {n} is below the minimum of 8")));
        }
        Ok(periods)
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            i as f64 * self.periods[0] / self.n as f64,
            j as f64 * self.periods[1] / self.n as f64,
        ]
    }

    pub fn from_fn(m: &Manifold, n: usize, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Self> {
        let periods = Self::check(m, n)?;
        let mut out = DiscreteField {
            n,
            periods,
            values: Vec::with_capacity(n * n),
            unit_constrained: false,
        };
        for j in 0..n {
            for i in 0..n {
                let [x, y] = out.node(i, j);
                out.values.push(f(x, y));
            }
        }
        Ok(out)
    }

    pub fn sample(m: &Manifold, field: &dyn VectorField, n: usize) -> Result<Self> {
        let periods = Self::check(m, n)?;
        let values = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let p = Vector::from_row_slice(&[
                    (k % n) as f64 * periods[0] / n as f64,
                    (k / n) as f64 * periods[1] / n as f64,
                ]);
                let v = field.value(m, &p)?;
                let scale = torus_exponent(m).map_or(1.0, |u| u.value(p[0], p[1]).exp());
                Ok([v[0] * scale, v[1] * scale])
            })
            .collect::<Result<_>>()?;
        Ok(DiscreteField {
            n,
            periods,
            values,
            unit_constrained: false,
        })
    }

    /// Unit field with angle `φ` measured from the first frame vector.
    pub fn from_angle(m: &Manifold, n: usize, phi: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut f = Self::from_fn(m, n, |x, y| {
            let (s, c) = phi(x, y).sin_cos();
            [c, s]
        })?;
        f.unit_constrained = true;
        Ok(f)
    }

    /// Unit field whose angle is a random trigonometric polynomial with wave
    /// numbers up to `max_k`, so it has no winding.
    pub fn random_unit(m: &Manifold, n: usize, max_k: i32, rng: &mut SampleRng) -> Result<Self> {
        let periods = Self::check(m, n)?;
        let offset = rng.random::<f64>() * 2.0 * PI;
        let mut modes = Vec::new();
        for kx in -max_k..=max_k {
            for ky in 0..=max_k {
                if ky == 0 && kx <= 0 {
                    continue;
                }
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let decay = 0.6 / (kx * kx + ky * ky) as f64;
                modes.push((kx as f64, ky as f64, a * decay, b * decay));
            }
        }
        Self::from_angle(m, n, |x, y| {
            let (x, y) = (2.0 * PI * x / periods[0], 2.0 * PI * y / periods[1]);
            offset
                + modes
                    .iter()
                    .map(|(kx, ky, a, b)| {
                        let (s, c) = (kx * x + ky * y).sin_cos();
                        a * c + b * s
                    })
                    .sum::<f64>()
        })
    }

    /// `self + s·other`
    pub fn combine(&self, other: &DiscreteField, s: f64) -> DiscreteField {
        DiscreteField {
            n: self.n,
            periods: self.periods,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] + s * b[0], a[1] + s * b[1]])
                .collect(),
            unit_constrained: false,
        }
    }

    pub fn project_unit(&mut self) -> Result<()> {
        for v in self.values.iter_mut() {
            let r = v[0].hypot(v[1]);
            if !(r > 1e-12) {
                return Err(Error::Domain("cannot normalize a vanishing grid vector".into()));
            }
            *v = [v[0] / r, v[1] / r];
        }
        self.unit_constrained = true;
        Ok(())
    }

    /// `max |1 − |σ||` over the grid.
    pub fn unit_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (1.0 - v[0].hypot(v[1])).abs())
            .fold(0.0, f64::max)
    }
}

const D6: [f64; 3] = [45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];

/// Energy of a grid field with sixth-order central differences and the
/// trapezoid rule. On conformal tori `∇_{∂ᵢ}σ = ∂ᵢs + ωᵢJs` in frame
/// components, with `ω = −u_y dx + u_x dy`.
pub fn grid_energy(m: &Manifold, spec: &KkMetricSpec, field: &DiscreteField) -> Result<f64> {
    let n = field.n;
    let h = [field.periods[0] / n as f64, field.periods[1] / n as f64];
    let u = torus_exponent(m);
    let dim = m.dim() as f64;
    let at = |i: usize, j: usize| field.values[(i % n) + n * (j % n)];
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let s = at(i, j);
            let mut d = [[0.0; 2]; 2];
            for (k, c) in D6.iter().enumerate() {
                let o = k + 1;
                let (xp, xm) = (at(i + o, j), at(i + n - o, j));
                let (yp, ym) = (at(i, j + o), at(i, j + n - o));
                for comp in 0..2 {
                    d[0][comp] += c * (xp[comp] - xm[comp]) / h[0];
                    d[1][comp] += c * (yp[comp] - ym[comp]) / h[1];
                }
            }
            let [x, y] = field.node(i, j);
            let (e2u, omega) = match u {
                Some(u) => {
                    let g = u.gradient(x, y);
                    ((2.0 * u.value(x, y)).exp(), [-g[1], g[0]])
                }
                None => (1.0, [0.0, 0.0]),
            };
            let mut jac = 0.0;
            let mut x_sq = 0.0;
            for dir in 0..2 {
                let cov = [d[dir][0] - omega[dir] * s[1], d[dir][1] + omega[dir] * s[0]];
                jac += cov[0] * cov[0] + cov[1] * cov[1];
                let along = s[0] * d[dir][0] + s[1] * d[dir][1];
                x_sq += along * along;
            }
            let t = s[0] * s[0] + s[1] * s[1];
            let v = spec.at_checked(t)?;
            // frame norms carry e^{-2u}; the volume element carries e^{2u}
            total += dim * v.a * e2u + v.b * jac + v.c * x_sq;
        }
    }
    Ok(0.5 * total * h[0] * h[1])
}

/// Stopping rule and line search of the unit-section flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSchedule {
    pub max_iterations: usize,
    /// Target sup norm of the unit-section residual.
    pub target_residual: f64,
    /// Cap on the trial step; the line search starts at
    /// `min(max_step, 2·previous accepted step)` and halves on increase.
    pub max_step: f64,
    pub min_step: f64,
    /// Keep one history row every this many iterations (plus the last).
    pub record_every: usize,
}

impl Default for FlowSchedule {
    fn default() -> Self {
        FlowSchedule {
            max_iterations: 200_000,
            target_residual: 1e-4,
            max_step: 0.1,
            min_step: 1e-14,
            record_every: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOutcome {
    pub field: DiscreteField,
    pub history: Vec<FlowRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub final_energy: f64,
    pub final_residual: f64,
    /// Largest energy increase over an accepted step (zero when monotone).
    pub max_energy_increase: f64,
}

impl FlowOutcome {
    /// History as CSV with columns `iteration,energy,residual`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,energy,residual\n");
        for r in &self.history {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", r.iteration, r.energy, r.residual);
        }
        out
    }
}

/// Discrete unit-section energy `A(1)·Vol + ½B(1)·Σ_edges |R(α)s_b − s_a|²`,
/// where `α` is the integral of the connection form along the edge.
struct UnitGrid {
    n: usize,
    a1: f64,
    b1: f64,
    volume: f64,
    /// Area weight `h₁h₂e^{2u}` per node.
    area: Vec<f64>,
    /// `(cos α, sin α)` for the `+x` and `+y` edges leaving each node.
    rot: Vec<[[f64; 2]; 2]>,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

impl UnitGrid {
    fn new(m: &Manifold, spec: &KkMetricSpec, field: &DiscreteField) -> Result<Self> {
        let v = spec.at_checked(1.0)?;
        let n = field.n;
        let h = [field.periods[0] / n as f64, field.periods[1] / n as f64];
        let u = torus_exponent(m);
        let mut area = Vec::with_capacity(n * n);
        let mut rot = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let [x, y] = field.node(i, j);
                match u {
                    Some(u) => {
                        area.push(h[0] * h[1] * (2.0 * u.value(x, y)).exp());
                        let ax = simpson(|s| -u.gradient(s, y)[1], x, x + h[0]);
                        let ay = simpson(|s| u.gradient(x, s)[0], y, y + h[1]);
                        rot.push([[ax.cos(), ax.sin()], [ay.cos(), ay.sin()]]);
                    }
                    None => {
                        area.push(h[0] * h[1]);
                        rot.push([[1.0, 0.0], [1.0, 0.0]]);
                    }
                }
            }
        }
        Ok(UnitGrid {
            n,
            a1: v.a,
            b1: v.b,
            volume: area.iter().sum(),
            area,
            rot,
        })
    }

    fn neighbours(&self, k: usize) -> [usize; 2] {
        let (i, j) = (k % self.n, k / self.n);
        [(i + 1) % self.n + self.n * j, i + self.n * ((j + 1) % self.n)]
    }

    fn dirichlet(&self, s: &[[f64; 2]]) -> f64 {
        (0..s.len())
            .map(|k| {
                let mut acc = 0.0;
                for (dir, b) in self.neighbours(k).into_iter().enumerate() {
                    let [c, sn] = self.rot[k][dir];
                    let sb = s[b];
                    let dx = c * sb[0] - sn * sb[1] - s[k][0];
                    let dy = sn * sb[0] + c * sb[1] - s[k][1];
                    acc += dx * dx + dy * dy;
                }
                acc
            })
            .sum()
    }

    fn energy(&self, s: &[[f64; 2]]) -> f64 {
        self.a1 * self.volume + 0.5 * self.b1 * self.dirichlet(s)
    }

    /// Gradient of the energy with respect to the node values.
    fn gradient(&self, s: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0; 2]; s.len()];
        for k in 0..s.len() {
            for (dir, b) in self.neighbours(k).into_iter().enumerate() {
                let [c, sn] = self.rot[k][dir];
                let sb = s[b];
                let dx = c * sb[0] - sn * sb[1] - s[k][0];
                let dy = sn * sb[0] + c * sb[1] - s[k][1];
                g[k][0] -= self.b1 * dx;
                g[k][1] -= self.b1 * dy;
                // Rᵀ(dx, dy)
                g[b][0] += self.b1 * (c * dx + sn * dy);
                g[b][1] += self.b1 * (-sn * dx + c * dy);
            }
        }
        g
    }

    /// Tangential part of the gradient at each node.
    fn projected(s: &[[f64; 2]], g: &[[f64; 2]]) -> Vec<[f64; 2]> {
        s.iter()
            .zip(g)
            .map(|(s, g)| {
                let d = s[0] * g[0] + s[1] * g[1];
                [g[0] - d * s[0], g[1] - d * s[1]]
            })
            .collect()
    }

    /// Sup norm of `∇*∇σ − |∇σ|²σ`, recovered from the projected gradient.
    fn residual(&self, pg: &[[f64; 2]]) -> f64 {
        pg.iter()
            .zip(&self.area)
            .map(|(g, a)| g[0].hypot(g[1]) / (self.b1 * a))
            .fold(0.0, f64::max)
    }
}

/// Projected gradient descent for the energy restricted to unit sections of
/// a torus, with backtracking line search and reprojection after each step.
pub fn unit_flow_torus(
    m: &Manifold,
    spec: &KkMetricSpec,
    init: &DiscreteField,
    schedule: &FlowSchedule,
) -> Result<FlowOutcome> {
    DiscreteField::check(m, init.n)?;
    if init.periods != m.periods().unwrap_or_default() {
        return Err(Error::MismatchedBase);
    }
    if init.unit_defect() > 1e-12 {
        return Err(Error::InvalidInput("flow needs a unit initial field".into()));
    }
    let grid = UnitGrid::new(m, spec, init)?;
    let mut s = init.values.clone();
    let mut energy = grid.energy(&s);
    let mut pg = UnitGrid::projected(&s, &grid.gradient(&s));
    let mut residual = grid.residual(&pg);
    let mut history = vec![FlowRecord {
        iteration: 0,
        energy,
        residual,
        step: 0.0,
    }];
    let mut step = schedule.max_step;
    let mut iterations = 0;
    let mut max_increase: f64 = 0.0;
    while residual >= schedule.target_residual && iterations < schedule.max_iterations {
        let mut trial = (2.0 * step).min(schedule.max_step);
        let accepted = loop {
            let candidate: Vec<[f64; 2]> = s
                .iter()
                .zip(&pg)
                .map(|(v, g)| {
                    let w = [v[0] - trial * g[0], v[1] - trial * g[1]];
                    let r = w[0].hypot(w[1]);
                    [w[0] / r, w[1] / r]
                })
                .collect();
            let e = grid.energy(&candidate);
            if e <= energy {
                break Some((candidate, e));
            }
            trial *= 0.5;
            if trial < schedule.min_step {
                break None;
            }
        };
        let Some((candidate, e)) = accepted else {
            break;
        };
        iterations += 1;
        max_increase = max_increase.max(e - energy);
        s = candidate;
        energy = e;
        step = trial;
        pg = UnitGrid::projected(&s, &grid.gradient(&s));
        residual = grid.residual(&pg);
        if iterations % schedule.record_every.max(1) == 0 {
            history.push(FlowRecord {
                iteration: iterations,
                energy,
                residual,
                step,
            });
        }
    }
    if history.last().map(|r| r.iteration) != Some(iterations) {
        history.push(FlowRecord {
            iteration: iterations,
            energy,
            residual,
            step,
        });
    }
    Ok(FlowOutcome {
        field: DiscreteField {
            n: init.n,
            periods: init.periods,
            values: s,
            unit_constrained: true,
        },
        history,
        iterations,
        converged: residual < schedule.target_residual,
        final_energy: energy,
        final_residual: residual,
        max_energy_increase: max_increase,
    })
}

/// `e^{−κu}σ`, the rescaled section for the metric `e^{2u}g`.
struct Rescaled<'a> {
    u: &'a TorusFunction,
    exponent: f64,
    field: &'a dyn VectorField,
}

impl VectorField for Rescaled<'_> {
    fn jet(&self, m: &Manifold, x: &Vector) -> Result<Jet> {
        let base = self.field.jet(&flat_base(m), x)?;
        Ok(base.mul_scalar(&self.u.jet(x[0], x[1]).scale(-self.exponent).exp()))
    }
}

fn flat_base(m: &Manifold) -> Manifold {
    match m {
        Manifold::ConformalTorus { .. } => Manifold::square_flat_torus(),
        other => other.clone(),
    }
}

/// A conformal change `g̃ = e^{2u}g` of the flat square torus together with
/// the section rescaling `σ̃ = e^{−κu}σ`. With `κ = 1` unit sections stay
/// unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalChange {
    pub u: TorusFunction,
    #[serde(default = "unit_exponent")]
    pub exponent: f64,
}

fn unit_exponent() -> f64 {
    1.0
}

impl ConformalChange {
    pub fn new(u: TorusFunction) -> Self {
        ConformalChange { u, exponent: 1.0 }
    }

    pub fn target(&self) -> Manifold {
        Manifold::conformal_torus(self.u.clone())
    }
}

/// Measured and predicted change of the section energy under a conformal
/// change of the base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDelta {
    /// `E_g̃(σ̃) − E_g(σ)` from two quadratures.
    pub measured: f64,
    /// `½B(1)∫(|grad u|² + 2((Div σ)σ − ∇_σσ)(u))`.
    pub formula: f64,
    /// `½B(1)∫|grad u|²` (the flat-base value, where `∫uK = 0`).
    pub predicted: f64,
}

/// The section-dependent part of the energy,
/// `½∫ B(|σ|²)|∇σ|² + C(|σ|²)|X(σ)|²`.
pub fn vertical_energy(m: &Manifold, spec: &KkMetricSpec, field: &dyn VectorField, quad: &Quadrature) -> Result<f64> {
    Ok(0.5
        * quad.integrate(|p| {
            let fc = field_calculus(m, field, p)?;
            let v = spec.at_checked(fc.norm_sq)?;
            Ok(v.b * fc.jacobian_norm_sq + v.c * m.norm_sq(p, &fc.grad_half_norm))
        })?)
}

/// Compares the energy of `σ` on the flat square torus with that of
/// `σ̃` on the conformally changed torus, on the `n × n` grid.
pub fn conformal_energy_delta(
    change: &ConformalChange,
    spec: &KkMetricSpec,
    unit_field: &dyn VectorField,
    n: usize,
) -> Result<EnergyDelta> {
    let base = Manifold::square_flat_torus();
    let target = change.target();
    let quad = Quadrature::torus_grid(&base, n)?;
    let quad_t = Quadrature::torus_grid(&target, n)?;
    let rescaled = Rescaled {
        u: &change.u,
        exponent: change.exponent,
        field: unit_field,
    };
    let before = vertical_energy(&base, spec, unit_field, &quad)?;
    let after = vertical_energy(&target, spec, &rescaled, &quad_t)?;
    let b1 = spec.at_checked(1.0)?.b;
    let grad_sq = |p: &Vector| {
        let g = change.u.gradient(p[0], p[1]);
        g[0] * g[0] + g[1] * g[1]
    };
    let predicted = 0.5 * b1 * quad.integrate(|p| Ok(grad_sq(p)))?;
    let formula = 0.5
        * b1
        * quad.integrate(|p| {
            let fc = field_calculus(&base, unit_field, p)?;
            let w = &fc.value * fc.divergence - fc.self_derivative(&base);
            let g = change.u.gradient(p[0], p[1]);
            Ok(grad_sq(p) + 2.0 * (w[0] * g[0] + w[1] * g[1]))
        })?;
    Ok(EnergyDelta {
        measured: after - before,
        formula,
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldSpec;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_small() {
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[0].abs(), 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre(20);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert_relative_eq!(int, 2.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn volumes() {
        let s2 = Manifold::sphere(2);
        assert_relative_eq!(Quadrature::for_manifold(&s2, 16, 0).unwrap().total_weight(), 4.0 * PI, max_relative = 1e-12);
        let s3 = Manifold::sphere(3);
        assert_relative_eq!(
            Quadrature::for_manifold(&s3, 16, 0).unwrap().total_weight(),
            2.0 * PI * PI,
            max_relative = 1e-12
        );
        let t = Manifold::square_flat_torus();
        assert_relative_eq!(Quadrature::torus_grid(&t, 8).unwrap().total_weight(), 4.0 * PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn parallel_energy() {
        let t = Manifold::square_flat_torus();
        let q = Quadrature::torus_grid(&t, 16).unwrap();
        let e = energy(&t, &KkMetricSpec::sasaki(), &FieldSpec::parallel([1.0, 0.0]), &q).unwrap();
        assert_relative_eq!(e, 4.0 * PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn parallel_flow_is_immediate() {
        let t = Manifold::square_flat_torus();
        let init = DiscreteField::from_angle(&t, 16, |_, _| 0.3).unwrap();
        let out = unit_flow_torus(&t, &KkMetricSpec::sasaki(), &init, &FlowSchedule::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.final_residual < 1e-14);
    }
}
