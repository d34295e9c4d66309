//! Runs the cases of a suite and assembles the report.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use kkharmonic::energy::{
    conformal_energy_delta, energy, unit_flow_torus, variation_duality_residual, yano_integral, ConformalChange,
    DiscreteField, Quadrature,
};
use kkharmonic::geometry::VectorField;
use kkharmonic::kk::{koszul_residuals, KoszulResiduals};
use kkharmonic::rng::{admissible_points, random_trig_field, sample_point, sample_tangent, seeded, trig_variation};
use kkharmonic::solver::{obstruction_check, profile_csv, CheckOutcome};
use kkharmonic::tension::{constant_norm_condition, residual_report, sigma_defect, surface_identity_residual, Verdict};
use kkharmonic::{FieldSpec, KkMetricSpec, Manifold, Vector};

use crate::config::{
    CaseConfig, Check, ConstantNormCheck, DefectCheck, DualityCheck, EnergyDeltaCheck, Expectation, FlowCheck,
    KoszulCheck, MetricSource, ObstructionCheck, ResidualCheck, ScanCheck, SuiteConfig, SurfaceCheck, YanoCheck,
};

pub const REPORT_SCHEMA: &str = "kkh-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

/// A file produced by a case next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub id: String,
    pub kind: String,
    pub seed: u64,
    pub status: Status,
    /// `"error"` when the case could not be evaluated.
    pub verdict: String,
    pub expected: Option<String>,
    pub matched: bool,
    /// Headline number of the case; its meaning depends on the kind.
    pub value: Option<f64>,
    /// Secondary number of the case; its meaning depends on the kind.
    pub residual: Option<f64>,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub detail: Value,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub tool: String,
    pub version: String,
    pub config_version: u32,
    pub seed: u64,
    pub sampler: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub matched: usize,
    pub mismatched: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub environment: Environment,
    pub summary: Summary,
    pub cases: Vec<CaseReport>,
}

impl Report {
    pub fn all_matched(&self) -> bool {
        self.cases.iter().all(|c| c.matched)
    }
}

/// Per-case seed: FNV-1a of the id mixed into the suite seed by splitmix64,
/// so seeds do not depend on case order.
pub fn case_seed(suite_seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = suite_seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Outcome {
    verdict: String,
    value: Option<f64>,
    residual: Option<f64>,
    detail: Value,
    artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new(verdict: impl Into<String>, value: f64, residual: Option<f64>, detail: Value) -> Self {
        Outcome {
            verdict: verdict.into(),
            value: Some(value),
            residual,
            detail,
            artifacts: Vec::new(),
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn expectation_met(e: &Expectation, verdict: &str, value: Option<f64>) -> bool {
    if e.verdict != verdict {
        return false;
    }
    let bound = |want: Option<f64>, ok: fn(f64, f64) -> bool| match want {
        None => true,
        Some(w) => value.is_some_and(|v| ok(v, w)),
    };
    value_close(e.value, value, e.value_tol)
        && bound(e.value_min, |v, w| v >= w)
        && bound(e.value_max, |v, w| v <= w)
}

fn value_close(want: Option<f64>, got: Option<f64>, tol: f64) -> bool {
    match (want, got) {
        (None, _) => true,
        (Some(w), Some(v)) => (v - w).abs() <= tol,
        (Some(_), None) => false,
    }
}

fn resolve(source: &MetricSource) -> Result<(KkMetricSpec, Option<f64>)> {
    let r = source.resolve()?;
    let v = r.spec.validate();
    if !v.pass {
        let at = v.failure.map(|f| format!(" ({} fails at t = {})", f.profile, f.t)).unwrap_or_default();
        bail!("metric {} is not positive on [0, {}]{at}", r.spec.id(), v.t_max);
    }
    Ok((r.spec, r.ode_residual))
}

fn tol_or_default(tol: Option<f64>, path: kkharmonic::tension::CalculusPath) -> f64 {
    tol.unwrap_or_else(|| path.default_tol())
}

fn sample(m: &Manifold, field: &FieldSpec, count: usize, seed: u64) -> Result<Vec<Vector>> {
    field.check_compatible(m)?;
    let points = admissible_points(m, field, count, &mut seeded(seed));
    ensure!(points.len() == count, "only {} of {count} sample points are admissible for {}", points.len(), field.id());
    Ok(points)
}

fn run_residual(c: &ResidualCheck, id: &str, seed: u64) -> Result<Outcome> {
    let (spec, ode_residual) = resolve(&c.metric)?;
    let tol = tol_or_default(c.tol, c.path);
    let points = sample(&c.manifold, &c.field, c.samples, seed)?;
    let report = residual_report(&c.manifold, &spec, &c.field, &points, c.path, tol)?;
    let mut out = Outcome::new(
        report.verdict.as_str(),
        report.horizontal.max,
        Some(report.vertical.max),
        json!({ "report": report, "ode_residual": ode_residual }),
    );
    if matches!(c.metric, MetricSource::ClosedForm { .. } | MetricSource::Constructed { .. }) {
        out.artifacts.push(Artifact {
            name: format!("profile-{id}.csv"),
            contents: profile_csv(&spec.b, spec.t_max, 400),
        });
    }
    Ok(out)
}

fn verdict_rank(v: Verdict) -> u8 {
    match v {
        Verdict::HarmonicMap => 4,
        Verdict::HarmonicSection => 3,
        Verdict::UnitHarmonicSection => 2,
        Verdict::NotHarmonic => 1,
        Verdict::Obstructed => 0,
    }
}

fn run_scan(c: &ScanCheck, seed: u64) -> Result<Outcome> {
    ensure!(!c.metrics.is_empty(), "scan needs at least one metric");
    let tol = tol_or_default(c.tol, c.path);
    let points = sample(&c.manifold, &c.field, c.samples, seed)?;
    let rows: Vec<Result<_>> = c
        .metrics
        .par_iter()
        .map(|source| {
            let (spec, _) = resolve(source)?;
            Ok(residual_report(&c.manifold, &spec, &c.field, &points, c.path, tol)?)
        })
        .collect();
    let mut best: Option<Verdict> = None;
    let mut min_vertical = f64::INFINITY;
    let mut min_norm = f64::INFINITY;
    let mut table = Vec::new();
    for row in rows {
        let r = row?;
        if best.is_none_or(|b| verdict_rank(r.verdict) > verdict_rank(b)) {
            best = Some(r.verdict);
        }
        min_vertical = min_vertical.min(r.vertical.max);
        min_norm = min_norm.min(r.norm_g.max);
        table.push(r);
    }
    let verdict = best.expect("non-empty scan");
    Ok(Outcome::new(verdict.as_str(), min_vertical, Some(min_norm), json!({ "metrics": table })))
}

fn run_koszul(c: &KoszulCheck, seed: u64) -> Result<Outcome> {
    ensure!(!c.fields.is_empty(), "koszul check needs at least one field");
    for f in &c.fields {
        f.check_compatible(&c.manifold)?;
    }
    let specs = c.metrics.iter().map(|s| resolve(s).map(|r| r.0)).collect::<Result<Vec<_>>>()?;
    let m = &c.manifold;
    let mut rng = seeded(seed);
    let frames: Vec<[Vector; 4]> = (0..c.samples)
        .map(|_| {
            let p = sample_point(m, &mut rng);
            let [e, x, y] = [(); 3].map(|_| sample_tangent(m, &p, &mut rng));
            [p, e, x, y]
        })
        .collect();
    let fields: Vec<&dyn VectorField> = c.fields.iter().map(|f| f as &dyn VectorField).collect();
    let per_metric: Vec<KoszulResiduals> = specs
        .par_iter()
        .map(|spec| {
            frames
                .par_iter()
                .map(|[p, e, x, y]| koszul_residuals(m, spec, p, e, x, y, &fields))
                .try_reduce(KoszulResiduals::default, |a, b| Ok(a.max(b)))
        })
        .collect::<kkharmonic::Result<_>>()?;
    let worst = per_metric.iter().fold(KoszulResiduals::default(), |a, b| a.max(*b));
    let verdict = if worst.metric < c.tol && worst.torsion < c.tol {
        "levi-civita"
    } else {
        "not levi-civita"
    };
    let rows: Vec<Value> = specs
        .iter()
        .zip(&per_metric)
        .map(|(s, r)| json!({ "metric_id": s.id(), "metric": r.metric, "torsion": r.torsion }))
        .collect();
    Ok(Outcome::new(verdict, worst.metric, Some(worst.torsion), json!({ "metrics": rows })))
}

fn run_defect(c: &DefectCheck, seed: u64) -> Result<Outcome> {
    let field = FieldSpec::conformal(&c.a);
    field.check_compatible(&c.manifold)?;
    let a = Vector::from_row_slice(&c.a);
    let a2 = a.norm_squared();
    ensure!(a2 > 0.0, "the conformal field needs a nonzero vector a");
    let mut rng = seeded(seed);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut worst_match: f64 = 0.0;
    let mut min_defect = f64::INFINITY;
    for source in &c.metrics {
        let spec = match resolve(source) {
            Ok((s, _)) => s,
            Err(e) => {
                skipped.push(e.to_string());
                continue;
            }
        };
        let v = spec.at(a2);
        let expected = v.b + a2 * v.c;
        let mut lowest = f64::INFINITY;
        for _ in 0..c.samples {
            // a point of the zero set of ⟨a, x⟩
            let q = loop {
                let p = sample_point(&c.manifold, &mut rng);
                let q = &p - &a * (p.dot(&a) / a2);
                if q.norm() > 1e-3 {
                    break &q / q.norm();
                }
            };
            let d = sigma_defect(&c.manifold, &spec, &field, &q)?;
            worst_match = worst_match.max((d - expected).abs());
            lowest = lowest.min(d);
        }
        min_defect = min_defect.min(lowest);
        rows.push(json!({ "metric_id": spec.id(), "expected": expected, "min_defect": lowest }));
    }
    ensure!(!rows.is_empty(), "no metric passed validation");
    let verdict = if worst_match >= c.tol {
        "defect mismatch"
    } else if min_defect > 0.0 {
        "obstructed"
    } else {
        "feasible"
    };
    Ok(Outcome::new(
        verdict,
        min_defect,
        Some(worst_match),
        json!({ "validated": rows.len(), "metrics": rows, "skipped": skipped }),
    ))
}

fn run_obstruction(c: &ObstructionCheck) -> Result<Outcome> {
    let candidates = c.candidates.iter().map(|s| resolve(s).map(|r| r.0)).collect::<Result<Vec<_>>>()?;
    Ok(match obstruction_check(&c.case, &candidates) {
        CheckOutcome::Feasible => Outcome {
            verdict: "feasible".into(),
            value: None,
            residual: None,
            detail: json!({ "case_id": c.case.id(), "certificates": [] }),
            artifacts: Vec::new(),
        },
        CheckOutcome::Obstructed(certs) => {
            let margin = certs.iter().map(|o| o.margin).fold(f64::INFINITY, f64::min);
            Outcome::new(
                "obstructed",
                margin,
                Some(certs[0].witness_value),
                json!({ "case_id": c.case.id(), "certificates": certs }),
            )
        }
    })
}

fn run_duality(c: &DualityCheck, seed: u64) -> Result<Outcome> {
    ensure!(c.manifold.periods().is_some(), "duality check runs on a torus grid");
    ensure!(!c.metrics.is_empty(), "duality check needs at least one metric");
    let specs = c.metrics.iter().map(|s| resolve(s).map(|r| r.0)).collect::<Result<Vec<_>>>()?;
    let coarse = Quadrature::torus_grid(&c.manifold, c.grid)?;
    let fine = c.refine.map(|n| Quadrature::torus_grid(&c.manifold, n)).transpose()?;
    let mut rng = seeded(seed);
    let pairs: Vec<(FieldSpec, FieldSpec)> = (0..c.pairs)
        .map(|_| {
            let f = random_trig_field(&mut rng, c.modes, c.max_k, c.amplitude);
            let v = trig_variation(&f, &mut rng, c.amplitude);
            (f, v)
        })
        .collect();
    let rows: Vec<(f64, Option<f64>, String)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (f, v))| {
            let spec = &specs[i % specs.len()];
            let r = variation_duality_residual(&c.manifold, spec, f, v, &coarse)?.residual;
            let r_fine = match &fine {
                Some(q) => Some(variation_duality_residual(&c.manifold, spec, f, v, q)?.residual),
                None => None,
            };
            Ok((r, r_fine, spec.id()))
        })
        .collect::<kkharmonic::Result<_>>()?;
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let ratio = rows
        .iter()
        .filter_map(|r| r.1.map(|f| f / r.0))
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
    let verdict = if worst < c.tol && ratio.is_none_or(|q| q <= 0.5) {
        "consistent"
    } else {
        "inconsistent"
    };
    let table: Vec<Value> = rows
        .iter()
        .map(|(r, f, id)| json!({ "metric_id": id, "residual": r, "refined_residual": f }))
        .collect();
    Ok(Outcome::new(verdict, worst, ratio, json!({ "pairs": table })))
}

fn run_surface(c: &SurfaceCheck, seed: u64) -> Result<Outcome> {
    let points = sample(&c.manifold, &c.field, c.samples, seed)?;
    let worst = points
        .par_iter()
        .map(|p| surface_identity_residual(&c.manifold, &c.field, p).map(f64::abs))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    let verdict = if worst < c.tol { "identity holds" } else { "identity fails" };
    Ok(Outcome::new(verdict, worst, None, json!({ "samples": points.len() })))
}

fn run_yano(c: &YanoCheck, seed: u64) -> Result<Outcome> {
    c.field.check_compatible(&c.manifold)?;
    let q = Quadrature::for_manifold(&c.manifold, c.resolution, seed)?;
    let value = yano_integral(&c.manifold, &c.field, &q)?;
    let volume = q.total_weight();
    let relative = value.abs() / volume;
    let verdict = if relative < c.tol { "vanishes" } else { "nonzero" };
    Ok(Outcome::new(verdict, value, Some(relative), json!({ "quadrature": q.rule, "volume": volume })))
}

fn run_constant_norm(c: &ConstantNormCheck) -> Result<Outcome> {
    ensure!(!c.terms.is_empty(), "constant-norm check needs at least one term");
    let values: Vec<f64> = c.terms.iter().map(|t| constant_norm_condition(&t.b, t.k)).collect();
    let worst = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let verdict = if worst < c.tol { "satisfied" } else { "violated" };
    Ok(Outcome::new(verdict, worst, None, json!({ "values": values })))
}

fn run_flow(c: &FlowCheck, id: &str, seed: u64) -> Result<Outcome> {
    ensure!(c.manifold.periods().is_some(), "the flow runs on a torus grid");
    ensure!(c.runs > 0, "flow check needs at least one run");
    let (spec, _) = resolve(&c.metric)?;
    let reference = match &c.reference {
        Some(f) => Some(energy(&c.manifold, &spec, f, &Quadrature::torus_grid(&c.manifold, c.grid)?)?),
        None => None,
    };
    let runs: Vec<_> = (0..c.runs)
        .into_par_iter()
        .map(|i| {
            let run_seed = case_seed(seed, &i.to_string());
            let start = Instant::now();
            let init = DiscreteField::random_unit(&c.manifold, c.grid, c.max_k, &mut seeded(run_seed))?;
            let out = unit_flow_torus(&c.manifold, &spec, &init, &c.schedule)?;
            Ok((run_seed, out, start.elapsed().as_secs_f64()))
        })
        .collect::<kkharmonic::Result<_>>()?;
    let mut worst_residual: f64 = 0.0;
    let mut worst_energy: Option<f64> = None;
    let mut slowest: f64 = 0.0;
    let mut converged = true;
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for (i, (run_seed, out, secs)) in runs.iter().enumerate() {
        worst_residual = worst_residual.max(out.final_residual);
        slowest = slowest.max(*secs);
        converged &= out.converged;
        let energy_error = reference.map(|r| (out.final_energy - r).abs() / r.abs());
        if let Some(e) = energy_error {
            worst_energy = Some(worst_energy.map_or(e, |w| w.max(e)));
        }
        let name = format!("flow-{id}-{i}.csv");
        rows.push(json!({
            "run": i,
            "seed": run_seed,
            "iterations": out.iterations,
            "converged": out.converged,
            "final_energy": out.final_energy,
            "final_residual": out.final_residual,
            "max_energy_increase": out.max_energy_increase,
            "energy_error": energy_error,
            "history": name,
        }));
        artifacts.push(Artifact {
            name,
            contents: out.history_csv(),
        });
    }
    let verdict = if !converged {
        "not converged"
    } else if worst_energy.is_some_and(|e| e >= c.energy_tol) {
        "energy mismatch"
    } else if c.max_seconds.is_some_and(|budget| slowest > budget) {
        "over time budget"
    } else {
        "converged"
    };
    let mut out = Outcome::new(
        verdict,
        worst_residual,
        worst_energy,
        json!({ "reference_energy": reference, "runs": rows }),
    );
    out.artifacts = artifacts;
    Ok(out)
}

fn run_energy_delta(c: &EnergyDeltaCheck) -> Result<Outcome> {
    ensure!(!c.sections.is_empty(), "energy-delta check needs at least one section");
    let (spec, _) = resolve(&c.metric)?;
    let change = ConformalChange {
        u: c.u.clone(),
        exponent: c.exponent,
    };
    let deltas = c
        .sections
        .par_iter()
        .map(|s| conformal_energy_delta(&change, &spec, s, c.grid))
        .collect::<kkharmonic::Result<Vec<_>>>()?;
    let predicted = deltas[0].predicted;
    let scale = predicted.abs().max(f64::MIN_POSITIVE);
    let worst = deltas.iter().map(|d| (d.measured - predicted).abs() / scale).fold(0.0, f64::max);
    let hi = deltas.iter().map(|d| d.measured).fold(f64::NEG_INFINITY, f64::max);
    let lo = deltas.iter().map(|d| d.measured).fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    let verdict = if worst < c.tol && spread < c.tol {
        "matches prediction"
    } else {
        "mismatch"
    };
    let rows: Vec<Value> = c
        .sections
        .iter()
        .zip(&deltas)
        .map(|(s, d)| json!({ "section": s.id(), "measured": d.measured, "formula": d.formula, "predicted": d.predicted }))
        .collect();
    Ok(Outcome::new(verdict, worst, Some(spread), json!({ "predicted": predicted, "sections": rows })))
}

fn evaluate(case: &CaseConfig, seed: u64) -> Result<Outcome> {
    match &case.check {
        Check::Residual(c) => run_residual(c, &case.id, seed),
        Check::Scan(c) => run_scan(c, seed),
        Check::Koszul(c) => run_koszul(c, seed),
        Check::Defect(c) => run_defect(c, seed),
        Check::Obstruction(c) => run_obstruction(c),
        Check::Duality(c) => run_duality(c, seed),
        Check::Surface(c) => run_surface(c, seed),
        Check::Yano(c) => run_yano(c, seed),
        Check::ConstantNorm(c) => run_constant_norm(c),
        Check::Flow(c) => run_flow(c, &case.id, seed),
        Check::EnergyDelta(c) => run_energy_delta(c),
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

pub fn run_case(case: &CaseConfig, suite_seed: u64) -> CaseReport {
    let seed = case_seed(suite_seed, &case.id);
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| evaluate(case, seed)))
        .unwrap_or_else(|p| Err(anyhow!("panicked: {}", panic_message(p))));
    let seconds = start.elapsed().as_secs_f64();
    let expected = case.expect.as_ref().map(|e| e.verdict.clone());
    match result {
        Ok(o) => {
            let value = o.value.and_then(finite);
            let matched = case.expect.as_ref().is_none_or(|e| expectation_met(e, &o.verdict, value));
            CaseReport {
                id: case.id.clone(),
                kind: case.check.kind().into(),
                seed,
                status: Status::Ok,
                verdict: o.verdict,
                expected,
                matched,
                value,
                residual: o.residual.and_then(finite),
                error: None,
                files: o.artifacts.iter().map(|a| a.name.clone()).collect(),
                detail: o.detail,
                artifacts: o.artifacts,
                seconds,
            }
        }
        Err(e) => CaseReport {
            id: case.id.clone(),
            kind: case.check.kind().into(),
            seed,
            status: Status::Error,
            verdict: "error".into(),
            matched: expected.as_deref() == Some("error"),
            expected,
            value: None,
            residual: None,
            error: Some(format!("{e:#}")),
            files: Vec::new(),
            detail: Value::Null,
            artifacts: Vec::new(),
            seconds,
        },
    }
}

/// Evaluates every case concurrently. A failing case is recorded and never
/// stops the others; the report lists cases sorted by id.
pub fn run_suite(config: &SuiteConfig) -> Report {
    let mut cases: Vec<CaseReport> = config.cases.par_iter().map(|c| run_case(c, config.seed)).collect();
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    let matched = cases.iter().filter(|c| c.matched).count();
    let summary = Summary {
        cases: cases.len(),
        matched,
        mismatched: cases.len() - matched,
        errors: cases.iter().filter(|c| c.status == Status::Error).count(),
    };
    Report {
        schema: REPORT_SCHEMA.into(),
        environment: Environment {
            tool: "kkh".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_version: config.version,
            seed: config.seed,
            sampler: "ChaCha8 seeded from u64; sphere points are normalized StandardNormal vectors".into(),
        },
        summary,
        cases,
    }
}
