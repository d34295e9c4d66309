//! Suite configuration: a JSON file with a list of cases.
//!
//! Every case is an object with an `id`, a `kind` and an optional `expect`
//! block; the remaining keys depend on the kind. Unknown keys are rejected,
//! and every parse error carries the path of the offending key.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use kkharmonic::energy::FlowSchedule;
use kkharmonic::geometry::TorusFunction;
use kkharmonic::solver::{closed_form_b, construct_b_from_c, unequal_speed_enlarged, Family, ObstructionCase, ProfileProblem};
use kkharmonic::tension::CalculusPath;
use kkharmonic::{FieldSpec, KkMetricSpec, Manifold, ScalarProfile};

pub const CONFIG_VERSION: u32 = 1;

/// A config that failed to parse, with the path of the offending key
/// (`cases[3].samples`, `output.formats[0]`, ...).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "invalid config: {}", self.message)
        } else {
            write!(f, "invalid config at `{}`: {}", self.key, self.message)
        }
    }
}

fn error(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

fn join_path(prefix: &str, inner: &str) -> String {
    match (prefix.is_empty(), inner == "." || inner.is_empty()) {
        (_, true) => prefix.to_string(),
        (true, false) => inner.to_string(),
        (false, false) if inner.starts_with('[') => format!("{prefix}{inner}"),
        (false, false) => format!("{prefix}.{inner}"),
    }
}

/// Deserializes `value`, reporting errors at `prefix` + the inner path.
fn parse_at<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| error(join_path(prefix, &e.path().to_string()), e.inner().to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("kkh-report")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_version")]
    version: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    cases: Vec<Value>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

/// Where the metric of a case comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSource {
    Sasaki,
    CheegerGromoll,
    GMr {
        m: f64,
        #[serde(default)]
        r: f64,
    },
    /// `A = 1`, `B = k·e^{rate·t}`, `C = 0`.
    Exponential { k: f64, rate: f64 },
    /// Explicit profiles.
    Profiles {
        #[serde(rename = "A")]
        a: ScalarProfile,
        #[serde(rename = "B")]
        b: ScalarProfile,
        #[serde(rename = "C")]
        c: ScalarProfile,
        #[serde(default)]
        t_max: Option<f64>,
    },
    /// Closed-form `B` of a family.
    ClosedForm {
        family: Family,
        #[serde(default = "one")]
        k: f64,
        #[serde(default = "one")]
        a0: f64,
    },
    /// `B` integrated from a prescribed `C`.
    Constructed { problem: ProfileProblem },
    /// The unequal-speed enlarged construction on `S^{2p}`.
    UnequalSpeed { p: usize, thetas: Vec<f64>, b0: f64, a0: f64 },
}

fn one() -> f64 {
    1.0
}

/// A resolved metric with what it took to build it.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedMetric {
    pub spec: KkMetricSpec,
    /// ODE residual of a constructed profile.
    pub ode_residual: Option<f64>,
}

impl MetricSource {
    pub fn resolve(&self) -> kkharmonic::Result<ResolvedMetric> {
        let plain = |spec| ResolvedMetric {
            spec,
            ode_residual: None,
        };
        match self {
            MetricSource::Sasaki => Ok(plain(KkMetricSpec::sasaki())),
            MetricSource::CheegerGromoll => Ok(plain(KkMetricSpec::cheeger_gromoll())),
            MetricSource::GMr { m, r } => Ok(plain(KkMetricSpec::g_mr(*m, *r)?)),
            MetricSource::Exponential { k, rate } => Ok(plain(KkMetricSpec::exponential(*k, *rate))),
            MetricSource::Profiles { a, b, c, t_max } => {
                let mut spec = KkMetricSpec::new(a.clone(), b.clone(), c.clone()).named("profiles");
                if let Some(t) = t_max {
                    spec = spec.with_t_max(*t);
                }
                Ok(plain(spec))
            }
            MetricSource::ClosedForm { family, k, a0 } => match closed_form_b(family, *k, *a0)? {
                kkharmonic::solver::Solution::Solved(spec) => Ok(plain(spec)),
                kkharmonic::solver::Solution::Obstructed(o) => Err(kkharmonic::Error::InvalidInput(format!(
                    "{} admits no closed form: {}",
                    family.id(),
                    o.inequality
                ))),
            },
            MetricSource::Constructed { problem } => {
                let built = construct_b_from_c(problem)?;
                Ok(ResolvedMetric {
                    spec: built.spec,
                    ode_residual: Some(built.ode_residual),
                })
            }
            MetricSource::UnequalSpeed { p, thetas, b0, a0 } => Ok(plain(unequal_speed_enlarged(*p, thetas, *b0, *a0)?)),
        }
    }
}

fn samples_100() -> usize {
    100
}

fn samples_200() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualCheck {
    pub manifold: Manifold,
    pub metric: MetricSource,
    pub field: FieldSpec,
    #[serde(default = "samples_100")]
    pub samples: usize,
    #[serde(default)]
    pub path: CalculusPath,
    /// Defaults to the tolerance of the calculus path.
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanCheck {
    pub manifold: Manifold,
    pub field: FieldSpec,
    pub metrics: Vec<MetricSource>,
    #[serde(default = "samples_100")]
    pub samples: usize,
    #[serde(default)]
    pub path: CalculusPath,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoszulCheck {
    pub manifold: Manifold,
    pub metrics: Vec<MetricSource>,
    pub fields: Vec<FieldSpec>,
    #[serde(default = "koszul_samples")]
    pub samples: usize,
    #[serde(default = "koszul_tol")]
    pub tol: f64,
}

fn koszul_samples() -> usize {
    50
}

fn koszul_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectCheck {
    pub manifold: Manifold,
    /// Gradient field of `⟨a, x⟩`.
    pub a: Vec<f64>,
    pub metrics: Vec<MetricSource>,
    #[serde(default = "defect_samples")]
    pub samples: usize,
    #[serde(default = "defect_tol")]
    pub tol: f64,
}

fn defect_samples() -> usize {
    10
}

fn defect_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionCheck {
    pub case: ObstructionCase,
    #[serde(default)]
    pub candidates: Vec<MetricSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityCheck {
    pub manifold: Manifold,
    pub metrics: Vec<MetricSource>,
    #[serde(default = "duality_grid")]
    pub grid: usize,
    /// Finer grid on which the residual must at least halve.
    #[serde(default)]
    pub refine: Option<usize>,
    #[serde(default = "duality_pairs")]
    pub pairs: usize,
    #[serde(default = "duality_modes")]
    pub modes: usize,
    #[serde(default = "duality_max_k")]
    pub max_k: i32,
    #[serde(default = "duality_amplitude")]
    pub amplitude: f64,
    #[serde(default = "duality_tol")]
    pub tol: f64,
}

fn duality_grid() -> usize {
    32
}

fn duality_pairs() -> usize {
    10
}

fn duality_modes() -> usize {
    3
}

fn duality_max_k() -> i32 {
    2
}

fn duality_amplitude() -> f64 {
    0.25
}

fn duality_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceCheck {
    pub manifold: Manifold,
    /// A unit field.
    pub field: FieldSpec,
    #[serde(default = "samples_200")]
    pub samples: usize,
    #[serde(default = "surface_tol")]
    pub tol: f64,
}

fn surface_tol() -> f64 {
    1e-5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YanoCheck {
    pub manifold: Manifold,
    pub field: FieldSpec,
    #[serde(default = "yano_resolution")]
    pub resolution: usize,
    /// Bound on `|integral| / volume`.
    #[serde(default = "yano_tol")]
    pub tol: f64,
}

fn yano_resolution() -> usize {
    48
}

fn yano_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantNormTerm {
    #[serde(rename = "B")]
    pub b: ScalarProfile,
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantNormCheck {
    pub terms: Vec<ConstantNormTerm>,
    #[serde(default = "constant_norm_tol")]
    pub tol: f64,
}

fn constant_norm_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowCheck {
    pub manifold: Manifold,
    pub metric: MetricSource,
    #[serde(default = "flow_grid")]
    pub grid: usize,
    #[serde(default = "flow_runs")]
    pub runs: usize,
    /// Largest wave number of the random initial angle.
    #[serde(default = "duality_max_k")]
    pub max_k: i32,
    #[serde(default)]
    pub schedule: FlowSchedule,
    /// Field whose energy the limit must reach (flat tori).
    #[serde(default)]
    pub reference: Option<FieldSpec>,
    #[serde(default = "flow_energy_tol")]
    pub energy_tol: f64,
    /// Wall-clock budget per run; not written to the report.
    #[serde(default)]
    pub max_seconds: Option<f64>,
}

fn flow_grid() -> usize {
    64
}

fn flow_runs() -> usize {
    5
}

fn flow_energy_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyDeltaCheck {
    pub u: TorusFunction,
    #[serde(default = "one")]
    pub exponent: f64,
    pub metric: MetricSource,
    /// Unit sections on the flat base.
    pub sections: Vec<FieldSpec>,
    #[serde(default = "flow_grid")]
    pub grid: usize,
    #[serde(default = "energy_delta_tol")]
    pub tol: f64,
}

fn energy_delta_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    Residual(ResidualCheck),
    Scan(ScanCheck),
    Koszul(KoszulCheck),
    Defect(DefectCheck),
    Obstruction(ObstructionCheck),
    Duality(DualityCheck),
    Surface(SurfaceCheck),
    Yano(YanoCheck),
    ConstantNorm(ConstantNormCheck),
    Flow(FlowCheck),
    EnergyDelta(EnergyDeltaCheck),
}

pub const KINDS: [&str; 11] = [
    "residual",
    "scan",
    "koszul",
    "defect",
    "obstruction",
    "duality",
    "surface",
    "yano",
    "constant_norm",
    "flow",
    "energy_delta",
];

impl Check {
    pub fn kind(&self) -> &'static str {
        match self {
            Check::Residual(_) => "residual",
            Check::Scan(_) => "scan",
            Check::Koszul(_) => "koszul",
            Check::Defect(_) => "defect",
            Check::Obstruction(_) => "obstruction",
            Check::Duality(_) => "duality",
            Check::Surface(_) => "surface",
            Check::Yano(_) => "yano",
            Check::ConstantNorm(_) => "constant_norm",
            Check::Flow(_) => "flow",
            Check::EnergyDelta(_) => "energy_delta",
        }
    }

    fn parse(kind: &str, body: Value, prefix: &str) -> Result<Self, ConfigError> {
        Ok(match kind {
            "residual" => Check::Residual(parse_at(body, prefix)?),
            "scan" => Check::Scan(parse_at(body, prefix)?),
            "koszul" => Check::Koszul(parse_at(body, prefix)?),
            "defect" => Check::Defect(parse_at(body, prefix)?),
            "obstruction" => Check::Obstruction(parse_at(body, prefix)?),
            "duality" => Check::Duality(parse_at(body, prefix)?),
            "surface" => Check::Surface(parse_at(body, prefix)?),
            "yano" => Check::Yano(parse_at(body, prefix)?),
            "constant_norm" => Check::ConstantNorm(parse_at(body, prefix)?),
            "flow" => Check::Flow(parse_at(body, prefix)?),
            "energy_delta" => Check::EnergyDelta(parse_at(body, prefix)?),
            other => {
                return Err(error(
                    join_path(prefix, "kind"),
                    format!("unknown case kind `{other}`, expected one of {}", KINDS.join(", ")),
                ))
            }
        })
    }
}

/// What a case must produce to count as matched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub verdict: String,
    /// `value` must be within `value_tol` of this.
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default = "value_tol")]
    pub value_tol: f64,
    #[serde(default)]
    pub value_min: Option<f64>,
    #[serde(default)]
    pub value_max: Option<f64>,
}

fn value_tol() -> f64 {
    1e-9
}

impl Expectation {
    pub fn verdict(verdict: impl Into<String>) -> Self {
        Expectation {
            verdict: verdict.into(),
            value: None,
            value_tol: value_tol(),
            value_min: None,
            value_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    pub id: String,
    pub expect: Option<Expectation>,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub version: u32,
    pub seed: u64,
    pub output: OutputConfig,
    pub cases: Vec<CaseConfig>,
}

fn take_string(map: &mut serde_json::Map<String, Value>, key: &str, prefix: &str) -> Result<String, ConfigError> {
    match map.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(error(join_path(prefix, key), format!("expected a string, found {other}"))),
        None => Err(error(prefix, format!("missing field `{key}`"))),
    }
}

fn parse_case(index: usize, value: Value) -> Result<CaseConfig, ConfigError> {
    let prefix = format!("cases[{index}]");
    let Value::Object(mut map) = value else {
        return Err(error(prefix, "expected an object"));
    };
    let id = take_string(&mut map, "id", &prefix)?;
    if id.is_empty() {
        return Err(error(join_path(&prefix, "id"), "case id must not be empty"));
    }
    let kind = take_string(&mut map, "kind", &prefix)?;
    let expect = match map.remove("expect") {
        Some(v) => Some(parse_at(v, &join_path(&prefix, "expect"))?),
        None => None,
    };
    let check = Check::parse(&kind, Value::Object(map), &prefix)?;
    Ok(CaseConfig { id, expect, check })
}

impl SuiteConfig {
    pub fn empty() -> Self {
        SuiteConfig {
            version: CONFIG_VERSION,
            seed: 0,
            output: OutputConfig::default(),
            cases: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| error("", format!("not valid JSON: {e}")))?;
        let raw: RawConfig = parse_at(value, "")?;
        if raw.version != CONFIG_VERSION {
            return Err(error(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", raw.version),
            ));
        }
        let mut cases = Vec::with_capacity(raw.cases.len());
        let mut seen = BTreeSet::new();
        for (i, v) in raw.cases.into_iter().enumerate() {
            let case = parse_case(i, v)?;
            if !seen.insert(case.id.clone()) {
                return Err(error(format!("cases[{i}].id"), format!("duplicate case id `{}`", case.id)));
            }
            cases.push(case);
        }
        Ok(SuiteConfig {
            version: raw.version,
            seed: raw.seed,
            output: raw.output,
            cases,
        })
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Ok(Self::from_json(&text)?)
    }

    /// Keeps only the cases of the given kinds.
    pub fn retain_kinds(&mut self, kinds: &[&str]) {
        self.cases.retain(|c| kinds.contains(&c.check.kind()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_name_the_offending_key() {
        let text = r#"{"cases": [{"id": "a", "kind": "yano", "manifold": {"kind": "round_sphere", "n": 2},
            "field": {"kind": "killing_rotation", "thetas": [1.0]}, "resolutin": 4}]}"#;
        let e = SuiteConfig::from_json(text).unwrap_err();
        assert_eq!(e.key, "cases[0].resolutin");
        assert!(e.message.contains("resolutin"), "{e}");

        let text = r#"{"seed": "x"}"#;
        assert_eq!(SuiteConfig::from_json(text).unwrap_err().key, "seed");

        let text = r#"{"output": {"formats": ["xml"]}}"#;
        assert_eq!(SuiteConfig::from_json(text).unwrap_err().key, "output.formats[0]");

        let text = r#"{"cases": [{"id": "a", "kind": "nope"}]}"#;
        assert_eq!(SuiteConfig::from_json(text).unwrap_err().key, "cases[0].kind");

        let text = r#"{"cases": [{"id": "a", "kind": "constant_norm", "terms": [], "tol": "small"}]}"#;
        assert_eq!(SuiteConfig::from_json(text).unwrap_err().key, "cases[0].tol");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let case = r#"{"id": "a", "kind": "constant_norm", "terms": []}"#;
        let text = format!(r#"{{"cases": [{case}, {case}]}}"#);
        assert_eq!(SuiteConfig::from_json(&text).unwrap_err().key, "cases[1].id");
    }

    #[test]
    fn empty_config() {
        let c = SuiteConfig::from_json("{}").unwrap();
        assert_eq!(c, SuiteConfig::empty());
    }
}
