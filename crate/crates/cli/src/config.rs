//! TOML configuration: sections, defaults, flag overrides and conversion to
//! library types.

use divset::bounds::{RuleKind, ThresholdRule};
use divset::distributions::{Distribution, FamilyKind, GridSpec, ParameterSpace, ParametricFamily};
use divset::divergences::kernel::{Bandwidth, KernelSpec};
use divset::divergences::DivergenceTag;
use divset::pilot::PilotSpec;
use divset::relfit::StatisticSpec;
use divset::simharness::SetMethod;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const DEFAULT_SEED: u64 = 20_240_601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_alpha() -> f64 {
    0.05
}
fn default_ratio() -> f64 {
    0.5
}
fn default_grid_points() -> usize {
    400
}
fn default_divergence() -> String {
    "kl".into()
}
fn default_rule() -> String {
    "redi_normal".into()
}
fn default_pilot() -> String {
    "auto".into()
}
fn default_method() -> String {
    "grid".into()
}
fn default_rays() -> usize {
    64
}
fn default_n() -> usize {
    200
}
fn default_replicates() -> usize {
    300
}
fn default_true() -> bool {
    true
}
fn default_eps_scale() -> f64 {
    0.1
}
fn default_c() -> f64 {
    0.1
}
fn default_case() -> u8 {
    1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Distribution>,
    #[serde(default)]
    pub statistic: StatisticSection,
    #[serde(default)]
    pub rule: RuleSection,
    #[serde(default)]
    pub pilot: PilotSection,
    #[serde(default)]
    pub project: ProjectSection,
    #[serde(default)]
    pub confset: ConfsetSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `bernoulli`, `poisson`, `gaussian_location` or `gaussian_location_scale`.
    pub kind: String,
    /// Known sd for `gaussian_location`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Explicit finite model; overrides `lower`/`upper`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticSection {
    /// `kl`, `dp`, `hellinger`, `tv`, `wasserstein1` or `mmd`.
    #[serde(default = "default_divergence")]
    pub divergence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Support bound for `wasserstein1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<Bandwidth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl Default for StatisticSection {
    fn default() -> Self {
        Self { divergence: default_divergence(), beta: None, b: None, bandwidth: None, delta: None, bound: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSection {
    /// `redi_normal`, `slrt`, `hoeffding`, `bernstein`, `empirical_bernstein`,
    /// `bentkus` or `empirical_bentkus`.
    #[serde(default = "default_rule")]
    pub kind: String,
    /// Range bound; defaults to the statistic's bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Standard deviation for `bernstein` and `bentkus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_split: Option<f64>,
}

impl Default for RuleSection {
    fn default() -> Self {
        Self { kind: default_rule(), b: None, s: None, c: None, delta_split: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSection {
    /// `auto` (MLE for KL, otherwise minimum distance), `mle` or `min_distance`.
    #[serde(default = "default_pilot")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_points: Option<usize>,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self { kind: default_pilot(), coarse_points: None }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSection {
    /// Slack for the approximate projection set; defaults to the statistic's nu.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfsetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    /// `grid`, `rays` or `crossfit`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_rays")]
    pub n_rays: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit_grid: Option<PathBuf>,
}

impl Default for ConfsetSection {
    fn default() -> Self {
        Self {
            data: None,
            split_ratio: default_ratio(),
            method: default_method(),
            n_rays: default_rays(),
            r_max: None,
            emit_grid: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// `example1`, `example2`, `overdispersion` or `contamination`; when
    /// absent the experiment is assembled from the other sections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub method: SetMethod,
    #[serde(default = "default_true")]
    pub metrics: bool,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Truth `Bern(eps_scale / n)` in the `example1` preset.
    #[serde(default = "default_eps_scale")]
    pub eps_scale: f64,
    /// Truth `Bern(1/2 + c / n)` in the `example2` preset.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Dispersion ratios for the `overdispersion` preset; defaults to the full sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    /// Mixture case (1, 2 or 3) for the `contamination` preset.
    #[serde(default = "default_case")]
    pub case: u8,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            preset: None,
            name: None,
            n: default_n(),
            replicates: default_replicates(),
            method: SetMethod::Split,
            metrics: true,
            split_ratio: default_ratio(),
            nu: None,
            eps_scale: default_eps_scale(),
            c: default_c(),
            kappa: None,
            case: default_case(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Sets a dotted `key` in `table`, creating intermediate sections.
pub fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key {key:?}"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("{key:?}: {part:?} is not a section"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Applies a `key=value` override.
pub fn apply_assignment(table: &mut toml::Table, assignment: &str) -> Result<(), String> {
    let (key, value) = assignment.split_once('=').ok_or_else(|| format!("expected key=value, got {assignment:?}"))?;
    set_key(table, key.trim(), parse_value(value.trim()))
}

impl Config {
    pub fn from_table(table: toml::Table) -> Result<Self, String> {
        let cfg: Config = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }

    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# config could not be rendered: {e}\n"))
    }

    pub fn family(&self) -> Result<ParametricFamily, String> {
        let m = self.model.as_ref().ok_or("missing [model] section")?;
        let kind = match m.kind.as_str() {
            "bernoulli" => FamilyKind::Bernoulli,
            "poisson" => FamilyKind::Poisson,
            "gaussian_location" => FamilyKind::GaussianLocation { sd: m.sd.ok_or("model.sd is required for gaussian_location")? },
            "gaussian_location_scale" => FamilyKind::GaussianLocationScale,
            other => return Err(format!("unknown model.kind {other:?}")),
        };
        let space = match (&m.points, &m.lower, &m.upper) {
            (Some(points), _, _) => ParameterSpace::Finite { points: points.clone() },
            (None, Some(lower), Some(upper)) => ParameterSpace::Box { lower: lower.clone(), upper: upper.clone() },
            _ => return Err("model needs either points or both lower and upper".into()),
        };
        ParametricFamily::new(kind, space).map_err(|e| e.to_string())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::uniform(self.model.as_ref().map_or(default_grid_points(), |m| m.grid_points))
    }

    pub fn truth(&self) -> Result<Distribution, String> {
        let t = self.truth.clone().ok_or("missing [truth] section")?;
        t.validate().map_err(|e| e.to_string())?;
        Ok(t)
    }

    pub fn divergence(&self) -> Result<DivergenceTag, String> {
        let s = &self.statistic;
        let tag = match s.divergence.as_str() {
            "kl" => DivergenceTag::Kl,
            "dp" => DivergenceTag::Dp { beta: s.beta.ok_or("statistic.beta is required for dp")? },
            "hellinger" => DivergenceTag::Hellinger,
            "tv" => DivergenceTag::Tv,
            "wasserstein1" => DivergenceTag::Wasserstein1 { b: s.b.ok_or("statistic.b is required for wasserstein1")? },
            "mmd" => {
                let mut kernel = KernelSpec::default();
                if let Some(bw) = s.bandwidth {
                    kernel.bandwidth = bw;
                }
                DivergenceTag::Mmd { kernel }
            }
            other => return Err(format!("unknown statistic.divergence {other:?}")),
        };
        tag.validate().map_err(|e| e.to_string())?;
        Ok(tag)
    }

    pub fn statistic(&self) -> Result<StatisticSpec, String> {
        let mut spec = StatisticSpec::new(self.divergence()?);
        if let Some(d) = self.statistic.delta {
            spec = spec.with_delta(d);
        }
        if let Some(b) = self.statistic.bound {
            spec = spec.with_bound(b);
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn rule(&self) -> Result<ThresholdRule, String> {
        let r = &self.rule;
        let stat = self.statistic()?;
        let b = || {
            r.b.or(stat.bound)
                .ok_or_else(|| format!("rule {} needs rule.b (the statistic has no built-in bound)", r.kind))
        };
        let s = || r.s.ok_or_else(|| format!("rule {} needs rule.s", r.kind));
        let kind = match r.kind.as_str() {
            "redi_normal" => RuleKind::RediNormal,
            "slrt" => RuleKind::Slrt,
            "hoeffding" => RuleKind::Hoeffding { b: b()? },
            "bernstein" => RuleKind::Bernstein { b: b()?, s: s()? },
            "empirical_bernstein" => RuleKind::EmpiricalBernstein { b: b()?, c: r.c.unwrap_or(0.5) },
            "bentkus" => RuleKind::Bentkus { b: b()?, s: s()? },
            "empirical_bentkus" => RuleKind::EmpiricalBentkus { b: b()?, delta_split: r.delta_split },
            other => return Err(format!("unknown rule.kind {other:?}")),
        };
        ThresholdRule::new(kind, self.alpha).map_err(|e| e.to_string())
    }

    pub fn pilot(&self) -> Result<PilotSpec, String> {
        let tag = self.divergence()?;
        let coarse = self.pilot.coarse_points;
        let mde = |tag| match (PilotSpec::min_distance(tag), coarse) {
            (PilotSpec::MinDistance { divergence, .. }, Some(c)) => PilotSpec::MinDistance { divergence, coarse_points: c },
            (spec, _) => spec,
        };
        let spec = match self.pilot.kind.as_str() {
            "auto" if tag == DivergenceTag::Kl => PilotSpec::Mle,
            "auto" | "min_distance" => mde(tag),
            "mle" => PilotSpec::Mle,
            other => return Err(format!("unknown pilot.kind {other:?}")),
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}
