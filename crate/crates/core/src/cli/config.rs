use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{make_model, AnyModel, ModelSpec};
use crate::quantile::{ConditionKind, ExtrapolationKind, Modulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Coupling,
    MeetingTime,
    Conditions,
    Blocks,
    Variance,
    Clt,
    FullReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::MeetingTime => "meeting-time",
            ExperimentKind::Conditions => "conditions",
            ExperimentKind::Blocks => "blocks",
            ExperimentKind::Variance => "variance",
            ExperimentKind::Clt => "clt",
            ExperimentKind::FullReport => "full-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Monte Carlo paths for coupling, meeting times and quantile samples.
    pub paths: usize,
    /// Largest lag of the coupling table; also the length of `simulate` paths.
    pub horizon: usize,
    /// Censoring point of the meeting-time simulation.
    pub cap: usize,
    pub fit_window: [usize; 2],
    pub min_count: u64,
    /// Replications for variance growth and the CLT check.
    pub reps: usize,
    pub n_grid: Vec<usize>,
    pub clt_n: usize,
    pub outer: usize,
    pub inner: usize,
    pub k_range: [u32; 2],
    /// Horizon of the exact meeting-time tail for discrete renewal chains.
    pub exact_horizon: usize,
    pub lyapunov_n: usize,
    pub lyapunov_reps: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            paths: 100_000,
            horizon: 64,
            cap: 256,
            fit_window: [8, 256],
            min_count: 20,
            reps: 2000,
            n_grid: vec![10, 100, 1000],
            clt_n: 5000,
            outer: 20_000,
            inner: 64,
            k_range: [3, 8],
            exact_horizon: 1000,
            lyapunov_n: 10_000,
            lyapunov_reps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    pub p: f64,
    pub r: Option<f64>,
    pub budget: usize,
    pub margin: f64,
    /// Empty selects every condition whose inputs are available.
    pub kinds: Vec<ConditionKind>,
    pub extrapolation: ExtrapolationKind,
    pub modulus: Option<Modulus>,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        Self {
            p: 3.0,
            r: None,
            budget: 100_000,
            margin: 0.1,
            kinds: Vec::new(),
            extrapolation: ExtrapolationKind::PowerLaw,
            modulus: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanScheme {
    Power,
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlocksSection {
    pub p: f64,
    pub scheme: PlanScheme,
    pub q: f64,
    pub epsilon: f64,
}

impl Default for BlocksSection {
    fn default() -> Self {
        Self {
            p: 3.0,
            scheme: PlanScheme::Power,
            q: 2.0,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    /// `delta.csv` written by a coupling run.
    pub delta: Option<PathBuf>,
    /// `survival.csv` written by a meeting-time run.
    pub survival: Option<PathBuf>,
    /// Long-run variance to standardise the CLT check with.
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional when the experiment is named on the command line.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelSpec,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub conditions: ConditionsSection,
    #[serde(default)]
    pub blocks: BlocksSection,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub output: OutputSection,
}

fn cfg_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Strict parse of TOML text, then validation.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Strict parse without validation, so command-line overrides can be
    /// applied first.
    pub fn parse_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| cfg_err("<document>", e.to_string().trim_end()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(if path.is_empty() { "." } else { &path }, e.into_inner().to_string().trim_end())
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| cfg_err("seed", "seed required"))
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment
            .ok_or_else(|| cfg_err("experiment", "experiment kind required (in the file or as a subcommand)"))
    }

    /// Builds the model, reporting parameter errors at their config path.
    pub fn build_model(&self) -> Result<AnyModel> {
        make_model(&self.model).map_err(|e| match e {
            Error::InvalidParameter { field, reason } => cfg_err(&format!("model.{field}"), reason),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let b = &self.budgets;
        let positive = [
            ("budgets.paths", b.paths),
            ("budgets.horizon", b.horizon),
            ("budgets.cap", b.cap),
            ("budgets.reps", b.reps),
            ("budgets.clt_n", b.clt_n),
            ("budgets.outer", b.outer),
            ("budgets.inner", b.inner),
            ("budgets.exact_horizon", b.exact_horizon),
            ("budgets.lyapunov_n", b.lyapunov_n),
            ("budgets.lyapunov_reps", b.lyapunov_reps),
            ("conditions.budget", self.conditions.budget),
        ];
        for (path, v) in positive {
            if v == 0 {
                return Err(cfg_err(path, "must be positive"));
            }
        }
        if b.n_grid.is_empty() || b.n_grid.contains(&0) {
            return Err(cfg_err("budgets.n_grid", "must be non-empty with positive entries"));
        }
        if b.fit_window[0] == 0 || b.fit_window[1] <= b.fit_window[0] {
            return Err(cfg_err("budgets.fit_window", "need 1 <= lo < hi"));
        }
        if b.k_range[0] == 0 || b.k_range[1] < b.k_range[0] {
            return Err(cfg_err("budgets.k_range", "need 1 <= lo <= hi"));
        }
        if !(self.conditions.p > 2.0) {
            return Err(cfg_err("conditions.p", "p must be > 2"));
        }
        if let Some(r) = self.conditions.r {
            if !(r > self.conditions.p) {
                return Err(cfg_err("conditions.r", "r must exceed p"));
            }
        }
        if !(self.conditions.margin >= 0.0) {
            return Err(cfg_err("conditions.margin", "margin must be >= 0"));
        }
        if !(self.blocks.p > 2.0) {
            return Err(cfg_err("blocks.p", "p must be > 2"));
        }
        if self.output.formats.is_empty() {
            return Err(cfg_err("output.formats", "at least one format required"));
        }
        self.build_model().map(|_| ())
    }
}

pub fn read_config_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_config_bytes(bytes: &[u8]) -> Result<ExperimentConfig> {
    let text = std::str::from_utf8(bytes).map_err(|e| cfg_err("<document>", format!("not UTF-8: {e}")))?;
    ExperimentConfig::parse_toml(text)
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let cfg = parse_config_bytes(&read_config_bytes(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "meeting-time"
seed = 1

[model]
family = "discrete_renewal"
p_seq = { kind = "explicit", masses = [0.5, 0.5] }
"#;

    #[test]
    fn minimal_config_materialises_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.budgets, Budgets::default());
        let echoed = c.to_toml();
        assert!(echoed.contains("[budgets]"));
        assert!(echoed.contains("paths = 100000"));
        assert_eq!(ExperimentConfig::from_toml(&echoed).unwrap(), c);
    }

    #[test]
    fn missing_seed() {
        let text = MINIMAL.replace("seed = 1\n", "");
        let e = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("seed required"), "{e}");
        assert!(e.is_validation());
    }

    #[test]
    fn unknown_key_names_its_path() {
        let text = format!("{MINIMAL}\n[budgets]\npathz = 3\n");
        let e = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("budgets") && e.contains("pathz"), "{e}");
    }

    #[test]
    fn sticky_parameter_error_is_field_level() {
        let text = "seed = 2\n[model]\nfamily = \"sticky_beta\"\na = 0.5\n";
        let e = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(e.is_validation());
        let msg = e.to_string();
        assert!(msg.contains("model.a"), "{msg}");
    }
}
