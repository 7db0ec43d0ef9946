//! Run configuration (TOML) and sweep expansion.

use serde::{Deserialize, Serialize};

use crate::dgp::{Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{DmlConfig, NetworkConfig, TrainingConfig};
use crate::pooling::Method;

/// Nuisance-learning settings for the DML scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmlSettings {
    pub folds: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Hidden-layer width; 10 for non-overlapping, `K + 10` for overlapping
    /// scenarios when absent.
    pub hidden_width: Option<usize>,
    pub hidden_layers: usize,
}

impl Default for DmlSettings {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            folds: 2,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            hidden_width: None,
            hidden_layers: NetworkConfig::default().hidden_layers,
        }
    }
}

impl DmlSettings {
    pub fn width_for(&self, scenario: &ScenarioConfig) -> usize {
        self.hidden_width.unwrap_or(if scenario.scenario.is_overlapping() {
            scenario.k + 10
        } else {
            10
        })
    }

    pub fn to_config(&self, scenario: &ScenarioConfig) -> DmlConfig {
        DmlConfig {
            folds: self.folds,
            network: NetworkConfig {
                hidden_width: self.width_for(scenario),
                hidden_layers: self.hidden_layers,
            },
            training: TrainingConfig {
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                ..TrainingConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the run config, e.g. `scenario.sigma` or `alpha`.
    pub field: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub run_id: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "dptr-out".into(),
            run_id: "run".into(),
        }
    }
}

/// A synthetic simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub scenario: ScenarioConfig,
    pub dml: DmlSettings,
    pub sweep: Vec<SweepAxis>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Iht, Method::Dptr, Method::Bayes],
            alpha: 0.05,
            replications: 1000,
            master_seed: 0,
            parallelism: 1,
            scenario: ScenarioConfig::default(),
            dml: DmlSettings::default(),
            sweep: Vec::new(),
            output: OutputConfig::default(),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with every optional field replaced by its effective value.
    pub fn resolved(&self) -> Self {
        let scenario = self.scenario.resolved();
        let dml = DmlSettings {
            hidden_width: Some(self.dml.width_for(&scenario)),
            ..self.dml.clone()
        };
        Self {
            scenario,
            dml,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if self.dml.folds < 2 {
            return Err(Error::Config("dml.folds must be at least 2".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(**m)) {
            return Err(Error::Config(format!("method {m} listed twice")));
        }
        if self.methods.contains(&Method::OracleBeta)
            && !matches!(self.scenario.scenario, Scenario::S1Dm | Scenario::S1Ols)
        {
            return Err(Error::Config(
                "ORACLE_BETA needs known model parameters and is only available for S1_DM and S1_OLS".into(),
            ));
        }
        if self.methods.contains(&Method::OracleBeta) && !(self.scenario.tau0 > 0.0) {
            return Err(Error::NonPositiveTau0(self.scenario.tau0));
        }
        self.scenario.validate()
    }

    /// One fully resolved config per sweep cell (cartesian product of the
    /// axes, last axis varying fastest), with a label per cell.
    pub fn cells(&self) -> Result<Vec<(String, RunConfig)>> {
        let mut cells = vec![(String::new(), self.clone())];
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("sweep over {} has no values", axis.field)));
            }
            let mut next = Vec::with_capacity(cells.len() * axis.values.len());
            for (label, cfg) in &cells {
                for v in &axis.values {
                    let updated = override_field(cfg, &axis.field, v)?;
                    let part = format!("{}={}", axis.field, v);
                    let label = if label.is_empty() { part } else { format!("{label};{part}") };
                    next.push((label, updated));
                }
            }
            cells = next;
        }
        for (_, c) in &mut cells {
            *c = c.resolved();
            c.sweep.clear();
            c.validate()?;
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Two-arm rows split into covariate groups (or by an explicit key).
    Grouped,
    /// Rows carrying a vector of concurrent treatments.
    Overlapping,
}

/// A real-data evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub input: String,
    pub layout: Layout,
    pub columns: super::ingest::ColumnMap,
    /// Groups below this many rows are dropped.
    pub min_group_size: usize,
    /// Per-group sample sizes `N` (`N/2` per arm), one cell each. In the
    /// overlapping layout, rows drawn per treatment combination.
    pub sample_sizes: Vec<usize>,
    /// Sample proportions `ρ` of each group, one cell each (grouped layout).
    pub proportions: Vec<f64>,
    /// Overlapping layout: adjust for covariates in the OLS fits.
    pub with_covariates: bool,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub tau_min: f64,
    pub replications: usize,
    pub seed: u64,
    pub parallelism: usize,
    pub output: OutputConfig,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            input: String::new(),
            layout: Layout::Grouped,
            columns: Default::default(),
            min_group_size: 1000,
            sample_sizes: vec![10],
            proportions: Vec::new(),
            with_covariates: false,
            methods: vec![Method::Iht, Method::Dptr],
            alpha: 0.05,
            tau_min: 0.0,
            replications: 200,
            seed: 0,
            parallelism: 1,
            output: OutputConfig::default(),
        }
    }
}

impl EvaluateConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.replications == 0 || self.parallelism == 0 {
            return Err(Error::Config("replications and parallelism must be at least 1".into()));
        }
        if self.methods.contains(&Method::OracleBeta) {
            return Err(Error::Config("ORACLE_BETA needs known model parameters; not available on real data".into()));
        }
        if !(self.tau_min >= 0.0) {
            return Err(Error::Config("tau_min must be non-negative".into()));
        }
        if self.sample_sizes.is_empty() && self.proportions.is_empty() {
            return Err(Error::Config("give at least one sample size or proportion".into()));
        }
        if self.proportions.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Config("proportions must lie in (0, 1]".into()));
        }
        if self.layout == Layout::Overlapping && !self.proportions.is_empty() {
            return Err(Error::Config("the overlapping layout takes sample_sizes only".into()));
        }
        Ok(())
    }
}

/// Replaces the value at `path`. The field must exist in the resolved
/// config, but scenario-dependent defaults left unset stay unset so they
/// follow the swept values.
fn override_field(cfg: &RunConfig, path: &str, value: &toml::Value) -> Result<RunConfig> {
    let unknown = || Error::Config(format!("sweep field `{path}` does not name a config field"));
    let to_toml = |c: &RunConfig| toml::Value::try_from(c).map_err(|e| Error::Config(e.to_string()));
    let reference = to_toml(&cfg.resolved())?;
    let mut root = to_toml(cfg)?;
    let (parents, last) = path.rsplit_once('.').unwrap_or(("", path));
    let mut expected = &reference;
    let mut node = &mut root;
    for part in parents.split('.').filter(|p| !p.is_empty()) {
        expected = expected.get(part).ok_or_else(unknown)?;
        node = node.get_mut(part).ok_or_else(unknown)?;
    }
    let existing = expected.get(last).filter(|v| !v.is_table()).ok_or_else(unknown)?;
    let table = node.as_table_mut().ok_or_else(unknown)?;
    table.insert(last.to_string(), coerce(existing, value));
    root.try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("sweep `{path}`: {e}")))
}

/// Lets integer sweep values fill float fields (`sigma = [1, 3]`).
fn coerce(existing: &toml::Value, value: &toml::Value) -> toml::Value {
    match (existing, value) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        _ => value.clone(),
    }
}
