//! JSON/TOML configuration objects and their conversion into core types.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wkm_core::experiments::ScenarioConfig;
use wkm_core::{
    BoundConstants, CoreGate, CustomExhaustion, DistributionModel, ExhaustionSpec, TailPolicy, ValidationPolicy, WeightConfig,
};

/// Reads a file as JSON or TOML according to its extension (JSON otherwise).
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn load_model(path: &Path) -> Result<DistributionModel> {
    let m: DistributionModel = load(path)?;
    m.validate()?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterDto {
    Value(f64),
    Named(CenterName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterName {
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionKind {
    #[default]
    Absolute,
    Centered,
    VarCentered,
    Tabulated,
}

/// `{"kind", "center"?, "alpha"?, "q"?}`; tabulated shapes add `knots`,
/// `c1`, `c2` and `t0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionDto {
    #[serde(default)]
    pub kind: ExhaustionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<CenterDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

impl ExhaustionDto {
    pub fn absolute(q: f64) -> Self {
        ExhaustionDto { q: Some(q), ..Default::default() }
    }

    /// Builds `h`; model-dependent anchors are resolved against `model` once.
    pub fn exhaustion(&self, model: &DistributionModel) -> Result<ExhaustionSpec> {
        self.exhaustion_for(Some(model))
    }

    /// As [`Self::exhaustion`]; without a model only model-free kinds build.
    pub fn exhaustion_for(&self, model: Option<&DistributionModel>) -> Result<ExhaustionSpec> {
        let needs_model = || anyhow::anyhow!("exhaustion kind {:?} with this anchor needs a model", self.kind);
        let unexpected = |field: &str, present: bool| -> Result<()> {
            if present {
                bail!("field `{field}` does not apply to exhaustion kind {:?}", self.kind);
            }
            Ok(())
        };
        let custom_fields = self.knots.is_some() || self.c1.is_some() || self.c2.is_some() || self.t0.is_some();
        match self.kind {
            ExhaustionKind::Absolute => {
                unexpected("center", self.center.is_some())?;
                unexpected("alpha", self.alpha.is_some())?;
                unexpected("knots/c1/c2/t0", custom_fields)?;
                Ok(ExhaustionSpec::Absolute)
            }
            ExhaustionKind::Centered => {
                unexpected("alpha", self.alpha.is_some())?;
                unexpected("knots/c1/c2/t0", custom_fields)?;
                let c = match &self.center {
                    Some(CenterDto::Value(c)) => *c,
                    Some(CenterDto::Named(CenterName::Median)) => model.ok_or_else(needs_model)?.median(),
                    None => bail!("centered exhaustion needs `center` (a number or \"median\")"),
                };
                Ok(ExhaustionSpec::centered(c)?)
            }
            ExhaustionKind::VarCentered => {
                unexpected("center", self.center.is_some())?;
                unexpected("knots/c1/c2/t0", custom_fields)?;
                let Some(alpha) = self.alpha else { bail!("var_centered exhaustion needs `alpha`") };
                Ok(ExhaustionSpec::var_centered(alpha, model.ok_or_else(needs_model)?.quantile(alpha)?)?)
            }
            ExhaustionKind::Tabulated => {
                unexpected("center", self.center.is_some())?;
                unexpected("alpha", self.alpha.is_some())?;
                let (Some(knots), Some(c1), Some(c2), Some(t0)) = (&self.knots, self.c1, self.c2, self.t0) else {
                    bail!("tabulated exhaustion needs `knots`, `c1`, `c2` and `t0`");
                };
                Ok(ExhaustionSpec::Custom(CustomExhaustion::tabulated(knots.clone(), c1, c2, t0)?))
            }
        }
    }

    pub fn q_or(&self, default: Option<f64>) -> Result<f64> {
        match self.q.or(default) {
            Some(q) => Ok(q),
            None => bail!("weight configuration needs `q`"),
        }
    }

    pub fn weight(&self, model: &DistributionModel) -> Result<WeightConfig> {
        Ok(WeightConfig::new(self.exhaustion(model)?, self.q_or(None)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDto {
    pub core: CoreGate,
    pub tail: TailPolicy,
    pub q_grid: Vec<f64>,
    #[serde(default)]
    pub exhaustion: ExhaustionDto,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
}

fn default_bootstrap() -> usize {
    500
}

fn default_refinement() -> usize {
    8
}

impl PolicyDto {
    pub fn policy(&self, model: &DistributionModel, seed: u64) -> Result<ValidationPolicy> {
        if self.exhaustion.q.is_some() {
            bail!("policy exhaustion takes no `q`; the grid is `q_grid`");
        }
        let p = ValidationPolicy {
            core: self.core,
            tail: self.tail,
            q_grid: self.q_grid.clone(),
            exhaustion: self.exhaustion.exhaustion(model)?,
            bootstrap: self.bootstrap,
            refinement: self.refinement,
            seed,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDto {
    pub id: String,
    pub model: DistributionModel,
    /// Weighted-metric exhaustion and `q`; the KS rows use the same
    /// exhaustion with `q = 0`.
    pub weight: ExhaustionDto,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_true")]
    pub floor: bool,
    #[serde(default = "default_max_draws")]
    pub max_draws: u64,
}

fn default_n_grid() -> Vec<usize> {
    wkm_core::experiments::DEFAULT_N_GRID.to_vec()
}

fn default_m() -> usize {
    160
}

fn default_repetitions() -> usize {
    8
}

fn default_true() -> bool {
    true
}

fn default_max_draws() -> u64 {
    1_000_000_000
}

impl ScenarioDto {
    pub fn scenario(&self, seed: u64) -> Result<ScenarioConfig> {
        self.model.validate()?;
        let target = DistributionModel::gaussian(0.0, 1.0)?;
        let cfg = ScenarioConfig {
            id: self.id.clone(),
            model: self.model,
            // Z_n is compared with the standard normal, so anchors resolve there
            exhaustion: self.weight.exhaustion(&target)?,
            q: self.weight.q_or(None)?,
            refinement: self.refinement,
            n_grid: self.n_grid.clone(),
            m: self.m,
            repetitions: self.repetitions,
            seed,
            floor: self.floor,
            max_draws: self.max_draws,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RGridDto {
    Values(Vec<f64>),
    Log { min: f64, max: f64, points: usize },
}

impl RGridDto {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            RGridDto::Values(v) => Ok(v.clone()),
            RGridDto::Log { min, max, points } => {
                if !(*min > 0.0 && max > min && *points >= 2) {
                    bail!("log grid needs 0 < min < max and at least two points");
                }
                let (a, b) = (min.ln(), max.ln());
                Ok((0..*points).map(|i| (a + (b - a) * i as f64 / (*points - 1) as f64).exp()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailscanDto {
    pub model: DistributionModel,
    #[serde(default)]
    pub exhaustion: ExhaustionDto,
    /// Defaults to the model's default `delta`.
    #[serde(default)]
    pub delta: Option<f64>,
    pub r_grid: RGridDto,
    #[serde(default = "default_n_ref")]
    pub n_ref: u64,
    #[serde(default)]
    pub constants: BoundConstants,
}

fn default_n_ref() -> u64 {
    1000
}
