//! Scenario configuration: a JSON document describing one batch run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{make_domain, Mode, ModeSet};
use crate::error::{Error, Result};
use crate::evolve::{IntegratorConfig, Scheme};
use crate::material::{validate_params, MaterialParams};
use crate::model::{ModelFamily, ModelTag};
use crate::presets::InitialPreset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub nodes: usize,
}

/// A mode given either as a bare degree or as `{"l": .., "m": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeEntry {
    Degree(u32),
    Full(Mode),
}

impl ModeEntry {
    pub fn mode(self) -> Mode {
        match self {
            ModeEntry::Degree(l) => Mode { l, m: None },
            ModeEntry::Full(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    /// Energy balance with accumulated damping.
    EnergyIdentity,
    /// Drift of the integral constraint functional.
    Constraint,
    /// Drift rate of the curl defect of the vector fields.
    CurlFree,
    /// Third-order boundary compatibility of the initial data.
    Compatibility,
    /// Distance from the closed-form drifting solution of the `remark34` preset.
    ExactSolution,
}

impl AuditKind {
    pub const ALL: [AuditKind; 5] = [
        AuditKind::EnergyIdentity,
        AuditKind::Constraint,
        AuditKind::CurlFree,
        AuditKind::Compatibility,
        AuditKind::ExactSolution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditKind::EnergyIdentity => "energy_identity",
            AuditKind::Constraint => "constraint",
            AuditKind::CurlFree => "curl_free",
            AuditKind::Compatibility => "compatibility",
            AuditKind::ExactSolution => "exact_solution",
        }
    }
}

fn all_audits() -> Vec<AuditKind> {
    AuditKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative to the directory holding the config file.
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub timeseries: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
    #[serde(default)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceQuantity {
    /// Energy-identity residual under dt halving.
    EnergyIdentity,
    /// Manufactured div-curl solution error under h halving.
    Elliptic,
    /// Max weak-form residual under joint h and dt halving.
    WeakResidual,
    /// Evolve-then-map vs map-then-evolve discrepancy under joint halving.
    Equivalence,
    /// Midpoint vs RK4 trajectory discrepancy under dt halving.
    CrossScheme,
}

impl ConvergenceQuantity {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvergenceQuantity::EnergyIdentity => "energy_identity",
            ConvergenceQuantity::Elliptic => "elliptic",
            ConvergenceQuantity::WeakResidual => "weak_residual",
            ConvergenceQuantity::Equivalence => "equivalence",
            ConvergenceQuantity::CrossScheme => "cross_scheme",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub quantity: ConvergenceQuantity,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    /// Source model; the scenario's `model` field is ignored by equivalence runs.
    pub source: ModelTag,
    pub target: ModelTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub domain: DomainConfig,
    pub material: MaterialParams,
    pub model: ModelTag,
    pub modes: Vec<ModeEntry>,
    pub initial_data: InitialPreset,
    pub integrator: IntegratorConfig,
    #[serde(default = "all_audits")]
    pub audits: Vec<AuditKind>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub equivalence: Option<EquivalenceConfig>,
}

/// A parsed scenario together with the raw bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub source: Vec<u8>,
    pub path: PathBuf,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            Error::ConfigParse(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<LoadedScenario> {
        let source = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&source)
            .map_err(|e| Error::ConfigParse(format!("not valid UTF-8: {e}")))?;
        Ok(LoadedScenario {
            scenario: Self::from_json(text)?,
            source,
            path: path.to_path_buf(),
        })
    }

    pub fn mode_set(&self) -> Result<ModeSet> {
        ModeSet::new(self.modes.iter().map(|m| m.mode()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain;
        make_domain(d.inner_radius, d.outer_radius, d.nodes).map_err(|e| match e {
            Error::GridTooCoarse { .. } => Error::validation("domain.nodes", e.to_string()),
            other => Error::validation("domain", other.to_string()),
        })?;
        validate_params(self.material).map_err(|e| match e {
            Error::AssumptionAViolated { field, value } => Error::validation(
                format!("material.{field}"),
                format!("{value} violates positivity"),
            ),
            other => other,
        })?;
        if self.modes.is_empty() {
            return Err(Error::validation("modes", "at least one mode is required"));
        }
        let modes = self.mode_set()?;
        self.integrator.validate()?;
        if self.integrator.steps() == 0 {
            return Err(Error::validation("integrator.t_end", "horizon is shorter than one step"));
        }
        if self.integrator.scheme == Scheme::ExplicitRk4 {
            let h = (d.outer_radius - d.inner_radius) / d.nodes as f64;
            let bound = IntegratorConfig::rk4_cfl_bound(h, self.material.sound_speed_sq());
            if self.integrator.dt > bound {
                return Err(Error::validation(
                    "integrator.dt",
                    format!("exceeds the explicit stability bound {bound:e}"),
                ));
            }
        }
        if self.audits.is_empty() {
            return Err(Error::validation("audits", "no audits requested"));
        }
        self.validate_preset(self.model, &modes)?;
        if let Some(c) = self.convergence {
            if c.levels < 3 {
                return Err(Error::validation("convergence.levels", "a ladder needs at least 3 levels"));
            }
            if c.quantity == ConvergenceQuantity::Equivalence && self.equivalence.is_none() {
                return Err(Error::validation(
                    "equivalence",
                    "an equivalence ladder needs an equivalence section",
                ));
            }
        }
        if let Some(e) = self.equivalence {
            if e.source.family() == e.target.family() {
                return Err(Error::validation("equivalence.target", "must belong to another model family"));
            }
            self.validate_preset(e.source, &modes)?;
        }
        Ok(())
    }

    fn validate_preset(&self, tag: ModelTag, modes: &ModeSet) -> Result<()> {
        if let InitialPreset::Remark34 { u1, k0 } = self.initial_data {
            if (self.material.kappa - k0).abs() > 1e-12 * k0.abs() || k0 == 0.0 {
                return Err(Error::validation(
                    "initial_data.k0",
                    format!("must equal material.kappa ({})", self.material.kappa),
                ));
            }
            let constrained = tag.is_constrained() || tag.family() == ModelFamily::Lagrangian;
            if constrained && modes.contains_degree_zero() && u1 != 0.0 {
                return Err(Error::validation(
                    "initial_data",
                    format!("remark34 with u1 ≠ 0 violates the integral constraint required by {tag}"),
                ));
            }
        }
        Ok(())
    }

    /// Output directory resolved against `config_dir`.
    pub fn output_dir(&self, config_dir: &Path) -> PathBuf {
        match &self.output.directory {
            Some(d) => config_dir.join(d),
            None => config_dir.to_path_buf(),
        }
    }
}

impl LoadedScenario {
    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
    }

    pub fn output_path(&self, configured: Option<&PathBuf>, suffix: &str) -> PathBuf {
        let dir = self
            .scenario
            .output_dir(self.path.parent().unwrap_or_else(|| Path::new(".")));
        match configured {
            Some(p) => dir.join(p),
            None => dir.join(format!("{}{suffix}", self.stem())),
        }
    }
}
