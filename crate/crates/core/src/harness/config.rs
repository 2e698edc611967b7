//! TOML case configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AcoConfig, ControllerGains, Feedforward, RolloutSettings};
use crate::dynamics::ContactParams;
use crate::error::{Error, Result};
use crate::gait_planner::{GaitParams, KnotBounds, StairSpec, StepKind};
use crate::ik_network::IkHyper;
use crate::model::RobotModel;

pub const SCHEMA_VERSION: u32 = 1;

/// Stair geometry as a case states it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StairsSection {
    /// Stated stair length, m.
    pub length: f64,
    /// Rise over run.
    pub ratio: f64,
    /// Read `length` as one double step, so that `run = length / 2`.
    #[serde(default = "yes")]
    pub length_is_double_step: bool,
    #[serde(default = "one")]
    pub n_steps: usize,
    #[serde(default = "subsequent")]
    pub step_kind: StepKind,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn subsequent() -> StepKind {
    StepKind::Subsequent
}

impl StairsSection {
    pub fn spec(&self) -> StairSpec {
        let run = if self.length_is_double_step {
            0.5 * self.length
        } else {
            self.length
        };
        StairSpec {
            run,
            rise: self.ratio * run,
            n_steps: self.n_steps,
        }
    }
}

/// Replacements for the nominal robot. Changing lengths or masses without
/// giving inertias recomputes slender-rod inertias.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertias: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
}

impl ModelOverrides {
    pub fn apply(&self) -> RobotModel {
        let base = RobotModel::nominal();
        let mut model = RobotModel::with_rod_inertias(
            self.lengths.unwrap_or(base.lengths),
            self.masses.unwrap_or(base.masses),
            self.gravity.unwrap_or(base.gravity),
        );
        if let Some(i) = self.inertias {
            model.inertias = i;
        }
        model
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSection {
    /// Search the knot times and shape parameters for the lowest peak jerk.
    pub knot_shift: bool,
    /// The plan itself without knot shifting, otherwise the reserved fields
    /// and sampling step.
    pub params: GaitParams,
    pub bounds: KnotBounds,
}

impl Default for GaitSection {
    fn default() -> Self {
        Self {
            knot_shift: true,
            params: GaitParams::default(),
            bounds: KnotBounds::default(),
        }
    }
}

/// One gain pair shared by all joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedGains {
    pub k_p: f64,
    pub k_d: f64,
    pub q5_torso: f64,
}

impl From<SharedGains> for ControllerGains {
    fn from(g: SharedGains) -> Self {
        ControllerGains::shared(g.k_p, g.k_d, g.q5_torso)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub disturbance: bool,
    pub feedforward: Feedforward,
    pub zmp_k_term: bool,
    /// Gains for `simulate`; the middle of the tuning box when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<SharedGains>,
}

impl Default for ControlSection {
    fn default() -> Self {
        let s = RolloutSettings::default();
        Self {
            disturbance: s.disturbance,
            feedforward: s.feedforward,
            zmp_k_term: s.zmp_k_term,
            gains: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub schema_version: u32,
    pub case_id: String,
    /// Seeds knot shifting, the IK networks and the tuner.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub stairs: StairsSection,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default)]
    pub gait: GaitSection,
    #[serde(default)]
    pub ik: IkHyper,
    #[serde(default)]
    pub contact: ContactParams,
    #[serde(default)]
    pub control: ControlSection,
    /// `aco.seed` is replaced by the case seed.
    #[serde(default)]
    pub aco: AcoConfig,
}

impl CaseConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything except the gait parameters, which the planner
    /// stage validates.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let id_ok = !self.case_id.is_empty()
            && self
                .case_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !id_ok {
            return Err(Error::Config(format!(
                "case_id `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                self.case_id
            )));
        }
        let s = &self.stairs;
        if !(s.length.is_finite() && s.length > 0.0 && s.ratio.is_finite() && s.ratio > 0.0) {
            return Err(Error::Config(format!(
                "stair length and ratio must be positive (got {}, {})",
                s.length, s.ratio
            )));
        }
        s.spec().validate()?;
        self.model().validate()?;
        self.gait.bounds.validate()?;
        self.ik.validate()?;
        self.contact.validate()?;
        self.aco_config().validate()?;
        if let Some(g) = self.control.gains {
            ControllerGains::from(g).validate()?;
        }
        Ok(())
    }

    pub fn model(&self) -> RobotModel {
        self.model.apply()
    }

    pub fn aco_config(&self) -> AcoConfig {
        AcoConfig {
            seed: self.seed,
            ..self.aco
        }
    }

    pub fn rollout_settings(&self) -> RolloutSettings {
        RolloutSettings {
            disturbance: self.control.disturbance,
            feedforward: self.control.feedforward,
            zmp_k_term: self.control.zmp_k_term,
            penalty: self.aco.zmp_penalty,
        }
    }

    /// Torso pitch used while solving the legs, the middle of its box.
    pub fn nominal_torso_pitch(&self) -> f64 {
        let [lo, hi] = self.aco.bounds.q5_torso;
        0.5 * (lo + hi)
    }

    /// Gains for a fixed-gain simulation.
    pub fn simulation_gains(&self) -> ControllerGains {
        match self.control.gains {
            Some(g) => g.into(),
            None => {
                let b = &self.aco.bounds;
                let mid = |[lo, hi]: [f64; 2]| 0.5 * (lo + hi);
                ControllerGains::shared(mid(b.k_p), mid(b.k_d), mid(b.q5_torso))
            }
        }
    }
}

const CASE_1: &str = include_str!("../../configs/case1.toml");
const CASE_2: &str = include_str!("../../configs/case2.toml");
const CASE_3: &str = include_str!("../../configs/case3.toml");

/// The three shipped stair cases.
pub fn shipped_cases() -> Vec<CaseConfig> {
    [CASE_1, CASE_2, CASE_3]
        .iter()
        .map(|text| CaseConfig::from_toml_str(text).expect("shipped case configs are valid"))
        .collect()
}
