//! Run configuration: JSON schema with defaults for every field and strict
//! rejection of unknown keys.

use gdl_core::bath::{BathVariant, ChannelConfig, TimeLaw};
use gdl_core::experiments::ChannelSource;
use gdl_core::lindblad::QuadratureSpec;
use gdl_core::model::{CouplingSet, Preset, PresetParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub preset: Preset,
    pub n_qubits: usize,
    pub params: ParamsSection,
    pub couplings: CouplingSet,
    pub seed: u64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            preset: Preset::SingleQubitZ,
            n_qubits: 1,
            params: ParamsSection::default(),
            couplings: CouplingSet::Paulis,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub scale: f64,
    pub j: f64,
    pub g: f64,
    pub norm: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = PresetParams::default();
        Self { scale: p.scale, j: p.j, g: p.g, norm: p.norm }
    }
}

impl ParamsSection {
    pub fn to_params(&self) -> PresetParams {
        PresetParams { scale: self.scale, j: self.j, g: self.g, norm: self.norm }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub variant: BathVariant,
}

impl Default for BathSection {
    fn default() -> Self {
        Self { variant: BathVariant::FrequencySampled }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum TimeLawKind {
    Fixed,
    Mu,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub law: TimeLawKind,
    /// Fixed interaction time (law = "fixed"); when absent the step-error
    /// default is used.
    pub t: Option<f64>,
    /// Base time of the random law (law = "mu"); when absent the schedule
    /// `2 sigma sqrt(log(1/(alpha^2 beta log sigma)))` applies per alpha.
    pub t0: Option<f64>,
    pub n_t_nodes: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { law: TimeLawKind::Mu, t: None, t0: None, n_t_nodes: 1200 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub n_omega_nodes: usize,
    pub steps_per_unit_time: usize,
    pub tau_max_sigmas: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self { n_omega_nodes: 3, steps_per_unit_time: 64, tau_max_sigmas: 12.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlphaSpec {
    Single(f64),
    Grid(Vec<f64>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Single(0.08)
    }
}

impl AlphaSpec {
    pub fn first(&self) -> f64 {
        match self {
            AlphaSpec::Single(a) => *a,
            AlphaSpec::Grid(v) => v.first().copied().unwrap_or(0.08),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        match self {
            AlphaSpec::Single(a) => vec![*a],
            AlphaSpec::Grid(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Optional label; when present it must match the subcommand.
    pub kind: Option<String>,
    pub eps: f64,
    pub source: ChannelSource,
    /// Sigma grid of the Lamb-defect scan, in units of beta.
    pub sigma_grid: Vec<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: None,
            eps: 0.01,
            source: ChannelSource::LindbladComposed,
            sigma_grid: vec![2.0, 4.0, 8.0, 16.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub beta: f64,
    pub sigma: f64,
    pub alpha: AlphaSpec,
    pub bath: BathSection,
    pub time: TimeSection,
    pub quadrature: QuadratureSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemSection::default(),
            beta: 1.0,
            sigma: 2.0,
            alpha: AlphaSpec::default(),
            bath: BathSection::default(),
            time: TimeSection::default(),
            quadrature: QuadratureSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl RunConfig {
    #[allow(dead_code)]
    pub fn defaults() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta > 0.0) {
            return Err("beta must be positive".into());
        }
        if !(self.sigma > self.beta / (2.0 * 2f64.sqrt())) {
            return Err("sigma too small: requires sigma > beta/(2 sqrt 2)".into());
        }
        for a in self.alpha.grid() {
            if !(a > 0.0) {
                return Err("alpha values must be positive".into());
            }
        }
        if self.system.n_qubits == 0 || self.system.n_qubits > 6 {
            return Err("system.n_qubits must lie in [1, 6]".into());
        }
        if self.time.n_t_nodes < 3 || self.quadrature.n_omega_nodes < 3 {
            return Err("quadrature node counts must be >= 3".into());
        }
        Ok(())
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            min_omega_nodes: self.quadrature.n_omega_nodes,
            tau_max_sigmas: self.quadrature.tau_max_sigmas,
        }
    }

    /// Channel configuration at a particular alpha. When the time section
    /// leaves T or T0 unset, the schedule fills it in.
    pub fn channel_config(&self, alpha: f64) -> Result<ChannelConfig, String> {
        let t_law = match self.time.law {
            TimeLawKind::Fixed => {
                let t = self.time.t.unwrap_or(6.0 * self.sigma);
                TimeLaw::Fixed { t }
            }
            TimeLawKind::Mu => {
                let t0 = match self.time.t0 {
                    Some(t0) => t0,
                    None => gdl_core::experiments::t0_schedule(alpha, self.beta, self.sigma)
                        .map_err(|e| e.to_string())?,
                };
                TimeLaw::RandomMu { t0 }
            }
        };
        Ok(ChannelConfig {
            alpha,
            t_law,
            n_omega_nodes: self.quadrature.n_omega_nodes,
            n_t_nodes: self.time.n_t_nodes,
            steps_per_unit_time: self.quadrature.steps_per_unit_time,
            seed: self.system.seed,
        })
    }

    /// Default geometric alpha grid 0.02 .. 0.16 when a single alpha is set.
    pub fn alpha_grid_or_default(&self) -> Vec<f64> {
        match &self.alpha {
            AlphaSpec::Grid(v) if v.len() >= 2 => v.clone(),
            _ => (0..7).map(|k| 0.02 * 2f64.powf(k as f64 / 2.0)).collect(),
        }
    }
}

pub fn load_config(text: &str) -> Result<RunConfig, String> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::defaults();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = load_config(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"beta": 1.0, "sigma": 2.0, "bogus_field": 3}"#;
        let err = load_config(text).unwrap_err();
        assert!(err.contains("bogus_field"), "error was: {err}");
    }

    #[test]
    fn partial_config_gets_defaults() {
        let text = r#"{"beta": 1.5, "sigma": 3.0}"#;
        let cfg = load_config(text).unwrap();
        assert_eq!(cfg.beta, 1.5);
        assert_eq!(cfg.quadrature.steps_per_unit_time, 64);
        assert!(matches!(cfg.alpha, AlphaSpec::Single(_)));
    }

    #[test]
    fn alpha_grid_accepted() {
        let text = r#"{"alpha": [0.02, 0.04, 0.08], "beta": 1.0, "sigma": 2.0}"#;
        let cfg = load_config(text).unwrap();
        assert_eq!(cfg.alpha.grid().len(), 3);
    }

    #[test]
    fn invalid_sigma_rejected() {
        let text = r#"{"beta": 1.0, "sigma": 0.2}"#;
        assert!(load_config(text).is_err());
    }
}
