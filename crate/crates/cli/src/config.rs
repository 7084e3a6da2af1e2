//! Run configuration, read from JSON.
//!
//! ```json
//! {
//!   "inputs": {"table": "table.csv"},
//!   "pade": {"filter": {"im_max": 3.0}, "window": {"size": 30, "stride": 10}},
//!   "tracking": {"match_radius": 0.5, "gap_max": 20, "relabel": {"T1": "B"}},
//!   "decomposition": {"fano": true},
//!   "map": {"label": "T1", "j_window": [17, 27], "a2_tol": 0.1},
//!   "out_dir": "out",
//!   "jobs": 4
//! }
//! ```
//!
//! Every field is optional. Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cam_core::bridge::{Inversion, DEFAULT_A2_TOL};
use cam_core::pade::PadePolicy;
use cam_core::scatter::DEFAULT_UNITARITY_SLACK;
use cam_core::synth::EnergyGrid;
use cam_core::trajectory::TrackPolicy;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub spec: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub poles: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub ce_trajectories: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    /// Also write the integer-crossing (Fano) features.
    pub fano: bool,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig { fano: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// CE trajectory to fit; the longest one when absent.
    pub label: Option<String>,
    /// Inclusive J range of the fit; every entry when absent.
    pub j_window: Option<(u32, u32)>,
    pub a2_tol: f64,
    pub inversion: Inversion,
    /// Energies for the predicted Regge trajectory; defaults to a 0.1 meV
    /// grid across the real parts of the fitted poles.
    pub energies: Option<EnergyGrid>,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            label: None,
            j_window: None,
            a2_tol: DEFAULT_A2_TOL,
            inversion: Inversion::Exact,
            energies: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub pade: PadePolicy,
    pub tracking: TrackPolicy,
    pub decomposition: DecompositionConfig,
    pub map: MapConfig,
    pub unitarity_slack: f64,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Inputs::default(),
            pade: PadePolicy::default(),
            tracking: TrackPolicy::default(),
            decomposition: DecompositionConfig::default(),
            map: MapConfig::default(),
            unitarity_slack: DEFAULT_UNITARITY_SLACK,
            out_dir: PathBuf::from("."),
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.pade.validate()?;
        self.tracking.validate()?;
        if !(self.unitarity_slack >= 0.0 && self.unitarity_slack.is_finite()) {
            bail!("unitarity_slack must be non-negative, got {}", self.unitarity_slack);
        }
        if !(self.map.a2_tol > 0.0) {
            bail!("map.a2_tol must be positive, got {}", self.map.a2_tol);
        }
        if let Some((lo, hi)) = self.map.j_window {
            if lo > hi {
                bail!("map.j_window [{lo}, {hi}] is empty");
            }
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        Ok(())
    }
}

/// Picks the command-line path, else the configured one, and checks it exists.
pub fn require_input(cli: Option<&PathBuf>, configured: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    let path = cli
        .or(configured)
        .cloned()
        .with_context(|| format!("no {what} given (argument or inputs.{what} in the config)"))?;
    if !path.is_file() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.tracking.gap_max, 20);
        assert!(c.decomposition.fano);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"tracking_policy": {}}"#).is_err());
    }

    #[test]
    fn non_positive_thresholds_fail_validation() {
        let c: RunConfig = serde_json::from_str(r#"{"pade": {"filter": {"match_radius": 0}}}"#).unwrap();
        assert!(c.validate().is_err());
        let c: RunConfig = serde_json::from_str(r#"{"tracking": {"match_radius": -1}}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
