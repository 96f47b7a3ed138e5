//! Strict TOML run configuration: unknown keys are rejected, units are
//! validated, and the effective (default-filled) settings can be echoed
//! back for reproducibility.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RydError};
use crate::species::SpinSpecies;

/// Comment line carried by every CSV artifact.
pub const CSV_VERSION_COMMENT: &str = "# rydspin v0.1";

/// Electric fields above this draw a warning: state mixing grows quickly
/// and the encoding assumptions degrade.
pub const E_DC_WARN_V_PER_CM: f64 = 20.0;

fn d_true() -> bool {
    true
}

/// The two spin-1/2 encodings available to a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    #[serde(default = "SpeciesConfig::d_cc_n")]
    pub cc_n: u32,
    #[serde(default)]
    pub cc_positive_m: bool,
    #[serde(default = "SpeciesConfig::d_ce_n")]
    pub ce_n: u32,
    #[serde(default = "SpeciesConfig::d_ce_step")]
    pub ce_step: u32,
    #[serde(default = "d_true")]
    pub ce_positive_m: bool,
}

impl SpeciesConfig {
    fn d_cc_n() -> u32 {
        55
    }
    fn d_ce_n() -> u32 {
        71
    }
    fn d_ce_step() -> u32 {
        2
    }

    pub fn cc(&self) -> SpinSpecies {
        SpinSpecies::cc(self.cc_n, self.cc_positive_m)
    }

    pub fn ce(&self) -> Result<SpinSpecies> {
        SpinSpecies::ce(self.ce_n, self.ce_step, self.ce_positive_m)
    }
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        Self {
            cc_n: Self::d_cc_n(),
            cc_positive_m: false,
            ce_n: Self::d_ce_n(),
            ce_step: Self::d_ce_step(),
            ce_positive_m: true,
        }
    }
}

/// Uniform polar-angle grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    #[serde(default)]
    pub start_rad: f64,
    #[serde(default = "ThetaGrid::d_stop")]
    pub stop_rad: f64,
    #[serde(default = "ThetaGrid::d_points")]
    pub points: usize,
}

impl ThetaGrid {
    fn d_stop() -> f64 {
        std::f64::consts::FRAC_PI_2
    }
    fn d_points() -> usize {
        50
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_rad];
        }
        let step = (self.stop_rad - self.start_rad) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.start_rad + i as f64 * step)
            .collect()
    }
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self {
            start_rad: 0.0,
            stop_rad: Self::d_stop(),
            points: Self::d_points(),
        }
    }
}

/// Magnetic-field policy: a fixed value or the interspecies resonance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "snake_case")]
pub enum BFieldMode {
    Fixed {
        gauss: f64,
    },
    /// Solve for the resonant field per electric-field value.
    Auto {
        #[serde(default)]
        min_gauss: f64,
        #[serde(default = "BFieldMode::d_max")]
        max_gauss: f64,
        /// Which sign-change bracket to refine when several exist.
        #[serde(default)]
        root_index: usize,
    },
}

impl BFieldMode {
    fn d_max() -> f64 {
        1000.0
    }
}

/// Which ordered species pair a scan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeciesPairKind {
    CcCc,
    CeCe,
    CcCe,
}

/// Configuration of a coefficient scan over (theta, e_dc).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub species_pair: SpeciesPairKind,
    #[serde(default)]
    pub species: SpeciesConfig,
    #[serde(default)]
    pub theta: ThetaGrid,
    #[serde(default)]
    pub phi_rad: f64,
    #[serde(default = "ScanConfig::d_distance")]
    pub distance_um: f64,
    pub e_dc_v_per_cm: Vec<f64>,
    pub b: BFieldMode,
    #[serde(default = "d_true")]
    pub include_diamagnetic: bool,
    /// Pair-basis controls.
    #[serde(default = "ScanConfig::d_n_pad")]
    pub n_pad: u32,
    #[serde(default = "ScanConfig::d_m_pad")]
    pub m_pad: i32,
    #[serde(default = "ScanConfig::d_cut")]
    pub delta_e_cut_ghz: f64,
    #[serde(default = "ScanConfig::d_m_window")]
    pub total_m_window: i32,
    /// Reduced basis used for the isolation metric (dense diagonalization).
    #[serde(default = "ScanConfig::d_kappa_cut")]
    pub kappa_delta_e_cut_ghz: f64,
    #[serde(default = "ScanConfig::d_kappa_m_pad")]
    pub kappa_m_pad: i32,
    pub output: String,
}

impl ScanConfig {
    fn d_distance() -> f64 {
        7.0
    }
    fn d_n_pad() -> u32 {
        crate::pair::DEFAULT_N_PAD
    }
    fn d_m_pad() -> i32 {
        crate::pair::DEFAULT_M_PAD
    }
    fn d_cut() -> f64 {
        crate::pair::DEFAULT_DELTA_E_CUT_GHZ
    }
    fn d_m_window() -> i32 {
        2
    }
    fn d_kappa_cut() -> f64 {
        8.0
    }
    fn d_kappa_m_pad() -> i32 {
        2
    }

    /// The ordered species of the scanned pair.
    pub fn pair_species(&self) -> Result<(SpinSpecies, SpinSpecies)> {
        let cc = self.species.cc();
        let ce = self.species.ce()?;
        Ok(match self.species_pair {
            SpeciesPairKind::CcCc => (cc, cc),
            SpeciesPairKind::CeCe => (ce, ce),
            SpeciesPairKind::CcCe => (cc, ce),
        })
    }

    /// Validate units and ranges; returns human-readable warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.distance_um > 0.0) {
            return Err(RydError::Config(format!(
                "distance_um must be positive, got {}",
                self.distance_um
            )));
        }
        if self.e_dc_v_per_cm.is_empty() {
            return Err(RydError::Config("e_dc_v_per_cm must be non-empty".into()));
        }
        if self.theta.points == 0 {
            return Err(RydError::Config("theta.points must be positive".into()));
        }
        let tau = 2.0 * std::f64::consts::PI;
        for &t in &[self.theta.start_rad, self.theta.stop_rad] {
            if !(0.0..tau).contains(&t) {
                return Err(RydError::Config(format!(
                    "theta grid bound {t} rad outside [0, 2*pi)"
                )));
            }
        }
        for &e in &self.e_dc_v_per_cm {
            if !(e >= 0.0) {
                return Err(RydError::Config(format!(
                    "e_dc_v_per_cm entries must be non-negative, got {e}"
                )));
            }
            if e > E_DC_WARN_V_PER_CM {
                warnings.push(format!(
                    "e_dc = {e} V/cm exceeds the {E_DC_WARN_V_PER_CM} V/cm envelope the \
                     encoding was designed for; state mixing may be strong"
                ));
            }
        }
        if let BFieldMode::Fixed { gauss } = self.b {
            if !(gauss >= 0.0) {
                return Err(RydError::Config(format!(
                    "b.gauss must be non-negative, got {gauss}"
                )));
            }
        }
        if self.output.is_empty() {
            return Err(RydError::Config("output path must be non-empty".into()));
        }
        Ok(warnings)
    }

    /// The effective settings after default filling, as TOML.
    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scan config serializes")
    }
}

/// Initial product state for a simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    /// Sites prepared spin-up; all others start spin-down.
    pub up_sites: Vec<usize>,
}

/// Uniform time grid, seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start_s: f64,
    pub stop_s: f64,
    #[serde(default = "TimeGrid::d_points")]
    pub points: usize,
}

impl TimeGrid {
    fn d_points() -> usize {
        200
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_s];
        }
        let step = (self.stop_s - self.start_s) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.start_s + i as f64 * step)
            .collect()
    }
}

/// Configuration of a small-array dynamics run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Path to a geometry file (site and species listing).
    pub geometry_file: String,
    pub e_dc_v_per_cm: f64,
    pub b: BFieldMode,
    #[serde(default = "d_true")]
    pub include_diamagnetic: bool,
    pub time: TimeGrid,
    pub initial: InitialState,
    /// Two-point correlators to record.
    #[serde(default)]
    pub correlator_pairs: Vec<(usize, usize)>,
    /// Subtract the large one-body splittings before evolving.
    #[serde(default = "d_true")]
    pub rotating_frame: bool,
    #[serde(default)]
    pub include_single_raise: bool,
    #[serde(default)]
    pub include_double_raise: bool,
    #[serde(default)]
    pub include_conditioned_raise: bool,
    #[serde(default = "ScanConfig::d_n_pad")]
    pub n_pad: u32,
    #[serde(default = "ScanConfig::d_m_pad")]
    pub m_pad: i32,
    #[serde(default = "ScanConfig::d_cut")]
    pub delta_e_cut_ghz: f64,
    pub output: String,
    #[serde(default)]
    pub correlators_output: Option<String>,
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.time.points == 0 {
            return Err(RydError::Config("time.points must be positive".into()));
        }
        if !(self.time.stop_s > self.time.start_s) && self.time.points > 1 {
            return Err(RydError::Config(
                "time.stop_s must exceed time.start_s".into(),
            ));
        }
        if self.e_dc_v_per_cm > E_DC_WARN_V_PER_CM {
            warnings.push(format!(
                "e_dc = {} V/cm exceeds the {E_DC_WARN_V_PER_CM} V/cm envelope",
                self.e_dc_v_per_cm
            ));
        }
        if self.output.is_empty() {
            return Err(RydError::Config("output path must be non-empty".into()));
        }
        Ok(warnings)
    }

    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(self).expect("simulate config serializes")
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| RydError::Config(format!("{e}")))
}

/// Parse and validate a scan configuration file.
pub fn parse_scan_config(path: &Path) -> Result<(ScanConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ScanConfig = parse_toml(&text)?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

/// Parse and validate a simulation configuration file.
pub fn parse_simulate_config(path: &Path) -> Result<(SimulateConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    let cfg: SimulateConfig = parse_toml(&text)?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}
