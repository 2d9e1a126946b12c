//! Run configuration: a strict TOML surface over the engine's options.
//!
//! Every section and key is optional; anything missing takes the defaults
//! below, so an absent file, an empty file, and `--config` omitted all mean
//! the same run. Unknown keys are rejected rather than ignored: a typo in a
//! tolerance must fail loudly, not silently fall back to the default.
//! `--set key=value` overrides are spliced into the parsed TOML tree before
//! it is typed, so they pass through exactly the same checks.
//!
//! The sections mirror the engine's option structs one to one, except that
//! sweep geometry ([grid]) and the drive amplitude ([drive]) live in their
//! own sections because several subcommands share them.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ring_noon_core::dynamics::{PropagationOptions, RampSchedule, StepMethod};
use ring_noon_core::eigen::EigenOptions;
use ring_noon_core::hamiltonian::ModelParams;
use ring_noon_core::protocols::{
    PrecisionConfig, ReadoutMode, ReadoutSpec, ResonanceScanConfig, TwoTimeConfig,
};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub eigen: EigenSection,
    pub propagation: PropagationSection,
    pub grid: GridSection,
    pub drive: DriveSection,
    pub coupling: CouplingSection,
    pub resonance: ResonanceSection,
    pub readout: ReadoutSection,
    pub precision: PrecisionSection,
    pub two_time: TwoTimeSection,
}

/// Physical parameters N, U, J, dJ, Omega.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n: u32,
    pub u: f64,
    pub j: f64,
    pub delta_j: f64,
    pub omega: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { n: 3, u: 0.05, j: 1.0, delta_j: 0.01, omega: PI }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSection {
    pub n_lowest: usize,
    pub force_iterative: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_subspace: usize,
    pub seed: u64,
}

impl Default for EigenSection {
    fn default() -> Self {
        let o = EigenOptions::default();
        EigenSection {
            n_lowest: o.n_lowest,
            force_iterative: o.force_iterative,
            tolerance: o.tolerance,
            max_iterations: o.max_iterations,
            max_subspace: o.max_subspace,
            seed: o.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub dt_max: f64,
    pub dt_init: f64,
    pub local_tol: f64,
    pub dt_min: f64,
    pub norm_drift_bound: f64,
    pub max_steps: usize,
    pub method: MethodName,
}

impl Default for PropagationSection {
    fn default() -> Self {
        let o = PropagationOptions::default();
        PropagationSection {
            dt_max: o.dt_max,
            dt_init: o.dt_init,
            local_tol: o.local_tol,
            dt_min: o.dt_min,
            norm_drift_bound: o.norm_drift_bound,
            max_steps: o.max_steps,
            method: MethodName::Auto,
        }
    }
}

/// Integrator selection, spelled in kebab-case on the TOML side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Auto,
    MidpointExact,
    SplitStep,
}

impl From<MethodName> for StepMethod {
    fn from(m: MethodName) -> StepMethod {
        match m {
            MethodName::Auto => StepMethod::Auto,
            MethodName::MidpointExact => StepMethod::MidpointExact,
            MethodName::SplitStep => StepMethod::SplitStep,
        }
    }
}

/// Rotation-phase sweep geometry and the particle numbers of N scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_points: usize,
    pub n_values: Vec<u32>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            omega_min: 0.0,
            omega_max: 2.0 * PI,
            omega_points: 201,
            n_values: (3..=12).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub amplitude: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection { amplitude: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    /// Offset of the off-crossing comparison point Omega = pi - flank_offset.
    pub flank_offset: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection { flank_offset: 0.6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSection {
    pub weak_probe: bool,
    pub coupling_fraction: f64,
    pub grid_halfwidth: u32,
    pub step_fraction: f64,
    pub n_times: usize,
    pub full_check_times: usize,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        let o = ResonanceScanConfig::default();
        ResonanceSection {
            weak_probe: o.weak_probe,
            coupling_fraction: o.coupling_fraction,
            grid_halfwidth: o.grid_halfwidth,
            step_fraction: o.step_fraction,
            n_times: o.n_times,
            full_check_times: o.full_check_times,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutSection {
    pub mode: ReadoutModeName,
    /// Omitted: the smallest offset clearing the branch-purity threshold.
    pub ramp_delta: Option<f64>,
    pub ramp_duration: f64,
    pub schedule: ScheduleName,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        let s = ReadoutSpec::default();
        ReadoutSection {
            mode: ReadoutModeName::Ideal,
            ramp_delta: s.ramp_delta,
            ramp_duration: s.ramp_duration,
            schedule: ScheduleName::Smoothstep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutModeName {
    Ideal,
    Ramp,
}

impl From<ReadoutModeName> for ReadoutMode {
    fn from(m: ReadoutModeName) -> ReadoutMode {
        match m {
            ReadoutModeName::Ideal => ReadoutMode::Ideal,
            ReadoutModeName::Ramp => ReadoutMode::Ramp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    Linear,
    Smoothstep,
}

impl From<ScheduleName> for RampSchedule {
    fn from(s: ScheduleName) -> RampSchedule {
        match s {
            ScheduleName::Linear => RampSchedule::Linear,
            ScheduleName::Smoothstep => RampSchedule::Smoothstep,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecisionSection {
    pub delta_omega: f64,
    pub n_times: usize,
    pub span_periods: f64,
    pub grid_points: usize,
    /// Omitted: exact populations instead of simulated binomial sampling.
    pub shots: Option<u32>,
    pub seed: u64,
}

impl Default for PrecisionSection {
    fn default() -> Self {
        let c = PrecisionConfig::default();
        PrecisionSection {
            delta_omega: c.delta_omega,
            n_times: c.n_times,
            span_periods: c.span_periods,
            grid_points: c.grid_points,
            shots: c.shots,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoTimeSection {
    pub delta_omega: f64,
    pub n_t1: usize,
    pub n_t2: usize,
    pub span_factor: f64,
    pub grid_points: usize,
}

impl Default for TwoTimeSection {
    fn default() -> Self {
        let c = TwoTimeConfig::default();
        TwoTimeSection {
            delta_omega: c.delta_omega,
            n_t1: c.n_t1,
            n_t2: c.n_t2,
            span_factor: c.span_factor,
            grid_points: c.grid_points,
        }
    }
}

/// Parse the file (when given), splice the `--set` overrides in, and type
/// the result strictly.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut root = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("parsing {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for spec in sets {
        apply_set(&mut root, spec)?;
    }
    RunConfig::deserialize(toml::Value::Table(root)).map_err(|e| CliError::Config(e.to_string()))
}

/// Write one `section.key=value` override into the TOML tree, creating
/// intermediate tables as needed.
fn apply_set(root: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set wants key=value, got `{spec}`")))?;
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|part| part.is_empty()) {
        return Err(CliError::Config(format!("--set key `{key}` has an empty path segment")));
    }
    let mut node = root;
    for part in &path[..path.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Config(format!("--set {key}: `{part}` is not a table"))
            })?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Type a raw override through the TOML grammar so numbers, booleans and
/// arrays come out typed; anything unparseable is taken as a bare string,
/// which lets enum values be written without quotes.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        Ok(ModelParams::new(m.n, m.u, m.j, m.delta_j, m.omega)?)
    }

    pub fn eigen_options(&self) -> EigenOptions {
        let e = &self.eigen;
        EigenOptions {
            n_lowest: e.n_lowest,
            force_iterative: e.force_iterative,
            tolerance: e.tolerance,
            max_iterations: e.max_iterations,
            max_subspace: e.max_subspace,
            seed: e.seed,
        }
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        let p = &self.propagation;
        PropagationOptions {
            dt_max: p.dt_max,
            dt_init: p.dt_init,
            local_tol: p.local_tol,
            dt_min: p.dt_min,
            norm_drift_bound: p.norm_drift_bound,
            max_steps: p.max_steps,
            method: p.method.into(),
        }
    }

    pub fn readout_spec(&self) -> ReadoutSpec {
        let r = &self.readout;
        ReadoutSpec {
            mode: r.mode.into(),
            ramp_delta: r.ramp_delta,
            ramp_duration: r.ramp_duration,
            schedule: r.schedule.into(),
        }
    }

    /// The scan keeps its own integrator tolerances (tuned in the engine
    /// defaults) because its cost profile differs from the readout ramps
    /// the [propagation] section governs.
    pub fn resonance_config(&self) -> ResonanceScanConfig {
        let r = &self.resonance;
        ResonanceScanConfig {
            amplitude: self.drive.amplitude,
            weak_probe: r.weak_probe,
            coupling_fraction: r.coupling_fraction,
            grid_halfwidth: r.grid_halfwidth,
            step_fraction: r.step_fraction,
            n_times: r.n_times,
            full_check_times: r.full_check_times,
            eigen: self.eigen_options(),
            ..ResonanceScanConfig::default()
        }
    }

    pub fn precision_config(&self) -> PrecisionConfig {
        let p = &self.precision;
        PrecisionConfig {
            delta_omega: p.delta_omega,
            n_times: p.n_times,
            span_periods: p.span_periods,
            grid_points: p.grid_points,
            shots: p.shots,
            seed: p.seed,
            readout: self.readout_spec(),
            eigen: self.eigen_options(),
            propagation: self.propagation_options(),
        }
    }

    pub fn two_time_config(&self) -> TwoTimeConfig {
        let t = &self.two_time;
        TwoTimeConfig {
            delta_omega: t.delta_omega,
            n_t1: t.n_t1,
            n_t2: t.n_t2,
            span_factor: t.span_factor,
            grid_points: t.grid_points,
            eigen: self.eigen_options(),
        }
    }

    /// Rotation-phase grid. Interior points use the ratio form
    /// min + (max - min) * i/(points - 1) so symmetric grids land on their
    /// midpoint exactly: the default [0, 2 pi] grid contains pi bitwise.
    pub fn omega_grid(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        if g.omega_points < 2 {
            return Err(CliError::Config(format!(
                "grid.omega_points must be at least 2, got {}",
                g.omega_points
            )));
        }
        if !(g.omega_min.is_finite() && g.omega_max.is_finite() && g.omega_max > g.omega_min) {
            return Err(CliError::Config(format!(
                "grid wants finite omega_min < omega_max, got [{}, {}]",
                g.omega_min, g.omega_max
            )));
        }
        let span = g.omega_max - g.omega_min;
        let last = (g.omega_points - 1) as f64;
        Ok((0..g.omega_points)
            .map(|i| g.omega_min + span * (i as f64 / last))
            .collect())
    }
}
