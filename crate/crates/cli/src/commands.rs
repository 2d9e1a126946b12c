//! One function per subcommand. Each builds its tables in memory (sweeps
//! fan out across threads, index order preserved), then writes a CSV and a
//! JSON sidecar single-threaded, in a fixed order, into the output
//! directory. Nothing printed or written depends on wall-clock time or
//! host identity, so reruns reproduce every artifact byte for byte.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use ring_noon_core::eigen::solve_lowest;
use ring_noon_core::fitting::linear_fit_through_origin;
use ring_noon_core::fock::BasisMap;
use ring_noon_core::hamiltonian::build_h0;
use ring_noon_core::protocols::{precision_measurement, resonance_scan, two_time_protocol};
use ring_noon_core::spectra::{
    analytic_drive_coupling, coupling_sweep, drive_coupling, gap_sweep, ground_state_pair,
    GroundStateReport,
};

use crate::checks::{self, CheckResult};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::sidecar;
use crate::table::{Cell, Table};

fn output_paths(out: &Path, name: &str) -> Result<(PathBuf, PathBuf), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Run(format!("creating {}: {e}", out.display())))?;
    Ok((out.join(format!("{name}.csv")), out.join(format!("{name}.json"))))
}

fn write_outputs<T: Serialize>(
    out: &Path,
    name: &str,
    table: &Table,
    cfg: &RunConfig,
    report: &T,
) -> Result<(), CliError> {
    let (csv, json) = output_paths(out, name)?;
    table.write(&csv)?;
    sidecar::write(&json, name, cfg, report)?;
    println!("wrote {} ({} rows)", csv.display(), table.n_rows());
    println!("wrote {}", json.display());
    Ok(())
}

/// Fock decomposition of the ground state, heaviest components first.
pub fn groundstate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let pair = ground_state_pair(&basis, &params, &cfg.eigen_options())?;
    let report = GroundStateReport::from_pair(&basis, &params, &pair)?;
    let mut weights: Vec<(usize, f64)> =
        pair.ground.iter().map(|c| c.norm_sqr()).enumerate().collect();
    weights.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("finite probabilities").then(a.0.cmp(&b.0))
    });
    let mut table = Table::new(["rank", "n_minus", "n_zero", "n_plus", "probability"]);
    for (rank, (index, probability)) in weights.iter().enumerate() {
        let s = basis.state(*index);
        table.push(vec![
            Cell::Int(rank as i64 + 1),
            Cell::Int(i64::from(s.n_minus)),
            Cell::Int(i64::from(s.n_zero)),
            Cell::Int(i64::from(s.n_plus)),
            Cell::Float(*probability),
        ])?;
    }
    write_outputs(out, "groundstate", &table, cfg, &report)
}

#[derive(Debug, Serialize)]
struct EnergiesSummary {
    n_points: usize,
    n_levels: usize,
    min_pair_gap: Option<f64>,
    omega_at_min_gap: Option<f64>,
}

/// Lowest eigenvalues along the rotation-phase grid.
pub fn energies(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let eigen = cfg.eigen_options();
    let omegas = cfg.omega_grid()?;
    let rows: Result<Vec<Vec<f64>>, ring_noon_core::Error> = omegas
        .par_iter()
        .map(|&omega| {
            let h = build_h0(&basis, &params.with_omega(omega))?;
            Ok(solve_lowest(&h, &eigen)?.eigenvalues)
        })
        .collect();
    let rows = rows?;
    let k = eigen.n_lowest.min(basis.dim());
    let mut columns = vec!["omega".to_string()];
    columns.extend((0..k).map(|i| format!("e{i}")));
    let mut table = Table::new(columns);
    let mut min_pair_gap: Option<(f64, f64)> = None;
    for (omega, levels) in omegas.iter().zip(&rows) {
        let mut cells = vec![Cell::Float(*omega)];
        cells.extend(levels.iter().take(k).map(|&e| Cell::Float(e)));
        table.push(cells)?;
        if levels.len() >= 2 {
            let gap = levels[1] - levels[0];
            if min_pair_gap.map_or(true, |(g, _)| gap < g) {
                min_pair_gap = Some((gap, *omega));
            }
        }
    }
    let summary = EnergiesSummary {
        n_points: omegas.len(),
        n_levels: k,
        min_pair_gap: min_pair_gap.map(|(g, _)| g),
        omega_at_min_gap: min_pair_gap.map(|(_, w)| w),
    };
    write_outputs(out, "energies", &table, cfg, &summary)
}

#[derive(Debug, Serialize)]
struct GapSweepSummary {
    n_points: usize,
    min_gap: f64,
    omega_at_min_gap: f64,
    degenerate_points: usize,
}

/// Splitting of the lowest pair along the rotation-phase grid.
pub fn gap_sweep_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let omegas = cfg.omega_grid()?;
    let points = gap_sweep(&basis, &params, &omegas, &cfg.eigen_options())?;
    let mut table = Table::new(["omega", "e0", "e1", "gap", "degenerate"]);
    for p in &points {
        table.push(vec![
            Cell::Float(p.omega),
            Cell::Float(p.e0),
            Cell::Float(p.e1),
            Cell::Float(p.gap),
            Cell::Bool(p.degenerate),
        ])?;
    }
    let minimum = points
        .iter()
        .fold(None::<(f64, f64)>, |best, p| match best {
            Some((g, _)) if g <= p.gap => best,
            _ => Some((p.gap, p.omega)),
        })
        .expect("grid has at least 2 points");
    let summary = GapSweepSummary {
        n_points: points.len(),
        min_gap: minimum.0,
        omega_at_min_gap: minimum.1,
        degenerate_points: points.iter().filter(|p| p.degenerate).count(),
    };
    write_outputs(out, "gap-sweep", &table, cfg, &summary)
}

#[derive(Debug, Serialize)]
struct CouplingSummary {
    amplitude: f64,
    n_slope: f64,
    n_r_squared: f64,
    coupling_at_crossing: f64,
    predicted_at_crossing: f64,
    flank_offset: f64,
    coupling_at_flank: f64,
    crossing_to_flank_ratio: f64,
}

/// |V01| along the phase grid at fixed N and across N at the configured
/// phase, plus the closed-form prediction.
pub fn coupling_sweep_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let eigen = cfg.eigen_options();
    let amplitude = cfg.drive.amplitude;
    let omegas = cfg.omega_grid()?;
    let omega_rows: Result<Vec<f64>, ring_noon_core::Error> = omegas
        .par_iter()
        .map(|&omega| drive_coupling(&basis, &params.with_omega(omega), amplitude, &eigen))
        .collect();
    let omega_rows = omega_rows?;
    let predicted = analytic_drive_coupling(&params, amplitude);
    let n_points = coupling_sweep(&params, &cfg.grid.n_values, amplitude, &eigen)?;

    let mut table = Table::new(["scan", "x", "dim", "coupling", "predicted"]);
    for (omega, coupling) in omegas.iter().zip(&omega_rows) {
        table.push(vec![
            Cell::Text("omega".into()),
            Cell::Float(*omega),
            Cell::Int(basis.dim() as i64),
            Cell::Float(*coupling),
            Cell::Float(predicted),
        ])?;
    }
    for p in &n_points {
        table.push(vec![
            Cell::Text("n".into()),
            Cell::Float(f64::from(p.n)),
            Cell::Int(p.dim as i64),
            Cell::Float(p.coupling),
            Cell::Float(p.predicted),
        ])?;
    }

    let xs: Vec<f64> = n_points.iter().map(|p| f64::from(p.n)).collect();
    let ys: Vec<f64> = n_points.iter().map(|p| p.coupling).collect();
    let (n_slope, n_r_squared) = linear_fit_through_origin(&xs, &ys)?;
    let at_crossing = drive_coupling(&basis, &params.with_omega(PI), amplitude, &eigen)?;
    let flank_offset = cfg.coupling.flank_offset;
    let at_flank =
        drive_coupling(&basis, &params.with_omega(PI - flank_offset), amplitude, &eigen)?;
    let summary = CouplingSummary {
        amplitude,
        n_slope,
        n_r_squared,
        coupling_at_crossing: at_crossing,
        predicted_at_crossing: predicted,
        flank_offset,
        coupling_at_flank: at_flank,
        crossing_to_flank_ratio: at_crossing / at_flank,
    };
    write_outputs(out, "coupling-sweep", &table, cfg, &summary)
}

/// Transfer-vs-frequency scan around the crossing gap plus the on-resonance
/// Rabi check at full amplitude.
pub fn resonance_scan_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let report = resonance_scan(&basis, &params, &cfg.resonance_config())?;
    let mut table = Table::new(["series", "x", "y"]);
    for (f, t) in report.frequencies.iter().zip(&report.transfers) {
        table.push(vec![Cell::Text("scan".into()), Cell::Float(*f), Cell::Float(*t)])?;
    }
    for (time, t) in report.full_times.iter().zip(&report.full_transfers) {
        table.push(vec![Cell::Text("rabi".into()), Cell::Float(*time), Cell::Float(*t)])?;
    }
    write_outputs(out, "resonance-scan", &table, cfg, &report)
}

/// Hold-time fringe of the branch splitting and its fitted frequency.
pub fn precision(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let report = precision_measurement(&basis, &params, &cfg.precision_config())?;
    let mut table = Table::new(["time", "population"]);
    for (time, p) in report.times.iter().zip(&report.populations) {
        table.push(vec![Cell::Float(*time), Cell::Float(*p)])?;
    }
    write_outputs(out, "precision", &table, cfg, &report)
}

/// Hold/park population surface against the closed two-time form.
pub fn two_time(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = cfg.model_params()?;
    let basis = BasisMap::new(params.n)?;
    let report = two_time_protocol(&basis, &params, &cfg.two_time_config())?;
    let mut table = Table::new(["t1", "t2", "population"]);
    for (a, t1) in report.t1.iter().enumerate() {
        for (b, t2) in report.t2.iter().enumerate() {
            table.push(vec![
                Cell::Float(*t1),
                Cell::Float(*t2),
                Cell::Float(report.surface[a][b]),
            ])?;
        }
    }
    write_outputs(out, "two-time", &table, cfg, &report)
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    all_passed: bool,
    checks: Vec<CheckResult>,
}

/// Run the validation suite, record it, and fail the process if any check
/// fails (artifacts are written first either way).
pub fn validate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let results = checks::run_all()?;
    let mut table = Table::new(["check", "value", "bound", "pass"]);
    for c in &results {
        table.push(vec![
            Cell::Text(c.name.into()),
            Cell::Float(c.value),
            Cell::Float(c.bound),
            Cell::Bool(c.pass),
        ])?;
    }
    let passed = results.iter().filter(|c| c.pass).count();
    let report =
        ValidateReport { all_passed: passed == results.len(), checks: results.clone() };
    write_outputs(out, "validate", &table, cfg, &report)?;
    for c in &results {
        let status = if c.pass { "ok  " } else { "FAIL" };
        match &c.note {
            Some(note) => {
                println!("{status} {:<32} {:.3e} <= {:.1e}  ({note})", c.name, c.value, c.bound)
            }
            None => println!("{status} {:<32} {:.3e} <= {:.1e}", c.name, c.value, c.bound),
        }
    }
    println!("{passed} of {} checks passed", results.len());
    if passed < results.len() {
        return Err(CliError::Run(format!(
            "{} validation checks failed",
            results.len() - passed
        )));
    }
    Ok(())
}
