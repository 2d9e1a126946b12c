//! Self-contained validation suite behind `ring-noon validate`.
//!
//! Every check pins its own small-N parameter set: the bounds below mean
//! something only in the regimes they were tuned for, so the suite ignores
//! the run configuration (which still chooses the output directory). A
//! check passes when its deviation is finite and at most the bound; a hard
//! solver failure aborts the whole run instead of masquerading as a value.
//!
//! Structural invariants covered: hermiticity of the generated operators,
//! 2 pi periodicity and mirror symmetry of the spectrum, exchange balance
//! of the crossing ground state, the bosonic ladder algebra, time-reversal
//! of the propagator, the drive-as-derivative identity, norm preservation
//! under driving, agreement of the full dynamics with the few-level
//! rotating-wave reduction, the closed-form two-time surface after a
//! sudden switch, cancellation of the interaction shift between the two
//! branch states, and the linear-in-N scaling of the fitted splitting.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ring_noon_core::dynamics::{
    evolve_driven, DrivenHamiltonian, PropagationOptions, StaticPropagator,
};
use ring_noon_core::eigen::{dense_eigh_real, EigenOptions};
use ring_noon_core::fitting::linear_fit_through_origin;
use ring_noon_core::fock::{apply_lower, apply_raise, BasisMap, Mode, OccupationState};
use ring_noon_core::hamiltonian::{build_drive, build_h0, ModelParams};
use ring_noon_core::operator::HermitianOperator;
use ring_noon_core::protocols::{
    precision_measurement, rwa_comparison, two_time_protocol, PrecisionConfig,
    RwaComparisonConfig, TwoTimeConfig,
};
use ring_noon_core::spectra::{ground_state_pair, ground_state_report};
use ring_noon_core::state::symmetric_condensate;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    /// Measured deviation; smaller is better.
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub note: Option<String>,
}

fn graded(name: &'static str, value: f64, bound: f64) -> CheckResult {
    CheckResult { name, value, bound, pass: value.is_finite() && value <= bound, note: None }
}

/// Run the whole suite in a fixed order.
pub fn run_all() -> Result<Vec<CheckResult>, CliError> {
    Ok(vec![
        hermiticity()?,
        spectrum_periodicity()?,
        mirror_symmetry()?,
        exchange_crossing_balance()?,
        ladder_algebra()?,
        time_reversal()?,
        drive_derivative()?,
        unitarity()?,
        rwa_agreement()?,
        sudden_switch_surface()?,
        interaction_shift_cancellation()?,
        interaction_fit_stability()?,
        heisenberg_scaling()?,
    ])
}

/// Max hermiticity defect of the generated operators, relative to their
/// largest row sum.
pub fn hermiticity() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(6)?;
    let params = ModelParams::new(6, 0.21, 1.0, 0.07, 1.3)?;
    let h = build_h0(&basis, &params)?;
    let v = build_drive(&basis, &params, 0.05)?;
    let value = (h.hermiticity_deviation() / h.inf_norm())
        .max(v.hermiticity_deviation() / v.inf_norm());
    Ok(graded("hermiticity", value, 1e-14))
}

/// The spectrum is 2 pi periodic in the rotation phase even though the
/// matrix entries are not (the mode angles shift by 2 pi / 3).
pub fn spectrum_periodicity() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(5)?;
    let base = ModelParams::new(5, 0.05, 1.0, 0.01, 0.0)?;
    let mut value = 0.0f64;
    for omega in [0.7, 2.9] {
        let (e1, _) = dense_eigh_real(&build_h0(&basis, &base.with_omega(omega))?)?;
        let (e2, _) = dense_eigh_real(&build_h0(&basis, &base.with_omega(omega + 2.0 * PI))?)?;
        for i in 0..e1.len() {
            value = value.max((e1[i] - e2[i]).abs());
        }
    }
    Ok(graded("spectrum-periodicity", value, 1e-10))
}

/// H(-Omega) = M H(Omega) M entrywise, with M the k -> -k relabeling.
pub fn mirror_symmetry() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(4)?;
    let params = ModelParams::new(4, 0.2, 1.0, 0.15, 1.234)?;
    let h = build_h0(&basis, &params)?;
    let hm = build_h0(&basis, &params.with_omega(-params.omega))?;
    let d = h.dense().expect("small bases stay dense");
    let dm = hm.dense().expect("small bases stay dense");
    let mut value = 0.0f64;
    for (i, si) in basis.states().iter().enumerate() {
        let fi = basis.index_of(&si.mirror()).expect("mirror keeps the sector");
        for (j, sj) in basis.states().iter().enumerate() {
            let fj = basis.index_of(&sj.mirror()).expect("mirror keeps the sector");
            value = value.max((d[(i, j)] - dm[(fi, fj)]).norm());
        }
    }
    Ok(graded("mirror-symmetry", value, 1e-13))
}

/// At the crossing the symmetrized ground state carries the two extreme
/// Fock states with exactly equal weight.
pub fn exchange_crossing_balance() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(8)?;
    let params = ModelParams::new(8, 0.08, 1.0, 0.004, PI)?;
    let r = ground_state_report(&basis, &params, &EigenOptions::lowest(2))?;
    let value = (r.population_zero_branch - r.population_plus_branch).abs();
    let mut c = graded("exchange-crossing-balance", value, 1e-12);
    c.note = Some(format!(
        "branch populations {:.6} and {:.6}",
        r.population_zero_branch, r.population_plus_branch
    ));
    Ok(c)
}

/// sqrt(n) ladder amplitudes: lowering then raising multiplies to n and
/// returns to the same state; raising then lowering gives n + 1.
pub fn ladder_algebra() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(4)?;
    let mut value = 0.0f64;
    for s in basis.states() {
        for mode in Mode::ALL {
            let n = f64::from(s.occupation(mode));
            match apply_lower(s, mode) {
                Some((down, lowered)) => {
                    let (up, back) = apply_raise(&lowered, mode);
                    if back != *s {
                        return Err(CliError::Run(
                            "ladder round trip left the starting state".into(),
                        ));
                    }
                    value = value.max((down * up - n).abs());
                }
                None => {
                    if n != 0.0 {
                        return Err(CliError::Run(
                            "lowering annihilated an occupied mode".into(),
                        ));
                    }
                }
            }
            let (up, raised) = apply_raise(s, mode);
            let (down, back) = apply_lower(&raised, mode).expect("raised mode is occupied");
            if back != *s {
                return Err(CliError::Run("ladder round trip left the starting state".into()));
            }
            value = value.max((up * down - (n + 1.0)).abs());
        }
    }
    Ok(graded("ladder-algebra", value, 1e-12))
}

/// The Hamiltonian is real in the Fock basis, so conjugation reverses time:
/// conj(U(t) psi) = U(-t) conj(psi), and U(-t) undoes U(t).
pub fn time_reversal() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(3)?;
    let params = ModelParams::new(3, 0.05, 1.0, 0.01, PI - 0.6)?;
    let prop = StaticPropagator::new(&build_h0(&basis, &params)?)?;
    let psi0 = symmetric_condensate(&basis)?;
    let t = 37.0;
    let fwd = prop.evolve(&psi0, t);
    let back = prop.evolve(&fwd, -t);
    let round_trip = (&back - &psi0).norm();
    // psi0 is real, so conj(U(t) psi0) must equal U(-t) psi0.
    let conj_fwd = fwd.map(|z| z.conj());
    let reversed = prop.evolve(&psi0, -t);
    let value = round_trip.max((&conj_fwd - &reversed).norm());
    Ok(graded("time-reversal", value, 1e-10))
}

/// Max-entry relative deviation between the analytic drive and the
/// amplitude-scaled central difference of H0 in the rotation phase.
fn fd_drive_deviation(
    drive: &HermitianOperator,
    h_plus: &HermitianOperator,
    h_minus: &HermitianOperator,
    scale: f64,
) -> f64 {
    let v = drive.dense().expect("small bases stay dense");
    let p = h_plus.dense().expect("small bases stay dense");
    let m = h_minus.dense().expect("small bases stay dense");
    let dim = drive.dim();
    let mut dev = 0.0f64;
    let mut magnitude = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let fd = (p[(i, j)] - m[(i, j)]) * scale;
            dev = dev.max((fd - v[(i, j)]).norm());
            magnitude = magnitude.max(v[(i, j)].norm());
        }
    }
    dev / magnitude
}

/// The drive equals the amplitude times the rotation-phase derivative of
/// H0, checked against a central difference on seeded random parameters.
pub fn drive_derivative() -> Result<CheckResult, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
    let h = 1e-6;
    let mut value = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2u32..=6);
        let params = ModelParams::new(
            n,
            rng.gen_range(0.0..0.4),
            rng.gen_range(0.5..1.5),
            rng.gen_range(0.0..0.3),
            rng.gen_range(0.0..2.0 * PI),
        )?;
        let amplitude = rng.gen_range(0.01..0.29);
        let basis = BasisMap::new(n)?;
        let drive = build_drive(&basis, &params, amplitude)?;
        let h_plus = build_h0(&basis, &params.with_omega(params.omega + h))?;
        let h_minus = build_h0(&basis, &params.with_omega(params.omega - h))?;
        value = value.max(fd_drive_deviation(&drive, &h_plus, &h_minus, amplitude / (2.0 * h)));
    }
    Ok(graded("drive-derivative", value, 1e-7))
}

/// Norm drift of a resonantly driven propagation stays inside the bound the
/// integrator promises.
pub fn unitarity() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(3)?;
    let params = ModelParams::new(3, 0.05, 1.0, 0.01, PI - 0.6)?;
    let pair = ground_state_pair(&basis, &params, &EigenOptions::lowest(2))?;
    let h0 = build_h0(&basis, &params)?;
    let drive = build_drive(&basis, &params, 0.05)?;
    let driven = DrivenHamiltonian { h0: &h0, drive: &drive, frequency: pair.gap };
    let opts = PropagationOptions { local_tol: 1e-9, dt_max: 5.0, ..Default::default() };
    let res = evolve_driven(&driven, &pair.ground, &[125.0, 500.0], &opts)?;
    Ok(graded("unitarity", res.max_norm_drift, 1e-8))
}

/// RMS distance between the driven full dynamics and the rotating-wave
/// few-level reduction on the crossing flank, where the level structure is
/// closest to generic.
pub fn rwa_agreement() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(3)?;
    let params = ModelParams::new(3, 0.05, 1.0, 0.01, PI - 0.6)?;
    let report = rwa_comparison(&basis, &params, &RwaComparisonConfig::default())?;
    let mut c = graded("rwa-agreement", report.rms, 0.05);
    c.note = Some(format!("peak transfer {:.4}", report.peak_transfer));
    Ok(c)
}

/// After the sudden switch back to the crossing, the two-time surface must
/// follow the closed form wherever the state stays inside the two-branch
/// manifold.
pub fn sudden_switch_surface() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(3)?;
    let params = ModelParams::new(3, 0.08, 1.0, 0.004, PI)?;
    let cfg = TwoTimeConfig::default();
    let report = two_time_protocol(&basis, &params, &cfg)?;
    let value = report.model_rms_low_leakage.ok_or_else(|| {
        CliError::Run("no two-time cell stayed inside the two-branch manifold".into())
    })?;
    let mut c = graded("sudden-switch-surface", value, 0.02);
    c.note = Some(format!(
        "{} of {} cells in the manifold; max leakage {:.4}",
        report.low_leakage_cells,
        cfg.n_t1 * cfg.n_t2,
        report.leakage_max
    ));
    Ok(c)
}

/// The interaction shifts both branch Fock states identically, so their
/// diagonal splitting is independent of U.
pub fn interaction_shift_cancellation() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(4)?;
    let i0 = basis.index_of(&OccupationState::new(0, 4, 0)).expect("in basis");
    let i1 = basis.index_of(&OccupationState::new(0, 0, 4)).expect("in basis");
    let mut splits = Vec::new();
    for u in [0.06, 0.08, 0.10] {
        let params = ModelParams::new(4, u, 1.0, 0.004, PI + 0.1)?;
        let d = build_h0(&basis, &params)?.diag_real();
        splits.push(d[i1] - d[i0]);
    }
    let value = splits.iter().map(|s| (s - splits[0]).abs()).fold(0.0, f64::max);
    Ok(graded("interaction-shift-cancellation", value, 1e-12))
}

/// The fitted beat frequency of the full protocol inherits that
/// cancellation: doubling down on U barely moves it.
pub fn interaction_fit_stability() -> Result<CheckResult, CliError> {
    let basis = BasisMap::new(4)?;
    let cfg = PrecisionConfig { delta_omega: 0.1, ..PrecisionConfig::default() };
    let mut fits = Vec::new();
    for u in [0.06, 0.08] {
        let params = ModelParams::new(4, u, 1.0, 0.004, PI)?;
        fits.push(precision_measurement(&basis, &params, &cfg)?.delta_e_fit.abs());
    }
    let value = (fits[1] - fits[0]).abs() / fits[0];
    Ok(graded("interaction-fit-stability", value, 0.01))
}

/// The fitted splitting grows linearly in N: the through-origin fit over
/// N = 3..8 leaves almost nothing unexplained.
pub fn heisenberg_scaling() -> Result<CheckResult, CliError> {
    let cfg = PrecisionConfig { delta_omega: 0.1, ..PrecisionConfig::default() };
    let mut ns = Vec::new();
    let mut fits = Vec::new();
    for n in 3..=8u32 {
        let basis = BasisMap::new(n)?;
        let params = ModelParams::new(n, 0.08, 1.0, 0.004, PI)?;
        ns.push(f64::from(n));
        fits.push(precision_measurement(&basis, &params, &cfg)?.delta_e_fit.abs());
    }
    let (slope, r_squared) = linear_fit_through_origin(&ns, &fits)?;
    let mut c = graded("heisenberg-scaling", 1.0 - r_squared, 1e-3);
    c.note = Some(format!("slope {slope:.6} per atom"));
    Ok(c)
}
