//! Time evolution: exact spectral propagation for static Hamiltonians, a
//! Krylov exponential for large static sectors, and adaptive unitary
//! steppers for driven and ramped Hamiltonians.
//!
//! Two steppers cover the time-dependent case, both second order with
//! step-doubling error control and both built from exact matrix
//! exponentials, so each accepted step is unitary to machine precision and
//! norm drift stays at the roundoff floor:
//!
//! * midpoint: exp(-i H(t + dt/2) dt) with a fresh eigendecomposition per
//!   substep; the robust reference, cost O(D^3) per step;
//! * split-step: Strang splitting exp(-i H0 dt/2) exp(-i s V dt)
//!   exp(-i H0 dt/2) in the H0 eigenbasis with the drive average s over the
//!   substep; two fixed eigendecompositions up front, O(D^2) per step, which
//!   is what makes long weak-probe scans affordable.
//!
//! The drive enters as H(t) = H0 + cos(omega_d t) V with V already scaled by
//! the modulation amplitude.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::{dense_eigh_real, dense_eigh_real_matrix};
use crate::error::{Error, Result};
use crate::operator::HermitianOperator;
use crate::C64;

/// Stepper selection for time-dependent evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepMethod {
    /// Split-step for sinusoidal drives, midpoint otherwise.
    Auto,
    /// Exact exponential of the midpoint Hamiltonian each substep.
    MidpointExact,
    /// Strang split in the static eigenbasis (sinusoidal drives only).
    SplitStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Hard ceiling on the adaptive step.
    pub dt_max: f64,
    /// First trial step.
    pub dt_init: f64,
    /// Local (per-step) error tolerance in the state 2-norm.
    pub local_tol: f64,
    /// Abort threshold: refusing to step below this signals stiffness the
    /// integrator cannot hide.
    pub dt_min: f64,
    /// Allowed |norm - 1| of the evolving state.
    pub norm_drift_bound: f64,
    /// Safety cap on accepted + rejected steps.
    pub max_steps: usize,
    pub method: StepMethod,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt_max: 1.0,
            dt_init: 1e-2,
            local_tol: 1e-9,
            dt_min: 1e-10,
            norm_drift_bound: 1e-8,
            max_steps: 50_000_000,
            method: StepMethod::Auto,
        }
    }
}

/// States sampled at the requested times plus integrator diagnostics.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_norm_drift: f64,
}

/// exp(-i lambda t) for every eigenvalue.
fn phase_vector(evals: &DVector<f64>, t: f64) -> DVector<C64> {
    DVector::from_iterator(evals.len(), evals.iter().map(|&e| C64::from_polar(1.0, -e * t)))
}

fn to_complex_matrix(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Exact propagator for a static Hamiltonian, valid for any time argument.
#[derive(Debug, Clone)]
pub struct StaticPropagator {
    evals: DVector<f64>,
    evecs: DMatrix<C64>,
}

impl StaticPropagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        let (evals, evecs) = dense_eigh_real(h)?;
        Ok(Self { evals, evecs: to_complex_matrix(&evecs) })
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.evals
    }

    /// psi(t) = exp(-i H t) psi.
    pub fn evolve(&self, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut a = self.evecs.ad_mul(psi);
        let ph = phase_vector(&self.evals, t);
        for i in 0..a.len() {
            a[i] *= ph[i];
        }
        &self.evecs * a
    }
}

/// One accepted-or-rejected unit of work inside the adaptive driver.
trait Stepper {
    fn dim(&self) -> usize;
    /// Advance `psi` from `t` by `dt` with one second-order substep.
    fn step(&mut self, t: f64, dt: f64, psi: &DVector<C64>) -> Result<DVector<C64>>;
}

/// Midpoint-exponential stepper over an arbitrary time-dependent real
/// symmetric Hamiltonian provided as a dense-matrix builder.
struct MidpointStepper<F: FnMut(f64) -> Result<DMatrix<f64>>> {
    dim: usize,
    h_at: F,
}

impl<F: FnMut(f64) -> Result<DMatrix<f64>>> Stepper for MidpointStepper<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn step(&mut self, t: f64, dt: f64, psi: &DVector<C64>) -> Result<DVector<C64>> {
        let h = (self.h_at)(t + 0.5 * dt)?;
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: h.nrows() });
        }
        let (evals, evecs) = dense_eigh_real_matrix(h)?;
        let w = to_complex_matrix(&evecs);
        let mut a = w.ad_mul(psi);
        let ph = phase_vector(&evals, dt);
        for i in 0..a.len() {
            a[i] *= ph[i];
        }
        Ok(&w * a)
    }
}

/// Strang split-step for H(t) = H0 + s(t) V, prepared in the H0 eigenbasis.
struct SplitStepper {
    dim: usize,
    /// H0 eigenvalues and eigenbasis W.
    e0: DVector<f64>,
    w: DMatrix<C64>,
    /// eigenpairs of W^T V W.
    mu: DVector<f64>,
    q: DMatrix<C64>,
    /// drive angular frequency (s(t) = cos(frequency t)).
    frequency: f64,
}

impl SplitStepper {
    fn new(h0: &HermitianOperator, drive: &HermitianOperator, frequency: f64) -> Result<Self> {
        if h0.dim() != drive.dim() {
            return Err(Error::DimensionMismatch { expected: h0.dim(), got: drive.dim() });
        }
        if !frequency.is_finite() || frequency < 0.0 {
            return Err(Error::InvalidParams(format!(
                "drive frequency must be finite and non-negative, got {frequency}"
            )));
        }
        let (e0, w_real) = dense_eigh_real(h0)?;
        let v = drive
            .to_real_dense()
            .ok_or_else(|| Error::InvalidParams("split stepper needs a real dense drive".into()))?;
        let v_tilde = w_real.transpose() * v * &w_real;
        let v_sym = (&v_tilde + v_tilde.transpose()) * 0.5;
        let (mu, q_real) = dense_eigh_real_matrix(v_sym)?;
        Ok(Self {
            dim: h0.dim(),
            e0,
            w: to_complex_matrix(&w_real),
            mu,
            q: to_complex_matrix(&q_real),
            frequency,
        })
    }

    /// Average of cos(frequency t') over [t, t + dt].
    fn drive_average(&self, t: f64, dt: f64) -> f64 {
        let w = self.frequency;
        if w == 0.0 {
            return 1.0;
        }
        if (w * dt).abs() < 1e-8 {
            // midpoint value dodges the 0/0 of the exact average
            return (w * (t + 0.5 * dt)).cos();
        }
        ((w * (t + dt)).sin() - (w * t).sin()) / (w * dt)
    }
}

impl Stepper for SplitStepper {
    fn dim(&self) -> usize {
        self.dim
    }

    fn step(&mut self, t: f64, dt: f64, psi: &DVector<C64>) -> Result<DVector<C64>> {
        let s = self.drive_average(t, dt);
        let mut a = self.w.ad_mul(psi);
        let half = phase_vector(&self.e0, 0.5 * dt);
        for i in 0..a.len() {
            a[i] *= half[i];
        }
        let mut b = self.q.ad_mul(&a);
        let vp = phase_vector(&self.mu, s * dt);
        for i in 0..b.len() {
            b[i] *= vp[i];
        }
        a = &self.q * b;
        for i in 0..a.len() {
            a[i] *= half[i];
        }
        Ok(&self.w * a)
    }
}

/// H(t) = h0 + cos(frequency t) * drive.
pub struct DrivenHamiltonian<'a> {
    pub h0: &'a HermitianOperator,
    pub drive: &'a HermitianOperator,
    pub frequency: f64,
}

fn validate_samples(sample_times: &[f64]) -> Result<()> {
    if sample_times.is_empty() {
        return Err(Error::InvalidParams("no sample times requested".into()));
    }
    let mut prev = 0.0f64;
    for &t in sample_times {
        if !t.is_finite() || t < prev {
            return Err(Error::InvalidParams(
                "sample times must be finite, non-negative and non-decreasing".into(),
            ));
        }
        prev = t;
    }
    Ok(())
}

fn adaptive_propagate<S: Stepper>(
    mut stepper: S,
    psi0: &DVector<C64>,
    sample_times: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    validate_samples(sample_times)?;
    if psi0.len() != stepper.dim() {
        return Err(Error::DimensionMismatch { expected: stepper.dim(), got: psi0.len() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParams("initial state must be normalized".into()));
    }
    let mut psi = psi0.clone();
    let mut t = 0.0f64;
    let mut dt_try = opts.dt_init.min(opts.dt_max);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut max_drift = 0.0f64;
    let mut states = Vec::with_capacity(sample_times.len());

    let t_end = *sample_times.last().expect("validated non-empty");
    let snap = 1e-12 * (1.0 + t_end.abs());

    for &target in sample_times {
        while target - t > snap {
            if accepted + rejected >= opts.max_steps {
                return Err(Error::PropagationFailure(format!(
                    "step budget {} exhausted at t = {t:.6}",
                    opts.max_steps
                )));
            }
            let dt_wanted = dt_try.min(opts.dt_max);
            let dt = dt_wanted.min(target - t);
            let clipped_by_sample = dt < dt_wanted;
            let full = stepper.step(t, dt, &psi)?;
            let h1 = stepper.step(t, 0.5 * dt, &psi)?;
            let h2 = stepper.step(t + 0.5 * dt, 0.5 * dt, &h1)?;
            let err = (&full - &h2).norm();
            if err <= opts.local_tol {
                t += dt;
                psi = h2;
                accepted += 1;
                let drift = (psi.norm() - 1.0).abs();
                max_drift = max_drift.max(drift);
                if drift > opts.norm_drift_bound {
                    return Err(Error::NormDrift { drift, bound: opts.norm_drift_bound });
                }
                let grow = if err == 0.0 {
                    2.0
                } else {
                    (0.9 * (opts.local_tol / err).powf(1.0 / 3.0)).clamp(0.2, 2.0)
                };
                // a step shortened only to land on a sample time says nothing
                // about stiffness, so it must not shrink the working step
                if !clipped_by_sample {
                    dt_try = (dt * grow).min(opts.dt_max);
                }
            } else {
                rejected += 1;
                let shrink = (0.9 * (opts.local_tol / err).powf(1.0 / 3.0)).clamp(0.1, 0.9);
                dt_try = dt * shrink;
                if dt_try < opts.dt_min {
                    return Err(Error::PropagationFailure(format!(
                        "step collapsed below dt_min = {} at t = {t:.6} (local error {err:.2e})",
                        opts.dt_min
                    )));
                }
            }
        }
        states.push(psi.clone());
    }
    Ok(PropagationResult {
        times: sample_times.to_vec(),
        states,
        accepted_steps: accepted,
        rejected_steps: rejected,
        max_norm_drift: max_drift,
    })
}

/// Evolve under the linearized sinusoidal drive, sampling at the requested
/// times (which must be non-decreasing; t = 0 is the start).
pub fn evolve_driven(
    driven: &DrivenHamiltonian<'_>,
    psi0: &DVector<C64>,
    sample_times: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    match opts.method {
        StepMethod::Auto | StepMethod::SplitStep => {
            let stepper = SplitStepper::new(driven.h0, driven.drive, driven.frequency)?;
            adaptive_propagate(stepper, psi0, sample_times, opts)
        }
        StepMethod::MidpointExact => {
            let h0 = driven
                .h0
                .to_real_dense()
                .ok_or_else(|| Error::InvalidParams("midpoint stepper needs real dense H0".into()))?;
            let v = driven
                .drive
                .to_real_dense()
                .ok_or_else(|| Error::InvalidParams("midpoint stepper needs a real dense drive".into()))?;
            let w = driven.frequency;
            let dim = h0.nrows();
            let h_at = move |t: f64| -> Result<DMatrix<f64>> { Ok(&h0 + &v * (w * t).cos()) };
            adaptive_propagate(MidpointStepper { dim, h_at }, psi0, sample_times, opts)
        }
    }
}

/// Evolve under an arbitrary time-dependent real symmetric Hamiltonian
/// provided as a dense builder (midpoint stepper).
pub fn evolve_time_dependent<F>(
    dim: usize,
    h_at: F,
    psi0: &DVector<C64>,
    sample_times: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult>
where
    F: FnMut(f64) -> Result<DMatrix<f64>>,
{
    adaptive_propagate(MidpointStepper { dim, h_at }, psi0, sample_times, opts)
}

/// Ramp shape for slow parameter changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RampSchedule {
    Linear,
    /// 3 x^2 - 2 x^3: zero slope at both ends, which suppresses the
    /// end-point diabatic kicks of a linear ramp.
    Smoothstep,
}

impl RampSchedule {
    pub fn progress(self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            RampSchedule::Linear => x,
            RampSchedule::Smoothstep => x * x * (3.0 - 2.0 * x),
        }
    }
}

/// Krylov (Lanczos) action of exp(-i H t) on a state for real symmetric H,
/// with substeps sized by |H| and an a-posteriori Arnoldi residual check.
/// This is how static evolution stays available above the dense threshold.
pub fn expmv_static(
    op: &HermitianOperator,
    psi0: &DVector<C64>,
    t: f64,
    tol: f64,
    max_krylov: usize,
) -> Result<DVector<C64>> {
    if !op.is_real() {
        return Err(Error::InvalidParams("Krylov propagation expects a real operator".into()));
    }
    if psi0.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: psi0.len() });
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    let scale = 1.0 + op.inf_norm();
    let mut substeps = ((t.abs() * scale / 10.0).ceil() as usize).max(1);
    for _ in 0..8 {
        match expmv_fixed_substeps(op, psi0, t, tol, max_krylov, substeps) {
            Ok(v) => return Ok(v),
            Err(Error::PropagationFailure(_)) => substeps *= 2,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PropagationFailure(
        "Krylov propagation failed to converge even with refined substeps".into(),
    ))
}

fn expmv_fixed_substeps(
    op: &HermitianOperator,
    psi0: &DVector<C64>,
    t: f64,
    tol: f64,
    max_krylov: usize,
    substeps: usize,
) -> Result<DVector<C64>> {
    let tau = t / substeps as f64;
    let mut psi = psi0.clone();
    let per_step_tol = tol / substeps as f64;
    for _ in 0..substeps {
        psi = expmv_substep(op, &psi, tau, per_step_tol, max_krylov)?;
    }
    Ok(psi)
}

fn expmv_substep(
    op: &HermitianOperator,
    psi: &DVector<C64>,
    tau: f64,
    tol: f64,
    max_krylov: usize,
) -> Result<DVector<C64>> {
    let n0 = psi.norm();
    if n0 == 0.0 {
        return Ok(psi.clone());
    }
    let d = psi.len();
    let mut vs: Vec<DVector<C64>> = vec![psi / C64::new(n0, 0.0)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let reconstruct = |vs: &[DVector<C64>], u: &DVector<C64>| -> DVector<C64> {
        let mut out = DVector::<C64>::zeros(d);
        for (v, &c) in vs.iter().zip(u.iter()) {
            out += v * (c * C64::new(n0, 0.0));
        }
        out
    };

    for j in 0..max_krylov {
        let mut w = op.matvec(&vs[j]);
        if j > 0 {
            w -= &vs[j - 1] * C64::new(betas[j - 1], 0.0);
        }
        let a = vs[j].dotc(&w).re;
        w -= &vs[j] * C64::new(a, 0.0);
        // full reorthogonalization keeps the small tridiagonal honest
        for v in &vs {
            let c = v.dotc(&w);
            w -= v * c;
        }
        alphas.push(a);
        let b = w.norm();
        // current Krylov exponential
        let m = alphas.len();
        let mut tm = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tm[(i, i)] = alphas[i];
            if i + 1 < m {
                tm[(i, i + 1)] = betas[i];
                tm[(i + 1, i)] = betas[i];
            }
        }
        let (te, tv) = dense_eigh_real_matrix(tm)?;
        let mut u = DVector::<C64>::zeros(m);
        for col in 0..m {
            let phase = C64::from_polar(1.0, -te[col] * tau);
            let c0 = tv[(0, col)];
            for row in 0..m {
                u[row] += C64::new(tv[(row, col)], 0.0) * phase * C64::new(c0, 0.0);
            }
        }
        let est = b * u[m - 1].norm() * tau.abs();
        if b < 1e-13 * (1.0 + alphas[0].abs()) || est < tol {
            return Ok(reconstruct(&vs, &u));
        }
        if j + 1 == max_krylov {
            break;
        }
        betas.push(b);
        vs.push(w / C64::new(b, 0.0));
    }
    Err(Error::PropagationFailure(format!(
        "Krylov space of {max_krylov} vectors too small for substep tau = {tau:.3e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::EigenOptions;
    use crate::fock::{BasisMap, OccupationState};
    use crate::hamiltonian::{build_drive, build_h0, ModelParams};
    use crate::spectra::ground_state_pair;
    use crate::state::{fock, fock_population, overlap};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn test_static_two_level_phase_oracle() {
        // N = 1, Omega = 0, dJ = 0: E(0,1,0) = -2J, E(1,0,0) = +J.
        // For psi0 = (|010> + |100>)/sqrt2 the return probability is
        // |<psi0|psi(t)>|^2 = cos^2(3 J t / 2).
        let basis = BasisMap::new(1).unwrap();
        let p = ModelParams::new(1, 0.0, 1.0, 0.0, 0.0).unwrap();
        let h = build_h0(&basis, &p).unwrap();
        let prop = StaticPropagator::new(&h).unwrap();
        let a = fock(&basis, &OccupationState::new(0, 1, 0)).unwrap();
        let b = fock(&basis, &OccupationState::new(1, 0, 0)).unwrap();
        let psi0 = (&a + &b) * c(0.5f64.sqrt(), 0.0);
        for &t in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            let psi = prop.evolve(&psi0, t);
            let got = overlap(&psi0, &psi).norm_sqr();
            let want = (1.5 * t).cos().powi(2);
            assert!((got - want).abs() < 1e-12, "t = {t}: {got} vs {want}");
        }
    }

    #[test]
    fn test_static_time_reversal_and_unitarity() {
        let basis = BasisMap::new(4).unwrap();
        let p = ModelParams::new(4, 0.1, 1.0, 0.02, 2.2).unwrap();
        let h = build_h0(&basis, &p).unwrap();
        let prop = StaticPropagator::new(&h).unwrap();
        let psi0 = fock(&basis, &OccupationState::new(0, 4, 0)).unwrap();
        let fwd = prop.evolve(&psi0, 17.0);
        assert!((fwd.norm() - 1.0).abs() < 1e-12);
        let back = prop.evolve(&fwd, -17.0);
        assert!((&back - &psi0).norm() < 1e-11, "time reversal broke");
        // energy conservation under static evolution
        let e0 = h.matrix_element(&psi0, &psi0).re;
        let e1 = h.matrix_element(&fwd, &fwd).re;
        assert!((e0 - e1).abs() < 1e-11);
    }

    #[test]
    fn test_krylov_matches_spectral() {
        let basis = BasisMap::new(8).unwrap();
        let p = ModelParams::new(8, 0.08, 1.0, 0.004, PI - 0.4).unwrap();
        let h = build_h0(&basis, &p).unwrap();
        let prop = StaticPropagator::new(&h).unwrap();
        // spread the state over the spectrum
        let pair = ground_state_pair(&basis, &p, &EigenOptions::lowest(2)).unwrap();
        let mut psi0 = &pair.ground * c(0.8, 0.0) + &pair.excited * c(0.0, 0.6);
        psi0 /= c(psi0.norm(), 0.0);
        let t = 31.0;
        let a = prop.evolve(&psi0, t);
        let b = expmv_static(&h, &psi0, t, 1e-11, 64).unwrap();
        assert!((&a - &b).norm() < 1e-9, "krylov vs spectral: {:.2e}", (&a - &b).norm());
        assert!((b.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn test_driven_steppers_agree() {
        // split-step and midpoint must converge to the same trajectory
        let basis = BasisMap::new(3).unwrap();
        let p = ModelParams::new(3, 0.3, 1.0, 0.02, PI).unwrap();
        let h0 = build_h0(&basis, &p).unwrap();
        let pair = ground_state_pair(&basis, &p, &EigenOptions::lowest(2)).unwrap();
        let gap = pair.gap;
        let v = build_drive(&basis, &p, 0.05).unwrap();
        let dh = DrivenHamiltonian { h0: &h0, drive: &v, frequency: gap };
        let samples = [40.0, 120.0];
        let mut opts = PropagationOptions::default();
        opts.local_tol = 1e-11;
        opts.method = StepMethod::SplitStep;
        let a = evolve_driven(&dh, &pair.ground, &samples, &opts).unwrap();
        opts.method = StepMethod::MidpointExact;
        let b = evolve_driven(&dh, &pair.ground, &samples, &opts).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            let d = (x - y).norm();
            assert!(d < 1e-7, "stepper disagreement {d:.2e}");
        }
        assert!(a.max_norm_drift < 1e-10);
        assert!(b.max_norm_drift < 1e-10);
    }

    #[test]
    fn test_driven_against_exact_modulation() {
        // the linearized drive is an O(A^2) surrogate for truly modulating
        // Omega(t) = Omega + A cos(omega_d t); both must tell the same story
        let basis = BasisMap::new(3).unwrap();
        let p = ModelParams::new(3, 0.3, 1.0, 0.02, PI).unwrap();
        let h0 = build_h0(&basis, &p).unwrap();
        let pair = ground_state_pair(&basis, &p, &EigenOptions::lowest(2)).unwrap();
        let amp = 0.02;
        let v = build_drive(&basis, &p, amp).unwrap();
        let freq = pair.gap;
        let dh = DrivenHamiltonian { h0: &h0, drive: &v, frequency: freq };
        let samples = [60.0, 150.0];
        let opts = PropagationOptions::default();
        let lin = evolve_driven(&dh, &pair.ground, &samples, &opts).unwrap();
        let exact = evolve_time_dependent(
            basis.dim(),
            |t| {
                build_h0(&basis, &p.with_omega(p.omega + amp * (freq * t).cos()))?
                    .to_real_dense()
                    .ok_or_else(|| Error::InvalidParams("expected real dense".into()))
            },
            &pair.ground,
            &samples,
            &opts,
        )
        .unwrap();
        for (x, y) in lin.states.iter().zip(&exact.states) {
            // compare populations (phases may differ at O(A^2) harmlessly)
            for i in 0..x.len() {
                let dpop = (x[i].norm_sqr() - y[i].norm_sqr()).abs();
                assert!(dpop < 5e-3, "population mismatch {dpop:.2e}");
            }
        }
    }

    #[test]
    fn test_zero_drive_is_static() {
        let basis = BasisMap::new(2).unwrap();
        let p = ModelParams::new(2, 0.2, 1.0, 0.01, 1.0).unwrap();
        let h0 = build_h0(&basis, &p).unwrap();
        let zero = build_drive(&basis, &p, 0.0).unwrap();
        let dh = DrivenHamiltonian { h0: &h0, drive: &zero, frequency: 0.7 };
        let psi0 = fock(&basis, &OccupationState::new(0, 2, 0)).unwrap();
        let res = evolve_driven(&dh, &psi0, &[13.0], &PropagationOptions::default()).unwrap();
        let prop = StaticPropagator::new(&h0).unwrap();
        let want = prop.evolve(&psi0, 13.0);
        assert!((&res.states[0] - &want).norm() < 1e-8);
    }

    #[test]
    fn test_sample_validation() {
        let basis = BasisMap::new(2).unwrap();
        let p = ModelParams::new(2, 0.2, 1.0, 0.01, 1.0).unwrap();
        let h0 = build_h0(&basis, &p).unwrap();
        let v = build_drive(&basis, &p, 0.01).unwrap();
        let dh = DrivenHamiltonian { h0: &h0, drive: &v, frequency: 0.5 };
        let psi0 = fock(&basis, &OccupationState::new(0, 2, 0)).unwrap();
        let opts = PropagationOptions::default();
        assert!(evolve_driven(&dh, &psi0, &[], &opts).is_err());
        assert!(evolve_driven(&dh, &psi0, &[2.0, 1.0], &opts).is_err());
        let unnorm = &psi0 * c(0.5, 0.0);
        assert!(evolve_driven(&dh, &unnorm, &[1.0], &opts).is_err());
    }

    #[test]
    fn test_ramp_schedule_shapes() {
        assert_eq!(RampSchedule::Linear.progress(0.25), 0.25);
        assert_eq!(RampSchedule::Smoothstep.progress(0.0), 0.0);
        assert_eq!(RampSchedule::Smoothstep.progress(1.0), 1.0);
        assert!((RampSchedule::Smoothstep.progress(0.5) - 0.5).abs() < 1e-15);
        // zero slope at the ends
        let h = 1e-6;
        let d0 = RampSchedule::Smoothstep.progress(h) / h;
        assert!(d0 < 1e-5, "smoothstep start slope {d0}");
    }

    #[test]
    fn test_smoothstep_ramp_tracks_ground_state() {
        // slow smoothstep ramp from the crossing down to pi - 0.02 keeps the
        // even cat on the lower branch, which lands on the (0,N,0)-dominated
        // state; slower ramps track better
        let basis = BasisMap::new(3).unwrap();
        let p = ModelParams::new(3, 0.08, 1.0, 0.004, PI).unwrap();
        let start = ground_state_pair(&basis, &p, &EigenOptions::lowest(2)).unwrap();
        let p_end = p.with_omega(PI - 0.02);
        let end = ground_state_pair(&basis, &p_end, &EigenOptions::lowest(2)).unwrap();
        let schedule = RampSchedule::Smoothstep;
        let mut opts = PropagationOptions::default();
        opts.dt_max = 4.0;
        opts.local_tol = 1e-8;
        let ramp = |duration: f64| {
            let res = evolve_time_dependent(
                basis.dim(),
                |t| {
                    let om = p.omega + (p_end.omega - p.omega) * schedule.progress(t / duration);
                    build_h0(&basis, &p.with_omega(om))?
                        .to_real_dense()
                        .ok_or_else(|| Error::InvalidParams("expected real dense".into()))
                },
                &start.ground,
                &[duration],
                &opts,
            )
            .unwrap();
            res.states[0].clone()
        };
        let fast = ramp(2000.0);
        let f_fast = overlap(&end.ground, &fast).norm_sqr();
        assert!((f_fast - 0.99481).abs() < 1e-3, "fast ramp fidelity {f_fast}");
        let slow = ramp(6000.0);
        let f_slow = overlap(&end.ground, &slow).norm_sqr();
        assert!(f_slow > 0.9999, "slow ramp fidelity {f_slow}");
        // the landing state is the branch state, whose (0,N,0) purity caps
        // the Fock-basis readout
        let p_fock = fock_population(&basis, &slow, &OccupationState::new(0, 3, 0));
        assert!((p_fock - 0.99155).abs() < 1e-3, "readout population {p_fock}");
    }
}
