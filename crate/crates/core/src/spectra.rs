//! Static spectral analysis: ground-state pairs with exchange-parity
//! symmetrization at the crossing, NOON fidelities, and parallel sweeps of
//! the gap and of the drive coupling.
//!
//! At rotation phase pi the k = 0 and k = +1 modes are degenerate in the
//! single-particle energy and the Hamiltonian commutes with the exchange
//! X: n_0 <-> n_+1. The lowest pair is split only by an N-th order weak-link
//! process, so for large N the numerical eigenvectors come out as arbitrary
//! mixtures of the even/odd combinations. Diagonalizing X inside the lowest
//! 2-dimensional eigenspace restores exact parity, which is what makes the
//! two NOON branch populations of the reported ground state agree to machine
//! precision instead of only to the solver residual.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{dense_eigh_real_matrix, gauge_fix, solve_lowest, EigenOptions, SolveMethod};
use crate::error::{Error, Result};
use crate::fock::{BasisMap, Mode, OccupationState};
use crate::hamiltonian::{build_drive, build_h0, ModelParams};
use crate::operator::HermitianOperator;
use crate::state::{
    fidelity, fock_population, mode_occupation, noon_superposition, overlap, symmetric_condensate,
    Parity,
};
use crate::C64;

/// Gaps below this fraction of the tunneling energy are flagged as
/// numerically degenerate (the value itself is still reported).
pub const DEGENERACY_REL_THRESHOLD: f64 = 1e-10;

/// Rotation phases closer to pi than this get the exchange symmetrization.
const EXCHANGE_SYMMETRY_TOL: f64 = 1e-9;

/// Lowest eigenpair bundle around the crossing.
#[derive(Debug, Clone)]
pub struct GroundStatePair {
    pub energies: Vec<f64>,
    pub ground: DVector<C64>,
    pub excited: DVector<C64>,
    /// E1 - E0.
    pub gap: f64,
    /// True when the gap is below `DEGENERACY_REL_THRESHOLD` * j.
    pub degenerate: bool,
    pub method: SolveMethod,
    pub max_residual: f64,
    /// True when the exchange-parity cleanup was applied to the pair.
    pub symmetrized: bool,
}

/// Apply the exchange permutation n_0 <-> n_+1 to a ket.
pub fn apply_exchange(basis: &BasisMap, v: &DVector<C64>) -> DVector<C64> {
    let mut out = DVector::<C64>::zeros(v.len());
    for (i, s) in basis.states().iter().enumerate() {
        let j = basis.index_of(&s.exchange_zero_plus()).expect("exchange keeps the sector");
        out[j] = v[i];
    }
    out
}

/// Expectation of H via one matvec.
fn rayleigh(h: &HermitianOperator, v: &DVector<C64>) -> f64 {
    h.matrix_element(v, v).re
}

/// Replace the lowest pair by exchange eigenstates of X spanning the same
/// 2-dimensional space, with energies re-evaluated as Rayleigh quotients.
fn symmetrize_pair(
    basis: &BasisMap,
    h: &HermitianOperator,
    v0: &DVector<C64>,
    v1: &DVector<C64>,
) -> Result<[(f64, DVector<C64>); 2]> {
    let xv0 = apply_exchange(basis, v0);
    let xv1 = apply_exchange(basis, v1);
    // X restricted to the span (real symmetric 2x2 for our real vectors)
    let m = nalgebra::DMatrix::<f64>::from_row_slice(
        2,
        2,
        &[
            overlap(v0, &xv0).re,
            overlap(v0, &xv1).re,
            overlap(v1, &xv0).re,
            overlap(v1, &xv1).re,
        ],
    );
    let sym = (&m + m.transpose()) * 0.5;
    let (_, c) = dense_eigh_real_matrix(sym)?;
    let mut out = Vec::with_capacity(2);
    for p in 0..2 {
        let y = v0 * C64::new(c[(0, p)], 0.0) + v1 * C64::new(c[(1, p)], 0.0);
        // project onto the dominant parity sector: (y + Xy)/2 has bitwise
        // equal components on every mirror pair, so the rotation's O(eps)
        // cross-sector dust cannot survive (even wins ties)
        let xy = apply_exchange(basis, &y);
        let even = (&y + &xy) * C64::new(0.5, 0.0);
        let odd = (&y - &xy) * C64::new(0.5, 0.0);
        let mut y = if even.norm() >= odd.norm() { even } else { odd };
        let n = y.norm();
        if n < 1e-12 {
            return Err(Error::EigenFailure("degenerate pair collapsed under symmetrization".into()));
        }
        y /= C64::new(n, 0.0);
        gauge_fix(&mut y);
        let e = rayleigh(h, &y);
        out.push((e, y));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite energies"));
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap()])
}

/// Solve the lowest pair (plus any extra requested energies) of H(params).
pub fn ground_state_pair(
    basis: &BasisMap,
    params: &ModelParams,
    opts: &EigenOptions,
) -> Result<GroundStatePair> {
    let mut opts = opts.clone();
    opts.n_lowest = opts.n_lowest.max(2).min(basis.dim());
    if basis.dim() < 2 {
        return Err(Error::InvalidParams("sector too small for a ground-state pair".into()));
    }
    let h = build_h0(basis, params)?;
    let sol = solve_lowest(&h, &opts)?;
    let mut energies = sol.eigenvalues.clone();
    let mut ground = sol.eigenvectors[0].clone();
    let mut excited = sol.eigenvectors[1].clone();
    let max_residual = sol.residuals.iter().cloned().fold(0.0, f64::max);

    let at_crossing = (params.omega - PI).abs() < EXCHANGE_SYMMETRY_TOL;
    if at_crossing {
        let [(e0, y0), (e1, y1)] = symmetrize_pair(basis, &h, &ground, &excited)?;
        energies[0] = e0;
        energies[1] = e1;
        ground = y0;
        excited = y1;
    }
    let gap = energies[1] - energies[0];
    let degenerate = gap.abs() < DEGENERACY_REL_THRESHOLD * params.j;
    Ok(GroundStatePair {
        energies,
        ground,
        excited,
        gap,
        degenerate,
        method: sol.method,
        max_residual,
        symmetrized: at_crossing,
    })
}

/// Scalar summary of the ground-state pair (everything the CLI reports).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub n: u32,
    pub dim: usize,
    pub omega: f64,
    pub energies: Vec<f64>,
    pub gap: f64,
    pub degenerate: bool,
    /// |<even NOON|ground>|.
    pub noon_even_fidelity: f64,
    /// |<odd NOON|excited>|.
    pub noon_odd_fidelity: f64,
    /// P(0, N, 0) in the ground state.
    pub population_zero_branch: f64,
    /// P(0, 0, N) in the ground state.
    pub population_plus_branch: f64,
    /// |<condensate|ground>|.
    pub condensate_overlap: f64,
    pub mode_occupations: [f64; 3],
    pub symmetrized: bool,
    pub max_residual: f64,
}

pub fn ground_state_report(
    basis: &BasisMap,
    params: &ModelParams,
    opts: &EigenOptions,
) -> Result<GroundStateReport> {
    let pair = ground_state_pair(basis, params, opts)?;
    GroundStateReport::from_pair(basis, params, &pair)
}

impl GroundStateReport {
    /// Summarize an already-solved pair (spares a second diagonalization
    /// when the caller also needs the vectors).
    pub fn from_pair(
        basis: &BasisMap,
        params: &ModelParams,
        pair: &GroundStatePair,
    ) -> Result<GroundStateReport> {
        let even = noon_superposition(basis, Parity::Even)?;
        let odd = noon_superposition(basis, Parity::Odd)?;
        let sp = symmetric_condensate(basis)?;
        let n = basis.n();
        Ok(GroundStateReport {
            n,
            dim: basis.dim(),
            omega: params.omega,
            energies: pair.energies.clone(),
            gap: pair.gap,
            degenerate: pair.degenerate,
            noon_even_fidelity: fidelity(&even, &pair.ground),
            noon_odd_fidelity: fidelity(&odd, &pair.excited),
            population_zero_branch: fock_population(
                basis,
                &pair.ground,
                &OccupationState::new(0, n, 0),
            ),
            population_plus_branch: fock_population(
                basis,
                &pair.ground,
                &OccupationState::new(0, 0, n),
            ),
            condensate_overlap: overlap(&sp, &pair.ground).norm(),
            mode_occupations: [
                mode_occupation(basis, &pair.ground, Mode::Minus),
                mode_occupation(basis, &pair.ground, Mode::Zero),
                mode_occupation(basis, &pair.ground, Mode::Plus),
            ],
            symmetrized: pair.symmetrized,
            max_residual: pair.max_residual,
        })
    }
}

/// One point of a gap sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapPoint {
    pub omega: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub degenerate: bool,
}

/// Lowest-pair gap across rotation phases (parallel over points).
pub fn gap_sweep(
    basis: &BasisMap,
    params: &ModelParams,
    omegas: &[f64],
    opts: &EigenOptions,
) -> Result<Vec<GapPoint>> {
    omegas
        .par_iter()
        .map(|&omega| {
            let p = params.with_omega(omega);
            let pair = ground_state_pair(basis, &p, opts)?;
            Ok(GapPoint {
                omega,
                e0: pair.energies[0],
                e1: pair.energies[1],
                gap: pair.gap,
                degenerate: pair.degenerate,
            })
        })
        .collect()
}

/// |<excited| V |ground>| for the drive operator at the given modulation
/// amplitude.
pub fn drive_coupling(
    basis: &BasisMap,
    params: &ModelParams,
    amplitude: f64,
    opts: &EigenOptions,
) -> Result<f64> {
    let pair = ground_state_pair(basis, params, opts)?;
    let v = build_drive(basis, params, amplitude)?;
    Ok(v.matrix_element(&pair.excited, &pair.ground).norm())
}

/// One point of the coupling-vs-N sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub n: u32,
    pub dim: usize,
    pub coupling: f64,
    /// Two-level estimate (j - delta_j/3) N A / sqrt(3).
    pub predicted: f64,
}

/// Drive coupling across atom numbers at fixed remaining parameters
/// (parallel over sectors).
pub fn coupling_sweep(
    params: &ModelParams,
    ns: &[u32],
    amplitude: f64,
    opts: &EigenOptions,
) -> Result<Vec<CouplingPoint>> {
    ns.par_iter()
        .map(|&n| {
            let basis = BasisMap::new(n)?;
            let p = ModelParams { n, ..*params };
            p.validate()?;
            let coupling = drive_coupling(&basis, &p, amplitude, opts)?;
            Ok(CouplingPoint {
                n,
                dim: basis.dim(),
                coupling,
                predicted: analytic_drive_coupling(&p, amplitude),
            })
        })
        .collect()
}

/// Two-level estimate of the crossing coupling:
/// |V01| = (j - delta_j/3) N A / sqrt(3).
pub fn analytic_drive_coupling(params: &ModelParams, amplitude: f64) -> f64 {
    (params.j - params.delta_j / 3.0) * f64::from(params.n) * amplitude.abs() / 3f64.sqrt()
}

/// Signed branch splitting away from the crossing:
/// E(0,0,N) - E(0,N,0) = -2 sqrt(3) N (j - delta_j/3) sin((Omega - pi)/3).
pub fn analytic_branch_splitting(params: &ModelParams) -> f64 {
    -2.0 * 3f64.sqrt()
        * f64::from(params.n)
        * (params.j - params.delta_j / 3.0)
        * ((params.omega - PI) / 3.0).sin()
}

/// Branch splitting read off the exact spectrum, with the branch levels
/// identified by their extreme-Fock-state character.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericBranchSplitting {
    /// E(plus branch) - E(zero branch), same sign convention as
    /// `analytic_branch_splitting`.
    pub delta_e: f64,
    /// Level index (from the ground state) carrying the largest (0,N,0)
    /// weight, and that weight.
    pub zero_branch_level: usize,
    pub zero_branch_weight: f64,
    /// Same for (0,0,N).
    pub plus_branch_level: usize,
    pub plus_branch_weight: f64,
}

/// Identify the two branch eigenstates among the `n_levels` lowest by their
/// (0,N,0) and (0,0,N) populations and return the signed energy difference.
/// Away from the crossing this is the exact counterpart of
/// `analytic_branch_splitting`, including the level-repulsion correction the
/// diagonal formula omits.
pub fn branch_splitting_numeric(
    basis: &BasisMap,
    params: &ModelParams,
    n_levels: usize,
    opts: &EigenOptions,
) -> Result<NumericBranchSplitting> {
    let n_levels = n_levels.clamp(2, basis.dim());
    let mut opts = opts.clone();
    opts.n_lowest = n_levels;
    let h = build_h0(basis, params)?;
    let sol = solve_lowest(&h, &opts)?;
    let n = basis.n();
    let zero = OccupationState::new(0, n, 0);
    let plus = OccupationState::new(0, 0, n);
    let (mut zl, mut zw, mut pl, mut pw) = (0usize, -1.0f64, 0usize, -1.0f64);
    for (i, v) in sol.eigenvectors.iter().enumerate() {
        let a = fock_population(basis, v, &zero);
        if a > zw {
            zw = a;
            zl = i;
        }
        let b = fock_population(basis, v, &plus);
        if b > pw {
            pw = b;
            pl = i;
        }
    }
    if zl == pl {
        return Err(Error::ProtocolAbort {
            stage: "branch-splitting",
            diagnostic: format!(
                "level {zl} carries both extreme Fock weights ({zw:.3}, {pw:.3}); \
                 the branches are not resolved at omega = {}",
                params.omega
            ),
        });
    }
    Ok(NumericBranchSplitting {
        delta_e: sol.eigenvalues[pl] - sol.eigenvalues[zl],
        zero_branch_level: zl,
        zero_branch_weight: zw,
        plus_branch_level: pl,
        plus_branch_weight: pw,
    })
}
