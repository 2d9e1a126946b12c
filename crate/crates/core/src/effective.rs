//! Reduced few-level pictures of the crossing: projections of the full
//! Hamiltonian and drive onto a handful of eigenstates, the rotating-wave
//! propagator for those levels, and the closed-form two-level results they
//! collapse to. These are the independent models the full dynamics is
//! checked against, so nothing here touches the integrators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::dense_eigh_real_matrix;
use crate::error::{Error, Result};
use crate::operator::HermitianOperator;
use crate::C64;

/// A few-level reduction: eigen-energies plus the signed real drive matrix
/// elements between the retained states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveLevels {
    pub energies: Vec<f64>,
    /// couplings[(i, j)] = <i| V |j> (gauge-fixed states make these real).
    pub couplings: Vec<Vec<f64>>,
}

impl EffectiveLevels {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i][j]
    }
}

/// Project the drive onto the given orthonormal eigenstates with their
/// eigen-energies. Imaginary parts of the projected elements beyond roundoff
/// are rejected: the model space is meant to be real.
pub fn project_levels(
    drive: &HermitianOperator,
    energies: &[f64],
    states: &[DVector<C64>],
) -> Result<EffectiveLevels> {
    if energies.len() != states.len() || states.is_empty() {
        return Err(Error::InvalidParams(
            "need matching, non-empty energies and states for a level reduction".into(),
        ));
    }
    let m = states.len();
    let mut couplings = vec![vec![0.0; m]; m];
    let scale = 1.0 + drive.inf_norm();
    for i in 0..m {
        for j in i..m {
            let e = drive.matrix_element(&states[i], &states[j]);
            if e.im.abs() > 1e-10 * scale {
                return Err(Error::InvalidParams(format!(
                    "projected drive element ({i}, {j}) has imaginary part {:.2e}",
                    e.im
                )));
            }
            couplings[i][j] = e.re;
            couplings[j][i] = e.re;
        }
    }
    Ok(EffectiveLevels { energies: energies.to_vec(), couplings })
}

/// Populations P_target(t) of the rotating-wave model driven at
/// `drive_frequency`, starting from level 0. In the rotating frame the
/// diagonal is (0, -(w - (e_i - e_0)), ...) and every coupling enters as
/// V_ij / 2, which is the resonant half of cos(w t) V_ij.
pub fn rwa_populations(
    levels: &EffectiveLevels,
    drive_frequency: f64,
    times: &[f64],
    target: usize,
) -> Result<Vec<f64>> {
    let m = levels.len();
    if m < 2 {
        return Err(Error::InvalidParams("rotating-wave model needs at least two levels".into()));
    }
    if target >= m {
        return Err(Error::InvalidParams(format!("target level {target} out of {m}")));
    }
    let mut h = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        h[(i, i)] = -(drive_frequency - (levels.energies[i] - levels.energies[0]));
    }
    for i in 0..m {
        for j in 0..m {
            if i != j {
                h[(i, j)] = 0.5 * levels.coupling(i, j);
            }
        }
    }
    let (w, v) = dense_eigh_real_matrix(h)?;
    // amplitude <target| exp(-i H_I t) |0>
    Ok(times
        .iter()
        .map(|&t| {
            let mut amp = C64::new(0.0, 0.0);
            for k in 0..m {
                amp += C64::from_polar(1.0, -w[k] * t) * (v[(target, k)] * v[(0, k)]);
            }
            amp.norm_sqr()
        })
        .collect())
}

/// Two-level Rabi population: the excited-state probability of a pair with
/// coupling c and detuning d is (c^2 / (c^2 + d^2)) sin^2(sqrt(c^2 + d^2) t / 2).
pub fn rabi_population(coupling: f64, detuning: f64, t: f64) -> f64 {
    let omega_r = coupling.hypot(detuning);
    if omega_r == 0.0 {
        return 0.0;
    }
    (coupling / omega_r).powi(2) * (0.5 * omega_r * t).sin().powi(2)
}

/// Avoided-crossing gap of the two-level model: with branch splitting d and
/// crossing gap g (equal to twice the branch coupling), the pair is split by
/// sqrt(d^2 + g^2).
pub fn crossing_gap_model(splitting: f64, gap_at_crossing: f64) -> f64 {
    splitting.hypot(gap_at_crossing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_driven, DrivenHamiltonian, PropagationOptions};
    use crate::eigen::EigenOptions;
    use crate::fock::BasisMap;
    use crate::hamiltonian::ModelParams;
    use crate::spectra::{analytic_branch_splitting, ground_state_pair};
    use std::f64::consts::PI;

    fn c64(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn test_rabi_closed_form() {
        let c = 0.02;
        // resonant pi pulse at t = pi / c
        assert!((rabi_population(c, 0.0, PI / c) - 1.0).abs() < 1e-12);
        assert!(rabi_population(c, 0.0, 0.0).abs() < 1e-15);
        // detuned ceiling c^2 / (c^2 + d^2) at the Rabi half-period
        let d = 0.03;
        let omega_r = c.hypot(d);
        let got = rabi_population(c, d, PI / omega_r);
        assert!((got - (c * c) / (c * c + d * d)).abs() < 1e-12);
    }

    #[test]
    fn test_two_level_rwa_matches_closed_form() {
        let levels = EffectiveLevels {
            energies: vec![0.0, 1.0],
            couplings: vec![vec![0.0, 0.04], vec![0.04, 0.0]],
        };
        let detuning = 0.01;
        let times: Vec<f64> = (0..30).map(|i| i as f64 * 7.0).collect();
        let pops = rwa_populations(&levels, 1.0 + detuning, &times, 1).unwrap();
        for (&t, &p) in times.iter().zip(&pops) {
            let want = rabi_population(0.04, -detuning, t);
            assert!((p - want).abs() < 1e-12, "t = {t}: {p} vs {want}");
        }
    }

    #[test]
    fn test_rwa_against_full_dynamics_synthetic() {
        // 3-level toy with weak coupling and fast drive: RWA must track the
        // exact driven dynamics to sub-percent over a full Rabi cycle.
        let e = [0.0, 1.3, 2.9];
        let v01 = 0.006;
        let v02 = 0.003;
        let v12 = 0.004;
        let h0 = HermitianOperator::from_triplets(
            3,
            vec![(0, 0, c64(e[0])), (1, 1, c64(e[1])), (2, 2, c64(e[2]))],
            1e-14,
        )
        .unwrap();
        let v = HermitianOperator::from_triplets(
            3,
            vec![
                (0, 1, c64(v01)),
                (1, 0, c64(v01)),
                (0, 2, c64(v02)),
                (2, 0, c64(v02)),
                (1, 2, c64(v12)),
                (2, 1, c64(v12)),
            ],
            1e-14,
        )
        .unwrap();
        let freq = e[1] - e[0];
        let dh = DrivenHamiltonian { h0: &h0, drive: &v, frequency: freq };
        let period = 2.0 * PI / v01;
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * period / 20.0).collect();
        let mut psi0 = DVector::<C64>::zeros(3);
        psi0[0] = c64(1.0);
        let res = evolve_driven(&dh, &psi0, &times, &PropagationOptions::default()).unwrap();
        let levels = EffectiveLevels {
            energies: e.to_vec(),
            couplings: vec![
                vec![0.0, v01, v02],
                vec![v01, 0.0, v12],
                vec![v02, v12, 0.0],
            ],
        };
        let rwa = rwa_populations(&levels, freq, &times, 1).unwrap();
        let mut sq = 0.0;
        for (state, &model) in res.states.iter().zip(&rwa) {
            let full = state[1].norm_sqr();
            sq += (full - model) * (full - model);
        }
        let rms = (sq / times.len() as f64).sqrt();
        assert!(rms < 5e-3, "full vs RWA rms {rms:.2e}");
        // and the transfer actually completes
        let peak = res.states.iter().map(|s| s[1].norm_sqr()).fold(0.0, f64::max);
        assert!(peak > 0.99, "peak transfer {peak}");
    }

    #[test]
    fn test_project_levels_from_eigenpair() {
        let basis = BasisMap::new(4).unwrap();
        let p = ModelParams::new(4, 0.08, 1.0, 0.004, PI).unwrap();
        let pair = ground_state_pair(&basis, &p, &EigenOptions::lowest(2)).unwrap();
        let drive = crate::hamiltonian::build_drive(&basis, &p, 0.05).unwrap();
        let levels = project_levels(
            &drive,
            &pair.energies[..2],
            &[pair.ground.clone(), pair.excited.clone()],
        )
        .unwrap();
        // exchange-odd drive at the crossing: zero diagonal elements
        assert!(levels.coupling(0, 0).abs() < 1e-12);
        assert!(levels.coupling(1, 1).abs() < 1e-12);
        assert!(levels.coupling(0, 1).abs() > 1e-3);
        assert_eq!(levels.coupling(0, 1), levels.coupling(1, 0));
    }

    #[test]
    fn test_crossing_gap_model_against_spectrum() {
        // the hypot model only describes E1 - E0 while the branch pair is
        // still the lowest two levels, i.e. very close to the crossing
        let basis = BasisMap::new(4).unwrap();
        let p = ModelParams::new(4, 0.08, 1.0, 0.004, PI).unwrap();
        let at_pi = ground_state_pair(&basis, &p, &EigenOptions::lowest(2)).unwrap();
        let q = p.with_omega(PI + 0.005);
        let off = ground_state_pair(&basis, &q, &EigenOptions::lowest(2)).unwrap();
        assert!((off.gap - 2.288660e-2).abs() < 1e-7, "lowest gap {}", off.gap);
        let model = crossing_gap_model(analytic_branch_splitting(&q), at_pi.gap);
        let rel = (off.gap - model).abs() / off.gap;
        assert!(rel < 0.02, "gap {} vs two-level model {model} (rel {rel:.3})", off.gap);
    }
}
