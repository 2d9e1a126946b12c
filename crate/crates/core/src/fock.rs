//! Fixed-N Fock basis over the three quasi-momentum modes k = -1, 0, +1.
//!
//! A basis state is an occupation triple (n_{-1}, n_0, n_{+1}) with
//! n_{-1} + n_0 + n_{+1} = N. For N atoms the sector dimension is
//! D = (N+1)(N+2)/2. Enumeration is deterministic: descending lexicographic
//! on (n_{-1}, n_0, n_{+1}), n_{-1} outermost, so |N,0,0> gets index 0 and
//! |0,0,N> gets index D-1. The inverse lookup is closed-form (triangular
//! offsets), so no hash map is needed on hot paths.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default cap on the sector dimension (refuse absurd N early).
pub const DEFAULT_DIM_CAP: usize = 200_000;

/// One of the three quasi-momentum modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Minus,
    Zero,
    Plus,
}

impl Mode {
    /// Quasi-momentum label k in {-1, 0, +1}.
    pub fn k(self) -> i32 {
        match self {
            Mode::Minus => -1,
            Mode::Zero => 0,
            Mode::Plus => 1,
        }
    }

    pub const ALL: [Mode; 3] = [Mode::Minus, Mode::Zero, Mode::Plus];
}

/// Occupation triple; total atom number is not tied to any particular
/// `BasisMap`, so ladder operators may step between N sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupationState {
    pub n_minus: u32,
    pub n_zero: u32,
    pub n_plus: u32,
}

impl OccupationState {
    pub fn new(n_minus: u32, n_zero: u32, n_plus: u32) -> Self {
        Self { n_minus, n_zero, n_plus }
    }

    pub fn total(&self) -> u32 {
        self.n_minus + self.n_zero + self.n_plus
    }

    pub fn occupation(&self, mode: Mode) -> u32 {
        match mode {
            Mode::Minus => self.n_minus,
            Mode::Zero => self.n_zero,
            Mode::Plus => self.n_plus,
        }
    }

    fn with_occupation(mut self, mode: Mode, n: u32) -> Self {
        match mode {
            Mode::Minus => self.n_minus = n,
            Mode::Zero => self.n_zero = n,
            Mode::Plus => self.n_plus = n,
        }
        self
    }

    /// Total quasi-momentum sum_k k*n_k modulo 3, in {0, 1, 2}. The pair
    /// scattering terms conserve it, which the Hamiltonian tests exploit.
    pub fn quasimomentum_mod3(&self) -> u32 {
        // k = -1 contributes +2 (mod 3)
        (2 * self.n_minus + self.n_plus) % 3
    }

    /// Exchange the k = 0 and k = +1 occupations (the Z2 operation that
    /// commutes with the Hamiltonian at rotation phase pi).
    pub fn exchange_zero_plus(&self) -> Self {
        Self { n_minus: self.n_minus, n_zero: self.n_plus, n_plus: self.n_zero }
    }

    /// Mirror k -> -k (exchanges the k = -1 and k = +1 occupations).
    pub fn mirror(&self) -> Self {
        Self { n_minus: self.n_plus, n_zero: self.n_zero, n_plus: self.n_minus }
    }
}

/// Apply the annihilation operator for `mode`. Returns the amplitude
/// sqrt(n_mode) and the resulting (N-1)-sector state, or None when the mode
/// is empty (the operator annihilates the state).
pub fn apply_lower(state: &OccupationState, mode: Mode) -> Option<(f64, OccupationState)> {
    let n = state.occupation(mode);
    if n == 0 {
        return None;
    }
    Some((f64::from(n).sqrt(), state.with_occupation(mode, n - 1)))
}

/// Apply the creation operator for `mode`: amplitude sqrt(n_mode + 1) and
/// the (N+1)-sector state.
pub fn apply_raise(state: &OccupationState, mode: Mode) -> (f64, OccupationState) {
    let n = state.occupation(mode);
    (f64::from(n + 1).sqrt(), state.with_occupation(mode, n + 1))
}

/// Enumerated fixed-N sector with closed-form index lookup.
#[derive(Debug, Clone)]
pub struct BasisMap {
    n: u32,
    states: Vec<OccupationState>,
}

impl BasisMap {
    /// Build the N-atom sector, refusing dimensions above `DEFAULT_DIM_CAP`.
    pub fn new(n: u32) -> Result<Self> {
        Self::with_cap(n, DEFAULT_DIM_CAP)
    }

    /// Build with an explicit dimension cap.
    pub fn with_cap(n: u32, cap: usize) -> Result<Self> {
        let dim = Self::dimension_for(n);
        if dim > cap {
            return Err(Error::BasisTooLarge { n, dim, cap });
        }
        let mut states = Vec::with_capacity(dim);
        for n_minus in (0..=n).rev() {
            for n_zero in (0..=(n - n_minus)).rev() {
                states.push(OccupationState::new(n_minus, n_zero, n - n_minus - n_zero));
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self { n, states })
    }

    /// Sector dimension (N+1)(N+2)/2 without building the basis.
    pub fn dimension_for(n: u32) -> usize {
        let n = n as usize;
        (n + 1) * (n + 2) / 2
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, index: usize) -> &OccupationState {
        &self.states[index]
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    /// Closed-form inverse lookup; None if the triple is not in this sector.
    pub fn index_of(&self, state: &OccupationState) -> Option<usize> {
        if state.total() != self.n {
            return None;
        }
        let block = (self.n - state.n_minus) as usize;
        let idx = block * (block + 1) / 2 + (block - state.n_zero as usize);
        debug_assert_eq!(self.states[idx], *state);
        Some(idx)
    }
}

/// Mean flow velocity of the condensate in a ring of circumference L for
/// rotation phase Omega: v = (hbar/m) * Omega / L, with hbar = 1.
pub fn rotation_phase_to_velocity(omega: f64, circumference: f64, mass: f64) -> Result<f64> {
    if !(circumference > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidParams(format!(
            "circumference and mass must be positive (got L = {circumference}, m = {mass})"
        )));
    }
    Ok(omega / (mass * circumference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force count of weak compositions of N into 3 parts.
    fn brute_force_dim(n: u32) -> usize {
        let mut count = 0;
        for a in 0..=n {
            for b in 0..=(n - a) {
                let _ = b;
                count += 1;
            }
        }
        count
    }

    #[test]
    fn test_dimension_matches_brute_force() {
        for n in 0..=25 {
            let b = BasisMap::new(n).unwrap();
            assert_eq!(b.dim(), brute_force_dim(n), "dimension wrong at N={n}");
            assert_eq!(b.dim(), BasisMap::dimension_for(n));
        }
        assert_eq!(BasisMap::dimension_for(1), 3);
        assert_eq!(BasisMap::dimension_for(2), 6);
        assert_eq!(BasisMap::dimension_for(30), 496);
    }

    #[test]
    fn test_enumeration_order_endpoints() {
        let b = BasisMap::new(5).unwrap();
        assert_eq!(*b.state(0), OccupationState::new(5, 0, 0));
        assert_eq!(*b.state(b.dim() - 1), OccupationState::new(0, 0, 5));
        // descending lexicographic throughout
        for w in b.states().windows(2) {
            let a = (w[0].n_minus, w[0].n_zero, w[0].n_plus);
            let c = (w[1].n_minus, w[1].n_zero, w[1].n_plus);
            assert!(a > c, "order violated: {a:?} before {c:?}");
        }
    }

    #[test]
    fn test_index_roundtrip() {
        for n in [0u32, 1, 2, 3, 7, 12, 30] {
            let b = BasisMap::new(n).unwrap();
            for i in 0..b.dim() {
                let s = *b.state(i);
                assert_eq!(b.index_of(&s), Some(i), "roundtrip failed at N={n} i={i}");
            }
        }
    }

    #[test]
    fn test_index_of_rejects_wrong_sector() {
        let b = BasisMap::new(4).unwrap();
        assert_eq!(b.index_of(&OccupationState::new(1, 1, 1)), None);
    }

    #[test]
    fn test_cap_refused() {
        // N = 1000 -> dim = 501501 > default cap
        match BasisMap::new(1000) {
            Err(Error::BasisTooLarge { dim, .. }) => assert_eq!(dim, 501_501),
            other => panic!("expected BasisTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn test_ladder_amplitudes() {
        let s = OccupationState::new(0, 3, 1);
        let (amp, t) = apply_lower(&s, Mode::Zero).unwrap();
        assert!((amp - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(t, OccupationState::new(0, 2, 1));
        assert!(apply_lower(&s, Mode::Minus).is_none(), "lowering an empty mode must vanish");
        let (amp, t) = apply_raise(&s, Mode::Plus);
        assert!((amp - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(t, OccupationState::new(0, 3, 2));
    }

    /// Matrix check of [a_k, a_k'^dag] = delta_{kk'} across sectors: build
    /// the rectangular representations of a_k (N -> N-1) and verify the
    /// commutator on the N-sector identity.
    #[test]
    fn test_ladder_commutation_matrix() {
        use nalgebra::DMatrix;
        let n = 4u32;
        let bn = BasisMap::new(n).unwrap();
        let bn_lo = BasisMap::new(n - 1).unwrap();
        let lower_rep = |mode: Mode| {
            let mut m = DMatrix::<f64>::zeros(bn_lo.dim(), bn.dim());
            for (j, s) in bn.states().iter().enumerate() {
                if let Some((amp, t)) = apply_lower(s, mode) {
                    m[(bn_lo.index_of(&t).unwrap(), j)] = amp;
                }
            }
            m
        };
        for k in Mode::ALL {
            for kp in Mode::ALL {
                let ak = lower_rep(k);
                let akp = lower_rep(kp);
                // a_k a_kp^dag - a_kp^dag a_k restricted to the N-1 sector:
                // rows/cols both in N-1; a_kp^dag: (N-1) -> N is akp^T.
                let comm = &ak * akp.transpose()
                    - {
                        // a_kp^dag a_k needs the (N-2)-sector hop
                        let bn_2 = BasisMap::new(n - 2).unwrap();
                        let mut ak_lo = DMatrix::<f64>::zeros(bn_2.dim(), bn_lo.dim());
                        for (j, s) in bn_lo.states().iter().enumerate() {
                            if let Some((amp, t)) = apply_lower(s, k) {
                                ak_lo[(bn_2.index_of(&t).unwrap(), j)] = amp;
                            }
                        }
                        let mut akp_lo = DMatrix::<f64>::zeros(bn_2.dim(), bn_lo.dim());
                        for (j, s) in bn_lo.states().iter().enumerate() {
                            if let Some((amp, t)) = apply_lower(s, kp) {
                                akp_lo[(bn_2.index_of(&t).unwrap(), j)] = amp;
                            }
                        }
                        akp_lo.transpose() * ak_lo
                    };
                let expected = if k == kp { 1.0 } else { 0.0 };
                let dev = (comm - DMatrix::identity(bn_lo.dim(), bn_lo.dim()) * expected)
                    .abs()
                    .max();
                assert!(
                    dev < 1e-12,
                    "[a_{:?}, a_{:?}^dag] != {expected}: max dev {dev:.2e}",
                    k,
                    kp
                );
            }
        }
    }

    #[test]
    fn test_velocity_kinematics() {
        // one flux quantum Omega = 2pi gives v0 = 2pi/(m L)
        let v = rotation_phase_to_velocity(2.0 * std::f64::consts::PI, 1.0, 1.0).unwrap();
        assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        let v = rotation_phase_to_velocity(std::f64::consts::PI, 2.0, 0.5).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-15);
        assert!(rotation_phase_to_velocity(1.0, 0.0, 1.0).is_err());
    }

    /// (n, a, z) with a + z <= n, generated without rejection.
    fn sector_occupation() -> impl Strategy<Value = (u32, u32, u32)> {
        (0u32..40)
            .prop_flat_map(|n| (Just(n), 0..=n))
            .prop_flat_map(|(n, a)| (Just(n), Just(a), 0..=(n - a)))
    }

    proptest! {
        #[test]
        fn prop_index_formula_consistent((n, a, z) in sector_occupation()) {
            let b = BasisMap::new(n).unwrap();
            let s = OccupationState::new(a, z, n - a - z);
            let idx = b.index_of(&s).unwrap();
            prop_assert_eq!(*b.state(idx), s);
        }

        #[test]
        fn prop_quasimomentum_conserved_by_pair_terms(a in 0u32..12, z in 0u32..12, p in 0u32..12) {
            // alpha_0^2 alpha_1^dag alpha_{-1}^dag keeps k mod 3
            let s = OccupationState::new(a, z, p);
            if z >= 2 {
                let (_, s1) = apply_lower(&s, Mode::Zero).unwrap();
                let (_, s2) = apply_lower(&s1, Mode::Zero).unwrap();
                let (_, s3) = apply_raise(&s2, Mode::Plus);
                let (_, s4) = apply_raise(&s3, Mode::Minus);
                prop_assert_eq!(s.quasimomentum_mod3(), s4.quasimomentum_mod3());
            }
        }
    }
}
