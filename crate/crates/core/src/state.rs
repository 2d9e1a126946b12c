//! Many-body kets on the fixed-N basis: Fock states, the two-mode NOON
//! superpositions and the symmetric-orbital condensate, plus overlap and
//! occupation helpers shared by the protocol layer.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fock::{BasisMap, Mode, OccupationState};
use crate::C64;

/// Unit ket on a single Fock state.
pub fn fock(basis: &BasisMap, state: &OccupationState) -> Result<DVector<C64>> {
    let idx = basis.index_of(state).ok_or_else(|| {
        Error::InvalidParams(format!("state {state:?} is not in the N = {} sector", basis.n()))
    })?;
    let mut v = DVector::<C64>::zeros(basis.dim());
    v[idx] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Relative sign inside a two-branch superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// NOON superposition (|0, N, 0> +- |0, 0, N>)/sqrt(2) over the k = 0 and
/// k = +1 modes.
pub fn noon_superposition(basis: &BasisMap, parity: Parity) -> Result<DVector<C64>> {
    let n = basis.n();
    if n == 0 {
        return Err(Error::InvalidParams("NOON state needs at least one atom".into()));
    }
    let a = fock(basis, &OccupationState::new(0, n, 0))?;
    let b = fock(basis, &OccupationState::new(0, 0, n))?;
    Ok((a + b * C64::new(parity.sign(), 0.0)) * C64::new(0.5f64.sqrt(), 0.0))
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc
}

/// All N atoms condensed in the symmetric orbital (mode0 + mode+1)/sqrt(2):
/// binomial amplitudes sqrt(C(N, n0)) 2^{-N/2} on (0, n0, N - n0).
pub fn symmetric_condensate(basis: &BasisMap) -> Result<DVector<C64>> {
    let n = basis.n();
    if n == 0 {
        return Err(Error::InvalidParams("condensate needs at least one atom".into()));
    }
    let mut v = DVector::<C64>::zeros(basis.dim());
    let scale = 0.5f64.powf(f64::from(n) / 2.0);
    for n_zero in 0..=n {
        let s = OccupationState::new(0, n_zero, n - n_zero);
        let idx = basis.index_of(&s).expect("state is in sector");
        v[idx] = C64::new(binomial(n, n_zero).sqrt() * scale, 0.0);
    }
    Ok(v)
}

/// <a|b>.
pub fn overlap(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.dotc(b)
}

/// Overlap magnitude |<a|b>|.
pub fn fidelity(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    overlap(a, b).norm()
}

/// Probability carried by one Fock state.
pub fn fock_population(basis: &BasisMap, psi: &DVector<C64>, state: &OccupationState) -> f64 {
    basis.index_of(state).map_or(0.0, |i| psi[i].norm_sqr())
}

/// Expectation value of the mode occupation <n_k>.
pub fn mode_occupation(basis: &BasisMap, psi: &DVector<C64>, mode: Mode) -> f64 {
    basis
        .states()
        .iter()
        .zip(psi.iter())
        .map(|(s, z)| f64::from(s.occupation(mode)) * z.norm_sqr())
        .sum()
}
