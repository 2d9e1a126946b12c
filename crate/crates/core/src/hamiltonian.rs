//! Three-mode Bose-Hubbard Hamiltonian in the quasi-momentum basis.
//!
//! N bosons occupy the quasi-momentum modes k in {-1, 0, +1} of a three-site
//! ring pierced by a rotation phase Omega (hbar = 1, energies in units of the
//! tunneling energy unless `j` is rescaled). The Hamiltonian splits into
//!
//! * interaction: (U/3) [ sum_k n_k (n_k - 1) + 4 sum_{k<k'} n_k n_{k'}
//!   + 2 (a_0^2 a_1'a_-1' + a_1^2 a_0'a_-1' + a_-1^2 a_1'a_0' + h.c.) ],
//!   where a_k' denotes the creation operator for mode k,
//! * tunneling: -2 J sum_k n_k cos((Omega - 2 pi k)/3),
//! * tunneling asymmetry (one weak link of strength J - dJ):
//!   (2 dJ/3) [ sum_k n_k cos((Omega - 2 pi k)/3)
//!   + cos((Omega + 2 pi)/3) (a_0'a_1 + h.c.)
//!   + cos(Omega/3)          (a_1'a_-1 + h.c.)
//!   + cos((Omega - 2 pi)/3) (a_-1'a_0 + h.c.) ].
//!
//! The interaction pair terms conserve total quasi-momentum mod 3; the
//! asymmetry hops do not (the weak link breaks the ring's translation
//! symmetry and couples the momentum sectors, which is what opens the gap at
//! the Omega = pi crossing). Modulating the rotation phase,
//! Omega(t) = Omega + A sin(omega_d t), linearizes to the drive operator
//! A * dH/dOmega, which `build_drive` assembles from the exact derivative of
//! every coefficient.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_lower, apply_raise, BasisMap, Mode};
use crate::operator::HermitianOperator;
use crate::C64;

/// Largest per-site modulation phase |A|/3 accepted by `build_drive`; beyond
/// this the linear-in-A drive stops being a faithful surrogate for the exact
/// phase modulation.
pub const DRIVE_LINEARITY_BOUND: f64 = 0.1;

/// Hermiticity audit tolerance relative to the operator norm scale. Assembly
/// pushes both directions of every coupling with identical factors, so the
/// only asymmetry left is association order of the sqrt products (~1 ulp).
const HERMITICITY_REL_TOL: f64 = 1e-13;

type Triplet = (usize, usize, C64);

/// Physical parameters of the ring: atom number, on-site interaction,
/// tunneling energy, weak-link asymmetry and rotation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Atom number N.
    pub n: u32,
    /// On-site interaction energy U.
    pub u: f64,
    /// Tunneling energy J (the energy unit of the engine when set to 1).
    pub j: f64,
    /// Weak-link tunneling reduction dJ; the weak link tunnels at J - dJ.
    pub delta_j: f64,
    /// Rotation phase Omega accumulated around the full ring.
    pub omega: f64,
}

impl ModelParams {
    pub fn new(n: u32, u: f64, j: f64, delta_j: f64, omega: f64) -> Result<Self> {
        let p = Self { n, u, j, delta_j, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("u", self.u),
            ("j", self.j),
            ("delta_j", self.delta_j),
            ("omega", self.omega),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("atom number must be at least 1".into()));
        }
        if self.u < 0.0 {
            return Err(Error::InvalidParams(format!(
                "interaction energy must be non-negative, got u = {}",
                self.u
            )));
        }
        if self.j < 0.0 {
            return Err(Error::InvalidParams(format!(
                "tunneling energy must be non-negative, got j = {}",
                self.j
            )));
        }
        if !(self.delta_j >= 0.0 && self.delta_j <= self.j) {
            return Err(Error::InvalidParams(format!(
                "weak-link asymmetry must satisfy 0 <= delta_j <= j, got delta_j = {} with j = {}",
                self.delta_j, self.j
            )));
        }
        Ok(())
    }

    /// Same ring at a different rotation phase.
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }
}

/// The three Hermitian pieces of the static Hamiltonian.
#[derive(Debug, Clone)]
pub struct H0Parts {
    pub interaction: HermitianOperator,
    pub tunneling: HermitianOperator,
    pub asymmetry: HermitianOperator,
}

/// Phase angle (Omega - 2 pi k)/3 entering every k-dependent coefficient.
fn mode_angle(omega: f64, mode: Mode) -> f64 {
    (omega - 2.0 * PI * f64::from(mode.k())) / 3.0
}

/// Hop angle for the asymmetry link between modes a and b:
/// (Omega + 2 pi (k_a + k_b))/3, matching the per-pair table in the module doc.
fn hop_angle(omega: f64, a: Mode, b: Mode) -> f64 {
    (omega + 2.0 * PI * f64::from(a.k() + b.k())) / 3.0
}

/// Unordered mode pairs coupled by the asymmetry hops.
const HOP_PAIRS: [(Mode, Mode); 3] =
    [(Mode::Zero, Mode::Plus), (Mode::Plus, Mode::Minus), (Mode::Minus, Mode::Zero)];

/// Interaction pair-scattering terms as (lowered-twice, raised, raised).
const PAIR_EXCHANGE: [(Mode, Mode, Mode); 3] = [
    (Mode::Zero, Mode::Plus, Mode::Minus),
    (Mode::Plus, Mode::Zero, Mode::Minus),
    (Mode::Minus, Mode::Plus, Mode::Zero),
];

/// Push coeff * a_raise' a_lower for every basis column (one direction of a
/// Hermitian hop; the caller pushes the conjugate direction too).
fn push_one_body(basis: &BasisMap, out: &mut Vec<Triplet>, coeff: f64, raise: Mode, lower: Mode) {
    if coeff == 0.0 {
        return;
    }
    for (col, s) in basis.states().iter().enumerate() {
        if let Some((amp_l, s1)) = apply_lower(s, lower) {
            let (amp_r, s2) = apply_raise(&s1, raise);
            let row = basis.index_of(&s2).expect("one-body hop conserves total N");
            out.push((row, col, C64::new(coeff * amp_l * amp_r, 0.0)));
        }
    }
}

/// Push coeff * a_ra' a_rb' a_sq a_sq (forward direction of a pair term).
fn push_pair_forward(
    basis: &BasisMap,
    out: &mut Vec<Triplet>,
    coeff: f64,
    sq: Mode,
    ra: Mode,
    rb: Mode,
) {
    for (col, s) in basis.states().iter().enumerate() {
        let Some((l1, s1)) = apply_lower(s, sq) else { continue };
        let Some((l2, s2)) = apply_lower(&s1, sq) else { continue };
        let (r1, s3) = apply_raise(&s2, ra);
        let (r2, s4) = apply_raise(&s3, rb);
        let row = basis.index_of(&s4).expect("pair scattering conserves total N");
        out.push((row, col, C64::new(coeff * l1 * l2 * r1 * r2, 0.0)));
    }
}

/// Push coeff * a_sq' a_sq' a_ra a_rb (conjugate direction of a pair term).
fn push_pair_conjugate(
    basis: &BasisMap,
    out: &mut Vec<Triplet>,
    coeff: f64,
    sq: Mode,
    ra: Mode,
    rb: Mode,
) {
    for (col, s) in basis.states().iter().enumerate() {
        let Some((l1, s1)) = apply_lower(s, ra) else { continue };
        let Some((l2, s2)) = apply_lower(&s1, rb) else { continue };
        let (r1, s3) = apply_raise(&s2, sq);
        let (r2, s4) = apply_raise(&s3, sq);
        let row = basis.index_of(&s4).expect("pair scattering conserves total N");
        out.push((row, col, C64::new(coeff * l1 * l2 * r1 * r2, 0.0)));
    }
}

fn interaction_triplets(basis: &BasisMap, u: f64) -> Vec<Triplet> {
    let mut out = Vec::new();
    if u == 0.0 {
        return out;
    }
    let c = u / 3.0;
    for (i, s) in basis.states().iter().enumerate() {
        let (a, z, p) =
            (f64::from(s.n_minus), f64::from(s.n_zero), f64::from(s.n_plus));
        let diag =
            a * (a - 1.0) + z * (z - 1.0) + p * (p - 1.0) + 4.0 * (a * z + a * p + z * p);
        out.push((i, i, C64::new(c * diag, 0.0)));
    }
    for &(sq, ra, rb) in &PAIR_EXCHANGE {
        push_pair_forward(basis, &mut out, 2.0 * c, sq, ra, rb);
        push_pair_conjugate(basis, &mut out, 2.0 * c, sq, ra, rb);
    }
    out
}

fn tunneling_triplets(basis: &BasisMap, j: f64, omega: f64) -> Vec<Triplet> {
    let mut out = Vec::with_capacity(basis.dim());
    if j == 0.0 {
        return out;
    }
    for (i, s) in basis.states().iter().enumerate() {
        let diag: f64 = Mode::ALL
            .iter()
            .map(|&m| f64::from(s.occupation(m)) * mode_angle(omega, m).cos())
            .sum();
        out.push((i, i, C64::new(-2.0 * j * diag, 0.0)));
    }
    out
}

fn asymmetry_triplets(basis: &BasisMap, delta_j: f64, omega: f64) -> Vec<Triplet> {
    let mut out = Vec::new();
    if delta_j == 0.0 {
        return out;
    }
    let c = 2.0 * delta_j / 3.0;
    for (i, s) in basis.states().iter().enumerate() {
        let diag: f64 = Mode::ALL
            .iter()
            .map(|&m| f64::from(s.occupation(m)) * mode_angle(omega, m).cos())
            .sum();
        out.push((i, i, C64::new(c * diag, 0.0)));
    }
    for &(a, b) in &HOP_PAIRS {
        let coeff = c * hop_angle(omega, a, b).cos();
        push_one_body(basis, &mut out, coeff, a, b);
        push_one_body(basis, &mut out, coeff, b, a);
    }
    out
}

fn drive_triplets(basis: &BasisMap, params: &ModelParams, amplitude: f64) -> Vec<Triplet> {
    let mut out = Vec::new();
    let omega = params.omega;
    // d/dOmega of the number terms: each cos((Omega - 2 pi k)/3) derivative
    // brings a factor -sin(.)/3.
    let diag_coeff = amplitude * (2.0 * params.j / 3.0 - 2.0 * params.delta_j / 9.0);
    if diag_coeff != 0.0 {
        for (i, s) in basis.states().iter().enumerate() {
            let diag: f64 = Mode::ALL
                .iter()
                .map(|&m| f64::from(s.occupation(m)) * mode_angle(omega, m).sin())
                .sum();
            out.push((i, i, C64::new(diag_coeff * diag, 0.0)));
        }
    }
    let hop_scale = -amplitude * 2.0 * params.delta_j / 9.0;
    if hop_scale != 0.0 {
        for &(a, b) in &HOP_PAIRS {
            let coeff = hop_scale * hop_angle(omega, a, b).sin();
            push_one_body(basis, &mut out, coeff, a, b);
            push_one_body(basis, &mut out, coeff, b, a);
        }
    }
    out
}

fn finish(dim: usize, triplets: Vec<Triplet>) -> Result<HermitianOperator> {
    let op = HermitianOperator::from_triplets_unaudited(dim, triplets)?;
    op.audit_hermiticity(HERMITICITY_REL_TOL * (1.0 + op.inf_norm()))?;
    Ok(op)
}

/// Static Hamiltonian H(Omega) on the given N-atom basis.
pub fn build_h0(basis: &BasisMap, params: &ModelParams) -> Result<HermitianOperator> {
    params.validate()?;
    if basis.n() != params.n {
        return Err(Error::InvalidParams(format!(
            "basis sector N = {} does not match params.n = {}",
            basis.n(),
            params.n
        )));
    }
    let mut t = interaction_triplets(basis, params.u);
    t.extend(tunneling_triplets(basis, params.j, params.omega));
    t.extend(asymmetry_triplets(basis, params.delta_j, params.omega));
    finish(basis.dim(), t)
}

/// The three pieces of the static Hamiltonian separately (dense storage).
pub fn build_h0_parts(basis: &BasisMap, params: &ModelParams) -> Result<H0Parts> {
    params.validate()?;
    Ok(H0Parts {
        interaction: finish(basis.dim(), interaction_triplets(basis, params.u))?,
        tunneling: finish(basis.dim(), tunneling_triplets(basis, params.j, params.omega))?,
        asymmetry: finish(basis.dim(), asymmetry_triplets(basis, params.delta_j, params.omega))?,
    })
}

/// Drive operator A * dH/dOmega for phase modulation of amplitude A.
/// Rejects amplitudes with per-site phase |A|/3 above `DRIVE_LINEARITY_BOUND`.
pub fn build_drive(
    basis: &BasisMap,
    params: &ModelParams,
    amplitude: f64,
) -> Result<HermitianOperator> {
    let ratio = amplitude.abs() / 3.0;
    if !ratio.is_finite() || ratio > DRIVE_LINEARITY_BOUND {
        return Err(Error::DriveAmplitude { ratio, bound: DRIVE_LINEARITY_BOUND });
    }
    build_drive_unchecked(basis, params, amplitude)
}

/// Drive operator without the linearity bound (used by derivative oracles).
pub fn build_drive_unchecked(
    basis: &BasisMap,
    params: &ModelParams,
    amplitude: f64,
) -> Result<HermitianOperator> {
    params.validate()?;
    if !amplitude.is_finite() {
        return Err(Error::NonFinite("drive amplitude".into()));
    }
    finish(basis.dim(), drive_triplets(basis, params, amplitude))
}
