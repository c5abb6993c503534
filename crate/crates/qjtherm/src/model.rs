//! Two-level emitter, thermal occupations, and the partial-swap coupling
//! between the molecule and a single bath photon mode.
//!
//! Units: energies in eV, wavelengths in nm, temperatures in K, times in ns.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{thermal_energy_ev, HC_EV_NM};
use crate::error::{Error, Result};
use crate::numeric::log1p_exp;

/// Ground/excited electronic levels with a positive gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelMolecule {
    e_ground: f64,
    e_excited: f64,
}

impl TwoLevelMolecule {
    pub fn new(e_ground_ev: f64, e_excited_ev: f64) -> Result<Self> {
        if !(e_excited_ev > e_ground_ev) {
            return Err(Error::domain(format!(
                "excited level ({e_excited_ev} eV) must lie above ground ({e_ground_ev} eV)"
            )));
        }
        Ok(Self { e_ground: e_ground_ev, e_excited: e_excited_ev })
    }

    /// Molecule with ground level at 0 and the given gap. Zero gap is
    /// accepted here for symmetry tests; estimators that divide by the gap
    /// reject it at their own boundary.
    pub fn from_gap(gap_ev: f64) -> Result<Self> {
        if gap_ev < 0.0 {
            return Err(Error::domain(format!("negative gap: {gap_ev} eV")));
        }
        Ok(Self { e_ground: 0.0, e_excited: gap_ev })
    }

    /// Molecule whose gap matches a transition at the given wavelength.
    pub fn from_wavelength(wavelength_nm: f64) -> Result<Self> {
        Self::from_gap(photon_energy(wavelength_nm)?)
    }

    pub fn e_ground(&self) -> f64 {
        self.e_ground
    }

    pub fn e_excited(&self) -> f64 {
        self.e_excited
    }

    pub fn gap_ev(&self) -> f64 {
        self.e_excited - self.e_ground
    }
}

/// Photon energy in eV for a wavelength in nm.
pub fn photon_energy(wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0) {
        return Err(Error::domain(format!("non-positive wavelength: {wavelength_nm} nm")));
    }
    Ok(HC_EV_NM / wavelength_nm)
}

/// Level occupations with their log-domain counterparts.
///
/// The linear probabilities underflow for gaps like 1.58 eV at 4 K
/// (the excited weight is e^{-4582}); the log fields stay exact there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalOccupation {
    p_ground: f64,
    p_excited: f64,
    log_p_ground: f64,
    log_p_excited: f64,
}

impl ThermalOccupation {
    pub fn new(p_ground: f64, p_excited: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_ground) || !(0.0..=1.0).contains(&p_excited) {
            return Err(Error::domain("occupations must lie in [0, 1]".to_string()));
        }
        if (p_ground + p_excited - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "occupations must sum to 1, got {}",
                p_ground + p_excited
            )));
        }
        Ok(Self {
            p_ground,
            p_excited,
            log_p_ground: p_ground.ln(),
            log_p_excited: p_excited.ln(),
        })
    }

    fn from_logs(log_p_ground: f64, log_p_excited: f64) -> Self {
        Self {
            p_ground: log_p_ground.exp(),
            p_excited: log_p_excited.exp(),
            log_p_ground,
            log_p_excited,
        }
    }

    pub fn p_ground(&self) -> f64 {
        self.p_ground
    }

    pub fn p_excited(&self) -> f64 {
        self.p_excited
    }

    /// ln p_ground; finite even when the linear value rounds to 0 or 1.
    pub fn log_p_ground(&self) -> f64 {
        self.log_p_ground
    }

    /// ln p_excited; finite even when the linear value underflows to 0.
    pub fn log_p_excited(&self) -> f64 {
        self.log_p_excited
    }

    /// Occupations exchanged, as done by the resonant laser pulse.
    pub fn swapped(&self) -> Self {
        Self {
            p_ground: self.p_excited,
            p_excited: self.p_ground,
            log_p_ground: self.log_p_excited,
            log_p_excited: self.log_p_ground,
        }
    }
}

/// Gibbs occupation of the two levels at the given temperature.
///
/// Evaluated as 1/(1+e^{±x}) with x = ΔE/(k_B T), so x up to ~1e4 neither
/// overflows nor loses the log-domain values.
pub fn thermal_state(molecule: &TwoLevelMolecule, temperature_k: f64) -> Result<ThermalOccupation> {
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("non-positive temperature: {temperature_k} K")));
    }
    let x = molecule.gap_ev() / thermal_energy_ev(temperature_k);
    // ln p_g = -ln(1+e^{-x}), ln p_e = -x - ln(1+e^{-x})
    let log_z = log1p_exp(-x);
    Ok(ThermalOccupation::from_logs(-log_z, -x - log_z))
}

/// The (μ, ν) amplitudes of the molecule–bath partial swap,
/// with |μ|² + |ν|² = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSwap {
    mu: Complex64,
    nu: Complex64,
}

impl PartialSwap {
    pub fn new(mu: Complex64, nu: Complex64) -> Result<Self> {
        let norm = mu.norm_sqr() + nu.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("|mu|^2 + |nu|^2 = {norm}, expected 1")));
        }
        Ok(Self { mu, nu })
    }

    /// Real non-negative amplitudes with per-round survival |μ|² = s.
    pub fn from_survival(s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("survival probability {s} outside [0, 1]")));
        }
        Ok(Self {
            mu: Complex64::new(s.sqrt(), 0.0),
            nu: Complex64::new((1.0 - s).sqrt(), 0.0),
        })
    }

    pub fn mu(&self) -> Complex64 {
        self.mu
    }

    pub fn nu(&self) -> Complex64 {
        self.nu
    }

    /// Per-round survival probability |μ|².
    pub fn survival(&self) -> f64 {
        self.mu.norm_sqr()
    }
}

/// Swap whose n-round survival |μ|^{2n} reproduces exponential decay with
/// lifetime τ at the bin edges: |μ|² = exp(-dt/τ).
pub fn swap_from_lifetime(tau_ns: f64, dt_ns: f64) -> Result<PartialSwap> {
    if !(tau_ns > 0.0) {
        return Err(Error::domain(format!("non-positive lifetime: {tau_ns} ns")));
    }
    if dt_ns < 0.0 {
        return Err(Error::domain(format!("negative time step: {dt_ns} ns")));
    }
    let mu = (-dt_ns / (2.0 * tau_ns)).exp();
    PartialSwap::new(
        Complex64::new(mu, 0.0),
        Complex64::new((1.0 - mu * mu).max(0.0).sqrt(), 0.0),
    )
}

/// Joint molecule ⊗ bath-mode pure state over the ordered basis
/// (|g,0⟩, |g,1⟩, |e,0⟩, |e,1⟩); second label is the photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    amplitudes: [Complex64; 4],
}

pub const BASIS_G0: usize = 0;
pub const BASIS_G1: usize = 1;
pub const BASIS_E0: usize = 2;
pub const BASIS_E1: usize = 3;

impl JointState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("state norm^2 = {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn basis(index: usize) -> Self {
        let mut amplitudes = [Complex64::ZERO; 4];
        amplitudes[index] = Complex64::ONE;
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// One round of the partial-swap unitary: identity on |g,0⟩ and |e,1⟩,
/// the (μ, -ν*; ν, μ*) rotation on the (|g,1⟩, |e,0⟩) pair.
pub fn apply_partial_swap(state: &JointState, swap: &PartialSwap) -> Result<JointState> {
    if (state.norm_sqr() - 1.0).abs() > 1e-10 {
        return Err(Error::domain("input state is not normalized".to_string()));
    }
    let a = state.amplitudes;
    let g1 = swap.mu * a[BASIS_G1] - swap.nu.conj() * a[BASIS_E0];
    let e0 = swap.nu * a[BASIS_G1] + swap.mu.conj() * a[BASIS_E0];
    Ok(JointState {
        amplitudes: [a[BASIS_G0], g1, e0, a[BASIS_E1]],
    })
}

/// Common shift δ of both levels plus differential shift ε of the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyShift {
    pub delta_ev: f64,
    pub epsilon_ev: f64,
}

impl EnergyShift {
    pub fn new(delta_ev: f64, epsilon_ev: f64) -> Self {
        Self { delta_ev, epsilon_ev }
    }

    pub fn inverse(&self) -> Self {
        Self { delta_ev: -self.delta_ev, epsilon_ev: -self.epsilon_ev }
    }
}

/// E_g → E_g + δ, E_e → E_e + δ + ε; the gap becomes ΔE + ε.
pub fn shift_levels(molecule: &TwoLevelMolecule, shift: &EnergyShift) -> Result<TwoLevelMolecule> {
    let gap = molecule.gap_ev() + shift.epsilon_ev;
    if !(gap > 0.0) {
        return Err(Error::domain(format!(
            "shift closes or inverts the gap: {} + {} = {gap} eV",
            molecule.gap_ev(),
            shift.epsilon_ev
        )));
    }
    TwoLevelMolecule::new(
        molecule.e_ground + shift.delta_ev,
        molecule.e_excited + shift.delta_ev + shift.epsilon_ev,
    )
}

/// Uniform measurement-round grid: round n happens at t_n = n·dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt_ns: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt_ns: f64, n_steps: usize) -> Result<Self> {
        if !(dt_ns > 0.0) {
            return Err(Error::domain(format!("non-positive time step: {dt_ns} ns")));
        }
        Ok(Self { dt_ns, n_steps })
    }

    pub fn time_ns(&self, step: usize) -> f64 {
        step as f64 * self.dt_ns
    }
}
