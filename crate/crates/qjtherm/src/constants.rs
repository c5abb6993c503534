//! Physical constants (CODATA), fixed at compile time.

/// Boltzmann constant in eV/K (CODATA 2018, exact).
pub const BOLTZMANN_EV_PER_K: f64 = 8.617_333_262e-5;

/// hc in eV·nm (CODATA 2018), for wavelength ↔ photon-energy conversion.
pub const HC_EV_NM: f64 = 1_239.841_984;

const _: () = assert!(BOLTZMANN_EV_PER_K > 0.0 && HC_EV_NM > 0.0);

/// k_B·T in eV.
pub fn thermal_energy_ev(temperature_k: f64) -> f64 {
    BOLTZMANN_EV_PER_K * temperature_k
}
