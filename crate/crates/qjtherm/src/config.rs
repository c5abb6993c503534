//! Run configuration: one JSON document, CLI flags win over file values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    swap_from_lifetime, EnergyShift, PartialSwap, TwoLevelMolecule,
};
use crate::tcspc::SynthParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Exactly one of `wavelength_nm` / `gap_ev`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_ev: Option<f64>,

    pub temperature_k: f64,

    /// Exactly one of `tau_ns` / `survival`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survival: Option<f64>,

    #[serde(default = "default_dt_ns")]
    pub dt_ns: f64,
    #[serde(default = "default_n_rounds")]
    pub n_rounds: usize,
    #[serde(default)]
    pub bath_excitation: f64,
    /// Monte Carlo sample count; exact enumeration when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Use the uncorrected trajectory-class labels for comparison runs.
    #[serde(default)]
    pub printed_table: bool,

    #[serde(default)]
    pub shift: ShiftConfig,

    #[serde(default)]
    pub synth: SynthConfig,
}

fn default_dt_ns() -> f64 {
    1.0
}

fn default_n_rounds() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    #[serde(default)]
    pub delta_ev: f64,
    #[serde(default)]
    pub epsilon_ev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub rep_rate_mhz: f64,
    pub n_cycles: u64,
    pub excitation_prob: f64,
    pub detection_efficiency: f64,
    pub dark_rate_hz: f64,
    pub bin_width_ns: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = SynthParams::default();
        Self {
            rep_rate_mhz: p.rep_rate_mhz,
            n_cycles: p.n_cycles,
            excitation_prob: p.excitation_prob,
            detection_efficiency: p.detection_efficiency,
            dark_rate_hz: p.dark_rate_hz,
            bin_width_ns: p.bin_width_ns,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            wavelength_nm: Some(785.0),
            gap_ev: None,
            temperature_k: 4.0,
            tau_ns: Some(5.0),
            survival: None,
            dt_ns: default_dt_ns(),
            n_rounds: default_n_rounds(),
            bath_excitation: 0.0,
            n_samples: None,
            seed: 0,
            printed_table: false,
            shift: ShiftConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.wavelength_nm, self.gap_ev) {
            (Some(_), Some(_)) => {
                return Err(Error::domain("set exactly one of wavelength_nm / gap_ev, not both"))
            }
            (None, None) => {
                return Err(Error::domain("one of wavelength_nm / gap_ev is required"))
            }
            _ => {}
        }
        match (self.tau_ns, self.survival) {
            (Some(_), Some(_)) => {
                return Err(Error::domain("set exactly one of tau_ns / survival, not both"))
            }
            (None, None) => return Err(Error::domain("one of tau_ns / survival is required")),
            _ => {}
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::domain(format!(
                "non-positive temperature: {} K",
                self.temperature_k
            )));
        }
        Ok(())
    }

    pub fn molecule(&self) -> Result<TwoLevelMolecule> {
        match (self.wavelength_nm, self.gap_ev) {
            (Some(wl), None) => TwoLevelMolecule::from_wavelength(wl),
            (None, Some(gap)) => TwoLevelMolecule::from_gap(gap),
            _ => Err(Error::domain("one of wavelength_nm / gap_ev is required")),
        }
    }

    pub fn swap(&self) -> Result<PartialSwap> {
        match (self.tau_ns, self.survival) {
            (Some(tau), None) => swap_from_lifetime(tau, self.dt_ns),
            (None, Some(s)) => PartialSwap::from_survival(s),
            _ => Err(Error::domain("one of tau_ns / survival is required")),
        }
    }

    pub fn energy_shift(&self) -> EnergyShift {
        EnergyShift::new(self.shift.delta_ev, self.shift.epsilon_ev)
    }

    pub fn synth_params(&self) -> Result<SynthParams> {
        let tau = self
            .tau_ns
            .ok_or_else(|| Error::domain("synthesis requires tau_ns"))?;
        Ok(SynthParams {
            tau_ns: tau,
            rep_rate_mhz: self.synth.rep_rate_mhz,
            n_cycles: self.synth.n_cycles,
            excitation_prob: self.synth.excitation_prob,
            detection_efficiency: self.synth.detection_efficiency,
            dark_rate_hz: self.synth.dark_rate_hz,
            bin_width_ns: self.synth.bin_width_ns,
        })
    }
}
