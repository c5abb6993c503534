//! Heat/work statistics, the per-round Jarzynski functional, and free
//! energy differences under level shifts.
//!
//! Sign conventions. Q is heat INTO the molecule, so an emission carries
//! Q = -ΔE, and the first law reads ΔU = W + Q. Two free-energy signs are
//! in play: [`free_energy_difference`] and [`infer_common_shift`] use the
//! level-shift relation ΔF = k_B T ln(Z_f/Z_i) = -δ + k_B T ln((1+e^{-βΔE'})/(1+e^{-βΔE})),
//! while [`estimate_delta_f_from_work`] returns the standard F_f - F_i of
//! the work identity ⟨e^{-βW}⟩ = e^{-β(F_f-F_i)}. The two are negatives of
//! each other; [`FreeEnergyDelta::negated`] bridges them, as the shift
//! inference pipeline does.

use serde::{Deserialize, Serialize};

use crate::constants::thermal_energy_ev;
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{thermal_state, EnergyShift, ThermalOccupation, TwoLevelMolecule};
use crate::numeric::{log1p_exp, log_add_exp, log_sub_exp, log_sum_exp};
use crate::trajectory::{JumpEvent, Trajectory, TrajectoryEnsemble};
use rand::Rng;

/// Heat mass on the three-point support {-ΔE, 0, +ΔE} after a given round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatDistribution {
    pub gap_ev: f64,
    pub p_minus: f64,
    pub p_zero: f64,
    pub p_plus: f64,
    pub round_index: usize,
}

impl HeatDistribution {
    pub fn new(gap_ev: f64, p_minus: f64, p_zero: f64, p_plus: f64, round_index: usize) -> Result<Self> {
        // summing many trajectory weights can overshoot 1 by a few ulp
        for p in [p_minus, p_zero, p_plus] {
            if !(-1e-12..=1.0 + 1e-12).contains(&p) {
                return Err(Error::domain(format!("heat probability {p} outside [0, 1]")));
            }
        }
        let sum = p_minus + p_zero + p_plus;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("heat probabilities sum to {sum}, expected 1")));
        }
        let clamp = |p: f64| p.clamp(0.0, 1.0);
        Ok(Self {
            gap_ev,
            p_minus: clamp(p_minus),
            p_zero: clamp(p_zero),
            p_plus: clamp(p_plus),
            round_index,
        })
    }

    /// Two-outcome projection lumping Q = 0 with Q = +ΔE, the form the
    /// closed-form heat distribution is stated in.
    pub fn two_bucket(&self) -> (f64, f64) {
        (self.p_plus + self.p_zero, self.p_minus)
    }
}

/// Closed-form heat distribution after n rounds: the emitted mass is
/// β(1-s^n); the remainder β·s^n + α has exchanged no net heat.
pub fn heat_distribution_closed_form(
    alpha: f64,
    beta_occ: f64,
    s: f64,
    n: usize,
    gap_ev: f64,
) -> Result<HeatDistribution> {
    if (alpha + beta_occ - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "occupations must sum to 1, got {}",
            alpha + beta_occ
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("survival {s} outside [0, 1]")));
    }
    if !(gap_ev > 0.0) {
        return Err(Error::domain("gap must be positive for heat binning".to_string()));
    }
    let sn = s.powi(n as i32);
    HeatDistribution::new(gap_ev, beta_occ * (1.0 - sn), beta_occ * sn + alpha, 0.0, n)
}

fn classify_heat(q_ev: f64, gap_ev: f64) -> Result<i8> {
    let tol = 1e-9 * gap_ev;
    if (q_ev + gap_ev).abs() <= tol {
        Ok(-1)
    } else if q_ev.abs() <= tol {
        Ok(0)
    } else if (q_ev - gap_ev).abs() <= tol {
        Ok(1)
    } else {
        Err(Error::domain(format!(
            "heat {q_ev} eV is not on the {{-ΔE, 0, +ΔE}} support for ΔE = {gap_ev} eV"
        )))
    }
}

/// Bins trajectory heat at the final round onto {-ΔE, 0, +ΔE}.
pub fn heat_distribution_from_ensemble(ensemble: &TrajectoryEnsemble) -> Result<HeatDistribution> {
    heat_distribution_at_round(ensemble, ensemble.n_rounds)
}

/// Heat distribution of the ensemble truncated after `round`.
pub fn heat_distribution_at_round(
    ensemble: &TrajectoryEnsemble,
    round: usize,
) -> Result<HeatDistribution> {
    if ensemble.trajectories.is_empty() {
        return Err(Error::domain("empty ensemble".to_string()));
    }
    let gap = ensemble.gap_ev();
    if !(gap > 0.0) {
        return Err(Error::domain("gap must be positive for heat binning".to_string()));
    }
    let mut buckets = [0.0f64; 3];
    for t in &ensemble.trajectories {
        let (_, q, _) = thermo_at(t, round);
        buckets[(classify_heat(q, gap)? + 1) as usize] += t.weight;
    }
    HeatDistribution::new(gap, buckets[0], buckets[1], buckets[2], round)
}

/// Work mass over its (small) support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkDistribution {
    pub support: Vec<(f64, f64)>,
}

impl WorkDistribution {
    pub fn from_ensemble(ensemble: &TrajectoryEnsemble) -> Self {
        let mut support: Vec<(f64, f64)> = Vec::new();
        for t in &ensemble.trajectories {
            match support.iter_mut().find(|(w, _)| *w == t.work_ev) {
                Some((_, p)) => *p += t.weight,
                None => support.push((t.work_ev, t.weight)),
            }
        }
        support.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { support }
    }
}

/// (W, Q, ΔU) of a trajectory truncated after `round`. Before its jump a
/// trajectory has exchanged no heat, so the truncated values are (W, 0, W).
fn thermo_at(t: &Trajectory, round: usize) -> (f64, f64, f64) {
    let jump_round = match t.event {
        JumpEvent::None => None,
        JumpEvent::Emission { round } | JumpEvent::Absorption { round } => Some(round),
    };
    match jump_round {
        Some(k) if round < k => (t.work_ev, 0.0, t.work_ev),
        _ => (t.work_ev, t.heat_ev, t.delta_u_ev),
    }
}

/// Per-round values of ⟨e^{-β(ΔU-Q)}⟩ over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JarzynskiSeries {
    /// Entry n is the functional over the ensemble truncated after round n.
    pub values: Vec<f64>,
    pub temperature_k: f64,
    /// True when evaluated by log-sum-exp (always, here).
    pub log_domain: bool,
}

impl JarzynskiSeries {
    pub fn max_deviation_from_unity(&self) -> f64 {
        self.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Evaluates ⟨e^{-β(ΔU-Q)}⟩ for every round 0..=n_rounds.
///
/// The sum runs in log domain over the trajectories' log-weights, so
/// exponents like ±4582 (785 nm at 4 K) neither overflow nor lose the
/// vanishing excited-branch contribution.
pub fn jarzynski_functional(
    ensemble: &TrajectoryEnsemble,
    temperature_k: f64,
) -> Result<JarzynskiSeries> {
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("non-positive temperature: {temperature_k} K")));
    }
    let kt = thermal_energy_ev(temperature_k);
    let mut values = Vec::with_capacity(ensemble.n_rounds + 1);
    let mut terms = Vec::with_capacity(ensemble.trajectories.len());
    for round in 0..=ensemble.n_rounds {
        terms.clear();
        for t in &ensemble.trajectories {
            if t.log_weight == f64::NEG_INFINITY {
                continue;
            }
            let (_, q, du) = thermo_at(t, round);
            terms.push(t.log_weight - (du - q) / kt);
        }
        values.push(log_sum_exp(&terms).exp());
    }
    Ok(JarzynskiSeries { values, temperature_k, log_domain: true })
}

/// Round-independent closed form of the functional for the pulse
/// protocol: p_g·e^{-βΔE} + p_e·e^{+βΔE} over the pre-pulse occupation.
/// Exactly 1 for a thermal occupation.
pub fn jarzynski_closed_form(
    occupation: &ThermalOccupation,
    gap_ev: f64,
    temperature_k: f64,
) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("non-positive temperature: {temperature_k} K")));
    }
    let x = gap_ev / thermal_energy_ev(temperature_k);
    Ok(log_add_exp(occupation.log_p_ground() - x, occupation.log_p_excited() + x).exp())
}

/// ΔF in the ln(Z_f/Z_i) convention of the level-shift relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyDelta {
    pub delta_f_ev: f64,
    pub temperature_k: f64,
}

impl FreeEnergyDelta {
    /// Flips to/from the standard F_f - F_i convention.
    pub fn negated(&self) -> Self {
        Self { delta_f_ev: -self.delta_f_ev, temperature_k: self.temperature_k }
    }
}

fn log_partition_ratio(gap_before_ev: f64, gap_after_ev: f64, kt: f64) -> f64 {
    log1p_exp(-gap_after_ev / kt) - log1p_exp(-gap_before_ev / kt)
}

/// ΔF = -δ + k_B T ln((1+e^{-βΔE'})/(1+e^{-βΔE})) with ΔE' = ΔE + ε,
/// evaluated with log1p so βΔE up to ~1e4 is exact.
pub fn free_energy_difference(
    molecule: &TwoLevelMolecule,
    shift: &EnergyShift,
    temperature_k: f64,
) -> Result<FreeEnergyDelta> {
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("non-positive temperature: {temperature_k} K")));
    }
    let shifted = crate::model::shift_levels(molecule, shift)?;
    let kt = thermal_energy_ev(temperature_k);
    let delta_f = -shift.delta_ev + kt * log_partition_ratio(molecule.gap_ev(), shifted.gap_ev(), kt);
    Ok(FreeEnergyDelta { delta_f_ev: delta_f, temperature_k })
}

/// Recovers the common shift δ from measured gaps and a ΔF in the
/// ln(Z_f/Z_i) convention: δ = -ΔF + k_B T ln((1+e^{-βΔE'})/(1+e^{-βΔE})).
pub fn infer_common_shift(
    gap_before_ev: f64,
    gap_after_ev: f64,
    delta_f: &FreeEnergyDelta,
    temperature_k: f64,
) -> Result<f64> {
    if !(gap_before_ev > 0.0) || !(gap_after_ev > 0.0) {
        return Err(Error::domain("gaps must be positive".to_string()));
    }
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("non-positive temperature: {temperature_k} K")));
    }
    let kt = thermal_energy_ev(temperature_k);
    Ok(-delta_f.delta_f_ev + kt * log_partition_ratio(gap_before_ev, gap_after_ev, kt))
}

/// Exponential work average ΔF̂ = -k_B T ln⟨e^{-βW}⟩ (standard F_f - F_i
/// convention) with a jackknife standard error.
pub fn estimate_delta_f_from_work(
    work_samples_ev: &[f64],
    temperature_k: f64,
) -> Result<(FreeEnergyDelta, f64)> {
    if work_samples_ev.len() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 work samples, got {}",
            work_samples_ev.len()
        )));
    }
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!("non-positive temperature: {temperature_k} K")));
    }
    let kt = thermal_energy_ev(temperature_k);
    let n = work_samples_ev.len() as f64;
    let xs: Vec<f64> = work_samples_ev.iter().map(|w| -w / kt).collect();
    let log_sum = log_sum_exp(&xs);
    let delta_f = -kt * (log_sum - n.ln());

    // jackknife over leave-one-out log-means
    let loo: Vec<f64> = xs
        .iter()
        .map(|&x| -kt * (log_sub_exp(log_sum, x) - (n - 1.0).ln()))
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1.0) / n;
    Ok((FreeEnergyDelta { delta_f_ev: delta_f, temperature_k }, var.sqrt()))
}

fn quench_work_block(
    rng: &mut impl Rng,
    len: usize,
    p_excited: f64,
    w_ground: f64,
    w_excited: f64,
) -> Vec<f64> {
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < p_excited {
                w_excited
            } else {
                w_ground
            }
        })
        .collect()
}

fn concat(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.extend(b);
    a
}

/// Work samples of the sudden quench E → E + shift on a thermal molecule:
/// the occupied level's shift, δ or δ + ε. The exact exponential average
/// satisfies ⟨e^{-βW}⟩ = Z_f/Z_i, the oracle identity the tests lean on.
pub fn sample_sudden_quench_work(
    molecule: &TwoLevelMolecule,
    shift: &EnergyShift,
    temperature_k: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1".to_string()));
    }
    let occ = thermal_state(molecule, temperature_k)?;
    let p_e = occ.p_excited();
    let (w_g, w_e) = (shift.delta_ev, shift.delta_ev + shift.epsilon_ev);
    Ok(exec::map_reduce_blocks(
        n_samples as usize,
        exec::DEFAULT_BLOCK,
        seed,
        |rng, len| quench_work_block(rng, len, p_e, w_g, w_e),
        concat,
    )
    .expect("n_samples >= 1"))
}

/// Sequential reference path for [`sample_sudden_quench_work`].
pub fn sample_sudden_quench_work_seq(
    molecule: &TwoLevelMolecule,
    shift: &EnergyShift,
    temperature_k: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1".to_string()));
    }
    let occ = thermal_state(molecule, temperature_k)?;
    let p_e = occ.p_excited();
    let (w_g, w_e) = (shift.delta_ev, shift.delta_ev + shift.epsilon_ev);
    Ok(exec::map_reduce_blocks_seq(
        n_samples as usize,
        exec::DEFAULT_BLOCK,
        seed,
        |rng, len| quench_work_block(rng, len, p_e, w_g, w_e),
        concat,
    )
    .expect("n_samples >= 1"))
}
