//! Quantum-jump unravelling of the pulse-then-decay protocol.
//!
//! One run: the molecule starts thermal, a resonant pulse swaps the level
//! occupations (work ±ΔE), then `n_rounds` of partial swap with the bath
//! mode, each followed by a projective photon-number measurement of the
//! environment. Because the bath holds at most one photon, every
//! trajectory has at most one jump (an emission on the branch that starts
//! ground, an absorption of a bath photon on the branch that starts
//! excited) and the whole weighted tree can be enumerated in closed form.
//!
//! Heat sign convention: Q is heat INTO the molecule, so an emission
//! carries Q = -ΔE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::model::{JointState, PartialSwap, ThermalOccupation};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoleculeState {
    Ground,
    Excited,
}

/// Molecular state paired with the environment photon number (0 or 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLabel {
    pub molecule: MoleculeState,
    pub photons: u8,
}

/// The single jump a trajectory may contain. Rounds are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpEvent {
    None,
    Emission { round: usize },
    Absorption { round: usize },
}

/// Which (Q, ΔU) labels the two initially-excited trajectory classes get.
///
/// `Corrected` satisfies both the first law and endpoint consistency
/// (stay-excited after absorption: Q = +ΔE, ΔU = 0; relax to ground with
/// no jump: Q = 0, ΔU = -ΔE). `PrintedTable` exchanges those two label
/// pairs, kept only for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TableConvention {
    #[default]
    Corrected,
    PrintedTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: MoleculeState,
    pub event: JumpEvent,
    pub work_ev: f64,
    pub heat_ev: f64,
    pub delta_u_ev: f64,
    /// Probability (exact ensembles) or empirical frequency (sampled).
    pub weight: f64,
    /// ln(weight), finite even when the linear weight underflows.
    pub log_weight: f64,
}

impl Trajectory {
    /// State labels per round; round 0 is the post-pulse state.
    pub fn steps(&self, n_rounds: usize) -> Vec<(usize, StateLabel)> {
        (0..=n_rounds).map(|r| (r, self.state_at(r))).collect()
    }

    pub fn state_at(&self, round: usize) -> StateLabel {
        let post_pulse = match self.initial {
            MoleculeState::Ground => MoleculeState::Excited,
            MoleculeState::Excited => MoleculeState::Ground,
        };
        match self.event {
            JumpEvent::None => StateLabel { molecule: post_pulse, photons: 0 },
            JumpEvent::Emission { round: k } if round >= k => {
                StateLabel { molecule: MoleculeState::Ground, photons: 1 }
            }
            JumpEvent::Absorption { round: k } if round >= k => {
                StateLabel { molecule: MoleculeState::Excited, photons: 0 }
            }
            _ => StateLabel { molecule: post_pulse, photons: 0 },
        }
    }

    pub fn final_state(&self, n_rounds: usize) -> StateLabel {
        self.state_at(n_rounds)
    }

    pub fn emission_round(&self) -> Option<usize> {
        match self.event {
            JumpEvent::Emission { round } => Some(round),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Exact,
    Sampled,
}

/// Parameters a trajectory ensemble was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gap_ev: f64,
    pub p_ground: f64,
    pub p_excited: f64,
    pub survival: f64,
    pub bath_excitation: f64,
    pub convention: TableConvention,
    pub seed: Option<u64>,
    pub n_samples: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub trajectories: Vec<Trajectory>,
    pub kind: EnsembleKind,
    pub n_rounds: usize,
    pub provenance: Provenance,
}

impl TrajectoryEnsemble {
    pub fn gap_ev(&self) -> f64 {
        self.provenance.gap_ev
    }

    pub fn total_weight(&self) -> f64 {
        self.trajectories.iter().map(|t| t.weight).sum()
    }
}

/// Parameters of the pulse-then-decay protocol.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolParams {
    pub gap_ev: f64,
    /// Pre-pulse occupation; the pulse swaps it.
    pub occupation: ThermalOccupation,
    pub swap: PartialSwap,
    pub n_rounds: usize,
    /// Probability that the bath mode initially holds a photon.
    pub bath_excitation: f64,
    pub convention: TableConvention,
}

impl ProtocolParams {
    pub fn new(
        gap_ev: f64,
        occupation: ThermalOccupation,
        swap: PartialSwap,
        n_rounds: usize,
        bath_excitation: f64,
    ) -> Result<Self> {
        if gap_ev < 0.0 {
            return Err(Error::domain(format!("negative gap: {gap_ev} eV")));
        }
        if !(0.0..1.0).contains(&bath_excitation) {
            return Err(Error::domain(format!(
                "bath excitation {bath_excitation} outside [0, 1)"
            )));
        }
        Ok(Self {
            gap_ev,
            occupation,
            swap,
            n_rounds,
            bath_excitation,
            convention: TableConvention::Corrected,
        })
    }

    pub fn with_convention(mut self, convention: TableConvention) -> Self {
        self.convention = convention;
        self
    }
}

/// Pulse action on the occupations: p_ground ↔ p_excited. The branch
/// record carries the work in units of ΔE (+1 for a branch that started
/// ground and was excited, -1 for the reverse).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserBranch {
    pub initial: MoleculeState,
    pub weight: f64,
    pub work_gap_units: f64,
}

pub fn laser_pulse(occupation: &ThermalOccupation) -> (ThermalOccupation, [LaserBranch; 2]) {
    let branches = [
        LaserBranch {
            initial: MoleculeState::Ground,
            weight: occupation.p_ground(),
            work_gap_units: 1.0,
        },
        LaserBranch {
            initial: MoleculeState::Excited,
            weight: occupation.p_excited(),
            work_gap_units: -1.0,
        },
    ];
    (occupation.swapped(), branches)
}

/// One projective photon-number measurement outcome on the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub photons: u8,
    pub collapsed: JointState,
    pub probability: f64,
}

/// Projects a joint state onto the environment photon-number subspaces.
/// Outcomes with probability below 1e-15 are omitted.
pub fn measure_environment(state: &JointState) -> Result<Vec<MeasurementOutcome>> {
    use crate::model::{BASIS_E0, BASIS_E1, BASIS_G0, BASIS_G1};
    use num_complex::Complex64;

    let a = state.amplitudes();
    let norm = state.norm_sqr();
    if norm < 1e-15 {
        return Err(Error::domain("cannot measure a zero-norm state".to_string()));
    }
    let mut outcomes = Vec::with_capacity(2);
    for (photons, idx) in [(0u8, [BASIS_G0, BASIS_E0]), (1u8, [BASIS_G1, BASIS_E1])] {
        let p: f64 = idx.iter().map(|&i| a[i].norm_sqr()).sum::<f64>() / norm;
        if p < 1e-15 {
            continue;
        }
        let mut amps = [Complex64::ZERO; 4];
        let scale = (p * norm).sqrt();
        for &i in &idx {
            amps[i] = a[i] / scale;
        }
        outcomes.push(MeasurementOutcome {
            photons,
            collapsed: JointState::new(amps)?,
            probability: p,
        });
    }
    Ok(outcomes)
}

/// (Q, ΔU) in units of ΔE for the absorption class, by convention.
fn absorption_labels(convention: TableConvention) -> (f64, f64) {
    match convention {
        TableConvention::Corrected => (1.0, 0.0),
        TableConvention::PrintedTable => (0.0, -1.0),
    }
}

/// (Q, ΔU) in units of ΔE for the relax-without-jump class, by convention.
fn no_absorption_labels(convention: TableConvention) -> (f64, f64) {
    match convention {
        TableConvention::Corrected => (0.0, -1.0),
        TableConvention::PrintedTable => (1.0, 0.0),
    }
}

/// Exact weighted trajectory tree of the protocol.
pub fn enumerate_trajectories(params: &ProtocolParams) -> TrajectoryEnsemble {
    let gap = params.gap_ev;
    let s = params.swap.survival();
    let pb = params.bath_excitation;
    let n = params.n_rounds;
    let occ = &params.occupation;
    let (log_beta, log_alpha) = (occ.log_p_ground(), occ.log_p_excited());
    let (beta_occ, alpha) = (occ.p_ground(), occ.p_excited());

    let mut trajectories = Vec::with_capacity(2 * n + 2);

    // Branch that starts ground: pulse excites it (W = +ΔE), then it can
    // emit at any round while the bath mode is empty.
    if log_beta > f64::NEG_INFINITY || beta_occ > 0.0 {
        if pb < 1.0 && s < 1.0 {
            for k in 1..=n {
                let w = beta_occ * (1.0 - pb) * (1.0 - s) * s.powi(k as i32 - 1);
                // k = 1 carries no survival factor; 0·ln(0) must not NaN
                let log_surv_k = if k == 1 { 0.0 } else { (k as f64 - 1.0) * s.ln() };
                let log_w = log_beta + (1.0 - pb).ln() + (1.0 - s).ln() + log_surv_k;
                if !(log_w > f64::NEG_INFINITY) {
                    continue;
                }
                trajectories.push(Trajectory {
                    initial: MoleculeState::Ground,
                    event: JumpEvent::Emission { round: k },
                    work_ev: gap,
                    heat_ev: -gap,
                    delta_u_ev: 0.0,
                    weight: w,
                    log_weight: log_w,
                });
            }
        }
        // Still excited after n rounds (bath occupied, or simply no jump).
        let surv = pb + (1.0 - pb) * s.powi(n as i32);
        let log_surv = if pb > 0.0 || n == 0 {
            surv.ln()
        } else {
            n as f64 * s.ln()
        };
        trajectories.push(Trajectory {
            initial: MoleculeState::Ground,
            event: JumpEvent::None,
            work_ev: gap,
            heat_ev: 0.0,
            delta_u_ev: gap,
            weight: beta_occ * surv,
            log_weight: log_beta + log_surv,
        });
    }

    // Branch that starts excited: pulse de-excites it (W = -ΔE); with an
    // occupied bath mode it can absorb the bath photon at any round.
    if log_alpha > f64::NEG_INFINITY || alpha > 0.0 {
        let (q_abs, du_abs) = absorption_labels(params.convention);
        if pb > 0.0 && s < 1.0 {
            for k in 1..=n {
                let w = alpha * pb * (1.0 - s) * s.powi(k as i32 - 1);
                let log_surv_k = if k == 1 { 0.0 } else { (k as f64 - 1.0) * s.ln() };
                let log_w = log_alpha + pb.ln() + (1.0 - s).ln() + log_surv_k;
                if !(log_w > f64::NEG_INFINITY) {
                    continue;
                }
                trajectories.push(Trajectory {
                    initial: MoleculeState::Excited,
                    event: JumpEvent::Absorption { round: k },
                    work_ev: -gap,
                    heat_ev: q_abs * gap,
                    delta_u_ev: du_abs * gap,
                    weight: w,
                    log_weight: log_w,
                });
            }
        }
        let (q_no, du_no) = no_absorption_labels(params.convention);
        let stay = 1.0 - pb * (1.0 - s.powi(n as i32));
        trajectories.push(Trajectory {
            initial: MoleculeState::Excited,
            event: JumpEvent::None,
            work_ev: -gap,
            heat_ev: q_no * gap,
            delta_u_ev: du_no * gap,
            weight: alpha * stay,
            log_weight: log_alpha + stay.ln(),
        });
    }

    TrajectoryEnsemble {
        trajectories,
        kind: EnsembleKind::Exact,
        n_rounds: n,
        provenance: Provenance {
            gap_ev: gap,
            p_ground: beta_occ,
            p_excited: alpha,
            survival: s,
            bath_excitation: pb,
            convention: params.convention,
            seed: None,
            n_samples: None,
        },
    }
}

fn counts_to_ensemble(
    exact: TrajectoryEnsemble,
    counts: Vec<u64>,
    n_samples: u64,
    seed: u64,
) -> TrajectoryEnsemble {
    let trajectories = exact
        .trajectories
        .into_iter()
        .zip(counts)
        .map(|(mut t, c)| {
            t.weight = c as f64 / n_samples as f64;
            t.log_weight = t.weight.ln();
            t
        })
        .collect();
    TrajectoryEnsemble {
        trajectories,
        kind: EnsembleKind::Sampled,
        n_rounds: exact.n_rounds,
        provenance: Provenance {
            seed: Some(seed),
            n_samples: Some(n_samples),
            ..exact.provenance
        },
    }
}

fn categorical_counts(cumulative: &[f64], rng: &mut impl Rng, draws: usize) -> Vec<u64> {
    let mut counts = vec![0u64; cumulative.len()];
    for _ in 0..draws {
        let u: f64 = rng.random();
        let idx = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        counts[idx] += 1;
    }
    counts
}

fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn cumulative_weights(ensemble: &TrajectoryEnsemble) -> Vec<f64> {
    let mut acc = 0.0;
    ensemble
        .trajectories
        .iter()
        .map(|t| {
            acc += t.weight;
            acc
        })
        .collect()
}

/// I.i.d. draws from the exact trajectory distribution. Deterministic for
/// a fixed seed, independent of the worker count.
pub fn sample_trajectories(
    params: &ProtocolParams,
    n_samples: u64,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1".to_string()));
    }
    let exact = enumerate_trajectories(params);
    let cumulative = cumulative_weights(&exact);
    let counts = exec::map_reduce_blocks(
        n_samples as usize,
        exec::DEFAULT_BLOCK,
        seed,
        |rng, len| categorical_counts(&cumulative, rng, len),
        merge_counts,
    )
    .expect("n_samples >= 1");
    Ok(counts_to_ensemble(exact, counts, n_samples, seed))
}

/// Single-threaded reference path for [`sample_trajectories`]; produces
/// bit-identical ensembles.
pub fn sample_trajectories_seq(
    params: &ProtocolParams,
    n_samples: u64,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1".to_string()));
    }
    let exact = enumerate_trajectories(params);
    let cumulative = cumulative_weights(&exact);
    let counts = exec::map_reduce_blocks_seq(
        n_samples as usize,
        exec::DEFAULT_BLOCK,
        seed,
        |rng, len| categorical_counts(&cumulative, rng, len),
        merge_counts,
    )
    .expect("n_samples >= 1");
    Ok(counts_to_ensemble(exact, counts, n_samples, seed))
}

/// Per-round emission probability mass; entry k-1 is the weight of the
/// emit-at-round-k class.
pub fn emission_round_distribution(ensemble: &TrajectoryEnsemble) -> Vec<f64> {
    let mut series = vec![0.0; ensemble.n_rounds];
    for t in &ensemble.trajectories {
        if let Some(k) = t.emission_round() {
            series[k - 1] += t.weight;
        }
    }
    series
}
