use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qjtherm::config::RunConfig;
use qjtherm::constants::thermal_energy_ev;
use qjtherm::error::Error;
use qjtherm::model::thermal_state;
use qjtherm::report::{RunReport, SeriesFormat};
use qjtherm::tcspc;
use qjtherm::thermo;
use qjtherm::trajectory::{
    enumerate_trajectories, sample_trajectories, ProtocolParams, TableConvention,
    TrajectoryEnsemble,
};

/// Quantum-jump thermodynamics toolkit: trajectory simulation, heat and
/// Jarzynski statistics, TCSPC synthesis and fitting, shift inference.
#[derive(Parser)]
#[command(name = "qjtherm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed, overriding the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for the samplers (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Format of series outputs.
    #[arg(long, global = true, value_enum, default_value_t = SeriesFormat::Csv)]
    format: SeriesFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a TCSPC histogram file.
    Synth,
    /// Enumerate or sample the trajectory ensemble and its heat series.
    Simulate,
    /// Per-round ⟨e^{-β(ΔU-Q)}⟩ series.
    Jarzynski {
        /// Evaluate a previously exported ensemble file instead.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Fit lifetime and swap parameter from a histogram file.
    Fit { histogram: PathBuf },
    /// Infer the common level shift δ from work samples.
    InferShift {
        /// File with one work value (eV) per line; the sudden-quench
        /// sampler runs when absent.
        #[arg(long)]
        work_samples: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Fit { .. } | Error::Degenerate(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_config(cli: &Cli) -> qjtherm::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_name(cli: &Cli) -> &'static str {
    match cli.command {
        Command::Synth => "synth",
        Command::Simulate => "simulate",
        Command::Jarzynski { .. } => "jarzynski",
        Command::Fit { .. } => "fit",
        Command::InferShift { .. } => "infer-shift",
    }
}

fn run(cli: &Cli) -> qjtherm::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.workers {
        // ignored if a pool already exists; determinism does not depend on it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let started = Instant::now();
    let config = load_config(cli)?;
    fs::create_dir_all(&cli.out)?;
    let mut report = RunReport::new(command_name(cli), config.clone(), cli.workers);

    let result = match &cli.command {
        Command::Synth => cmd_synth(cli, &config, &mut report),
        Command::Simulate => cmd_simulate(cli, &config, &mut report),
        Command::Jarzynski { ensemble } => cmd_jarzynski(cli, &config, ensemble.as_deref(), &mut report),
        Command::Fit { histogram } => cmd_fit(cli, &config, histogram, &mut report),
        Command::InferShift { work_samples } => {
            cmd_infer_shift(cli, &config, work_samples.as_deref(), &mut report)
        }
    };

    report.wall_clock_s = started.elapsed().as_secs_f64();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let report_text = serde_json::to_string_pretty(&report)?;
    fs::write(cli.out.join("report.json"), report_text + "\n")?;
    result
}

fn write_output(
    cli: &Cli,
    report: &mut RunReport,
    name: &str,
    contents: &str,
) -> qjtherm::Result<PathBuf> {
    let path = cli.out.join(name);
    fs::write(&path, contents)?;
    report.record_output(&path, contents);
    Ok(path)
}

fn build_ensemble(config: &RunConfig) -> qjtherm::Result<TrajectoryEnsemble> {
    let molecule = config.molecule()?;
    let occupation = thermal_state(&molecule, config.temperature_k)?;
    let mut params = ProtocolParams::new(
        molecule.gap_ev(),
        occupation,
        config.swap()?,
        config.n_rounds,
        config.bath_excitation,
    )?;
    if config.printed_table {
        params = params.with_convention(TableConvention::PrintedTable);
    }
    match config.n_samples {
        Some(n) => sample_trajectories(&params, n, config.seed),
        None => Ok(enumerate_trajectories(&params)),
    }
}

fn cmd_synth(cli: &Cli, config: &RunConfig, report: &mut RunReport) -> qjtherm::Result<()> {
    let params = config.synth_params()?;
    if params.period_ns() < 3.0 * params.tau_ns {
        report.warnings.push(format!(
            "excitation period {} ns is below 3τ = {} ns; the decay is strongly truncated",
            params.period_ns(),
            3.0 * params.tau_ns
        ));
    }
    let hist = tcspc::synth_histogram(&params, config.seed)?;
    write_output(cli, report, "histogram.txt", &tcspc::write_histogram(&hist))?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, config: &RunConfig, report: &mut RunReport) -> qjtherm::Result<()> {
    let ensemble = build_ensemble(config)?;
    write_output(cli, report, "ensemble.txt", &qjtherm::ensemble_io::write_ensemble(&ensemble)?)?;

    let rows: Vec<(usize, f64, f64, f64)> = (0..=ensemble.n_rounds)
        .map(|n| {
            let h = thermo::heat_distribution_at_round(&ensemble, n)?;
            Ok((n, h.p_minus, h.p_zero, h.p_plus))
        })
        .collect::<qjtherm::Result<_>>()?;
    write_output(cli, report, "heat.csv", &qjtherm::report::write_heat_series(&rows))?;
    Ok(())
}

fn cmd_jarzynski(
    cli: &Cli,
    config: &RunConfig,
    ensemble_path: Option<&Path>,
    report: &mut RunReport,
) -> qjtherm::Result<()> {
    let ensemble = match ensemble_path {
        Some(path) => qjtherm::ensemble_io::parse_ensemble(&fs::read_to_string(path)?)?,
        None => {
            let molecule = config.molecule()?;
            let beta_gap = molecule.gap_ev() / thermal_energy_ev(config.temperature_k);
            if config.n_samples.is_some() && beta_gap > 20.0 {
                return Err(Error::domain(format!(
                    "Monte Carlo evaluation of the functional is unreliable at βΔE = {beta_gap:.1} \
                     (> 20): the e^{{+βΔE}} branch is never sampled. Drop n_samples to use exact \
                     enumeration."
                )));
            }
            build_ensemble(config)?
        }
    };
    let series = thermo::jarzynski_functional(&ensemble, config.temperature_k)?;
    let rows: Vec<(usize, f64)> = series.values.iter().copied().enumerate().collect();
    let name = match cli.format {
        SeriesFormat::Csv => "jarzynski.csv",
        SeriesFormat::Json => "jarzynski.json",
    };
    write_output(cli, report, name, &qjtherm::report::write_round_series(&rows, cli.format))?;
    Ok(())
}

fn cmd_fit(
    cli: &Cli,
    config: &RunConfig,
    histogram: &Path,
    report: &mut RunReport,
) -> qjtherm::Result<()> {
    let hist = tcspc::parse_histogram(&fs::read_to_string(histogram)?)?;
    let efficiency = config.synth.detection_efficiency;

    let fit_result = tcspc::fit_lifetime(&hist, None);
    let (decay_fit, fit_error) = match &fit_result {
        Ok(f) => (Some(f.clone()), None),
        Err(Error::Fit { msg, best }) => (Some((**best).clone()), Some(msg.clone())),
        Err(e) => (None, Some(e.to_string())),
    };

    let swap_estimate = tcspc::cumulative_emission(&hist, efficiency)
        .and_then(|series| tcspc::estimate_swap(&series, efficiency))
        .ok();

    let doc = serde_json::json!({
        "status": if fit_error.is_none() { "ok" } else { "failed" },
        "error": fit_error,
        "decay_fit": decay_fit,
        "swap_estimate": swap_estimate,
        "total_counts": hist.total_counts(),
        "n_cycles": hist.n_cycles,
    });
    write_output(cli, report, "fit.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    fit_result.map(|_| ())
}

fn cmd_infer_shift(
    cli: &Cli,
    config: &RunConfig,
    work_samples: Option<&Path>,
    report: &mut RunReport,
) -> qjtherm::Result<()> {
    let molecule = config.molecule()?;
    let shift = config.energy_shift();
    let gap_before = molecule.gap_ev();
    let gap_after = gap_before + shift.epsilon_ev;

    let samples: Vec<f64> = match work_samples {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    l.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("invalid work value: {l}"),
                    })
                })
                .collect::<qjtherm::Result<_>>()?
        }
        None => {
            let n = config.n_samples.unwrap_or(100_000);
            thermo::sample_sudden_quench_work(
                &molecule,
                &shift,
                config.temperature_k,
                n,
                config.seed,
            )?
        }
    };

    let (delta_f_std, stderr) = thermo::estimate_delta_f_from_work(&samples, config.temperature_k)?;
    // the level-shift relation uses the ln(Z_f/Z_i) sign; the work
    // estimator returns the standard F_f - F_i, hence the negation
    let delta_hat = thermo::infer_common_shift(
        gap_before,
        gap_after,
        &delta_f_std.negated(),
        config.temperature_k,
    )?;

    let doc = serde_json::json!({
        "delta_ev": delta_hat,
        "stderr_ev": stderr,
        "interval_3se_ev": [delta_hat - 3.0 * stderr, delta_hat + 3.0 * stderr],
        "delta_f_standard_ev": delta_f_std.delta_f_ev,
        "gap_before_ev": gap_before,
        "gap_after_ev": gap_after,
        "n_samples": samples.len(),
        "temperature_k": config.temperature_k,
    });
    write_output(cli, report, "shift.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(())
}
