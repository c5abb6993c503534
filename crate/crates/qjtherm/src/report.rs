//! Run reports and the plot-ready series formats.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Echo of a CLI run: configuration, produced files with content hashes,
/// wall clock, warnings. The wall clock makes the report itself vary run
/// to run; the hashed data outputs do not.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub workers: Option<usize>,
    pub outputs: Vec<OutputRecord>,
    pub wall_clock_s: f64,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: RunConfig, workers: Option<usize>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            workers,
            outputs: Vec::new(),
            wall_clock_s: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path, contents: &str) {
        self.outputs.push(OutputRecord {
            path: path.to_path_buf(),
            sha256: sha256_hex(contents.as_bytes()),
        });
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum SeriesFormat {
    #[default]
    Csv,
    Json,
}

/// Two-column (round, value) series in the chosen format.
pub fn write_round_series(rounds_values: &[(usize, f64)], format: SeriesFormat) -> String {
    match format {
        SeriesFormat::Csv => {
            let mut out = String::from("round,value\n");
            for (r, v) in rounds_values {
                out.push_str(&format!("{r},{v}\n"));
            }
            out
        }
        SeriesFormat::Json => {
            let rows: Vec<serde_json::Value> = rounds_values
                .iter()
                .map(|(r, v)| serde_json::json!({ "round": r, "value": v }))
                .collect();
            let mut text = serde_json::to_string_pretty(&rows).unwrap();
            text.push('\n');
            text
        }
    }
}

/// Parses either format back; the self-closure counterpart of
/// [`write_round_series`].
pub fn parse_round_series(text: &str) -> Result<Vec<(usize, f64)>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        #[derive(Deserialize)]
        struct Row {
            round: usize,
            value: f64,
        }
        let rows: Vec<Row> = serde_json::from_str(text)?;
        return Ok(rows.into_iter().map(|r| (r.round, r.value)).collect());
    }
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || (lineno == 1 && line.starts_with("round")) {
            continue;
        }
        let (r, v) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "expected round,value".to_string(),
        })?;
        let round = r.trim().parse::<usize>().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid round: {r}"),
        })?;
        let value = v.trim().parse::<f64>().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid value: {v}"),
        })?;
        out.push((round, value));
    }
    Ok(out)
}

/// Per-round heat-distribution table as CSV.
pub fn write_heat_series(rows: &[(usize, f64, f64, f64)]) -> String {
    let mut out = String::from("round,p_minus,p_zero,p_plus\n");
    for (r, pm, pz, pp) in rows {
        out.push_str(&format!("{r},{pm},{pz},{pp}\n"));
    }
    out
}
