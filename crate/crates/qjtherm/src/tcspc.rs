//! Time-correlated single-photon-counting layer: histogram synthesis and
//! ingestion, exponential lifetime fitting, and estimation of the
//! per-round survival |μ|² from the cumulative emission curve.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

/// Binned photon arrival counts within one excitation period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcspcHistogram {
    pub bin_width_ns: f64,
    pub counts: Vec<u64>,
    pub rep_rate_mhz: f64,
    pub n_cycles: u64,
    pub dark_rate_hz: Option<f64>,
}

impl TcspcHistogram {
    pub fn new(
        bin_width_ns: f64,
        counts: Vec<u64>,
        rep_rate_mhz: f64,
        n_cycles: u64,
        dark_rate_hz: Option<f64>,
    ) -> Result<Self> {
        if !(bin_width_ns > 0.0) || !(rep_rate_mhz > 0.0) {
            return Err(Error::domain("bin width and repetition rate must be positive".to_string()));
        }
        let h = Self { bin_width_ns, counts, rep_rate_mhz, n_cycles, dark_rate_hz };
        if h.bin_width_ns * h.counts.len() as f64 > h.period_ns() * (1.0 + 1e-9) {
            return Err(Error::domain(format!(
                "bins span {} ns but the repetition period is only {} ns",
                h.bin_width_ns * h.counts.len() as f64,
                h.period_ns()
            )));
        }
        Ok(h)
    }

    /// Excitation period in ns (1000 / rep rate in MHz).
    pub fn period_ns(&self) -> f64 {
        1000.0 / self.rep_rate_mhz
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Center time of bin k in ns.
    pub fn bin_center_ns(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub tau_ns: f64,
    pub rep_rate_mhz: f64,
    pub n_cycles: u64,
    pub excitation_prob: f64,
    pub detection_efficiency: f64,
    pub dark_rate_hz: f64,
    pub bin_width_ns: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            tau_ns: 5.0,
            rep_rate_mhz: 80.0,
            n_cycles: 1_000_000,
            excitation_prob: 1.0,
            detection_efficiency: 1.0,
            dark_rate_hz: 0.0,
            bin_width_ns: 0.1,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if !(self.tau_ns > 0.0) {
            return Err(Error::domain(format!("non-positive lifetime: {} ns", self.tau_ns)));
        }
        if !(self.rep_rate_mhz > 0.0) || !(self.bin_width_ns > 0.0) {
            return Err(Error::domain("rates and bin width must be positive".to_string()));
        }
        for (name, p) in [
            ("excitation_prob", self.excitation_prob),
            ("detection_efficiency", self.detection_efficiency),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.dark_rate_hz < 0.0 {
            return Err(Error::domain("negative dark rate".to_string()));
        }
        let period = 1000.0 / self.rep_rate_mhz;
        if self.bin_width_ns >= period {
            return Err(Error::domain(format!(
                "bin width {} ns is not below the period {} ns",
                self.bin_width_ns, period
            )));
        }
        Ok(())
    }

    pub fn period_ns(&self) -> f64 {
        1000.0 / self.rep_rate_mhz
    }

    fn n_bins(&self) -> usize {
        (self.period_ns() / self.bin_width_ns + 1e-9).floor() as usize
    }
}

fn synth_block(rng: &mut impl Rng, cycles: usize, p: &SynthParams) -> Vec<u64> {
    let n_bins = p.n_bins();
    let mut counts = vec![0u64; n_bins];
    let period = p.period_ns();
    let trunc_mass = 1.0 - (-period / p.tau_ns).exp();
    let p_signal = p.excitation_prob * p.detection_efficiency * trunc_mass;

    let n_signal = Binomial::new(cycles as u64, p_signal).unwrap().sample(rng);
    for _ in 0..n_signal {
        let u: f64 = rng.random();
        // inverse CDF of Exp(τ) truncated to one period
        let t = -p.tau_ns * (1.0 - u * trunc_mass).ln();
        let idx = (t / p.bin_width_ns) as usize;
        if idx < n_bins {
            counts[idx] += 1;
        }
    }

    // a cycle with a signal click cannot also record a dark count, which
    // keeps total counts at one per cycle at most
    let p_dark = -(-p.dark_rate_hz * period * 1e-9).exp_m1();
    if p_dark > 0.0 {
        let n_dark = Binomial::new(cycles as u64 - n_signal, p_dark).unwrap().sample(rng);
        for _ in 0..n_dark {
            let t: f64 = rng.random::<f64>() * period;
            let idx = (t / p.bin_width_ns) as usize;
            if idx < n_bins {
                counts[idx] += 1;
            }
        }
    }
    counts
}

fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Synthesizes a TCSPC histogram: per cycle at most one arrival, drawn
/// from Exp(τ) truncated to the period, plus dark counts. Deterministic
/// per seed, independent of the worker count.
pub fn synth_histogram(params: &SynthParams, seed: u64) -> Result<TcspcHistogram> {
    params.validate()?;
    let counts = exec::map_reduce_blocks(
        params.n_cycles as usize,
        exec::DEFAULT_BLOCK,
        seed,
        |rng, len| synth_block(rng, len, params),
        merge_counts,
    )
    .unwrap_or_else(|| vec![0; params.n_bins()]);
    TcspcHistogram::new(
        params.bin_width_ns,
        counts,
        params.rep_rate_mhz,
        params.n_cycles,
        if params.dark_rate_hz > 0.0 { Some(params.dark_rate_hz) } else { None },
    )
}

/// Sequential reference path for [`synth_histogram`]; bit-identical output.
pub fn synth_histogram_seq(params: &SynthParams, seed: u64) -> Result<TcspcHistogram> {
    params.validate()?;
    let counts = exec::map_reduce_blocks_seq(
        params.n_cycles as usize,
        exec::DEFAULT_BLOCK,
        seed,
        |rng, len| synth_block(rng, len, params),
        merge_counts,
    )
    .unwrap_or_else(|| vec![0; params.n_bins()]);
    TcspcHistogram::new(
        params.bin_width_ns,
        counts,
        params.rep_rate_mhz,
        params.n_cycles,
        if params.dark_rate_hz > 0.0 { Some(params.dark_rate_hz) } else { None },
    )
}

/// Serializes to the documented text format: `#key=value` headers, then
/// `bin_index,counts` lines with ascending contiguous indices from 0.
pub fn write_histogram(hist: &TcspcHistogram) -> String {
    let mut out = String::new();
    out.push_str(&format!("#bin_width_ns={}\n", hist.bin_width_ns));
    out.push_str(&format!("#rep_rate_mhz={}\n", hist.rep_rate_mhz));
    out.push_str(&format!("#n_cycles={}\n", hist.n_cycles));
    if let Some(d) = hist.dark_rate_hz {
        out.push_str(&format!("#dark_rate_hz={}\n", d));
    }
    for (i, c) in hist.counts.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_histogram(text: &str) -> Result<TcspcHistogram> {
    let mut bin_width = None;
    let mut rep_rate = None;
    let mut n_cycles = None;
    let mut dark_rate = None;
    let mut counts: Vec<u64> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| parse_err(lineno, "header is not #key=value"))?;
            let value = value.trim();
            match key.trim() {
                "bin_width_ns" => {
                    bin_width = Some(value.parse::<f64>().map_err(|_| {
                        parse_err(lineno, format!("invalid bin_width_ns: {value}"))
                    })?)
                }
                "rep_rate_mhz" => {
                    rep_rate = Some(value.parse::<f64>().map_err(|_| {
                        parse_err(lineno, format!("invalid rep_rate_mhz: {value}"))
                    })?)
                }
                "n_cycles" => {
                    n_cycles = Some(value.parse::<u64>().map_err(|_| {
                        parse_err(lineno, format!("invalid n_cycles: {value}"))
                    })?)
                }
                "dark_rate_hz" => {
                    dark_rate = Some(value.parse::<f64>().map_err(|_| {
                        parse_err(lineno, format!("invalid dark_rate_hz: {value}"))
                    })?)
                }
                other => return Err(parse_err(lineno, format!("unknown header key: {other}"))),
            }
            continue;
        }
        let (idx_s, count_s) = line
            .split_once(',')
            .ok_or_else(|| parse_err(lineno, "expected bin_index,counts"))?;
        let idx: usize = idx_s
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid bin index: {idx_s}")))?;
        if idx != counts.len() {
            return Err(parse_err(
                lineno,
                format!("bin index {idx} out of order, expected {}", counts.len()),
            ));
        }
        let count: i64 = count_s
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid count: {count_s}")))?;
        if count < 0 {
            return Err(parse_err(lineno, format!("negative count: {count}")));
        }
        counts.push(count as u64);
    }

    let bin_width = bin_width.ok_or_else(|| parse_err(0, "missing header #bin_width_ns="))?;
    let rep_rate = rep_rate.ok_or_else(|| parse_err(0, "missing header #rep_rate_mhz="))?;
    let n_cycles = n_cycles.ok_or_else(|| parse_err(0, "missing header #n_cycles="))?;
    TcspcHistogram::new(bin_width, counts, rep_rate, n_cycles, dark_rate)
}

/// Result of the exponential decay fit counts ≈ A·e^{-t/τ} + B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau_ns: f64,
    pub amplitude: f64,
    pub background: f64,
    /// Weighted RMS residual per degree of freedom.
    pub residual_norm: f64,
    pub stderr_tau_ns: f64,
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = m[col];
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = m[row][col] / pivot_row[col];
            for k in col..3 {
                m[row][k] -= f * pivot_row[k];
            }
            b[row] -= f * b[col];
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

fn chi2(ts: &[f64], ys: &[f64], ws: &[f64], a: f64, tau: f64, b: f64) -> f64 {
    ts.iter()
        .zip(ys)
        .zip(ws)
        .map(|((&t, &y), &w)| {
            let r = y - (a * (-t / tau).exp() + b);
            w * r * r
        })
        .sum()
}

/// Poisson-weighted least-squares fit of A·e^{-t/τ} + B by
/// Levenberg–Marquardt, seeded by a log-linear regression on
/// background-subtracted counts.
pub fn fit_lifetime(hist: &TcspcHistogram, window: Option<std::ops::Range<usize>>) -> Result<DecayFit> {
    let range = window.unwrap_or(0..hist.counts.len());
    if range.end > hist.counts.len() || range.start >= range.end {
        return Err(Error::domain("fit window outside histogram".to_string()));
    }
    let ys: Vec<f64> = hist.counts[range.clone()].iter().map(|&c| c as f64).collect();
    let ts: Vec<f64> = (range.start..range.end).map(|k| hist.bin_center_ns(k)).collect();
    // Poisson variance, floored at 1 count for empty bins
    let ws: Vec<f64> = ys.iter().map(|&y| 1.0 / y.max(1.0)).collect();

    if ys.iter().filter(|&&y| y > 0.0).count() < 5 {
        return Err(Error::Degenerate("fewer than 5 nonzero bins in the fit window".to_string()));
    }

    // initial background from the last 10% of the window
    let tail = (ys.len() / 10).max(3).min(ys.len());
    let b0 = ys[ys.len() - tail..].iter().sum::<f64>() / tail as f64;
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .zip(&ys)
        .filter(|(_, &y)| y - b0 >= 1.0)
        .map(|(&t, &y)| (t, (y - b0).ln()))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Degenerate("data is flat; no decaying component".to_string()));
    }
    let n = pairs.len() as f64;
    let (sx, sy) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (sxx, sxy) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let span = ts[ts.len() - 1] - ts[0];
    let mut tau = if slope < 0.0 { -1.0 / slope } else { span / 2.0 };
    let mut a = intercept.exp();
    let mut b = b0;

    let mut lambda = 1e-3;
    let mut cost = chi2(&ts, &ys, &ws, a, tau, b);
    let mut converged = false;
    for _ in 0..200 {
        // normal equations of the damped Gauss-Newton step
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for ((&t, &y), &w) in ts.iter().zip(&ys).zip(&ws) {
            let e = (-t / tau).exp();
            let f = a * e + b;
            let j = [e, a * t / (tau * tau) * e, 1.0];
            let r = y - f;
            for p in 0..3 {
                jtr[p] += w * j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += w * j[p] * j[q];
                }
            }
        }
        let mut damped = jtj;
        for (p, row) in damped.iter_mut().enumerate() {
            row[p] += lambda * jtj[p][p].max(1e-12);
        }
        let Some(step) = solve3(damped, jtr) else {
            break;
        };
        let (a2, tau2, b2) = (a + step[0], tau + step[1], b + step[2]);
        if !(tau2 > 0.0) || !a2.is_finite() {
            lambda *= 10.0;
            continue;
        }
        let new_cost = chi2(&ts, &ys, &ws, a2, tau2, b2);
        if new_cost <= cost {
            let rel = (cost - new_cost) / cost.max(1e-300);
            let step_rel = (step[1] / tau).abs();
            a = a2;
            tau = tau2;
            b = b2;
            cost = new_cost;
            lambda = (lambda * 0.3).max(1e-12);
            if rel < 1e-12 || step_rel < 1e-12 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true; // stuck at a minimum the damping cannot leave
                break;
            }
        }
    }

    // curvature-based standard errors at the optimum
    let mut jtj = [[0.0f64; 3]; 3];
    for (&t, &w) in ts.iter().zip(&ws) {
        let e = (-t / tau).exp();
        let j = [e, a * t / (tau * tau) * e, 1.0];
        for p in 0..3 {
            for q in 0..3 {
                jtj[p][q] += w * j[p] * j[q];
            }
        }
    }
    let stderr_tau = invert3_diag(&jtj, 1).map(|v| v.sqrt()).unwrap_or(f64::NAN);
    let dof = (ys.len().saturating_sub(3)).max(1) as f64;
    let fit = DecayFit {
        tau_ns: tau,
        amplitude: a,
        background: b,
        residual_norm: (cost / dof).sqrt(),
        stderr_tau_ns: stderr_tau,
    };
    if !converged {
        return Err(Error::Fit {
            msg: "Levenberg-Marquardt did not converge within 200 iterations".to_string(),
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

/// Diagonal element `idx` of the inverse of a symmetric 3x3 matrix.
fn invert3_diag(m: &[[f64; 3]; 3], idx: usize) -> Option<f64> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let (i, j) = ((idx + 1) % 3, (idx + 2) % 3);
    let cof = m[i][i] * m[j][j] - m[i][j] * m[j][i];
    Some(cof / det)
}

/// Cumulative emission probability per bin: running count sum divided by
/// n_cycles·efficiency, after subtracting the expected dark floor when a
/// dark rate is recorded. Clipped to [0, 1].
pub fn cumulative_emission(hist: &TcspcHistogram, detection_efficiency: f64) -> Result<Vec<f64>> {
    if !(detection_efficiency > 0.0 && detection_efficiency <= 1.0) {
        return Err(Error::domain(format!(
            "detection efficiency {detection_efficiency} outside (0, 1]"
        )));
    }
    if hist.n_cycles == 0 {
        return Err(Error::domain("histogram has zero excitation cycles".to_string()));
    }
    let dark_per_bin = hist
        .dark_rate_hz
        .map(|r| r * hist.bin_width_ns * 1e-9 * hist.n_cycles as f64)
        .unwrap_or(0.0);
    let norm = hist.n_cycles as f64 * detection_efficiency;
    let mut acc = 0.0;
    Ok(hist
        .counts
        .iter()
        .map(|&c| {
            acc += c as f64 - dark_per_bin;
            (acc / norm).clamp(0.0, 1.0)
        })
        .collect())
}

/// Joint (β, |μ|²) estimate from a cumulative emission curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapEstimate {
    pub beta_occ_hat: f64,
    pub s_hat: f64,
    /// Per-bin survival estimates; absent where the curve has saturated.
    pub per_bin_s: Vec<Option<f64>>,
    pub detection_efficiency: f64,
    /// True when the isotonic pre-pass had to adjust the input.
    pub isotonic_adjusted: bool,
}

fn sse_for_survival(series: &[f64], s: f64) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut sn = 1.0;
    for &c in series {
        sn *= s;
        let m = 1.0 - sn;
        num += c * m;
        den += m * m;
    }
    let beta = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
    let mut sse = 0.0;
    let mut sn = 1.0;
    for &c in series {
        sn *= s;
        let r = c - beta * (1.0 - sn);
        sse += r * r;
    }
    (sse, beta)
}

/// Fits c_n = β(1-s^n) globally (bin k holds c at n = k+1 rounds) and
/// derives the per-bin survival series ŝ_n = 1 - (c_{n+1}-c_n)/(β̂-c_n).
pub fn estimate_swap(series: &[f64], detection_efficiency: f64) -> Result<SwapEstimate> {
    if series.len() < 2 {
        return Err(Error::domain("need at least 2 cumulative bins".to_string()));
    }
    if series.iter().all(|&c| c <= 0.0) {
        return Err(Error::Degenerate(
            "cumulative emission is identically zero; survival is indeterminate".to_string(),
        ));
    }

    // isotonic pre-pass: running maximum
    let mut adjusted = false;
    let mut iso = Vec::with_capacity(series.len());
    let mut hi = f64::NEG_INFINITY;
    for &c in series {
        if c < hi {
            adjusted = true;
        } else {
            hi = c;
        }
        iso.push(hi.max(0.0));
    }

    // coarse scan then golden-section refinement over s
    let mut best_s = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..400 {
        let s = i as f64 / 400.0;
        let (sse, _) = sse_for_survival(&iso, s);
        if sse < best {
            best = sse;
            best_s = s;
        }
    }
    let (mut lo, mut hi_s) = ((best_s - 1.0 / 400.0).max(0.0), (best_s + 1.0 / 400.0).min(1.0));
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi_s - phi * (hi_s - lo);
        let m2 = lo + phi * (hi_s - lo);
        if sse_for_survival(&iso, m1).0 < sse_for_survival(&iso, m2).0 {
            hi_s = m2;
        } else {
            lo = m1;
        }
    }
    let s_hat = 0.5 * (lo + hi_s);
    let (_, beta_hat) = sse_for_survival(&iso, s_hat);

    let threshold = 0.01 * beta_hat;
    let per_bin_s = (0..iso.len() - 1)
        .map(|i| {
            let denom = beta_hat - iso[i];
            if denom > threshold {
                Some(1.0 - (iso[i + 1] - iso[i]) / denom)
            } else {
                None
            }
        })
        .collect();

    Ok(SwapEstimate {
        beta_occ_hat: beta_hat,
        s_hat,
        per_bin_s,
        detection_efficiency,
        isotonic_adjusted: adjusted,
    })
}
