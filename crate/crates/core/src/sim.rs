//! Monte Carlo BER sweeps over SNR.
//!
//! A sweep is a grid of `(snr_index, trial)` work units. Each unit draws the
//! users' channels from the `(seed, trial)` stream, so every SNR point sees
//! the same channel realizations, builds the precoder for that noise level,
//! and simulates `blocks_per_trial` blocks from the `(seed, snr_index,
//! trial)` stream. Units run in parallel and are reduced in index order,
//! which makes the output independent of the worker count.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::{self, ChannelEnsembleSpec};
use crate::error::{ConfigError, Error, Result};
use crate::link::{self, Constellation, Modulation};
use crate::precoder::{self, Objective, OptimizerConfig};
use crate::streams::{self, Domain};

pub const CSV_HEADER: &str =
    "snr_db,ber,ser,mean_inv_sinr_pred,mean_sinr_meas,bits,trials,precoder,mode,modulation";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrecoderKind {
    Gmud,
    Svd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    SisoMultipath,
    MimoFlat,
}

trait Named: Sized + Copy + 'static {
    const CHOICES: &'static [(&'static str, Self)];

    fn name(self) -> &'static str
    where
        Self: PartialEq,
    {
        Self::CHOICES
            .iter()
            .find(|(_, v)| *v == self)
            .expect("every variant is named")
            .0
    }

    fn parse_named(text: &str) -> std::result::Result<Self, String> {
        let norm = text.trim().to_ascii_lowercase().replace('-', "_");
        Self::CHOICES
            .iter()
            .find(|(n, _)| *n == norm)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let allowed: Vec<&str> = Self::CHOICES.iter().map(|(n, _)| *n).collect();
                format!(
                    "unknown value `{text}`, allowed values: {}",
                    allowed.join(", ")
                )
            })
    }
}

impl Named for Modulation {
    const CHOICES: &'static [(&'static str, Self)] =
        &[("qpsk", Modulation::Qpsk), ("qam16", Modulation::Qam16)];
}

impl Named for PrecoderKind {
    const CHOICES: &'static [(&'static str, Self)] =
        &[("gmud", PrecoderKind::Gmud), ("svd", PrecoderKind::Svd)];
}

impl Named for ChannelMode {
    const CHOICES: &'static [(&'static str, Self)] = &[
        ("siso_multipath", ChannelMode::SisoMultipath),
        ("mimo_flat", ChannelMode::MimoFlat),
    ];
}

impl Named for Objective {
    const CHOICES: &'static [(&'static str, Self)] = &[
        ("sum_inv_sinr", Objective::SumInvSinr),
        ("max_min_sinr", Objective::MaxMinSinr),
        ("sum_sinr", Objective::SumSinr),
    ];
}

pub fn modulation_name(m: Modulation) -> &'static str {
    m.name()
}

pub fn precoder_name(p: PrecoderKind) -> &'static str {
    p.name()
}

pub fn mode_name(m: ChannelMode) -> &'static str {
    m.name()
}

pub fn objective_name(o: Objective) -> &'static str {
    o.name()
}

/// Full description of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub users: usize,
    /// Multipath taps per user, or transmit and receive antennas in MIMO mode.
    pub paths: usize,
    pub modulation: Modulation,
    pub precoder: PrecoderKind,
    pub mode: ChannelMode,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub snr_db_step: f64,
    pub trials: u64,
    pub blocks_per_trial: u64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub objective: Objective,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            users: 2,
            paths: 2,
            modulation: Modulation::Qpsk,
            precoder: PrecoderKind::Gmud,
            mode: ChannelMode::SisoMultipath,
            snr_db_min: 0.0,
            snr_db_max: 24.0,
            snr_db_step: 2.0,
            trials: 2000,
            blocks_per_trial: 50,
            seed: 1,
            optimizer: OptimizerConfig::default(),
            objective: Objective::SumInvSinr,
        }
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| format!("cannot parse `{value}`: {e}"))
}

impl SimConfig {
    pub const KEYS: &'static [&'static str] = &[
        "users",
        "paths",
        "modulation",
        "precoder",
        "mode",
        "snr_db_min",
        "snr_db_max",
        "snr_db_step",
        "trials",
        "blocks_per_trial",
        "seed",
        "objective",
        "n_r",
        "n_theta",
        "n_power",
        "refine_iters",
        "refine_shrink",
    ];

    /// Sets one key. `location` names the source in error messages.
    pub fn set(
        &mut self,
        key: &str,
        value: &str,
        location: &str,
    ) -> std::result::Result<(), ConfigError> {
        let key_norm = key.trim().to_ascii_lowercase().replace('-', "_");
        let outcome: std::result::Result<(), String> = (|| {
            match key_norm.as_str() {
                "users" => self.users = parse_num(value)?,
                "paths" => self.paths = parse_num(value)?,
                "modulation" => self.modulation = Modulation::parse_named(value)?,
                "precoder" => self.precoder = PrecoderKind::parse_named(value)?,
                "mode" => self.mode = ChannelMode::parse_named(value)?,
                "snr_db_min" => self.snr_db_min = parse_num(value)?,
                "snr_db_max" => self.snr_db_max = parse_num(value)?,
                "snr_db_step" => self.snr_db_step = parse_num(value)?,
                "trials" => self.trials = parse_num(value)?,
                "blocks_per_trial" => self.blocks_per_trial = parse_num(value)?,
                "seed" => self.seed = parse_num(value)?,
                "objective" => self.objective = Objective::parse_named(value)?,
                "n_r" => self.optimizer.n_r = parse_num(value)?,
                "n_theta" => self.optimizer.n_theta = parse_num(value)?,
                "n_power" => self.optimizer.n_power = parse_num(value)?,
                "refine_iters" => self.optimizer.refine_iters = parse_num(value)?,
                "refine_shrink" => self.optimizer.refine_shrink = parse_num(value)?,
                _ => {
                    return Err(format!(
                        "unknown key, expected one of: {}",
                        Self::KEYS.join(", ")
                    ))
                }
            }
            Ok(())
        })();
        outcome.map_err(|message| ConfigError::Parse {
            key: key.trim().to_string(),
            location: location.to_string(),
            message,
        })
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> std::result::Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            // Several assignments may share a line.
            for entry in content.split_whitespace() {
                let Some((key, value)) = entry.split_once('=') else {
                    return Err(ConfigError::Syntax {
                        line,
                        text: entry.to_string(),
                    });
                };
                if key.trim().is_empty() {
                    return Err(ConfigError::Syntax {
                        line,
                        text: entry.to_string(),
                    });
                }
                self.set(key, value, &format!("line {line}"))?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Validation(msg));
        if self.users == 0 || self.paths == 0 {
            return fail("users and paths must be positive".into());
        }
        if self.paths < self.users {
            return match self.mode {
                ChannelMode::SisoMultipath => fail(format!(
                    "multipath precoding assumes M >= K (paths >= users), got paths = {}, users = {}",
                    self.paths, self.users
                )),
                ChannelMode::MimoFlat => fail(format!(
                    "users ({}) exceed transmit antennas ({})",
                    self.users, self.paths
                )),
            };
        }
        if !self.snr_db_min.is_finite()
            || !self.snr_db_max.is_finite()
            || self.snr_db_min > self.snr_db_max
        {
            return fail(format!(
                "need snr_db_min <= snr_db_max, got {} and {}",
                self.snr_db_min, self.snr_db_max
            ));
        }
        if !(self.snr_db_step > 0.0) || !self.snr_db_step.is_finite() {
            return fail(format!(
                "snr_db_step must be positive, got {}",
                self.snr_db_step
            ));
        }
        if self.trials == 0 || self.blocks_per_trial == 0 {
            return fail("trials and blocks_per_trial must be at least 1".into());
        }
        self.optimizer
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))
    }

    pub fn snr_points(&self) -> Vec<f64> {
        let span = self.snr_db_max - self.snr_db_min;
        let count = (span / self.snr_db_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.snr_db_min + i as f64 * self.snr_db_step)
            .collect()
    }

    pub fn ensemble(&self) -> Result<ChannelEnsembleSpec> {
        match self.mode {
            ChannelMode::SisoMultipath => {
                ChannelEnsembleSpec::siso(self.users, self.paths, self.seed)
            }
            ChannelMode::MimoFlat => {
                ChannelEnsembleSpec::mimo(self.users, self.paths, self.paths, self.seed)
            }
        }
    }

    /// Stable `key=value` rendering of every setting.
    pub fn canonical(&self) -> String {
        let o = &self.optimizer;
        let mut s = String::new();
        let entries: [(&str, String); 17] = [
            ("users", self.users.to_string()),
            ("paths", self.paths.to_string()),
            ("modulation", self.modulation.name().into()),
            ("precoder", self.precoder.name().into()),
            ("mode", self.mode.name().into()),
            ("snr_db_min", format!("{:?}", self.snr_db_min)),
            ("snr_db_max", format!("{:?}", self.snr_db_max)),
            ("snr_db_step", format!("{:?}", self.snr_db_step)),
            ("trials", self.trials.to_string()),
            ("blocks_per_trial", self.blocks_per_trial.to_string()),
            ("seed", self.seed.to_string()),
            ("objective", self.objective.name().into()),
            ("n_r", o.n_r.to_string()),
            ("n_theta", o.n_theta.to_string()),
            ("n_power", o.n_power.to_string()),
            ("refine_iters", o.refine_iters.to_string()),
            ("refine_shrink", format!("{:?}", o.refine_shrink)),
        ];
        for (k, v) in entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses a configuration file's text on top of the defaults and validates it.
pub fn parse_config(text: &str) -> std::result::Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    cfg.apply_text(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

/// One plotted point of a BER curve.
#[derive(Clone, Debug, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub ser: f64,
    /// Mean predicted inverse SINR over trials and users.
    pub mean_inv_sinr_pred: f64,
    /// Mean measured MMSE-output SINR over trials and users.
    pub mean_sinr_meas: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub symbols: u64,
    pub symbol_errors: u64,
    pub trials: u64,
}

#[derive(Clone, Debug)]
struct TrialOutcome {
    bit_errors: u64,
    bits: u64,
    symbol_errors: u64,
    symbols: u64,
    inv_sinr_pred: Vec<f64>,
    sinr_meas: Vec<f64>,
}

pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

fn run_trial(
    cfg: &SimConfig,
    ensemble: &ChannelEnsembleSpec,
    snr_index: usize,
    snr_db: f64,
    trial: u64,
) -> Result<TrialOutcome> {
    let channels = channel::draw_matrices(ensemble, trial)?;
    let sigma2 = sigma2_from_snr_db(snr_db);
    let solution = match cfg.precoder {
        PrecoderKind::Gmud => {
            precoder::optimize_with(&channels, sigma2, &cfg.optimizer, cfg.objective)?
        }
        PrecoderKind::Svd => precoder::svd_baseline_with(&channels, sigma2, cfg.objective)?,
    };
    let constellation = Constellation::new(cfg.modulation);
    let mut rng = streams::derive(cfg.seed, Domain::Link, snr_index as u64, trial);
    let records = (0..cfg.blocks_per_trial)
        .map(|_| link::run_block(&channels, &solution.g, &constellation, sigma2, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let res = link::measure(&records, constellation.bits_per_symbol)?;
    Ok(TrialOutcome {
        bit_errors: res.bit_errors,
        bits: res.bits_sent,
        symbol_errors: res.symbol_errors,
        symbols: res.symbols_sent,
        inv_sinr_pred: solution.predicted_inv_sinr,
        sinr_meas: res.measured_sinr_per_user,
    })
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    let ensemble = cfg.ensemble()?;
    let snrs = cfg.snr_points();
    let units: Vec<(usize, u64)> = (0..snrs.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = units
        .par_iter()
        .map(|&(s, t)| run_trial(cfg, &ensemble, s, snrs[s], t))
        .collect::<Result<Vec<_>>>()?;

    let per_point = cfg.trials as usize;
    let points = snrs
        .iter()
        .zip(outcomes.chunks(per_point))
        .map(|(&snr_db, chunk)| {
            let mut p = BerPoint {
                snr_db,
                ber: 0.0,
                ser: 0.0,
                mean_inv_sinr_pred: 0.0,
                mean_sinr_meas: 0.0,
                bits: 0,
                bit_errors: 0,
                symbols: 0,
                symbol_errors: 0,
                trials: chunk.len() as u64,
            };
            let mut pred_sum = 0.0;
            let mut meas_sum = 0.0;
            let mut samples = 0usize;
            for o in chunk {
                p.bits += o.bits;
                p.bit_errors += o.bit_errors;
                p.symbols += o.symbols;
                p.symbol_errors += o.symbol_errors;
                for (pred, meas) in o.inv_sinr_pred.iter().zip(&o.sinr_meas) {
                    pred_sum += pred;
                    meas_sum += meas;
                    samples += 1;
                }
            }
            p.ber = p.bit_errors as f64 / p.bits as f64;
            p.ser = p.symbol_errors as f64 / p.symbols as f64;
            p.mean_inv_sinr_pred = pred_sum / samples as f64;
            p.mean_sinr_meas = meas_sum / samples as f64;
            p
        })
        .collect();
    Ok(points)
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(cfg: &SimConfig, workers: usize) -> Result<Vec<BerPoint>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid_argument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with the fixed header, rows in ascending SNR order.
pub fn render_csv(points: &[BerPoint], cfg: &SimConfig) -> String {
    let mut rows: Vec<&BerPoint> = points.iter().collect();
    rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            float17(p.snr_db),
            float17(p.ber),
            float17(p.ser),
            float17(p.mean_inv_sinr_pred),
            float17(p.mean_sinr_meas),
            p.bits,
            p.trials,
            cfg.precoder.name(),
            cfg.mode.name(),
            cfg.modulation.name(),
        );
    }
    out
}

pub fn write_csv(points: &[BerPoint], cfg: &SimConfig, path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid_argument("no points to write"));
    }
    std::fs::write(path, render_csv(points, cfg)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Human-readable run summary.
pub fn summary(points: &[BerPoint], cfg: &SimConfig, elapsed: std::time::Duration) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "config {} | {} {} {} | users={} paths={} trials={} blocks={} seed={}",
        cfg.hash(),
        cfg.precoder.name(),
        cfg.mode.name(),
        cfg.modulation.name(),
        cfg.users,
        cfg.paths,
        cfg.trials,
        cfg.blocks_per_trial,
        cfg.seed
    );
    for p in points {
        let _ = writeln!(
            s,
            "  snr {:>6.2} dB  ber {:.4e}  ser {:.4e}  inv_sinr_pred {:.4e}  sinr_meas {:.4e}  bits {}",
            p.snr_db, p.ber, p.ser, p.mean_inv_sinr_pred, p.mean_sinr_meas, p.bits
        );
    }
    let _ = writeln!(s, "runtime {:.3} s", elapsed.as_secs_f64());
    s
}
