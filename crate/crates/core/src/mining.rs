//! Honest mining stream and its Poisson diagnostics.
//!
//! Attempt `i` (1-based) uses `sigma_i = ro_hash("mine", root | i as u64 LE | data)`,
//! runs `solve` and counts as a success iff a proof was produced and
//! `verify` independently accepts it. Time is counted in attempts.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::oracle::{expand_matrix, Difficulty, RoHasher, Seed};
use crate::protocol::{solve, verify, ProtocolParams};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceSource {
    /// The same `(A, B)` for every attempt.
    Fixed(Matrix, Matrix),
    /// `A = expand(sigma_i, "A")`, `B = expand(sigma_i, "B")`.
    FreshRandom,
}

#[derive(Clone, Debug)]
pub struct MiningConfig {
    pub params: ProtocolParams,
    pub root: Seed,
    pub attempts: u64,
    pub window: u64,
    pub source: InstanceSource,
    /// Block data mixed into every attempt seed.
    pub data: Vec<u8>,
}

impl MiningConfig {
    pub fn new(params: ProtocolParams, root: Seed, attempts: u64, window: u64) -> Result<Self> {
        let cfg = Self {
            params,
            root,
            attempts,
            window,
            source: InstanceSource::FreshRandom,
            data: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.attempts < self.window {
            return Err(Error::Range(format!(
                "need attempts >= window >= 1, got {} and {}",
                self.attempts, self.window
            )));
        }
        self.params.validate()
    }

    pub fn attempt_seed(&self, i: u64) -> Seed {
        let mut h = RoHasher::<sha2::Sha256>::new(b"mine");
        h.update(&self.root.0).update(&i.to_le_bytes()).update(&self.data);
        h.finalize().into()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub attempt: u64,
    pub seed: Seed,
    pub success: bool,
    /// Winning tiles (per-tile mode) or 0/1 (full-digest mode).
    pub tickets: u64,
    pub wall_ns: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn attempts(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn successes(&self) -> u64 {
        self.records.iter().filter(|r| r.success).count() as u64
    }

    /// `rho = successes / attempts`.
    pub fn rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.successes() as f64 / self.records.len() as f64
    }

    pub fn flags(&self) -> impl Iterator<Item = bool> + '_ {
        self.records.iter().map(|r| r.success)
    }

    /// Tab-separated: `attempt seed success tickets wall_ns`.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        for r in &self.records {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                r.attempt,
                r.seed,
                u8::from(r.success),
                r.tickets,
                r.wall_ns
            )?;
        }
        Ok(())
    }
}

fn attempt(cfg: &MiningConfig, i: u64) -> Result<EventRecord> {
    let start = Instant::now();
    let seed = cfg.attempt_seed(i);
    let p = &cfg.params;
    let fresh;
    let (a, b) = match &cfg.source {
        InstanceSource::Fixed(a, b) => (a, b),
        InstanceSource::FreshRandom => {
            fresh = (
                expand_matrix(&seed, b"A", p.n, p.n, &p.fp),
                expand_matrix(&seed, b"B", p.n, p.n, &p.fp),
            );
            (&fresh.0, &fresh.1)
        }
    };
    let out = solve(&seed, a, b, p)?;
    let success = match &out.proof {
        Some(proof) => verify(&seed, proof, p)?,
        None => false,
    };
    let tickets = match p.mode {
        crate::transcript::TranscriptMode::PerTileLottery => out.tickets.len() as u64,
        crate::transcript::TranscriptMode::FullDigest => u64::from(out.proof.is_some()),
    };
    Ok(EventRecord {
        attempt: i,
        seed,
        success,
        tickets,
        wall_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Runs all attempts, in parallel, returning records in attempt order.
pub fn mine_stream(cfg: &MiningConfig) -> Result<EventLog> {
    cfg.validate()?;
    let records = (1..=cfg.attempts)
        .into_par_iter()
        .map(|i| attempt(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EventLog { records })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DispersionVerdict {
    /// Zero variance: a deterministic stream.
    Degenerate,
    Underdispersed,
    PoissonLike,
    Overdispersed,
}

/// Accepted index band for a Poisson-like stream.
pub const DISPERSION_BAND: (f64, f64) = (0.8, 1.25);

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionReport {
    pub window: u64,
    pub counts: Vec<u64>,
    pub mean: f64,
    /// Sample variance (`n - 1` denominator).
    pub variance: f64,
    /// `variance / mean`, 0 when the mean is 0.
    pub index: f64,
    pub verdict: DispersionVerdict,
}

/// Splits the success flags into consecutive windows and compares the
/// spread of the window counts with their mean. Trailing attempts that do
/// not fill a window are dropped.
pub fn dispersion_index(flags: impl IntoIterator<Item = bool>, window: u64) -> Result<DispersionReport> {
    if window == 0 {
        return Err(Error::Range("window must be positive".into()));
    }
    let flags: Vec<bool> = flags.into_iter().collect();
    let counts: Vec<u64> = flags
        .chunks_exact(window as usize)
        .map(|w| w.iter().filter(|&&s| s).count() as u64)
        .collect();
    if counts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} windows of {window}, need at least 10",
            counts.len()
        )));
    }
    let k = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / k;
    let variance = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let index = if mean > 0.0 { variance / mean } else { 0.0 };
    let verdict = if variance == 0.0 {
        DispersionVerdict::Degenerate
    } else if index < DISPERSION_BAND.0 {
        DispersionVerdict::Underdispersed
    } else if index > DISPERSION_BAND.1 {
        DispersionVerdict::Overdispersed
    } else {
        DispersionVerdict::PoissonLike
    };
    Ok(DispersionReport {
        window,
        counts,
        mean,
        variance,
        index,
        verdict,
    })
}

/// Nearest `e` with `2^-e ~ rate`, rounding in the log domain.
pub fn rate_to_difficulty(rate: f64) -> Result<Difficulty> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Range(format!("rate {rate} not in (0, 1]")));
    }
    let e = (1.0 / rate).log2().round();
    if e > 64.0 {
        return Err(Error::Range(format!("rate {rate} needs e = {e} > 64")));
    }
    Difficulty::new(e as u32)
}
