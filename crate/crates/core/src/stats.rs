//! Rank and uniformity experiments for random and low-rank matrices.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::encoding::{NoiseSpec, SchemeId};
use crate::error::{Error, Result};
use crate::linalg::{mat_rank, FieldParams, Matrix};
use crate::oracle::{derive_noise, expand_matrix, RoHasher, Seed};

/// `ro_hash(tag, root | t as u64 LE)`.
pub fn trial_seed(root: &Seed, tag: &[u8], t: u64) -> Seed {
    let mut h = RoHasher::<sha2::Sha256>::new(tag);
    h.update(&root.0).update(&t.to_le_bytes());
    h.finalize().into()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    pub hits: u64,
    pub trials: u64,
}

impl Frequency {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

/// Fraction of uniform `n x d` matrices with rank `d`.
pub fn full_rank_experiment(fp: &FieldParams, n: usize, d: usize, trials: u64, seed: &Seed) -> Result<Frequency> {
    if d > n {
        return Err(Error::Shape(format!("d = {d} exceeds n = {n}")));
    }
    if trials == 0 {
        return Err(Error::Range("need at least one trial".into()));
    }
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let m = expand_matrix(&trial_seed(seed, b"rank", t), b"M", n, d, fp);
            mat_rank(&m, fp) == d
        })
        .count() as u64;
    Ok(Frequency { hits, trials })
}

/// Fraction of low-rank noise matrices `E = E_L E_R` with rank exactly `r`,
/// drawn through `derive_noise` on the zero instance with fresh seeds.
pub fn noise_rank_experiment(fp: &FieldParams, n: usize, r: usize, trials: u64, seed: &Seed) -> Result<Frequency> {
    SchemeId::LowRank(r as u32).check(n, fp)?;
    let z = Matrix::zeros(n, n);
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let s = trial_seed(seed, b"noise-rank", t);
            let e = left_noise(&s, &z, r, fp)?;
            Ok(mat_rank(&e, fp) == r)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count() as u64;
    Ok(Frequency { hits, trials })
}

fn left_noise(s: &Seed, z: &Matrix, r: usize, fp: &FieldParams) -> Result<Matrix> {
    match derive_noise(s, z, z, SchemeId::LowRank(r as u32), fp)? {
        noise @ NoiseSpec::LowRank { .. } => Ok(noise.left_noise(fp).expect("low-rank noise")),
        _ => unreachable!(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankBound {
    /// `max(0, 1 - 2 / q^(n-d+1))`.
    pub value: f64,
    /// The bound says nothing (`2 / q^(n-d+1) >= 1`).
    pub vacuous: bool,
}

/// Lower bound on `P(rank = d)` for a uniform `n x d` matrix.
pub fn theoretical_rank_bound(q: u64, n: usize, d: usize) -> Result<RankBound> {
    if q < 2 {
        return Err(Error::Range(format!("q = {q} < 2")));
    }
    if d > n {
        return Err(Error::Shape(format!("d = {d} exceeds n = {n}")));
    }
    let log_tail = std::f64::consts::LN_2 - (n - d + 1) as f64 * (q as f64).ln();
    if log_tail >= 0.0 {
        return Ok(RankBound {
            value: 0.0,
            vacuous: true,
        });
    }
    Ok(RankBound {
        value: -log_tail.exp_m1(),
        vacuous: false,
    })
}

/// Pearson statistic `sum (o - e)^2 / e`.
pub fn chi2_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

/// Upper `level` quantile of the chi-square distribution.
pub fn chi2_critical(dof: u32, level: f64) -> f64 {
    ChiSquared::new(f64::from(dof)).expect("dof > 0").inverse_cdf(level)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chi2Report {
    pub histogram: Vec<u64>,
    pub samples: u64,
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

fn chi2_uniform(histogram: Vec<u64>) -> Chi2Report {
    let samples: u64 = histogram.iter().sum();
    let expected = vec![samples as f64 / histogram.len() as f64; histogram.len()];
    let statistic = chi2_statistic(&histogram, &expected);
    let dof = histogram.len() as u32 - 1;
    Chi2Report {
        p_value: 1.0 - ChiSquared::new(f64::from(dof)).expect("q >= 2").cdf(statistic),
        histogram,
        samples,
        statistic,
        dof,
    }
}

/// Entry histogram of block `(bi, bj)` (`r x r`) of low-rank noise `E`
/// over `trials` fresh seeds, tested against uniform on `[0, q)`.
pub fn uniformity_chi2(
    fp: &FieldParams,
    n: usize,
    r: usize,
    trials: u64,
    block: (usize, usize),
    seed: &Seed,
) -> Result<Chi2Report> {
    SchemeId::LowRank(r as u32).check(n, fp)?;
    let z = Matrix::zeros(n, n);
    uniformity_chi2_with(fp, n, r, trials, block, seed, |s| left_noise(s, &z, r, fp))
}

/// As `uniformity_chi2` with a caller-supplied sampler for `E`.
pub fn uniformity_chi2_with<F>(
    fp: &FieldParams,
    n: usize,
    r: usize,
    trials: u64,
    block: (usize, usize),
    seed: &Seed,
    sampler: F,
) -> Result<Chi2Report>
where
    F: Fn(&Seed) -> Result<Matrix> + Sync,
{
    let q = fp.modulus() as usize;
    if r == 0 || !n.is_multiple_of(r) || block.0 >= n / r || block.1 >= n / r {
        return Err(Error::Shape(format!("block {block:?} of size {r} outside {n} x {n}")));
    }
    if trials * ((r * r) as u64) < 50 * q as u64 {
        return Err(Error::InsufficientData(format!(
            "{trials} trials x {} entries cannot fill {q} bins",
            r * r
        )));
    }
    let partial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let e = sampler(&trial_seed(seed, b"uniform", t))?;
            let mut h = vec![0u64; q];
            let tile = e.tile(block.0, block.1, r);
            for i in 0..r {
                for &v in tile.row(i) {
                    h[v as usize] += 1;
                }
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = vec![0u64; q];
    for h in partial {
        for (acc, x) in histogram.iter_mut().zip(h) {
            *acc += x;
        }
    }
    Ok(chi2_uniform(histogram))
}
