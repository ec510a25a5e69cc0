//! The trivial construction: multiply, then separately grind `T = c t(n)`
//! nonces and keep the one whose hash has the most leading zeros.
//!
//! The hash never sees `A`, `B` or `C`, so skipping the multiplication
//! (`cheat`) leaves the acceptance probability unchanged.

use crate::error::{Error, Result};
use crate::linalg::{mat_mul_naive, FieldParams, Matrix};
use crate::oracle::{Digest, RoHasher, Seed};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineParams {
    /// Work multiplier `c`.
    pub c: f64,
    /// `t(n)`, the cost of the useful computation.
    pub work: u64,
}

impl BaselineParams {
    pub fn new(c: f64, work: u64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Range(format!("work multiplier must be positive, got {c}")));
        }
        if work == 0 {
            return Err(Error::Range("t(n) must be positive".into()));
        }
        Ok(Self { c, work })
    }

    /// `t(n) = n^3` for naive multiplication.
    pub fn for_dimension(c: f64, n: usize) -> Result<Self> {
        Self::new(c, (n as u64).saturating_pow(3))
    }

    /// `T = round(c t(n))`.
    pub fn nonces(&self) -> u64 {
        (self.c * self.work as f64).round() as u64
    }

    /// `floor(log2 t(n))` leading zero bits.
    pub fn target_bits(&self) -> u32 {
        self.work.ilog2()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselineOutcome {
    /// `None` in cheat mode.
    pub c: Option<Matrix>,
    /// Best nonce and its leading zero count; `None` if `T = 0`.
    pub best: Option<(u64, u32)>,
    pub hashes: u64,
}

impl BaselineOutcome {
    /// The nonce to publish, present only if it meets the target.
    pub fn proof(&self, bp: &BaselineParams) -> Option<u64> {
        self.best
            .filter(|&(_, zeros)| zeros >= bp.target_bits())
            .map(|(nonce, _)| nonce)
    }
}

fn nonce_digest(seed: &Seed, nonce: u64) -> Digest {
    let mut h = RoHasher::<sha2::Sha256>::new(b"baseline");
    h.update(&seed.0).update(&nonce.to_le_bytes());
    h.finalize()
}

pub fn leading_zero_bits(d: &Digest) -> u32 {
    let mut zeros = 0;
    for &byte in &d.0 {
        zeros += byte.leading_zeros();
        if byte != 0 {
            break;
        }
    }
    zeros
}

pub fn baseline_solve(
    seed: &Seed,
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    bp: &BaselineParams,
    cheat: bool,
) -> Result<BaselineOutcome> {
    let c = if cheat {
        None
    } else {
        Some(mat_mul_naive(a, b, fp)?)
    };
    let t = bp.nonces();
    let mut best: Option<(u64, u32)> = None;
    for nonce in 0..t {
        let zeros = leading_zero_bits(&nonce_digest(seed, nonce));
        if best.is_none_or(|(_, z)| zeros > z) {
            best = Some((nonce, zeros));
        }
    }
    Ok(BaselineOutcome { c, best, hashes: t })
}

/// One hash: accepts iff `O(seed, nonce)` has `log2 t(n)` leading zeros.
pub fn baseline_verify(seed: &Seed, nonce: u64, bp: &BaselineParams) -> bool {
    leading_zero_bits(&nonce_digest(seed, nonce)) >= bp.target_bits()
}
