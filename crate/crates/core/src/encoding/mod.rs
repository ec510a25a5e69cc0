//! Transcript-unpredictable encodings of a matrix product.
//!
//! Each scheme perturbs `(A, B)` into `(A', B')` with material derived from
//! the oracle, and recovers `A * B` from `A' * B'`:
//!
//! * [`SchemeId::FullNoise`]: `A + E`, `B + F` with dense uniform noise.
//!   Decoding costs two full products.
//! * [`SchemeId::LowRank`]: the noise is `E_L * E_R` and `F_L * F_R` with
//!   inner dimension `r`; encode and decode cost `O(n^2 r)`.
//! * [`SchemeId::Rotation`]: `A * R`, `R^T * B` with `R = H_n * D`, so the
//!   product comes out scaled by `n` and decoding is a single scaling.

mod full;
mod lowrank;
mod rotation;

pub use full::{decode_full, encode_full};
pub use lowrank::{decode_lowrank, encode_lowrank};
pub use rotation::{decode_rotation, encode_rotation};

use crate::error::{parse, shape, Error, Result};
use crate::linalg::{
    apply_rotation, mat_add, mat_add_counted, mat_mul_naive, mat_mul_naive_counted, mat_rank,
    mat_sub_counted, FieldParams, Matrix, OpCounter, RotationSide, RotationSpec,
};
use crate::oracle::{derive_noise, Seed};
use crate::transcript::{matmul_tiled, TranscriptConfig, TranscriptMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    FullNoise,
    /// Noise rank `r`.
    LowRank(u32),
    /// Signed-permutation block size `d`.
    Rotation(u32),
}

impl SchemeId {
    /// One tag byte followed by the parameter as `u32` LE.
    pub fn to_bytes(&self) -> [u8; 5] {
        let (tag, param) = match *self {
            SchemeId::FullNoise => (0x01u8, 0u32),
            SchemeId::LowRank(r) => (0x02, r),
            SchemeId::Rotation(d) => (0x03, d),
        };
        let mut out = [0u8; 5];
        out[0] = tag;
        out[1..].copy_from_slice(&param.to_le_bytes());
        out
    }

    pub fn from_bytes(b: &[u8; 5]) -> Result<Self> {
        let param = u32::from_le_bytes(b[1..].try_into().unwrap());
        match b[0] {
            0x01 if param == 0 => Ok(SchemeId::FullNoise),
            0x01 => Err(parse("full-noise scheme carries a nonzero parameter")),
            0x02 => Ok(SchemeId::LowRank(param)),
            0x03 => Ok(SchemeId::Rotation(param)),
            other => Err(parse(format!("unknown scheme byte {other:#04x}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::FullNoise => "full",
            SchemeId::LowRank(_) => "lowrank",
            SchemeId::Rotation(_) => "rot",
        }
    }

    /// Checks the scheme's constraints for `n x n` inputs over `fp`.
    pub fn check(&self, n: usize, fp: &FieldParams) -> Result<()> {
        match *self {
            SchemeId::FullNoise => Ok(()),
            SchemeId::LowRank(r) => {
                let r = r as usize;
                if r == 0 || !n.is_multiple_of(r) {
                    return Err(shape(format!("noise rank {r} does not divide {n}")));
                }
                Ok(())
            }
            SchemeId::Rotation(d) => {
                let d = d as usize;
                if !n.is_power_of_two() {
                    return Err(shape(format!("rotation needs a power-of-two n, got {n}")));
                }
                if d == 0 || !n.is_multiple_of(d) {
                    return Err(shape(format!("block size {d} does not divide {n}")));
                }
                if fp.from_u64(n as u64) == 0 {
                    return Err(Error::Field(format!(
                        "n = {n} is not invertible mod {}",
                        fp.modulus()
                    )));
                }
                Ok(())
            }
        }
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeId::FullNoise => write!(f, "full"),
            SchemeId::LowRank(r) => write!(f, "lowrank(r={r})"),
            SchemeId::Rotation(d) => write!(f, "rot(d={d})"),
        }
    }
}

/// Oracle-derived noise material for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoiseSpec {
    Full {
        e: Matrix,
        f: Matrix,
    },
    LowRank {
        el: Matrix,
        er: Matrix,
        fl: Matrix,
        fr: Matrix,
    },
    Rotation(RotationSpec),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub a_prime: Matrix,
    pub b_prime: Matrix,
}

impl NoiseSpec {
    pub fn scheme(&self) -> SchemeId {
        match self {
            NoiseSpec::Full { .. } => SchemeId::FullNoise,
            NoiseSpec::LowRank { el, .. } => SchemeId::LowRank(el.cols() as u32),
            NoiseSpec::Rotation(rot) => SchemeId::Rotation(rot.block_size() as u32),
        }
    }

    /// The additive noise on `A` (`E`), if the scheme has one.
    pub fn left_noise(&self, fp: &FieldParams) -> Option<Matrix> {
        match self {
            NoiseSpec::Full { e, .. } => Some(e.clone()),
            NoiseSpec::LowRank { el, er, .. } => Some(mat_mul_naive(el, er, fp).ok()?),
            NoiseSpec::Rotation(_) => None,
        }
    }

    /// The additive noise on `B` (`F`), if the scheme has one.
    pub fn right_noise(&self, fp: &FieldParams) -> Option<Matrix> {
        match self {
            NoiseSpec::Full { f, .. } => Some(f.clone()),
            NoiseSpec::LowRank { fl, fr, .. } => Some(mat_mul_naive(fl, fr, fp).ok()?),
            NoiseSpec::Rotation(_) => None,
        }
    }

    pub fn encode(
        &self,
        a: &Matrix,
        b: &Matrix,
        fp: &FieldParams,
        ops: &mut OpCounter,
    ) -> Result<EncodedPair> {
        match self {
            NoiseSpec::Full { e, f } => full::encode_with(e, f, a, b, fp, ops),
            NoiseSpec::LowRank { el, er, fl, fr } => {
                lowrank::encode_with([el, er, fl, fr], a, b, fp, ops)
            }
            NoiseSpec::Rotation(rot) => rotation::encode_with(rot, a, b, fp, ops),
        }
    }

    /// Recovers `A * B` from `C' = A' * B'`.
    pub fn decode(
        &self,
        a: &Matrix,
        b: &Matrix,
        c_prime: &Matrix,
        fp: &FieldParams,
        ops: &mut OpCounter,
    ) -> Result<Matrix> {
        match self {
            NoiseSpec::Full { e, f } => full::decode_with(e, f, a, b, c_prime, fp, ops),
            NoiseSpec::LowRank { el, er, fl, fr } => {
                lowrank::decode_with([el, er, fl, fr], a, b, c_prime, fp, ops)
            }
            NoiseSpec::Rotation(rot) => rotation::decode_with(rot.dim(), c_prime, fp, ops),
        }
    }

    /// As [`NoiseSpec::decode`], reusing `B' = B + F` from `pair` where the
    /// scheme needs it.
    pub fn decode_pair(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &EncodedPair,
        c_prime: &Matrix,
        fp: &FieldParams,
        ops: &mut OpCounter,
    ) -> Result<Matrix> {
        match self {
            NoiseSpec::LowRank { el, er, fl, fr } => {
                lowrank::decode_with_b_prime([el, er, fl, fr], a, &pair.b_prime, c_prime, fp, ops)
            }
            _ => self.decode(a, b, c_prime, fp, ops),
        }
    }

    /// Block row `bi` (`r x n`) of `A'`, without encoding all of `A`.
    pub fn encode_row_strip(&self, a: &Matrix, bi: usize, r: usize, fp: &FieldParams) -> Result<Matrix> {
        let rows = a.row_block(bi * r, r);
        match self {
            NoiseSpec::Full { e, .. } => mat_add(&rows, &e.row_block(bi * r, r), fp),
            NoiseSpec::LowRank { el, er, .. } => {
                let noise = mat_mul_naive(&el.row_block(bi * r, r), er, fp)?;
                mat_add(&rows, &noise, fp)
            }
            NoiseSpec::Rotation(rot) => apply_rotation(&rows, rot, RotationSide::Left, fp),
        }
    }

    /// Block column `bj` (`n x r`) of `B'`.
    pub fn encode_col_strip(&self, b: &Matrix, bj: usize, r: usize, fp: &FieldParams) -> Result<Matrix> {
        let cols = b.col_block(bj * r, r);
        match self {
            NoiseSpec::Full { f, .. } => mat_add(&cols, &f.col_block(bj * r, r), fp),
            NoiseSpec::LowRank { fl, fr, .. } => {
                let noise = mat_mul_naive(fl, &fr.col_block(bj * r, r), fp)?;
                mat_add(&cols, &noise, fp)
            }
            NoiseSpec::Rotation(rot) => apply_rotation(&cols, rot, RotationSide::Right, fp),
        }
    }
}

/// Multiplication tallies split into the useful product and everything
/// the encoding adds on top of it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub matmul: OpCounter,
    pub encode_decode: OpCounter,
}

impl WorkCounters {
    /// Multiplication-count overhead `mults(encode + decode) / mults(matmul)`.
    pub fn alpha(&self) -> f64 {
        if self.matmul.mults == 0 {
            return 0.0;
        }
        self.encode_decode.mults as f64 / self.matmul.mults as f64
    }
}

/// Generic `Encode` / `Eval` pair for a function `f`: `eval(encode(x))`
/// must equal `f(x)` for every `x`.
pub trait UnpredictableEncoding {
    type Input;
    type Encoded;
    type Output;

    fn encode(&self, seed: &Seed, x: &Self::Input, work: &mut WorkCounters) -> Result<Self::Encoded>;

    fn eval(&self, encoded: &Self::Encoded, work: &mut WorkCounters) -> Result<Self::Output>;
}

/// Matrix multiplication under one of the schemes, evaluated by the tiled
/// product followed by decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatMulEncoding {
    pub scheme: SchemeId,
    /// Transcript tile size used by `eval`.
    pub tile: usize,
    pub fp: FieldParams,
}

#[derive(Clone, Debug)]
pub struct EncodedInstance {
    pub a: Matrix,
    pub b: Matrix,
    pub noise: NoiseSpec,
    pub pair: EncodedPair,
}

impl UnpredictableEncoding for MatMulEncoding {
    type Input = (Matrix, Matrix);
    type Encoded = EncodedInstance;
    type Output = Matrix;

    fn encode(&self, seed: &Seed, x: &(Matrix, Matrix), work: &mut WorkCounters) -> Result<EncodedInstance> {
        let (a, b) = x;
        let noise = derive_noise(seed, a, b, self.scheme, &self.fp)?;
        let pair = noise.encode(a, b, &self.fp, &mut work.encode_decode)?;
        Ok(EncodedInstance {
            a: a.clone(),
            b: b.clone(),
            noise,
            pair,
        })
    }

    fn eval(&self, enc: &EncodedInstance, work: &mut WorkCounters) -> Result<Matrix> {
        let n = enc.pair.a_prime.rows();
        let cfg = TranscriptConfig::new(n, self.tile, TranscriptMode::FullDigest)?;
        let c_prime = matmul_tiled(&enc.pair.a_prime, &enc.pair.b_prime, &cfg, &self.fp, |_| {})?;
        let cube = (n as u64).pow(3);
        work.matmul.mults += cube;
        work.matmul.adds += cube;
        enc.noise.decode(&enc.a, &enc.b, &c_prime, &self.fp, &mut work.encode_decode)
    }
}

/// Rank of the leading `k x k` submatrix, a cheap indication of whether an
/// input is far from the degenerate low-rank case the rotation scheme
/// cannot protect.
pub fn leading_rank(m: &Matrix, k: usize, fp: &FieldParams) -> usize {
    let k = k.min(m.rows()).min(m.cols());
    mat_rank(&m.row_block(0, k).col_block(0, k), fp)
}

pub(crate) fn peel(
    c_prime: &Matrix,
    correction: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    mat_sub_counted(c_prime, correction, fp, ops)
}

pub(crate) fn add_noise(x: &Matrix, noise: &Matrix, fp: &FieldParams, ops: &mut OpCounter) -> Result<Matrix> {
    mat_add_counted(x, noise, fp, ops)
}

pub(crate) fn product(x: &Matrix, y: &Matrix, fp: &FieldParams, ops: &mut OpCounter) -> Result<Matrix> {
    mat_mul_naive_counted(x, y, fp, ops)
}
