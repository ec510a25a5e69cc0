//! Random-oracle instantiation, seed expansion and difficulty thresholds.
//!
//! Every oracle query is framed as
//!
//! ```text
//! H( len(tag): u8 | tag | payload )
//! ```
//!
//! with SHA-256 as the default `H`. The framing, the little-endian counters
//! and the `PUWM` matrix encoding used for binding are normative: two
//! implementations must produce identical digests.

pub(crate) mod lanes;

use std::fmt;

use crate::encoding::{NoiseSpec, SchemeId};
use crate::error::{Error, Result};
use crate::linalg::{write_matrix, FieldParams, Matrix, RotationSpec};

/// 256-bit hash behind the oracle.
pub trait Hash256: Clone + Default {
    fn update(&mut self, bytes: &[u8]);
    fn finalize(self) -> [u8; 32];
}

impl Hash256 for sha2::Sha256 {
    fn update(&mut self, bytes: &[u8]) {
        sha2::Digest::update(self, bytes);
    }

    fn finalize(self) -> [u8; 32] {
        sha2::Digest::finalize(self).into()
    }
}

/// The λ = 256 bit seed σ.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub [u8; 32]);

/// A 256-bit oracle output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

macro_rules! hex_bytes32 {
    ($t:ident) => {
        impl $t {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self> {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s.trim(), &mut out)
                    .map_err(|e| Error::Parse(format!("expected 64 hex chars: {e}")))?;
                Ok(Self(out))
            }
        }

        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($t), self.to_hex())
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }
    };
}

hex_bytes32!(Seed);
hex_bytes32!(Digest);

impl Seed {
    /// Deterministic seed named by a label, `ro_hash("seed", label)`.
    pub fn from_label(label: &str) -> Seed {
        Seed(ro_hash(b"seed", label.as_bytes()).0)
    }
}

impl From<Digest> for Seed {
    fn from(d: Digest) -> Seed {
        Seed(d.0)
    }
}

/// Incremental oracle query with domain-separation framing.
#[derive(Clone)]
pub struct RoHasher<H: Hash256 = sha2::Sha256> {
    inner: H,
    bytes: u64,
}

impl<H: Hash256> RoHasher<H> {
    pub fn new(tag: &[u8]) -> Self {
        let len = u8::try_from(tag.len()).expect("domain tags are at most 255 bytes");
        let mut inner = H::default();
        inner.update(&[len]);
        inner.update(tag);
        Self { inner, bytes: 0 }
    }

    pub fn update(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update(bytes);
        self.bytes += bytes.len() as u64;
        self
    }

    /// Payload bytes absorbed so far (framing excluded).
    pub fn payload_len(&self) -> u64 {
        self.bytes
    }

    pub fn finalize(self) -> Digest {
        Digest(self.inner.finalize())
    }
}

impl<H: Hash256> std::io::Write for RoHasher<H> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// `H(len(tag) | tag | payload)` with the default hash.
pub fn ro_hash(tag: &[u8], payload: &[u8]) -> Digest {
    ro_hash_with::<sha2::Sha256>(tag, payload)
}

pub fn ro_hash_with<H: Hash256>(tag: &[u8], payload: &[u8]) -> Digest {
    let mut h = RoHasher::<H>::new(tag);
    h.update(payload);
    h.finalize()
}

/// Counter-mode word stream: block `i` is `ro_hash(tag, seed | i as u64 LE)`,
/// read as eight little-endian `u32` words.
pub struct OracleStream {
    seed: Seed,
    tag: Vec<u8>,
    counter: u64,
    block: [u8; 32],
    pos: usize,
    draws: u64,
    rejections: u64,
}

impl OracleStream {
    pub fn new(seed: &Seed, tag: &[u8]) -> Self {
        Self {
            seed: *seed,
            tag: tag.to_vec(),
            counter: 0,
            block: [0; 32],
            pos: 32,
            draws: 0,
            rejections: 0,
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.pos == 32 {
            let mut h = RoHasher::<sha2::Sha256>::new(&self.tag);
            h.update(&self.seed.0).update(&self.counter.to_le_bytes());
            self.block = h.finalize().0;
            self.counter += 1;
            self.pos = 0;
        }
        let w = u32::from_le_bytes(self.block[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        self.draws += 1;
        w
    }

    /// Uniform in `[0, bound)` by rejecting words `>= floor(2^32/bound)*bound`.
    pub fn next_below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0);
        let bound = u64::from(bound);
        let limit = (1u64 << 32) / bound * bound;
        loop {
            let w = u64::from(self.next_u32());
            if w < limit {
                return (w % bound) as u32;
            }
            self.rejections += 1;
        }
    }

    /// Words consumed so far, accepted or not.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }
}

/// Expands `count` field elements from `(seed, tag)`.
pub fn expand_field_elems(seed: &Seed, tag: &[u8], count: usize, fp: &FieldParams) -> Vec<u32> {
    let mut s = OracleStream::new(seed, tag);
    (0..count).map(|_| s.next_below(fp.modulus())).collect()
}

/// Row-major `rows x cols` matrix of expanded field elements.
pub fn expand_matrix(seed: &Seed, tag: &[u8], rows: usize, cols: usize, fp: &FieldParams) -> Matrix {
    Matrix::from_raw(rows, cols, expand_field_elems(seed, tag, rows * cols, fp))
}

/// Binds the instance: `ro_hash("noise", seed | PUWM(A) | PUWM(B))`.
pub fn instance_seed(seed: &Seed, a: &Matrix, b: &Matrix, fp: &FieldParams) -> Seed {
    let mut h = RoHasher::<sha2::Sha256>::new(b"noise");
    h.update(&seed.0);
    write_matrix(&mut h, a, fp).expect("hashing cannot fail");
    write_matrix(&mut h, b, fp).expect("hashing cannot fail");
    h.finalize().into()
}

/// Derives the scheme's noise material from `O(seed, A, B)`.
///
/// Per-matrix tags: `"E"`, `"F"` (full noise); `"EL"`, `"ER"`, `"FL"`, `"FR"`
/// (low rank); `"D"` (rotation). For the rotation each `d`-block is drawn
/// as a Fisher-Yates shuffle (`for i in d-1..1: swap(i, below(i+1))`)
/// followed by `d` sign words whose low bit selects `-1`.
pub fn derive_noise(
    seed: &Seed,
    a: &Matrix,
    b: &Matrix,
    scheme: SchemeId,
    fp: &FieldParams,
) -> Result<NoiseSpec> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "noise needs equal square matrices, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.rows();
    scheme.check(n, fp)?;
    let inner = instance_seed(seed, a, b, fp);
    Ok(match scheme {
        SchemeId::FullNoise => NoiseSpec::Full {
            e: expand_matrix(&inner, b"E", n, n, fp),
            f: expand_matrix(&inner, b"F", n, n, fp),
        },
        SchemeId::LowRank(r) => {
            let r = r as usize;
            NoiseSpec::LowRank {
                el: expand_matrix(&inner, b"EL", n, r, fp),
                er: expand_matrix(&inner, b"ER", r, n, fp),
                fl: expand_matrix(&inner, b"FL", n, r, fp),
                fr: expand_matrix(&inner, b"FR", r, n, fp),
            }
        }
        SchemeId::Rotation(d) => NoiseSpec::Rotation(sample_rotation(&inner, n, d as usize)?),
    })
}

fn sample_rotation(seed: &Seed, n: usize, d: usize) -> Result<RotationSpec> {
    let mut s = OracleStream::new(seed, b"D");
    let mut perm: Vec<u32> = (0..n as u32).collect();
    let mut negate = vec![false; n];
    for base in (0..n).step_by(d) {
        let block = &mut perm[base..base + d];
        for i in (1..d).rev() {
            let j = s.next_below(i as u32 + 1) as usize;
            block.swap(i, j);
        }
        for flag in &mut negate[base..base + d] {
            *flag = s.next_u32() & 1 == 1;
        }
    }
    RotationSpec::new(n, d, perm, negate)
}

/// Difficulty `ε = 2^-e`, enforced as `ticket < 2^(64-e)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Difficulty(u8);

impl Difficulty {
    pub fn new(epsilon_log2: u32) -> Result<Self> {
        if epsilon_log2 > 64 {
            return Err(Error::Range(format!("difficulty exponent {epsilon_log2} > 64")));
        }
        Ok(Self(epsilon_log2 as u8))
    }

    pub fn epsilon_log2(&self) -> u32 {
        u32::from(self.0)
    }

    pub fn epsilon(&self) -> f64 {
        (-f64::from(self.0)).exp2()
    }

    /// `2^(64-e)`; exceeds `u64` when `e = 0`.
    pub fn threshold(&self) -> u128 {
        1u128 << (64 - u32::from(self.0))
    }
}

/// First eight digest bytes, big-endian.
pub fn ticket_value(d: &Digest) -> u64 {
    u64::from_be_bytes(d.0[..8].try_into().unwrap())
}

pub fn meets_threshold(d: &Digest, diff: Difficulty) -> bool {
    u128::from(ticket_value(d)) < diff.threshold()
}
