//! `PUWP` proof format.
//!
//! ```text
//! "PUWP" | 0x01 | n: u32 | r: u32 | q: u64 | scheme: u8 + u32 | e: u8 | mode: u8
//!        | seed: 32B | z: 32B | [tile: i, j, l as u32]  (mode = tiles only)
//!        | A: PUWM | B: PUWM
//! ```
//!
//! All integers little-endian.

use std::io::Read;

use super::{Proof, ProtocolParams};
use crate::encoding::SchemeId;
use crate::error::{parse, Result};
use crate::linalg::{puwm_len, read_matrix, write_matrix, FieldParams};
use crate::oracle::{Difficulty, Digest, Seed};
use crate::transcript::{TileIndex, TranscriptMode};

pub const PROOF_MAGIC: &[u8; 4] = b"PUWP";
pub const PROOF_VERSION: u8 = 0x01;
/// Bytes before the optional tile index.
pub const PROOF_FIXED_LEN: usize = 4 + 1 + 4 + 4 + 8 + 5 + 1 + 1 + 32 + 32;

pub fn proof_len(n: usize, mode: TranscriptMode) -> usize {
    let tile = match mode {
        TranscriptMode::FullDigest => 0,
        TranscriptMode::PerTileLottery => 12,
    };
    PROOF_FIXED_LEN + tile + 2 * puwm_len(n, n)
}

pub fn write_proof(proof: &Proof) -> Result<Vec<u8>> {
    let p = &proof.params;
    p.validate()?;
    let mut out = Vec::with_capacity(proof_len(p.n, p.mode));
    out.extend_from_slice(PROOF_MAGIC);
    out.push(PROOF_VERSION);
    out.extend_from_slice(&(p.n as u32).to_le_bytes());
    out.extend_from_slice(&(p.r as u32).to_le_bytes());
    out.extend_from_slice(&u64::from(p.fp.modulus()).to_le_bytes());
    out.extend_from_slice(&p.scheme.to_bytes());
    out.push(p.difficulty.epsilon_log2() as u8);
    out.push(p.mode.to_byte());
    out.extend_from_slice(&proof.seed.0);
    out.extend_from_slice(&proof.z.0);
    match (p.mode, proof.winning_tile) {
        (TranscriptMode::PerTileLottery, Some(idx)) => out.extend_from_slice(&idx.to_bytes()),
        (TranscriptMode::FullDigest, None) => {}
        _ => return Err(parse("winning tile must be present exactly in per-tile mode")),
    }
    write_matrix(&mut out, &proof.a, &p.fp)?;
    write_matrix(&mut out, &proof.b, &p.fp)?;
    Ok(out)
}

fn take<'a>(cur: &mut &'a [u8], len: usize, what: &str) -> Result<&'a [u8]> {
    if cur.len() < len {
        return Err(parse(format!("truncated proof: {what}")));
    }
    let (head, rest) = cur.split_at(len);
    *cur = rest;
    Ok(head)
}

fn u32_at(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}

/// Parses a complete proof; every structural problem is a `Parse` error.
pub fn read_proof(bytes: &[u8]) -> Result<Proof> {
    let mut cur = bytes;
    let head = take(&mut cur, PROOF_FIXED_LEN, "header")?;
    if &head[..4] != PROOF_MAGIC {
        return Err(parse("bad proof magic"));
    }
    if head[4] != PROOF_VERSION {
        return Err(parse(format!("unsupported proof version {}", head[4])));
    }
    let n = u32_at(&head[5..9]) as usize;
    let r = u32_at(&head[9..13]) as usize;
    let q = u64::from_le_bytes(head[13..21].try_into().unwrap());
    let fp = FieldParams::new(q).map_err(|e| parse(e.to_string()))?;
    let scheme = SchemeId::from_bytes(head[21..26].try_into().unwrap())?;
    let difficulty = Difficulty::new(u32::from(head[26])).map_err(|e| parse(e.to_string()))?;
    let mode = TranscriptMode::from_byte(head[27])?;
    let seed = Seed(head[28..60].try_into().unwrap());
    let z = Digest(head[60..92].try_into().unwrap());
    let params = ProtocolParams {
        n,
        r,
        fp,
        scheme,
        difficulty,
        mode,
    };
    params.validate().map_err(|e| parse(format!("invalid parameters: {e}")))?;
    let winning_tile = match mode {
        TranscriptMode::PerTileLottery => {
            let b = take(&mut cur, 12, "tile index")?;
            Some(TileIndex::from_bytes(b.try_into().unwrap()))
        }
        TranscriptMode::FullDigest => None,
    };
    let mut mats = Vec::with_capacity(2);
    for name in ["A", "B"] {
        let (mfp, m) = read_matrix(&mut cur)?;
        if mfp != fp {
            return Err(parse(format!("{name} is over q = {}, header says {q}", mfp.modulus())));
        }
        if m.shape() != (n, n) {
            return Err(parse(format!("{name} is {:?}, header says n = {n}", m.shape())));
        }
        mats.push(m);
    }
    if !cur.is_empty() {
        return Err(parse("trailing bytes after proof"));
    }
    let b = mats.pop().unwrap();
    let a = mats.pop().unwrap();
    Ok(Proof {
        params,
        seed,
        z,
        winning_tile,
        a,
        b,
    })
}

/// Reads a whole proof from a stream.
pub fn read_proof_from<R: Read>(r: &mut R) -> Result<Proof> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    read_proof(&buf)
}
