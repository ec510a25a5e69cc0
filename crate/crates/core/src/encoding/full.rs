//! Dense uniform noise: `A' = A + E`, `B' = B + F`.
//!
//! Decoding subtracts `A F + E (B + F)`, two full `n x n` products, so the
//! honest solver does at least three products' worth of work.

use super::{add_noise, peel, product, EncodedPair, NoiseSpec, SchemeId};
use crate::error::Result;
use crate::linalg::{FieldParams, Matrix, OpCounter};
use crate::oracle::{derive_noise, Seed};

pub(super) fn encode_with(
    e: &Matrix,
    f: &Matrix,
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<EncodedPair> {
    Ok(EncodedPair {
        a_prime: add_noise(a, e, fp, ops)?,
        b_prime: add_noise(b, f, fp, ops)?,
    })
}

pub(super) fn decode_with(
    e: &Matrix,
    f: &Matrix,
    a: &Matrix,
    b: &Matrix,
    c_prime: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    let af = product(a, f, fp, ops)?;
    let b_plus_f = add_noise(b, f, fp, ops)?;
    let e_bf = product(e, &b_plus_f, fp, ops)?;
    let correction = add_noise(&af, &e_bf, fp, ops)?;
    peel(c_prime, &correction, fp, ops)
}

fn noise(seed: &Seed, a: &Matrix, b: &Matrix, fp: &FieldParams) -> Result<NoiseSpec> {
    derive_noise(seed, a, b, SchemeId::FullNoise, fp)
}

pub fn encode_full(seed: &Seed, a: &Matrix, b: &Matrix, fp: &FieldParams) -> Result<EncodedPair> {
    noise(seed, a, b, fp)?.encode(a, b, fp, &mut OpCounter::default())
}

pub fn decode_full(
    seed: &Seed,
    a: &Matrix,
    b: &Matrix,
    c_prime: &Matrix,
    fp: &FieldParams,
) -> Result<Matrix> {
    noise(seed, a, b, fp)?.decode(a, b, c_prime, fp, &mut OpCounter::default())
}
