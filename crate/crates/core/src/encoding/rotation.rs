//! Self-canceling rotation: `A' = A R`, `B' = R^T B` with `R = H_n D`.
//!
//! Since `R R^T = n I`, `A' B' = n A B` and decoding is a scaling by
//! `n^-1 mod q`.

use super::{EncodedPair, SchemeId};
use crate::error::{Error, Result};
use crate::linalg::{apply_rotation_counted, FieldParams, Matrix, OpCounter, RotationSide, RotationSpec};
use crate::oracle::{derive_noise, Seed};

pub(super) fn encode_with(
    rot: &RotationSpec,
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<EncodedPair> {
    Ok(EncodedPair {
        a_prime: apply_rotation_counted(a, rot, RotationSide::Left, fp, ops)?,
        b_prime: apply_rotation_counted(b, rot, RotationSide::Right, fp, ops)?,
    })
}

pub(super) fn decode_with(
    n: usize,
    c_prime: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    let inv = fp
        .inv(fp.from_u64(n as u64))
        .ok_or_else(|| Error::Field(format!("n = {n} is not invertible mod {}", fp.modulus())))?;
    ops.mults += (c_prime.rows() * c_prime.cols()) as u64;
    Ok(c_prime.scale(inv, fp))
}

pub fn encode_rotation(
    seed: &Seed,
    a: &Matrix,
    b: &Matrix,
    d: usize,
    fp: &FieldParams,
) -> Result<EncodedPair> {
    derive_noise(seed, a, b, SchemeId::Rotation(d as u32), fp)?.encode(a, b, fp, &mut OpCounter::default())
}

/// Undoes the factor `n`; needs neither the seed nor the inputs.
pub fn decode_rotation(n: usize, c_prime: &Matrix, fp: &FieldParams) -> Result<Matrix> {
    if !n.is_power_of_two() || c_prime.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "rotation decode needs a power-of-two n and an n x n matrix, got n={n}, {:?}",
            c_prime.shape()
        )));
    }
    decode_with(n, c_prime, fp, &mut OpCounter::default())
}
