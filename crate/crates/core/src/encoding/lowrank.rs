//! Low-rank noise: `E = E_L E_R`, `F = F_L F_R` with `E_L, F_L: n x r` and
//! `E_R, F_R: r x n`.
//!
//! Decoding evaluates `C' - [A F_L | E_L] [F_R ; E_R (B + F_L F_R)]`; every
//! product has one dimension equal to `r` or `2r`.

use super::{product, EncodedPair, NoiseSpec, SchemeId};
use crate::error::Result;
use crate::linalg::{mat_mul_add_counted, FieldParams, Matrix, OpCounter};
use crate::oracle::{derive_noise, Seed};

/// Two `n x r * r x n` products, each fused with its addition.
pub(super) fn encode_with(
    [el, er, fl, fr]: [&Matrix; 4],
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<EncodedPair> {
    Ok(EncodedPair {
        a_prime: mat_mul_add_counted(a, el, er, fp, ops)?,
        b_prime: mat_mul_add_counted(b, fl, fr, fp, ops)?,
    })
}

/// Five `n^2 r` products: `B' = B + F_L F_R` is rebuilt first.
pub(super) fn decode_with(
    noise @ [_, _, fl, fr]: [&Matrix; 4],
    a: &Matrix,
    b: &Matrix,
    c_prime: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    let b_prime = mat_mul_add_counted(b, fl, fr, fp, ops)?;
    decode_with_b_prime(noise, a, &b_prime, c_prime, fp, ops)
}

/// Four `n^2 r` products given `B' = B + F`.
pub(super) fn decode_with_b_prime(
    [el, er, fl, fr]: [&Matrix; 4],
    a: &Matrix,
    b_prime: &Matrix,
    c_prime: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    let a_fl = product(a, fl, fp, ops)?;
    let er_b = product(er, b_prime, fp, ops)?;
    let left = negated_hcat(&a_fl, el, fp, ops);
    let right = vcat(fr, &er_b);
    mat_mul_add_counted(c_prime, &left, &right, fp, ops)
}

/// `-[x | y]`.
fn negated_hcat(x: &Matrix, y: &Matrix, fp: &FieldParams, ops: &mut OpCounter) -> Matrix {
    debug_assert_eq!(x.rows(), y.rows());
    let cols = x.cols() + y.cols();
    let mut data = Vec::with_capacity(x.rows() * cols);
    for i in 0..x.rows() {
        data.extend(x.row(i).iter().chain(y.row(i)).map(|&v| fp.neg(v)));
    }
    ops.adds += data.len() as u64;
    Matrix::from_raw(x.rows(), cols, data)
}

/// `[x ; y]`.
fn vcat(x: &Matrix, y: &Matrix) -> Matrix {
    debug_assert_eq!(x.cols(), y.cols());
    let mut data = Vec::with_capacity((x.rows() + y.rows()) * x.cols());
    data.extend_from_slice(x.as_slice());
    data.extend_from_slice(y.as_slice());
    Matrix::from_raw(x.rows() + y.rows(), x.cols(), data)
}

pub fn encode_lowrank(
    seed: &Seed,
    a: &Matrix,
    b: &Matrix,
    r: usize,
    fp: &FieldParams,
) -> Result<EncodedPair> {
    derive_noise(seed, a, b, SchemeId::LowRank(r as u32), fp)?.encode(a, b, fp, &mut OpCounter::default())
}

pub fn decode_lowrank(
    seed: &Seed,
    a: &Matrix,
    b: &Matrix,
    r: usize,
    c_prime: &Matrix,
    fp: &FieldParams,
) -> Result<Matrix> {
    let noise: NoiseSpec = derive_noise(seed, a, b, SchemeId::LowRank(r as u32), fp)?;
    noise.decode(a, b, c_prime, fp, &mut OpCounter::default())
}
