//! Walsh-Hadamard transform and fast structured rotations `R = H_n * D`.
//!
//! `H_n` is the Sylvester-ordered Hadamard matrix, `H_n[i][j] =
//! (-1)^popcount(i & j)`, with `-1` represented as `q - 1`. `D` is block
//! diagonal with `n / d` signed-permutation blocks of size `d`.

use super::field::FieldParams;
use super::matrix::{Matrix, OpCounter};
use crate::error::{shape, Result};

/// In-place `x <- H_n * x mod q`.
pub fn fwht_in_place(x: &mut [u32], fp: &FieldParams) -> Result<()> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(shape(format!("FWHT length {n} is not a power of two")));
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (fp.add(*a, *b), fp.sub(*a, *b));
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Returns `H_n * x mod q`.
pub fn fwht(x: &[u32], fp: &FieldParams) -> Result<Vec<u32>> {
    let mut y = x.to_vec();
    fwht_in_place(&mut y, fp)?;
    Ok(y)
}

/// `R = H_n * D` with `D` block diagonal of signed permutations.
///
/// Row `k` of `D` has a single nonzero, `+-1`, in column `perm[k]`, and
/// `perm` never leaves the `d`-block containing `k`. Hence `D * D^T = I`
/// and `R * R^T = n * I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RotationSpec {
    n: usize,
    block: usize,
    perm: Vec<u32>,
    negate: Vec<bool>,
}

impl RotationSpec {
    pub fn new(n: usize, block: usize, perm: Vec<u32>, negate: Vec<bool>) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(shape(format!("rotation dimension {n} is not a power of two")));
        }
        if block == 0 || !n.is_multiple_of(block) {
            return Err(shape(format!("block size {block} does not divide {n}")));
        }
        if perm.len() != n || negate.len() != n {
            return Err(shape("permutation/sign length must equal n"));
        }
        let mut seen = vec![false; n];
        for (k, &p) in perm.iter().enumerate() {
            let p = p as usize;
            if p >= n || p / block != k / block || seen[p] {
                return Err(shape("not a block-diagonal signed permutation"));
            }
            seen[p] = true;
        }
        Ok(Self {
            n,
            block,
            perm,
            negate,
        })
    }

    /// `D = I`, so `R = H_n`.
    pub fn plain_hadamard(n: usize) -> Result<Self> {
        Self::new(n, 1, (0..n as u32).collect(), vec![false; n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn negate(&self) -> &[bool] {
        &self.negate
    }

    /// Dense `D`.
    pub fn dense_diag(&self, fp: &FieldParams) -> Matrix {
        let mut d = Matrix::zeros(self.n, self.n);
        for k in 0..self.n {
            let v = if self.negate[k] { fp.neg(1) } else { 1 };
            d.set(k, self.perm[k] as usize, v);
        }
        d
    }

    /// Dense `R = H_n * D`, built entrywise from the Sylvester formula.
    pub fn dense(&self, fp: &FieldParams) -> Matrix {
        let n = self.n;
        let minus = fp.neg(1);
        let mut r = Matrix::zeros(n, n);
        for k in 0..n {
            let col = self.perm[k] as usize;
            for i in 0..n {
                let h_neg = (i & k).count_ones() % 2 == 1;
                r.set(i, col, if h_neg ^ self.negate[k] { minus } else { 1 });
            }
        }
        r
    }
}

/// Which product [`apply_rotation`] computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationSide {
    /// `A * R`; `A` has `n` columns.
    Left,
    /// `R^T * B`; `B` has `n` rows.
    Right,
}

/// Applies the rotation in `O(n^2 log n)` additions plus a signed
/// permutation, never materializing `R`.
pub fn apply_rotation(
    m: &Matrix,
    rot: &RotationSpec,
    side: RotationSide,
    fp: &FieldParams,
) -> Result<Matrix> {
    apply_rotation_counted(m, rot, side, fp, &mut OpCounter::default())
}

pub fn apply_rotation_counted(
    m: &Matrix,
    rot: &RotationSpec,
    side: RotationSide,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    let n = rot.n;
    let log_n = n.trailing_zeros() as u64;
    match side {
        RotationSide::Left => {
            if m.cols() != n {
                return Err(shape(format!("A*R needs {n} columns, got {}", m.cols())));
            }
            // Row-vector times H equals H times the vector (H symmetric),
            // then (y D)[perm[k]] = +-y[k].
            let mut out = Matrix::zeros(m.rows(), n);
            let mut y = vec![0u32; n];
            for i in 0..m.rows() {
                y.copy_from_slice(m.row(i));
                fwht_in_place(&mut y, fp)?;
                let dst = &mut out.as_mut_slice()[i * n..(i + 1) * n];
                for k in 0..n {
                    dst[rot.perm[k] as usize] = if rot.negate[k] { fp.neg(y[k]) } else { y[k] };
                }
            }
            ops.adds += m.rows() as u64 * n as u64 * log_n;
            Ok(out)
        }
        RotationSide::Right => {
            if m.rows() != n {
                return Err(shape(format!("R^T*B needs {n} rows, got {}", m.rows())));
            }
            let cols = m.cols();
            // H * B by butterflies over whole rows.
            let mut z = m.as_slice().to_vec();
            let mut h = 1;
            while h < n {
                for block in z.chunks_exact_mut(2 * h * cols) {
                    let (lo, hi) = block.split_at_mut(h * cols);
                    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (s, d) = (fp.add(*a, *b), fp.sub(*a, *b));
                        *a = s;
                        *b = d;
                    }
                }
                h *= 2;
            }
            // (D^T Z)[perm[k]] = +-Z[k]
            let mut out = Matrix::zeros(n, cols);
            for k in 0..n {
                let src = &z[k * cols..(k + 1) * cols];
                let p = rot.perm[k] as usize;
                let dst = &mut out.as_mut_slice()[p * cols..(p + 1) * cols];
                if rot.negate[k] {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = fp.neg(s);
                    }
                } else {
                    dst.copy_from_slice(src);
                }
            }
            ops.adds += cols as u64 * n as u64 * log_n;
            Ok(out)
        }
    }
}
