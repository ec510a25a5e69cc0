use rayon::prelude::*;

use super::field::{FieldParams, Generic, Mersenne31, Reducer};
use crate::error::{shape, Error, Result};

/// Dense row-major matrix over a prime field.
///
/// The matrix does not carry its modulus; operations take a [`FieldParams`]
/// and constructors that accept external data check canonicity against it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

/// Field operation tallies used for overhead accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub mults: u64,
    pub adds: u64,
}

impl OpCounter {
    pub fn absorb(&mut self, other: OpCounter) {
        self.mults += other.mults;
        self.adds += other.adds;
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Wraps row-major data, checking length and that every entry is `< q`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<u32>, fp: &FieldParams) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&x| !fp.is_canonical(x)) {
            return Err(Error::Field(format!(
                "entry {bad} not below modulus {}",
                fp.modulus()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows, reducing each entry mod `q`.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R], fp: &FieldParams) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(shape("ragged rows"));
            }
            data.extend(row.iter().map(|&x| fp.from_u64(x)));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    /// Stores `v` unreduced; callers keep it canonical.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_canonical(&self, fp: &FieldParams) -> bool {
        self.data.iter().all(|&x| fp.is_canonical(x))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Copies rows `[start, start + count)`.
    pub fn row_block(&self, start: usize, count: usize) -> Matrix {
        Matrix::from_raw(
            count,
            self.cols,
            self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        )
    }

    /// Copies columns `[start, start + count)`.
    pub fn col_block(&self, start: usize, count: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * count);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..start + count]);
        }
        Matrix::from_raw(self.rows, count, data)
    }

    /// Borrowed `r x r` block view at block coordinates `(bi, bj)`.
    pub fn tile(&self, bi: usize, bj: usize, r: usize) -> TileRef<'_> {
        assert!((bi + 1) * r <= self.rows && (bj + 1) * r <= self.cols);
        TileRef {
            data: &self.data[bi * r * self.cols + bj * r..],
            stride: self.cols,
            r,
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&self, s: u32, fp: &FieldParams) -> Matrix {
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| fp.mul(x, s)).collect(),
        )
    }
}

/// Strided view of an `r x r` block inside a row-major matrix.
#[derive(Clone, Copy, Debug)]
pub struct TileRef<'a> {
    data: &'a [u32],
    stride: usize,
    r: usize,
}

impl<'a> TileRef<'a> {
    pub fn size(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.stride + j]
    }

    pub fn row(&self, i: usize) -> &'a [u32] {
        &self.data[i * self.stride..i * self.stride + self.r]
    }
}

fn check_same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Entrywise `A + B mod q`.
pub fn mat_add(a: &Matrix, b: &Matrix, fp: &FieldParams) -> Result<Matrix> {
    mat_add_counted(a, b, fp, &mut OpCounter::default())
}

/// Entrywise `A - B mod q`.
pub fn mat_sub(a: &Matrix, b: &Matrix, fp: &FieldParams) -> Result<Matrix> {
    mat_sub_counted(a, b, fp, &mut OpCounter::default())
}

pub fn mat_add_counted(
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    check_same_shape("mat_add", a, b)?;
    ops.adds += a.data.len() as u64;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| fp.add(x, y)).collect();
    Ok(Matrix::from_raw(a.rows, a.cols, data))
}

pub fn mat_sub_counted(
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    check_same_shape("mat_sub", a, b)?;
    ops.adds += a.data.len() as u64;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| fp.sub(x, y)).collect();
    Ok(Matrix::from_raw(a.rows, a.cols, data))
}

/// Textbook product `A * B mod q`.
///
/// Row `i` of the result is accumulated as `sum_k A[i][k] * B[k][..]` in
/// `u64`, reducing after every [`FieldParams::chunk_len`] terms. Rows are
/// independent and are computed in parallel for large inputs; the result
/// is exact and does not depend on scheduling.
pub fn mat_mul_naive(a: &Matrix, b: &Matrix, fp: &FieldParams) -> Result<Matrix> {
    mat_mul_naive_counted(a, b, fp, &mut OpCounter::default())
}

pub fn mat_mul_naive_counted(
    a: &Matrix,
    b: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension {
            op: "mat_mul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let work = (a.rows * a.cols * b.cols) as u64;
    ops.mults += work;
    ops.adds += work;
    let mut c = Matrix::zeros(a.rows, b.cols);
    mul_into(a, b, fp, &mut c, work);
    Ok(c)
}

/// `C0 + X * Y mod q` in one pass over the output.
pub fn mat_mul_add_counted(
    c0: &Matrix,
    x: &Matrix,
    y: &Matrix,
    fp: &FieldParams,
    ops: &mut OpCounter,
) -> Result<Matrix> {
    if x.cols != y.rows {
        return Err(Error::Dimension {
            op: "mat_mul",
            left: x.shape(),
            right: y.shape(),
        });
    }
    if c0.shape() != (x.rows, y.cols) {
        return Err(Error::Dimension {
            op: "mat_mul_add",
            left: c0.shape(),
            right: (x.rows, y.cols),
        });
    }
    let work = (x.rows * x.cols * y.cols) as u64;
    ops.mults += work;
    ops.adds += work + c0.data.len() as u64;
    let mut c = c0.clone();
    mul_into(x, y, fp, &mut c, work);
    Ok(c)
}

/// `c += a * b`; `c` must be canonical on entry.
fn mul_into(a: &Matrix, b: &Matrix, fp: &FieldParams, c: &mut Matrix, work: u64) {
    if b.cols == 0 {
        return;
    }
    let chunk = fp.chunk_len();
    if fp.is_mersenne31() {
        rows_kernel(Mersenne31, a, b, chunk, c, work);
    } else {
        rows_kernel(Generic(u64::from(fp.modulus())), a, b, chunk, c, work);
    }
}

fn rows_kernel<R: Reducer>(red: R, a: &Matrix, b: &Matrix, chunk: usize, c: &mut Matrix, work: u64) {
    let m = b.cols;
    let run = |(i, out): (usize, &mut [u32])| {
        let mut acc: Vec<u64> = out.iter().map(|&v| u64::from(v)).collect();
        row_times_matrix(red, a.row(i), &b.data, m, chunk, &mut acc);
        for (o, &x) in out.iter_mut().zip(&acc) {
            *o = red.reduce(x);
        }
    };
    if work >= 1 << 18 {
        c.data.par_chunks_mut(m).enumerate().for_each(run);
    } else {
        c.data.chunks_mut(m).enumerate().for_each(run);
    }
}

/// `acc += a_row * B` with deferred reduction. `acc` must hold values `< q`
/// on entry. Returns whether `acc` is already canonical on exit; otherwise
/// it needs one final reduction.
#[inline]
fn row_times_matrix<R: Reducer>(
    red: R,
    a_row: &[u32],
    b: &[u32],
    b_stride: usize,
    chunk: usize,
    acc: &mut [u64],
) -> bool {
    let m = acc.len();
    let mut pending = 0;
    for (k, &av) in a_row.iter().enumerate() {
        if av == 0 {
            continue;
        }
        let av = u64::from(av);
        let b_row = &b[k * b_stride..k * b_stride + m];
        for (s, &bv) in acc.iter_mut().zip(b_row) {
            *s += av * u64::from(bv);
        }
        pending += 1;
        if pending == chunk {
            for s in acc.iter_mut() {
                *s = u64::from(red.reduce(*s));
            }
            pending = 0;
        }
    }
    pending == 0
}

/// `acc(r x r) += A_blk * B_blk` where both blocks are `r x r` strided views
/// starting at the given offsets. Leaves `acc` unreduced.
#[inline]
#[allow(clippy::too_many_arguments)]
fn tile_mac<R: Reducer>(
    red: R,
    a: &[u32],
    a_stride: usize,
    b: &[u32],
    b_stride: usize,
    r: usize,
    chunk: usize,
    acc: &mut [u64],
) {
    for ii in 0..r {
        row_times_matrix(
            red,
            &a[ii * a_stride..ii * a_stride + r],
            b,
            b_stride,
            chunk,
            &mut acc[ii * r..(ii + 1) * r],
        );
    }
}

/// Computes the `l`-sequence of partial sums for `width / r` adjacent output
/// blocks at once.
///
/// `a_strip` is `r x k` (stride `a_stride`), `b_strip` is `k x width`
/// (stride `b_stride`). After step `l` the `r x width` accumulator holds
/// `sum_{t <= l} A[:, t] * B[t, :]` in canonical form and is passed to
/// `emit`. Returns nothing; the last emitted state is the product.
#[allow(clippy::too_many_arguments)]
pub(crate) fn strip_partial_sums(
    fp: &FieldParams,
    a_strip: &[u32],
    a_stride: usize,
    b_strip: &[u32],
    b_stride: usize,
    r: usize,
    width: usize,
    steps: usize,
    emit: &mut dyn FnMut(usize, &[u64]),
) {
    if fp.is_mersenne31() {
        strip_sums_with(Mersenne31, fp, a_strip, a_stride, b_strip, b_stride, r, width, steps, emit)
    } else {
        let red = Generic(u64::from(fp.modulus()));
        strip_sums_with(red, fp, a_strip, a_stride, b_strip, b_stride, r, width, steps, emit)
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn strip_sums_with<R: Reducer>(
    red: R,
    fp: &FieldParams,
    a_strip: &[u32],
    a_stride: usize,
    b_strip: &[u32],
    b_stride: usize,
    r: usize,
    width: usize,
    steps: usize,
    emit: &mut dyn FnMut(usize, &[u64]),
) {
    let chunk = fp.chunk_len();
    let mut acc = vec![0u64; r * width];
    for l in 0..steps {
        let b_blk = &b_strip[l * r * b_stride..];
        let mut canonical = true;
        for (ii, row) in acc.chunks_exact_mut(width).enumerate() {
            let a_row = &a_strip[ii * a_stride + l * r..ii * a_stride + (l + 1) * r];
            canonical &= row_times_matrix(red, a_row, b_blk, b_stride, chunk, row);
        }
        if !canonical {
            for s in acc.iter_mut() {
                *s = u64::from(red.reduce(*s));
            }
        }
        emit(l, &acc);
    }
}

/// Computes the `l`-sequence of partial sums for one output block.
///
/// `a_strip` is an `r x k` row-major strip (stride `a_stride`) and `b_strip`
/// a `k x r` strip (stride `b_stride`, first column at offset 0). For each
/// `l` in `0..steps` the tile `sum_{t <= l} A[:, t] * B[t, :]` is reduced to
/// canonical form in `tile` and passed to `emit`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn block_partial_sums(
    fp: &FieldParams,
    a_strip: &[u32],
    a_stride: usize,
    b_strip: &[u32],
    b_stride: usize,
    r: usize,
    steps: usize,
    tile: &mut [u32],
    emit: &mut dyn FnMut(usize, &[u32]),
) {
    if fp.is_mersenne31() {
        partial_sums_with(Mersenne31, fp, a_strip, a_stride, b_strip, b_stride, r, steps, tile, emit)
    } else {
        let red = Generic(u64::from(fp.modulus()));
        partial_sums_with(red, fp, a_strip, a_stride, b_strip, b_stride, r, steps, tile, emit)
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn partial_sums_with<R: Reducer>(
    red: R,
    fp: &FieldParams,
    a_strip: &[u32],
    a_stride: usize,
    b_strip: &[u32],
    b_stride: usize,
    r: usize,
    steps: usize,
    tile: &mut [u32],
    emit: &mut dyn FnMut(usize, &[u32]),
) {
    let chunk = fp.chunk_len();
    let mut acc = vec![0u64; r * r];
    for l in 0..steps {
        tile_mac(
            red,
            &a_strip[l * r..],
            a_stride,
            &b_strip[l * r * b_stride..],
            b_stride,
            r,
            chunk,
            &mut acc,
        );
        for (t, s) in tile.iter_mut().zip(acc.iter_mut()) {
            *t = red.reduce(*s);
            *s = u64::from(*t);
        }
        emit(l, tile);
    }
}
