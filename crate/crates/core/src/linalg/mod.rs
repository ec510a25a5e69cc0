//! Prime-field matrices: arithmetic, the textbook product used as the
//! reference oracle, rank, and Walsh-Hadamard rotations.

mod field;
mod format;
mod hadamard;
mod matrix;
mod rank;

pub use field::{is_prime, FieldParams, MERSENNE31};
pub use format::{
    matrix_from_bytes, matrix_to_bytes, puwm_len, read_matrix, write_matrix, MATRIX_HEADER_LEN,
    MATRIX_MAGIC, MATRIX_VERSION,
};
pub use hadamard::{
    apply_rotation, apply_rotation_counted, fwht, fwht_in_place, RotationSide, RotationSpec,
};
pub use matrix::{
    mat_add, mat_add_counted, mat_mul_add_counted, mat_mul_naive, mat_mul_naive_counted, mat_sub, mat_sub_counted,
    Matrix, OpCounter, TileRef,
};
pub use rank::mat_rank;

pub(crate) use format::le_bytes;
pub(crate) use matrix::{block_partial_sums, strip_partial_sums};
