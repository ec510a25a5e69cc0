use super::field::FieldParams;
use super::matrix::Matrix;

/// Rank over `Z_q` by Gaussian elimination.
///
/// Pivots are chosen as the first nonzero entry scanning columns left to
/// right, so the elimination is fully deterministic.
pub fn mat_rank(a: &Matrix, fp: &FieldParams) -> usize {
    let (rows, cols) = a.shape();
    let mut m: Vec<Vec<u32>> = (0..rows).map(|i| a.row(i).to_vec()).collect();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&i| m[i][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let inv = fp.inv(m[rank][col]).expect("pivot is nonzero");
        for x in m[rank][col..].iter_mut() {
            *x = fp.mul(*x, inv);
        }
        let pivot_row = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == rank || row[col] == 0 {
                continue;
            }
            let f = row[col];
            for (x, &p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x = fp.sub(*x, fp.mul(f, p));
            }
        }
        rank += 1;
    }
    rank
}
