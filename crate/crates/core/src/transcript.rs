//! Tiled multiplication with transcript emission.
//!
//! `matmul_tiled` computes `C = A * B` block by block: for every output block
//! `(i, j)` it accumulates `C(l) = C(l-1) + A[i,l] * B[l,j]` for
//! `l = 0..n/r` and hands each partial sum to a sink. The canonical
//! transcript order is lexicographic in `(i, j, l)`.
//!
//! Tile wire format (normative, `12 + 4 r^2` bytes):
//!
//! ```text
//! i: u32 LE | j: u32 LE | l: u32 LE | r*r values, row-major, u32 LE
//! ```

use rayon::prelude::*;

use crate::error::{parse, shape, Error, Result};
use crate::linalg::{block_partial_sums, le_bytes, strip_partial_sums, FieldParams, Matrix};
use crate::oracle::{lanes, meets_threshold, ticket_value, Difficulty, Digest, RoHasher, Seed};

/// Block coordinates of a transcript tile, 0-based.
///
/// The derived ordering is the canonical `(i, j, l)` lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TileIndex {
    pub i: u32,
    pub j: u32,
    pub ell: u32,
}

impl TileIndex {
    pub fn new(i: usize, j: usize, ell: usize) -> Self {
        Self {
            i: i as u32,
            j: j as u32,
            ell: ell as u32,
        }
    }

    pub fn to_bytes(&self) -> [u8; 12] {
        let mut out = [0u8; 12];
        out[..4].copy_from_slice(&self.i.to_le_bytes());
        out[4..8].copy_from_slice(&self.j.to_le_bytes());
        out[8..].copy_from_slice(&self.ell.to_le_bytes());
        out
    }

    pub fn from_bytes(b: &[u8; 12]) -> Self {
        let word = |k: usize| u32::from_le_bytes(b[k..k + 4].try_into().unwrap());
        Self {
            i: word(0),
            j: word(4),
            ell: word(8),
        }
    }

    /// Whether the index addresses a tile of an `n x n` product with tile `r`.
    pub fn in_range(&self, n: usize, r: usize) -> bool {
        let blocks = (n / r) as u64;
        u64::from(self.i) < blocks && u64::from(self.j) < blocks && u64::from(self.ell) < blocks
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum TranscriptMode {
    /// One digest over the whole ordered transcript.
    FullDigest,
    /// Every tile is an independent lottery ticket.
    #[default]
    PerTileLottery,
}

impl TranscriptMode {
    pub fn to_byte(self) -> u8 {
        match self {
            TranscriptMode::FullDigest => 0,
            TranscriptMode::PerTileLottery => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(TranscriptMode::FullDigest),
            1 => Ok(TranscriptMode::PerTileLottery),
            other => Err(parse(format!("unknown transcript mode {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TranscriptConfig {
    pub n: usize,
    pub r: usize,
    pub mode: TranscriptMode,
}

impl TranscriptConfig {
    pub fn new(n: usize, r: usize, mode: TranscriptMode) -> Result<Self> {
        if r == 0 || !n.is_multiple_of(r) {
            return Err(shape(format!("tile size {r} does not divide {n}")));
        }
        Ok(Self { n, r, mode })
    }

    pub fn blocks(&self) -> usize {
        self.n / self.r
    }

    /// `(n / r)^3`.
    pub fn tile_count(&self) -> u64 {
        (self.blocks() as u64).pow(3)
    }
}

/// Borrowed partial sum `C(l)[i, j]`, `r x r` row-major.
#[derive(Clone, Copy, Debug)]
pub struct TileView<'a> {
    pub idx: TileIndex,
    pub r: usize,
    pub values: &'a [u32],
}

/// Owned tile, the result of parsing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    pub idx: TileIndex,
    pub r: usize,
    pub values: Vec<u32>,
}

impl Tile {
    pub fn view(&self) -> TileView<'_> {
        TileView {
            idx: self.idx,
            r: self.r,
            values: &self.values,
        }
    }
}

impl TileView<'_> {
    pub fn to_tile(&self) -> Tile {
        Tile {
            idx: self.idx,
            r: self.r,
            values: self.values.to_vec(),
        }
    }
}

pub fn tile_bytes_len(r: usize) -> usize {
    12 + 4 * r * r
}

/// Appends the tile's wire encoding to `out`.
pub fn write_tile(t: &TileView<'_>, out: &mut Vec<u8>) {
    debug_assert_eq!(t.values.len(), t.r * t.r);
    out.reserve(tile_bytes_len(t.r));
    out.extend_from_slice(&t.idx.to_bytes());
    for &v in t.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Feeds the wire encoding of `t` to `h`.
fn absorb_tile(h: &mut RoHasher, t: &TileView<'_>) {
    h.update(&t.idx.to_bytes()).update(&le_bytes(t.values));
}

pub fn serialize_tile(t: &TileView<'_>) -> Vec<u8> {
    let mut out = Vec::with_capacity(tile_bytes_len(t.r));
    write_tile(t, &mut out);
    out
}

pub fn parse_tile(bytes: &[u8], r: usize) -> Result<Tile> {
    if bytes.len() != tile_bytes_len(r) {
        return Err(parse(format!(
            "tile with r={r} needs {} bytes, got {}",
            tile_bytes_len(r),
            bytes.len()
        )));
    }
    let idx = TileIndex::from_bytes(bytes[..12].try_into().unwrap());
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tile { idx, r, values })
}

fn check_operands(a: &Matrix, b: &Matrix, n: usize, r: usize) -> Result<()> {
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(shape(format!(
            "tiled product needs two {n}x{n} matrices, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if r == 0 || !n.is_multiple_of(r) {
        return Err(shape(format!("tile size {r} does not divide {n}")));
    }
    Ok(())
}

/// Consumer of transcript tiles.
pub trait TileSink {
    fn accept(&mut self, tile: &TileView<'_>);

    /// Whether tiles within a block row must arrive in `(j, l)` order.
    /// Sinks that return `false` may see them in `(l, j)` order instead.
    fn needs_order(&self) -> bool {
        true
    }
}

impl<F: FnMut(&TileView<'_>)> TileSink for F {
    fn accept(&mut self, tile: &TileView<'_>) {
        self(tile)
    }
}

/// Snapshot buffer budget per block row, in `u32` words.
const SNAPSHOT_WORDS: usize = 1 << 19;

/// Computes one block row `i` of the product, emitting its `(j, l)` tiles in
/// order and writing the finished rows into `out` (`r x n`).
///
/// Partial sums are produced a group of block columns at a time, `l` in the
/// outer loop, buffered, and then emitted in `(j, l)` order.
#[allow(clippy::too_many_arguments)]
fn block_row(
    a: &Matrix,
    b: &Matrix,
    r: usize,
    fp: &FieldParams,
    i: usize,
    out: &mut [u32],
    sink: &mut dyn TileSink,
    budget: usize,
) {
    let n = a.cols();
    let blocks = n / r;
    let tile_len = r * r;
    let group = (budget / (tile_len * blocks)).clamp(1, blocks);
    let a_strip = &a.as_slice()[i * r * n..(i + 1) * r * n];
    if !sink.needs_order() {
        return block_row_unordered(a_strip, b, r, fp, i, out, sink, budget / r);
    }
    let mut snaps = vec![0u32; group * blocks * tile_len];
    for j0 in (0..blocks).step_by(group) {
        let jn = group.min(blocks - j0);
        let width = jn * r;
        strip_partial_sums(fp, a_strip, n, &b.as_slice()[j0 * r..], n, r, width, blocks, &mut |l, acc| {
            for (ii, row) in acc.chunks_exact(width).enumerate() {
                for (jb, seg) in row.chunks_exact(r).enumerate() {
                    let at = (jb * blocks + l) * tile_len + ii * r;
                    for (d, &v) in snaps[at..at + r].iter_mut().zip(seg) {
                        *d = v as u32;
                    }
                }
            }
        });
        for jb in 0..jn {
            for l in 0..blocks {
                let at = (jb * blocks + l) * tile_len;
                sink.accept(&TileView {
                    idx: TileIndex::new(i, j0 + jb, l),
                    r,
                    values: &snaps[at..at + tile_len],
                });
            }
            let last = &snaps[(jb * blocks + blocks - 1) * tile_len..][..tile_len];
            for ii in 0..r {
                let col = (j0 + jb) * r;
                out[ii * n + col..ii * n + col + r].copy_from_slice(&last[ii * r..(ii + 1) * r]);
            }
        }
    }
}

/// As `block_row`, emitting each tile as soon as its partial sum exists.
/// `budget` bounds the accumulator width in words.
#[allow(clippy::too_many_arguments)]
fn block_row_unordered(
    a_strip: &[u32],
    b: &Matrix,
    r: usize,
    fp: &FieldParams,
    i: usize,
    out: &mut [u32],
    sink: &mut dyn TileSink,
    budget: usize,
) {
    let n = b.cols();
    let blocks = n / r;
    let width = (budget / (r * blocks)).clamp(1, blocks) * r;
    let mut tile = vec![0u32; r * r];
    for col0 in (0..n).step_by(width) {
        let width = width.min(n - col0);
        strip_partial_sums(fp, a_strip, n, &b.as_slice()[col0..], n, r, width, blocks, &mut |l, acc| {
            for jb in 0..width / r {
                for (ii, dst) in tile.chunks_exact_mut(r).enumerate() {
                    for (d, &v) in dst.iter_mut().zip(&acc[ii * width + jb * r..]) {
                        *d = v as u32;
                    }
                }
                sink.accept(&TileView {
                    idx: TileIndex::new(i, col0 / r + jb, l),
                    r,
                    values: &tile,
                });
            }
            if l + 1 == blocks {
                for (ii, row) in acc.chunks_exact(width).enumerate() {
                    for (d, &v) in out[ii * n + col0..ii * n + col0 + width].iter_mut().zip(row) {
                        *d = v as u32;
                    }
                }
            }
        });
    }
}

/// Tiled product with a synchronous sink, called `(n/r)^3` times in
/// canonical order. The result equals `mat_mul_naive(A, B)` exactly.
pub fn matmul_tiled(
    a: &Matrix,
    b: &Matrix,
    cfg: &TranscriptConfig,
    fp: &FieldParams,
    mut sink: impl FnMut(&TileView<'_>),
) -> Result<Matrix> {
    check_operands(a, b, cfg.n, cfg.r)?;
    let (n, r) = (cfg.n, cfg.r);
    let mut c = Matrix::zeros(n, n);
    if n == 0 {
        return Ok(c);
    }
    for (i, out) in c.as_mut_slice().chunks_mut(r * n).enumerate() {
        block_row(a, b, r, fp, i, out, &mut sink, SNAPSHOT_WORDS);
    }
    Ok(c)
}

/// Tiled product with one sink per block row, computed in parallel.
///
/// Within a block row tiles arrive in `(j, l)` order unless the sink opts
/// out; the returned sinks are indexed by `i`.
pub fn matmul_tiled_par<S, F>(
    a: &Matrix,
    b: &Matrix,
    r: usize,
    fp: &FieldParams,
    make_sink: F,
) -> Result<(Matrix, Vec<S>)>
where
    S: TileSink + Send,
    F: Fn(usize) -> S + Sync,
{
    let n = a.rows();
    check_operands(a, b, n, r)?;
    let mut c = Matrix::zeros(n, n);
    if n == 0 {
        return Ok((c, Vec::new()));
    }
    let sinks = c
        .as_mut_slice()
        .par_chunks_mut(r * n)
        .enumerate()
        .map(|(i, out)| {
            let mut sink = make_sink(i);
            block_row(a, b, r, fp, i, out, &mut sink, SNAPSHOT_WORDS);
            sink
        })
        .collect();
    Ok((c, sinks))
}

/// Recomputes the single `l`-sequence of block `(i, j)` up to `idx.ell`.
///
/// `a_strip` is block row `i` of `A` (`r x n`), `b_strip` block column `j`
/// of `B` (`n x r`). Costs `(idx.ell + 1) * r^3` multiplications.
pub fn tile_at(
    a_strip: &Matrix,
    b_strip: &Matrix,
    idx: TileIndex,
    fp: &FieldParams,
) -> Result<Tile> {
    let r = a_strip.rows();
    let n = a_strip.cols();
    if r == 0 || b_strip.shape() != (n, r) || !n.is_multiple_of(r) {
        return Err(shape(format!(
            "strips {:?} and {:?} are not r x n and n x r",
            a_strip.shape(),
            b_strip.shape()
        )));
    }
    let steps = idx.ell as usize + 1;
    if steps > n / r {
        return Err(shape(format!("tile step {} out of range", idx.ell)));
    }
    let mut tile = vec![0u32; r * r];
    block_partial_sums(
        fp,
        a_strip.as_slice(),
        n,
        b_strip.as_slice(),
        r,
        r,
        steps,
        &mut tile,
        &mut |_, _| {},
    );
    Ok(Tile {
        idx,
        r,
        values: tile,
    })
}

/// `z = O(tr)` over the ordered tile stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TranscriptDigest {
    pub z: Digest,
    pub tile_count: u64,
}

/// Streaming `ro_hash("transcript", seed | tile_0 | tile_1 | ...)`.
pub struct TranscriptHasher {
    hasher: RoHasher,
    last: Option<TileIndex>,
    count: u64,
}

impl TranscriptHasher {
    pub fn new(seed: &Seed) -> Self {
        let mut hasher = RoHasher::new(b"transcript");
        hasher.update(&seed.0);
        Self {
            hasher,
            last: None,
            count: 0,
        }
    }

    pub fn absorb(&mut self, t: &TileView<'_>) -> Result<()> {
        if let Some(prev) = self.last {
            if t.idx <= prev {
                return Err(Error::Order {
                    previous: prev,
                    next: t.idx,
                });
            }
        }
        self.last = Some(t.idx);
        absorb_tile(&mut self.hasher, t);
        self.count += 1;
        Ok(())
    }

    /// Payload bytes hashed so far, seed included.
    pub fn bytes_hashed(&self) -> u64 {
        self.hasher.payload_len()
    }

    pub fn finish(self) -> TranscriptDigest {
        TranscriptDigest {
            z: self.hasher.finalize(),
            tile_count: self.count,
        }
    }
}

pub fn transcript_digest<'a>(
    seed: &Seed,
    tiles: impl IntoIterator<Item = TileView<'a>>,
) -> Result<TranscriptDigest> {
    let mut h = TranscriptHasher::new(seed);
    for t in tiles {
        h.absorb(&t)?;
    }
    Ok(h.finish())
}

/// `ro_hash("tile", seed | tile)`.
pub fn tile_ticket(seed: &Seed, t: &TileView<'_>) -> Digest {
    let mut h = RoHasher::<sha2::Sha256>::new(b"tile");
    h.update(&seed.0).update(&serialize_tile(t));
    h.finalize()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ticket {
    pub idx: TileIndex,
    pub value: u64,
    pub digest: Digest,
}

/// Winning tiles of a per-tile lottery, in the order they were offered.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TicketSet {
    pub winners: Vec<Ticket>,
    pub attempts: u64,
}

impl TicketSet {
    pub fn is_empty(&self) -> bool {
        self.winners.is_empty()
    }

    pub fn len(&self) -> usize {
        self.winners.len()
    }

    /// Smallest index among the winners.
    pub fn first(&self) -> Option<&Ticket> {
        self.winners.iter().min_by_key(|t| t.idx)
    }

    pub fn merge(&mut self, other: TicketSet) {
        self.winners.extend(other.winners);
        self.attempts += other.attempts;
    }
}

/// Sink that draws a ticket for every tile it sees.
///
/// On AVX-512 machines tiles are hashed sixteen at a time; pending tiles are
/// flushed by `into_set`.
pub struct TicketLottery {
    seed: Seed,
    diff: Difficulty,
    set: TicketSet,
    bytes: u64,
    batch: Option<LaneBatch>,
}

/// Sixteen padded `ro_hash("tile", ..)` messages sharing one length.
struct LaneBatch {
    r: usize,
    stride: usize,
    lanes: Vec<u8>,
    idx: [TileIndex; lanes::LANES],
    filled: usize,
}

/// `len(tag) | "tile" | seed`.
const TILE_PREFIX_LEN: usize = 1 + 4 + 32;

impl LaneBatch {
    fn new(seed: &Seed, r: usize) -> Self {
        let len = TILE_PREFIX_LEN + tile_bytes_len(r);
        let stride = lanes::padded_len(len);
        let mut buf = vec![0u8; lanes::LANES * stride];
        for slot in buf.chunks_exact_mut(stride) {
            slot[0] = 4;
            slot[1..5].copy_from_slice(b"tile");
            slot[5..TILE_PREFIX_LEN].copy_from_slice(&seed.0);
            lanes::pad(slot, len);
        }
        Self {
            r,
            stride,
            lanes: buf,
            idx: [TileIndex::default(); lanes::LANES],
            filled: 0,
        }
    }

    fn push(&mut self, t: &TileView<'_>) {
        let slot = &mut self.lanes[self.filled * self.stride..];
        slot[TILE_PREFIX_LEN..TILE_PREFIX_LEN + 12].copy_from_slice(&t.idx.to_bytes());
        slot[TILE_PREFIX_LEN + 12..TILE_PREFIX_LEN + 12 + 4 * t.values.len()].copy_from_slice(&le_bytes(t.values));
        self.idx[self.filled] = t.idx;
        self.filled += 1;
    }

    fn drain(&mut self, diff: Difficulty, set: &mut TicketSet) {
        if self.filled == 0 {
            return;
        }
        let states = lanes::digest_lanes(&self.lanes, self.stride);
        for (state, &idx) in states.iter().zip(&self.idx).take(self.filled) {
            let value = (u64::from(state[0]) << 32) | u64::from(state[1]);
            set.attempts += 1;
            if u128::from(value) < diff.threshold() {
                let mut digest = Digest::default();
                for (out, w) in digest.0.chunks_exact_mut(4).zip(state) {
                    out.copy_from_slice(&w.to_be_bytes());
                }
                set.winners.push(Ticket { idx, value, digest });
            }
        }
        self.filled = 0;
    }
}

impl TileSink for TicketLottery {
    fn accept(&mut self, tile: &TileView<'_>) {
        self.offer(tile)
    }

    fn needs_order(&self) -> bool {
        false
    }
}

impl TicketLottery {
    pub fn new(seed: &Seed, diff: Difficulty) -> Self {
        Self::with_lanes(seed, diff, lanes::available())
    }

    fn with_lanes(seed: &Seed, diff: Difficulty, multi: bool) -> Self {
        Self {
            seed: *seed,
            diff,
            set: TicketSet::default(),
            bytes: 0,
            batch: multi.then(|| LaneBatch::new(seed, 0)),
        }
    }

    pub fn offer(&mut self, t: &TileView<'_>) {
        debug_assert_eq!(t.values.len(), t.r * t.r);
        self.bytes += (32 + tile_bytes_len(t.r)) as u64;
        if let Some(batch) = &mut self.batch {
            if batch.r != t.r {
                batch.drain(self.diff, &mut self.set);
                *batch = LaneBatch::new(&self.seed, t.r);
            }
            batch.push(t);
            if batch.filled == lanes::LANES {
                batch.drain(self.diff, &mut self.set);
            }
            return;
        }
        let mut h = RoHasher::<sha2::Sha256>::new(b"tile");
        h.update(&self.seed.0);
        absorb_tile(&mut h, t);
        let digest = h.finalize();
        self.set.attempts += 1;
        if meets_threshold(&digest, self.diff) {
            self.set.winners.push(Ticket {
                idx: t.idx,
                value: ticket_value(&digest),
                digest,
            });
        }
    }

    pub fn bytes_hashed(&self) -> u64 {
        self.bytes
    }

    pub fn into_set(mut self) -> TicketSet {
        if let Some(batch) = &mut self.batch {
            batch.drain(self.diff, &mut self.set);
        }
        self.set
    }
}

pub fn tile_tickets<'a>(
    seed: &Seed,
    tiles: impl IntoIterator<Item = TileView<'a>>,
    diff: Difficulty,
) -> TicketSet {
    let mut lottery = TicketLottery::new(seed, diff);
    for t in tiles {
        lottery.offer(&t);
    }
    lottery.into_set()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_mul_naive, mat_sub};
    use crate::oracle::{expand_matrix, ro_hash};

    fn fp(q: u64) -> FieldParams {
        FieldParams::new(q).unwrap()
    }

    fn collect_tiles(a: &Matrix, b: &Matrix, r: usize, f: &FieldParams) -> (Matrix, Vec<Tile>) {
        let cfg = TranscriptConfig::new(a.rows(), r, TranscriptMode::FullDigest).unwrap();
        let mut tiles = Vec::new();
        let c = matmul_tiled(a, b, &cfg, f, |t| tiles.push(t.to_tile())).unwrap();
        (c, tiles)
    }

    #[test]
    fn single_tile_when_r_equals_n() {
        let f = fp(17);
        let s = Seed::from_label("r=n");
        let a = expand_matrix(&s, b"A", 4, 4, &f);
        let b = expand_matrix(&s, b"B", 4, 4, &f);
        let (c, tiles) = collect_tiles(&a, &b, 4, &f);
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].values, c.as_slice());
        assert_eq!(c, mat_mul_naive(&a, &b, &f).unwrap());
    }

    #[test]
    fn scalar_tiles_hand_example() {
        let f = fp(7);
        let a = Matrix::from_rows(&[[1, 2], [3, 4]], &f).unwrap();
        let b = Matrix::from_rows(&[[5, 6], [0, 1]], &f).unwrap();
        let (c, tiles) = collect_tiles(&a, &b, 1, &f);
        assert_eq!(c, Matrix::from_rows(&[[5, 1], [1, 1]], &f).unwrap());
        assert_eq!(tiles.len(), 8);
        // (i, j, l) = (0, 0, 0): A[0][0] * B[0][0] = 5
        assert_eq!(tiles[0].idx, TileIndex::new(0, 0, 0));
        assert_eq!(tiles[0].values, vec![5]);
        for t in tiles.iter().filter(|t| t.idx.ell == 1) {
            assert_eq!(t.values[0], c.get(t.idx.i as usize, t.idx.j as usize));
        }
        let order: Vec<TileIndex> = tiles.iter().map(|t| t.idx).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn tile_recurrence_against_oracle() {
        let f = fp(17);
        let s = Seed::from_label("recurrence");
        let (n, r) = (8, 2);
        let a = expand_matrix(&s, b"A", n, n, &f);
        let b = expand_matrix(&s, b"B", n, n, &f);
        let (_, tiles) = collect_tiles(&a, &b, r, &f);
        let blocks = n / r;
        for t in &tiles {
            let (i, j, l) = (t.idx.i as usize, t.idx.j as usize, t.idx.ell as usize);
            let prev = if l == 0 {
                Matrix::zeros(r, r)
            } else {
                let p = &tiles[(i * blocks + j) * blocks + l - 1];
                Matrix::from_vec(r, r, p.values.clone(), &f).unwrap()
            };
            let cur = Matrix::from_vec(r, r, t.values.clone(), &f).unwrap();
            let a_blk = a.row_block(i * r, r).col_block(l * r, r);
            let b_blk = b.row_block(l * r, r).col_block(j * r, r);
            let want = mat_mul_naive(&a_blk, &b_blk, &f).unwrap();
            assert_eq!(mat_sub(&cur, &prev, &f).unwrap(), want, "tile {:?}", t.idx);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let f = fp(17);
        assert!(TranscriptConfig::new(6, 4, TranscriptMode::FullDigest).is_err());
        assert!(TranscriptConfig::new(6, 0, TranscriptMode::FullDigest).is_err());
        let cfg = TranscriptConfig::new(4, 2, TranscriptMode::FullDigest).unwrap();
        let err = matmul_tiled(&Matrix::zeros(4, 4), &Matrix::zeros(4, 2), &cfg, &f, |_| {});
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn parallel_matches_sequential() {
        let f = FieldParams::mersenne31();
        let s = Seed::from_label("par");
        let a = expand_matrix(&s, b"A", 16, 16, &f);
        let b = expand_matrix(&s, b"B", 16, 16, &f);
        let (c, tiles) = collect_tiles(&a, &b, 4, &f);
        let seed = Seed::from_label("par-tickets");
        let diff = Difficulty::new(2).unwrap();
        let seq = tile_tickets(&seed, tiles.iter().map(|t| t.view()), diff);
        let (c2, lotteries) =
            matmul_tiled_par(&a, &b, 4, &f, |_| TicketLottery::new(&seed, diff)).unwrap();
        assert_eq!(c, c2);
        assert_eq!(lotteries.len(), 4);
        let mut merged = TicketSet::default();
        for l in lotteries {
            merged.merge(l.into_set());
        }
        merged.winners.sort_by_key(|t| t.idx);
        assert_eq!(merged, seq);
        assert_eq!(merged.attempts, 64);
        assert!(!merged.is_empty());
    }

    struct Unordered(Vec<Tile>);

    impl TileSink for Unordered {
        fn accept(&mut self, tile: &TileView<'_>) {
            self.0.push(tile.to_tile());
        }

        fn needs_order(&self) -> bool {
            false
        }
    }

    #[test]
    fn small_budgets_give_the_same_tiles() {
        let f = fp(97);
        let s = Seed::from_label("budget");
        let (n, r) = (12, 2);
        let a = expand_matrix(&s, b"A", n, n, &f);
        let b = expand_matrix(&s, b"B", n, n, &f);
        let (c, tiles) = collect_tiles(&a, &b, r, &f);
        for budget in [1, r * r * 6 * 2, r * r * 6 * 5, usize::MAX / 2] {
            let mut ordered = Vec::new();
            let mut loose = Unordered(Vec::new());
            let mut c1 = Matrix::zeros(n, n);
            let mut c2 = Matrix::zeros(n, n);
            for i in 0..n / r {
                let rows = i * r * n..(i + 1) * r * n;
                let mut push = |t: &TileView<'_>| ordered.push(t.to_tile());
                block_row(&a, &b, r, &f, i, &mut c1.as_mut_slice()[rows.clone()], &mut push, budget);
                block_row(&a, &b, r, &f, i, &mut c2.as_mut_slice()[rows], &mut loose, budget);
            }
            assert_eq!((&c1, &c2), (&c, &c));
            assert_eq!(ordered, tiles);
            let mut loose = loose.0;
            if budget > 1 {
                assert_ne!(loose, tiles);
            }
            loose.sort_by_key(|t| t.idx);
            assert_eq!(loose, tiles);
        }
    }

    #[test]
    fn tile_at_matches_stream() {
        let f = fp(251);
        let s = Seed::from_label("tile-at");
        let (n, r) = (12, 3);
        let a = expand_matrix(&s, b"A", n, n, &f);
        let b = expand_matrix(&s, b"B", n, n, &f);
        let (_, tiles) = collect_tiles(&a, &b, r, &f);
        for t in tiles.iter().step_by(5) {
            let (i, j) = (t.idx.i as usize, t.idx.j as usize);
            let got = tile_at(&a.row_block(i * r, r), &b.col_block(j * r, r), t.idx, &f).unwrap();
            assert_eq!(&got, t);
        }
        let bad = TileIndex::new(0, 0, 4);
        assert!(tile_at(&a.row_block(0, r), &b.col_block(0, r), bad, &f).is_err());
    }

    #[test]
    fn serialization_layout() {
        let t = Tile {
            idx: TileIndex::new(0, 0, 0),
            r: 1,
            values: vec![5],
        };
        let bytes = serialize_tile(&t.view());
        let mut want = vec![0u8; 12];
        want.extend_from_slice(&[5, 0, 0, 0]);
        assert_eq!(bytes, want);
        assert_eq!(parse_tile(&bytes, 1).unwrap(), t);
        assert!(parse_tile(&bytes[..15], 1).is_err());

        let t2 = Tile {
            idx: TileIndex::new(1, 2, 3),
            r: 2,
            values: vec![1, 2, 3, 4],
        };
        let mut t3 = t2.clone();
        t3.values[2] = 9;
        assert_ne!(serialize_tile(&t2.view()), serialize_tile(&t3.view()));
        assert_eq!(serialize_tile(&t2.view()).len(), tile_bytes_len(2));
        assert_eq!(parse_tile(&serialize_tile(&t2.view()), 2).unwrap(), t2);
    }

    #[test]
    fn digest_streaming_and_order() {
        let f = fp(17);
        let s = Seed::from_label("digest");
        let a = expand_matrix(&s, b"A", 4, 4, &f);
        let b = expand_matrix(&s, b"B", 4, 4, &f);
        let (_, tiles) = collect_tiles(&a, &b, 2, &f);
        let d1 = transcript_digest(&s, tiles.iter().map(|t| t.view())).unwrap();
        let d2 = transcript_digest(&s, tiles.iter().map(|t| t.view())).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.tile_count, 8);

        let mut payload = s.0.to_vec();
        for t in &tiles {
            payload.extend(serialize_tile(&t.view()));
        }
        assert_eq!(d1.z, ro_hash(b"transcript", &payload));

        let mut flipped = tiles.clone();
        flipped[3].values[1] = (flipped[3].values[1] + 1) % 17;
        let d3 = transcript_digest(&s, flipped.iter().map(|t| t.view())).unwrap();
        assert_ne!(d1.z, d3.z);

        let mut swapped = tiles.clone();
        swapped.swap(2, 3);
        assert!(matches!(
            transcript_digest(&s, swapped.iter().map(|t| t.view())),
            Err(Error::Order { .. })
        ));
        let mut dup = tiles.clone();
        dup[1] = dup[0].clone();
        assert!(transcript_digest(&s, dup.iter().map(|t| t.view())).is_err());
    }

    #[test]
    fn single_tile_digest_is_one_hash() {
        let t = Tile {
            idx: TileIndex::default(),
            r: 2,
            values: vec![1, 2, 3, 4],
        };
        let s = Seed([3; 32]);
        let mut payload = s.0.to_vec();
        payload.extend(serialize_tile(&t.view()));
        let d = transcript_digest(&s, [t.view()]).unwrap();
        assert_eq!(d.z, ro_hash(b"transcript", &payload));
    }

    #[test]
    fn ticket_extremes() {
        let f = fp(17);
        let s = Seed::from_label("tickets");
        let a = expand_matrix(&s, b"A", 8, 8, &f);
        let b = expand_matrix(&s, b"B", 8, 8, &f);
        let (_, tiles) = collect_tiles(&a, &b, 2, &f);
        let all = tile_tickets(&s, tiles.iter().map(|t| t.view()), Difficulty::new(0).unwrap());
        assert_eq!(all.len(), 64);
        assert_eq!(all.attempts, 64);
        assert_eq!(all.first().unwrap().idx, TileIndex::default());
        let t0 = &all.winners[0];
        assert_eq!(t0.digest, tile_ticket(&s, &tiles[0].view()));
        assert_eq!(t0.value, ticket_value(&t0.digest));
        let none = tile_tickets(&s, tiles.iter().map(|t| t.view()), Difficulty::new(64).unwrap());
        assert!(none.is_empty());
    }

    #[test]
    fn lane_lottery_matches_scalar() {
        let f = fp(97);
        let s = Seed::from_label("lanes");
        let mut tiles = Vec::new();
        for r in [1, 4, 2] {
            let a = expand_matrix(&s, b"A", 12, 12, &f);
            let b = expand_matrix(&s, b"B", 12, 12, &f);
            tiles.extend(collect_tiles(&a, &b, r, &f).1);
        }
        let e = Difficulty::new(1).unwrap();
        let mut scalar = TicketLottery::with_lanes(&s, e, false);
        let mut multi = TicketLottery::with_lanes(&s, e, lanes::available());
        for t in &tiles {
            scalar.offer(&t.view());
            multi.offer(&t.view());
        }
        assert_eq!(scalar.bytes_hashed(), multi.bytes_hashed());
        let (x, y) = (scalar.into_set(), multi.into_set());
        assert_eq!(x.attempts, tiles.len() as u64);
        assert!(!x.is_empty());
        assert_eq!(x, y);
        for t in tiles.iter().take(40) {
            let d = tile_ticket(&s, &t.view());
            let one = tile_tickets(&s, [t.view()], Difficulty::new(0).unwrap());
            assert_eq!(one.winners[0].digest, d);
        }
    }
}
