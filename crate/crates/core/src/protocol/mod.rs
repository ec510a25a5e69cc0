//! Solve and verify.
//!
//! `solve` encodes the instance, runs the tiled product on the encoded pair
//! while feeding the transcript to a digest or a per-tile lottery, and
//! decodes `A B`. `verify` re-derives the noise and recomputes either the
//! whole transcript digest or the single claimed tile. It never decodes.

mod baseline;
mod proof;

use std::time::Instant;

pub use baseline::{baseline_solve, baseline_verify, leading_zero_bits, BaselineOutcome, BaselineParams};
pub use proof::{proof_len, read_proof, read_proof_from, write_proof, PROOF_FIXED_LEN, PROOF_MAGIC, PROOF_VERSION};

use crate::encoding::{NoiseSpec, SchemeId};
use crate::error::{shape, Error, Result};
use crate::linalg::{mat_mul_naive, FieldParams, Matrix};
use crate::oracle::{derive_noise, meets_threshold, Difficulty, Digest, Seed};
use crate::transcript::{
    matmul_tiled, matmul_tiled_par, tile_at, tile_ticket, TicketLottery, TicketSet, TileIndex,
    TranscriptConfig, TranscriptHasher, TranscriptMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolParams {
    pub n: usize,
    /// Transcript tile size.
    pub r: usize,
    pub fp: FieldParams,
    pub scheme: SchemeId,
    pub difficulty: Difficulty,
    pub mode: TranscriptMode,
}

impl ProtocolParams {
    pub fn new(
        n: usize,
        r: usize,
        fp: FieldParams,
        scheme: SchemeId,
        difficulty: Difficulty,
        mode: TranscriptMode,
    ) -> Result<Self> {
        let p = Self {
            n,
            r,
            fp,
            scheme,
            difficulty,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(shape("n must be positive"));
        }
        if u32::try_from(self.n).is_err() {
            return Err(shape(format!("n = {} does not fit the wire format", self.n)));
        }
        TranscriptConfig::new(self.n, self.r, self.mode)?;
        self.scheme.check(self.n, &self.fp)
    }

    pub fn transcript(&self) -> TranscriptConfig {
        TranscriptConfig {
            n: self.n,
            r: self.r,
            mode: self.mode,
        }
    }

    /// Chance that one solve yields a proof: `eps` for the full digest,
    /// `1 - (1 - eps)^tiles` for the per-tile lottery.
    pub fn success_probability(&self) -> f64 {
        let eps = self.difficulty.epsilon();
        match self.mode {
            TranscriptMode::FullDigest => eps,
            TranscriptMode::PerTileLottery => -((self.transcript().tile_count() as f64) * (-eps).ln_1p()).exp_m1(),
        }
    }

    fn check_instance(&self, a: &Matrix, b: &Matrix) -> Result<()> {
        self.validate()?;
        for (name, m) in [("A", a), ("B", b)] {
            if m.shape() != (self.n, self.n) {
                return Err(shape(format!(
                    "{name} is {:?}, expected {n} x {n}",
                    m.shape(),
                    n = self.n
                )));
            }
            if !m.is_canonical(&self.fp) {
                return Err(Error::Field(format!("{name} has entries >= q")));
            }
        }
        Ok(())
    }
}

/// `pi = (A, B, z)` plus the parameters and, in per-tile mode, the
/// winning tile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proof {
    pub params: ProtocolParams,
    pub seed: Seed,
    /// Transcript digest (full mode) or the winning tile's ticket.
    pub z: Digest,
    pub winning_tile: Option<TileIndex>,
    pub a: Matrix,
    pub b: Matrix,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OverheadReport {
    /// Field multiplications inside the tiled product, `n^3`.
    pub mults_matmul: u64,
    pub mults_encode_decode: u64,
    /// Oracle payload bytes hashed for the transcript.
    pub hash_bytes: u64,
    pub wall_ns: u64,
    /// `mults_encode_decode / mults_matmul`.
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub c: Matrix,
    pub proof: Option<Proof>,
    /// Per-tile mode only; empty in full-digest mode.
    pub tickets: TicketSet,
    pub report: OverheadReport,
}

pub fn solve(seed: &Seed, a: &Matrix, b: &Matrix, params: &ProtocolParams) -> Result<SolveOutcome> {
    params.check_instance(a, b)?;
    let start = Instant::now();
    let fp = &params.fp;
    let noise = derive_noise(seed, a, b, params.scheme, fp)?;
    let mut ed = Default::default();
    let pair = noise.encode(a, b, fp, &mut ed)?;

    let (c_prime, z, winning_tile, tickets, hash_bytes) = match params.mode {
        TranscriptMode::FullDigest => {
            let mut hasher = TranscriptHasher::new(seed);
            let mut order = Ok(());
            let c_prime = matmul_tiled(&pair.a_prime, &pair.b_prime, &params.transcript(), fp, |t| {
                if order.is_ok() {
                    order = hasher.absorb(t);
                }
            })?;
            order?;
            let bytes = hasher.bytes_hashed();
            let digest = hasher.finish().z;
            let won = meets_threshold(&digest, params.difficulty);
            (c_prime, won.then_some(digest), None, TicketSet::default(), bytes)
        }
        TranscriptMode::PerTileLottery => {
            let (c_prime, sinks) = matmul_tiled_par(&pair.a_prime, &pair.b_prime, params.r, fp, |_| {
                TicketLottery::new(seed, params.difficulty)
            })?;
            let mut tickets = TicketSet::default();
            let mut bytes = 0;
            for s in sinks {
                bytes += s.bytes_hashed();
                tickets.merge(s.into_set());
            }
            let first = tickets.first().copied();
            (
                c_prime,
                first.map(|t| t.digest),
                first.map(|t| t.idx),
                tickets,
                bytes,
            )
        }
    };
    let c = noise.decode_pair(a, b, &pair, &c_prime, fp, &mut ed)?;
    let mults_matmul = (params.n as u64).pow(3);
    let report = OverheadReport {
        mults_matmul,
        mults_encode_decode: ed.mults,
        hash_bytes,
        wall_ns: start.elapsed().as_nanos() as u64,
        alpha: ed.mults as f64 / mults_matmul as f64,
    };
    let proof = z.map(|z| Proof {
        params: *params,
        seed: *seed,
        z,
        winning_tile,
        a: a.clone(),
        b: b.clone(),
    });
    Ok(SolveOutcome {
        c,
        proof,
        tickets,
        report,
    })
}

/// Wall-clock comparison of `solve` against `mat_mul_naive` on one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchReport {
    pub report: OverheadReport,
    /// Fastest of the timed runs.
    pub solve_ns: u64,
    pub naive_ns: u64,
}

impl BenchReport {
    pub fn wall_ratio(&self) -> f64 {
        self.solve_ns as f64 / self.naive_ns as f64
    }
}

/// Alternates `reps` naive products with `reps` solves and keeps the fastest
/// of each. Fails if a solve disagrees with the naive product.
pub fn benchmark(seed: &Seed, a: &Matrix, b: &Matrix, params: &ProtocolParams, reps: usize) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Range("need at least one repetition".into()));
    }
    let mut best = BenchReport {
        report: OverheadReport::default(),
        solve_ns: u64::MAX,
        naive_ns: u64::MAX,
    };
    for _ in 0..reps {
        let t0 = Instant::now();
        let control = mat_mul_naive(a, b, &params.fp)?;
        best.naive_ns = best.naive_ns.min(t0.elapsed().as_nanos() as u64);
        let out = solve(seed, a, b, params)?;
        if out.c != control {
            return Err(Error::Field("solve disagrees with the naive product".into()));
        }
        if out.report.wall_ns < best.solve_ns {
            best.solve_ns = out.report.wall_ns;
            best.report = out.report;
        }
    }
    Ok(best)
}

/// Checks `proof` against `seed` and `params`.
///
/// `Ok(false)` is a rejection; `Err` means the proof is malformed.
pub fn verify(seed: &Seed, proof: &Proof, params: &ProtocolParams) -> Result<bool> {
    params.validate()?;
    if proof.params != *params || proof.seed != *seed {
        return Ok(false);
    }
    if proof.a.shape() != (params.n, params.n) || proof.b.shape() != (params.n, params.n) {
        return Err(Error::Parse("proof matrices do not match n".into()));
    }
    if !proof.a.is_canonical(&params.fp) || !proof.b.is_canonical(&params.fp) {
        return Err(Error::Parse("proof matrices have entries >= q".into()));
    }
    if !meets_threshold(&proof.z, params.difficulty) {
        return Ok(false);
    }
    let noise = derive_noise(seed, &proof.a, &proof.b, params.scheme, &params.fp)?;
    let recomputed = match (params.mode, proof.winning_tile) {
        (TranscriptMode::FullDigest, None) => full_digest(seed, &noise, proof, params)?,
        (TranscriptMode::PerTileLottery, Some(idx)) => {
            if !idx.in_range(params.n, params.r) {
                return Ok(false);
            }
            claimed_ticket(seed, &noise, proof, params, idx)?
        }
        (TranscriptMode::FullDigest, Some(_)) => {
            return Err(Error::Parse("full-digest proof carries a tile index".into()))
        }
        (TranscriptMode::PerTileLottery, None) => {
            return Err(Error::Parse("per-tile proof lacks a tile index".into()))
        }
    };
    Ok(recomputed == proof.z)
}

fn full_digest(seed: &Seed, noise: &NoiseSpec, proof: &Proof, params: &ProtocolParams) -> Result<Digest> {
    let pair = noise.encode(&proof.a, &proof.b, &params.fp, &mut Default::default())?;
    let mut hasher = TranscriptHasher::new(seed);
    let mut order = Ok(());
    matmul_tiled(&pair.a_prime, &pair.b_prime, &params.transcript(), &params.fp, |t| {
        if order.is_ok() {
            order = hasher.absorb(t);
        }
    })?;
    order?;
    Ok(hasher.finish().z)
}

/// Recomputes only block row `i` of `A'`, block column `j` of `B'` and the
/// `l`-sequence up to the claimed step.
fn claimed_ticket(
    seed: &Seed,
    noise: &NoiseSpec,
    proof: &Proof,
    params: &ProtocolParams,
    idx: TileIndex,
) -> Result<Digest> {
    let fp = &params.fp;
    let a_strip = noise.encode_row_strip(&proof.a, idx.i as usize, params.r, fp)?;
    let b_strip = noise.encode_col_strip(&proof.b, idx.j as usize, params.r, fp)?;
    let tile = tile_at(&a_strip, &b_strip, idx, fp)?;
    Ok(tile_ticket(seed, &tile.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_mul_naive;
    use crate::oracle::expand_matrix;
    use crate::transcript::transcript_digest;

    fn params(n: usize, r: usize, q: u64, scheme: SchemeId, e: u32, mode: TranscriptMode) -> ProtocolParams {
        ProtocolParams::new(
            n,
            r,
            FieldParams::new(q).unwrap(),
            scheme,
            Difficulty::new(e).unwrap(),
            mode,
        )
        .unwrap()
    }

    fn instance(label: &str, p: &ProtocolParams) -> (Seed, Matrix, Matrix) {
        let s = Seed::from_label(label);
        (
            s,
            expand_matrix(&s, b"A", p.n, p.n, &p.fp),
            expand_matrix(&s, b"B", p.n, p.n, &p.fp),
        )
    }

    const SCHEMES: [SchemeId; 3] = [SchemeId::FullNoise, SchemeId::LowRank(2), SchemeId::Rotation(2)];
    const MODES: [TranscriptMode; 2] = [TranscriptMode::FullDigest, TranscriptMode::PerTileLottery];

    #[test]
    fn easy_difficulty_always_yields_accepted_proof() {
        for scheme in SCHEMES {
            for mode in MODES {
                let p = params(8, 2, 17, scheme, 0, mode);
                let (s, a, b) = instance("proto-e0", &p);
                let out = solve(&s, &a, &b, &p).unwrap();
                assert_eq!(out.c, mat_mul_naive(&a, &b, &p.fp).unwrap());
                let proof = out.proof.expect("e = 0 always wins");
                assert_eq!(proof.winning_tile.is_some(), mode == TranscriptMode::PerTileLottery);
                assert!(verify(&s, &proof, &p).unwrap(), "{scheme} {mode:?}");
            }
        }
    }

    #[test]
    fn per_tile_picks_first_winner() {
        let p = params(8, 2, 17, SchemeId::LowRank(2), 0, TranscriptMode::PerTileLottery);
        let (s, a, b) = instance("proto-first", &p);
        let out = solve(&s, &a, &b, &p).unwrap();
        assert_eq!(out.tickets.attempts, 64);
        assert_eq!(out.tickets.len(), 64);
        assert_eq!(out.proof.unwrap().winning_tile, Some(TileIndex::new(0, 0, 0)));
    }

    #[test]
    fn impossible_difficulty_yields_no_proof() {
        let p = params(8, 4, 17, SchemeId::LowRank(2), 64, TranscriptMode::FullDigest);
        let (s, a, b) = instance("proto-e64", &p);
        let out = solve(&s, &a, &b, &p).unwrap();
        assert!(out.proof.is_none());
        assert_eq!(out.c, mat_mul_naive(&a, &b, &p.fp).unwrap());
    }

    #[test]
    fn zero_instance_transcript_is_noise_product() {
        let p = params(8, 2, 17, SchemeId::LowRank(2), 0, TranscriptMode::FullDigest);
        let s = Seed::from_label("proto-zero");
        let z = Matrix::zeros(8, 8);
        let out = solve(&s, &z, &z, &p).unwrap();
        assert!(out.c.is_zero());
        let noise = derive_noise(&s, &z, &z, p.scheme, &p.fp).unwrap();
        let e = noise.left_noise(&p.fp).unwrap();
        let f = noise.right_noise(&p.fp).unwrap();
        let mut tiles = Vec::new();
        matmul_tiled(&e, &f, &p.transcript(), &p.fp, |t| tiles.push(t.to_tile())).unwrap();
        assert!(tiles.iter().any(|t| t.values.iter().any(|&v| v != 0)));
        let want = transcript_digest(&s, tiles.iter().map(|t| t.view())).unwrap();
        assert_eq!(out.proof.unwrap().z, want.z);
    }

    #[test]
    fn verify_rejects_tampering() {
        for mode in MODES {
            let p = params(8, 2, 17, SchemeId::LowRank(2), 0, mode);
            let (s, a, b) = instance("proto-tamper", &p);
            let proof = solve(&s, &a, &b, &p).unwrap().proof.unwrap();

            let mut bad = proof.clone();
            bad.a.set(3, 5, (bad.a.get(3, 5) + 1) % 17);
            assert!(!verify(&s, &bad, &p).unwrap());

            let mut bad = proof.clone();
            bad.b.set(0, 0, (bad.b.get(0, 0) + 1) % 17);
            assert!(!verify(&s, &bad, &p).unwrap());

            let mut bad = proof.clone();
            bad.z.0[31] ^= 1;
            assert!(!verify(&s, &bad, &p).unwrap());

            let other = Seed::from_label("other");
            assert!(!verify(&other, &proof, &p).unwrap());

            if mode == TranscriptMode::PerTileLottery {
                let mut bad = proof.clone();
                bad.winning_tile = Some(TileIndex::new(0, 0, 1));
                assert!(!verify(&s, &bad, &p).unwrap());
                bad.winning_tile = Some(TileIndex::new(4, 0, 0));
                assert!(!verify(&s, &bad, &p).unwrap());
                bad.winning_tile = None;
                assert!(matches!(verify(&s, &bad, &p), Err(Error::Parse(_))));
            }
        }
    }

    #[test]
    fn verify_rejects_params_mismatch() {
        let p = params(8, 2, 17, SchemeId::LowRank(2), 0, TranscriptMode::FullDigest);
        let (s, a, b) = instance("proto-params", &p);
        let proof = solve(&s, &a, &b, &p).unwrap().proof.unwrap();
        let mut q = p;
        q.r = 4;
        assert!(!verify(&s, &proof, &q).unwrap());
    }

    #[test]
    fn acceptance_rate_matches_difficulty() {
        let p = params(16, 4, (1 << 31) - 1, SchemeId::LowRank(4), 2, TranscriptMode::FullDigest);
        let trials = 400u32;
        let mut wins = 0;
        for k in 0..trials {
            let (s, a, b) = instance(&format!("proto-rate-{k}"), &p);
            let out = solve(&s, &a, &b, &p).unwrap();
            if let Some(proof) = out.proof {
                assert!(verify(&s, &proof, &p).unwrap());
                wins += 1;
            }
        }
        let mean = f64::from(trials) * 0.25;
        let sd = (f64::from(trials) * 0.25 * 0.75).sqrt();
        assert!((f64::from(wins) - mean).abs() <= 4.0 * sd, "{wins}");
    }

    #[test]
    fn success_probability_by_mode() {
        let digest = params(8, 4, 17, SchemeId::LowRank(4), 2, TranscriptMode::FullDigest);
        assert_eq!(digest.success_probability(), 0.25);
        let tiles = params(8, 4, 17, SchemeId::LowRank(4), 2, TranscriptMode::PerTileLottery);
        assert!((tiles.success_probability() - (1.0 - 0.75f64.powi(8))).abs() < 1e-12);
        let sure = params(8, 4, 17, SchemeId::LowRank(4), 0, TranscriptMode::PerTileLottery);
        assert_eq!(sure.success_probability(), 1.0);
        let never = params(8, 4, 17, SchemeId::LowRank(4), 64, TranscriptMode::FullDigest);
        assert!(never.success_probability() < 1e-19);
    }

    #[test]
    fn report_counts() {
        let p = params(16, 4, 17, SchemeId::LowRank(4), 3, TranscriptMode::PerTileLottery);
        let (s, a, b) = instance("proto-report", &p);
        let rep = solve(&s, &a, &b, &p).unwrap().report;
        assert_eq!(rep.mults_matmul, 4096);
        // encode 2 n^2 r, decode 4 n^2 r with B' reused
        assert_eq!(rep.mults_encode_decode, 6 * 16 * 16 * 4);
        assert_eq!(rep.hash_bytes, 64 * (32 + 12 + 4 * 16));
        assert!((rep.alpha - 6.0 * 4.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_instances() {
        let p = params(8, 2, 17, SchemeId::FullNoise, 0, TranscriptMode::FullDigest);
        let s = Seed::default();
        let m = Matrix::zeros(4, 4);
        assert!(matches!(solve(&s, &m, &m, &p), Err(Error::Shape(_))));
        let bad = ProtocolParams {
            r: 3,
            ..p
        };
        assert!(bad.validate().is_err());
        let rot = ProtocolParams {
            scheme: SchemeId::Rotation(2),
            fp: FieldParams::new(2).unwrap(),
            ..p
        };
        assert!(matches!(rot.validate(), Err(Error::Field(_))));
    }
}
