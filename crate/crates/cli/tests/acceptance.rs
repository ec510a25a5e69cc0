//! Acceptance criteria 1-10, one PASS/FAIL line each.

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pouw_core::encoding::{MatMulEncoding, UnpredictableEncoding, WorkCounters};
use pouw_core::linalg::{mat_mul_naive, mat_sub, MERSENNE31};
use pouw_core::mining::{dispersion_index, mine_stream, MiningConfig, DISPERSION_BAND};
use pouw_core::oracle::{derive_noise, expand_matrix, ro_hash};
use pouw_core::protocol::{
    baseline_solve, baseline_verify, benchmark, read_proof, write_proof, BaselineParams, PROOF_FIXED_LEN,
};
use pouw_core::stats::{
    chi2_critical, full_rank_experiment, noise_rank_experiment, uniformity_chi2, uniformity_chi2_with,
};
use pouw_core::transcript::{matmul_tiled, TranscriptConfig};
use pouw_core::{
    solve, verify, Difficulty, FieldParams, Matrix, NoiseSpec, ProtocolParams, SchemeId, Seed, TranscriptMode,
};

type Outcome = Result<String, String>;

fn fp(q: u64) -> FieldParams {
    FieldParams::new(q).unwrap()
}

fn m31() -> FieldParams {
    FieldParams::mersenne31()
}

fn instance(seed: &Seed, n: usize, f: &FieldParams) -> (Matrix, Matrix) {
    (expand_matrix(seed, b"A", n, n, f), expand_matrix(seed, b"B", n, n, f))
}

fn params(n: usize, r: usize, f: FieldParams, scheme: SchemeId, e: u32, mode: TranscriptMode) -> ProtocolParams {
    ProtocolParams::new(n, r, f, scheme, Difficulty::new(e).unwrap(), mode).unwrap()
}

fn within(observed: f64, expected: f64, sd: f64) -> bool {
    (observed - expected).abs() <= 4.0 * sd
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let out = f();
    let took = t.elapsed();
    let note = format!("{:.1}s", took.as_secs_f64());
    match (out, limit) {
        (Ok(d), Some(l)) if took > l => Err(format!("{d}; {note} exceeds {}s", l.as_secs())),
        (Ok(d), _) => Ok(format!("{d}; {note}")),
        (Err(d), _) => Err(format!("{d}; {note}")),
    }
}

fn completeness() -> Outcome {
    let schemes = [
        SchemeId::FullNoise,
        SchemeId::LowRank(2),
        SchemeId::LowRank(4),
        SchemeId::LowRank(8),
        SchemeId::Rotation(1),
        SchemeId::Rotation(2),
        SchemeId::Rotation(4),
    ];
    let mut runs = 0;
    let mut failures = Vec::new();
    for scheme in schemes {
        for n in [8, 16, 32] {
            for f in [fp(17), m31()] {
                let enc = MatMulEncoding { scheme, tile: 4, fp: f };
                for k in 0..100 {
                    let s = Seed::from_label(&format!("c1-{scheme}-{n}-{}-{k}", f.modulus()));
                    let (a, b) = instance(&s, n, &f);
                    let mut work = WorkCounters::default();
                    let got = enc
                        .encode(&s, &(a.clone(), b.clone()), &mut work)
                        .and_then(|x| enc.eval(&x, &mut work));
                    runs += 1;
                    if got.ok() != Some(mat_mul_naive(&a, &b, &f).unwrap()) {
                        failures.push(format!("{scheme} n={n} q={} #{k}", f.modulus()));
                    }
                }
            }
        }
    }
    check(failures.is_empty(), format!("{runs} instances, {} failures{}", failures.len(), failures.first().map(|f| format!(", first {f}")).unwrap_or_default()))
}

fn transcript_equivalence() -> Outcome {
    let mut checked = 0;
    for f in [fp(17), m31()] {
        for n in 1..=64usize {
            let s = Seed::from_label(&format!("c2-{n}-{}", f.modulus()));
            let (a, b) = instance(&s, n, &f);
            let want = mat_mul_naive(&a, &b, &f).unwrap();
            for r in (1..=n).filter(|r| n % r == 0) {
                let cfg = TranscriptConfig::new(n, r, TranscriptMode::FullDigest).unwrap();
                let mut calls = 0u64;
                let got = matmul_tiled(&a, &b, &cfg, &f, |_| calls += 1).unwrap();
                if got != want || calls != ((n / r) as u64).pow(3) {
                    return Err(format!("n={n} r={r} q={} differs", f.modulus()));
                }
                checked += 1;
            }
        }
    }
    // tile recurrence at n = 8, r = 2 against block products
    let (n, r) = (8, 2);
    let f = fp(17);
    let (a, b) = instance(&Seed::from_label("c2-recurrence"), n, &f);
    let cfg = TranscriptConfig::new(n, r, TranscriptMode::FullDigest).unwrap();
    let mut tiles = Vec::new();
    matmul_tiled(&a, &b, &cfg, &f, |t| tiles.push(t.to_tile())).unwrap();
    let mut steps = 0;
    for t in &tiles {
        let (i, j, l) = (t.idx.i as usize, t.idx.j as usize, t.idx.ell as usize);
        let prev = if l == 0 {
            Matrix::zeros(r, r)
        } else {
            let p = tiles.iter().find(|p| (p.idx.i, p.idx.j, p.idx.ell) == (t.idx.i, t.idx.j, t.idx.ell - 1));
            Matrix::from_vec(r, r, p.unwrap().values.clone(), &f).unwrap()
        };
        let cur = Matrix::from_vec(r, r, t.values.clone(), &f).unwrap();
        let a_blk = a.row_block(i * r, r).col_block(l * r, r);
        let b_blk = b.row_block(l * r, r).col_block(j * r, r);
        if mat_sub(&cur, &prev, &f).unwrap() != mat_mul_naive(&a_blk, &b_blk, &f).unwrap() {
            return Err(format!("recurrence fails at {:?}", t.idx));
        }
        steps += 1;
    }
    check(steps == 64, format!("{checked} (n, r, q) products exact, {steps} recurrence steps exact"))
}

fn overhead() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let f = m31();
    let s = Seed::from_label("c3-overhead");
    let (a, b) = instance(&s, 1024, &f);
    let p = params(1024, 16, f, SchemeId::LowRank(16), 16, TranscriptMode::PerTileLottery);
    let bench = pool.install(|| benchmark(&s, &a, &b, &p, 3)).map_err(|e| e.to_string())?;
    let (fa, fb) = instance(&s, 128, &f);
    let fparams = params(128, 16, f, SchemeId::FullNoise, 16, TranscriptMode::PerTileLottery);
    let full = solve(&s, &fa, &fb, &fparams).map_err(|e| e.to_string())?.report;
    let alpha = bench.report.alpha;
    let ratio = bench.wall_ratio();
    check(
        alpha <= 0.12 && ratio <= 1.5 && full.alpha >= 2.0,
        format!(
            "lowrank alpha {alpha:.4} (<= 0.12), wall ratio {ratio:.3} = {:.0}ms / {:.0}ms (<= 1.5), full-noise alpha {:.3} (>= 2)",
            bench.solve_ns as f64 / 1e6,
            bench.naive_ns as f64 / 1e6,
            full.alpha
        ),
    )
}

fn calibration() -> Outcome {
    let f = m31();
    let mut notes = Vec::new();
    let mut ok = true;
    for e in [2u32, 6] {
        let p = params(16, 4, f, SchemeId::LowRank(4), e, TranscriptMode::FullDigest);
        let trials = 2000;
        let wins = (0..trials)
            .filter(|k| {
                let s = Seed::from_label(&format!("c4-digest-{e}-{k}"));
                let (a, b) = instance(&s, 16, &f);
                solve(&s, &a, &b, &p).unwrap().proof.is_some()
            })
            .count();
        let pr = (-f64::from(e)).exp2();
        let sd = (f64::from(trials) * pr * (1.0 - pr)).sqrt();
        ok &= within(wins as f64, f64::from(trials) * pr, sd);
        notes.push(format!("e={e}: {wins}/{trials} (expect {:.0} +- {:.0})", f64::from(trials) * pr, 4.0 * sd));
    }
    let p = params(256, 16, f, SchemeId::LowRank(16), 8, TranscriptMode::PerTileLottery);
    let solves = 50;
    let mut winners = 0;
    for k in 0..solves {
        let s = Seed::from_label(&format!("c4-tiles-{k}"));
        let (a, b) = instance(&s, 256, &f);
        let out = solve(&s, &a, &b, &p).unwrap();
        assert_eq!(out.tickets.attempts, 4096);
        winners += out.tickets.len();
    }
    let mean = winners as f64 / f64::from(solves);
    let pr = 1.0 / 256.0;
    let sd = (4096.0 * pr * (1.0 - pr) / f64::from(solves)).sqrt();
    ok &= within(mean, 16.0, sd);
    notes.push(format!("per-tile mean winners {mean:.2} (expect 16 +- {:.2})", 4.0 * sd));
    check(ok, notes.join(", "))
}

fn poisson() -> Outcome {
    let p = params(64, 8, m31(), SchemeId::LowRank(8), 6, TranscriptMode::FullDigest);
    let root = Seed::from_label("poisson-window-dispersion");
    let cfg = MiningConfig::new(p, root, 2000, 100).map_err(|e| e.to_string())?;
    let log = mine_stream(&cfg).map_err(|e| e.to_string())?;
    let rep = dispersion_index(log.flags(), 100).map_err(|e| e.to_string())?;
    let (lo, hi) = DISPERSION_BAND;
    check(
        (lo..=hi).contains(&rep.index),
        format!(
            "{} successes / 2000 (rate {:.4}, 2^-6 = {:.4}), dispersion index {:.3} in [{lo}, {hi}], verdict {:?}",
            log.successes(),
            log.rate(),
            1.0 / 64.0,
            rep.index,
            rep.verdict
        ),
    )
}

fn rank_law() -> Outcome {
    let f = fp(17);
    let full = full_rank_experiment(&f, 8, 5, 10_000, &Seed::from_label("c6-full-rank")).map_err(|e| e.to_string())?;
    let bound = 1.0 - 2.0 / 17f64.powi(4);
    let noise = noise_rank_experiment(&f, 8, 2, 10_000, &Seed::from_label("c6-noise-rank")).map_err(|e| e.to_string())?;
    check(
        full.value() >= 0.9995 && noise.hits >= 9990,
        format!(
            "full rank {}/10000 = {:.5} (>= 0.9995, bound {bound:.6}), rank(E_L E_R) = 2 in {}/10000 (>= 9990)",
            full.hits,
            full.value(),
            noise.hits
        ),
    )
}

fn uniformity() -> Outcome {
    let f = fp(5);
    let s = Seed::from_label("c7-uniform");
    let rep = uniformity_chi2(&f, 16, 4, 2000, (1, 1), &s).map_err(|e| e.to_string())?;
    let stub = uniformity_chi2_with(&f, 16, 4, 2000, (1, 1), &s, |_| Ok(Matrix::zeros(16, 16)))
        .map_err(|e| e.to_string())?;
    let crit = chi2_critical(4, 0.999);
    check(
        rep.statistic < crit && stub.statistic > 100.0,
        format!(
            "chi2 {:.2} over {} entries (< {crit:.2}), zero stub chi2 {:.0} (> 100)",
            rep.statistic, rep.samples, stub.statistic
        ),
    )
}

/// `H_n` by the Sylvester doubling `[[H, H], [H, -H]]`.
fn sylvester(n: usize, f: &FieldParams) -> Matrix {
    let mut h = Matrix::identity(1);
    while h.rows() < n {
        let k = h.rows();
        let mut next = Matrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..k {
                let v = h.get(i, j);
                next.set(i, j, v);
                next.set(i, j + k, v);
                next.set(i + k, j, v);
                next.set(i + k, j + k, f.neg(v));
            }
        }
        h = next;
    }
    h
}

fn rotation() -> Outcome {
    let mut cases = 0;
    for f in [fp(17), m31()] {
        for n in [2usize, 4, 8, 16, 32] {
            let h = sylvester(n, &f);
            for d in (1..=n).filter(|d| n % d == 0) {
                for k in 0..5 {
                    let s = Seed::from_label(&format!("c8-{n}-{d}-{k}"));
                    let z = Matrix::zeros(n, n);
                    let rot = match derive_noise(&s, &z, &z, SchemeId::Rotation(d as u32), &f) {
                        Ok(NoiseSpec::Rotation(rot)) => rot,
                        other => return Err(format!("no rotation for n={n} d={d}: {other:?}")),
                    };
                    let r = mat_mul_naive(&h, &rot.dense_diag(&f), &f).unwrap();
                    if r != rot.dense(&f) {
                        return Err(format!("R != H D at n={n} d={d}"));
                    }
                    let rrt = mat_mul_naive(&r, &r.transpose(), &f).unwrap();
                    if rrt != Matrix::identity(n).scale(n as u32 % f.modulus(), &f) {
                        return Err(format!("R R^T != nI at n={n} d={d} q={}", f.modulus()));
                    }
                    cases += 1;
                }
            }
        }
    }
    // decode exactness, as in criterion 1
    let mut decoded = 0;
    for f in [fp(17), m31()] {
        for d in [1, 2, 4] {
            for n in [8, 16, 32] {
                let enc = MatMulEncoding {
                    scheme: SchemeId::Rotation(d),
                    tile: 4,
                    fp: f,
                };
                for k in 0..100 {
                    let s = Seed::from_label(&format!("c8-decode-{d}-{n}-{}-{k}", f.modulus()));
                    let (a, b) = instance(&s, n, &f);
                    let mut work = WorkCounters::default();
                    let x = enc.encode(&s, &(a.clone(), b.clone()), &mut work).unwrap();
                    if enc.eval(&x, &mut work).unwrap() != mat_mul_naive(&a, &b, &f).unwrap() {
                        return Err(format!("rotation decode fails at d={d} n={n}"));
                    }
                    decoded += 1;
                }
            }
        }
    }
    check(true, format!("R R^T = nI in {cases} cases, {decoded} rotation decodes exact"))
}

/// Bit offsets of every proof field, for a proof with `n` and an optional tile.
fn proof_fields(n: usize, tiles: bool) -> Vec<(&'static str, usize, usize)> {
    let mut fields = vec![
        ("magic", 0, 4),
        ("version", 4, 1),
        ("n", 5, 4),
        ("r", 9, 4),
        ("q", 13, 8),
        ("scheme", 21, 5),
        ("e", 26, 1),
        ("mode", 27, 1),
        ("seed", 28, 32),
        ("z", 60, 32),
    ];
    let mut at = PROOF_FIXED_LEN;
    if tiles {
        fields.push(("tile", at, 12));
        at += 12;
    }
    let puwm = 21 + 4 * n * n;
    fields.push(("A header", at, 21));
    fields.push(("A entries", at + 21, puwm - 21));
    at += puwm;
    fields.push(("B header", at, 21));
    fields.push(("B entries", at + 21, puwm - 21));
    fields
}

fn rejected(bytes: &[u8], seed: &Seed, p: &ProtocolParams) -> bool {
    match read_proof(bytes) {
        Err(_) => true,
        Ok(proof) => !matches!(verify(seed, &proof, p), Ok(true)),
    }
}

fn cli(args: &[&str]) -> std::process::ExitStatus {
    Command::new(env!("CARGO_BIN_EXE_pouw")).args(args).output().unwrap().status
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn tamper() -> Outcome {
    let f = m31();
    let n = 16;
    let mut tampers = 0;
    let mut missed = Vec::new();
    for (mode, label) in [(TranscriptMode::PerTileLottery, "tiles"), (TranscriptMode::FullDigest, "digest")] {
        let e = if mode == TranscriptMode::FullDigest { 1 } else { 4 };
        let p = params(n, 4, f, SchemeId::LowRank(4), e, mode);
        let (seed, proof) = (0..)
            .find_map(|k| {
                let s = Seed::from_label(&format!("c9-{label}-{k}"));
                let (a, b) = instance(&s, n, &f);
                solve(&s, &a, &b, &p).unwrap().proof.map(|pr| (s, pr))
            })
            .unwrap();
        let bytes = write_proof(&proof).unwrap();
        if rejected(&bytes, &seed, &p) {
            return Err(format!("honest {label} proof rejected"));
        }
        let fields = proof_fields(n, mode == TranscriptMode::PerTileLottery);
        assert_eq!(fields.last().map(|&(_, at, len)| at + len), Some(bytes.len()));
        for t in 0..50u32 {
            let (name, at, len) = fields[t as usize % fields.len()];
            let h = ro_hash(b"c9-bit", &[label.as_bytes(), &t.to_le_bytes()].concat()).0;
            let bit = u64::from_le_bytes(h[..8].try_into().unwrap()) as usize % (8 * len);
            let mut bad = bytes.clone();
            bad[at + bit / 8] ^= 1 << (bit % 8);
            tampers += 1;
            if !rejected(&bad, &seed, &p) {
                missed.push(format!("{label}:{name}:bit{bit}"));
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let seed = "00".repeat(31) + "09";
    let (a, b, c, pf) = (path(dir.path(), "a"), path(dir.path(), "b"), path(dir.path(), "c"), path(dir.path(), "p"));
    let gen_ok = cli(&["gen", "--n", "16", "--seed", &seed, "--tag", "A", "--out", &a]).success()
        && cli(&["gen", "--n", "16", "--seed", &seed, "--tag", "B", "--out", &b]).success();
    let solved = cli(&[
        "solve", "--seed", &seed, "--a", &a, "--b", &b, "--scheme", "lowrank", "--r", "4", "--e", "2", "--mode", "tiles",
        "--out-c", &c, "--out-proof", &pf,
    ]);
    let accepted = cli(&["verify", "--proof", &pf, "--seed", &seed, "--e", "2"]);
    let mut raw = std::fs::read(&pf).unwrap();
    let entry = PROOF_FIXED_LEN + 12 + 21 + 4 * 37;
    raw[entry] ^= 1;
    let flipped = path(dir.path(), "flipped");
    std::fs::write(&flipped, &raw).unwrap();
    let tampered = cli(&["verify", "--proof", &flipped]);
    let cross = gen_ok && solved.code() == Some(0) && accepted.code() == Some(0) && tampered.code() == Some(2);
    check(
        missed.is_empty() && cross,
        format!(
            "{}/{tampers} single-bit tampers rejected {missed:?}; cli solve {:?}, verify {:?}, flipped entry {:?}",
            tampers - missed.len(),
            solved.code(),
            accepted.code(),
            tampered.code()
        ),
    )
}

fn baseline() -> Outcome {
    let f = fp(17);
    let bp = BaselineParams::for_dimension(1.0, 4).unwrap();
    let trials = 2000;
    let rate = |cheat: bool| {
        let wins = (0..trials)
            .filter(|k| {
                let tag = if cheat { "cheat" } else { "honest" };
                let s = Seed::from_label(&format!("c10-{tag}-{k}"));
                let (a, b) = instance(&s, 4, &f);
                let out = baseline_solve(&s, &a, &b, &f, &bp, cheat).unwrap();
                assert_eq!(out.c.is_some(), !cheat);
                out.proof(&bp).is_some_and(|nonce| baseline_verify(&s, nonce, &bp))
            })
            .count();
        wins as f64 / f64::from(trials)
    };
    let (honest, cheat) = (rate(false), rate(true));
    let n = f64::from(trials);
    let sd = (honest * (1.0 - honest) / n + cheat * (1.0 - cheat) / n).sqrt();
    check(
        within(honest - cheat, 0.0, sd),
        format!("honest {honest:.4}, without matmul {cheat:.4}, difference {:.4} (4 sd = {:.4})", honest - cheat, 4.0 * sd),
    )
}

type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

#[test]
fn acceptance() {
    assert_eq!(m31().modulus(), MERSENNE31);
    let criteria: [Criterion; 10] = [
        ("completeness", Some(30), completeness),
        ("transcript equivalence", None, transcript_equivalence),
        ("overhead", Some(300), overhead),
        ("acceptance calibration", None, calibration),
        ("poisson dispersion", Some(120), poisson),
        ("rank law", None, rank_law),
        ("marginal uniformity", None, uniformity),
        ("rotation self-cancellation", None, rotation),
        ("tamper soundness", None, tamper),
        ("baseline attack", None, baseline),
    ];
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stderr());
    for (k, (name, limit, run)) in criteria.into_iter().enumerate() {
        let out = timed(limit.map(Duration::from_secs), run);
        let (verdict, detail) = match &out {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let _ = writeln!(std::io::stderr(), "criterion {:>2} {:<28} {verdict}  {detail}", k + 1, name);
        if out.is_err() {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
