use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pouw_core::linalg::{matrix_from_bytes, matrix_to_bytes};
use pouw_core::mining::{dispersion_index, mine_stream, MiningConfig};
use pouw_core::oracle::expand_matrix;
use pouw_core::protocol::{baseline_solve, baseline_verify, benchmark, read_proof, write_proof, BaselineParams};
use pouw_core::stats::{
    chi2_critical, full_rank_experiment, noise_rank_experiment, theoretical_rank_bound, uniformity_chi2,
};
use pouw_core::{
    solve, verify, Difficulty, Error, FieldParams, Matrix, ProtocolParams, SchemeId, Seed, TranscriptMode,
};

const EXIT_REJECT: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "pouw", version, about = "Proof of useful work for matrix multiplication over Z_q")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a uniformly random n x n matrix.
    Gen(GenArgs),
    /// Multiplies A and B and tries to win the lottery.
    Solve(SolveArgs),
    /// Checks a proof file.
    Verify(VerifyArgs),
    /// Runs a stream of attempts and reports its dispersion.
    Mine(MineArgs),
    /// Reports overhead against a plain multiplication.
    Bench(BenchArgs),
    /// Rank and uniformity experiments.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// The trivial hash-grinding construction.
    Baseline(BaselineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Full,
    Lowrank,
    Rot,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Digest,
    Tiles,
}

impl From<ModeArg> for TranscriptMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Digest => TranscriptMode::FullDigest,
            ModeArg::Tiles => TranscriptMode::PerTileLottery,
        }
    }
}

#[derive(Args, Clone)]
struct SchemeOpts {
    #[arg(long, value_enum, default_value = "lowrank")]
    scheme: SchemeArg,
    /// Transcript tile size.
    #[arg(long, default_value_t = 16)]
    r: usize,
    /// Noise rank for `lowrank` (default: r).
    #[arg(long)]
    rank: Option<u32>,
    /// Signed-permutation block size for `rot`.
    #[arg(long, default_value_t = 1)]
    d: u32,
    /// Difficulty exponent, epsilon = 2^-e.
    #[arg(long, default_value_t = 0)]
    e: u32,
    #[arg(long, value_enum, default_value = "tiles")]
    mode: ModeArg,
}

impl SchemeOpts {
    fn scheme(&self) -> SchemeId {
        match self.scheme {
            SchemeArg::Full => SchemeId::FullNoise,
            SchemeArg::Lowrank => SchemeId::LowRank(self.rank.unwrap_or(self.r as u32)),
            SchemeArg::Rot => SchemeId::Rotation(self.d),
        }
    }

    fn params(&self, n: usize, fp: FieldParams) -> pouw_core::Result<ProtocolParams> {
        ProtocolParams::new(n, self.r, fp, self.scheme(), Difficulty::new(self.e)?, self.mode.into())
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2147483647)]
    q: u64,
    #[arg(long, default_value = "random")]
    seed: String,
    /// Oracle tag, so A and B can come from one seed.
    #[arg(long, default_value = "A")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "random")]
    seed: String,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    opts: SchemeOpts,
    #[arg(long)]
    out_c: PathBuf,
    #[arg(long)]
    out_proof: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    proof: PathBuf,
    /// Rejects proofs for any other seed.
    #[arg(long)]
    seed: Option<String>,
    /// Rejects proofs at any other difficulty.
    #[arg(long)]
    e: Option<u32>,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long, default_value_t = 2000)]
    attempts: u64,
    #[arg(long, default_value_t = 100)]
    window: u64,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 2147483647)]
    q: u64,
    #[arg(long, default_value = "random")]
    seed: String,
    #[command(flatten)]
    opts: SchemeOpts,
    /// Writes the event log here instead of stdout.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 2147483647)]
    q: u64,
    #[arg(long, default_value = "random")]
    seed: String,
    /// Timed runs of each side; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[command(flatten)]
    opts: SchemeOpts,
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Full-rank frequency of uniform n x d matrices.
    Rank {
        #[arg(long, default_value_t = 17)]
        q: u64,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 10000)]
        trials: u64,
        /// Also run the rank-r law for low-rank noise with this r.
        #[arg(long)]
        noise_r: Option<usize>,
        #[arg(long, default_value = "random")]
        seed: String,
    },
    /// Entry histogram of one r x r block of low-rank noise.
    Uniform {
        #[arg(long, default_value_t = 5)]
        q: u64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        r: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        /// Block row of the inspected submatrix.
        #[arg(long, default_value_t = 1)]
        bi: usize,
        /// Block column of the inspected submatrix.
        #[arg(long, default_value_t = 1)]
        bj: usize,
        #[arg(long, default_value = "random")]
        seed: String,
    },
}

#[derive(Args)]
struct BaselineArgs {
    /// Work multiplier: T = round(c * n^3) nonces.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2147483647)]
    q: u64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Skip the multiplication.
    #[arg(long)]
    cheat: bool,
    #[arg(long, default_value = "random")]
    seed: String,
}

fn parse_seed(s: &str) -> pouw_core::Result<Seed> {
    if s == "random" {
        let mut buf = [0u8; 32];
        getrandom::fill(&mut buf).map_err(|e| Error::Io(io::Error::other(e.to_string())))?;
        let seed = Seed(buf);
        eprintln!("seed {seed}");
        return Ok(seed);
    }
    Seed::from_hex(s)
}

fn read_matrix_file(path: &Path) -> pouw_core::Result<(FieldParams, Matrix)> {
    let bytes = fs::read(path)?;
    matrix_from_bytes(&bytes)
}

fn cmd_gen(a: GenArgs) -> pouw_core::Result<u8> {
    let fp = FieldParams::new(a.q)?;
    let seed = parse_seed(&a.seed)?;
    let m = expand_matrix(&seed, a.tag.as_bytes(), a.n, a.n, &fp);
    fs::write(&a.out, matrix_to_bytes(&m, &fp))?;
    Ok(0)
}

fn cmd_solve(a: SolveArgs) -> pouw_core::Result<u8> {
    let seed = parse_seed(&a.seed)?;
    let (fp, ma) = read_matrix_file(&a.a)?;
    let (fpb, mb) = read_matrix_file(&a.b)?;
    if fp != fpb {
        return Err(Error::Field(format!("A is over q = {}, B over q = {}", fp.modulus(), fpb.modulus())));
    }
    let params = a.opts.params(ma.rows(), fp)?;
    let out = solve(&seed, &ma, &mb, &params)?;
    fs::write(&a.out_c, matrix_to_bytes(&out.c, &fp))?;
    let rep = out.report;
    println!(
        "scheme {} n {} r {} e {} alpha {:.4} wall_ms {:.1}",
        params.scheme,
        params.n,
        params.r,
        params.difficulty.epsilon_log2(),
        rep.alpha,
        rep.wall_ns as f64 / 1e6
    );
    match out.proof {
        Some(proof) => {
            fs::write(&a.out_proof, write_proof(&proof)?)?;
            match proof.winning_tile {
                Some(t) => println!("won tile ({}, {}, {}) z {}", t.i, t.j, t.ell, proof.z),
                None => println!("won z {}", proof.z),
            }
            Ok(0)
        }
        None => {
            println!("lost");
            Ok(EXIT_REJECT)
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> pouw_core::Result<u8> {
    let proof = read_proof(&fs::read(&a.proof)?)?;
    let seed = match &a.seed {
        Some(s) => Seed::from_hex(s)?,
        None => proof.seed,
    };
    let mut params = proof.params;
    if let Some(e) = a.e {
        params.difficulty = Difficulty::new(e)?;
    }
    if verify(&seed, &proof, &params)? {
        println!("accept");
        Ok(0)
    } else {
        println!("reject");
        Ok(EXIT_REJECT)
    }
}

fn cmd_mine(a: MineArgs) -> pouw_core::Result<u8> {
    let fp = FieldParams::new(a.q)?;
    let params = a.opts.params(a.n, fp)?;
    let cfg = MiningConfig::new(params, parse_seed(&a.seed)?, a.attempts, a.window)?;
    let log = mine_stream(&cfg)?;
    match &a.log {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path)?);
            log.write_tsv(&mut f)?;
            f.flush()?;
        }
        None => log.write_tsv(&mut io::stdout().lock())?,
    }
    eprintln!(
        "attempts {:>8}  successes {:>8}  rate {:.6}  expected {:.6}",
        log.attempts(),
        log.successes(),
        log.rate(),
        params.success_probability()
    );
    match dispersion_index(log.flags(), a.window) {
        Ok(rep) => eprintln!(
            "windows {:>8}  mean {:>8.3}  variance {:>8.3}  index {:.3}  {:?}",
            rep.counts.len(),
            rep.mean,
            rep.variance,
            rep.index,
            rep.verdict
        ),
        Err(e) => eprintln!("dispersion: {e}"),
    }
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> pouw_core::Result<u8> {
    let fp = FieldParams::new(a.q)?;
    let params = a.opts.params(a.n, fp)?;
    let seed = parse_seed(&a.seed)?;
    let ma = expand_matrix(&seed, b"A", a.n, a.n, &fp);
    let mb = expand_matrix(&seed, b"B", a.n, a.n, &fp);
    let bench = benchmark(&seed, &ma, &mb, &params, a.reps)?;
    let rep = bench.report;
    println!("{:<22}{}", "scheme", params.scheme);
    println!("{:<22}{}", "n", params.n);
    println!("{:<22}{}", "tile r", params.r);
    println!("{:<22}{}", "mults_matmul", rep.mults_matmul);
    println!("{:<22}{}", "mults_encode_decode", rep.mults_encode_decode);
    println!("{:<22}{:.4}", "alpha", rep.alpha);
    println!("{:<22}{}", "hash_bytes", rep.hash_bytes);
    println!("{:<22}{:.1}", "solve_ms", bench.solve_ns as f64 / 1e6);
    println!("{:<22}{:.1}", "naive_ms", bench.naive_ns as f64 / 1e6);
    println!("{:<22}{:.3}", "wall_ratio", bench.wall_ratio());
    Ok(0)
}

fn cmd_stats(s: StatsCmd) -> pouw_core::Result<u8> {
    match s {
        StatsCmd::Rank {
            q,
            n,
            d,
            trials,
            noise_r,
            seed,
        } => {
            let fp = FieldParams::new(q)?;
            let seed = parse_seed(&seed)?;
            let f = full_rank_experiment(&fp, n, d, trials, &seed)?;
            let b = theoretical_rank_bound(q, n, d)?;
            println!("{:<12}{:>6}{:>6}{:>6}{:>10}{:>10}{:>14}{:>14}", "experiment", "q", "n", "d", "trials", "hits", "frequency", "bound");
            println!(
                "{:<12}{:>6}{:>6}{:>6}{:>10}{:>10}{:>14.6}{:>14.6}{}",
                "full-rank",
                q,
                n,
                d,
                trials,
                f.hits,
                f.value(),
                b.value,
                if b.vacuous { "  (vacuous)" } else { "" }
            );
            if let Some(r) = noise_r {
                let f = noise_rank_experiment(&fp, n, r, trials, &seed)?;
                println!("{:<12}{:>6}{:>6}{:>6}{:>10}{:>10}{:>14.6}{:>14}", "noise-rank", q, n, r, trials, f.hits, f.value(), "-");
            }
        }
        StatsCmd::Uniform {
            q,
            n,
            r,
            trials,
            bi,
            bj,
            seed,
        } => {
            let fp = FieldParams::new(q)?;
            let rep = uniformity_chi2(&fp, n, r, trials, (bi, bj), &parse_seed(&seed)?)?;
            let crit = chi2_critical(rep.dof, 0.999);
            println!("{:<8}{:>12}", "value", "count");
            for (v, c) in rep.histogram.iter().enumerate() {
                println!("{v:<8}{c:>12}");
            }
            println!(
                "chi2 {:.3}  dof {}  p {:.4}  critical(0.999) {:.3}  {}",
                rep.statistic,
                rep.dof,
                rep.p_value,
                crit,
                if rep.statistic < crit { "uniform" } else { "non-uniform" }
            );
        }
    }
    Ok(0)
}

fn cmd_baseline(a: BaselineArgs) -> pouw_core::Result<u8> {
    let fp = FieldParams::new(a.q)?;
    let bp = BaselineParams::for_dimension(a.c, a.n)?;
    let root = parse_seed(&a.seed)?;
    let mut accepted = 0u64;
    for t in 0..a.trials {
        let seed = pouw_core::stats::trial_seed(&root, b"baseline-trial", t);
        let ma = expand_matrix(&seed, b"A", a.n, a.n, &fp);
        let mb = expand_matrix(&seed, b"B", a.n, a.n, &fp);
        let out = baseline_solve(&seed, &ma, &mb, &fp, &bp, a.cheat)?;
        if let Some(nonce) = out.proof(&bp) {
            if baseline_verify(&seed, nonce, &bp) {
                accepted += 1;
            }
        }
    }
    let k = bp.target_bits();
    let expect = 1.0 - (1.0 - (-f64::from(k)).exp2()).powf(bp.nonces() as f64);
    println!(
        "mode {}  nonces {}  target_bits {}  trials {}  accepted {}  frequency {:.4}  predicted {:.4}",
        if a.cheat { "cheat" } else { "honest" },
        bp.nonces(),
        k,
        a.trials,
        accepted,
        accepted as f64 / a.trials.max(1) as f64,
        expect
    );
    Ok(0)
}

fn run(cli: Cli) -> pouw_core::Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Range(e.to_string()))?;
    }
    match cli.cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Mine(a) => cmd_mine(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Stats(s) => cmd_stats(s),
        Command::Baseline(a) => cmd_baseline(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
