//! Python bindings: `import pouw`.
//!
//! Matrices cross the boundary as lists of rows of ints, seeds and digests
//! as 64-character hex strings.

use pouw_core::linalg::{mat_mul_naive, Matrix};
use pouw_core::mining::{dispersion_index, mine_stream, MiningConfig};
use pouw_core::protocol::{read_proof, write_proof};
use pouw_core::{Difficulty, FieldParams, ProtocolParams, SchemeId, Seed, TranscriptMode};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn err(e: pouw_core::Error) -> PyErr {
    match e {
        pouw_core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn seed(hex: &str) -> PyResult<Seed> {
    Seed::from_hex(hex).map_err(err)
}

fn matrix(rows: Vec<Vec<u64>>, fp: &FieldParams) -> PyResult<Matrix> {
    Matrix::from_rows(&rows, fp).map_err(err)
}

fn rows(m: &Matrix) -> Vec<Vec<u32>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Protocol parameters for an `n x n` instance.
#[pyclass(name = "Params", module = "pouw", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams(ProtocolParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (n, r, q = 2147483647, scheme = "lowrank", rank = None, d = 1, e = 0, mode = "tiles"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        r: usize,
        q: u64,
        scheme: &str,
        rank: Option<u32>,
        d: u32,
        e: u32,
        mode: &str,
    ) -> PyResult<Self> {
        let scheme = match scheme {
            "full" => SchemeId::FullNoise,
            "lowrank" => SchemeId::LowRank(rank.unwrap_or(r as u32)),
            "rot" => SchemeId::Rotation(d),
            other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
        };
        let mode = match mode {
            "digest" => TranscriptMode::FullDigest,
            "tiles" => TranscriptMode::PerTileLottery,
            other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
        };
        let fp = FieldParams::new(q).map_err(err)?;
        let diff = Difficulty::new(e).map_err(err)?;
        ProtocolParams::new(n, r, fp, scheme, diff, mode).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn r(&self) -> usize {
        self.0.r
    }

    #[getter]
    fn q(&self) -> u32 {
        self.0.fp.modulus()
    }

    #[getter]
    fn e(&self) -> u32 {
        self.0.difficulty.epsilon_log2()
    }

    #[getter]
    fn scheme(&self) -> String {
        self.0.scheme.to_string()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.0.mode {
            TranscriptMode::FullDigest => "digest",
            TranscriptMode::PerTileLottery => "tiles",
        }
    }

    fn success_probability(&self) -> f64 {
        self.0.success_probability()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(n={}, r={}, q={}, scheme='{}', e={}, mode='{}')",
            self.n(),
            self.r(),
            self.q(),
            self.scheme(),
            self.e(),
            self.mode()
        )
    }
}

/// A winning proof `(A, B, z)` with its parameters.
#[pyclass(name = "Proof", module = "pouw", frozen, from_py_object)]
#[derive(Clone)]
struct PyProof(pouw_core::Proof);

#[pymethods]
impl PyProof {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        read_proof(data).map(Self).map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let raw = write_proof(&self.0).map_err(err)?;
        Ok(PyBytes::new(py, &raw))
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams(self.0.params)
    }

    #[getter]
    fn seed(&self) -> String {
        self.0.seed.to_hex()
    }

    #[getter]
    fn z(&self) -> String {
        self.0.z.to_hex()
    }

    /// `(i, j, l)` of the winning tile, or `None` for a digest proof.
    #[getter]
    fn winning_tile(&self) -> Option<(u32, u32, u32)> {
        self.0.winning_tile.map(|t| (t.i, t.j, t.ell))
    }

    #[getter]
    fn a(&self) -> Vec<Vec<u32>> {
        rows(&self.0.a)
    }

    #[getter]
    fn b(&self) -> Vec<Vec<u32>> {
        rows(&self.0.b)
    }

    fn __repr__(&self) -> String {
        format!("Proof(z='{}', winning_tile={:?})", self.z(), self.winning_tile())
    }
}

/// Result of one solve.
#[pyclass(name = "SolveResult", module = "pouw", frozen, get_all)]
struct PySolveResult {
    c: Vec<Vec<u32>>,
    proof: Option<PyProof>,
    mults_matmul: u64,
    mults_encode_decode: u64,
    hash_bytes: u64,
    alpha: f64,
    wall_ns: u64,
}

/// Multiplies `a` and `b` under the protocol; `proof` is set on a win.
#[pyfunction]
fn solve(py: Python<'_>, seed_hex: &str, a: Vec<Vec<u64>>, b: Vec<Vec<u64>>, params: &PyParams) -> PyResult<PySolveResult> {
    let p = params.0;
    let (s, ma, mb) = (seed(seed_hex)?, matrix(a, &p.fp)?, matrix(b, &p.fp)?);
    let out = py.detach(|| pouw_core::solve(&s, &ma, &mb, &p)).map_err(err)?;
    Ok(PySolveResult {
        c: rows(&out.c),
        proof: out.proof.map(PyProof),
        mults_matmul: out.report.mults_matmul,
        mults_encode_decode: out.report.mults_encode_decode,
        hash_bytes: out.report.hash_bytes,
        alpha: out.report.alpha,
        wall_ns: out.report.wall_ns,
    })
}

/// Checks `proof` against `seed_hex` and `params` (default: the proof's own).
#[pyfunction]
#[pyo3(signature = (seed_hex, proof, params = None))]
fn verify(py: Python<'_>, seed_hex: &str, proof: &PyProof, params: Option<&PyParams>) -> PyResult<bool> {
    let s = seed(seed_hex)?;
    let p = params.map_or(proof.0.params, |p| p.0);
    let pr = proof.0.clone();
    py.detach(|| pouw_core::verify(&s, &pr, &p)).map_err(err)
}

/// Oracle-expanded uniform `n x n` matrix.
#[pyfunction]
#[pyo3(signature = (seed_hex, tag, n, q = 2147483647))]
fn expand_matrix(seed_hex: &str, tag: &str, n: usize, q: u64) -> PyResult<Vec<Vec<u32>>> {
    let fp = FieldParams::new(q).map_err(err)?;
    Ok(rows(&pouw_core::oracle::expand_matrix(&seed(seed_hex)?, tag.as_bytes(), n, n, &fp)))
}

/// Plain product over `Z_q`.
#[pyfunction]
#[pyo3(signature = (a, b, q = 2147483647))]
fn matmul(a: Vec<Vec<u64>>, b: Vec<Vec<u64>>, q: u64) -> PyResult<Vec<Vec<u32>>> {
    let fp = FieldParams::new(q).map_err(err)?;
    let c = mat_mul_naive(&matrix(a, &fp)?, &matrix(b, &fp)?, &fp).map_err(err)?;
    Ok(rows(&c))
}

#[pyfunction]
fn seed_from_label(label: &str) -> String {
    Seed::from_label(label).to_hex()
}

/// `SHA-256(len(tag) || tag || payload)`.
#[pyfunction]
fn ro_hash<'py>(py: Python<'py>, tag: &[u8], payload: &[u8]) -> Bound<'py, PyBytes> {
    PyBytes::new(py, &pouw_core::oracle::ro_hash(tag, payload).0)
}

/// Runs `attempts` solves and returns the success flags with the
/// dispersion summary over `window`-sized windows.
#[pyfunction]
#[pyo3(signature = (params, seed_hex, attempts, window))]
fn mine(py: Python<'_>, params: &PyParams, seed_hex: &str, attempts: u64, window: u64) -> PyResult<(Vec<bool>, f64, String)> {
    let cfg = MiningConfig::new(params.0, seed(seed_hex)?, attempts, window).map_err(err)?;
    let log = py.detach(|| mine_stream(&cfg)).map_err(err)?;
    let flags: Vec<bool> = log.flags().collect();
    let rep = dispersion_index(flags.iter().copied(), window).map_err(err)?;
    Ok((flags, rep.index, format!("{:?}", rep.verdict)))
}

#[pymodule]
fn pouw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyProof>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(expand_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(matmul, m)?)?;
    m.add_function(wrap_pyfunction!(seed_from_label, m)?)?;
    m.add_function(wrap_pyfunction!(ro_hash, m)?)?;
    m.add_function(wrap_pyfunction!(mine, m)?)?;
    m.add("MERSENNE31", pouw_core::linalg::MERSENNE31)?;
    Ok(())
}
