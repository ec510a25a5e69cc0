//! Proof of useful work for matrix multiplication over `Z_q`.
//!
//! A solver multiplies a noise-encoded pair `A' = A + E`, `B' = B + F`
//! with a fixed tiled schedule, hashes intermediate tiles into lottery
//! tickets, and decodes `A B` from `A' B'`. A verifier recomputes the
//! transcript (or the single winning tile) and checks the ticket.

pub mod encoding;
pub mod error;
pub mod linalg;
pub mod mining;
pub mod oracle;
pub mod protocol;
pub mod stats;
pub mod transcript;

pub use encoding::{NoiseSpec, SchemeId};
pub use error::{Error, Result};
pub use linalg::{FieldParams, Matrix, OpCounter};
pub use oracle::{Difficulty, Digest, Seed};
pub use protocol::{solve, verify, OverheadReport, Proof, ProtocolParams, SolveOutcome};
pub use transcript::{TileIndex, TranscriptMode};
