//! Desk-scale separability testing: dense multi-register states, swap,
//! permutation and product tests, the singlet test with its one-way LOCC
//! machinery, k-extensions, reduction circuits and verifier harnesses.

pub mod circuit;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod locc;
mod outcome;
pub mod protocols;
pub mod reductions;
pub mod report;
pub mod separability;
pub mod spectests;
pub mod state;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use error::{CircuitError, Error, Result};
pub use outcome::ProtocolOutcome;
pub use state::{
    fidelity, helstrom, max_entangled, purify, trace_distance, trace_norm, AnyState, BellKind,
    Cut, DensityMatrix, Povm, PureState, RegisterLayout,
};

/// Deterministic generator for stream `stream` of `seed`; restarts and trials use
/// their index as the stream so results do not depend on scheduling.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
