//! Seeded lost-sales inventory environments.
//!
//! Every environment starts empty (zero on hand, nothing in transit) and is
//! a pure function of its configuration, seed and the action sequence.

mod config;
mod echelon;
mod multi_item;
mod single;

pub use config::{EnvConfig, MultiEchelonConfig};
pub use echelon::{allocate_largest_remainder, EchelonOutcome, EchelonState, MultiEchelonEnv};
pub use multi_item::{MultiItemEnv, MultiItemOutcome};
pub use single::{
    transition, Experience, SingleItemEnv, SingleItemState, StateIndexer, Transition,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for stream `stream` of a run seeded with `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
