//! Named random substreams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::fnv1a64;

pub const ENV: &str = "env";
pub const INIT: &str = "init";
pub const EPSILON: &str = "epsilon";
pub const SAMPLER: &str = "sampler";
pub const REPLAY: &str = "replay";
pub const EVAL: &str = "eval";

/// ChaCha8 keyed by `root`, on the stream selected by a hash of `name`.
pub fn substream(root: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(fnv1a64(name.as_bytes()));
    rng
}

/// A `u64` seed drawn from the named substream, for APIs that take seeds.
pub fn derive(root: u64, name: &str) -> u64 {
    use rand::RngCore;
    substream(root, name).next_u64()
}
