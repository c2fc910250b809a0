//! Shared inputs for the criterion benches.

use interleave_core::fixtures::{random_pair, FixtureSpec};
use interleave_core::SystemPair;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A seeded random pair with `nx` queries, `ny` responses and horizon `t`.
pub fn pair(seed: u64, nx: usize, ny: usize, t: usize) -> SystemPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pair(&mut rng, &FixtureSpec::new(nx, ny, t)).expect("fixture specs here are valid")
}
