//! Random valid systems for tests, benchmarks, and the `fixtures gen` command.

use rand::Rng;

use crate::adversary::{Adversary, Move, Shape};
use crate::error::Result;
use crate::space::Space;
use crate::system::{InteractiveSystem, SystemPair};

/// Shape and sparsity of sampled systems.
#[derive(Clone, Copy, Debug)]
pub struct FixtureSpec {
    pub queries: usize,
    pub responses: usize,
    pub horizon: usize,
    /// Chance that an entry of a sampled row is zero.
    pub zero_prob: f64,
    /// Weight of the first member's row inside the second member's row;
    /// `1` gives identical members, `0` independent ones.
    pub closeness: f64,
}

impl FixtureSpec {
    pub fn new(queries: usize, responses: usize, horizon: usize) -> Self {
        FixtureSpec {
            queries,
            responses,
            horizon,
            zero_prob: 0.0,
            closeness: 0.5,
        }
    }
}

/// A probability vector of length `n` with i.i.d. uniform weights, some of
/// them zeroed. Never all zero.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, zero_prob: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// A random pair sharing the spec's spaces; rows are drawn per history and
/// query, so the members are fully adaptive.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, spec: &FixtureSpec) -> Result<SystemPair> {
    let queries = Space::numbered(spec.queries);
    let responses = Space::numbered(spec.responses);
    let m0 = InteractiveSystem::from_fn(queries.clone(), responses.clone(), spec.horizon, |_, _| {
        Some(random_distribution(rng, spec.responses, spec.zero_prob))
    })?;
    let m1 = InteractiveSystem::from_fn(queries, responses, spec.horizon, |path, x| {
        let fresh = random_distribution(rng, spec.responses, spec.zero_prob);
        Some(match m0.row(path, x) {
            Some(row) => row
                .iter()
                .zip(&fresh)
                .map(|(a, b)| spec.closeness * a + (1.0 - spec.closeness) * b)
                .collect(),
            None => fresh,
        })
    })?;
    SystemPair::new(m0, m1)
}

/// A uniformly random deterministic adversary over bare shapes.
pub fn random_adversary<R: Rng + ?Sized>(rng: &mut R, shapes: &[Shape], rounds: usize) -> Result<Adversary> {
    fn build<R: Rng + ?Sized>(rng: &mut R, shapes: &[Shape], used: &mut Vec<usize>, depth: usize, rounds: usize) -> Move {
        let open: Vec<usize> = (0..shapes.len()).filter(|&i| used[i] < shapes[i].horizon).collect();
        let system = open[rng.random_range(0..open.len())];
        let query = rng.random_range(0..shapes[system].queries.len());
        used[system] += 1;
        let replies = (0..shapes[system].responses.len())
            .map(|_| (depth + 1 < rounds).then(|| build(rng, shapes, used, depth + 1, rounds)))
            .collect();
        used[system] -= 1;
        Move { system, query, replies }
    }
    let total: usize = shapes.iter().map(|s| s.horizon).sum();
    if rounds == 0 || rounds > total {
        return Err(crate::Error::InvalidParameter(format!("rounds must lie in 1..={total}")));
    }
    let root = build(rng, shapes, &mut vec![0; shapes.len()], 0, rounds);
    Adversary::new(shapes.len(), rounds, root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampled_pairs_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for zero_prob in [0.0, 0.3] {
            let spec = FixtureSpec {
                zero_prob,
                ..FixtureSpec::new(2, 3, 3)
            };
            let pair = random_pair(&mut rng, &spec).unwrap();
            assert!(pair.m0.validate().is_valid(), "{}", pair.m0.validate());
            assert!(pair.m1.validate().is_valid(), "{}", pair.m1.validate());
        }
    }
}
