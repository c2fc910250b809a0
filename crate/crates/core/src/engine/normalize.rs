use crate::adversary::{Adversary, Entry, Move, Shape, Transcript};
use crate::error::{Error, Result};
use crate::space::{ACK, SKIP};
use crate::system::{InteractiveSystem, Path, SystemPair};

/// Extends a system with a `SKIP` query answered by `ACK` with probability
/// one. Real queries stay admissible while fewer than the original horizon
/// have been asked; the horizon grows by `extra` rounds of padding.
pub fn pad_for_alternation(system: &InteractiveSystem, extra: usize) -> Result<InteractiveSystem> {
    let queries = system.queries().with_reserved(SKIP)?;
    let responses = system.responses().with_reserved(ACK)?;
    let skip = system.queries().len();
    let ack = system.responses().len();
    let nr = responses.len();
    let real_horizon = system.horizon();
    InteractiveSystem::from_fn(queries, responses, real_horizon + extra, |path, x| {
        if x == skip {
            let mut row = vec![0.0; nr];
            row[ack] = 1.0;
            return Some(row);
        }
        let real: Path = path.iter().copied().filter(|&(q, _)| q != skip).collect();
        if real.len() >= real_horizon {
            return None;
        }
        let mut row = system.row(&real, x)?.to_vec();
        row.push(0.0);
        Some(row)
    })
}

/// Pads both members of a pair, leaving room for the other system's rounds.
pub fn pad_pair(pair: &SystemPair, other_horizon: usize) -> Result<SystemPair> {
    SystemPair::new(
        pad_for_alternation(&pair.m0, other_horizon)?,
        pad_for_alternation(&pair.m1, other_horizon)?,
    )
}

/// Rewrites a two-system adversary so that it addresses the systems strictly
/// in turn, starting with system 0. Whenever the original wants the system
/// that is not on turn, a `SKIP` goes to the one that is. Branches that end
/// early are completed with trailing `SKIP` rounds so every transcript has
/// the same length.
///
/// `shapes` are the original (unpadded) shapes; the result targets systems
/// built by [`pad_for_alternation`].
pub fn normalize_alternating(adversary: &Adversary, shapes: &[Shape]) -> Result<Adversary> {
    if adversary.arity() != 2 || shapes.len() != 2 {
        return Err(Error::InvalidParameter("alternation is defined for two systems".into()));
    }
    for s in shapes {
        if s.queries.contains(SKIP) {
            return Err(Error::ReservedLabel(SKIP.into()));
        }
        if s.responses.contains(ACK) {
            return Err(Error::ReservedLabel(ACK.into()));
        }
    }
    adversary.validate(shapes)?;
    let length = padded_length(adversary.root(), 0, 0, 1, adversary.rounds());
    let ctx = Ctx {
        shapes,
        rounds: adversary.rounds(),
        length,
    };
    let root = ctx.convert(Some(adversary.root()), 0, 0, 1);
    Adversary::new(2, length, root)
}

fn padded_length(m: &Move, turn: usize, len: usize, depth: usize, rounds: usize) -> usize {
    let len = if m.system == turn { len + 1 } else { len + 2 };
    let turn = 1 - m.system;
    if depth == rounds {
        return len;
    }
    m.replies
        .iter()
        .flatten()
        .map(|c| padded_length(c, turn, len, depth + 1, rounds))
        .max()
        .unwrap_or(len)
}

struct Ctx<'a> {
    shapes: &'a [Shape],
    rounds: usize,
    length: usize,
}

impl Ctx<'_> {
    fn skip(&self, system: usize, next: Option<Move>) -> Move {
        let s = &self.shapes[system];
        let mut replies = vec![None; s.responses.len() + 1];
        replies[s.responses.len()] = next;
        Move {
            system,
            query: s.queries.len(),
            replies,
        }
    }

    /// `m` is the original move due at original depth `depth` (1-based), or
    /// `None` once the original adversary is done; `len` counts padded
    /// rounds already played.
    fn convert(&self, m: Option<&Move>, turn: usize, len: usize, depth: usize) -> Move {
        let Some(m) = m else {
            let next = (len + 1 < self.length).then(|| self.convert(None, 1 - turn, len + 1, depth));
            return self.skip(turn, next);
        };
        if m.system != turn {
            let real = self.real(m, len + 1, depth);
            return self.skip(turn, Some(real));
        }
        self.real(m, len, depth)
    }

    fn real(&self, m: &Move, len: usize, depth: usize) -> Move {
        let len = len + 1;
        let turn = 1 - m.system;
        let mut replies: Vec<Option<Move>> = m
            .replies
            .iter()
            .map(|child| {
                if len == self.length {
                    None
                } else if depth == self.rounds {
                    Some(self.convert(None, turn, len, depth + 1))
                } else {
                    child.as_ref().map(|c| self.convert(Some(c), turn, len, depth + 1))
                }
            })
            .collect();
        replies.push(None);
        Move {
            system: m.system,
            query: m.query,
            replies,
        }
    }
}

/// Drops the padding entries of a transcript produced against padded systems.
pub fn strip_padding(transcript: &[Entry], shapes: &[Shape]) -> Transcript {
    transcript
        .iter()
        .copied()
        .filter(|e| e.query != shapes[e.system].queries.len())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::transcript::transcript_distribution;
    use crate::space::Space;

    fn sys(bias: f64, t: usize) -> InteractiveSystem {
        InteractiveSystem::from_fn(Space::numbered(2), Space::numbered(2), t, |path, x| {
            let p = 0.5 + bias * (1.0 + path.len() as f64 + x as f64) / 10.0;
            Some(vec![p, 1.0 - p])
        })
        .unwrap()
    }

    #[test]
    fn consecutive_queries_get_one_skip_between() {
        let (a, b) = (sys(0.2, 2), sys(-0.3, 1));
        let shapes = [Shape::of(&a), Shape::of(&b)];
        let leaf = |s| Move {
            system: s,
            query: 0,
            replies: vec![None; 2],
        };
        let mid = Move {
            system: 0,
            query: 1,
            replies: vec![Some(leaf(1)), Some(leaf(1))],
        };
        let adv = Adversary::new(
            2,
            3,
            Move {
                system: 0,
                query: 0,
                replies: vec![Some(mid.clone()), Some(mid)],
            },
        )
        .unwrap();
        let norm = normalize_alternating(&adv, &shapes).unwrap();
        // 0, SKIP→1, 0, 1
        assert_eq!(norm.rounds(), 4);
        let (pa, pb) = (pad_for_alternation(&a, 1).unwrap(), pad_for_alternation(&b, 2).unwrap());
        let before = transcript_distribution(&adv, &[&a, &b]).unwrap();
        let after = transcript_distribution(&norm, &[&pa, &pb]).unwrap();
        assert_eq!(before.len(), after.len());
        for (t, p) in after.iter() {
            assert_eq!(t[1].system, 1);
            assert_eq!(t[1].query, 2);
            assert!((before.get(&strip_padding(t, &shapes)) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn reserved_labels_are_rejected() {
        let s = InteractiveSystem::stateless(Space::new(["SKIP"]).unwrap(), Space::numbered(2), 1, vec![vec![0.5, 0.5]])
            .unwrap();
        assert!(matches!(pad_for_alternation(&s, 1), Err(Error::ReservedLabel(_))));
    }
}
