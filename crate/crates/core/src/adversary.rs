//! Deterministic adversaries and transcripts.
//!
//! Randomized adversaries are never reified: every divergence in this crate
//! is maximized by a deterministic strategy. The hockey-stick divergence is
//! linear in a mixture of strategies, and `Σ P^α Q^{1-α}` is jointly convex
//! for `α > 1`, so the supremum over mixtures is attained at a vertex.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Space;

/// One round of a concurrent interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub system: usize,
    pub query: usize,
    pub response: usize,
}

/// An ordered record of `(system, query, response)` triples.
pub type Transcript = Vec<Entry>;

/// Query and response alphabets plus horizon of one addressed system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub queries: Space,
    pub responses: Space,
    pub horizon: usize,
}

impl Shape {
    pub fn of(system: &crate::InteractiveSystem) -> Self {
        Shape {
            queries: system.queries().clone(),
            responses: system.responses().clone(),
            horizon: system.horizon(),
        }
    }
}

/// A decision node of a strategy tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub system: usize,
    pub query: usize,
    /// Continuation per response of the addressed system. `None` once the
    /// adversary has used all its rounds, or for branches it never reaches.
    pub replies: Vec<Option<Move>>,
}

/// A deterministic adversary: a strategy tree over transcript histories.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Adversary {
    arity: usize,
    rounds: usize,
    root: Move,
}

impl Adversary {
    pub fn new(arity: usize, rounds: usize, root: Move) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidParameter("an adversary makes at least one query".into()));
        }
        let adv = Adversary { arity, rounds, root };
        adv.check_depth(&adv.root, 1)?;
        Ok(adv)
    }

    fn check_depth(&self, m: &Move, depth: usize) -> Result<()> {
        if m.system >= self.arity {
            return Err(Error::InvalidParameter(format!(
                "move addresses system {} of {}",
                m.system, self.arity
            )));
        }
        for r in m.replies.iter().flatten() {
            if depth >= self.rounds {
                return Err(Error::InvalidParameter("strategy deeper than its round count".into()));
            }
            self.check_depth(r, depth + 1)?;
        }
        Ok(())
    }

    /// Number of systems addressed.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Total number of rounds played.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn root(&self) -> &Move {
        &self.root
    }

    /// The next `(system, query)` after `history`, or `None` when the
    /// history is complete or outside the strategy tree.
    pub fn next(&self, history: &[Entry]) -> Option<(usize, usize)> {
        if history.len() >= self.rounds {
            return None;
        }
        let mut node = &self.root;
        for e in history {
            if e.system != node.system || e.query != node.query {
                return None;
            }
            node = node.replies.get(e.response)?.as_ref()?;
        }
        Some((node.system, node.query))
    }

    /// Checks indices and labels against the addressed systems.
    pub fn validate(&self, shapes: &[Shape]) -> Result<()> {
        if shapes.len() != self.arity {
            return Err(Error::Mismatch(format!(
                "adversary addresses {} systems, {} given",
                self.arity,
                shapes.len()
            )));
        }
        fn walk(m: &Move, shapes: &[Shape]) -> Result<()> {
            let s = &shapes[m.system];
            if m.query >= s.queries.len() {
                return Err(Error::Mismatch(format!("query {} out of range for system {}", m.query, m.system)));
            }
            if m.replies.len() != s.responses.len() {
                return Err(Error::Mismatch(format!(
                    "move on system {} has {} replies for {} responses",
                    m.system,
                    m.replies.len(),
                    s.responses.len()
                )));
            }
            m.replies.iter().flatten().try_for_each(|r| walk(r, shapes))
        }
        walk(&self.root, shapes)
    }

    /// Visits every decision node with the history leading to it.
    pub fn for_each_move(&self, mut f: impl FnMut(&[Entry], &Move)) {
        fn walk(m: &Move, history: &mut Transcript, f: &mut impl FnMut(&[Entry], &Move)) {
            f(history, m);
            for (y, r) in m.replies.iter().enumerate() {
                if let Some(r) = r {
                    history.push(Entry {
                        system: m.system,
                        query: m.query,
                        response: y,
                    });
                    walk(r, history, f);
                    history.pop();
                }
            }
        }
        walk(&self.root, &mut Vec::new(), &mut f);
    }
}

/// Renders a transcript with the labels of the addressed systems.
pub fn render_transcript(shapes: &[Shape], transcript: &[Entry]) -> String {
    if transcript.is_empty() {
        return String::from("∅");
    }
    transcript
        .iter()
        .map(|e| {
            let s = &shapes[e.system];
            format!("[{}] {}→{}", e.system, s.queries.label(e.query), s.responses.label(e.response))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn walk(m: &Move, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            writeln!(f, "{:indent$}ask system {} query #{}", "", m.system, m.query, indent = depth * 2)?;
            for (y, r) in m.replies.iter().enumerate() {
                if let Some(r) = r {
                    writeln!(f, "{:indent$}on #{y}:", "", indent = depth * 2 + 1)?;
                    walk(r, depth + 1, f)?;
                }
            }
            Ok(())
        }
        walk(&self.root, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(system: usize, query: usize, n: usize) -> Move {
        Move {
            system,
            query,
            replies: vec![None; n],
        }
    }

    #[test]
    fn next_follows_the_tree() {
        let root = Move {
            system: 0,
            query: 1,
            replies: vec![Some(leaf(1, 0, 2)), Some(leaf(0, 0, 2))],
        };
        let adv = Adversary::new(2, 2, root).unwrap();
        assert_eq!(adv.next(&[]), Some((0, 1)));
        let h = [Entry {
            system: 0,
            query: 1,
            response: 1,
        }];
        assert_eq!(adv.next(&h), Some((0, 0)));
        let off = [Entry {
            system: 1,
            query: 1,
            response: 1,
        }];
        assert_eq!(adv.next(&off), None);
    }

    #[test]
    fn rejects_trees_deeper_than_rounds() {
        let root = Move {
            system: 0,
            query: 0,
            replies: vec![Some(leaf(0, 0, 1))],
        };
        assert!(Adversary::new(1, 1, root).is_err());
    }
}
