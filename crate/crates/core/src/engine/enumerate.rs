use std::collections::HashMap;

use rayon::prelude::*;

use crate::adversary::{Adversary, Entry, Move, Shape};
use crate::engine::transcript::{Cursor, Setting};
use crate::error::{Error, Result};

/// The decision structure adversaries range over: which `(system, query)`
/// pairs are available after a history, and which responses can follow.
pub trait Branching {
    fn arity(&self) -> usize;
    fn response_count(&self, system: usize) -> usize;
    fn options(&self, history: &[Entry]) -> Vec<(usize, usize)>;
    fn branches(&self, history: &[Entry], system: usize, query: usize) -> Vec<usize>;
}

/// All strategy trees over bare shapes: every query of every system with
/// remaining horizon, every response.
#[derive(Clone, Debug)]
pub struct FreeBranching {
    pub shapes: Vec<Shape>,
}

impl Branching for FreeBranching {
    fn arity(&self) -> usize {
        self.shapes.len()
    }

    fn response_count(&self, system: usize) -> usize {
        self.shapes[system].responses.len()
    }

    fn options(&self, history: &[Entry]) -> Vec<(usize, usize)> {
        let mut used = vec![0; self.shapes.len()];
        for e in history {
            used[e.system] += 1;
        }
        let mut out = Vec::new();
        for (i, s) in self.shapes.iter().enumerate() {
            if used[i] < s.horizon {
                out.extend((0..s.queries.len()).map(|x| (i, x)));
            }
        }
        out
    }

    fn branches(&self, _: &[Entry], system: usize, _: usize) -> Vec<usize> {
        (0..self.response_count(system)).collect()
    }
}

impl Setting<'_> {
    fn replay<'s>(&'s self, history: &[Entry]) -> (Cursor<'s, 's, 2>, [f64; 2]) {
        let mut cursor = Cursor::new([&self.left[..], &self.right[..]]);
        let mut reach = [1.0, 1.0];
        for e in history {
            match cursor.rows(&reach, e.system, e.query) {
                Ok(rows) => {
                    for s in 0..2 {
                        reach[s] = rows[s].map_or(0.0, |r| reach[s] * r[e.response]);
                    }
                }
                Err(_) => reach = [0.0, 0.0],
            }
            cursor.push(e.system, e.query, e.response);
        }
        (cursor, reach)
    }
}

pub(crate) fn admissible_options<const N: usize>(cursor: &Cursor<'_, '_, N>, reach: &[f64; N]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..cursor.arity() {
        for x in 0..cursor.query_count(i) {
            if cursor.admits(reach, i, x) {
                out.push((i, x));
            }
        }
    }
    out
}

/// Strategy trees against concrete systems: only admissible queries, and
/// only responses with positive probability on at least one side.
impl Branching for Setting<'_> {
    fn arity(&self) -> usize {
        self.left.len()
    }

    fn response_count(&self, system: usize) -> usize {
        self.left[system].responses().len()
    }

    fn options(&self, history: &[Entry]) -> Vec<(usize, usize)> {
        let (cursor, reach) = self.replay(history);
        admissible_options(&cursor, &reach)
    }

    fn branches(&self, history: &[Entry], system: usize, query: usize) -> Vec<usize> {
        let (cursor, reach) = self.replay(history);
        let Ok(rows) = cursor.rows(&reach, system, query) else {
            return Vec::new();
        };
        (0..self.response_count(system))
            .filter(|&y| (0..2).any(|s| rows[s].is_some_and(|r| reach[s] * r[y] > 0.0)))
            .collect()
    }
}

/// Number of strategy trees over bare shapes, by the recursion
/// `count(r) = Σ_{i: r_i > 0} |X_i| · count(r - e_i)^{|Y_i|}` on the vector
/// of remaining per-system horizons. Saturates at `u128::MAX`.
pub fn closed_form_count(shapes: &[Shape], rounds: usize) -> u128 {
    fn go(shapes: &[Shape], left: &mut Vec<usize>, rounds: usize, memo: &mut HashMap<(Vec<usize>, usize), u128>) -> u128 {
        if rounds == 0 {
            return 1;
        }
        if let Some(&c) = memo.get(&(left.clone(), rounds)) {
            return c;
        }
        let mut total: u128 = 0;
        for i in 0..shapes.len() {
            if left[i] == 0 {
                continue;
            }
            left[i] -= 1;
            let sub = go(shapes, left, rounds - 1, memo);
            left[i] += 1;
            let per_query = saturating_pow(sub, shapes[i].responses.len());
            total = total.saturating_add(per_query.saturating_mul(shapes[i].queries.len() as u128));
        }
        memo.insert((left.clone(), rounds), total);
        total
    }
    let mut left: Vec<usize> = shapes.iter().map(|s| s.horizon).collect();
    go(shapes, &mut left, rounds, &mut HashMap::new())
}

fn saturating_pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}

/// Number of strategy trees under an arbitrary branching structure. Errors
/// when some reachable history offers no admissible query.
pub fn count_adversaries<B: Branching>(branching: &B, rounds: usize) -> Result<u128> {
    fn go<B: Branching>(b: &B, history: &mut Vec<Entry>, rounds: usize) -> Result<u128> {
        let options = b.options(history);
        if options.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "no admissible query after {} rounds; rounds exceed what the systems accept",
                history.len()
            )));
        }
        if history.len() + 1 == rounds {
            return Ok(options.len() as u128);
        }
        let mut total: u128 = 0;
        for (i, x) in options {
            let mut prod: u128 = 1;
            for y in b.branches(history, i, x) {
                history.push(Entry {
                    system: i,
                    query: x,
                    response: y,
                });
                let c = go(b, history, rounds);
                history.pop();
                prod = prod.saturating_mul(c?);
            }
            total = total.saturating_add(prod);
        }
        Ok(total)
    }
    go(branching, &mut Vec::new(), rounds)
}

/// Lazy, duplicate-free stream of every deterministic adversary.
///
/// Each adversary is identified by its sequence of choices at decision nodes
/// in preorder. The stream advances that sequence like an odometer: bump the
/// last choice that can still grow and complete the remaining nodes with
/// their first option, so the order is lexicographic and deterministic.
pub struct AdversaryEnumeration<B> {
    branching: B,
    rounds: usize,
    count: u128,
    decisions: Vec<usize>,
    radix: Vec<usize>,
    started: bool,
    done: bool,
}

impl<B: Branching> AdversaryEnumeration<B> {
    /// Refuses with [`Error::TooLarge`] when the count exceeds `cap`.
    pub fn new(branching: B, rounds: usize, cap: u128) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidParameter("an adversary makes at least one query".into()));
        }
        let count = count_adversaries(&branching, rounds)?;
        if count > cap {
            return Err(Error::TooLarge { count, cap });
        }
        Ok(AdversaryEnumeration {
            branching,
            rounds,
            count,
            decisions: Vec::new(),
            radix: Vec::new(),
            started: false,
            done: false,
        })
    }

    pub fn total(&self) -> u128 {
        self.count
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    fn build(&mut self, prefix: Vec<usize>) -> Adversary {
        self.decisions.clear();
        self.radix.clear();
        let mut history = Vec::new();
        let root = self.build_move(&prefix, &mut history);
        Adversary::new(self.branching.arity(), self.rounds, root).expect("enumerated tree is well formed")
    }

    fn build_move(&mut self, prefix: &[usize], history: &mut Vec<Entry>) -> Move {
        let options = self.branching.options(history);
        let choice = prefix.get(self.decisions.len()).copied().unwrap_or(0);
        self.decisions.push(choice);
        self.radix.push(options.len());
        let (system, query) = options[choice];
        let mut replies = vec![None; self.branching.response_count(system)];
        if history.len() + 1 < self.rounds {
            for y in self.branching.branches(history, system, query) {
                history.push(Entry {
                    system,
                    query,
                    response: y,
                });
                replies[y] = Some(self.build_move(prefix, history));
                history.pop();
            }
        }
        Move {
            system,
            query,
            replies,
        }
    }
}

impl<B: Branching> Iterator for AdversaryEnumeration<B> {
    type Item = Adversary;

    fn next(&mut self) -> Option<Adversary> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.build(Vec::new()));
        }
        let pos = (0..self.decisions.len()).rev().find(|&p| self.decisions[p] + 1 < self.radix[p]);
        match pos {
            None => {
                self.done = true;
                None
            }
            Some(p) => {
                let mut prefix = self.decisions[..p].to_vec();
                prefix.push(self.decisions[p] + 1);
                Some(self.build(prefix))
            }
        }
    }
}

/// Convenience constructor over bare shapes.
pub fn enumerate_adversaries(shapes: &[Shape], rounds: usize, cap: u128) -> Result<AdversaryEnumeration<FreeBranching>> {
    if rounds > shapes.iter().map(|s| s.horizon).sum() {
        return Err(Error::InvalidParameter("rounds exceed the combined horizon".into()));
    }
    AdversaryEnumeration::new(
        FreeBranching {
            shapes: shapes.to_vec(),
        },
        rounds,
        cap,
    )
}

/// Scores every enumerated adversary in parallel and keeps the maximum.
/// Ties go to the adversary that comes first in enumeration order.
pub fn max_over_adversaries<B, F>(enumeration: AdversaryEnumeration<B>, score: F) -> Result<Option<(f64, Adversary)>>
where
    B: Branching + Send,
    F: Fn(&Adversary) -> Result<f64> + Sync,
{
    let best = enumeration
        .enumerate()
        .par_bridge()
        .map(|(i, adv)| score(&adv).map(|s| Some((s, i, adv))))
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(a), Some(b)) => {
                        let a_wins = a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) || b.0.is_nan();
                        Some(if a_wins { a } else { b })
                    }
                })
            },
        )?;
    Ok(best.map(|(s, _, adv)| (s, adv)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Space;
    use std::collections::HashSet;

    fn shape(nx: usize, ny: usize, t: usize) -> Shape {
        Shape {
            queries: Space::numbered(nx),
            responses: Space::numbered(ny),
            horizon: t,
        }
    }

    fn all(shapes: &[Shape], rounds: usize) -> Vec<Adversary> {
        enumerate_adversaries(shapes, rounds, u128::MAX).unwrap().collect()
    }

    #[test]
    fn unary_queries_have_a_single_adversary() {
        let s = [shape(1, 2, 2)];
        assert_eq!(all(&s, 2).len(), 1);
        assert_eq!(closed_form_count(&s, 2), 1);
    }

    #[test]
    fn binary_queries_single_response() {
        let s = [shape(2, 1, 2)];
        assert_eq!(all(&s, 2).len(), 4);
        assert_eq!(closed_form_count(&s, 2), 4);
    }

    #[test]
    fn two_systems_match_distinct_tree_count() {
        let s = [shape(2, 2, 1), shape(2, 2, 1)];
        let advs = all(&s, 2);
        let distinct: HashSet<&Adversary> = advs.iter().collect();
        assert_eq!(distinct.len(), advs.len());
        // first move: 4 options; each reply then picks one of the 2 queries
        // of the other system: 4 · 2 · 2 = 16
        assert_eq!(advs.len(), 16);
        assert_eq!(closed_form_count(&s, 2) as usize, advs.len());
        for a in &advs {
            a.validate(&s).unwrap();
        }
    }

    #[test]
    fn cap_is_enforced() {
        let s = [shape(3, 3, 2), shape(3, 3, 1)];
        let err = enumerate_adversaries(&s, 3, 10).err().unwrap();
        assert!(matches!(err, Error::TooLarge { cap: 10, .. }));
    }

    #[test]
    fn order_is_deterministic() {
        let s = [shape(2, 2, 2)];
        assert_eq!(all(&s, 2), all(&s, 2));
    }
}
