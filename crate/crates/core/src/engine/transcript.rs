use std::collections::BTreeMap;

use crate::adversary::{render_transcript, Adversary, Entry, Move, Shape, Transcript};
use crate::error::{Error, Result};
use crate::system::{InteractiveSystem, Path, SystemPair};

/// Exact law of the transcript `IT(A : M_1, ..., M_k)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TranscriptDistribution {
    support: BTreeMap<Transcript, f64>,
}

impl TranscriptDistribution {
    pub fn from_entries(entries: impl IntoIterator<Item = (Transcript, f64)>) -> Self {
        let mut support = BTreeMap::new();
        for (t, p) in entries {
            *support.entry(t).or_insert(0.0) += p;
        }
        TranscriptDistribution { support }
    }

    pub fn get(&self, transcript: &[Entry]) -> f64 {
        self.support.get(transcript).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Transcript, f64)> {
        self.support.iter().map(|(t, &p)| (t, p))
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.support.values().sum()
    }

    /// `self + weight · other`, pointwise.
    pub fn add_scaled(&mut self, other: &TranscriptDistribution, weight: f64) {
        for (t, p) in other.iter() {
            *self.support.entry(t.clone()).or_insert(0.0) += weight * p;
        }
    }

    /// Largest pointwise absolute difference over the union of supports.
    pub fn max_gap(&self, other: &TranscriptDistribution) -> f64 {
        let mut gap: f64 = 0.0;
        for (t, p) in self.iter() {
            gap = gap.max((p - other.get(t)).abs());
        }
        for (t, q) in other.iter() {
            if !self.support.contains_key(t) {
                gap = gap.max(q.abs());
            }
        }
        gap
    }

    /// Probability pairs `(P(τ), Q(τ))` over the union of both supports.
    pub fn aligned<'a>(&'a self, other: &'a TranscriptDistribution) -> Vec<(&'a Transcript, f64, f64)> {
        let mut out: Vec<(&Transcript, f64, f64)> = self.iter().map(|(t, p)| (t, p, other.get(t))).collect();
        out.extend(
            other
                .iter()
                .filter(|(t, _)| !self.support.contains_key(*t))
                .map(|(t, q)| (t, 0.0, q)),
        );
        out
    }
}

/// Two lists of systems played against the same adversary: the concurrent
/// composition on input 0 (`left`) and on input 1 (`right`).
#[derive(Clone, Debug)]
pub struct Setting<'a> {
    pub left: Vec<&'a InteractiveSystem>,
    pub right: Vec<&'a InteractiveSystem>,
}

impl<'a> Setting<'a> {
    pub fn new(left: Vec<&'a InteractiveSystem>, right: Vec<&'a InteractiveSystem>) -> Result<Self> {
        if left.len() != right.len() || left.is_empty() {
            return Err(Error::Mismatch("both sides need the same, nonzero number of systems".into()));
        }
        for (a, b) in left.iter().zip(&right) {
            if Shape::of(a) != Shape::of(b) {
                return Err(Error::Mismatch("paired systems must share spaces and horizon".into()));
            }
        }
        Ok(Setting { left, right })
    }

    pub fn single(pair: &'a SystemPair) -> Self {
        Setting {
            left: vec![&pair.m0],
            right: vec![&pair.m1],
        }
    }

    pub fn concurrent(pairs: &'a [SystemPair]) -> Self {
        Setting {
            left: pairs.iter().map(|p| &p.m0).collect(),
            right: pairs.iter().map(|p| &p.m1).collect(),
        }
    }

    pub fn flipped(&self) -> Self {
        Setting {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn arity(&self) -> usize {
        self.left.len()
    }

    pub fn shapes(&self) -> Vec<Shape> {
        self.left.iter().map(|s| Shape::of(s)).collect()
    }

    /// Total rounds of the composition.
    pub fn max_rounds(&self) -> usize {
        self.left.iter().map(|s| s.horizon()).sum()
    }
}

/// Incremental bookkeeping for walking a concurrent interaction: one sub-
/// history per addressed system plus the global transcript.
pub(crate) struct Cursor<'s, 'a, const N: usize> {
    sides: [&'s [&'a InteractiveSystem]; N],
    paths: Vec<Path>,
    pub(crate) transcript: Transcript,
}

impl<'s, 'a, const N: usize> Cursor<'s, 'a, N> {
    pub(crate) fn new(sides: [&'s [&'a InteractiveSystem]; N]) -> Self {
        let k = sides[0].len();
        Cursor {
            sides,
            paths: vec![Vec::new(); k],
            transcript: Vec::new(),
        }
    }

    pub(crate) fn arity(&self) -> usize {
        self.paths.len()
    }

    pub(crate) fn response_count(&self, system: usize) -> usize {
        self.sides[0][system].responses().len()
    }

    pub(crate) fn query_count(&self, system: usize) -> usize {
        self.sides[0][system].queries().len()
    }

    /// Whether some side with positive reach accepts `(system, query)` here.
    pub(crate) fn admits(&self, reach: &[f64; N], system: usize, query: usize) -> bool {
        (0..N).any(|s| reach[s] > 0.0 && self.sides[s][system].admits(&self.paths[system], query))
    }

    /// Kernel rows for `(system, query)` on every side that is still reachable.
    pub(crate) fn rows(&self, reach: &[f64; N], system: usize, query: usize) -> Result<[Option<&'a [f64]>; N]> {
        let mut out = [None; N];
        for s in 0..N {
            if reach[s] > 0.0 {
                let sys: &'a InteractiveSystem = self.sides[s][system];
                let path = &self.paths[system];
                if path.len() >= sys.horizon() {
                    return Err(self.exhausted(system));
                }
                out[s] = Some(sys.row(path, query).ok_or_else(|| self.exhausted(system))?);
            }
        }
        Ok(out)
    }

    fn exhausted(&self, system: usize) -> Error {
        let shapes: Vec<Shape> = self.sides[0].iter().map(|s| Shape::of(s)).collect();
        Error::Exhausted {
            system,
            history: render_transcript(&shapes, &self.transcript),
        }
    }

    pub(crate) fn push(&mut self, system: usize, query: usize, response: usize) {
        self.paths[system].push((query, response));
        self.transcript.push(Entry {
            system,
            query,
            response,
        });
    }

    pub(crate) fn pop(&mut self) {
        let e = self.transcript.pop().expect("pop on empty cursor");
        self.paths[e.system].pop();
    }

    pub(crate) fn undefined(&self) -> Error {
        let shapes: Vec<Shape> = self.sides[0].iter().map(|s| Shape::of(s)).collect();
        Error::AdversaryUndefined(render_transcript(&shapes, &self.transcript))
    }
}

/// Depth-first expansion of an adversary against `N` parallel worlds,
/// pruning branches that have probability zero in all of them.
pub(crate) fn walk<const N: usize>(
    adversary: &Adversary,
    sides: [&[&InteractiveSystem]; N],
    visit: &mut dyn FnMut(&[Entry], &[f64; N]),
) -> Result<()> {
    for side in sides {
        if side.len() != adversary.arity() {
            return Err(Error::Mismatch(format!(
                "adversary addresses {} systems, {} given",
                adversary.arity(),
                side.len()
            )));
        }
    }
    let mut cursor = Cursor::new(sides);
    walk_move(adversary.root(), adversary.rounds(), &mut cursor, [1.0; N], visit)
}

fn walk_move<const N: usize>(
    m: &Move,
    rounds: usize,
    cursor: &mut Cursor<'_, '_, N>,
    reach: [f64; N],
    visit: &mut dyn FnMut(&[Entry], &[f64; N]),
) -> Result<()> {
    let rows = cursor.rows(&reach, m.system, m.query)?;
    let n = cursor.response_count(m.system);
    for y in 0..n {
        let mut next = [0.0; N];
        for s in 0..N {
            if let Some(row) = rows[s] {
                next[s] = reach[s] * row[y];
            }
        }
        if next.iter().all(|&p| p == 0.0) {
            continue;
        }
        cursor.push(m.system, m.query, y);
        if cursor.transcript.len() == rounds {
            visit(&cursor.transcript, &next);
        } else {
            let child = match m.replies.get(y).and_then(Option::as_ref) {
                Some(c) => c,
                None => return Err(cursor.undefined()),
            };
            walk_move(child, rounds, cursor, next, visit)?;
        }
        cursor.pop();
    }
    Ok(())
}

/// Exact transcript law of `adversary` against the concurrently running
/// `systems`. With a deterministic adversary each probability is the product
/// of the per-system kernel factors along the sub-histories.
pub fn transcript_distribution(adversary: &Adversary, systems: &[&InteractiveSystem]) -> Result<TranscriptDistribution> {
    let mut support = BTreeMap::new();
    walk(adversary, [systems], &mut |t, p| {
        support.insert(t.to_vec(), p[0]);
    })?;
    Ok(TranscriptDistribution { support })
}

/// Both transcript laws of a setting as aligned probability pairs.
pub fn joint_distribution(adversary: &Adversary, setting: &Setting<'_>) -> Result<Vec<(Transcript, f64, f64)>> {
    let mut out = Vec::new();
    walk(adversary, [&setting.left, &setting.right], &mut |t, p| {
        out.push((t.to_vec(), p[0], p[1]))
    })?;
    Ok(out)
}

/// Like [`joint_distribution`] without materializing transcripts.
pub(crate) fn joint_masses(adversary: &Adversary, setting: &Setting<'_>) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    walk(adversary, [&setting.left, &setting.right], &mut |_, p| out.push((p[0], p[1])))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Space;
    use crate::system::compose;

    fn rr(eps: f64, b: usize) -> InteractiveSystem {
        let p = eps.exp() / (1.0 + eps.exp());
        let row = if b == 0 { vec![p, 1.0 - p] } else { vec![1.0 - p, p] };
        InteractiveSystem::stateless(Space::new(["q"]).unwrap(), Space::numbered(2), 1, vec![row]).unwrap()
    }

    fn ask(system: usize, n: usize, then: Option<Move>) -> Move {
        Move {
            system,
            query: 0,
            replies: vec![then; n],
        }
    }

    #[test]
    fn single_randomized_response_query() {
        let eps: f64 = 1.1;
        let adv = Adversary::new(1, 1, ask(0, 2, None)).unwrap();
        let d = transcript_distribution(&adv, &[&rr(eps, 0)]).unwrap();
        let p = eps.exp() / (1.0 + eps.exp());
        let t0 = vec![Entry {
            system: 0,
            query: 0,
            response: 0,
        }];
        assert!((d.get(&t0) - p).abs() < 1e-15);
        assert!((d.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_independent_systems_multiply() {
        let (a, b) = (rr(0.3, 0), rr(1.2, 1));
        let adv = Adversary::new(2, 2, ask(0, 2, Some(ask(1, 2, None)))).unwrap();
        let d = transcript_distribution(&adv, &[&a, &b]).unwrap();
        assert_eq!(d.len(), 4);
        for (t, p) in d.iter() {
            let expect = a.row(&[], 0).unwrap()[t[0].response] * b.row(&[], 0).unwrap()[t[1].response];
            assert!((p - expect).abs() < 1e-15);
        }
        // same law through the materialized composition
        let c = compose(&[&a, &b]).unwrap();
        let adv_c = Adversary::new(
            1,
            2,
            Move {
                system: 0,
                query: 0,
                replies: vec![
                    Some(Move {
                        system: 0,
                        query: 1,
                        replies: vec![None; 2],
                    });
                    2
                ],
            },
        )
        .unwrap();
        let dc = transcript_distribution(&adv_c, &[&c]).unwrap();
        let lhs: Vec<f64> = d.iter().map(|(_, p)| p).collect();
        let rhs: Vec<f64> = dc.iter().map(|(_, p)| p).collect();
        assert_eq!(lhs.len(), rhs.len());
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-15);
        }
    }

    #[test]
    fn exhausted_system_is_a_hard_error() {
        let a = rr(0.3, 0);
        let adv = Adversary::new(1, 2, ask(0, 2, Some(ask(0, 2, None)))).unwrap();
        let err = transcript_distribution(&adv, &[&a]).unwrap_err();
        assert!(matches!(err, Error::Exhausted { system: 0, .. }), "{err}");
    }
}
