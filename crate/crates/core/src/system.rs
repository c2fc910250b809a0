//! Finite-horizon interactive systems.
//!
//! A system is described by its conditional response kernels: for every
//! partial history `(x_1, y_1, ..., x_t, y_t)` with `t < horizon` and every
//! next query `x`, a probability vector over the response space. Kernels are
//! stored sparsely: only histories reachable with positive probability carry
//! a node.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Space;
use crate::VALIDITY_TOL;

/// One interaction step as seen by a single system: `(query, response)`.
pub type Step = (usize, usize);

/// A partial history of a single system.
pub type Path = Vec<Step>;

/// Kernel rows at one history, indexed by query. `None` marks a query the
/// system does not accept at this history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub rows: Vec<Option<Vec<f64>>>,
}

impl Node {
    pub fn row(&self, query: usize) -> Option<&[f64]> {
        self.rows.get(query).and_then(|r| r.as_deref())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractiveSystem {
    queries: Space,
    responses: Space,
    horizon: usize,
    nodes: HashMap<Path, Node>,
}

impl InteractiveSystem {
    /// Builds a system from explicit nodes. Shapes are checked; probabilities
    /// are not (see [`InteractiveSystem::validate`]).
    pub fn from_nodes(
        queries: Space,
        responses: Space,
        horizon: usize,
        nodes: HashMap<Path, Node>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        for (path, node) in &nodes {
            if path.len() >= horizon {
                return Err(Error::InvalidSystem(format!(
                    "node at depth {} exceeds horizon {horizon}",
                    path.len()
                )));
            }
            if node.rows.len() != queries.len() {
                return Err(Error::InvalidSystem(format!(
                    "node has {} rows for {} queries",
                    node.rows.len(),
                    queries.len()
                )));
            }
            for row in node.rows.iter().flatten() {
                if row.len() != responses.len() {
                    return Err(Error::InvalidSystem(format!(
                        "row has {} entries for {} responses",
                        row.len(),
                        responses.len()
                    )));
                }
            }
            if path
                .iter()
                .any(|&(x, y)| x >= queries.len() || y >= responses.len())
            {
                return Err(Error::InvalidSystem("history references unknown label".into()));
            }
        }
        Ok(InteractiveSystem {
            queries,
            responses,
            horizon,
            nodes,
        })
    }

    /// Materializes a system from a kernel function, visiting every history
    /// reachable with positive probability.
    pub fn from_fn<F>(queries: Space, responses: Space, horizon: usize, mut kernel: F) -> Result<Self>
    where
        F: FnMut(&[Step], usize) -> Option<Vec<f64>>,
    {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let mut nodes = HashMap::new();
        let mut path = Vec::new();
        let shape = (queries.len(), responses.len());
        materialize(&mut kernel, shape, horizon, &mut path, &mut nodes)?;
        Ok(InteractiveSystem {
            queries,
            responses,
            horizon,
            nodes,
        })
    }

    /// A system answering every query with the same distribution, independent
    /// of history.
    pub fn stateless(queries: Space, responses: Space, horizon: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != queries.len() {
            return Err(Error::InvalidSystem("one row per query required".into()));
        }
        Self::from_fn(queries, responses, horizon, |_, x| Some(rows[x].clone()))
    }

    pub fn queries(&self) -> &Space {
        &self.queries
    }

    pub fn responses(&self) -> &Space {
        &self.responses
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node(&self, path: &[Step]) -> Option<&Node> {
        self.nodes.get(path)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&Path, &Node)> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn row(&self, path: &[Step], query: usize) -> Option<&[f64]> {
        self.nodes.get(path).and_then(|n| n.row(query))
    }

    /// Whether `query` is accepted after `path`.
    pub fn admits(&self, path: &[Step], query: usize) -> bool {
        path.len() < self.horizon && self.row(path, query).is_some()
    }

    /// `∏_i Pr[M(h_{<i}, x_i) = y_i]`: the probability of answering `path`
    /// given its query sequence. Zero once any prefix has zero probability.
    pub fn path_probability(&self, path: &[Step]) -> f64 {
        let mut p = 1.0;
        for (t, &(x, y)) in path.iter().enumerate() {
            match self.row(&path[..t], x) {
                Some(row) => p *= row[y],
                None => return 0.0,
            }
            if p == 0.0 {
                return 0.0;
            }
        }
        p
    }

    /// The system after it has already answered `prefix`, with the remaining
    /// horizon.
    pub fn conditioned(&self, prefix: &[Step]) -> Result<Self> {
        if prefix.len() >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "prefix of length {} leaves no rounds (horizon {})",
                prefix.len(),
                self.horizon
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .filter(|(p, _)| p.starts_with(prefix))
            .map(|(p, n)| (p[prefix.len()..].to_vec(), n.clone()))
            .collect();
        Ok(InteractiveSystem {
            queries: self.queries.clone(),
            responses: self.responses.clone(),
            horizon: self.horizon - prefix.len(),
            nodes,
        })
    }

    pub fn render_path(&self, path: &[Step]) -> String {
        render_path(&self.queries, &self.responses, path)
    }

    /// Checks every stored row and every reachable history.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut keys: Vec<&Path> = self.nodes.keys().collect();
        keys.sort();
        for path in keys {
            let node = &self.nodes[path];
            if node.rows.iter().all(Option::is_none) {
                issues.push(Issue {
                    history: self.render_path(path),
                    query: None,
                    kind: IssueKind::NoAdmissibleQuery,
                });
            }
            for (x, row) in node.rows.iter().enumerate() {
                let Some(row) = row else { continue };
                check_row(row, 1.0, false, |kind| {
                    issues.push(Issue {
                        history: self.render_path(path),
                        query: Some(self.queries.label(x).to_string()),
                        kind,
                    })
                });
                if path.len() + 1 < self.horizon {
                    for (y, &p) in row.iter().enumerate() {
                        let mut child = path.clone();
                        child.push((x, y));
                        if p > 0.0 && !self.nodes.contains_key(&child) {
                            issues.push(Issue {
                                history: self.render_path(&child),
                                query: None,
                                kind: IssueKind::MissingNode,
                            });
                        }
                    }
                }
            }
        }
        if !self.nodes.contains_key(&Vec::new()) {
            issues.push(Issue {
                history: String::from("∅"),
                query: None,
                kind: IssueKind::MissingNode,
            });
        }
        ValidationReport { issues }
    }
}

fn materialize<F>(
    kernel: &mut F,
    shape: (usize, usize),
    horizon: usize,
    path: &mut Path,
    nodes: &mut HashMap<Path, Node>,
) -> Result<()>
where
    F: FnMut(&[Step], usize) -> Option<Vec<f64>>,
{
    let (nq, nr) = shape;
    let rows: Vec<Option<Vec<f64>>> = (0..nq).map(|x| kernel(path, x)).collect();
    for row in rows.iter().flatten() {
        if row.len() != nr {
            return Err(Error::InvalidSystem(format!(
                "kernel returned {} entries for {nr} responses",
                row.len()
            )));
        }
    }
    if path.len() + 1 < horizon {
        for (x, row) in rows.iter().enumerate() {
            let Some(row) = row else { continue };
            for (y, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    path.push((x, y));
                    materialize(kernel, shape, horizon, path, nodes)?;
                    path.pop();
                }
            }
        }
    }
    nodes.insert(path.clone(), Node { rows });
    Ok(())
}

fn check_row(row: &[f64], target: f64, at_most: bool, mut report: impl FnMut(IssueKind)) {
    let mut sum = 0.0;
    for (y, &p) in row.iter().enumerate() {
        if !p.is_finite() {
            report(IssueKind::NonFinite { response: y });
        } else if p < 0.0 {
            report(IssueKind::NegativeEntry { response: y, value: p });
        }
        sum += p;
    }
    let bad = if at_most {
        sum > target + VALIDITY_TOL
    } else {
        (sum - target).abs() > VALIDITY_TOL
    };
    if bad && sum.is_finite() {
        report(IssueKind::BadSum { sum });
    }
}

pub(crate) fn render_path(queries: &Space, responses: &Space, path: &[Step]) -> String {
    if path.is_empty() {
        return String::from("∅");
    }
    path.iter()
        .map(|&(x, y)| format!("({}→{})", queries.label(x), responses.label(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub history: String,
    pub query: Option<String>,
    pub kind: IssueKind,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.query {
            Some(q) => write!(f, "at {} query {q}: {:?}", self.history, self.kind),
            None => write!(f, "at {}: {:?}", self.history, self.kind),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IssueKind {
    NegativeEntry { response: usize, value: f64 },
    NonFinite { response: usize },
    BadSum { sum: f64 },
    MissingNode,
    NoAdmissibleQuery,
}

/// The two systems under comparison (neighboring inputs `b = 0, 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemPair {
    pub m0: InteractiveSystem,
    pub m1: InteractiveSystem,
}

impl SystemPair {
    pub fn new(m0: InteractiveSystem, m1: InteractiveSystem) -> Result<Self> {
        if m0.queries != m1.queries || m0.responses != m1.responses {
            return Err(Error::Mismatch("pair members must share query and response spaces".into()));
        }
        if m0.horizon != m1.horizon {
            return Err(Error::Mismatch(format!(
                "horizons differ: {} vs {}",
                m0.horizon, m1.horizon
            )));
        }
        Ok(SystemPair { m0, m1 })
    }

    pub fn get(&self, b: usize) -> &InteractiveSystem {
        if b == 0 {
            &self.m0
        } else {
            &self.m1
        }
    }

    pub fn flipped(&self) -> SystemPair {
        SystemPair {
            m0: self.m1.clone(),
            m1: self.m0.clone(),
        }
    }

    pub fn queries(&self) -> &Space {
        &self.m0.queries
    }

    pub fn responses(&self) -> &Space {
        &self.m0.responses
    }

    pub fn horizon(&self) -> usize {
        self.m0.horizon
    }

    /// Concurrent composition of the two members of several pairs.
    pub fn compose(pairs: &[SystemPair]) -> Result<SystemPair> {
        let left: Vec<&InteractiveSystem> = pairs.iter().map(|p| &p.m0).collect();
        let right: Vec<&InteractiveSystem> = pairs.iter().map(|p| &p.m1).collect();
        SystemPair::new(compose(&left)?, compose(&right)?)
    }
}

/// A system whose rows may sum to less than one.
///
/// Used for the seeded error systems before their mass gaps are closed.
#[derive(Clone, Debug, PartialEq)]
pub struct SubMeasureSystem {
    inner: InteractiveSystem,
}

impl SubMeasureSystem {
    pub fn new(inner: InteractiveSystem) -> Self {
        SubMeasureSystem { inner }
    }

    pub fn kernels(&self) -> &InteractiveSystem {
        &self.inner
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let sys = &self.inner;
        let mut keys: Vec<&Path> = sys.nodes.keys().collect();
        keys.sort();
        for path in keys {
            for (x, row) in sys.nodes[path].rows.iter().enumerate() {
                let Some(row) = row else { continue };
                check_row(row, 1.0, true, |kind| {
                    issues.push(Issue {
                        history: sys.render_path(path),
                        query: Some(sys.queries.label(x).to_string()),
                        kind,
                    })
                });
            }
        }
        ValidationReport { issues }
    }

    /// Largest total mass any deterministic query strategy can collect.
    pub fn total_mass(&self) -> f64 {
        fn mass(sys: &InteractiveSystem, path: &mut Path) -> f64 {
            let Some(node) = sys.node(path) else {
                return 0.0;
            };
            let mut best: f64 = 0.0;
            for (x, row) in node.rows.iter().enumerate() {
                let Some(row) = row else { continue };
                let mut total = 0.0;
                for (y, &p) in row.iter().enumerate() {
                    if p <= 0.0 {
                        continue;
                    }
                    let rest = if path.len() + 1 < sys.horizon {
                        path.push((x, y));
                        let m = mass(sys, path);
                        path.pop();
                        m
                    } else {
                        1.0
                    };
                    total += p * rest;
                }
                best = best.max(total);
            }
            best
        }
        mass(&self.inner, &mut Vec::new())
    }
}

/// Concurrent composition `COMP(M_1, ..., M_k)`.
///
/// The composed query space is `[k] × X_i` with labels `"i:x"`; the response
/// space is the ordered union of the members' response labels. Query `(i, x)`
/// is routed to system `i` together with system `i`'s own sub-history, and is
/// inadmissible once system `i` has used its horizon.
pub fn compose(systems: &[&InteractiveSystem]) -> Result<InteractiveSystem> {
    if systems.is_empty() {
        return Err(Error::InvalidParameter("compose needs at least one system".into()));
    }
    let mut labels = Vec::new();
    let mut owner = Vec::new();
    for (i, s) in systems.iter().enumerate() {
        for (x, l) in s.queries.labels().iter().enumerate() {
            labels.push(format!("{i}:{l}"));
            owner.push((i, x));
        }
    }
    let queries = Space::new(labels)?;
    let responses = Space::union(systems.iter().map(|s| &s.responses));
    // local response index -> union index, per system
    let lift: Vec<Vec<usize>> = systems
        .iter()
        .map(|s| {
            s.responses
                .labels()
                .iter()
                .map(|l| responses.index_of(l).expect("label in union"))
                .collect()
        })
        .collect();
    let lower: Vec<HashMap<usize, usize>> = lift
        .iter()
        .map(|m| m.iter().enumerate().map(|(local, &u)| (u, local)).collect())
        .collect();
    let horizon = systems.iter().map(|s| s.horizon).sum();
    let nr = responses.len();
    InteractiveSystem::from_fn(queries, responses, horizon, |path, q| {
        let (i, x) = owner[q];
        let sub: Path = path
            .iter()
            .filter(|(pq, _)| owner[*pq].0 == i)
            .map(|&(pq, y)| (owner[pq].1, lower[i][&y]))
            .collect();
        if sub.len() >= systems[i].horizon {
            return None;
        }
        let row = systems[i].row(&sub, x)?;
        let mut out = vec![0.0; nr];
        for (local, &p) in row.iter().enumerate() {
            out[lift[i][local]] = p;
        }
        Some(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rr(eps: f64, b: usize) -> InteractiveSystem {
        let p = eps.exp() / (1.0 + eps.exp());
        let row = if b == 0 { vec![p, 1.0 - p] } else { vec![1.0 - p, p] };
        InteractiveSystem::stateless(Space::new(["q"]).unwrap(), Space::numbered(2), 1, vec![row]).unwrap()
    }

    #[test]
    fn randomized_response_is_valid() {
        assert!(rr(1.0, 0).validate().is_valid());
    }

    #[test]
    fn bad_row_sum_is_reported_with_its_history() {
        let mut nodes = HashMap::new();
        nodes.insert(
            vec![],
            Node {
                rows: vec![Some(vec![0.5, 0.5])],
            },
        );
        nodes.insert(
            vec![(0, 1)],
            Node {
                rows: vec![Some(vec![0.6, 0.3])],
            },
        );
        nodes.insert(
            vec![(0, 0)],
            Node {
                rows: vec![Some(vec![0.6, 0.4])],
            },
        );
        let sys = InteractiveSystem::from_nodes(Space::new(["q"]).unwrap(), Space::numbered(2), 2, nodes).unwrap();
        let report = sys.validate();
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].history, "(q→1)");
        assert!(matches!(report.issues[0].kind, IssueKind::BadSum { sum } if (sum - 0.9).abs() < 1e-12));
    }

    #[test]
    fn missing_reachable_node_is_reported() {
        let mut nodes = HashMap::new();
        nodes.insert(
            vec![],
            Node {
                rows: vec![Some(vec![0.5, 0.5])],
            },
        );
        nodes.insert(
            vec![(0, 0)],
            Node {
                rows: vec![Some(vec![1.0, 0.0])],
            },
        );
        let sys = InteractiveSystem::from_nodes(Space::new(["q"]).unwrap(), Space::numbered(2), 2, nodes).unwrap();
        let report = sys.validate();
        assert!(report.issues.iter().any(|i| i.kind == IssueKind::MissingNode && i.history == "(q→1)"));
    }

    #[test]
    fn single_system_composition_is_a_relabeling() {
        let m = rr(0.7, 0);
        let c = compose(&[&m]).unwrap();
        assert_eq!(c.queries().labels(), &["0:q"]);
        assert_eq!(c.row(&[], 0), m.row(&[], 0));
        assert!(c.validate().is_valid());
    }

    #[test]
    fn composition_routes_sub_histories_and_exhausts() {
        let a = rr(0.5, 0);
        let b = rr(1.5, 1);
        let c = compose(&[&a, &b]).unwrap();
        assert_eq!(c.horizon(), 2);
        assert!(c.validate().is_valid());
        // after querying system 0 once, only system 1 is admissible
        assert!(c.row(&[(0, 0)], 0).is_none());
        assert_eq!(c.row(&[(0, 0)], 1), b.row(&[], 0));
        let p = c.path_probability(&[(0, 0), (1, 1)]);
        assert!((p - a.row(&[], 0).unwrap()[0] * b.row(&[], 0).unwrap()[1]).abs() < 1e-15);
    }

    #[test]
    fn conditioning_shifts_histories() {
        let sys = InteractiveSystem::from_fn(Space::numbered(2), Space::numbered(2), 3, |path, x| {
            let bias = 0.1 * (path.len() + x) as f64;
            Some(vec![0.5 + bias / 2.0, 0.5 - bias / 2.0])
        })
        .unwrap();
        let c = sys.conditioned(&[(1, 0)]).unwrap();
        assert_eq!(c.horizon(), 2);
        assert_eq!(c.row(&[(0, 1)], 1), sys.row(&[(1, 0), (0, 1)], 1));
        assert!(c.validate().is_valid());
    }

    #[test]
    fn sub_measure_mass_takes_best_query() {
        let sys = InteractiveSystem::stateless(
            Space::numbered(2),
            Space::numbered(2),
            1,
            vec![vec![0.2, 0.3], vec![0.4, 0.4]],
        )
        .unwrap();
        let sub = SubMeasureSystem::new(sys);
        assert!(sub.validate().is_valid());
        assert!((sub.total_mass() - 0.8).abs() < 1e-15);
    }
}
