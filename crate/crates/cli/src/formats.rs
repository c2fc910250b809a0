//! On-disk formats: TOML for systems, pairs, decompositions and adversaries;
//! JSON for budgets and reports.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use interleave_core::decompose::Decomposition;
use interleave_core::system::{Node, Path as History};
use interleave_core::{Adversary, InteractiveSystem, Move, Shape, Space, SystemPair};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// One member of a pair. Either `stateless` rows applied at every history or
/// an explicit list of `nodes`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stateless: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    /// `(query, response)` label pairs leading to this node.
    pub history: Vec<[String; 2]>,
    /// Response distribution per admissible query.
    pub rows: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub format_version: u32,
    pub queries: Vec<String>,
    pub responses: Vec<String>,
    pub horizon: usize,
    pub m0: SystemDoc,
    pub m1: SystemDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionFile {
    pub format_version: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub source: Option<PairFile>,
    pub error: PairFile,
    pub pure: PairFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveDoc {
    pub system: usize,
    pub query: String,
    /// Continuation keyed by the response label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub replies: BTreeMap<String, MoveDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryFile {
    pub format_version: u32,
    pub systems: usize,
    pub rounds: usize,
    pub root: MoveDoc,
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })
}

pub fn check_version(found: u32, path: &Path) -> Result<(), CliError> {
    if found != FORMAT_VERSION {
        return Err(CliError::Parse(format!(
            "{}: unsupported format_version {found} (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

fn index(space: &Space, label: &str, what: &str) -> Result<usize, CliError> {
    space
        .index_of(label)
        .ok_or_else(|| CliError::Parse(format!("unknown {what} label {label:?}")))
}

impl SystemDoc {
    fn build(&self, queries: &Space, responses: &Space, horizon: usize) -> Result<InteractiveSystem, CliError> {
        match (&self.stateless, self.nodes.is_empty()) {
            (Some(rows), true) => {
                let mut ordered = vec![None; queries.len()];
                for (label, row) in rows {
                    ordered[index(queries, label, "query")?] = Some(row.clone());
                }
                let rows = ordered
                    .into_iter()
                    .enumerate()
                    .map(|(x, r)| r.ok_or_else(|| CliError::Parse(format!("stateless rows miss query {:?}", queries.label(x)))))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(InteractiveSystem::stateless(queries.clone(), responses.clone(), horizon, rows)?)
            }
            (None, _) => {
                let mut nodes = HashMap::new();
                for n in &self.nodes {
                    let path = n
                        .history
                        .iter()
                        .map(|[x, y]| Ok((index(queries, x, "query")?, index(responses, y, "response")?)))
                        .collect::<Result<History, CliError>>()?;
                    let mut rows = vec![None; queries.len()];
                    for (label, row) in &n.rows {
                        rows[index(queries, label, "query")?] = Some(row.clone());
                    }
                    if nodes.insert(path, Node { rows }).is_some() {
                        return Err(CliError::Parse("duplicate node history".into()));
                    }
                }
                Ok(InteractiveSystem::from_nodes(queries.clone(), responses.clone(), horizon, nodes)?)
            }
            (Some(_), false) => Err(CliError::Parse("a system has either stateless rows or nodes, not both".into())),
        }
    }

    fn from_system(system: &InteractiveSystem) -> Self {
        let (q, r) = (system.queries(), system.responses());
        let mut nodes: Vec<(&History, &Node)> = system.nodes().collect();
        nodes.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
        SystemDoc {
            stateless: None,
            nodes: nodes
                .into_iter()
                .map(|(path, node)| NodeDoc {
                    history: path
                        .iter()
                        .map(|&(x, y)| [q.label(x).to_string(), r.label(y).to_string()])
                        .collect(),
                    rows: node
                        .rows
                        .iter()
                        .enumerate()
                        .filter_map(|(x, row)| row.as_ref().map(|row| (q.label(x).to_string(), row.clone())))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl PairFile {
    /// Builds and validates the pair.
    pub fn to_pair(&self) -> Result<SystemPair, CliError> {
        let queries = Space::new(self.queries.iter().cloned())?;
        let responses = Space::new(self.responses.iter().cloned())?;
        let m0 = self.m0.build(&queries, &responses, self.horizon)?;
        let m1 = self.m1.build(&queries, &responses, self.horizon)?;
        for (b, m) in [&m0, &m1].into_iter().enumerate() {
            let report = m.validate();
            if !report.is_valid() {
                return Err(CliError::Parse(format!("m{b} is not a valid system: {report}")));
            }
        }
        Ok(SystemPair::new(m0, m1)?)
    }

    pub fn from_pair(pair: &SystemPair) -> Self {
        PairFile {
            format_version: FORMAT_VERSION,
            queries: pair.queries().labels().to_vec(),
            responses: pair.responses().labels().to_vec(),
            horizon: pair.horizon(),
            m0: SystemDoc::from_system(&pair.m0),
            m1: SystemDoc::from_system(&pair.m1),
        }
    }

    pub fn load(path: &Path) -> Result<SystemPair, CliError> {
        let f: PairFile = read_toml(path)?;
        check_version(f.format_version, path)?;
        f.to_pair().map_err(|e| e.in_file(path))
    }
}

impl DecompositionFile {
    pub fn from_decomposition(d: &Decomposition) -> Self {
        DecompositionFile {
            format_version: FORMAT_VERSION,
            epsilon: d.epsilon,
            delta: d.delta,
            source: d.source.as_ref().map(PairFile::from_pair),
            error: PairFile::from_pair(&d.error),
            pure: PairFile::from_pair(&d.pure),
        }
    }

    pub fn load(path: &Path) -> Result<Decomposition, CliError> {
        let f: DecompositionFile = read_toml(path)?;
        check_version(f.format_version, path)?;
        let build = || -> Result<Decomposition, CliError> {
            Ok(Decomposition {
                epsilon: f.epsilon,
                delta: f.delta,
                error: f.error.to_pair()?,
                pure: f.pure.to_pair()?,
                source: f.source.as_ref().map(PairFile::to_pair).transpose()?,
            })
        };
        build().map_err(|e| e.in_file(path))
    }
}

impl MoveDoc {
    fn resolve(&self, shapes: &[Shape]) -> Result<Move, CliError> {
        let shape = shapes
            .get(self.system)
            .ok_or_else(|| CliError::Parse(format!("move addresses system {} of {}", self.system, shapes.len())))?;
        let query = index(&shape.queries, &self.query, "query")?;
        let mut replies = vec![None; shape.responses.len()];
        for (label, m) in &self.replies {
            replies[index(&shape.responses, label, "response")?] = Some(m.resolve(shapes)?);
        }
        Ok(Move {
            system: self.system,
            query,
            replies,
        })
    }

    fn from_move(m: &Move, shapes: &[Shape]) -> Self {
        let s = &shapes[m.system];
        MoveDoc {
            system: m.system,
            query: s.queries.label(m.query).to_string(),
            replies: m
                .replies
                .iter()
                .enumerate()
                .filter_map(|(y, r)| r.as_ref().map(|r| (s.responses.label(y).to_string(), MoveDoc::from_move(r, shapes))))
                .collect(),
        }
    }
}

impl AdversaryFile {
    pub fn resolve(&self, shapes: &[Shape]) -> Result<Adversary, CliError> {
        if self.systems != shapes.len() {
            return Err(CliError::Parse(format!(
                "adversary addresses {} systems, {} supplied",
                self.systems,
                shapes.len()
            )));
        }
        let adv = Adversary::new(self.systems, self.rounds, self.root.resolve(shapes)?)?;
        adv.validate(shapes)?;
        Ok(adv)
    }

    pub fn from_adversary(adv: &Adversary, shapes: &[Shape]) -> Self {
        AdversaryFile {
            format_version: FORMAT_VERSION,
            systems: adv.arity(),
            rounds: adv.rounds(),
            root: MoveDoc::from_move(adv.root(), shapes),
        }
    }

    pub fn load(path: &Path, shapes: &[Shape]) -> Result<Adversary, CliError> {
        let f: AdversaryFile = read_toml(path)?;
        check_version(f.format_version, path)?;
        f.resolve(shapes).map_err(|e| e.in_file(path))
    }
}
