//! DSM cases, the case-file format, and the binary adjacency matrix.
//!
//! Matrix convention: `a[i][j] == 1` means node `i` depends on node `j`,
//! i.e. there is a directed edge from `j` to `i`. Rows and columns follow
//! the order of the case's node list.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Length of the identifiers produced by [`anonymize_ids`].
pub const ANON_ID_LEN: usize = 5;

const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

/// Node identifier.
///
/// Case files may use any non-empty label that survives being written into a
/// comma-separated `<order>` list: no commas, no angle brackets, no
/// surrounding whitespace.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(value: impl Into<String>) -> Result<Self, ModelError> {
        let value = value.into();
        if value.is_empty() {
            return Err(ModelError::InvalidId { id: value, reason: "empty" });
        }
        if value.trim() != value {
            return Err(ModelError::InvalidId { id: value, reason: "surrounding whitespace" });
        }
        if value.contains([',', '<', '>']) {
            return Err(ModelError::InvalidId {
                id: value,
                reason: "contains ',', '<' or '>'",
            });
        }
        Ok(NodeId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True for the 5-character alphanumeric form used in prompts.
    pub fn is_anonymized(&self) -> bool {
        self.0.len() == ANON_ID_LEN && self.0.bytes().all(|b| b.is_ascii_alphanumeric())
    }
}

impl TryFrom<String> for NodeId {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> Self {
        id.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(default)]
    pub name: String,
}

/// `dependent` needs the output of `predecessor`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub dependent: NodeId,
    pub predecessor: NodeId,
}

impl Edge {
    pub fn new(dependent: NodeId, predecessor: NodeId) -> Self {
        Edge { dependent, predecessor }
    }
}

/// On-disk layout of a case file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CaseFile {
    #[serde(default)]
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    known_optimum: Option<usize>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// A validated DSM instance. Immutable once constructed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DsmCase {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    description: String,
    known_optimum: Option<usize>,
}

impl DsmCase {
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        description: impl Into<String>,
        known_optimum: Option<usize>,
    ) -> Result<Self, ModelError> {
        if nodes.len() < 2 {
            return Err(ModelError::TooFewNodes(nodes.len()));
        }
        let mut seen = HashSet::with_capacity(nodes.len());
        for (index, node) in nodes.iter().enumerate() {
            if !seen.insert(&node.id) {
                return Err(ModelError::DuplicateNode { index, id: node.id.to_string() });
            }
        }
        let mut pairs = HashSet::with_capacity(edges.len());
        for (index, edge) in edges.iter().enumerate() {
            for endpoint in [&edge.dependent, &edge.predecessor] {
                if !seen.contains(endpoint) {
                    return Err(ModelError::DanglingEndpoint { index, id: endpoint.to_string() });
                }
            }
            if edge.dependent == edge.predecessor {
                return Err(ModelError::SelfLoop { index, id: edge.dependent.to_string() });
            }
            if !pairs.insert(edge) {
                return Err(ModelError::DuplicateEdge {
                    index,
                    dependent: edge.dependent.to_string(),
                    predecessor: edge.predecessor.to_string(),
                });
            }
        }
        if let Some(opt) = known_optimum {
            if opt > edges.len() {
                return Err(ModelError::OptimumOutOfRange { optimum: opt, edges: edges.len() });
            }
        }
        Ok(DsmCase { nodes, edges, description: description.into(), known_optimum })
    }

    /// Convenience constructor for programmatic cases: nodes named after their ids.
    pub fn from_ids(ids: &[&str], edges: &[(&str, &str)]) -> Result<Self, ModelError> {
        let nodes = ids
            .iter()
            .map(|id| Ok(Node { id: NodeId::new(*id)?, name: id.to_string() }))
            .collect::<Result<Vec<_>, ModelError>>()?;
        let edges = edges
            .iter()
            .map(|(dep, pred)| Ok(Edge::new(NodeId::new(*dep)?, NodeId::new(*pred)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        DsmCase::new(nodes, edges, "", None)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: CaseFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        DsmCase::new(file.nodes, file.edges, file.description, file.known_optimum)
    }

    pub fn to_json_string(&self) -> String {
        let file = CaseFile {
            description: self.description.clone(),
            known_optimum: self.known_optimum,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&file).expect("case serializes")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn known_optimum(&self) -> Option<usize> {
        self.known_optimum
    }

    pub fn with_known_optimum(mut self, optimum: Option<usize>) -> Result<Self, ModelError> {
        if let Some(opt) = optimum {
            if opt > self.edges.len() {
                return Err(ModelError::OptimumOutOfRange { optimum: opt, edges: self.edges.len() });
            }
        }
        self.known_optimum = optimum;
        Ok(self)
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().map(|n| &n.id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.iter().any(|n| &n.id == id)
    }
}

/// Load and validate a case file. Errors carry the JSON position or the
/// offending array index.
pub fn load_case(path: impl AsRef<Path>) -> Result<DsmCase, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    DsmCase::from_json_str(&text)
}

/// Dense binary dependency matrix with its id ↔ index mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    cells: Vec<u8>,
    ids: Vec<NodeId>,
    index_of: HashMap<NodeId, usize>,
    /// `(dependent, predecessor)` index pairs, one per 1-entry.
    edges: Vec<(usize, usize)>,
}

impl AdjacencyMatrix {
    /// Build directly from index pairs `(dependent, predecessor)`.
    /// Ids default to `n0`, `n1`, ...
    pub fn from_index_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let ids = (0..n).map(|i| NodeId(format!("n{i}"))).collect();
        Self::from_parts(ids, edges)
    }

    fn from_parts(ids: Vec<NodeId>, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let n = ids.len();
        let mut cells = vec![0u8; n * n];
        let mut list = Vec::with_capacity(edges.len());
        for (index, &(i, j)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(ModelError::DanglingEndpoint { index, id: format!("{i}->{j}") });
            }
            if i == j {
                return Err(ModelError::SelfLoop { index, id: ids[i].to_string() });
            }
            if cells[i * n + j] == 1 {
                return Err(ModelError::DuplicateEdge {
                    index,
                    dependent: ids[i].to_string(),
                    predecessor: ids[j].to_string(),
                });
            }
            cells[i * n + j] = 1;
            list.push((i, j));
        }
        let index_of = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        Ok(AdjacencyMatrix { n, cells, ids, index_of, edges: list })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j] == 1
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    /// `(dependent, predecessor)` index pairs.
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n).map(|i| (0..self.n).filter(|&j| self.get(i, j)).count()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.n).map(|j| (0..self.n).filter(|&i| self.get(i, j)).count()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.n.max(1)).map(<[u8]>::to_vec).collect()
    }

    /// Relabelled copy whose rows/columns follow `perm` (new index `p` holds
    /// old node `perm[p]`). `perm` must be a permutation of `0..n`.
    pub(crate) fn permuted(&self, perm: &[usize]) -> AdjacencyMatrix {
        let mut pos = vec![0; self.n];
        for (p, &old) in perm.iter().enumerate() {
            pos[old] = p;
        }
        let ids = perm.iter().map(|&old| self.ids[old].clone()).collect();
        let edges: Vec<_> = self.edges.iter().map(|&(i, j)| (pos[i], pos[j])).collect();
        Self::from_parts(ids, &edges).expect("permutation preserves validity")
    }
}

/// Build the adjacency matrix of a case, rows/columns in node-list order.
pub fn build_adjacency(case: &DsmCase) -> AdjacencyMatrix {
    let ids: Vec<NodeId> = case.node_ids().cloned().collect();
    let index: HashMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let edges: Vec<(usize, usize)> =
        case.edges().iter().map(|e| (index[&e.dependent], index[&e.predecessor])).collect();
    AdjacencyMatrix::from_parts(ids, &edges).expect("validated case yields a valid matrix")
}

/// Old → new id assignment produced by [`anonymize_ids`], in node-list order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMapping {
    pairs: Vec<(NodeId, NodeId)>,
}

impl IdMapping {
    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn forward(&self, old: &NodeId) -> Option<&NodeId> {
        self.pairs.iter().find(|(o, _)| o == old).map(|(_, n)| n)
    }

    pub fn backward(&self, new: &NodeId) -> Option<&NodeId> {
        self.pairs.iter().find(|(_, n)| n == new).map(|(o, _)| o)
    }

    pub fn inverse(&self) -> IdMapping {
        IdMapping { pairs: self.pairs.iter().map(|(o, n)| (n.clone(), o.clone())).collect() }
    }

    /// Map ids through the table; ids not in the table are passed through.
    pub fn apply(&self, ids: &[NodeId]) -> Vec<NodeId> {
        let table: HashMap<&NodeId, &NodeId> = self.pairs.iter().map(|(o, n)| (o, n)).collect();
        ids.iter().map(|id| table.get(id).copied().unwrap_or(id).clone()).collect()
    }

    pub fn apply_edges(&self, edges: &[Edge]) -> Vec<Edge> {
        let table: HashMap<&NodeId, &NodeId> = self.pairs.iter().map(|(o, n)| (o, n)).collect();
        edges
            .iter()
            .map(|e| Edge::new(table[&e.dependent].clone(), table[&e.predecessor].clone()))
            .collect()
    }
}

fn random_anon_id(rng: &mut impl Rng) -> NodeId {
    let s: String =
        (0..ANON_ID_LEN).map(|_| ALNUM[rng.random_range(0..ALNUM.len())] as char).collect();
    NodeId(s)
}

/// Replace every node id with a fresh random 5-character alphanumeric id.
/// Names, description, and edge structure are preserved; the result is a
/// pure function of `(case, seed)`.
pub fn anonymize_ids(case: &DsmCase, seed: u64) -> (DsmCase, IdMapping) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::with_capacity(case.node_count());
    let mut pairs = Vec::with_capacity(case.node_count());
    for node in case.nodes() {
        let fresh = loop {
            let candidate = random_anon_id(&mut rng);
            if used.insert(candidate.clone()) {
                break candidate;
            }
        };
        pairs.push((node.id.clone(), fresh));
    }
    let mapping = IdMapping { pairs };
    let nodes = case
        .nodes()
        .iter()
        .zip(&mapping.pairs)
        .map(|(node, (_, fresh))| Node { id: fresh.clone(), name: node.name.clone() })
        .collect();
    let edges = mapping.apply_edges(case.edges());
    let anon = DsmCase::new(nodes, edges, case.description(), case.known_optimum())
        .expect("bijective relabelling preserves validity");
    (anon, mapping)
}

/// Random case generator used by tests, examples, and the harness.
/// Each ordered pair `(i, j)`, `i != j`, is an edge with probability `density`.
pub fn random_case(n: usize, density: f64, seed: u64) -> DsmCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density.clamp(0.0, 1.0)) {
                edges.push((i, j));
            }
        }
    }
    let nodes = ids
        .iter()
        .map(|id| Node { id: NodeId(id.clone()), name: format!("Activity {id}") })
        .collect();
    let edges = edges
        .into_iter()
        .map(|(i, j)| Edge::new(NodeId(ids[i].clone()), NodeId(ids[j].clone())))
        .collect();
    DsmCase::new(nodes, edges, "Randomly generated dependency network.", None)
        .expect("generated case is valid")
}

/// Random DAG: nodes get a hidden random topological rank and edges only
/// point from lower to higher rank.
pub fn random_dag_case(n: usize, density: f64, seed: u64) -> DsmCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut rng);
    let ids: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random_bool(density.clamp(0.0, 1.0)) {
                // rank[a] precedes rank[b]; the later one depends on the earlier.
                edges.push(Edge::new(NodeId(ids[rank[b]].clone()), NodeId(ids[rank[a]].clone())));
            }
        }
    }
    let nodes = ids.iter().map(|id| Node { id: NodeId(id.clone()), name: id.clone() }).collect();
    DsmCase::new(nodes, edges, "Random acyclic dependency network.", Some(0))
        .expect("generated case is valid")
}
