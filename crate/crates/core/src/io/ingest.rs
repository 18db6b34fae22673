//! Edge-list ingestion.
//!
//! One relation per line, `src<TAB>dst` (any whitespace separates fields).
//! Lines starting with `#` and blank lines are skipped. A line holding a
//! single token declares a node without relations.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Result, SppError};
use crate::relmodel::BinaryMatrix;

/// Directed relations over a vocabulary of node names. Node `i` is the
/// `i`-th distinct name in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub nodes: Vec<String>,
    /// Distinct `(src, dst)` pairs, 0-based, in order of first appearance.
    pub edges: Vec<(usize, usize)>,
}

impl EdgeList {
    pub fn parse(text: &str) -> Result<Self> {
        let mut list = EdgeList::default();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut id = |name: &str, list: &mut EdgeList| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                list.nodes.push(name.to_string());
                list.nodes.len() - 1
            })
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [node] => {
                    id(node, &mut list);
                }
                [src, dst] => {
                    let e = (id(src, &mut list), id(dst, &mut list));
                    if seen.insert(e) {
                        list.edges.push(e);
                    }
                }
                _ => {
                    return Err(SppError::Parse {
                        line: lineno + 1,
                        message: format!("expected `src<TAB>dst`, found {} fields", fields.len()),
                    })
                }
            }
        }
        if list.nodes.is_empty() {
            return Err(SppError::EmptyInput);
        }
        Ok(list)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SppError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// In-degree plus out-degree per node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Keeps the `k` nodes of highest total degree, ties going to the node
    /// seen first, and the relations among them. Kept nodes stay in
    /// first-appearance order.
    pub fn top_k(&self, k: usize) -> EdgeList {
        let deg = self.degrees();
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
        let mut keep: Vec<usize> = order.into_iter().take(k).collect();
        keep.sort_unstable();
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        EdgeList {
            nodes: keep.iter().map(|&i| self.nodes[i].clone()).collect(),
            edges: self
                .edges
                .iter()
                .filter(|&&(a, b)| remap[a] != usize::MAX && remap[b] != usize::MAX)
                .map(|&(a, b)| (remap[a], remap[b]))
                .collect(),
        }
    }

    /// `N×N` adjacency matrix; self-loops land on the diagonal.
    pub fn to_matrix(&self) -> BinaryMatrix {
        let n = self.nodes.len();
        let mut m = BinaryMatrix::zeros(n, n);
        for &(a, b) in &self.edges {
            m.set(a, b, true);
        }
        m
    }

    /// Position of every node name.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }

    /// Edge list of a matrix with nodes named `1..N`.
    pub fn from_matrix(m: &BinaryMatrix) -> EdgeList {
        let mut edges = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m.get(i, j) {
                    edges.push((i, j));
                }
            }
        }
        EdgeList {
            nodes: (1..=m.rows().max(m.cols())).map(|i| i.to_string()).collect(),
            edges,
        }
    }

    /// Serializes back to the line format, declaring every node first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(n);
            out.push('\n');
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!("{}\t{}\n", self.nodes[a], self.nodes[b]));
        }
        out
    }
}

/// Matrix and node names read from an edge-list file.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub matrix: BinaryMatrix,
    pub nodes: Vec<String>,
}

/// Reads `path`, optionally keeps the `top_k` most active nodes, and builds
/// the adjacency matrix.
pub fn ingest(path: impl AsRef<Path>, top_k: Option<usize>) -> Result<Ingested> {
    let mut list = EdgeList::read(path)?;
    if let Some(k) = top_k {
        list = list.top_k(k);
    }
    Ok(Ingested {
        matrix: list.to_matrix(),
        nodes: list.nodes,
    })
}
