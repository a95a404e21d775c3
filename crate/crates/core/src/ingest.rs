//! Loaders for the Gemsec-Deezer friendship graphs: an edge CSV
//! (`node_1,node_2`) and a genre JSON (`{"id": ["Genre", ..], ..}`).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{NsumError, Result};
use crate::model::{Instance, NodeId};

/// Undirected simple graph on `0..n`, each edge stored once as `(lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub nodes: usize,
    pub edges: usize,
    /// `2 |E| / |V|`.
    pub avg_degree: f64,
}

impl UndirectedGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n];
        for &(a, b) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            nodes: self.n,
            edges: self.edges.len(),
            avg_degree: 2.0 * self.edges.len() as f64 / self.n as f64,
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> NsumError {
    NsumError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_edges(path: &Path) -> Result<UndirectedGraph> {
    read_edges(File::open(path)?, path)
}

/// Parses an edge list. A first line that is not numeric is taken as the
/// header. `path` is only used in error messages.
pub fn read_edges<R: Read>(reader: R, path: &Path) -> Result<UndirectedGraph> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut max_id: Option<NodeId> = None;
    let mut first = true;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let is_first = std::mem::replace(&mut first, false);
        if fields.len() != 2 {
            return Err(parse_error(path, lineno, format!("expected 2 fields, found {}", fields.len())));
        }
        let parsed = (fields[0].parse::<NodeId>(), fields[1].parse::<NodeId>());
        let (a, b) = match parsed {
            (Ok(a), Ok(b)) => (a, b),
            _ if is_first && fields.iter().any(|f| f.chars().any(char::is_alphabetic)) => continue,
            _ => return Err(parse_error(path, lineno, format!("bad node ids `{line}`"))),
        };
        if a == b {
            return Err(NsumError::Data(format!("{}:{lineno}: self-loop on node {a}", path.display())));
        }
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            return Err(NsumError::Data(format!(
                "{}:{lineno}: duplicate edge {}-{}",
                path.display(),
                key.0,
                key.1
            )));
        }
        max_id = Some(max_id.map_or(key.1, |m| m.max(key.1)));
        edges.push(key);
    }
    let n = max_id.map_or(0, |m| m as usize + 1);
    if n == 0 {
        return Err(NsumError::Data(format!("{}: no edges", path.display())));
    }
    Ok(UndirectedGraph { n, edges })
}

/// Inverted genre index: genre name to the nodes carrying it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GenreIndex {
    genres: BTreeMap<String, BTreeSet<NodeId>>,
}

impl GenreIndex {
    pub fn get(&self, genre: &str) -> Option<&BTreeSet<NodeId>> {
        self.genres.get(genre.trim())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.genres.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.genres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genres.is_empty()
    }

    /// Looks `label` up directly, then through `aliases`.
    pub fn resolve(&self, label: &str, aliases: &GenreAliases) -> Result<&BTreeSet<NodeId>> {
        let label = label.trim();
        self.get(label)
            .or_else(|| aliases.0.get(label).and_then(|target| self.get(target)))
            .ok_or_else(|| NsumError::Data(format!("unknown genre `{label}`")))
    }
}

pub fn load_genres(path: &Path, node_count: usize) -> Result<GenreIndex> {
    read_genres(File::open(path)?, node_count, path)
}

pub fn read_genres<R: Read>(reader: R, node_count: usize, path: &Path) -> Result<GenreIndex> {
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_reader(BufReader::new(reader))
        .map_err(|e| parse_error(path, e.line(), e.to_string()))?;
    let mut genres: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
    for (id, labels) in raw {
        let node: NodeId = id
            .trim()
            .parse()
            .map_err(|_| NsumError::Data(format!("{}: bad node id `{id}`", path.display())))?;
        if node as usize >= node_count {
            return Err(NsumError::Data(format!(
                "{}: node {node} outside the graph's {node_count} nodes",
                path.display()
            )));
        }
        for label in labels {
            genres.entry(label.trim().to_string()).or_default().insert(node);
        }
    }
    Ok(GenreIndex { genres })
}

/// Map from display labels to dataset genre names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GenreAliases(pub BTreeMap<String, String>);

impl GenreAliases {
    /// Reads a JSON object `{"label": "dataset name", ..}`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let map: BTreeMap<String, String> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| parse_error(path, e.line(), e.to_string()))?;
        Ok(GenreAliases(
            map.into_iter()
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect(),
        ))
    }
}

/// Bidirectional instance: every undirected edge becomes two arcs.
pub fn build_instance(graph: &UndirectedGraph, hidden: &BTreeSet<NodeId>) -> Result<Instance> {
    let hidden: Vec<NodeId> = hidden.iter().copied().collect();
    Instance::from_undirected(graph.n, &graph.edges, &hidden)
}

/// Paths of one dataset on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetFiles {
    pub edges: PathBuf,
    pub genres: PathBuf,
}

impl DatasetFiles {
    /// `<dir>/<CC>_edges.csv` and `<dir>/<CC>_genres.json`, the layout of
    /// the published archive (`HR`, `HU`, `RO`).
    pub fn in_dir(dir: &Path, country: &str) -> Self {
        DatasetFiles {
            edges: dir.join(format!("{country}_edges.csv")),
            genres: dir.join(format!("{country}_genres.json")),
        }
    }

    pub fn exist(&self) -> bool {
        self.edges.is_file() && self.genres.is_file()
    }
}
