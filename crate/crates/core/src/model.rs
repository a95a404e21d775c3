//! Domain types shared by every module.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NsumError, Result};

/// Dense node identifier in `0..n`.
pub type NodeId = u32;

/// Exact hidden-population size together with the population size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prevalence {
    pub hidden: usize,
    pub n: usize,
}

impl Prevalence {
    pub fn rho(&self) -> f64 {
        self.hidden as f64 / self.n as f64
    }

    /// Error report of `estimate` against this prevalence.
    ///
    /// Ratios are formed as `estimate * n / h` rather than through the
    /// rounded `rho`.
    pub fn errors(&self, estimate: f64) -> Result<ErrorReport> {
        if !(estimate.is_finite() && estimate >= 0.0) {
            return Err(NsumError::invalid(format!(
                "estimate must be finite and nonnegative, got {estimate}"
            )));
        }
        let scaled = estimate * self.n as f64;
        let h = self.hidden as f64;
        Ok(ErrorReport::from_ratio_parts(scaled, h))
    }
}

/// A directed network with a planted hidden population.
///
/// In-neighbour lists are stored in compressed sparse row form and sorted.
/// The hidden set is a membership bitmap.
#[derive(Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    hidden: Vec<bool>,
    hidden_count: usize,
    bidirectional: bool,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("n", &self.n)
            .field("edges", &self.neighbors.len())
            .field("hidden", &self.hidden_count)
            .field("bidirectional", &self.bidirectional)
            .finish()
    }
}

impl Instance {
    /// Builds an instance from per-node in-neighbour lists.
    ///
    /// Rejects self-loops, duplicate in-neighbours and out-of-range ids.
    /// Duplicate hidden ids are collapsed.
    pub fn new(n: usize, in_neighbors: Vec<Vec<NodeId>>, hidden: &[NodeId]) -> Result<Self> {
        if n == 0 {
            return Err(NsumError::invalid("instance needs at least one node"));
        }
        if n > NodeId::MAX as usize {
            return Err(NsumError::invalid(format!("n = {n} exceeds the node id range")));
        }
        if in_neighbors.len() != n {
            return Err(NsumError::invalid(format!(
                "expected {n} in-neighbour lists, got {}",
                in_neighbors.len()
            )));
        }
        let total: usize = in_neighbors.iter().map(Vec::len).sum();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(total);
        offsets.push(0);
        for (v, mut list) in in_neighbors.into_iter().enumerate() {
            list.sort_unstable();
            for (i, &u) in list.iter().enumerate() {
                if u as usize >= n {
                    return Err(NsumError::invalid(format!(
                        "node {v} has in-neighbour {u} outside 0..{n}"
                    )));
                }
                if u as usize == v {
                    return Err(NsumError::invalid(format!("self-loop at node {v}")));
                }
                if i > 0 && list[i - 1] == u {
                    return Err(NsumError::invalid(format!(
                        "duplicate in-neighbour {u} at node {v}"
                    )));
                }
            }
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }
        let hidden = hidden_bitmap(n, hidden)?;
        let mut instance = Instance {
            n,
            offsets,
            neighbors,
            hidden_count: hidden.iter().filter(|&&b| b).count(),
            hidden,
            bidirectional: false,
        };
        instance.bidirectional = instance.compute_bidirectional();
        Ok(instance)
    }

    /// Builds a bidirectional instance: each undirected edge `{u, v}` becomes
    /// the two directed edges `(u, v)` and `(v, u)`.
    pub fn from_undirected(n: usize, edges: &[(NodeId, NodeId)], hidden: &[NodeId]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(NsumError::invalid(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            lists[v as usize].push(u);
            lists[u as usize].push(v);
        }
        Instance::new(n, lists, hidden)
    }

    fn compute_bidirectional(&self) -> bool {
        (0..self.n).all(|v| {
            self.in_neighbors(v as NodeId)
                .iter()
                .all(|&u| self.in_neighbors(u).binary_search(&(v as NodeId)).is_ok())
        })
    }

    /// Same graph with a different hidden set.
    pub fn with_hidden(&self, hidden: &[NodeId]) -> Result<Self> {
        let bitmap = hidden_bitmap(self.n, hidden)?;
        Ok(Instance {
            hidden_count: bitmap.iter().filter(|&&b| b).count(),
            hidden: bitmap,
            ..self.clone()
        })
    }

    /// Union of the graph with its reverse; the hidden set is kept.
    pub fn symmetrized(&self) -> Self {
        let mut lists: Vec<Vec<NodeId>> = (0..self.n)
            .map(|v| self.in_neighbors(v as NodeId).to_vec())
            .collect();
        for (u, v) in self.edges() {
            lists[u as usize].push(v);
        }
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
        }
        let hidden: Vec<NodeId> = self.hidden_ids().collect();
        Instance::new(self.n, lists, &hidden).expect("symmetrization preserves validity")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn in_degrees(&self) -> Vec<u32> {
        self.offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect()
    }

    pub fn out_degrees(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.n];
        for &u in &self.neighbors {
            out[u as usize] += 1;
        }
        out
    }

    /// Number of hidden in-neighbours of every node.
    pub fn hidden_in_counts(&self) -> Vec<u32> {
        (0..self.n)
            .map(|v| {
                self.in_neighbors(v as NodeId)
                    .iter()
                    .filter(|&&u| self.hidden[u as usize])
                    .count() as u32
            })
            .collect()
    }

    /// Number of directed edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Directed edges `(u, v)`, meaning `u` is an in-neighbour of `v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n).flat_map(move |v| {
            self.in_neighbors(v as NodeId)
                .iter()
                .map(move |&u| (u, v as NodeId))
        })
    }

    pub fn is_hidden(&self, v: NodeId) -> bool {
        self.hidden[v as usize]
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_count
    }

    pub fn hidden_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.hidden
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(v, _)| v as NodeId)
    }

    pub fn prevalence(&self) -> Prevalence {
        Prevalence {
            hidden: self.hidden_count,
            n: self.n,
        }
    }

    pub fn rho(&self) -> f64 {
        self.prevalence().rho()
    }

    /// True iff `(u, v)` is an edge exactly when `(v, u)` is.
    pub fn is_bidirectional(&self) -> bool {
        self.bidirectional
    }

    pub fn meta(&self) -> InstanceMeta {
        InstanceMeta {
            n: self.n,
            hidden: self.hidden_ids().collect(),
            bidirectional: self.bidirectional,
        }
    }

    /// Writes one `u v` line per directed edge.
    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(writer, "{u} {v}")?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Writes `<prefix>.edges` and the `<prefix>.json` sidecar.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let edges = BufWriter::new(File::create(prefix.with_extension("edges"))?);
        self.write_edge_list(edges)?;
        let meta = BufWriter::new(File::create(prefix.with_extension("json"))?);
        serde_json::to_writer_pretty(meta, &self.meta())?;
        Ok(())
    }

    /// Reads an edge list plus its sidecar.
    pub fn load(edges: &Path, meta: &Path) -> Result<Self> {
        let meta: InstanceMeta = serde_json::from_reader(BufReader::new(File::open(meta)?))?;
        let instance = Instance::read_edge_list(BufReader::new(File::open(edges)?), &meta, edges)?;
        if instance.bidirectional != meta.bidirectional {
            log::warn!(
                "sidecar says bidirectional = {}, edge list says {}",
                meta.bidirectional,
                instance.bidirectional
            );
        }
        Ok(instance)
    }

    pub fn read_edge_list<R: Read>(reader: R, meta: &InstanceMeta, path: &Path) -> Result<Self> {
        let mut lists = vec![Vec::new(); meta.n];
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| NsumError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let mut fields = trimmed.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(format!("expected `u v`, got `{trimmed}`")));
            };
            let u: NodeId = a.parse().map_err(|e| parse_err(format!("bad node id `{a}`: {e}")))?;
            let v: NodeId = b.parse().map_err(|e| parse_err(format!("bad node id `{b}`: {e}")))?;
            if v as usize >= meta.n || u as usize >= meta.n {
                return Err(parse_err(format!("edge ({u}, {v}) outside 0..{}", meta.n)));
            }
            lists[v as usize].push(u);
        }
        Instance::new(meta.n, lists, &meta.hidden)
    }
}

fn hidden_bitmap(n: usize, hidden: &[NodeId]) -> Result<Vec<bool>> {
    let mut bitmap = vec![false; n];
    for &v in hidden {
        if v as usize >= n {
            return Err(NsumError::invalid(format!("hidden node {v} outside 0..{n}")));
        }
        bitmap[v as usize] = true;
    }
    Ok(bitmap)
}

/// JSON sidecar accompanying an edge list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n: usize,
    pub hidden: Vec<NodeId>,
    pub bidirectional: bool,
}

/// One respondent's report: in-degree `R` and hidden in-neighbour count `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArdRecord {
    pub node: NodeId,
    #[serde(rename = "R")]
    pub reach: u32,
    #[serde(rename = "C")]
    pub hidden: u32,
}

impl ArdRecord {
    pub fn new(node: NodeId, reach: u32, hidden: u32) -> Result<Self> {
        if hidden > reach {
            return Err(NsumError::invalid(format!(
                "node {node}: C = {hidden} exceeds R = {reach}"
            )));
        }
        Ok(ArdRecord { node, reach, hidden })
    }

    /// `(R, C)` without the node id.
    pub fn pair(&self) -> (u32, u32) {
        (self.reach, self.hidden)
    }
}

/// The ARD collected from one sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArdSet {
    records: Vec<ArdRecord>,
}

impl ArdSet {
    pub fn new(records: Vec<ArdRecord>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.hidden > r.reach) {
            return Err(NsumError::invalid(format!(
                "node {}: C = {} exceeds R = {}",
                r.node, r.hidden, r.reach
            )));
        }
        Ok(ArdSet { records })
    }

    pub fn records(&self) -> &[ArdRecord] {
        &self.records
    }

    /// Sample size `m`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_reach(&self) -> u64 {
        self.records.iter().map(|r| r.reach as u64).sum()
    }

    pub fn total_hidden(&self) -> u64 {
        self.records.iter().map(|r| r.hidden as u64).sum()
    }

    /// Sorted `(R, C)` multiset.
    pub fn sorted_pairs(&self) -> Vec<(u32, u32)> {
        let mut pairs: Vec<_> = self.records.iter().map(ArdRecord::pair).collect();
        pairs.sort_unstable();
        pairs
    }

    /// Writes CSV with header `node,R,C`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for r in &self.records {
            csv.serialize(r)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let records = csv.deserialize().collect::<std::result::Result<Vec<ArdRecord>, _>>()?;
        ArdSet::new(records)
    }
}

/// Which estimator produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MoR")]
    MoR,
    #[serde(rename = "RoS")]
    RoS,
    #[serde(rename = "FS")]
    FS,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MoR => "MoR",
            Method::RoS => "RoS",
            Method::FS => "FS",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = NsumError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mor" => Ok(Method::MoR),
            "ros" => Ok(Method::RoS),
            "fs" => Ok(Method::FS),
            other => Err(NsumError::invalid(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub value: f64,
    pub method: Method,
}

impl PrevalenceEstimate {
    pub fn new(value: f64, method: Method) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(NsumError::invalid(format!(
                "{method} estimate must be finite and nonnegative, got {value}"
            )));
        }
        Ok(PrevalenceEstimate { value, method })
    }
}

/// Multiplicative errors of an estimate: `upper = max(1, est/rho)`,
/// `lower = max(1, rho/est)` and `combined = max(upper, lower)`.
///
/// A zero on exactly one side saturates to `+inf`; `0/0` counts as exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub upper: f64,
    pub lower: f64,
    pub combined: f64,
}

impl ErrorReport {
    fn from_ratio_parts(estimate: f64, truth: f64) -> Self {
        let ratio = |num: f64, den: f64| {
            if num == 0.0 {
                1.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                (num / den).max(1.0)
            }
        };
        let upper = ratio(estimate, truth);
        let lower = ratio(truth, estimate);
        ErrorReport {
            upper,
            lower,
            combined: upper.max(lower),
        }
    }
}

/// Error report of `estimate` against the true prevalence `rho`.
pub fn compute_errors(estimate: f64, rho: f64) -> Result<ErrorReport> {
    if !(estimate.is_finite() && estimate >= 0.0) {
        return Err(NsumError::invalid(format!(
            "estimate must be finite and nonnegative, got {estimate}"
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(NsumError::invalid(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(ErrorReport::from_ratio_parts(estimate, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn errors_examples() {
        let e = compute_errors(0.05, 0.05).unwrap();
        assert_eq!((e.upper, e.lower, e.combined), (1.0, 1.0, 1.0));

        let e = compute_errors(0.10, 0.05).unwrap();
        assert_eq!((e.upper, e.lower, e.combined), (2.0, 1.0, 2.0));

        let e = compute_errors(0.0, 0.05).unwrap();
        assert_eq!(e.upper, 1.0);
        assert!(e.lower.is_infinite() && e.combined.is_infinite());

        let e = compute_errors(0.3, 0.0).unwrap();
        assert!(e.upper.is_infinite());
        assert_eq!(e.lower, 1.0);

        let e = compute_errors(0.0, 0.0).unwrap();
        assert_eq!((e.upper, e.lower, e.combined), (1.0, 1.0, 1.0));
    }

    #[test]
    fn errors_reject_bad_input() {
        assert!(compute_errors(-0.1, 0.5).is_err());
        assert!(compute_errors(0.1, -0.5).is_err());
        assert!(compute_errors(0.1, 1.5).is_err());
        assert!(compute_errors(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn exact_prevalence_errors() {
        let p = Prevalence { hidden: 1, n: 9 };
        let e = p.errors(4.0 / 45.0).unwrap();
        assert!((e.lower - 1.25).abs() < 1e-12);
        assert_eq!(e.upper, 1.0);
    }

    proptest! {
        #[test]
        fn combined_error_is_symmetric(e in 1e-6f64..1.0, rho in 1e-6f64..1.0) {
            let a = compute_errors(e, rho).unwrap().combined;
            let b = compute_errors(rho, e).unwrap().combined;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
            prop_assert!(a >= 1.0);
        }
    }

    #[test]
    fn instance_rejects_self_loops_and_duplicates() {
        assert!(Instance::new(2, vec![vec![0], vec![]], &[]).is_err());
        assert!(Instance::new(3, vec![vec![1, 1], vec![], vec![]], &[]).is_err());
        assert!(Instance::new(2, vec![vec![5], vec![]], &[]).is_err());
        assert!(Instance::new(2, vec![vec![1], vec![0]], &[2]).is_err());
    }

    #[test]
    fn instance_basics() {
        let inst = Instance::from_undirected(3, &[(0, 1), (1, 2)], &[1]).unwrap();
        assert!(inst.is_bidirectional());
        assert_eq!(inst.in_degrees(), vec![1, 2, 1]);
        assert_eq!(inst.hidden_in_counts(), vec![1, 0, 1]);
        assert_eq!(inst.edge_count(), 4);
        assert_eq!(inst.prevalence(), Prevalence { hidden: 1, n: 3 });

        let directed = Instance::new(3, vec![vec![1], vec![], vec![]], &[]).unwrap();
        assert!(!directed.is_bidirectional());
        let sym = directed.symmetrized();
        assert!(sym.is_bidirectional());
        assert_eq!(sym.in_degrees(), vec![1, 1, 0]);
        assert_eq!(directed.out_degrees(), vec![0, 1, 0]);
    }

    #[test]
    fn edge_list_round_trip() {
        let inst = Instance::new(4, vec![vec![1, 2], vec![0], vec![3], vec![0]], &[2, 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("toy");
        inst.save(&prefix).unwrap();
        let back = Instance::load(&prefix.with_extension("edges"), &prefix.with_extension("json")).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn edge_list_parse_error_carries_line() {
        let meta = InstanceMeta { n: 3, hidden: vec![], bidirectional: false };
        let err = Instance::read_edge_list("0 1\n1 x\n".as_bytes(), &meta, Path::new("t.edges")).unwrap_err();
        match err {
            NsumError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ard_csv_round_trip() {
        let ard = ArdSet::new(vec![
            ArdRecord::new(0, 2, 1).unwrap(),
            ArdRecord::new(5, 4, 0).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        ard.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node,R,C\n"));
        assert_eq!(ArdSet::read_csv(buf.as_slice()).unwrap(), ard);
        assert!(ArdRecord::new(0, 1, 2).is_err());
    }
}
