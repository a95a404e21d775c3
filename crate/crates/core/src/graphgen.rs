//! Instance construction.
//!
//! Random networks follow a two-step law: every node draws an in-degree from
//! a [`DegreeDistribution`], then picks that many distinct in-neighbours
//! uniformly from the other `n - 1` nodes. The adversarial builders produce
//! the small bidirectional graphs on which scale-up estimators fail.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::degree::DegreeDistribution;
use crate::error::{NsumError, Result};
use crate::model::{Instance, NodeId};
use crate::seed::{self, stream};

pub use crate::degree::DegreeKind;

/// How the hidden population is placed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenSpec {
    /// Exactly these ids.
    Explicit(Vec<NodeId>),
    /// Ids `0..h`.
    FirstH(usize),
    /// `h` ids drawn uniformly without replacement.
    Uniform(usize),
}

impl HiddenSpec {
    pub fn size(&self) -> usize {
        match self {
            HiddenSpec::Explicit(ids) => ids.len(),
            HiddenSpec::FirstH(h) | HiddenSpec::Uniform(h) => *h,
        }
    }

    pub(crate) fn resolve(&self, n: usize, seed: u64) -> Result<Vec<NodeId>> {
        if self.size() > n {
            return Err(NsumError::invalid(format!(
                "hidden population {} exceeds n = {n}",
                self.size()
            )));
        }
        Ok(match self {
            HiddenSpec::Explicit(ids) => ids.clone(),
            HiddenSpec::FirstH(h) => (0..*h as NodeId).collect(),
            HiddenSpec::Uniform(h) => {
                let mut rng = seed::rng(seed, &[stream::HIDDEN]);
                index::sample(&mut rng, n, *h)
                    .into_iter()
                    .map(|i| i as NodeId)
                    .collect()
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub degrees: DegreeDistribution,
    pub hidden: HiddenSpec,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(degrees: DegreeDistribution, hidden: HiddenSpec, seed: u64) -> Self {
        GeneratorConfig {
            degrees,
            hidden,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.degrees.n()
    }
}

/// Draws one random network. Pure in `config` (seed included).
pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    let n = config.n();
    let hidden = config.hidden.resolve(n, config.seed)?;
    let in_neighbors = sample_in_neighbors(&config.degrees, config.seed);
    Instance::new(n, in_neighbors, &hidden)
}

/// In-neighbour lists only; exposed so callers that need just the degree
/// sequence or ARD can skip building an [`Instance`].
pub fn sample_in_neighbors(degrees: &DegreeDistribution, seed: u64) -> Vec<Vec<NodeId>> {
    let n = degrees.n();
    let mut rng = seed::rng(seed, &[stream::GRAPH]);
    (0..n)
        .map(|v| {
            let k = degrees.sample(&mut rng);
            index::sample(&mut rng, n - 1, k)
                .into_iter()
                .map(|i| if i >= v { i + 1 } else { i } as NodeId)
                .collect()
        })
        .collect()
}

/// The two instances `(I1, I2)` that share a graph and report identical ARD.
///
/// Layout for `k`: clique nodes `0..k`, pendant `k + i` attached to clique
/// node `i`, hub `s = 2k` attached to every clique node. `I1` hides the hub,
/// `I2` hides the pendants.
pub fn build_adversarial_pair(k: usize) -> Result<(Instance, Instance)> {
    if k == 0 {
        return Err(NsumError::invalid("adversarial construction needs k >= 1"));
    }
    let n = 2 * k + 1;
    let hub = (2 * k) as NodeId;
    let mut edges = Vec::with_capacity(k * (k - 1) / 2 + 2 * k);
    for i in 0..k {
        for j in i + 1..k {
            edges.push((i as NodeId, j as NodeId));
        }
        edges.push((i as NodeId, (k + i) as NodeId));
        edges.push((i as NodeId, hub));
    }
    let pendants: Vec<NodeId> = (k..2 * k).map(|v| v as NodeId).collect();
    let first = Instance::from_undirected(n, &edges, &[hub])?;
    let second = first.with_hidden(&pendants)?;
    Ok((first, second))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarVariant {
    HubHidden,
    LeavesHidden,
}

/// Bidirectional star on `n` nodes with centre `0`.
pub fn build_star_instance(n: usize, variant: StarVariant) -> Result<Instance> {
    if n < 2 {
        return Err(NsumError::invalid("star needs n >= 2"));
    }
    let edges: Vec<_> = (1..n as NodeId).map(|leaf| (0, leaf)).collect();
    let hidden: Vec<NodeId> = match variant {
        StarVariant::HubHidden => vec![0],
        StarVariant::LeavesHidden => (1..n as NodeId).collect(),
    };
    Instance::from_undirected(n, &edges, &hidden)
}

/// `n/2`-clique (nodes `0..n/2`) with one hidden pendant per clique node.
///
/// Unlike [`build_adversarial_pair`] there is no hub.
pub fn build_clique_pendant(n: usize) -> Result<Instance> {
    if n < 4 || n % 2 == 1 {
        return Err(NsumError::invalid(format!(
            "clique-pendant needs even n >= 4, got {n}"
        )));
    }
    let half = n / 2;
    let mut edges = Vec::new();
    for i in 0..half {
        for j in i + 1..half {
            edges.push((i as NodeId, j as NodeId));
        }
        edges.push((i as NodeId, (half + i) as NodeId));
    }
    let pendants: Vec<NodeId> = (half..n).map(|v| v as NodeId).collect();
    Instance::from_undirected(n, &edges, &pendants)
}
