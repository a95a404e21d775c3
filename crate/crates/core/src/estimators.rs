//! Uniform sampling, ARD extraction and the MoR / RoS / FS estimators.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NsumError, Result};
use crate::model::{ArdRecord, ArdSet, Instance, Method, NodeId, PrevalenceEstimate};
use crate::pmf::DiscretePmf;
use crate::seed::{self, stream};

/// Number of sampling realizations behind an empirical `R_S` pmf.
pub const DEFAULT_RS_TRIALS: usize = 10_000;

/// A uniformly drawn set of distinct respondents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    population: usize,
    ids: Vec<NodeId>,
}

impl Sample {
    /// Full sampling: every node of a population of size `n`.
    pub fn full(n: usize) -> Self {
        Sample {
            population: n,
            ids: (0..n as NodeId).collect(),
        }
    }

    pub fn from_ids(population: usize, ids: Vec<NodeId>) -> Result<Self> {
        if ids.is_empty() || ids.len() > population {
            return Err(NsumError::invalid(format!(
                "sample size {} outside 1..={population}",
                ids.len()
            )));
        }
        let mut seen = vec![false; population];
        for &v in &ids {
            let slot = seen
                .get_mut(v as usize)
                .ok_or_else(|| NsumError::invalid(format!("node {v} outside 0..{population}")))?;
            if std::mem::replace(slot, true) {
                return Err(NsumError::invalid(format!("node {v} sampled twice")));
            }
        }
        Ok(Sample { population, ids })
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn population(&self) -> usize {
        self.population
    }
}

fn check_sample_size(n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(NsumError::invalid(format!("sample size {m} outside 1..={n}")));
    }
    Ok(())
}

/// Draw `m` distinct ids uniformly from `0..n`.
pub fn draw_sample_with<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Sample> {
    check_sample_size(n, m)?;
    Ok(Sample {
        population: n,
        ids: index::sample(rng, n, m)
            .into_iter()
            .map(|i| i as NodeId)
            .collect(),
    })
}

/// Uniform size-`m` subset of the instance's nodes; pure in `seed`.
pub fn draw_sample(instance: &Instance, m: usize, seed: u64) -> Result<Sample> {
    let mut rng = seed::rng(seed, &[stream::SAMPLE]);
    draw_sample_with(instance.n(), m, &mut rng)
}

/// `(R_v, C_v)` for every sampled node.
pub fn extract_ard(instance: &Instance, sample: &Sample) -> Result<ArdSet> {
    if sample.population != instance.n() {
        return Err(NsumError::invalid(format!(
            "sample drawn from a population of {}, instance has {} nodes",
            sample.population,
            instance.n()
        )));
    }
    let records = sample
        .ids
        .iter()
        .map(|&v| {
            let neighbors = instance.in_neighbors(v);
            ArdRecord {
                node: v,
                reach: neighbors.len() as u32,
                hidden: neighbors.iter().filter(|&&u| instance.is_hidden(u)).count() as u32,
            }
        })
        .collect();
    ArdSet::new(records)
}

/// Per-node `(R_v, C_v)` for a whole instance, so repeated samples only need
/// table lookups.
#[derive(Clone, Debug)]
pub struct ArdTable {
    reach: Vec<u32>,
    hidden: Vec<u32>,
}

/// Sufficient statistics of one sample for both MoR and RoS.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleTotals {
    pub m: usize,
    pub sum_reach: u64,
    pub sum_hidden: u64,
    pub sum_ratio: f64,
    pub zero_degree: usize,
}

impl ArdTable {
    pub fn new(instance: &Instance) -> Self {
        ArdTable {
            reach: instance.in_degrees(),
            hidden: instance.hidden_in_counts(),
        }
    }

    pub fn n(&self) -> usize {
        self.reach.len()
    }

    pub fn reach(&self) -> &[u32] {
        &self.reach
    }

    pub fn totals(&self, sample: &[NodeId]) -> SampleTotals {
        let mut t = SampleTotals {
            m: sample.len(),
            ..Default::default()
        };
        for &v in sample {
            let (r, c) = (self.reach[v as usize], self.hidden[v as usize]);
            t.sum_reach += r as u64;
            t.sum_hidden += c as u64;
            if r == 0 {
                t.zero_degree += 1;
            } else {
                t.sum_ratio += c as f64 / r as f64;
            }
        }
        t
    }
}

impl SampleTotals {
    pub fn mor(&self, policy: ZeroDegreePolicy) -> Result<f64> {
        let effective = match policy {
            ZeroDegreePolicy::Reject if self.zero_degree > 0 => {
                return Err(NsumError::DegenerateSample(format!(
                    "{} zero-degree respondents under the reject policy",
                    self.zero_degree
                )))
            }
            _ => self.m - self.zero_degree,
        };
        if effective == 0 {
            return Err(NsumError::DegenerateSample("no respondent with positive degree".into()));
        }
        Ok(self.sum_ratio / effective as f64)
    }

    pub fn ros(&self, policy: ZeroDegreePolicy) -> Result<f64> {
        if policy == ZeroDegreePolicy::Reject && self.zero_degree > 0 {
            return Err(NsumError::DegenerateSample(format!(
                "{} zero-degree respondents under the reject policy",
                self.zero_degree
            )));
        }
        if self.sum_reach == 0 {
            return Err(NsumError::DegenerateSample("sampled in-degrees sum to zero".into()));
        }
        Ok(self.sum_hidden as f64 / self.sum_reach as f64)
    }
}

/// What to do with respondents reporting `R_v = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDegreePolicy {
    #[default]
    Reject,
    /// Exclude them from every sum, shrinking the effective sample size.
    Drop,
}

/// Applies `policy` to an ARD set.
pub fn apply_policy(ard: &ArdSet, policy: ZeroDegreePolicy) -> Result<ArdSet> {
    match policy {
        ZeroDegreePolicy::Reject => {
            if let Some(r) = ard.records().iter().find(|r| r.reach == 0) {
                return Err(NsumError::ZeroDegreeRespondent { node: r.node });
            }
            Ok(ard.clone())
        }
        ZeroDegreePolicy::Drop => {
            ArdSet::new(ard.records().iter().copied().filter(|r| r.reach > 0).collect())
        }
    }
}

/// Mean of ratios: `(1/m) * sum(C_v / R_v)`.
pub fn estimate_mor(ard: &ArdSet) -> Result<PrevalenceEstimate> {
    if ard.is_empty() {
        return Err(NsumError::DegenerateSample("empty ARD set".into()));
    }
    let mut sum = 0.0;
    for r in ard.records() {
        if r.reach == 0 {
            return Err(NsumError::ZeroDegreeRespondent { node: r.node });
        }
        sum += r.hidden as f64 / r.reach as f64;
    }
    PrevalenceEstimate::new(sum / ard.len() as f64, Method::MoR)
}

/// Ratio of sums: `sum(C_v) / sum(R_v)`.
pub fn estimate_ros(ard: &ArdSet) -> Result<PrevalenceEstimate> {
    let reach = ard.total_reach();
    if reach == 0 {
        return Err(NsumError::DegenerateSample("sampled in-degrees sum to zero".into()));
    }
    PrevalenceEstimate::new(ard.total_hidden() as f64 / reach as f64, Method::RoS)
}

/// Full-sampling estimate `C / (n * sqrt(max_out * min_out))`.
///
/// `min_out` and `max_out` are the extreme out-degrees of the network; for
/// bidirectional instances use [`fs_degree_bounds`].
pub fn estimate_fs(
    ard_full: &ArdSet,
    n: usize,
    min_out: u32,
    max_out: u32,
) -> Result<PrevalenceEstimate> {
    if ard_full.len() != n {
        return Err(NsumError::invalid(format!(
            "FS needs the ARD of all {n} nodes, got {}",
            ard_full.len()
        )));
    }
    let mut seen = vec![false; n];
    for r in ard_full.records() {
        match seen.get_mut(r.node as usize) {
            Some(slot) if !*slot => *slot = true,
            _ => {
                return Err(NsumError::invalid(format!(
                    "node {} is missing, repeated or out of range in the full ARD",
                    r.node
                )))
            }
        }
    }
    if min_out == 0 {
        return Err(NsumError::invalid("FS undefined with an isolated node (min out-degree 0)"));
    }
    if max_out < min_out {
        return Err(NsumError::invalid(format!(
            "max out-degree {max_out} below min out-degree {min_out}"
        )));
    }
    let c = ard_full.total_hidden() as f64;
    let value = c / (n as f64 * (max_out as f64 * min_out as f64).sqrt());
    PrevalenceEstimate::new(value, Method::FS)
}

/// `(min, max)` in-degree of an ARD set, which equal the extreme out-degrees
/// when the network is bidirectional.
pub fn fs_degree_bounds(ard_full: &ArdSet) -> Result<(u32, u32)> {
    let min = ard_full.records().iter().map(|r| r.reach).min();
    let max = ard_full.records().iter().map(|r| r.reach).max();
    min.zip(max)
        .ok_or_else(|| NsumError::DegenerateSample("empty ARD set".into()))
}

/// FS on a bidirectional instance under full sampling.
pub fn estimate_fs_bidirectional(instance: &Instance) -> Result<PrevalenceEstimate> {
    if !instance.is_bidirectional() {
        return Err(NsumError::invalid(
            "out-degrees are not recoverable from ARD on a directed network; pass them explicitly",
        ));
    }
    let ard = extract_ard(instance, &Sample::full(instance.n()))?;
    let (min, max) = fs_degree_bounds(&ard)?;
    estimate_fs(&ard, instance.n(), min, max)
}

/// Normalized histogram of `R_S` over `trials` independent samples.
pub fn empirical_rs_pmf(instance: &Instance, m: usize, trials: usize, seed: u64) -> Result<DiscretePmf> {
    rs_pmf_from_degrees(&instance.in_degrees(), m, trials, seed)
}

/// As [`empirical_rs_pmf`] but from a bare degree sequence.
pub fn rs_pmf_from_degrees(degrees: &[u32], m: usize, trials: usize, seed: u64) -> Result<DiscretePmf> {
    if trials == 0 {
        return Err(NsumError::invalid("need at least one trial"));
    }
    check_sample_size(degrees.len(), m)?;
    let mut counts = BTreeMap::new();
    let mut rng = seed::rng(seed, &[stream::RS_PMF]);
    for _ in 0..trials {
        let total: u64 = index::sample(&mut rng, degrees.len(), m)
            .into_iter()
            .map(|i| degrees[i] as u64)
            .sum();
        *counts.entry(total).or_insert(0u64) += 1;
    }
    DiscretePmf::from_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::{build_adversarial_pair, build_clique_pendant, build_star_instance, StarVariant};

    fn ard(pairs: &[(u32, u32)]) -> ArdSet {
        ArdSet::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(r, c))| ArdRecord::new(i as NodeId, r, c).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn full(inst: &Instance) -> ArdSet {
        extract_ard(inst, &Sample::full(inst.n())).unwrap()
    }

    #[test]
    fn sample_sizes() {
        let star = build_star_instance(5, StarVariant::HubHidden).unwrap();
        let s = draw_sample(&star, 5, 1).unwrap();
        let mut ids = s.ids().to_vec();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert!(draw_sample(&star, 0, 1).is_err());
        assert!(draw_sample(&star, 6, 1).is_err());

        let single = Instance::new(1, vec![vec![]], &[]).unwrap();
        assert_eq!(draw_sample(&single, 1, 0).unwrap().ids(), &[0]);
    }

    #[test]
    fn pair_frequencies_are_uniform() {
        // 10 unordered pairs of 5 nodes, each with probability 1/10.
        let star = build_star_instance(5, StarVariant::HubHidden).unwrap();
        let trials = 100_000;
        let mut counts = BTreeMap::new();
        for seed in 0..trials {
            let mut ids = draw_sample(&star, 2, seed).unwrap().ids().to_vec();
            ids.sort_unstable();
            *counts.entry((ids[0], ids[1])).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 10);
        let sigma = (trials as f64 * 0.1 * 0.9).sqrt();
        for (pair, c) in counts {
            assert!((c as f64 - trials as f64 / 10.0).abs() < 3.0 * sigma, "{pair:?}: {c}");
        }
    }

    #[test]
    fn extract_examples() {
        let star = build_star_instance(10, StarVariant::HubHidden).unwrap();
        let mut expected = vec![(9, 0)];
        expected.extend([(1, 1); 9]);
        expected.sort_unstable();
        assert_eq!(full(&star).sorted_pairs(), expected);

        let none = star.with_hidden(&[]).unwrap();
        assert!(full(&none).records().iter().all(|r| r.hidden == 0));
        let all: Vec<NodeId> = (0..10).collect();
        let every = star.with_hidden(&all).unwrap();
        assert!(full(&every).records().iter().all(|r| r.hidden == r.reach));

        let other = Sample::full(11);
        assert!(extract_ard(&star, &other).is_err());
    }

    #[test]
    fn mor_examples() {
        assert!((estimate_mor(&ard(&[(2, 1), (4, 1)])).unwrap().value - 0.375).abs() < 1e-15);

        let star = build_star_instance(10, StarVariant::HubHidden).unwrap();
        let est = estimate_mor(&full(&star)).unwrap().value;
        assert!((est - 0.9).abs() < 1e-15);
        let err = star.prevalence().errors(est).unwrap();
        assert!((err.upper - 9.0).abs() < 1e-12);

        let (i1, i2) = build_adversarial_pair(4).unwrap();
        for inst in [&i1, &i2] {
            assert!((estimate_mor(&full(inst)).unwrap().value - 4.0 / 45.0).abs() < 1e-15);
        }
        assert!(matches!(
            estimate_mor(&ard(&[(0, 0), (2, 1)])),
            Err(NsumError::ZeroDegreeRespondent { node: 0 })
        ));
    }

    #[test]
    fn ros_examples() {
        assert!((estimate_ros(&ard(&[(2, 1), (4, 1)])).unwrap().value - 1.0 / 3.0).abs() < 1e-15);

        let star = build_star_instance(10, StarVariant::HubHidden).unwrap();
        let est = estimate_ros(&full(&star)).unwrap().value;
        assert_eq!(est, 0.5);
        assert!((star.prevalence().errors(est).unwrap().upper - 5.0).abs() < 1e-12);

        let cp = build_clique_pendant(8).unwrap();
        let est = estimate_ros(&full(&cp)).unwrap().value;
        assert!((est - 0.2).abs() < 1e-15);
        assert!((cp.prevalence().errors(est).unwrap().lower - 2.5).abs() < 1e-12);

        assert!(matches!(
            estimate_ros(&ard(&[(0, 0)])),
            Err(NsumError::DegenerateSample(_))
        ));
    }

    #[test]
    fn fs_examples() {
        let star = build_star_instance(10, StarVariant::HubHidden).unwrap();
        let est = estimate_fs_bidirectional(&star).unwrap().value;
        assert!((est - 0.3).abs() < 1e-15);
        let err = star.prevalence().errors(est).unwrap();
        assert!((err.combined - 3.0).abs() < 1e-12);

        let (i1, _) = build_adversarial_pair(4).unwrap();
        let est = estimate_fs_bidirectional(&i1).unwrap().value;
        assert!((est - 4.0 / (9.0 * 5f64.sqrt())).abs() < 1e-15);
        assert!((est - 0.1988).abs() < 1e-4);

        // 2-regular: the 5-cycle, any hidden set.
        let cycle: Vec<_> = (0..5).map(|i| (i, (i + 1) % 5)).collect();
        let inst = Instance::from_undirected(5, &cycle, &[1, 3]).unwrap();
        let est = estimate_fs_bidirectional(&inst).unwrap().value;
        assert!((est - 0.4).abs() < 1e-15);

        let a = full(&star);
        assert!(estimate_fs(&a, 10, 0, 9).is_err());
        assert!(estimate_fs(&a, 11, 1, 9).is_err());
    }

    #[test]
    fn policy_drop_and_reject() {
        let a = ard(&[(0, 0), (2, 1), (4, 1)]);
        assert!(apply_policy(&a, ZeroDegreePolicy::Reject).is_err());
        let kept = apply_policy(&a, ZeroDegreePolicy::Drop).unwrap();
        assert_eq!(kept.len(), 2);
        assert!((estimate_mor(&kept).unwrap().value - 0.375).abs() < 1e-15);

        let table_inst = Instance::new(3, vec![vec![], vec![0, 2], vec![0]], &[0]).unwrap();
        let t = ArdTable::new(&table_inst).totals(&[0, 1, 2]);
        assert!(t.mor(ZeroDegreePolicy::Reject).is_err());
        assert!((t.mor(ZeroDegreePolicy::Drop).unwrap() - 0.75).abs() < 1e-15);
        assert!((t.ros(ZeroDegreePolicy::Drop).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn table_matches_extract() {
        let (i1, _) = build_adversarial_pair(6).unwrap();
        let s = draw_sample(&i1, 7, 11).unwrap();
        let t = ArdTable::new(&i1).totals(s.ids());
        let a = extract_ard(&i1, &s).unwrap();
        assert_eq!(t.sum_reach, a.total_reach());
        assert_eq!(t.sum_hidden, a.total_hidden());
        let mor = estimate_mor(&a).unwrap().value;
        assert!((t.mor(ZeroDegreePolicy::Reject).unwrap() - mor).abs() < 1e-15);
    }

    #[test]
    fn rs_pmf() {
        let star = build_star_instance(10, StarVariant::HubHidden).unwrap();
        let full_pmf = empirical_rs_pmf(&star, 10, 50, 3).unwrap();
        assert_eq!(full_pmf.entries(), &[(18, 1.0)]);

        let single = empirical_rs_pmf(&star, 1, 20_000, 3).unwrap();
        assert_eq!(single.entries().len(), 2);
        assert!((single.prob(9) - 0.1).abs() < 5.0 * (0.09f64 / 20_000.0).sqrt());
        assert!(empirical_rs_pmf(&star, 1, 0, 3).is_err());
        assert_eq!(empirical_rs_pmf(&star, 3, 100, 8).unwrap(), empirical_rs_pmf(&star, 3, 100, 8).unwrap());
    }
}
