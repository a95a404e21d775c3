//! Seeded Monte-Carlo experiments.
//!
//! For every sample size on the grid, `instances` networks are drawn, each is
//! surveyed `samples_per_instance` times, and the MoR / RoS estimates and
//! errors are recorded. Aggregates (tail probabilities, five-number summaries,
//! minimal sample sizes, bound curves) are computed from the stored trials and
//! written as CSV.
//!
//! Seeds: instance `i` at grid point `g` uses `derive(master, [g, i])`, its
//! sample `s` uses `derive(master, [g, i, s, SAMPLE])`. Results are collected
//! in `(grid, instance, sample)` order, so thread count never changes output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    er_ros_bound, mor_bound, ros_bound_pmf, ros_bound_simple, sample_size_rule_bound, sf_ros_bound,
    BoundCurveRow, BoundFamily, BoundResult, DeltaPolicy, MuMode,
};
use crate::degree::{er_p_for_mean, DegreeDistribution};
use crate::error::{NsumError, Result};
use crate::estimators::{ArdTable, ZeroDegreePolicy, DEFAULT_RS_TRIALS};
use crate::graphgen::{generate, GeneratorConfig, HiddenSpec};
use crate::ingest::{build_instance, load_edges, load_genres, GenreAliases};
use crate::model::{Method, NodeId, Prevalence};
use crate::pmf::DiscretePmf;
use crate::seed::{self, stream};

/// Population size of the desk-scale defaults.
pub const DESK_N: usize = 100_000;
/// Population size of the full-scale runs.
pub const FULL_SCALE_N: usize = 1_000_000;

/// Where the networks come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    /// Truncated Erdős–Rényi with `p = mean_degree / (n - 1)`.
    ErdosRenyi { mean_degree: f64 },
    ScaleFree { gamma: f64 },
    /// Explicit in-degree pmf as `[[degree, probability], ..]`.
    Explicit { pmf: Vec<(usize, f64)> },
    /// A fixed friendship graph with a genre as the hidden population.
    Dataset {
        edges: PathBuf,
        genres: PathBuf,
        genre: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aliases: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenPlacement {
    #[default]
    Uniform,
    First,
}

fn default_n() -> usize {
    DESK_N
}
fn default_epsilons() -> Vec<f64> {
    vec![0.05]
}
fn default_instances() -> usize {
    100
}
fn default_samples() -> usize {
    200
}
fn default_estimators() -> Vec<Method> {
    vec![Method::MoR, Method::RoS]
}
fn default_rs_trials() -> usize {
    DEFAULT_RS_TRIALS
}
fn default_delta() -> DeltaPolicy {
    DeltaPolicy::Minimize
}
fn default_targets() -> Vec<f64> {
    vec![0.05]
}

/// Everything that determines an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub topology: Topology,
    /// Ignored for datasets.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Target prevalence; `h = round(rho n)`. Ignored for datasets.
    #[serde(default)]
    pub rho: f64,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_samples")]
    pub samples_per_instance: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Method>,
    #[serde(default)]
    pub bounds: Vec<BoundFamily>,
    #[serde(default)]
    pub hidden: HiddenPlacement,
    #[serde(default)]
    pub zero_degree: ZeroDegreePolicy,
    /// Sampling realizations behind the empirical `R_S` pmf.
    #[serde(default = "default_rs_trials")]
    pub rs_pmf_trials: usize,
    #[serde(default = "default_delta")]
    pub delta: DeltaPolicy,
    #[serde(default)]
    pub mu_mode: MuMode,
    /// Tail-probability targets for the minimal-sample-size table.
    #[serde(default = "default_targets")]
    pub targets: Vec<f64>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: `n = 10^5`, 100 instances, 200 samples each.
    pub fn new(topology: Topology, rho: f64, sample_sizes: Vec<usize>) -> Self {
        ExperimentConfig {
            name: String::new(),
            topology,
            n: DESK_N,
            rho,
            sample_sizes,
            epsilons: default_epsilons(),
            instances: default_instances(),
            samples_per_instance: default_samples(),
            master_seed: 0,
            estimators: default_estimators(),
            bounds: Vec::new(),
            hidden: HiddenPlacement::default(),
            zero_degree: ZeroDegreePolicy::default(),
            rs_pmf_trials: DEFAULT_RS_TRIALS,
            delta: default_delta(),
            mu_mode: MuMode::default(),
            targets: default_targets(),
        }
    }

    pub fn is_dataset(&self) -> bool {
        matches!(self.topology, Topology::Dataset { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NsumError::invalid(msg));
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return bad("sample_sizes must be nonempty and positive".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return bad("epsilons must be nonempty and positive".into());
        }
        if self.instances == 0 || self.samples_per_instance == 0 || self.rs_pmf_trials == 0 {
            return bad("instances, samples_per_instance and rs_pmf_trials must be at least 1".into());
        }
        if self.estimators.is_empty() || self.estimators.contains(&Method::FS) {
            return bad("estimators must be a nonempty subset of MoR, RoS".into());
        }
        if self.targets.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return bad("targets must lie in (0, 1)".into());
        }
        if let DeltaPolicy::Fixed(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return bad(format!("delta must lie in (0, 1), got {d}"));
            }
        }
        if !self.is_dataset() {
            if self.n < 2 {
                return bad(format!("n must be at least 2, got {}", self.n));
            }
            if !(self.rho > 0.0 && self.rho <= 1.0) {
                return bad(format!("rho must lie in (0, 1], got {}", self.rho));
            }
            if let Some(&m) = self.sample_sizes.iter().find(|&&m| m > self.n) {
                return bad(format!("sample size {m} exceeds n = {}", self.n));
            }
        }
        for family in &self.bounds {
            match (family, &self.topology) {
                (BoundFamily::ErRos, Topology::ErdosRenyi { .. }) | (BoundFamily::SfRos, Topology::ScaleFree { .. }) => {}
                (BoundFamily::ErRos, _) => return bad("the er_ros bound needs an erdos_renyi topology".into()),
                (BoundFamily::SfRos, _) => return bad("the sf_ros bound needs a scale_free topology".into()),
                _ => {}
            }
        }
        Ok(())
    }

    /// `beta = 1 + epsilon` for every configured epsilon.
    pub fn betas(&self) -> Vec<f64> {
        self.epsilons.iter().map(|e| 1.0 + e).collect()
    }

    /// Hex prefix of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn degree_distribution(&self) -> Result<Option<DegreeDistribution>> {
        Ok(Some(match &self.topology {
            Topology::ErdosRenyi { mean_degree } => {
                DegreeDistribution::er_truncated(self.n, er_p_for_mean(self.n, *mean_degree))?
            }
            Topology::ScaleFree { gamma } => DegreeDistribution::scale_free(self.n, *gamma)?,
            Topology::Explicit { pmf } => DegreeDistribution::explicit(self.n, pmf)?,
            Topology::Dataset { .. } => return Ok(None),
        }))
    }
}

/// Estimate and combined error of one estimator on one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub estimate: f64,
    pub error: f64,
}

/// One surveyed sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub sample_size: usize,
    pub instance: usize,
    pub sample: usize,
    pub mor: Option<Outcome>,
    pub ros: Option<Outcome>,
}

impl TrialRow {
    pub fn outcome(&self, method: Method) -> Option<Outcome> {
        match method {
            Method::MoR => self.mor,
            Method::RoS => self.ros,
            Method::FS => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub sample_size: usize,
    /// Empirical pmf of `R_S`, present when the `ros_pmf` bound is requested.
    pub rs_pmf: Option<DiscretePmf>,
}

#[derive(Clone, Debug)]
pub struct TrialResults {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub n: usize,
    pub prevalence: Prevalence,
    pub grid: Vec<GridPoint>,
    /// Sorted by grid point, instance, sample.
    pub rows: Vec<TrialRow>,
}

impl TrialResults {
    /// Errors of `method` at sample size `m`, in row order.
    pub fn errors(&self, m: usize, method: Method) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.sample_size == m)
            .filter_map(|r| r.outcome(method))
            .map(|o| o.error)
            .collect()
    }

    pub fn bound_context(&self) -> BoundContext {
        BoundContext::new(&self.config, self.n, self.prevalence)
    }
}

enum Source {
    Random {
        degrees: DegreeDistribution,
        hidden: HiddenSpec,
    },
    Fixed(ArdTable),
}

fn hidden_size(config: &ExperimentConfig) -> usize {
    (config.rho * config.n as f64).round() as usize
}

/// Runs the whole grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TrialResults> {
    config.validate()?;
    match &config.topology {
        Topology::Dataset {
            edges,
            genres,
            genre,
            aliases,
        } => {
            let graph = load_edges(edges)?;
            let index = load_genres(genres, graph.n())?;
            let aliases = match aliases {
                Some(path) => GenreAliases::load(path)?,
                None => GenreAliases::default(),
            };
            let hidden = index.resolve(genre, &aliases)?;
            let instance = build_instance(&graph, hidden)?;
            run_on_table(config, ArdTable::new(&instance), instance.prevalence())
        }
        _ => {
            let degrees = config.degree_distribution()?.expect("synthetic topology");
            let h = hidden_size(config);
            let hidden = match config.hidden {
                HiddenPlacement::Uniform => HiddenSpec::Uniform(h),
                HiddenPlacement::First => HiddenSpec::FirstH(h),
            };
            let prevalence = Prevalence { hidden: h, n: config.n };
            run(config, Source::Random { degrees, hidden }, prevalence)
        }
    }
}

/// Runs the grid on one fixed network; `instances` then only separates the
/// sampling seed streams.
pub fn run_on_table(config: &ExperimentConfig, table: ArdTable, prevalence: Prevalence) -> Result<TrialResults> {
    if let Some(&m) = config.sample_sizes.iter().find(|&&m| m > table.n()) {
        return Err(NsumError::invalid(format!("sample size {m} exceeds n = {}", table.n())));
    }
    run(config, Source::Fixed(table), prevalence)
}

fn run(config: &ExperimentConfig, source: Source, prevalence: Prevalence) -> Result<TrialResults> {
    config.validate()?;
    let n = prevalence.n;
    let master = config.master_seed;
    let want_pmf = config.bounds.contains(&BoundFamily::RosPmf);
    let mut grid = Vec::with_capacity(config.sample_sizes.len());
    let mut rows = Vec::new();

    for (g, &m) in config.sample_sizes.iter().enumerate() {
        log::info!("grid point {g}: |S| = {m}, {} instances", config.instances);
        let per_instance: Vec<(Option<ArdTable>, Vec<TrialRow>)> = (0..config.instances)
            .into_par_iter()
            .map(|i| {
                let generated;
                let table = match &source {
                    Source::Random { degrees, hidden } => {
                        let seed = seed::derive(master, &[g as u64, i as u64]);
                        let instance = generate(&GeneratorConfig::new(degrees.clone(), hidden.clone(), seed))?;
                        generated = ArdTable::new(&instance);
                        &generated
                    }
                    Source::Fixed(table) => table,
                };
                let trials = (0..config.samples_per_instance)
                    .map(|s| run_sample(config, table, prevalence, g, i, s, m))
                    .collect::<Result<Vec<_>>>()?;
                let keep = match &source {
                    Source::Random { .. } if want_pmf => Some(table.clone()),
                    _ => None,
                };
                Ok((keep, trials))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut tables = Vec::new();
        for (table, trials) in per_instance {
            tables.extend(table);
            rows.extend(trials);
        }
        let rs_pmf = if want_pmf {
            let reach: Vec<&[u32]> = match &source {
                Source::Random { .. } => tables.iter().map(ArdTable::reach).collect(),
                Source::Fixed(table) => vec![table.reach()],
            };
            Some(rs_pmf_over(&reach, m, config.rs_pmf_trials, seed::derive(master, &[g as u64, stream::RS_PMF]))?)
        } else {
            None
        };
        grid.push(GridPoint { sample_size: m, rs_pmf });
    }

    Ok(TrialResults {
        config: config.clone(),
        config_hash: config.hash(),
        n,
        prevalence,
        grid,
        rows,
    })
}

fn run_sample(
    config: &ExperimentConfig,
    table: &ArdTable,
    prevalence: Prevalence,
    g: usize,
    i: usize,
    s: usize,
    m: usize,
) -> Result<TrialRow> {
    let mut rng = seed::rng(config.master_seed, &[g as u64, i as u64, s as u64, stream::SAMPLE]);
    let ids: Vec<NodeId> = index::sample(&mut rng, table.n(), m)
        .into_iter()
        .map(|v| v as NodeId)
        .collect();
    let totals = table.totals(&ids);
    let context = |e: NsumError| NsumError::DegenerateSample(format!("|S| = {m}, instance {i}, sample {s}: {e}"));
    let mut row = TrialRow {
        sample_size: m,
        instance: i,
        sample: s,
        mor: None,
        ros: None,
    };
    for &method in &config.estimators {
        let estimate = match method {
            Method::MoR => totals.mor(config.zero_degree),
            _ => totals.ros(config.zero_degree),
        }
        .map_err(context)?;
        let outcome = Outcome {
            estimate,
            error: prevalence.errors(estimate)?.combined,
        };
        match method {
            Method::MoR => row.mor = Some(outcome),
            _ => row.ros = Some(outcome),
        }
    }
    Ok(row)
}

/// Realization `r` samples from network `r % networks.len()`.
fn rs_pmf_over(networks: &[&[u32]], m: usize, trials: usize, seed: u64) -> Result<DiscretePmf> {
    let totals: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let reach = networks[r % networks.len()];
            let mut rng = seed::rng(seed, &[r as u64]);
            index::sample(&mut rng, reach.len(), m)
                .into_iter()
                .map(|v| reach[v] as u64)
                .sum()
        })
        .collect();
    let mut counts = BTreeMap::new();
    for t in totals {
        *counts.entry(t).or_insert(0u64) += 1;
    }
    DiscretePmf::from_counts(&counts)
}

/// Empirical `P[E > beta]` with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub p: f64,
    pub se: f64,
    pub trials: usize,
}

/// Fraction of `errors` strictly above `beta`; NaN with a warning when empty.
pub fn tail_estimate(errors: &[f64], beta: f64) -> TailEstimate {
    if errors.is_empty() {
        log::warn!("tail probability requested on an empty grid point");
        return TailEstimate {
            p: f64::NAN,
            se: f64::NAN,
            trials: 0,
        };
    }
    let count = errors.iter().filter(|&&e| e > beta).count();
    let p = count as f64 / errors.len() as f64;
    TailEstimate {
        p,
        se: (p * (1.0 - p) / errors.len() as f64).sqrt(),
        trials: errors.len(),
    }
}

/// `P[E > beta]` per grid point for one estimator.
pub fn tail_probability(results: &TrialResults, method: Method, beta: f64) -> Vec<(usize, TailEstimate)> {
    results
        .grid
        .iter()
        .map(|g| (g.sample_size, tail_estimate(&results.errors(g.sample_size, method), beta)))
        .collect()
}

/// Mean error and its standard error.
pub fn mean_error(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    if errors.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Evaluates bound families with the parameters of an experiment.
#[derive(Clone, Debug)]
pub struct BoundContext {
    pub n: usize,
    pub rho: f64,
    pub topology: Topology,
    pub delta: DeltaPolicy,
    pub mu_mode: MuMode,
}

impl BoundContext {
    pub fn new(config: &ExperimentConfig, n: usize, prevalence: Prevalence) -> Self {
        BoundContext {
            n,
            rho: prevalence.rho(),
            topology: config.topology.clone(),
            delta: config.delta,
            mu_mode: config.mu_mode,
        }
    }

    /// `rs_pmf` is required for [`BoundFamily::RosPmf`] only.
    pub fn evaluate(&self, family: BoundFamily, m: usize, beta: f64, rs_pmf: Option<&DiscretePmf>) -> Result<BoundResult> {
        let (n, m64) = (self.n as u64, m as u64);
        match (family, &self.topology) {
            (BoundFamily::Mor, _) => mor_bound(beta, m64, self.rho),
            (BoundFamily::RosSimple, _) => ros_bound_simple(beta, m64, self.rho),
            (BoundFamily::SampleSize, _) => sample_size_rule_bound(beta, m64, self.rho),
            (BoundFamily::RosPmf, _) => {
                let pmf = rs_pmf.ok_or_else(|| NsumError::invalid("ros_pmf bound needs an R_S pmf"))?;
                ros_bound_pmf(beta, self.rho, pmf)
            }
            (BoundFamily::ErRos, Topology::ErdosRenyi { mean_degree }) => {
                er_ros_bound(beta, self.rho, m64, n, er_p_for_mean(self.n, *mean_degree), self.delta)
            }
            (BoundFamily::SfRos, Topology::ScaleFree { gamma }) => {
                sf_ros_bound(beta, self.rho, m64, n, *gamma, self.delta, self.mu_mode)
            }
            (family, _) => Err(NsumError::invalid(format!("bound {family} does not apply to this topology"))),
        }
    }
}

/// One row of `tails.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    #[serde(rename = "S")]
    pub sample_size: usize,
    pub beta: f64,
    pub estimator: Method,
    pub p_emp: f64,
    pub se: f64,
    pub bound_family: Option<BoundFamily>,
    pub bound_clamped: Option<f64>,
}

/// Empirical tails for every grid point, beta and estimator, next to every
/// configured bound on that estimator.
pub fn tail_table(results: &TrialResults) -> Result<Vec<TailRow>> {
    let ctx = results.bound_context();
    let mut rows = Vec::new();
    for point in &results.grid {
        let m = point.sample_size;
        for beta in results.config.betas() {
            for &method in &results.config.estimators {
                let tail = tail_estimate(&results.errors(m, method), beta);
                let families: Vec<BoundFamily> = results
                    .config
                    .bounds
                    .iter()
                    .copied()
                    .filter(|f| f.estimator() == method)
                    .collect();
                let row = |family, bound| TailRow {
                    sample_size: m,
                    beta,
                    estimator: method,
                    p_emp: tail.p,
                    se: tail.se,
                    bound_family: family,
                    bound_clamped: bound,
                };
                if families.is_empty() {
                    rows.push(row(None, None));
                }
                for family in families {
                    let bound = ctx.evaluate(family, m, beta, point.rs_pmf.as_ref())?;
                    rows.push(row(Some(family), Some(bound.clamped)));
                }
            }
        }
    }
    Ok(rows)
}

/// `{min, q1, median, q3, max}` with type-7 (linear interpolation) quartiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Type-7 quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        return a;
    }
    a + (h - lo as f64) * (b - a)
}

pub fn boxplot_stats(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(FiveNumber {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// One row of `boxplot.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxplotRow {
    #[serde(rename = "S")]
    pub sample_size: usize,
    pub estimator: Method,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn boxplot_table(results: &TrialResults) -> Vec<BoxplotRow> {
    let mut rows = Vec::new();
    for point in &results.grid {
        for &method in &results.config.estimators {
            let errors = results.errors(point.sample_size, method);
            if let Some(f) = boxplot_stats(&errors) {
                rows.push(BoxplotRow {
                    sample_size: point.sample_size,
                    estimator: method,
                    min: f.min,
                    q1: f.q1,
                    median: f.median,
                    q3: f.q3,
                    max: f.max,
                    mean: mean_error(&errors).0,
                });
            }
        }
    }
    rows
}

/// What a minimal sample size is read from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailSource {
    Empirical(Method),
    Bound(BoundFamily),
}

impl std::fmt::Display for TailSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TailSource::Empirical(m) => write!(f, "empirical:{m}"),
            TailSource::Bound(b) => write!(f, "bound:{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MinSample {
    pub sample_size: usize,
    /// The empirical tail rose above the target again at a larger grid size.
    pub noisy: bool,
}

/// Smallest `m` whose bound is at most `target`.
///
/// The grid is scanned in increasing order; between the first passing grid
/// size and its predecessor the answer is refined by bisection, which relies
/// on the bound being nonincreasing in `m`. The `ros_pmf` family has no value
/// off the grid and is not refined.
pub fn min_sample_for_bound(
    ctx: &BoundContext,
    family: BoundFamily,
    beta: f64,
    target: f64,
    grid: &[(usize, Option<&DiscretePmf>)],
) -> Result<MinSample> {
    check_target(target)?;
    let mut grid = grid.to_vec();
    grid.sort_by_key(|g| g.0);
    let mut prev = 0usize;
    for &(m, pmf) in &grid {
        if ctx.evaluate(family, m, beta, pmf)?.raw <= target {
            let mut hi = m;
            if family != BoundFamily::RosPmf {
                let mut lo = prev;
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if ctx.evaluate(family, mid, beta, None)?.raw <= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            return Ok(MinSample {
                sample_size: hi,
                noisy: false,
            });
        }
        prev = m;
    }
    Err(NsumError::NotFound { largest_tried: prev })
}

/// First grid size whose empirical tail is at most `target`.
pub fn min_sample_empirical(results: &TrialResults, method: Method, beta: f64, target: f64) -> Result<MinSample> {
    check_target(target)?;
    let mut tails = tail_probability(results, method, beta);
    tails.sort_by_key(|t| t.0);
    let first = tails.iter().position(|(_, t)| t.p <= target);
    match first {
        Some(i) => Ok(MinSample {
            sample_size: tails[i].0,
            noisy: tails[i + 1..].iter().any(|(_, t)| t.p > target),
        }),
        None => Err(NsumError::NotFound {
            largest_tried: tails.last().map_or(0, |t| t.0),
        }),
    }
}

pub fn min_sample_for_target(results: &TrialResults, beta: f64, target: f64, source: TailSource) -> Result<MinSample> {
    match source {
        TailSource::Empirical(method) => min_sample_empirical(results, method, beta, target),
        TailSource::Bound(family) => {
            let grid: Vec<_> = results.grid.iter().map(|g| (g.sample_size, g.rs_pmf.as_ref())).collect();
            min_sample_for_bound(&results.bound_context(), family, beta, target, &grid)
        }
    }
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(NsumError::invalid(format!("target probability must lie in (0, 1), got {target}")));
    }
    Ok(())
}

/// One row of `minsize.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinSizeRow {
    pub beta: f64,
    pub target: f64,
    pub source: String,
    pub sample_size: Option<usize>,
    pub noisy: bool,
    pub largest_tried: Option<usize>,
}

pub fn minsize_table(results: &TrialResults) -> Result<Vec<MinSizeRow>> {
    let mut sources: Vec<TailSource> = results.config.estimators.iter().map(|&m| TailSource::Empirical(m)).collect();
    sources.extend(results.config.bounds.iter().map(|&b| TailSource::Bound(b)));
    let mut rows = Vec::new();
    for beta in results.config.betas() {
        for &target in &results.config.targets {
            for &source in &sources {
                let (sample_size, noisy, largest_tried) = match min_sample_for_target(results, beta, target, source) {
                    Ok(found) => (Some(found.sample_size), found.noisy, None),
                    Err(NsumError::NotFound { largest_tried }) => (None, false, Some(largest_tried)),
                    Err(e) => return Err(e),
                };
                rows.push(MinSizeRow {
                    beta,
                    target,
                    source: source.to_string(),
                    sample_size,
                    noisy,
                    largest_tried,
                });
            }
        }
    }
    Ok(rows)
}

/// Every configured bound at every grid size and beta.
pub fn bound_curves(results: &TrialResults) -> Result<Vec<BoundCurveRow>> {
    let ctx = results.bound_context();
    let mut rows = Vec::new();
    for &family in &results.config.bounds {
        for beta in results.config.betas() {
            for point in &results.grid {
                let b = ctx.evaluate(family, point.sample_size, beta, point.rs_pmf.as_ref())?;
                rows.push(BoundCurveRow {
                    m: point.sample_size as u64,
                    beta,
                    rho: ctx.rho,
                    bound_raw: b.raw,
                    bound_clamped: b.clamped,
                    family,
                });
            }
        }
    }
    Ok(rows)
}

/// Long-form trials: one line per (row, estimator).
pub fn write_trials_csv<W: Write>(results: &TrialResults, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["config_hash", "instance", "sample", "S", "estimator", "estimate", "error"])?;
    for row in &results.rows {
        for &method in &results.config.estimators {
            if let Some(o) = row.outcome(method) {
                csv.write_record([
                    results.config_hash.clone(),
                    row.instance.to_string(),
                    row.sample.to_string(),
                    row.sample_size.to_string(),
                    method.to_string(),
                    o.estimate.to_string(),
                    o.error.to_string(),
                ])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut csv = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes `trials.csv`, `tails.csv`, `boxplot.csv`, `minsize.csv` and, when
/// bounds are configured, `bounds.csv` into `dir`.
pub fn write_outputs(results: &TrialResults, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("trials.csv");
    write_trials_csv(results, BufWriter::new(File::create(&path)?))?;
    written.push(path);

    let path = dir.join("tails.csv");
    write_rows(&tail_table(results)?, &path)?;
    written.push(path);

    let path = dir.join("boxplot.csv");
    write_rows(&boxplot_table(results), &path)?;
    written.push(path);

    let path = dir.join("minsize.csv");
    write_rows(&minsize_table(results)?, &path)?;
    written.push(path);

    if !results.config.bounds.is_empty() {
        let path = dir.join("bounds.csv");
        crate::bounds::write_bound_curve_csv(&bound_curves(results)?, BufWriter::new(File::create(&path)?))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::sample_size;

    fn small_er() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Topology::ErdosRenyi { mean_degree: 30.0 }, 0.05, vec![100, 1000]);
        c.n = 10_000;
        c.instances = 10;
        c.samples_per_instance = 20;
        c.master_seed = 42;
        c
    }

    #[test]
    fn five_numbers() {
        let f = boxplot_stats(&[3.0, 1.0, 5.0, 2.0, 4.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let f = boxplot_stats(&[2.5; 7]).unwrap();
        assert!([f.min, f.q1, f.median, f.q3, f.max].iter().all(|&x| x == 2.5));
        let f = boxplot_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((f.q1, f.median, f.q3), (1.75, 2.5, 3.25));
        let f = boxplot_stats(&[-3.0, -1.0, 0.0, 1.0, 3.0]).unwrap();
        assert_eq!(f.median, 0.0);
        assert_eq!(f.q1, -f.q3);
        let f = boxplot_stats(&[1.0, f64::INFINITY, f64::INFINITY]).unwrap();
        assert_eq!(f.q3, f64::INFINITY);
        assert!(boxplot_stats(&[]).is_none());
    }

    #[test]
    fn tails_by_counting() {
        assert_eq!(tail_estimate(&[1.0; 10], 1.05).p, 0.0);
        let t = tail_estimate(&[1.0, 1.1, 1.2, 1.0], 1.05);
        assert_eq!(t.p, 0.5);
        assert_eq!(t.se, 0.25);
        assert!(tail_estimate(&[], 1.05).p.is_nan());
    }

    #[test]
    fn row_count_and_range() {
        let r = run_experiment(&small_er()).unwrap();
        assert_eq!(r.rows.len(), 10 * 20 * 2);
        assert!(r.rows.iter().all(|row| row.mor.unwrap().error >= 1.0 && row.ros.unwrap().error >= 1.0));
        assert_eq!(r.prevalence, Prevalence { hidden: 500, n: 10_000 });
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let config = small_er();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let csv = |pool: &rayon::ThreadPool| {
            let r = pool.install(|| run_experiment(&config)).unwrap();
            let mut buf = Vec::new();
            write_trials_csv(&r, &mut buf).unwrap();
            buf
        };
        let a = csv(&serial);
        assert_eq!(a, csv(&parallel));
        let mut other = config.clone();
        other.master_seed = 43;
        let b = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap().install(|| run_experiment(&other)).unwrap();
        let mut buf = Vec::new();
        write_trials_csv(&b, &mut buf).unwrap();
        assert_ne!(a, buf);
    }

    #[test]
    fn config_validation() {
        let mut c = small_er();
        c.sample_sizes.clear();
        assert!(c.validate().is_err());
        let mut c = small_er();
        c.instances = 0;
        assert!(c.validate().is_err());
        let mut c = small_er();
        c.sample_sizes = vec![20_000];
        assert!(c.validate().is_err());
        let mut c = small_er();
        c.bounds = vec![BoundFamily::SfRos];
        assert!(c.validate().is_err());
        let mut c = small_er();
        c.estimators = vec![Method::FS];
        assert!(c.validate().is_err());
    }

    #[test]
    fn bound_bisection_reproduces_sample_size() {
        let mut c = ExperimentConfig::new(Topology::ErdosRenyi { mean_degree: 30.0 }, 0.05, vec![1]);
        c.n = FULL_SCALE_N;
        let ctx = BoundContext::new(&c, FULL_SCALE_N, Prevalence { hidden: 50_000, n: FULL_SCALE_N });
        let target = (FULL_SCALE_N as f64).powf(-0.5);
        let grid: Vec<_> = [1_000, 10_000, 100_000, 1_000_000].iter().map(|&m| (m, None)).collect();
        let got = min_sample_for_bound(&ctx, BoundFamily::SampleSize, 1.05, target, &grid).unwrap();
        assert_eq!(got.sample_size as u64, sample_size(1_000_000, 0.05, 1.05, 0.5).unwrap());

        // F itself crosses a little earlier than the per-term rule.
        let mor = min_sample_for_bound(&ctx, BoundFamily::Mor, 1.05, target, &grid).unwrap();
        assert!(mor.sample_size < got.sample_size);
        assert!(ctx.evaluate(BoundFamily::Mor, mor.sample_size, 1.05, None).unwrap().raw <= target);
        assert!(ctx.evaluate(BoundFamily::Mor, mor.sample_size - 1, 1.05, None).unwrap().raw > target);

        let short: Vec<_> = [10, 100].iter().map(|&m| (m, None)).collect();
        assert!(matches!(
            min_sample_for_bound(&ctx, BoundFamily::Mor, 1.05, target, &short),
            Err(NsumError::NotFound { largest_tried: 100 })
        ));
    }

    #[test]
    fn empirical_min_sample_flags_noise() {
        let mut r = run_experiment(&small_er()).unwrap();
        // Rewrite the errors so the tail is 0 at |S|=100 and 1 at |S|=1000.
        for row in &mut r.rows {
            let e = if row.sample_size == 100 { 1.0 } else { 2.0 };
            row.mor = Some(Outcome { estimate: 0.0, error: e });
        }
        let got = min_sample_empirical(&r, Method::MoR, 1.05, 0.05).unwrap();
        assert_eq!(got, MinSample { sample_size: 100, noisy: true });
    }

    #[test]
    fn outputs_are_written() {
        let mut c = small_er();
        c.bounds = vec![BoundFamily::Mor, BoundFamily::RosPmf, BoundFamily::ErRos];
        c.rs_pmf_trials = 500;
        let r = run_experiment(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let trials = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
        assert_eq!(trials.lines().count(), 1 + 10 * 20 * 2 * 2);
        assert!(trials.starts_with("config_hash,instance,sample,S,estimator,estimate,error\n"));
        let tails = fs::read_to_string(dir.path().join("tails.csv")).unwrap();
        assert!(tails.starts_with("S,beta,estimator,p_emp,se,bound_family,bound_clamped\n"));
        // 2 grid points x (MoR: mor, RoS: ros_pmf + er_ros)
        assert_eq!(tails.lines().count(), 1 + 2 * 3);
        let pmf = r.grid[1].rs_pmf.as_ref().unwrap();
        assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
        assert!((pmf.mean() / 1000.0 - 30.0).abs() < 0.5);
    }

    #[test]
    fn serde_shape_and_hash() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"sample_sizes":[100,1000],"rho":0.05,"n":10000,"bounds":["mor","er_ros"],
                "delta":{"fixed":0.1},"topology":{"kind":"erdos_renyi","mean_degree":30.0}}"#,
        )
        .unwrap();
        assert_eq!(c.topology, Topology::ErdosRenyi { mean_degree: 30.0 });
        assert_eq!(c.delta, DeltaPolicy::Fixed(0.1));
        assert_eq!(c.instances, 100);
        assert_eq!(c.hash().len(), 16);
        assert_eq!(c.hash(), c.clone().hash());
        let mut d = c.clone();
        d.master_seed = 1;
        assert_ne!(c.hash(), d.hash());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sample_sizes":[1],"bogus":1,"topology":{"kind":"scale_free","gamma":2.5}}"#).is_err());
    }
}
