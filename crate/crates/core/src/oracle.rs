//! Exact enumeration of tiny random networks.
//!
//! Every outcome of the two-step construction (degree, then a uniform
//! in-neighbour set) is listed with its probability, and the expectation and
//! negative-dependence properties of `Y_v = C_v / R_v` and of the
//! per-neighbour indicators `X_vj` are evaluated exactly. The surveyed nodes
//! are a uniform random tuple of distinct nodes, so every expectation below
//! also averages over all such tuples.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NsumError, Result};

/// Largest model enumerated.
pub const MAX_NODES: usize = 8;
/// Largest number of raw outcomes enumerated.
pub const OUTCOME_CAP: u128 = 10_000_000;
/// Slack allowed on every identity and inequality.
pub const TOLERANCE: f64 = 1e-12;
/// Largest surveyed subset examined for product inequalities.
pub const MAX_SUBSET: usize = 3;

const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// A random-network model small enough to enumerate.
///
/// Hidden nodes are `0..h`; the checks average over node labels, so the
/// placement does not matter.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyModel {
    n: usize,
    pmf: Vec<(usize, f64)>,
    h: usize,
}

impl TinyModel {
    pub fn new(n: usize, pmf: &[(usize, f64)], h: usize) -> Result<Self> {
        if !(2..=MAX_NODES).contains(&n) {
            return Err(NsumError::invalid(format!("tiny models need 2 <= n <= {MAX_NODES}, got {n}")));
        }
        if pmf.is_empty() || pmf.len() > 3 {
            return Err(NsumError::invalid("degree pmf must have 1 to 3 support points"));
        }
        if h > n {
            return Err(NsumError::invalid(format!("h = {h} exceeds n = {n}")));
        }
        let mut sorted = pmf.to_vec();
        sorted.sort_by_key(|&(k, _)| k);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(NsumError::invalid(format!("degree {} listed twice", w[0].0)));
            }
        }
        for &(k, p) in &sorted {
            if k == 0 || k >= n {
                return Err(NsumError::invalid(format!("degree {k} outside 1..={}", n - 1)));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(NsumError::invalid(format!("probability {p} at degree {k}")));
            }
        }
        let total: f64 = sorted.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(NsumError::invalid(format!("pmf sums to {total}, not 1")));
        }
        Ok(TinyModel { n, pmf: sorted, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn pmf(&self) -> &[(usize, f64)] {
        &self.pmf
    }

    pub fn is_hidden(&self, v: usize) -> bool {
        v < self.h
    }

    /// Raw outcome count `prod_v sum_k C(n-1, k)` over the pmf support.
    pub fn outcome_count(&self) -> u128 {
        let per_node: u128 = self.pmf.iter().map(|&(k, _)| binomial(self.n - 1, k)).sum();
        per_node.pow(self.n as u32)
    }

    /// Short label such as `n=4 h=2 pmf{1:0.5,2:0.5}`.
    pub fn label(&self) -> String {
        let pmf: Vec<String> = self.pmf.iter().map(|(k, p)| format!("{k}:{p}")).collect();
        format!("n={} h={} pmf{{{}}}", self.n, self.h, pmf.join(","))
    }
}

impl fmt::Display for TinyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exact law of the ARD vector `((R_0, C_0), .., (R_{n-1}, C_{n-1}))`.
#[derive(Clone, Debug)]
pub struct ArdDistribution {
    n: usize,
    raw_outcomes: u128,
    /// Distinct ARD vectors, sorted, with their total probability.
    outcomes: Vec<(Vec<(u8, u8)>, f64)>,
}

impl ArdDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of (degree vector, in-neighbour-set vector) outcomes enumerated.
    pub fn raw_outcomes(&self) -> u128 {
        self.raw_outcomes
    }

    pub fn outcomes(&self) -> &[(Vec<(u8, u8)>, f64)] {
        &self.outcomes
    }

    pub fn total_mass(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    /// `E[g(ARD)]`.
    pub fn expect(&self, g: impl Fn(&[(u8, u8)]) -> f64) -> f64 {
        self.outcomes.iter().map(|(ard, p)| p * g(ard)).sum()
    }
}

/// One node's options: `(R, C, probability)` for every in-neighbour set.
fn node_options(model: &TinyModel, v: usize) -> Vec<(u8, u8, f64)> {
    let others: Vec<usize> = (0..model.n).filter(|&u| u != v).collect();
    let mut options = Vec::new();
    for &(k, p) in &model.pmf {
        let weight = p / binomial(model.n - 1, k) as f64;
        for mask in 0u32..(1 << others.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let hidden = others
                .iter()
                .enumerate()
                .filter(|&(i, &u)| mask >> i & 1 == 1 && model.is_hidden(u))
                .count();
            options.push((k as u8, hidden as u8, weight));
        }
    }
    options
}

fn pack(ard: &[(u8, u8)]) -> u64 {
    ard.iter().fold(0u64, |acc, &(r, c)| acc << 8 | (r as u64) << 4 | c as u64)
}

fn unpack(mut key: u64, n: usize) -> Vec<(u8, u8)> {
    let mut ard = vec![(0, 0); n];
    for slot in ard.iter_mut().rev() {
        *slot = ((key >> 4 & 0xf) as u8, (key & 0xf) as u8);
        key >>= 8;
    }
    ard
}

/// Lists every outcome of the construction and aggregates by ARD vector.
pub fn enumerate_exact(model: &TinyModel) -> Result<ArdDistribution> {
    let raw = model.outcome_count();
    if raw > OUTCOME_CAP {
        return Err(NsumError::TooLarge {
            states: raw,
            cap: OUTCOME_CAP,
        });
    }
    let n = model.n;
    let options: Vec<_> = (0..n).map(|v| node_options(model, v)).collect();

    // Outer loop over node 0's choice; the rest by odometer.
    let partials: Vec<HashMap<u64, f64>> = options[0]
        .par_iter()
        .map(|&first| {
            let mut acc = HashMap::new();
            let mut idx = vec![0usize; n];
            let mut ard = vec![(first.0, first.1); n];
            loop {
                let mut p = first.2;
                for v in 1..n {
                    let (r, c, w) = options[v][idx[v]];
                    ard[v] = (r, c);
                    p *= w;
                }
                *acc.entry(pack(&ard)).or_insert(0.0) += p;
                // advance the odometer over nodes 1..n
                let mut v = n - 1;
                loop {
                    if v == 0 {
                        return acc;
                    }
                    idx[v] += 1;
                    if idx[v] < options[v].len() {
                        break;
                    }
                    idx[v] = 0;
                    v -= 1;
                }
            }
        })
        .collect();

    // Ordered maps keep the summation order, and so the result, reproducible.
    let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
    for part in partials {
        let part: BTreeMap<u64, f64> = part.into_iter().collect();
        for (key, p) in part {
            *merged.entry(key).or_insert(0.0) += p;
        }
    }
    let outcomes: Vec<_> = merged.into_iter().map(|(k, p)| (unpack(k, n), p)).collect();
    Ok(ArdDistribution {
        n,
        raw_outcomes: raw,
        outcomes,
    })
}

/// One line of an oracle report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub model: String,
    pub check: String,
    /// Exact value from enumeration.
    pub observed: f64,
    /// Value it must equal, or bound it must not exceed.
    pub reference: f64,
    pub passed: bool,
    pub note: String,
}

/// Kinds of check, used for the table's `check` column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    TotalMass,
    MeanY,
    MeanXHidden,
    MeanXVisible,
    YProducts,
    YComplementProducts,
    XProducts,
    XComplementProducts,
    Dependence,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::TotalMass => "total_mass",
            CheckKind::MeanY => "mean_y",
            CheckKind::MeanXHidden => "mean_x_given_hidden",
            CheckKind::MeanXVisible => "mean_x_given_not_hidden",
            CheckKind::YProducts => "y_products",
            CheckKind::YComplementProducts => "y_complement_products",
            CheckKind::XProducts => "x_products",
            CheckKind::XComplementProducts => "x_complement_products",
            CheckKind::Dependence => "dependence_example",
        }
    }
}

fn equality_row(model: &TinyModel, kind: CheckKind, observed: f64, reference: f64, note: String) -> CheckRow {
    CheckRow {
        model: model.label(),
        check: kind.name().to_string(),
        observed,
        reference,
        passed: (observed - reference).abs() <= TOLERANCE,
        note,
    }
}

fn upper_row(model: &TinyModel, kind: CheckKind, observed: f64, reference: f64, note: String) -> CheckRow {
    CheckRow {
        model: model.label(),
        check: kind.name().to_string(),
        observed,
        reference,
        passed: observed <= reference + TOLERANCE,
        note,
    }
}

fn y(r: u8, c: u8) -> f64 {
    c as f64 / r as f64
}

/// `E[Y_v]` for `v` uniform, and `E[X_vj]` conditional on membership.
///
/// `E[X_vj | v]` equals `E[C_v / R_v]` because the in-neighbour order is
/// uniform given the set. The conditional rows are checked node by node and
/// report the worst deviation.
pub fn check_expectation_y(model: &TinyModel, dist: &ArdDistribution) -> Vec<CheckRow> {
    let (n, h) = (model.n as f64, model.h as f64);
    let per_node: Vec<f64> = (0..model.n)
        .map(|v| dist.expect(|ard| y(ard[v].0, ard[v].1)))
        .collect();
    let mut rows = vec![
        equality_row(model, CheckKind::TotalMass, dist.total_mass(), 1.0, String::new()),
        equality_row(model, CheckKind::MeanY, per_node.iter().sum::<f64>() / n, h / n, String::new()),
    ];
    let worst = |hidden: bool, target: f64| {
        (0..model.n)
            .filter(|&v| model.is_hidden(v) == hidden)
            .map(|v| per_node[v])
            .max_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
    };
    let target = (h - 1.0) / (n - 1.0);
    match worst(true, target) {
        Some(obs) => rows.push(equality_row(model, CheckKind::MeanXHidden, obs, target, String::new())),
        None => rows.push(skipped(model, CheckKind::MeanXHidden, "no hidden node")),
    }
    let target = h / (n - 1.0);
    match worst(false, target) {
        Some(obs) => rows.push(equality_row(model, CheckKind::MeanXVisible, obs, target, String::new())),
        None => rows.push(skipped(model, CheckKind::MeanXVisible, "every node hidden")),
    }
    rows
}

fn skipped(model: &TinyModel, kind: CheckKind, why: &str) -> CheckRow {
    CheckRow {
        model: model.label(),
        check: kind.name().to_string(),
        observed: f64::NAN,
        reference: f64::NAN,
        passed: true,
        note: format!("not applicable: {why}"),
    }
}

/// Ordered tuples of `s` distinct nodes.
fn tuples(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(s);
    fn rec(n: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if !cur.contains(&v) {
                cur.push(v);
                rec(n, s, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, s, &mut cur, &mut out);
    out
}

/// All vectors in `{1, 2}^s`.
fn multiplicities(s: usize) -> Vec<Vec<u8>> {
    (0..1u32 << s)
        .map(|mask| (0..s).map(|i| 1 + (mask >> i & 1) as u8).collect())
        .collect()
}

/// Probability that the first `b` in-neighbours (in uniform order) are all
/// counted, when `c` of the `r` in-neighbours are.
fn falling_ratio(r: u8, c: u8, b: u8) -> f64 {
    (0..b).map(|j| (c as f64 - j as f64).max(0.0) / (r - j) as f64).product()
}

/// Product inequalities for `Y_v`, `1 - Y_v`, and for products of `X_vj`
/// over the first `b_v in {1, 2}` in-neighbours of each surveyed node (and
/// their complements), for every subset size `1..=max_subset`.
///
/// The `X` products are conditional on `R_v >= b_v` for every surveyed node.
/// Each row reports the largest left-hand side over all multiplicity vectors.
/// Statistic of one ARD outcome and one respondent tuple.
type TupleStat = dyn Fn(&[(u8, u8)], &[usize]) -> f64;

pub fn check_negative_correlation(model: &TinyModel, dist: &ArdDistribution, max_subset: usize) -> Vec<CheckRow> {
    let n = model.n;
    let rho = model.h as f64 / n as f64;
    let mut rows = Vec::new();
    for s in 1..=max_subset.min(n) {
        let tuples = tuples(n, s);
        let count = tuples.len() as f64;
        let avg = |g: &TupleStat| -> f64 {
            tuples.iter().map(|t| dist.expect(|ard| g(ard, t))).sum::<f64>() / count
        };
        let note = format!("|S0|={s}");

        let obs = avg(&|ard, t| t.iter().map(|&v| y(ard[v].0, ard[v].1)).product());
        rows.push(upper_row(model, CheckKind::YProducts, obs, rho.powi(s as i32), note.clone()));
        let obs = avg(&|ard, t| t.iter().map(|&v| 1.0 - y(ard[v].0, ard[v].1)).product());
        rows.push(upper_row(model, CheckKind::YComplementProducts, obs, (1.0 - rho).powi(s as i32), note.clone()));

        for complement in [false, true] {
            let kind = if complement { CheckKind::XComplementProducts } else { CheckKind::XProducts };
            let base = if complement { 1.0 - rho } else { rho };
            // (slack, observed, reference, b) of the worst multiplicity vector
            let mut worst: Option<(f64, f64, f64, Vec<u8>)> = None;
            for b in multiplicities(s) {
                let mut joint = 0.0;
                let mut support = 0.0;
                for t in &tuples {
                    for (ard, p) in dist.outcomes() {
                        if t.iter().zip(&b).any(|(&v, &bv)| ard[v].0 < bv) {
                            continue;
                        }
                        support += p;
                        joint += p * t
                            .iter()
                            .zip(&b)
                            .map(|(&v, &bv)| {
                                let (r, c) = ard[v];
                                falling_ratio(r, if complement { r - c } else { c }, bv)
                            })
                            .product::<f64>();
                    }
                }
                if support == 0.0 {
                    continue;
                }
                let obs = joint / support;
                let reference = base.powi(b.iter().map(|&x| x as i32).sum());
                if worst.as_ref().is_none_or(|w| obs - reference > w.0) {
                    worst = Some((obs - reference, obs, reference, b));
                }
            }
            match worst {
                Some((_, obs, reference, b)) => {
                    rows.push(upper_row(model, kind, obs, reference, format!("{note} b={b:?}")))
                }
                None => rows.push(skipped(model, kind, "no outcome with enough in-neighbours")),
            }
        }
    }
    rows
}

/// With one hidden node and a random ordered pair `(v1, v2)`:
/// `P[Y_v2 > 0 | Y_v1 > 0] < P[Y_v2 > 0]`, strictly.
pub fn check_dependence_example(model: &TinyModel, dist: &ArdDistribution) -> CheckRow {
    if model.h != 1 {
        return skipped(model, CheckKind::Dependence, "needs exactly one hidden node");
    }
    let pairs = tuples(model.n, 2);
    let count = pairs.len() as f64;
    let mut first = 0.0;
    let mut both = 0.0;
    let mut second = 0.0;
    for t in &pairs {
        let (a, b) = (t[0], t[1]);
        first += dist.expect(|ard| (ard[a].1 > 0) as u8 as f64);
        second += dist.expect(|ard| (ard[b].1 > 0) as u8 as f64);
        both += dist.expect(|ard| (ard[a].1 > 0 && ard[b].1 > 0) as u8 as f64);
    }
    let (first, both, second) = (first / count, both / count, second / count);
    if first == 0.0 {
        return skipped(model, CheckKind::Dependence, "P[Y_v1 > 0] = 0");
    }
    let conditional = both / first;
    CheckRow {
        model: model.label(),
        check: CheckKind::Dependence.name().to_string(),
        observed: conditional,
        reference: second,
        passed: conditional < second,
        note: "strict".to_string(),
    }
}

/// All checks for one model.
pub fn check_model(model: &TinyModel) -> Result<Vec<CheckRow>> {
    let dist = enumerate_exact(model)?;
    let mut rows = check_expectation_y(model, &dist);
    rows.extend(check_negative_correlation(model, &dist, MAX_SUBSET));
    rows.push(check_dependence_example(model, &dist));
    Ok(rows)
}

/// Models with `n in 2..=6`, every `h in 0..=n`, every point-mass degree,
/// and the two-point pmfs `{1, n-1}`, `{n-2, n-1}` and `{1, 2}`; models over
/// [`OUTCOME_CAP`] are left out.
pub fn default_corpus() -> Vec<TinyModel> {
    let mut models = Vec::new();
    for n in 2..=6usize {
        let mut pmfs: Vec<Vec<(usize, f64)>> = (1..n).map(|k| vec![(k, 1.0)]).collect();
        if n >= 3 {
            pmfs.push(vec![(1, 0.5), (n - 1, 0.5)]);
        }
        if n >= 4 {
            pmfs.push(vec![(n - 2, 0.25), (n - 1, 0.75)]);
        }
        if n >= 4 {
            pmfs.push(vec![(1, 0.3), (2, 0.7)]);
        }
        for pmf in &pmfs {
            for h in 0..=n {
                let model = TinyModel::new(n, pmf, h).expect("corpus models are valid");
                if model.outcome_count() <= OUTCOME_CAP {
                    models.push(model);
                }
            }
        }
    }
    models
}

/// Runs [`check_model`] over a corpus.
pub fn run_corpus(models: &[TinyModel]) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for model in models {
        rows.extend(check_model(model)?);
    }
    Ok(rows)
}

/// Fixed-width pass/fail table.
pub fn format_table(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:<24}  {:>20}  {:>20}  {:<4}  {}\n",
        "model", "check", "observed", "reference", "ok", "note"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:<24}  {:>20.15}  {:>20.15}  {:<4}  {}\n",
            r.model,
            r.check,
            r.observed,
            r.reference,
            if r.passed { "PASS" } else { "FAIL" },
            r.note
        ));
    }
    out
}
