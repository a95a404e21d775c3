//! Closed-form tail bounds and sample-size rules for the MoR and RoS
//! estimators.
//!
//! Everything is evaluated in log space. Raw values above one are kept
//! (they show where a bound is vacuous) and a clamped copy is reported next
//! to them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::degree::DegreeDistribution;
use crate::error::{NsumError, Result};
use crate::model::{Instance, Method};
use crate::pmf::DiscretePmf;

/// Grid step used when minimizing over the Chernoff slack.
pub const DELTA_GRID_STEP: f64 = 0.001;

const PMF_TOLERANCE: f64 = 1e-9;

/// A bound value plus the inputs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub raw: f64,
    pub clamped: f64,
    pub inputs: BoundInputs,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl BoundResult {
    fn new(raw: f64, inputs: BoundInputs) -> Self {
        BoundResult {
            raw,
            clamped: raw.min(1.0),
            inputs,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 1.0) {
        return Err(NsumError::invalid(format!("beta must exceed 1, got {beta}")));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(NsumError::invalid(format!("rho must lie in (0, 1], got {rho}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(NsumError::invalid(format!("{name} must be finite and nonnegative, got {x}")));
    }
    Ok(())
}

/// Log of the upper-tail factor, `(beta - 1) - beta ln beta`. Negative for beta > 1.
pub fn upper_exponent(beta: f64) -> f64 {
    (beta - 1.0) - beta * beta.ln()
}

/// Log of the lower-tail factor, `(1/beta - 1) + ln(beta)/beta`. Negative for beta > 1.
pub fn lower_exponent(beta: f64) -> f64 {
    (1.0 / beta - 1.0) + beta.ln() / beta
}

/// `F(beta, y)`: the two-sided multiplicative Chernoff expression.
pub fn f_bound(beta: f64, y: f64) -> Result<f64> {
    check_beta(beta)?;
    check_nonneg("y", y)?;
    Ok((y * upper_exponent(beta)).exp() + (y * lower_exponent(beta)).exp())
}

/// Two-sided tail `P[Z outside [mu/beta, beta mu]] <= F(beta, mu)` for sums
/// of `[0, 1]` variables with negative cylinder dependence.
pub fn chernoff_two_sided(beta: f64, mu: f64) -> Result<BoundResult> {
    Ok(BoundResult::new(
        f_bound(beta, mu)?,
        BoundInputs {
            beta: Some(beta),
            mu: Some(mu),
            ..Default::default()
        },
    ))
}

/// Lower tail `P[Z <= (1 - delta) mu] <= (e^-delta / (1-delta)^(1-delta))^mu`.
pub fn chernoff_lower(delta: f64, mu: f64) -> Result<BoundResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(NsumError::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_nonneg("mu", mu)?;
    let raw = (mu * (-delta - (1.0 - delta) * (-delta).ln_1p())).exp();
    Ok(BoundResult::new(
        raw,
        BoundInputs {
            mu: Some(mu),
            delta: Some(delta),
            ..Default::default()
        },
    ))
}

fn check_sample(m: u64) -> Result<()> {
    if m == 0 {
        return Err(NsumError::invalid("sample size must be at least 1"));
    }
    Ok(())
}

/// `P[E_MoR > beta] <= F(beta, m rho)` on random networks.
pub fn mor_bound(beta: f64, m: u64, rho: f64) -> Result<BoundResult> {
    check_sample(m)?;
    check_rho(rho)?;
    let m_rho = m as f64 * rho;
    Ok(BoundResult::new(
        f_bound(beta, m_rho)?,
        BoundInputs {
            beta: Some(beta),
            m_rho: Some(m_rho),
            ..Default::default()
        },
    ))
}

/// The RoS bound that uses only `R_S >= m`; same expression as [`mor_bound`].
pub fn ros_bound_simple(beta: f64, m: u64, rho: f64) -> Result<BoundResult> {
    mor_bound(beta, m, rho)
}

/// MoR bound on truncated Erdős–Rényi networks; identical to [`mor_bound`].
pub fn mor_er_bound(beta: f64, m: u64, rho: f64) -> Result<BoundResult> {
    mor_bound(beta, m, rho)
}

/// `sum_R F(beta, R rho) P[R_S = R]`.
pub fn ros_bound_pmf(beta: f64, rho: f64, rs_pmf: &DiscretePmf) -> Result<BoundResult> {
    check_beta(beta)?;
    check_rho(rho)?;
    rs_pmf.check_normalized(PMF_TOLERANCE)?;
    let (up, low) = (upper_exponent(beta), lower_exponent(beta));
    let raw = rs_pmf
        .entries()
        .iter()
        .map(|&(r, p)| {
            let y = r as f64 * rho;
            p * ((y * up).exp() + (y * low).exp())
        })
        .sum();
    Ok(BoundResult::new(
        raw,
        BoundInputs {
            beta: Some(beta),
            mu: Some(rs_pmf.mean()),
            ..Default::default()
        },
    ))
}

/// Smallest `m` with `m >= (ln 2 + alpha ln n) / (rho (1 - (ln beta + 1)/beta))`,
/// which drives both tail terms of `F(beta, m rho)` below `1 / (2 n^alpha)`.
pub fn sample_size(n: u64, rho: f64, beta: f64, alpha: f64) -> Result<u64> {
    check_beta(beta)?;
    check_rho(rho)?;
    if n < 2 {
        return Err(NsumError::invalid("sample_size needs n >= 2"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(NsumError::invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(sample_size_real(n, rho, beta, alpha).ceil() as u64)
}

/// Unrounded value of the sample-size formula.
pub fn sample_size_real(n: u64, rho: f64, beta: f64, alpha: f64) -> f64 {
    let numerator = std::f64::consts::LN_2 + alpha * (n as f64).ln();
    let denominator = rho * (1.0 - (beta.ln() + 1.0) / beta);
    numerator / denominator
}

/// The per-term criterion behind [`sample_size`]: `2 * max` of the two tail
/// terms of `F(beta, m rho)`. Its smallest `m` below `1/n^alpha` is exactly
/// the sample-size rule.
pub fn sample_size_rule_bound(beta: f64, m: u64, rho: f64) -> Result<BoundResult> {
    check_beta(beta)?;
    check_sample(m)?;
    check_rho(rho)?;
    let m_rho = m as f64 * rho;
    let worst = upper_exponent(beta).max(lower_exponent(beta));
    Ok(BoundResult::new(
        2.0 * (m_rho * worst).exp(),
        BoundInputs {
            beta: Some(beta),
            m_rho: Some(m_rho),
            ..Default::default()
        },
    ))
}

/// How the Chernoff slack `delta` of the degree-concentration bounds is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaPolicy {
    Fixed(f64),
    /// Grid search over `{0.001, .., 0.999}` for the smallest bound.
    Minimize,
}

/// `P[R_S <= (1-delta) mu] + F(beta, (1-delta) mu rho)`, where `mu` lower
/// bounds the expected degree total of the sample.
pub fn ros_bound_degree_mean(beta: f64, rho: f64, mu: f64, policy: DeltaPolicy) -> Result<BoundResult> {
    check_beta(beta)?;
    check_rho(rho)?;
    check_nonneg("mu", mu)?;
    let eval = |delta: f64| -> Result<f64> {
        Ok(chernoff_lower(delta, mu)?.raw + f_bound(beta, (1.0 - delta) * mu * rho)?)
    };
    let (delta, raw) = match policy {
        DeltaPolicy::Fixed(delta) => (delta, eval(delta)?),
        DeltaPolicy::Minimize => {
            let steps = (1.0 / DELTA_GRID_STEP).round() as usize;
            let mut best = (f64::NAN, f64::INFINITY);
            for i in 1..steps {
                let delta = i as f64 * DELTA_GRID_STEP;
                let raw = eval(delta)?;
                if raw < best.1 {
                    best = (delta, raw);
                }
            }
            best
        }
    };
    Ok(BoundResult::new(
        raw,
        BoundInputs {
            beta: Some(beta),
            mu: Some(mu),
            delta: Some(delta),
            m_rho: None,
        },
    ))
}

/// RoS bound on truncated Erdős–Rényi networks with `mu = m p (n-1)`.
pub fn er_ros_bound(
    beta: f64,
    rho: f64,
    m: u64,
    n: u64,
    p: f64,
    policy: DeltaPolicy,
) -> Result<BoundResult> {
    check_sample(m)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(NsumError::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if n < 2 {
        return Err(NsumError::invalid("n must be at least 2"));
    }
    let mu = m as f64 * p * (n - 1) as f64;
    ros_bound_degree_mean(beta, rho, mu, policy)
}

/// Which mean degree the scale-free RoS bound plugs in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    /// Continuous approximation
    /// `m (1-gamma)/(2-gamma) (1-(n-1)^(2-gamma)) / (1-(n-1)^(1-gamma))`.
    #[default]
    IntegralApprox,
    /// `m` times the exact mean of the discrete power law.
    ExactPmfMean,
}

/// Expected degree total of `m` scale-free nodes under `mode`.
pub fn sf_mu(m: u64, n: u64, gamma: f64, mode: MuMode) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 2.0) {
        return Err(NsumError::invalid(format!("scale-free bound needs gamma > 2, got {gamma}")));
    }
    if n < 3 {
        return Err(NsumError::invalid("scale-free bound needs n >= 3"));
    }
    let per_node = match mode {
        MuMode::IntegralApprox => {
            let top = (n - 1) as f64;
            (1.0 - gamma) / (2.0 - gamma) * (1.0 - top.powf(2.0 - gamma))
                / (1.0 - top.powf(1.0 - gamma))
        }
        MuMode::ExactPmfMean => DegreeDistribution::scale_free(n as usize, gamma)?.mean(),
    };
    Ok(m as f64 * per_node)
}

/// RoS bound on scale-free networks with `gamma > 2`.
pub fn sf_ros_bound(
    beta: f64,
    rho: f64,
    m: u64,
    n: u64,
    gamma: f64,
    policy: DeltaPolicy,
    mu_mode: MuMode,
) -> Result<BoundResult> {
    check_sample(m)?;
    let mu = sf_mu(m, n, gamma, mu_mode)?;
    ros_bound_degree_mean(beta, rho, mu, policy)
}

/// Error floor `sqrt((n-1)/2)` that no deterministic ARD-only method beats.
pub fn adversarial_lower_bound(n: u64) -> Result<f64> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(NsumError::invalid(format!(
            "the adversarial construction needs odd n >= 3, got {n}"
        )));
    }
    Ok(((n - 1) as f64 / 2.0).sqrt())
}

/// Degree extremes of a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub max_out: f64,
    pub min_out: f64,
    pub min_in: f64,
    pub max_in: f64,
    pub mean_in: f64,
}

impl DegreeSummary {
    pub fn from_instance(instance: &Instance) -> Self {
        let ins = instance.in_degrees();
        let outs = instance.out_degrees();
        let max = |v: &[u32]| v.iter().copied().max().unwrap_or(0) as f64;
        let min = |v: &[u32]| v.iter().copied().min().unwrap_or(0) as f64;
        DegreeSummary {
            max_out: max(&outs),
            min_out: min(&outs),
            min_in: min(&ins),
            max_in: max(&ins),
            mean_in: instance.edge_count() as f64 / instance.n() as f64,
        }
    }
}

/// Worst-case `(E+, E-)` under full sampling.
///
/// MoR: `(max_out / min_in, max_in / min_out)`.
/// RoS: `(max_out / mean_in, mean_in / min_out)`.
pub fn fullsampling_worstcase(kind: Method, summary: &DegreeSummary) -> Result<(f64, f64)> {
    let s = summary;
    for (name, x) in [
        ("max_out", s.max_out),
        ("min_out", s.min_out),
        ("min_in", s.min_in),
        ("max_in", s.max_in),
        ("mean_in", s.mean_in),
    ] {
        if !(x.is_finite() && x >= 1.0) {
            return Err(NsumError::invalid(format!("{name} must be at least 1, got {x}")));
        }
    }
    match kind {
        Method::MoR => Ok((s.max_out / s.min_in, s.max_in / s.min_out)),
        Method::RoS => Ok((s.max_out / s.mean_in, s.mean_in / s.min_out)),
        Method::FS => Err(NsumError::invalid("worst-case bounds exist for MoR and RoS only")),
    }
}

/// Named bound curves that the sweep harness can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    /// `F(beta, m rho)`, bounding MoR.
    Mor,
    /// `F(beta, m rho)`, bounding RoS.
    RosSimple,
    /// Expectation of `F(beta, R rho)` under an `R_S` pmf, bounding RoS.
    RosPmf,
    /// Erdős–Rényi degree-concentration bound for RoS.
    ErRos,
    /// Scale-free degree-concentration bound for RoS.
    SfRos,
    /// The per-term rule behind the sample-size formula.
    SampleSize,
}

impl BoundFamily {
    /// Estimator whose tail the family bounds.
    pub fn estimator(&self) -> Method {
        match self {
            BoundFamily::Mor | BoundFamily::SampleSize => Method::MoR,
            _ => Method::RoS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundFamily::Mor => "mor",
            BoundFamily::RosSimple => "ros_simple",
            BoundFamily::RosPmf => "ros_pmf",
            BoundFamily::ErRos => "er_ros",
            BoundFamily::SfRos => "sf_ros",
            BoundFamily::SampleSize => "sample_size",
        }
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundFamily {
    type Err = NsumError;

    fn from_str(s: &str) -> Result<Self> {
        [
            BoundFamily::Mor,
            BoundFamily::RosSimple,
            BoundFamily::RosPmf,
            BoundFamily::ErRos,
            BoundFamily::SfRos,
            BoundFamily::SampleSize,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| NsumError::invalid(format!("unknown bound family `{s}`")))
    }
}

/// One row of a bound sweep CSV (`m,beta,rho,bound_raw,bound_clamped,family`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurveRow {
    pub m: u64,
    pub beta: f64,
    pub rho: f64,
    pub bound_raw: f64,
    pub bound_clamped: f64,
    pub family: BoundFamily,
}

pub fn write_bound_curve_csv<W: std::io::Write>(rows: &[BoundCurveRow], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}
