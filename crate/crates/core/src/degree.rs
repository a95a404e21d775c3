//! In-degree distributions over `{1, .., n-1}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NsumError, Result};

/// How a distribution was constructed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeKind {
    Explicit,
    ErTruncated { p: f64 },
    ScaleFree { gamma: f64 },
}

/// Probability mass over in-degrees `1..n`, stored densely by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeDistribution {
    n: usize,
    kind: DegreeKind,
    /// `probs[k]` is the mass at degree `k`; `probs[0]` is always zero.
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

const EXPLICIT_SUM_TOLERANCE: f64 = 1e-9;

impl DegreeDistribution {
    fn from_dense(n: usize, kind: DegreeKind, mut probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n);
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Pin the top of the CDF so inverse sampling never runs off the end.
        if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
            cdf[last..].iter_mut().for_each(|c| *c = 1.0);
        }
        DegreeDistribution { n, kind, probs, cdf }
    }

    /// Arbitrary pmf given as `(degree, probability)` pairs.
    pub fn explicit(n: usize, pmf: &[(usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(NsumError::invalid("degree distribution needs n >= 2"));
        }
        if pmf.is_empty() {
            return Err(NsumError::invalid("empty degree pmf"));
        }
        let mut probs = vec![0.0; n];
        for &(k, p) in pmf {
            if k == 0 || k >= n {
                return Err(NsumError::invalid(format!(
                    "degree {k} outside the support 1..={}",
                    n - 1
                )));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(NsumError::invalid(format!("probability {p} at degree {k}")));
            }
            probs[k] += p;
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > EXPLICIT_SUM_TOLERANCE {
            return Err(NsumError::invalid(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self::from_dense(n, DegreeKind::Explicit, probs))
    }

    /// Point mass at degree `k`.
    pub fn point(n: usize, k: usize) -> Result<Self> {
        Self::explicit(n, &[(k, 1.0)])
    }

    /// Binomial(n-1, p) conditioned on being positive.
    ///
    /// `pmf(k) = Binom(n-1, p, k) / (1 - (1-p)^(n-1))` for `k >= 1`.
    pub fn er_truncated(n: usize, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(NsumError::invalid("degree distribution needs n >= 2"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(NsumError::invalid(format!("p must lie in (0, 1), got {p}")));
        }
        let trials = (n - 1) as f64;
        // log Binom(n-1, p, k) by the ratio recurrence, starting from k = 0.
        let log_odds = p.ln() - (-p).ln_1p();
        let mut log_pk = trials * (-p).ln_1p();
        let zero_mass = log_pk.exp();
        let positive_mass = -(trials * (-p).ln_1p()).exp_m1();
        let mut probs = vec![0.0; n];
        for (k, slot) in probs.iter_mut().enumerate().skip(1) {
            let j = (k - 1) as f64;
            log_pk += ((trials - j) / (j + 1.0)).ln() + log_odds;
            *slot = log_pk.exp() / positive_mass;
        }
        debug_assert!(zero_mass < 1.0);
        Ok(Self::from_dense(n, DegreeKind::ErTruncated { p }, probs))
    }

    /// Power law `pmf(k) = nu * k^-gamma` on `1..n`.
    pub fn scale_free(n: usize, gamma: f64) -> Result<Self> {
        if n < 2 {
            return Err(NsumError::invalid("degree distribution needs n >= 2"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(NsumError::invalid(format!("gamma must be positive, got {gamma}")));
        }
        let mut probs = vec![0.0; n];
        for (k, p) in probs.iter_mut().enumerate().skip(1) {
            *p = (k as f64).powf(-gamma);
        }
        Ok(Self::from_dense(n, DegreeKind::ScaleFree { gamma }, probs))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DegreeKind {
        self.kind
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// `(degree, probability)` for every degree with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k, p))
    }

    pub fn max_degree(&self) -> usize {
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.probs.iter().position(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.support().map(|(k, p)| (k * k) as f64 * p).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.n - 1)
    }
}

/// Mean in-degree of `Binomial(n-1, p)` used by the ER sweeps: `p (n-1)`.
pub fn er_p_for_mean(n: usize, mean_degree: f64) -> f64 {
    mean_degree / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn explicit_examples() {
        let d = DegreeDistribution::explicit(3, &[(1, 1.0)]).unwrap();
        assert_eq!(d.mean(), 1.0);
        let d = DegreeDistribution::explicit(5, &[(1, 0.5), (2, 0.5)]).unwrap();
        assert!(close(d.mean(), 1.5, 1e-15));
        assert!(DegreeDistribution::explicit(4, &[(0, 0.5), (1, 0.5)]).is_err());
        assert!(DegreeDistribution::explicit(4, &[(4, 1.0)]).is_err());
        assert!(DegreeDistribution::explicit(4, &[(1, -0.5), (2, 1.5)]).is_err());
        assert!(DegreeDistribution::explicit(4, &[(1, 0.5)]).is_err());
        assert!(DegreeDistribution::explicit(4, &[]).is_err());
    }

    #[test]
    fn er_truncated_examples() {
        for p in [0.1, 0.5, 0.9] {
            let d = DegreeDistribution::er_truncated(2, p).unwrap();
            assert!(close(d.pmf(1), 1.0, 1e-15));
        }
        let d = DegreeDistribution::er_truncated(3, 0.5).unwrap();
        assert!(close(d.pmf(1), 2.0 / 3.0, 1e-15));
        assert!(close(d.pmf(2), 1.0 / 3.0, 1e-15));
        assert_eq!(d.pmf(0), 0.0);
        assert!(DegreeDistribution::er_truncated(3, 1.0).is_err());
        assert!(DegreeDistribution::er_truncated(3, 0.0).is_err());
    }

    #[test]
    fn er_truncated_large_n_is_normalized() {
        let n = 100_000;
        let p = er_p_for_mean(n, 30.0);
        let d = DegreeDistribution::er_truncated(n, p).unwrap();
        assert!(close(d.total_mass(), 1.0, 1e-12));
        // Truncation at zero barely moves a mean-30 binomial.
        assert!(close(d.mean(), 30.0, 1e-9));
    }

    #[test]
    fn scale_free_examples() {
        let d = DegreeDistribution::scale_free(3, 1.0).unwrap();
        assert!(close(d.pmf(1), 2.0 / 3.0, 1e-15));
        assert!(close(d.pmf(2), 1.0 / 3.0, 1e-15));
        let d = DegreeDistribution::scale_free(2, 2.5).unwrap();
        assert_eq!(d.pmf(1), 1.0);
        assert!(DegreeDistribution::scale_free(3, 0.0).is_err());
    }

    #[test]
    fn scale_free_head_matches_partial_zeta() {
        // Oracle: partial zeta sum computed independently, largest terms last.
        let n = 1_000_000usize;
        let zeta: f64 = (1..n).rev().map(|k| (k as f64).powf(-2.5)).sum();
        let d = DegreeDistribution::scale_free(n, 2.5).unwrap();
        assert!(close(d.pmf(1), 1.0 / zeta, 1e-12));
        assert!(close(d.pmf(1), 0.7454, 1e-4));
        assert!(close(d.total_mass(), 1.0, 1e-10));
    }

    #[test]
    fn sampling_hits_only_support() {
        let d = DegreeDistribution::explicit(10, &[(2, 0.25), (7, 0.75)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 10];
        for _ in 0..20_000 {
            counts[d.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[2] + counts[7], 20_000);
        let frac = counts[2] as f64 / 20_000.0;
        // 0.25 +- 5 sigma
        assert!((frac - 0.25).abs() < 5.0 * (0.25f64 * 0.75 / 20_000.0).sqrt());
    }
}
