//! Finite pmfs over nonnegative integers, used for the distribution of the
//! sampled degree total `R_S`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::degree::DegreeDistribution;
use crate::error::{NsumError, Result};

/// Default cap on `m * max_degree` for exact convolution powers.
pub const DEFAULT_CONVOLUTION_CAP: u64 = 10_000_000;

/// Mass dropped from each tail after every convolution step.
const TAIL_TRIM: f64 = 1e-18;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    /// Sorted by value, strictly increasing, all masses positive.
    entries: Vec<(u64, f64)>,
}

impl DiscretePmf {
    /// Accepts any entries; duplicates are merged and zeros dropped.
    /// Normalization is not enforced here; see [`DiscretePmf::check_normalized`].
    pub fn new(entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut merged = BTreeMap::new();
        for (value, mass) in entries {
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(NsumError::invalid(format!("mass {mass} at {value}")));
            }
            *merged.entry(value).or_insert(0.0) += mass;
        }
        Ok(DiscretePmf {
            entries: merged.into_iter().filter(|&(_, p)| p > 0.0).collect(),
        })
    }

    pub fn point(value: u64) -> Self {
        DiscretePmf {
            entries: vec![(value, 1.0)],
        }
    }

    /// Normalized histogram of observed values.
    pub fn from_counts(counts: &BTreeMap<u64, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(NsumError::invalid("histogram is empty"));
        }
        Ok(DiscretePmf {
            entries: counts
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(|(&v, &c)| (v, c as f64 / total as f64))
                .collect(),
        })
    }

    pub fn from_degrees(dist: &DegreeDistribution) -> Self {
        DiscretePmf {
            entries: dist.support().map(|(k, p)| (k as u64, p)).collect(),
        }
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn prob(&self, value: u64) -> f64 {
        self.entries
            .binary_search_by_key(&value, |&(v, _)| v)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    pub fn max_value(&self) -> u64 {
        self.entries.last().map(|&(v, _)| v).unwrap_or(0)
    }

    pub fn check_normalized(&self, tolerance: f64) -> Result<()> {
        let total = self.total_mass();
        if (total - 1.0).abs() > tolerance {
            return Err(NsumError::invalid(format!("pmf sums to {total}, not 1")));
        }
        Ok(())
    }

    /// Law of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &DiscretePmf) -> DiscretePmf {
        let (Some(&(lo_a, _)), Some(&(lo_b, _))) = (self.entries.first(), other.entries.first()) else {
            return DiscretePmf { entries: Vec::new() };
        };
        let lo = lo_a + lo_b;
        let width = (self.max_value() + other.max_value() - lo + 1) as usize;
        let mut dense = vec![0.0; width];
        for &(va, pa) in &self.entries {
            for &(vb, pb) in &other.entries {
                dense[(va + vb - lo) as usize] += pa * pb;
            }
        }
        trim_tails(&mut dense);
        DiscretePmf {
            entries: dense
                .into_iter()
                .enumerate()
                .filter(|&(_, p)| p > 0.0)
                .map(|(i, p)| (lo + i as u64, p))
                .collect(),
        }
    }

    /// Law of the sum of `m` independent copies, by repeated squaring.
    ///
    /// Fails with [`NsumError::TooLarge`] when `m * max_value` exceeds `cap`.
    pub fn convolution_power(&self, m: u64, cap: u64) -> Result<DiscretePmf> {
        if m == 0 {
            return Ok(DiscretePmf::point(0));
        }
        let states = (m as u128) * (self.max_value() as u128);
        if states > cap as u128 {
            return Err(NsumError::TooLarge {
                states,
                cap: cap as u128,
            });
        }
        let mut result: Option<DiscretePmf> = None;
        let mut base = self.clone();
        let mut k = m;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve(&base),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.convolve(&base);
        }
        Ok(result.expect("m >= 1"))
    }
}

/// Zero out negligible mass at both ends.
fn trim_tails(dense: &mut [f64]) {
    let mut acc = 0.0;
    for p in dense.iter_mut() {
        if acc + *p > TAIL_TRIM {
            break;
        }
        acc += *p;
        *p = 0.0;
    }
    acc = 0.0;
    for p in dense.iter_mut().rev() {
        if acc + *p > TAIL_TRIM {
            break;
        }
        acc += *p;
        *p = 0.0;
    }
}
