//! Replica aggregation and the small set of statistical tests used by the
//! consistency checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Monte Carlo estimate: sample mean, standard error and sample count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl EstimateCI {
    /// Mean and `sd / sqrt(n)` with the unbiased sample standard deviation.
    /// A single sample, or identical samples, yield a zero standard error.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InsufficientData("no samples".into()));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 && samples.iter().any(|&v| v != samples[0]) {
            let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Ok(EstimateCI {
            mean,
            stderr,
            n_samples: n,
        })
    }

    /// `true` when `|mean - reference| <= k·stderr + slack`.
    pub fn within(&self, reference: f64, k_sigma: f64, slack: f64) -> bool {
        (self.mean - reference).abs() <= k_sigma * self.stderr + slack
    }

    /// Deviation from `reference` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == reference {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - reference) / self.stderr
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EstimateCI {
            mean: self.mean * factor,
            stderr: self.stderr * factor.abs(),
            n_samples: self.n_samples,
        }
    }
}

/// Per-replica observations keyed by replica index.
///
/// Merging concatenates and finalisation sorts by replica index, so the
/// emitted statistics do not depend on the order in which replicas finish.
#[derive(Clone, Debug, Default)]
pub struct Tally {
    rows: Vec<(u64, Vec<f64>)>,
}

impl Tally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, replica: u64, values: Vec<f64>) {
        self.rows.push((replica, values));
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.rows.extend(other.rows);
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column-wise estimates over replicas.
    pub fn estimates(&self) -> Result<Vec<EstimateCI>> {
        let mut rows: Vec<&(u64, Vec<f64>)> = self.rows.iter().collect();
        rows.sort_by_key(|(k, _)| *k);
        let width = rows
            .first()
            .map(|(_, v)| v.len())
            .ok_or_else(|| Error::InsufficientData("empty tally".into()))?;
        if rows.iter().any(|(_, v)| v.len() != width) {
            return Err(Error::InsufficientData("ragged tally rows".into()));
        }
        (0..width)
            .map(|c| {
                let col: Vec<f64> = rows.iter().map(|(_, v)| v[c]).collect();
                EstimateCI::from_samples(&col)
            })
            .collect()
    }
}

impl FromIterator<(u64, Vec<f64>)> for Tally {
    fn from_iter<I: IntoIterator<Item = (u64, Vec<f64>)>>(iter: I) -> Self {
        Tally {
            rows: iter.into_iter().collect(),
        }
    }
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points for a fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponent `p` of a power-law fit `err ≈ C·N^{-p}`.
pub fn fitted_rate(ns: &[f64], errors: &[f64]) -> f64 {
    let lx: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    -linear_fit(&lx, &ly).0
}

/// p-value of the chi-square homogeneity test between two histograms over
/// the same bins. Bins empty in both samples are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let total = na + nb;
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        bins += 1;
        let ea = na * col / total;
        let eb = nb * col / total;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if bins < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// One-sample Kolmogorov–Smirnov test; returns the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    kolmogorov_q(lambda)
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powi(j as i32 - 1) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
