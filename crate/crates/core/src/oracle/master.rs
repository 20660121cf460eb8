//! Forward Kolmogorov equation over all `2^{2N+1}` configurations, for
//! lattices small enough to enumerate.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use super::banded::FactorCache;
use super::sdirk::{integrate, StageSystem, StepControl};
use crate::error::{invalid, Error, Result};
use crate::model::{Drive, ScalingParams, ValueRange};
use crate::ssep::ExclusionConfig;

pub const MAX_MASTER_N: usize = 3;

/// Law of `η_t` on `{0,1}^{2N+1}`; bit `x + N` of the state index is `η(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl MasterDistribution {
    pub fn point_mass(config: &ExclusionConfig) -> Result<Self> {
        let n = config.n();
        check_size(n)?;
        let state = config
            .occupancy()
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &v)| acc | ((v as usize) << i));
        let mut probs = vec![0.0; 1 << (2 * n + 1)];
        probs[state] = 1.0;
        Ok(MasterDistribution { n, probs })
    }

    pub fn product_bernoulli(n: usize, density: f64) -> Result<Self> {
        check_size(n)?;
        let m = 2 * n + 1;
        let probs = (0..1usize << m)
            .map(|s| {
                let ones = s.count_ones() as i32;
                density.powi(ones) * (1.0 - density).powi(m as i32 - ones)
            })
            .collect();
        Ok(MasterDistribution { n, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn bit(&self, x: i64) -> usize {
        let n = self.n as i64;
        assert!(x.abs() <= n, "site {x} outside lattice");
        (x + n) as usize
    }

    /// `E[Π_{x ∈ xs} η(x)]`.
    pub fn moment(&self, xs: &[i64]) -> f64 {
        let mask = xs.iter().fold(0usize, |acc, &x| acc | (1 << self.bit(x)));
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| s & mask == mask)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn marginal(&self, x: i64) -> f64 {
        self.moment(&[x])
    }

    pub fn one_point(&self) -> Vec<f64> {
        let n = self.n as i64;
        (-n..=n).map(|x| self.marginal(x)).collect()
    }

    pub fn covariance(&self, x1: i64, x2: i64) -> f64 {
        self.moment(&[x1, x2]) - self.marginal(x1) * self.marginal(x2)
    }

    pub fn total_variation(&self, other: &MasterDistribution) -> f64 {
        assert_eq!(self.n, other.n);
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_MASTER_N {
        return Err(invalid("n", format!("master equation supports 1 <= N <= {MAX_MASTER_N}, got {n}")));
    }
    Ok(())
}

/// `G` with `dp/ds = G·p` in microscopic time.
fn generator(n: usize, rho_minus: f64, rho_plus: f64, coupling: f64) -> DMatrix<f64> {
    let m = 2 * n + 1;
    let size = 1usize << m;
    let mut g = DMatrix::zeros(size, size);
    for s in 0..size {
        let mut out = 0.0;
        for b in 0..m - 1 {
            let (u, v) = ((s >> b) & 1, (s >> (b + 1)) & 1);
            if u != v {
                let t = s ^ (0b11 << b);
                g[(t, s)] += 0.5;
                out += 0.5;
            }
        }
        for (bit, rho) in [(0, rho_minus), (m - 1, rho_plus)] {
            let occupied = (s >> bit) & 1 == 1;
            let rate = coupling * if occupied { 1.0 - rho } else { rho };
            if rate > 0.0 {
                g[(s ^ (1 << bit), s)] += rate;
                out += rate;
            }
        }
        g[(s, s)] = -out;
    }
    g
}

struct MasterSystem<'a> {
    n: usize,
    drive: &'a Drive,
    speed: f64,
    coupling: f64,
    constant: Option<DMatrix<f64>>,
    cache: FactorCache<LU<f64, Dyn, Dyn>>,
}

impl MasterSystem<'_> {
    fn generator_at(&self, s: f64) -> DMatrix<f64> {
        match &self.constant {
            Some(g) => g.clone(),
            None => {
                let (rm, rp) = self.drive.at(s / self.speed);
                generator(self.n, rm, rp, self.coupling)
            }
        }
    }
}

impl StageSystem for MasterSystem<'_> {
    fn dim(&self) -> usize {
        1 << (2 * self.n + 1)
    }

    fn rhs(&mut self, s: f64, y: &[f64], out: &mut [f64]) {
        let g = self.generator_at(s);
        let r = g * DVector::from_column_slice(y);
        out.copy_from_slice(r.as_slice());
    }

    fn solve_stage(&mut self, s: f64, h_gamma: f64, b: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        let build = |g: DMatrix<f64>| DMatrix::<f64>::identity(dim, dim) - g * h_gamma;
        let rhs = DVector::from_column_slice(b);
        let sol = if self.constant.is_some() {
            let g = self.generator_at(s);
            let lu = self.cache.get_or_insert_with(h_gamma, || Ok(build(g).lu()))?;
            lu.solve(&rhs)
        } else {
            build(self.generator_at(s)).lu().solve(&rhs)
        };
        let sol = sol.ok_or_else(|| Error::Unstable("singular stage matrix".into()))?;
        out.copy_from_slice(sol.as_slice());
        Ok(())
    }
}

/// Law of `η_t` at each macroscopic time in `times`, started from `initial`.
pub fn master_equation_trajectory(
    drive: &Drive,
    scaling: &ScalingParams,
    initial: &MasterDistribution,
    times: &[f64],
    coupling: f64,
) -> Result<Vec<MasterDistribution>> {
    let n = scaling.n;
    check_size(n)?;
    if initial.n != n {
        return Err(invalid("initial", "initial law size does not match N"));
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("t", "times must be non-negative and sorted"));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    for side in [drive.minus, drive.plus] {
        side.with_range(ValueRange::closed(0.0, 1.0))
            .lipschitz_check(horizon, (horizon / 1000.0).max(1e-3))?;
    }
    let constant = drive.is_constant().then(|| {
        let (rm, rp) = drive.at(0.0);
        generator(n, rm, rp, coupling)
    });
    let speed = scaling.speedup();
    let mut sys = MasterSystem {
        n,
        drive,
        speed,
        coupling,
        constant,
        cache: FactorCache::new(8),
    };
    let ctl = StepControl {
        rtol: 1e-11,
        atol: 1e-13,
        h_init: 1e-2,
        ..StepControl::default()
    };
    let targets: Vec<f64> = times.iter().map(|t| t * speed).collect();
    let out = integrate(&mut sys, 0.0, &initial.probs, &targets, &ctl, |_, _| {})?;
    Ok(out
        .into_iter()
        .map(|probs| MasterDistribution { n, probs })
        .collect())
}

/// Law of `η_t` for `η_0 = initial` (deterministic), `N <= 3`.
pub fn master_equation_distribution(
    drive: &Drive,
    scaling: &ScalingParams,
    initial: &ExclusionConfig,
    t: f64,
    coupling: f64,
) -> Result<MasterDistribution> {
    let start = MasterDistribution::point_mass(initial)?;
    Ok(master_equation_trajectory(drive, scaling, &start, &[t], coupling)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_zero_is_point_mass() {
        let c = ExclusionConfig::new(1, vec![1, 0, 1]).unwrap();
        let d = master_equation_distribution(&Drive::constant(0.2, 0.8), &ScalingParams::new(1, 1.0, 1.0).unwrap(), &c, 0.0, 1.0)
            .unwrap();
        assert_eq!(d.probs()[0b101], 1.0);
        assert_eq!(d.marginal(0), 0.0);
    }

    #[test]
    fn mass_conserved() {
        let c = ExclusionConfig::empty(2);
        let d = master_equation_distribution(&Drive::constant(0.2, 0.8), &ScalingParams::new(2, 1.0, 1.0).unwrap(), &c, 1.0, 1.0)
            .unwrap();
        assert!((d.total() - 1.0).abs() < 1e-10);
        assert!(d.probs().iter().all(|&p| p > -1e-12));
    }

    #[test]
    fn equilibrium_reached() {
        // Spectral gap of the N = 1 chain at ρ = 0.3 is 1/2, so by t = 40
        // (s = 40) the distance is of order e^{-20}.
        let c = ExclusionConfig::empty(1);
        let s = ScalingParams::new(1, 1.0, 40.0).unwrap();
        let d = master_equation_distribution(&Drive::constant(0.3, 0.3), &s, &c, 40.0, 1.0).unwrap();
        let eq = MasterDistribution::product_bernoulli(1, 0.3).unwrap();
        assert!(d.total_variation(&eq) < 1e-6);
    }

    #[test]
    fn product_measure_invariant() {
        let s = ScalingParams::new(2, 1.0, 1.0).unwrap();
        let eq = MasterDistribution::product_bernoulli(2, 0.35).unwrap();
        let d = master_equation_trajectory(&Drive::constant(0.35, 0.35), &s, &eq, &[1.0], 1.0).unwrap();
        assert!(d[0].total_variation(&eq) < 1e-10);
    }

    #[test]
    fn size_limit() {
        let s = ScalingParams::new(4, 1.0, 1.0).unwrap();
        let c = ExclusionConfig::empty(4);
        assert!(master_equation_distribution(&Drive::constant(0.2, 0.8), &s, &c, 1.0, 1.0).is_err());
    }
}
