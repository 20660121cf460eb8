//! Boundary-driven zero-range process and its equilibrium toolkit.
//!
//! A particle leaves site `x` at rate `g(η(x))`, to each neighbour with
//! probability ½; particles jumping past `±N` are destroyed, and particles
//! are created at `±N` with rate `½·λ_±(t)`. Everything runs at speed
//! `N^{2+α}` in macroscopic time.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{exp1, linear_interpolation, Drive, ScalingParams, SeedSpec, ValueRange};
use crate::ssep::{validate_snapshots, EventCounts};
use crate::stats::EstimateCI;

/// Built-in jump rate functions with `g(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RateFunction {
    /// `g(k) = k`
    Linear,
    /// `g(k) = 1{k >= 1}`
    Constant,
    /// `g(k) = k^p`, `0 < p <= 1`
    Power(f64),
}

impl RateFunction {
    #[inline]
    pub fn eval(&self, k: u32) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self {
            RateFunction::Linear => k as f64,
            RateFunction::Constant => 1.0,
            RateFunction::Power(p) => (k as f64).powf(*p),
        }
    }

    /// `sup_k |g(k+1) - g(k)|`
    pub fn increment_bound(&self) -> f64 {
        1.0
    }

    /// `lim_k g(k)`: the fugacity series converges exactly for `λ` below it.
    pub fn radius(&self) -> f64 {
        match self {
            RateFunction::Constant => 1.0,
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFunction::Linear => write!(f, "linear"),
            RateFunction::Constant => write!(f, "constant"),
            RateFunction::Power(p) => write!(f, "power({p})"),
        }
    }
}

impl FromStr for RateFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "linear" => return Ok(RateFunction::Linear),
            "constant" => return Ok(RateFunction::Constant),
            _ => {}
        }
        let arg = s
            .strip_prefix("power(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| invalid("rate_function", format!("unknown rate function `{s}`")))?;
        let p: f64 = arg
            .trim()
            .parse()
            .map_err(|_| invalid("rate_function", format!("bad exponent `{arg}`")))?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid("rate_function", "power exponent must lie in (0, 1]"));
        }
        Ok(RateFunction::Power(p))
    }
}

impl TryFrom<String> for RateFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RateFunction> for String {
    fn from(g: RateFunction) -> String {
        g.to_string()
    }
}

fn check_fugacity(lambda: f64, g: RateFunction) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "fugacity must be finite and non-negative"));
    }
    if lambda >= g.radius() {
        return Err(Error::Divergent(format!(
            "fugacity {lambda} outside the convergence region [0, {}) of {g}",
            g.radius()
        )));
    }
    Ok(())
}

/// Truncated single-site equilibrium `μ_λ(k) ∝ λ^k / g(k)!`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumTable {
    pub lambda: f64,
    pub k_max: usize,
    pub weights: Vec<f64>,
    /// Bound on the neglected mass relative to the truncated normalization.
    pub tail_bound: f64,
}

impl EquilibriumTable {
    pub fn mean(&self) -> f64 {
        self.weights.iter().enumerate().map(|(k, w)| k as f64 * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| (k as f64 - m).powi(2) * w)
            .sum()
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        let mut u = rng.random::<f64>();
        for (k, w) in self.weights.iter().enumerate() {
            if u < *w {
                return k as u32;
            }
            u -= w;
        }
        self.k_max as u32
    }
}

const MAX_TABLE: usize = 1_000_000;

/// Unnormalised weights `λ^k/g(k)!` for `k = 0..=k_max`, rescaled by their
/// maximum to avoid overflow.
fn raw_weights(lambda: f64, g: RateFunction, k_max: usize) -> Vec<f64> {
    let mut logs = Vec::with_capacity(k_max + 1);
    let mut acc = 0.0;
    logs.push(0.0);
    for k in 1..=k_max {
        acc += if lambda == 0.0 {
            f64::NEG_INFINITY
        } else {
            lambda.ln() - g.eval(k as u32).ln()
        };
        logs.push(acc);
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logs.iter().map(|l| (l - peak).exp()).collect()
}

/// Truncates where the neglected mass and first moment are both below `tol`
/// times the truncated normalization, using the geometric bound available
/// once `λ/g(k+1)` stays below one.
pub fn zr_partition(lambda: f64, g: RateFunction, tol: f64) -> Result<EquilibriumTable> {
    check_fugacity(lambda, g)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if lambda == 0.0 {
        return Ok(EquilibriumTable {
            lambda,
            k_max: 0,
            weights: vec![1.0],
            tail_bound: 0.0,
        });
    }
    // Work in logs: log w_k and log Z.
    let mut log_w = 0.0f64;
    let mut log_z = 0.0f64;
    let mut k = 0usize;
    loop {
        // Built-in g are non-decreasing, so q bounds every later ratio.
        let q = lambda / g.eval(k as u32 + 1);
        if q < 1.0 {
            let kf = k as f64;
            let mass = q / (1.0 - q);
            let moment = kf * q / (1.0 - q) + q / (1.0 - q).powi(2);
            let bound = (log_w - log_z).exp() * mass.max(moment);
            if bound <= tol {
                let mut weights = raw_weights(lambda, g, k);
                let z: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= z);
                return Ok(EquilibriumTable {
                    lambda,
                    k_max: k,
                    weights,
                    tail_bound: (log_w - log_z).exp() * mass,
                });
            }
        }
        k += 1;
        if k > MAX_TABLE {
            return Err(Error::Divergent(format!(
                "no certified truncation for λ = {lambda} with {g} below k = {MAX_TABLE}"
            )));
        }
        log_w += lambda.ln() - g.eval(k as u32).ln();
        log_z += (log_w - log_z).exp().ln_1p();
    }
}

/// `R(λ) = E_{μ_λ}[η]`.
pub fn zr_mean_density(lambda: f64, g: RateFunction, tol: f64) -> Result<f64> {
    Ok(zr_partition(lambda, g, tol)?.mean())
}

/// Inverse of [`zr_mean_density`] by bisection.
pub fn zr_fugacity(density: f64, g: RateFunction, tol: f64) -> Result<f64> {
    if !(density >= 0.0) || !density.is_finite() {
        return Err(invalid("density", "must be finite and non-negative"));
    }
    if density == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = if g.radius().is_finite() { g.radius() } else { 1.0 };
    if g.radius().is_infinite() {
        while zr_mean_density(hi, g, tol)? < density {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::RootFinding("density not attainable".into()));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid >= g.radius() {
            hi = mid;
            continue;
        }
        if zr_mean_density(mid, g, tol)? < density {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `R(λ̄(y, t))` with `λ̄` the linear interpolation of the fugacities.
pub fn zr_profile_limit(y: f64, t: f64, drive: &Drive, g: RateFunction, tol: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&y) || !(t >= 0.0) {
        return Err(invalid("y", "need y in [-1, 1] and t >= 0"));
    }
    let (lm, lp) = drive.at(t);
    zr_mean_density(linear_interpolation(y, lm, lp), g, tol)
}

/// Local functions of the occupations of three consecutive sites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowObservable {
    Constant,
    /// `η(i)` for window index `i ∈ {0,1,2}`
    Occupation(usize),
    OccupationSquared(usize),
    /// `η(i)·η(j)`
    PairProduct(usize, usize),
}

impl WindowObservable {
    fn eval(&self, eta: [u32; 3]) -> f64 {
        match *self {
            WindowObservable::Constant => 1.0,
            WindowObservable::Occupation(i) => eta[i] as f64,
            WindowObservable::OccupationSquared(i) => (eta[i] as f64).powi(2),
            WindowObservable::PairProduct(i, j) => eta[i] as f64 * eta[j] as f64,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            WindowObservable::Constant => true,
            WindowObservable::Occupation(i) | WindowObservable::OccupationSquared(i) => i < 3,
            WindowObservable::PairProduct(i, j) => i < 3 && j < 3,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("observable", "window index must be 0, 1 or 2"))
        }
    }
}

/// `Σ_η Lφ(η)·μ(η)` over `{0..K}^3` for a window of three bulk sites under
/// the product of the single-site law `site` (indexed by occupancy).
///
/// Sites outside the window are integrated out: under a product law a
/// neighbour outside pushes particles in at rate `½·E[g]`.
pub fn stationarity_residual_for(g: RateFunction, site: &[f64], observable: WindowObservable) -> Result<f64> {
    observable.check()?;
    if site.is_empty() {
        return Err(invalid("site", "empty single-site law"));
    }
    let kmax = site.len() - 1;
    let inflow = 0.5 * site.iter().enumerate().map(|(k, w)| g.eval(k as u32) * w).sum::<f64>();
    let mut total = 0.0;
    for a in 0..=kmax {
        for b in 0..=kmax {
            for c in 0..=kmax {
                let w = site[a] * site[b] * site[c];
                if w == 0.0 {
                    continue;
                }
                let eta = [a as u32, b as u32, c as u32];
                let phi = observable.eval(eta);
                let mut lphi = 0.0;
                let mut moved = |from: Option<usize>, to: Option<usize>, rate: f64| {
                    if rate == 0.0 {
                        return;
                    }
                    let mut next = eta;
                    if let Some(i) = from {
                        next[i] -= 1;
                    }
                    if let Some(j) = to {
                        next[j] += 1;
                    }
                    lphi += rate * (observable.eval(next) - phi);
                };
                for i in 0..3 {
                    let out = 0.5 * g.eval(eta[i]);
                    let left = if i == 0 { None } else { Some(i - 1) };
                    let right = if i == 2 { None } else { Some(i + 1) };
                    moved(Some(i), left, out);
                    moved(Some(i), right, out);
                }
                moved(None, Some(0), inflow);
                moved(None, Some(2), inflow);
                total += w * lphi;
            }
        }
    }
    Ok(total.abs())
}

/// Stationarity residual of `μ_λ` for the dynamics with rate function `g`,
/// truncated at occupancy `k_max`.
pub fn zr_stationarity_residual(g: RateFunction, lambda: f64, observable: WindowObservable, k_max: usize) -> Result<f64> {
    check_fugacity(lambda, g)?;
    let raw = raw_weights(lambda, g, k_max + 1);
    let z: f64 = raw[..=k_max].iter().sum();
    // Certification: the truncated boundary layer contributes at most the
    // mass at K times polynomial factors in K.
    let edge = raw[k_max] / z;
    let kk = (k_max + 1) as f64;
    let bound = 12.0 * edge * kk.powi(2) * (g.eval(k_max as u32 + 1) + lambda + 1.0);
    if bound > 1e-6 || raw[k_max + 1] > raw[k_max] {
        return Err(invalid(
            "k_max",
            format!("truncation K = {k_max} cannot be certified (edge mass {edge:.3e})"),
        ));
    }
    let site: Vec<f64> = raw[..=k_max].iter().map(|w| w / z).collect();
    stationarity_residual_for(g, &site, observable)
}

/// Occupation numbers over `{-N,…,N}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZrConfig {
    n: usize,
    occupancy: Vec<u32>,
}

impl ZrConfig {
    pub fn new(n: usize, occupancy: Vec<u32>) -> Result<Self> {
        if occupancy.len() != 2 * n + 1 {
            return Err(invalid("occupancy", format!("expected {} sites", 2 * n + 1)));
        }
        Ok(ZrConfig { n, occupancy })
    }

    pub fn empty(n: usize) -> Self {
        ZrConfig {
            n,
            occupancy: vec![0; 2 * n + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    pub fn get(&self, x: i64) -> u32 {
        self.occupancy[(x + self.n as i64) as usize]
    }

    pub fn particles(&self) -> u64 {
        self.occupancy.iter().map(|&v| v as u64).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZrInitial {
    Config(ZrConfig),
    Empty,
    /// Product of `μ_λ`.
    Equilibrium(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZrRunSpec {
    pub initial: ZrInitial,
    pub rate: RateFunction,
    /// Fugacities `λ_±(t)`.
    pub drive: Drive,
    pub scaling: ScalingParams,
    pub snapshot_times: Vec<f64>,
    pub seed: SeedSpec,
    pub record_counts: bool,
}

impl ZrRunSpec {
    pub fn new(
        initial: ZrInitial,
        rate: RateFunction,
        drive: Drive,
        scaling: ScalingParams,
        snapshot_times: Vec<f64>,
        seed: SeedSpec,
    ) -> Self {
        ZrRunSpec {
            initial,
            rate,
            drive,
            scaling,
            snapshot_times,
            seed,
            record_counts: false,
        }
    }

    pub fn for_replica(&self, replica: u64) -> Self {
        let mut s = self.clone();
        s.seed = self.seed.with_replica(replica);
        s
    }

    pub fn validate(&self) -> Result<()> {
        validate_snapshots(&self.snapshot_times, self.scaling.horizon)?;
        let range = ValueRange {
            lo: 0.0,
            hi: self.rate.radius(),
            lo_open: false,
            hi_open: true,
        };
        let step = (self.scaling.horizon / 1000.0).max(1e-3);
        for side in [self.drive.minus, self.drive.plus] {
            side.with_range(range)
                .lipschitz_check(self.scaling.horizon, step)
                .map_err(|e| Error::Divergent(format!("fugacity profile: {e}")))?;
        }
        if let ZrInitial::Equilibrium(l) = self.initial {
            check_fugacity(l, self.rate)?;
        }
        if let ZrInitial::Config(c) = &self.initial {
            if c.n != self.scaling.n {
                return Err(invalid("initial", "configuration size does not match N"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZrSnapshot {
    pub t_macro: f64,
    pub config: ZrConfig,
}

#[derive(Clone, Debug)]
pub struct ZrRun {
    pub replica: u64,
    pub snapshots: Vec<ZrSnapshot>,
    pub counts: EventCounts,
    /// Total particle number after every event, when requested.
    pub particle_trace: Option<Vec<u64>>,
}

/// Fenwick tree over per-site departure rates.
struct RateTree {
    tree: Vec<f64>,
    values: Vec<f64>,
    updates: usize,
}

impl RateTree {
    fn new(values: Vec<f64>) -> Self {
        let mut t = RateTree {
            tree: vec![0.0; values.len() + 1],
            values,
            updates: 0,
        };
        t.rebuild();
        t
    }

    fn rebuild(&mut self) {
        self.tree.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.values.len() {
            let mut j = i + 1;
            while j < self.tree.len() {
                self.tree[j] += self.values[i];
                j += j & j.wrapping_neg();
            }
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        let d = v - self.values[i];
        if d == 0.0 {
            return;
        }
        self.values[i] = v;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += d;
            j += j & j.wrapping_neg();
        }
        self.updates += 1;
        if self.updates.is_multiple_of(4096) {
            self.rebuild();
        }
    }

    fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut j = self.values.len();
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        // Guard against round-off landing on a zero-rate site.
        let mut i = pos.min(n - 1);
        while self.values[i] == 0.0 && i > 0 {
            i -= 1;
        }
        while self.values[i] == 0.0 && i + 1 < n {
            i += 1;
        }
        i
    }
}

pub fn run_zero_range(spec: &ZrRunSpec) -> Result<ZrRun> {
    spec.validate()?;
    let n = spec.scaling.n;
    let m = 2 * n + 1;
    let mut rng = spec.seed.rng();
    let mut occ = match &spec.initial {
        ZrInitial::Config(c) => c.occupancy.clone(),
        ZrInitial::Empty => vec![0; m],
        ZrInitial::Equilibrium(l) => {
            let table = zr_partition(*l, spec.rate, 1e-14)?;
            (0..m).map(|_| table.sample(&mut rng)).collect()
        }
    };
    let g = spec.rate;
    let mut tree = RateTree::new(occ.iter().map(|&k| g.eval(k)).collect());
    let speed = spec.scaling.speedup();
    let horizon = spec.snapshot_times.last().copied().unwrap_or(0.0);
    let sup_minus = spec.drive.minus.sup_on(horizon);
    let sup_plus = spec.drive.plus.sup_on(horizon);
    let create_rate = 0.5 * (sup_minus + sup_plus);
    let mut counts = EventCounts::default();
    let mut trace = spec.record_counts.then(Vec::new);
    let mut particles: u64 = occ.iter().map(|&v| v as u64).sum();
    let mut snapshots = Vec::with_capacity(spec.snapshot_times.len());
    let mut t = 0.0;
    for &target_macro in &spec.snapshot_times {
        let target = target_macro * speed;
        loop {
            let bulk = tree.total().max(0.0);
            let total = bulk + create_rate;
            if total <= 0.0 {
                break;
            }
            let dt = exp1(&mut rng) / total;
            if t + dt > target {
                break;
            }
            t += dt;
            counts.events_total += 1;
            let u = rng.random::<f64>() * total;
            if u < bulk {
                let i = tree.find(u);
                let right = rng.random::<bool>();
                occ[i] -= 1;
                tree.set(i, g.eval(occ[i]));
                let dest = if right { i + 1 } else { i.wrapping_sub(1) };
                if dest < m {
                    occ[dest] += 1;
                    tree.set(dest, g.eval(occ[dest]));
                } else {
                    particles -= 1;
                    counts.events_boundary += 1;
                }
            } else {
                let (lm, lp) = spec.drive.at(t / speed);
                let v = u - bulk;
                let (site, accept) = if v < 0.5 * sup_minus {
                    (0, lm / sup_minus)
                } else {
                    (m - 1, lp / sup_plus)
                };
                if rng.random::<f64>() < accept {
                    occ[site] += 1;
                    tree.set(site, g.eval(occ[site]));
                    particles += 1;
                    counts.events_boundary += 1;
                } else {
                    counts.events_thinned_rejections += 1;
                }
            }
            if let Some(tr) = trace.as_mut() {
                tr.push(particles);
            }
        }
        t = target;
        snapshots.push(ZrSnapshot {
            t_macro: target_macro,
            config: ZrConfig {
                n,
                occupancy: occ.clone(),
            },
        });
    }
    Ok(ZrRun {
        replica: spec.seed.replica_index,
        snapshots,
        counts,
        particle_trace: trace,
    })
}

pub fn run_zero_range_replicas(spec: &ZrRunSpec, replicas: u64) -> Result<Vec<ZrRun>> {
    spec.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|i| run_zero_range(&spec.for_replica(i)))
        .collect()
}

/// Block averages of the occupation at snapshot `k`, blocks of `block`
/// consecutive sites from `-N` (the last block may be shorter). Returns the
/// site lists and the replica estimates.
pub fn zr_block_profile(runs: &[ZrRun], k: usize, block: usize) -> Result<Vec<(Vec<i64>, EstimateCI)>> {
    if runs.len() < 2 {
        return Err(Error::InsufficientData("block profile needs at least 2 replicas".into()));
    }
    if block == 0 {
        return Err(invalid("block", "must be positive"));
    }
    let n = runs[0].snapshots[k].config.n as i64;
    let sites: Vec<i64> = (-n..=n).collect();
    sites
        .chunks(block)
        .map(|chunk| {
            let samples: Vec<f64> = runs
                .iter()
                .map(|r| {
                    let c = &r.snapshots[k].config;
                    chunk.iter().map(|&x| c.get(x) as f64).sum::<f64>() / chunk.len() as f64
                })
                .collect();
            Ok((chunk.to_vec(), EstimateCI::from_samples(&samples)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeProfile;

    #[test]
    fn rate_function_grammar() {
        assert_eq!("linear".parse::<RateFunction>().unwrap(), RateFunction::Linear);
        assert_eq!("power(0.5)".parse::<RateFunction>().unwrap(), RateFunction::Power(0.5));
        assert!("power(2)".parse::<RateFunction>().is_err());
        assert!("cubic".parse::<RateFunction>().is_err());
        assert_eq!(RateFunction::Constant.eval(0), 0.0);
        assert_eq!(RateFunction::Constant.eval(7), 1.0);
    }

    #[test]
    fn poisson_table() {
        let t = zr_partition(1.0, RateFunction::Linear, 1e-13).unwrap();
        assert!((t.weights[0] - (-1f64).exp()).abs() < 1e-12);
        assert!(t.tail_bound <= 1e-13);
        assert!((zr_mean_density(0.7, RateFunction::Linear, 1e-13).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn geometric_table() {
        let t = zr_partition(0.5, RateFunction::Constant, 1e-13).unwrap();
        assert!((t.weights[0] - 0.5).abs() < 1e-12);
        assert!((t.mean() - 1.0).abs() < 1e-11);
        let r = zr_profile_limit(0.0, 0.0, &Drive::constant(0.2, 0.5), RateFunction::Constant, 1e-13).unwrap();
        assert!((r - 0.35 / 0.65).abs() < 1e-11);
    }

    #[test]
    fn zero_fugacity_point_mass() {
        let t = zr_partition(0.0, RateFunction::Power(0.5), 1e-12).unwrap();
        assert_eq!(t.weights, vec![1.0]);
        assert_eq!(zr_mean_density(0.0, RateFunction::Linear, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn divergent_fugacity_detected() {
        assert!(matches!(zr_partition(1.0, RateFunction::Constant, 1e-12), Err(Error::Divergent(_))));
        assert!(matches!(zr_partition(1.3, RateFunction::Constant, 1e-12), Err(Error::Divergent(_))));
    }

    #[test]
    fn fugacity_inverse() {
        for g in [RateFunction::Linear, RateFunction::Constant, RateFunction::Power(0.5)] {
            for lambda in [0.1, 0.4, 0.8] {
                let r = zr_mean_density(lambda, g, 1e-13).unwrap();
                assert!((zr_fugacity(r, g, 1e-13).unwrap() - lambda).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stationarity() {
        let g = RateFunction::Linear;
        assert_eq!(zr_stationarity_residual(g, 0.5, WindowObservable::Constant, 20).unwrap(), 0.0);
        let r = zr_stationarity_residual(g, 0.5, WindowObservable::Occupation(1), 30).unwrap();
        assert!(r <= 1e-8, "{r}");
        let r = zr_stationarity_residual(RateFunction::Power(0.5), 0.6, WindowObservable::PairProduct(0, 1), 60).unwrap();
        assert!(r <= 1e-8, "{r}");
        assert!(zr_stationarity_residual(g, 3.0, WindowObservable::Occupation(1), 5).is_err());
    }

    #[test]
    fn mismatched_measure_not_stationary() {
        let poisson = zr_partition(0.5, RateFunction::Linear, 1e-14).unwrap();
        let r = stationarity_residual_for(RateFunction::Constant, &poisson.weights, WindowObservable::OccupationSquared(1))
            .unwrap();
        assert!(r > 0.05, "{r}");
    }

    #[test]
    fn no_injection_drains() {
        let spec = ZrRunSpec {
            record_counts: true,
            ..ZrRunSpec::new(
                ZrInitial::Config(ZrConfig::new(3, vec![2, 0, 3, 1, 0, 0, 4]).unwrap()),
                RateFunction::Power(0.5),
                Drive::new(TimeProfile::constant(0.0), TimeProfile::constant(0.0)),
                ScalingParams::new(3, 1.0, 1.0).unwrap(),
                vec![0.5, 1.0],
                SeedSpec::new(4, 0),
            )
        };
        let run = run_zero_range(&spec).unwrap();
        let trace = run.particle_trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.windows(2).all(|w| w[0] - w[1] <= 1));
    }

    #[test]
    fn fenwick_find() {
        let t = RateTree::new(vec![0.0, 2.0, 0.0, 1.0, 3.0]);
        assert_eq!(t.total(), 6.0);
        assert_eq!(t.find(0.5), 1);
        assert_eq!(t.find(2.5), 3);
        assert_eq!(t.find(5.9), 4);
    }
}
