//! Langevin dynamics of the anharmonic chain pinned at the left end, driven
//! by a slowly varying tension on the last particle, with pathwise
//! work/heat bookkeeping.
//!
//! Each microscopic step of length `h` is a velocity-Verlet substep of the
//! Hamiltonian part (tension evaluated at the step midpoint) followed by an
//! exact Ornstein-Uhlenbeck substep per momentum.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{normal, ScalingParams, SeedSpec, TimeProfile, ValueRange};
use crate::ssep::validate_snapshots;
use crate::stats::EstimateCI;
use crate::thermo::{spring_law, Potential};

/// Strains `r_x = q_x - q_{x-1}` and momenta for `x = 1..N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
}

impl ChainState {
    pub fn rest(n: usize) -> Self {
        ChainState {
            r: vec![0.0; n],
            p: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// `U = N⁻¹ Σ (p²/2 + V(r))`
    pub fn energy(&self, pot: Potential) -> f64 {
        let n = self.n() as f64;
        self.r
            .iter()
            .zip(&self.p)
            .map(|(&r, &p)| 0.5 * p * p + pot.value(r))
            .sum::<f64>()
            / n
    }

    /// Total length per particle, `q_N / N`.
    pub fn length(&self) -> f64 {
        self.r.iter().sum::<f64>() / self.n() as f64
    }

    fn check(&self) -> Result<()> {
        if self.r.len() != self.p.len() || self.r.is_empty() {
            return Err(invalid("state", "r and p must have equal non-zero length"));
        }
        if self.r.iter().chain(&self.p).any(|v| !v.is_finite()) {
            return Err(invalid("state", "entries must be finite"));
        }
        Ok(())
    }
}

/// Per-particle energy accounting at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub t_macro: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    /// `|U - U(0) - W - Q|`
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInitial {
    /// Momenta Gaussian at the local temperature, strains from the
    /// single-spring Gibbs weight at `(τ̄(0), β_x)`.
    LocalGibbs,
    Rest,
    State(ChainState),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    Full,
    /// Only the Ornstein-Uhlenbeck substep; strains stay frozen.
    ThermostatOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainRunSpec {
    pub potential: Potential,
    /// `β(y)` for `y ∈ [0, 1]`; particle `x` sits at `y = x/N`.
    pub beta_profile: TimeProfile,
    pub tension: TimeProfile,
    pub gamma: f64,
    /// `scaling.n` is the number of particles.
    pub scaling: ScalingParams,
    /// Microscopic step; `None` takes `10⁻²/γ`, halved until the stability
    /// pre-run passes.
    pub step: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub seed: SeedSpec,
    pub initial: ChainInitial,
    pub splitting: Splitting,
}

impl ChainRunSpec {
    pub fn new(
        potential: Potential,
        beta_profile: TimeProfile,
        tension: TimeProfile,
        gamma: f64,
        scaling: ScalingParams,
        snapshot_times: Vec<f64>,
        seed: SeedSpec,
    ) -> Self {
        ChainRunSpec {
            potential,
            beta_profile,
            tension,
            gamma,
            scaling,
            step: None,
            snapshot_times,
            seed,
            initial: ChainInitial::LocalGibbs,
            splitting: Splitting::Full,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }

    pub fn for_replica(&self, replica: u64) -> Self {
        let mut s = self.clone();
        s.seed = self.seed.with_replica(replica);
        s
    }

    pub fn beta_at(&self, x: usize) -> f64 {
        self.beta_profile.eval(x as f64 / self.scaling.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        validate_snapshots(&self.snapshot_times, self.scaling.horizon)?;
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", "must be finite and non-negative"));
        }
        if self.gamma == 0.0 && self.step.is_none() {
            return Err(invalid("step", "an explicit step is required when gamma = 0"));
        }
        if let Some(h) = self.step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(invalid("step", "must be positive"));
            }
        }
        self.beta_profile
            .with_range(ValueRange::positive())
            .lipschitz_check(1.0, 1e-3)
            .map_err(|e| invalid("beta_profile", e.to_string()))?;
        let horizon = self.scaling.horizon;
        self.tension
            .lipschitz_check(horizon, (horizon / 1000.0).max(1e-6))
            .map_err(|e| invalid("tension", e.to_string()))?;
        if let ChainInitial::State(s) = &self.initial {
            s.check()?;
            if s.n() != self.scaling.n {
                return Err(invalid("initial", "state size does not match N"));
            }
        }
        Ok(())
    }

    /// Largest `|τ̄|` over the run.
    fn tension_bound(&self) -> f64 {
        let horizon = self.snapshot_times.last().copied().unwrap_or(0.0);
        (0..=1000)
            .map(|k| self.tension.eval(horizon * k as f64 / 1000.0).abs())
            .fold(0.0, f64::max)
    }

    fn beta_min(&self) -> f64 {
        (0..=self.scaling.n)
            .map(|x| self.beta_profile.eval(x as f64 / self.scaling.n as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub t_macro: f64,
    pub state: ChainState,
}

#[derive(Clone, Debug)]
pub struct ChainRun {
    pub replica: u64,
    pub step: f64,
    pub steps: u64,
    pub snapshots: Vec<ChainSnapshot>,
    pub ledger: Vec<EnergyLedger>,
    /// Largest first-law residual seen after any step.
    pub max_residual: f64,
}

/// Force on each particle: `V'(r_{x+1}) - V'(r_x)`, and `τ - V'(r_N)` on the
/// last one.
#[inline]
fn forces(pot: Potential, r: &[f64], tau: f64, out: &mut [f64]) {
    let n = r.len();
    let mut right = tau;
    for x in (0..n).rev() {
        let here = pot.derivative(r[x]);
        out[x] = right - here;
        right = here;
    }
}

/// One velocity-Verlet step; returns the displacement of the last particle.
#[inline]
fn verlet(pot: Potential, state: &mut ChainState, tau: f64, h: f64, f: &mut [f64]) -> f64 {
    forces(pot, &state.r, tau, f);
    for (p, fx) in state.p.iter_mut().zip(f.iter()) {
        *p += 0.5 * h * fx;
    }
    let mut left = 0.0;
    for (r, &p) in state.r.iter_mut().zip(&state.p) {
        *r += h * (p - left);
        left = p;
    }
    let dq = h * left;
    forces(pot, &state.r, tau, f);
    for (p, fx) in state.p.iter_mut().zip(f.iter()) {
        *p += 0.5 * h * fx;
    }
    dq
}

/// Deterministic test: a chain started from local Gibbs samples at the
/// hottest temperature must keep its energy within 5% of `N/β` over 2000
/// Verlet steps.
pub fn stable_under_verlet(pot: Potential, beta: f64, tau: f64, h: f64, seed: SeedSpec) -> Result<bool> {
    let n = 16;
    let law = spring_law(tau, beta, pot, 1e-8)?;
    let mut rng = seed.rng();
    let mut state = ChainState {
        r: (0..n).map(|_| law.sample(&mut rng)).collect(),
        p: (0..n).map(|_| normal(&mut rng) / beta.sqrt()).collect(),
    };
    let mut f = vec![0.0; n];
    let h0 = state.energy(pot) * n as f64 - tau * state.r.iter().sum::<f64>();
    for _ in 0..2000 {
        verlet(pot, &mut state, tau, h, &mut f);
        let e = state.energy(pot) * n as f64 - tau * state.r.iter().sum::<f64>();
        if !e.is_finite() || (e - h0).abs() > 0.05 * n as f64 / beta {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Step actually used for `spec`.
pub fn resolve_step(spec: &ChainRunSpec) -> Result<f64> {
    let beta = spec.beta_min();
    let tau = spec.tension_bound();
    let probe = spec.seed.derive(0x57ab);
    match spec.step {
        Some(h) => {
            if stable_under_verlet(spec.potential, beta, tau, h, probe)? {
                Ok(h)
            } else {
                Err(Error::Unstable(format!("step {h} fails the energy-drift pre-run")))
            }
        }
        None => {
            let mut h = 1e-2 / spec.gamma;
            for _ in 0..20 {
                if stable_under_verlet(spec.potential, beta, tau, h, probe)? {
                    return Ok(h);
                }
                h *= 0.5;
            }
            Err(Error::Unstable("no stable step found".into()))
        }
    }
}

fn initial_state(spec: &ChainRunSpec, rng: &mut impl rand::Rng) -> Result<ChainState> {
    let n = spec.scaling.n;
    Ok(match &spec.initial {
        ChainInitial::Rest => ChainState::rest(n),
        ChainInitial::State(s) => s.clone(),
        ChainInitial::LocalGibbs => {
            let tau = spec.tension.eval(0.0);
            let mut r = Vec::with_capacity(n);
            let mut p = Vec::with_capacity(n);
            for x in 1..=n {
                let beta = spec.beta_at(x);
                let law = spring_law(tau, beta, spec.potential, 1e-10)?;
                r.push(law.sample(rng));
                p.push(normal(rng) / beta.sqrt());
            }
            ChainState { r, p }
        }
    })
}

const BLOW_UP: f64 = 1e8;

pub fn run_chain(spec: &ChainRunSpec) -> Result<ChainRun> {
    spec.validate()?;
    let h_target = resolve_step(spec)?;
    let pot = spec.potential;
    let n = spec.scaling.n;
    let nf = n as f64;
    let speed = spec.scaling.speedup();
    let horizon = *spec.snapshot_times.last().expect("validated");
    // Stretch the step slightly so the last snapshot lands on a step.
    let total_steps = (horizon * speed / h_target).ceil().max(1.0) as u64;
    let h = if horizon > 0.0 { horizon * speed / total_steps as f64 } else { h_target };
    let mut rng = spec.seed.rng();
    let mut state = initial_state(spec, &mut rng)?;
    let decay = (-spec.gamma * h).exp();
    let noise: Vec<f64> = (1..=n)
        .map(|x| ((1.0 - decay * decay) / spec.beta_at(x)).sqrt())
        .collect();
    let u0 = state.energy(pot);
    let (mut w, mut q) = (0.0, 0.0);
    let mut f = vec![0.0; n];
    let mut snapshots = Vec::with_capacity(spec.snapshot_times.len());
    let mut ledger = Vec::with_capacity(spec.snapshot_times.len());
    let mut max_residual = 0.0f64;
    let mut step = 0u64;
    let mut u = u0;
    for &t_snap in &spec.snapshot_times {
        let target = ((t_snap * speed / h).round() as u64).min(total_steps);
        while step < target {
            let t_mid = (step as f64 + 0.5) * h / speed;
            if spec.splitting == Splitting::Full {
                let tau = spec.tension.eval(t_mid);
                let dq = verlet(pot, &mut state, tau, h, &mut f);
                w += tau * dq / nf;
            }
            let mut kinetic = 0.0;
            for (p, s) in state.p.iter_mut().zip(&noise) {
                let before = *p;
                *p = before * decay + s * normal(&mut rng);
                kinetic += 0.5 * (*p * *p - before * before);
            }
            q += kinetic / nf;
            step += 1;
            u = state.energy(pot);
            if !u.is_finite() || u.abs() > BLOW_UP {
                return Err(Error::Unstable(format!(
                    "energy blow-up (U = {u}) at macroscopic time {}",
                    step as f64 * h / speed
                )));
            }
            max_residual = max_residual.max((u - u0 - w - q).abs());
        }
        snapshots.push(ChainSnapshot {
            t_macro: t_snap,
            state: state.clone(),
        });
        ledger.push(EnergyLedger {
            t_macro: t_snap,
            u,
            w,
            q,
            residual: (u - u0 - w - q).abs(),
        });
    }
    Ok(ChainRun {
        replica: spec.seed.replica_index,
        step: h,
        steps: step,
        snapshots,
        ledger,
        max_residual,
    })
}

pub fn run_chain_replicas(spec: &ChainRunSpec, replicas: u64) -> Result<Vec<ChainRun>> {
    spec.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|i| run_chain(&spec.for_replica(i)))
        .collect()
}

/// Block estimate of a per-particle field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    /// Block centre in `y = x/N`.
    pub y: f64,
    /// First and last particle index (1-based) in the block.
    pub first: usize,
    pub last: usize,
    pub estimate: EstimateCI,
}

/// Treats every (replica, snapshot in `window`) pair as one sample.
fn block_profile(
    runs: &[ChainRun],
    window: Range<usize>,
    block: usize,
    field: impl Fn(&ChainState, usize) -> f64,
) -> Result<Vec<BlockEstimate>> {
    if block == 0 {
        return Err(invalid("block", "must be positive"));
    }
    if runs.is_empty() || window.is_empty() {
        return Err(Error::InsufficientData("no snapshots selected".into()));
    }
    if runs.len() * window.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 replicas or a time-averaging window of 2 snapshots".into(),
        ));
    }
    let n = runs[0].snapshots[0].state.n();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let samples: Vec<f64> = runs
            .iter()
            .flat_map(|run| run.snapshots[window.clone()].iter())
            .map(|s| (start..end).map(|x| field(&s.state, x)).sum::<f64>() / (end - start) as f64)
            .collect();
        out.push(BlockEstimate {
            y: 0.5 * (start + 1 + end) as f64 / n as f64,
            first: start + 1,
            last: end,
            estimate: EstimateCI::from_samples(&samples)?,
        });
        start = end;
    }
    Ok(out)
}

/// Block-averaged strain.
pub fn empirical_strain_profile(runs: &[ChainRun], window: Range<usize>, block: usize) -> Result<Vec<BlockEstimate>> {
    block_profile(runs, window, block, |s, x| s.r[x])
}

/// Block-averaged `p²` (kinetic temperature).
pub fn empirical_temperature_profile(runs: &[ChainRun], window: Range<usize>, block: usize) -> Result<Vec<BlockEstimate>> {
    block_profile(runs, window, block, |s, x| s.p[x] * s.p[x])
}

/// Block-averaged particle energy `p²/2 + V(r)`.
pub fn empirical_energy_profile(
    runs: &[ChainRun],
    window: Range<usize>,
    block: usize,
    pot: Potential,
) -> Result<Vec<BlockEstimate>> {
    block_profile(runs, window, block, |s, x| 0.5 * s.p[x] * s.p[x] + pot.value(s.r[x]))
}

/// Cross-replica mean of `Q_N(t)` at every ledger time.
pub fn excess_heat_curve(runs: &[ChainRun]) -> Result<Vec<(f64, EstimateCI)>> {
    ledger_curve(runs, |l| l.q)
}

/// Cross-replica mean of an arbitrary ledger column.
pub fn ledger_curve(runs: &[ChainRun], column: impl Fn(&EnergyLedger) -> f64) -> Result<Vec<(f64, EstimateCI)>> {
    if runs.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 replicas".into()));
    }
    let k = runs[0].ledger.len();
    if runs.iter().any(|r| r.ledger.len() != k) {
        return Err(invalid("runs", "ledger lengths differ"));
    }
    (0..k)
        .map(|i| {
            let samples: Vec<f64> = runs.iter().map(|r| column(&r.ledger[i])).collect();
            Ok((runs[0].ledger[i].t_macro, EstimateCI::from_samples(&samples)?))
        })
        .collect()
}

/// Mean over replicas of the largest first-law residual, per unit of
/// macroscopic time.
pub fn first_law_residual_rate(runs: &[ChainRun]) -> Result<f64> {
    let horizon = runs
        .first()
        .and_then(|r| r.ledger.last())
        .map(|l| l.t_macro)
        .ok_or_else(|| Error::InsufficientData("no runs".into()))?;
    if horizon <= 0.0 {
        return Err(invalid("snapshot_times", "horizon must be positive"));
    }
    Ok(runs.iter().map(|r| r.max_residual).sum::<f64>() / runs.len() as f64 / horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, pot: Potential, tension: TimeProfile, gamma: f64, times: Vec<f64>) -> ChainRunSpec {
        ChainRunSpec::new(
            pot,
            TimeProfile::constant(1.0),
            tension,
            gamma,
            ScalingParams::new(n, 0.5, *times.last().unwrap()).unwrap(),
            times,
            SeedSpec::new(11, 0),
        )
    }

    #[test]
    fn forces_telescope() {
        let r = [0.1, -0.3, 0.5];
        let mut f = [0.0; 3];
        forces(Potential::Harmonic, &r, 0.7, &mut f);
        assert_eq!(f, [-0.3 - 0.1, 0.5 + 0.3, 0.7 - 0.5]);
        assert!((f.iter().sum::<f64>() - (0.7 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn isolated_chain_has_no_heat() {
        let s = spec(8, Potential::fpu(0.0, 1.0).unwrap(), TimeProfile::affine(0.0, 1.0), 0.0, vec![0.5, 1.0])
            .with_step(1e-2);
        let run = run_chain(&s).unwrap();
        assert!(run.ledger.iter().all(|l| l.q == 0.0));
        assert!(run.max_residual < 1e-3, "{}", run.max_residual);
    }

    #[test]
    fn zero_tension_no_work() {
        let s = spec(8, Potential::Harmonic, TimeProfile::constant(0.0), 1.0, vec![1.0]);
        let run = run_chain(&s).unwrap();
        assert_eq!(run.ledger[0].w, 0.0);
        assert!(run.ledger[0].residual < 1e-3);
    }

    #[test]
    fn thermostat_only_freezes_strain() {
        let mut s = spec(4, Potential::Harmonic, TimeProfile::constant(0.3), 1.0, vec![1.0]);
        s.splitting = Splitting::ThermostatOnly;
        s.initial = ChainInitial::State(ChainState {
            r: vec![0.1, 0.2, 0.3, 0.4],
            p: vec![0.0; 4],
        });
        let run = run_chain(&s).unwrap();
        assert_eq!(run.snapshots[0].state.r, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(run.ledger[0].w, 0.0);
        assert!(run.ledger[0].residual < 1e-12);
    }

    #[test]
    fn unstable_step_rejected() {
        let s = spec(8, Potential::fpu(0.0, 1.0).unwrap(), TimeProfile::constant(0.0), 1.0, vec![1.0]).with_step(1.5);
        assert!(matches!(run_chain(&s), Err(Error::Unstable(_))));
    }

    #[test]
    fn invalid_parameters() {
        let mut s = spec(4, Potential::Harmonic, TimeProfile::constant(0.0), 1.0, vec![1.0]);
        s.beta_profile = TimeProfile::affine(1.0, -2.0);
        assert!(s.validate().is_err());
        let s = spec(4, Potential::Harmonic, TimeProfile::constant(0.0), 0.0, vec![1.0]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_replica_needs_window() {
        let s = spec(4, Potential::Harmonic, TimeProfile::constant(0.0), 1.0, vec![0.5, 1.0]);
        let runs = vec![run_chain(&s).unwrap()];
        assert!(empirical_strain_profile(&runs, 1..2, 2).is_err());
        let prof = empirical_strain_profile(&runs, 0..2, 2).unwrap();
        assert_eq!(prof.len(), 2);
        assert_eq!((prof[1].first, prof[1].last), (3, 4));
    }
}
