//! Boundary-driven symmetric simple exclusion at the accelerated time scale.
//!
//! Bulk: every bond of `{-N,…,N}` exchanges its two occupation numbers at
//! rate ½. Boundary: the site `σN` flips at rate
//! `κ·ρ_σ(t)^{1-η(σN)}·(1-ρ_σ(t))^{η(σN)}`, where `κ` is the reservoir
//! coupling (`κ = 1` is the plain creation/annihilation generator).
//!
//! Simulation runs in microscopic time `s = N^{2+α}·t`. Boundary clocks ring
//! at the dominating rate `κ` per end and are thinned against the
//! instantaneous flip rate; between two boundary rings the bulk only needs a
//! Poisson number of uniformly chosen bond exchanges, since bulk rates do not
//! depend on time.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{exp1, quasi_static_profile, Drive, ReplicaRng, ScalingParams, SeedSpec, ValueRange};
use crate::stats::EstimateCI;

/// Occupation numbers `η(x) ∈ {0,1}` for `x ∈ {-N,…,N}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionConfig {
    n: usize,
    occupancy: Vec<u8>,
}

impl ExclusionConfig {
    pub fn new(n: usize, occupancy: Vec<u8>) -> Result<Self> {
        if occupancy.len() != 2 * n + 1 {
            return Err(invalid(
                "occupancy",
                format!("expected {} sites, got {}", 2 * n + 1, occupancy.len()),
            ));
        }
        if occupancy.iter().any(|&v| v > 1) {
            return Err(invalid("occupancy", "entries must be 0 or 1"));
        }
        Ok(ExclusionConfig { n, occupancy })
    }

    pub fn empty(n: usize) -> Self {
        ExclusionConfig {
            n,
            occupancy: vec![0; 2 * n + 1],
        }
    }

    pub fn full(n: usize) -> Self {
        ExclusionConfig {
            n,
            occupancy: vec![1; 2 * n + 1],
        }
    }

    pub fn bernoulli(n: usize, density: f64, rng: &mut impl Rng) -> Self {
        let occupancy = (0..2 * n + 1)
            .map(|_| u8::from(rng.random::<f64>() < density))
            .collect();
        ExclusionConfig { n, occupancy }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Occupation at lattice site `x ∈ {-N,…,N}`.
    #[inline]
    pub fn get(&self, x: i64) -> u8 {
        self.occupancy[(x + self.n as i64) as usize]
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    pub fn particles(&self) -> usize {
        self.occupancy.iter().map(|&v| v as usize).sum()
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let n = self.n as i64;
        -n..=n
    }
}

/// Initial state of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Config(ExclusionConfig),
    Empty,
    Full,
    Bernoulli(f64),
    /// Independent sites with the given means, indexed from `-N`.
    Product(Vec<f64>),
}

impl InitialCondition {
    /// Product law at the quasi-static profile of `drive` at time zero.
    pub fn local_equilibrium(n: usize, drive: &Drive) -> Result<Self> {
        let nf = n as f64;
        let mean = (0..2 * n + 1)
            .map(|i| quasi_static_profile((i as f64 - nf) / nf, 0.0, drive))
            .collect::<Result<_>>()?;
        Ok(InitialCondition::Product(mean))
    }

    fn realize(&self, n: usize, rng: &mut impl Rng) -> Result<ExclusionConfig> {
        match self {
            InitialCondition::Config(c) => {
                if c.n != n {
                    return Err(invalid("initial", "configuration size does not match N"));
                }
                Ok(c.clone())
            }
            InitialCondition::Empty => Ok(ExclusionConfig::empty(n)),
            InitialCondition::Full => Ok(ExclusionConfig::full(n)),
            InitialCondition::Bernoulli(rho) => {
                if !(0.0..=1.0).contains(rho) {
                    return Err(invalid("initial", format!("Bernoulli density {rho} outside [0,1]")));
                }
                Ok(ExclusionConfig::bernoulli(n, *rho, rng))
            }
            InitialCondition::Product(mean) => {
                if mean.len() != 2 * n + 1 {
                    return Err(invalid("initial", "product law size does not match N"));
                }
                if mean.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(invalid("initial", "product law means must lie in [0,1]"));
                }
                let occupancy = mean.iter().map(|&m| u8::from(rng.random::<f64>() < m)).collect();
                Ok(ExclusionConfig { n, occupancy })
            }
        }
    }

    /// Mean occupation of the initial ensemble, site by site.
    pub fn mean(&self, n: usize) -> Vec<f64> {
        match self {
            InitialCondition::Config(c) => c.occupancy.iter().map(|&v| v as f64).collect(),
            InitialCondition::Empty => vec![0.0; 2 * n + 1],
            InitialCondition::Full => vec![1.0; 2 * n + 1],
            InitialCondition::Bernoulli(rho) => vec![*rho; 2 * n + 1],
            InitialCondition::Product(mean) => mean.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SsepRunSpec {
    pub initial: InitialCondition,
    pub drive: Drive,
    pub scaling: ScalingParams,
    pub snapshot_times: Vec<f64>,
    pub seed: SeedSpec,
    /// Multiplies both boundary flip rates.
    pub coupling: f64,
    pub record_events: bool,
}

impl SsepRunSpec {
    pub fn new(
        initial: InitialCondition,
        drive: Drive,
        scaling: ScalingParams,
        snapshot_times: Vec<f64>,
        seed: SeedSpec,
    ) -> Self {
        SsepRunSpec {
            initial,
            drive,
            scaling,
            snapshot_times,
            seed,
            coupling: 1.0,
            record_events: false,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_event_log(mut self) -> Self {
        self.record_events = true;
        self
    }

    pub fn for_replica(&self, replica: u64) -> Self {
        let mut spec = self.clone();
        spec.seed = self.seed.with_replica(replica);
        spec
    }

    pub fn validate(&self) -> Result<()> {
        validate_snapshots(&self.snapshot_times, self.scaling.horizon)?;
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return Err(invalid("coupling", "reservoir coupling must be positive"));
        }
        let step = (self.scaling.horizon / 1000.0).max(1e-3);
        for side in [self.drive.minus, self.drive.plus] {
            side.with_range(ValueRange::closed(0.0, 1.0))
                .lipschitz_check(self.scaling.horizon, step)?;
        }
        Ok(())
    }

    /// Expected number of clock rings (bulk plus boundary candidates).
    pub fn expected_events(&self) -> f64 {
        let last = self.snapshot_times.last().copied().unwrap_or(0.0);
        (self.scaling.n as f64 + 2.0 * self.coupling) * self.scaling.macro_to_micro(last)
    }
}

pub(crate) fn validate_snapshots(times: &[f64], horizon: f64) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("snapshot_times", "at least one snapshot time required"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("snapshot_times", "must be sorted"));
    }
    if times.iter().any(|&t| !(t >= 0.0) || t > horizon * (1.0 + 1e-12)) {
        return Err(invalid("snapshot_times", format!("must lie in [0, {horizon}]")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t_macro: f64,
    pub config: ExclusionConfig,
}

/// Clock counters of one run.
///
/// `events_total` counts every clock ring (bond exchanges, including those
/// between equal occupations, plus boundary candidates); `events_boundary`
/// counts accepted boundary flips; `events_thinned_rejections` counts the
/// rejected boundary candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub events_total: u64,
    pub events_boundary: u64,
    pub events_thinned_rejections: u64,
}

impl EventCounts {
    pub fn merge(self, other: EventCounts) -> EventCounts {
        EventCounts {
            events_total: self.events_total + other.events_total,
            events_boundary: self.events_boundary + other.events_boundary,
            events_thinned_rejections: self.events_thinned_rejections
                + other.events_thinned_rejections,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    /// Exchange across the bond `(x, x+1)`.
    Exchange { bond: i64 },
    /// Flip at `±N`; `created` is true when a particle was added.
    Boundary { site: i64, created: bool },
}

/// Logged event. Bulk exchanges are generated in batches without individual
/// times, so only boundary events (and all events of the direct scheduler)
/// carry a time stamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t_micro: Option<f64>,
    pub kind: EventKind,
    pub particles_after: usize,
}

#[derive(Clone, Debug)]
pub struct SsepRun {
    pub replica: u64,
    pub snapshots: Vec<Snapshot>,
    pub counts: EventCounts,
    pub events: Option<Vec<Event>>,
}

impl SsepRun {
    pub fn snapshot(&self, k: usize) -> &ExclusionConfig {
        &self.snapshots[k].config
    }
}

struct Lattice {
    n: i64,
    occ: Vec<u8>,
    particles: usize,
    log: Option<Vec<Event>>,
}

impl Lattice {
    fn new(config: ExclusionConfig, record: bool) -> Self {
        let particles = config.particles();
        Lattice {
            n: config.n as i64,
            occ: config.occupancy,
            particles,
            log: record.then(Vec::new),
        }
    }

    #[inline]
    fn exchange(&mut self, bond: usize) {
        self.occ.swap(bond, bond + 1);
        if let Some(log) = self.log.as_mut() {
            log.push(Event {
                t_micro: None,
                kind: EventKind::Exchange {
                    bond: bond as i64 - self.n,
                },
                particles_after: self.particles,
            });
        }
    }

    fn flip(&mut self, index: usize, t: f64) {
        let created = self.occ[index] == 0;
        self.occ[index] = u8::from(created);
        if created {
            self.particles += 1;
        } else {
            self.particles -= 1;
        }
        if let Some(log) = self.log.as_mut() {
            log.push(Event {
                t_micro: Some(t),
                kind: EventKind::Boundary {
                    site: index as i64 - self.n,
                    created,
                },
                particles_after: self.particles,
            });
        }
    }

    fn config(&self) -> ExclusionConfig {
        ExclusionConfig {
            n: self.n as usize,
            occupancy: self.occ.clone(),
        }
    }
}

fn poisson_count(mean: f64, rng: &mut ReplicaRng) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    }
}

/// Exact-in-law simulation of one replica.
pub fn run_ssep(spec: &SsepRunSpec) -> Result<SsepRun> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let n = spec.scaling.n;
    let initial = spec.initial.realize(n, &mut rng)?;
    let mut lat = Lattice::new(initial, spec.record_events);

    let speed = spec.scaling.speedup();
    let bonds = 2 * n;
    let bulk_rate = 0.5 * bonds as f64;
    let boundary_rate = 2.0 * spec.coupling;
    let right = 2 * n;

    let mut counts = EventCounts::default();
    let mut snapshots = Vec::with_capacity(spec.snapshot_times.len());

    let bulk = |dt: f64, lat: &mut Lattice, rng: &mut ReplicaRng, counts: &mut EventCounts| {
        let k = poisson_count(bulk_rate * dt, rng);
        counts.events_total += k;
        for _ in 0..k {
            let bond = rng.random_range(0..bonds);
            lat.exchange(bond);
        }
    };

    let mut t = 0.0;
    let mut next_boundary = exp1(&mut rng) / boundary_rate;
    for &target_macro in &spec.snapshot_times {
        let target = target_macro * speed;
        while next_boundary <= target {
            bulk(next_boundary - t, &mut lat, &mut rng, &mut counts);
            t = next_boundary;
            counts.events_total += 1;
            let (rho_minus, rho_plus) = spec.drive.at(t / speed);
            let (index, rho) = if rng.random::<bool>() {
                (right, rho_plus)
            } else {
                (0, rho_minus)
            };
            let accept = if lat.occ[index] == 0 { rho } else { 1.0 - rho };
            if rng.random::<f64>() < accept {
                lat.flip(index, t);
                counts.events_boundary += 1;
            } else {
                counts.events_thinned_rejections += 1;
            }
            next_boundary = t + exp1(&mut rng) / boundary_rate;
        }
        bulk(target - t, &mut lat, &mut rng, &mut counts);
        t = target;
        snapshots.push(Snapshot {
            t_macro: target_macro,
            config: lat.config(),
        });
    }

    Ok(SsepRun {
        replica: spec.seed.replica_index,
        snapshots,
        counts,
        events: lat.log.take(),
    })
}

/// Reference scheduler for constant reservoirs: Gillespie over the exact
/// instantaneous rates, without thinning or batching. Only effective bond
/// exchanges are executed, so `events_total` counts state changes.
pub fn run_ssep_direct(spec: &SsepRunSpec) -> Result<SsepRun> {
    spec.validate()?;
    if !spec.drive.is_constant() {
        return Err(invalid("drive", "the direct scheduler needs constant reservoirs"));
    }
    let mut rng = spec.seed.rng();
    let n = spec.scaling.n;
    let initial = spec.initial.realize(n, &mut rng)?;
    let mut lat = Lattice::new(initial, spec.record_events);
    let speed = spec.scaling.speedup();
    let (rho_minus, rho_plus) = spec.drive.at(0.0);
    let kappa = spec.coupling;
    let right = 2 * n;
    let flip_rate = |occ: u8, rho: f64| kappa * if occ == 0 { rho } else { 1.0 - rho };

    let mut counts = EventCounts::default();
    let mut snapshots = Vec::new();
    let mut t = 0.0;
    let mut active: Vec<usize> = Vec::with_capacity(2 * n);
    for &target_macro in &spec.snapshot_times {
        let target = target_macro * speed;
        loop {
            active.clear();
            active.extend((0..2 * n).filter(|&b| lat.occ[b] != lat.occ[b + 1]));
            let left_rate = flip_rate(lat.occ[0], rho_minus);
            let right_rate = flip_rate(lat.occ[right], rho_plus);
            let bulk_rate = 0.5 * active.len() as f64;
            let total = bulk_rate + left_rate + right_rate;
            if total <= 0.0 {
                break;
            }
            let dt: f64 = exp1(&mut rng) / total;
            if t + dt > target {
                break;
            }
            t += dt;
            counts.events_total += 1;
            let u = rng.random::<f64>() * total;
            if u < bulk_rate {
                let b = active[((u / 0.5) as usize).min(active.len() - 1)];
                lat.exchange(b);
                if let Some(ev) = lat.log.as_mut().and_then(|l| l.last_mut()) {
                    ev.t_micro = Some(t);
                }
            } else if u < bulk_rate + left_rate {
                lat.flip(0, t);
                counts.events_boundary += 1;
            } else {
                lat.flip(right, t);
                counts.events_boundary += 1;
            }
        }
        // Exponential clocks are memoryless: restarting them at the snapshot
        // leaves the law unchanged.
        t = target;
        snapshots.push(Snapshot {
            t_macro: target_macro,
            config: lat.config(),
        });
    }
    Ok(SsepRun {
        replica: spec.seed.replica_index,
        snapshots,
        counts,
        events: lat.log.take(),
    })
}

/// Runs replicas `0..replicas` in parallel; output is ordered by replica.
pub fn run_ssep_replicas(spec: &SsepRunSpec, replicas: u64) -> Result<Vec<SsepRun>> {
    spec.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|i| run_ssep(&spec.for_replica(i)))
        .collect()
}

/// The `k`-th snapshot of every run.
pub fn snapshots_at(runs: &[SsepRun], k: usize) -> Vec<&ExclusionConfig> {
    runs.iter().map(|r| r.snapshot(k)).collect()
}

/// Per-site mean and standard error of `η_t(x)` across replicas.
pub fn empirical_profile(configs: &[&ExclusionConfig]) -> Result<Vec<EstimateCI>> {
    if configs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "empirical profile needs at least 2 replicas, got {}",
            configs.len()
        )));
    }
    let width = configs[0].occupancy.len();
    (0..width)
        .map(|i| {
            let col: Vec<f64> = configs.iter().map(|c| c.occupancy[i] as f64).collect();
            EstimateCI::from_samples(&col)
        })
        .collect()
}

/// Local functions available to [`empirical_local_average`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalObservable {
    /// `η(x)`
    Occupation,
    /// `η(x)·η(x+1)`
    AdjacentProduct,
    /// `(η(x) - ρ_N(x))·(η(x+1) - ρ_N(x+1))`, needs the one-point function.
    CenteredPair,
}

impl LocalObservable {
    /// Largest `x` at which the shifted observable is defined.
    fn last_site(&self, n: i64) -> i64 {
        match self {
            LocalObservable::Occupation => n,
            _ => n - 1,
        }
    }
}

impl FromStr for LocalObservable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupation" => Ok(LocalObservable::Occupation),
            "pair" | "adjacent_product" => Ok(LocalObservable::AdjacentProduct),
            "centered_pair" => Ok(LocalObservable::CenteredPair),
            other => Err(invalid("observable", format!("unknown observable `{other}`"))),
        }
    }
}

/// `(1/N)·Σ_x G(x/N)` over the sites where `observable` is defined: the
/// value of the local average when the observable is identically one.
pub fn window_mass(n: usize, observable: LocalObservable, window: impl Fn(f64) -> f64) -> f64 {
    let n = n as i64;
    (-n..=observable.last_site(n))
        .map(|x| window(x as f64 / n as f64))
        .sum::<f64>()
        / n as f64
}

/// Replica estimate of `(1/N)·Σ_x G(x/N)·θ_x φ(η_t)`.
///
/// `reference` supplies `ρ_N(x)` (indexed from `-N`) for the centered pair.
pub fn empirical_local_average(
    configs: &[&ExclusionConfig],
    observable: LocalObservable,
    window: impl Fn(f64) -> f64,
    reference: Option<&[f64]>,
) -> Result<EstimateCI> {
    if configs.len() < 2 {
        return Err(Error::InsufficientData("local average needs at least 2 replicas".into()));
    }
    let n = configs[0].n as i64;
    let offset = n as usize;
    let rho = match (observable, reference) {
        (LocalObservable::CenteredPair, Some(r)) if r.len() == 2 * offset + 1 => r,
        (LocalObservable::CenteredPair, _) => {
            return Err(invalid("reference", "centered pair needs the one-point profile over 2N+1 sites"))
        }
        (_, _) => &[][..],
    };
    let weights: Vec<f64> = (-n..=observable.last_site(n))
        .map(|x| window(x as f64 / n as f64))
        .collect();
    let samples: Vec<f64> = configs
        .iter()
        .map(|c| {
            let occ = &c.occupancy;
            let total: f64 = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    let v = match observable {
                        LocalObservable::Occupation => occ[i] as f64,
                        LocalObservable::AdjacentProduct => (occ[i] * occ[i + 1]) as f64,
                        LocalObservable::CenteredPair => {
                            (occ[i] as f64 - rho[i]) * (occ[i + 1] as f64 - rho[i + 1])
                        }
                    };
                    w * v
                })
                .sum();
            total / n as f64
        })
        .collect();
    EstimateCI::from_samples(&samples)
}

/// Cross-replica estimate of `v_N(x1, x2; t)` given the one-point function.
pub fn empirical_covariance(
    configs: &[&ExclusionConfig],
    x1: i64,
    x2: i64,
    reference: &[f64],
) -> Result<EstimateCI> {
    if x1 == x2 {
        return Err(invalid("x2", "covariance sites must be distinct"));
    }
    if configs.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 100 replicas, got {}",
            configs.len()
        )));
    }
    let n = configs[0].n as i64;
    if x1.abs() > n || x2.abs() > n {
        return Err(invalid("x1", "sites must lie in the lattice"));
    }
    let (i1, i2) = ((x1 + n) as usize, (x2 + n) as usize);
    let samples: Vec<f64> = configs
        .iter()
        .map(|c| (c.occupancy[i1] as f64 - reference[i1]) * (c.occupancy[i2] as f64 - reference[i2]))
        .collect();
    EstimateCI::from_samples(&samples)
}
