//! Single-point experiment runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    parse_drive, parse_exclusion_initial, parse_profile, parse_zr_initial, snapshot_grid, ChainBlock, DualBlock,
    ExperimentConfig, ModelKind, OracleBlock, SsepBlock, ThermoBlock, ZeroRangeBlock,
};
use super::output::{plot_script, sha256_hex, Artifact, Manifest};
use crate::chain::{empirical_strain_profile, ledger_curve, run_chain_replicas, ChainRunSpec};
use crate::dual::{absorption_decay_rate, dual_n_point, dual_one_point, exit_time_tail, run_stirring, DualProblem};
use crate::error::{Error, Result};
use crate::model::{quasi_static_profile, ScalingParams, SeedSpec, ValueRange};
use crate::oracle::{
    compare_limits, covariance_limit_green, covariance_limit_product_kernel, one_point_evolution,
    one_point_trajectory, two_point_evolution, ClosestFormula, MomentField, OracleOptions,
};
use crate::ssep::{empirical_profile, run_ssep_replicas, snapshots_at, EventCounts, SsepRunSpec};
use crate::stats::EstimateCI;
use crate::thermo::{clausius_residual, gibbs_potential, length, mean_energy, tension};
use crate::zero_range::{run_zero_range_replicas, zr_block_profile, zr_profile_limit, ZrRunSpec};

const TOL: f64 = 1e-10;

/// Origin of a reference value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Exact finite-N computation.
    Oracle,
    /// Closed-form expression derived independently.
    ClosedForm,
    /// Limit formula of the underlying theory.
    PaperFormula,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Oracle => "oracle",
            Provenance::ClosedForm => "closed_form",
            Provenance::PaperFormula => "paper_formula",
        }
    }
}

/// One scalar statistic of a run, with an optional reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub statistic: String,
    pub value: f64,
    pub stderr: f64,
    pub reference_value: Option<f64>,
    pub abs_err: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl StatRow {
    fn new(statistic: impl Into<String>, value: f64, stderr: f64) -> Self {
        StatRow {
            statistic: statistic.into(),
            value,
            stderr,
            reference_value: None,
            abs_err: None,
            provenance: None,
        }
    }

    fn estimate(statistic: impl Into<String>, e: EstimateCI) -> Self {
        Self::new(statistic, e.mean, e.stderr)
    }

    fn against(mut self, reference: f64, provenance: Provenance) -> Self {
        self.reference_value = Some(reference);
        self.abs_err = Some((self.value - reference).abs());
        self.provenance = Some(provenance);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub model: ModelKind,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub stats: Vec<StatRow>,
    pub manifest: Manifest,
}

/// Effective configuration as stored in the artifact; the output location
/// is not part of it.
pub(crate) fn config_text(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = ".".into();
    c.to_toml()
}

fn scaling(n: usize, alpha: f64, horizon: f64) -> Result<ScalingParams> {
    ScalingParams::new(n, alpha, horizon)
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T> {
    b.as_ref().ok_or_else(|| Error::Config(format!("`{name}` block missing")))
}

/// Rough count of elementary operations (events or particle updates) the
/// configuration asks for, summed over replicas.
pub fn estimated_work(cfg: &ExperimentConfig) -> Result<f64> {
    let reps = cfg.replicas as f64;
    Ok(match cfg.model {
        ModelKind::Ssep => {
            let b = block(&cfg.ssep, "ssep")?;
            let micro = scaling(b.n, b.alpha, b.horizon)?.macro_to_micro(last(&b.snapshot_times, b.horizon));
            reps * (b.n as f64 + 2.0 * b.coupling) * micro
        }
        ModelKind::ZeroRange => {
            let b = block(&cfg.zero_range, "zero_range")?;
            let t = last(&b.snapshot_times, b.horizon);
            let micro = scaling(b.n, b.alpha, b.horizon)?.macro_to_micro(t);
            let lam = parse_profile("lambda_minus", &b.lambda_minus, ValueRange::any())?
                .sup_on(t)
                .max(parse_profile("lambda_plus", &b.lambda_plus, ValueRange::any())?.sup_on(t));
            // Departure rate per site is at most of order max(1, density).
            let density = if b.rate.radius().is_finite() { lam / (1.0 - lam).max(1e-3) } else { lam };
            reps * (2 * b.n + 3) as f64 * micro * density.max(1.0)
        }
        ModelKind::Chain => {
            let b = block(&cfg.chain, "chain")?;
            let micro = scaling(b.n, b.alpha, b.horizon)?.macro_to_micro(last(&b.snapshot_times, b.horizon));
            let h = b.step.unwrap_or(1e-2 / b.gamma.max(1e-300));
            reps * b.n as f64 * (micro / h).ceil()
        }
        ModelKind::Dual => {
            let b = block(&cfg.dual, "dual")?;
            let micro = scaling(b.n, b.alpha, b.t)?.macro_to_micro(b.t);
            let absorb = 4.0 * ((b.n + 1) * (b.n + 1)) as f64;
            reps * (b.sites.len() as f64 * 2.0 * micro.min(absorb) + absorb)
        }
        ModelKind::Oracle => {
            let b = block(&cfg.oracle, "oracle")?;
            let m = (2 * b.n + 1) as f64;
            if b.pair {
                m * m * 1e3
            } else {
                m * 1e3
            }
        }
        ModelKind::Thermo => {
            let b = block(&cfg.thermo, "thermo")?;
            (b.tau.len() * b.beta.len()) as f64 * 1e4
        }
    })
}

fn last(times: &[f64], horizon: f64) -> f64 {
    times.last().copied().unwrap_or(horizon)
}

/// Runs the configured model and writes its artifact directory into
/// `cfg.output_dir`. Outputs are a pure function of the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let work = estimated_work(cfg)?;
    if work > cfg.max_work {
        return Err(Error::Budget(format!(
            "estimated work {work:.3e} exceeds max_work = {:.3e}; lower N, alpha, t or replicas, or raise max_work",
            cfg.max_work
        )));
    }
    let mut art = Artifact::create(&cfg.output_dir)?;
    let seed = SeedSpec::new(cfg.master_seed, 0);
    let stats = match cfg.model {
        ModelKind::Ssep => run_ssep_model(block(&cfg.ssep, "ssep")?, cfg.replicas, seed, &mut art)?,
        ModelKind::ZeroRange => run_zr_model(block(&cfg.zero_range, "zero_range")?, cfg.replicas, seed, &mut art)?,
        ModelKind::Chain => run_chain_model(block(&cfg.chain, "chain")?, cfg.replicas, seed, &mut art)?,
        ModelKind::Dual => run_dual_model(block(&cfg.dual, "dual")?, cfg.replicas, seed, &mut art)?,
        ModelKind::Oracle => run_oracle_model(block(&cfg.oracle, "oracle")?, &mut art)?,
        ModelKind::Thermo => run_thermo_model(block(&cfg.thermo, "thermo")?, &mut art)?,
    };
    let text = config_text(cfg);
    art.write_json("summary.json", &stats)?;
    art.write_bytes("plot.py", plot_script(cfg.model.name()).as_bytes())?;
    art.write_bytes("config.toml", text.as_bytes())?;
    let manifest = art.finish(cfg.model.name(), sha256_hex(text.as_bytes()), cfg.master_seed, cfg.replicas)?;
    let size = cfg.size();
    Ok(ExperimentSummary {
        model: cfg.model,
        n: size.map(|s| s.0),
        alpha: size.map(|s| s.1),
        stats,
        manifest,
    })
}

#[derive(Serialize)]
struct OccupationRow {
    replica: u64,
    t_macro: f64,
    x: i64,
    eta: u32,
}

#[derive(Serialize)]
struct ProfileRow {
    t_macro: f64,
    x: i64,
    y: f64,
    mean: f64,
    stderr: f64,
    reference: f64,
    provenance: Provenance,
}

fn run_ssep_model(b: &SsepBlock, replicas: u64, seed: SeedSpec, art: &mut Artifact) -> Result<Vec<StatRow>> {
    let drive = parse_drive(&b.rho_minus, &b.rho_plus, ValueRange::closed(0.0, 1.0), b.horizon)?;
    let initial = parse_exclusion_initial(&b.initial, b.n, &drive)?;
    let sc = scaling(b.n, b.alpha, b.horizon)?;
    let times = snapshot_grid(&b.snapshot_times, b.horizon);
    let spec = SsepRunSpec::new(initial.clone(), drive, sc, times.clone(), seed).with_coupling(b.coupling);
    spec.validate()?;
    let runs = run_ssep_replicas(&spec, replicas)?;
    let n = b.n as i64;

    if b.write_snapshots {
        let rows = runs.iter().flat_map(|r| {
            r.snapshots.iter().flat_map(move |s| {
                s.config.occupancy().iter().enumerate().map(move |(i, &eta)| OccupationRow {
                    replica: r.replica,
                    t_macro: s.t_macro,
                    x: i as i64 - n,
                    eta: eta as u32,
                })
            })
        });
        art.write_csv("snapshots.csv", rows)?;
    }
    let counts = runs.iter().fold(EventCounts::default(), |acc, r| acc.merge(r.counts));
    art.write_json("events.json", &counts)?;

    let opts = OracleOptions::default().with_coupling(b.coupling);
    let oracle = one_point_trajectory(&drive, &sc, &initial.mean(b.n), &times, &opts, |_, _| {})?;
    let mut rows = Vec::new();
    let mut last_profile = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let prof = empirical_profile(&snapshots_at(&runs, k))?;
        for (i, e) in prof.iter().enumerate() {
            rows.push(ProfileRow {
                t_macro: t,
                x: i as i64 - n,
                y: (i as f64 - b.n as f64) / b.n as f64,
                mean: e.mean,
                stderr: e.stderr,
                reference: oracle[k][i],
                provenance: Provenance::Oracle,
            });
        }
        last_profile = prof;
    }
    art.write_csv("profile.csv", rows)?;

    let t = *times.last().expect("non-empty");
    let rho_last = oracle.last().expect("non-empty");
    let centre = last_profile[b.n];
    let mass = EstimateCI::from_samples(
        &runs
            .iter()
            .map(|r| r.snapshots.last().expect("non-empty").config.particles() as f64 / (2 * b.n + 1) as f64)
            .collect::<Vec<_>>(),
    )?;
    let oracle_mass = rho_last.iter().sum::<f64>() / rho_last.len() as f64;
    Ok(vec![
        StatRow::estimate("rho_center", centre).against(rho_last[b.n], Provenance::Oracle),
        StatRow::estimate("mean_density", mass).against(oracle_mass, Provenance::Oracle),
        StatRow::new("rho_center_oracle", rho_last[b.n], 0.0)
            .against(quasi_static_profile(0.0, t, &drive)?, Provenance::PaperFormula),
    ])
}

#[derive(Serialize)]
struct BlockRow {
    t_macro: f64,
    first: i64,
    last: i64,
    y: f64,
    mean: f64,
    stderr: f64,
    reference: f64,
    provenance: Provenance,
}

fn run_zr_model(b: &ZeroRangeBlock, replicas: u64, seed: SeedSpec, art: &mut Artifact) -> Result<Vec<StatRow>> {
    let range = ValueRange {
        lo: 0.0,
        hi: b.rate.radius(),
        lo_open: false,
        hi_open: true,
    };
    let drive = parse_drive(&b.lambda_minus, &b.lambda_plus, range, b.horizon)?;
    let initial = parse_zr_initial(&b.initial)?;
    let sc = scaling(b.n, b.alpha, b.horizon)?;
    let times = snapshot_grid(&b.snapshot_times, b.horizon);
    let spec = ZrRunSpec::new(initial, b.rate, drive, sc, times.clone(), seed);
    spec.validate()?;
    let runs = run_zero_range_replicas(&spec, replicas)?;
    let n = b.n as i64;

    if b.write_snapshots {
        let rows = runs.iter().flat_map(|r| {
            r.snapshots.iter().flat_map(move |s| {
                s.config.occupancy().iter().enumerate().map(move |(i, &eta)| OccupationRow {
                    replica: r.replica,
                    t_macro: s.t_macro,
                    x: i as i64 - n,
                    eta,
                })
            })
        });
        art.write_csv("snapshots.csv", rows)?;
    }
    let counts = runs.iter().fold(EventCounts::default(), |acc, r| acc.merge(r.counts));
    art.write_json("events.json", &counts)?;

    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let blocks = zr_block_profile(&runs, k, b.block)?;
        let last_k = k + 1 == times.len();
        let mut sup = 0.0f64;
        for (sites, e) in &blocks {
            let y = 0.5 * (sites[0] + sites[sites.len() - 1]) as f64 / b.n as f64;
            let limit = zr_profile_limit(y, t, &drive, b.rate, TOL)?;
            sup = sup.max((e.mean - limit).abs());
            rows.push(BlockRow {
                t_macro: t,
                first: sites[0],
                last: sites[sites.len() - 1],
                y,
                mean: e.mean,
                stderr: e.stderr,
                reference: limit,
                provenance: Provenance::PaperFormula,
            });
            if last_k && sites.contains(&0) {
                stats.push(StatRow::estimate("density_center_block", *e).against(limit, Provenance::PaperFormula));
            }
        }
        if last_k {
            stats.push(StatRow::new("block_profile_sup_err", sup, 0.0));
        }
    }
    art.write_csv("profile.csv", rows)?;
    Ok(stats)
}

#[derive(Serialize)]
struct ChainSnapshotRow {
    replica: u64,
    t_macro: f64,
    x: usize,
    r: f64,
    p: f64,
}

#[derive(Serialize)]
struct LedgerRow {
    replica: u64,
    t_macro: f64,
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "Q")]
    q: f64,
    residual: f64,
}

#[derive(Serialize)]
struct StrainRow {
    t_macro: f64,
    y: f64,
    first: usize,
    last: usize,
    mean: f64,
    stderr: f64,
    reference: f64,
    provenance: Provenance,
}

#[derive(Serialize)]
struct ClausiusRecord {
    t: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "dF")]
    df: f64,
    residual: f64,
    alpha: f64,
    #[serde(rename = "N")]
    n: usize,
}

fn run_chain_model(b: &ChainBlock, replicas: u64, seed: SeedSpec, art: &mut Artifact) -> Result<Vec<StatRow>> {
    let beta = parse_profile("beta", &b.beta, ValueRange::positive())?;
    let tension_profile = parse_profile("tension", &b.tension, ValueRange::any())?;
    let sc = scaling(b.n, b.alpha, b.horizon)?;
    let times = snapshot_grid(&b.snapshot_times, b.horizon);
    let mut spec = ChainRunSpec::new(b.potential, beta, tension_profile, b.gamma, sc, times.clone(), seed);
    if let Some(h) = b.step {
        spec = spec.with_step(h);
    }
    spec.validate()?;
    let runs = run_chain_replicas(&spec, replicas)?;

    if b.write_snapshots {
        let rows = runs.iter().flat_map(|run| {
            run.snapshots.iter().flat_map(move |s| {
                s.state.r.iter().zip(&s.state.p).enumerate().map(move |(i, (&r, &p))| ChainSnapshotRow {
                    replica: run.replica,
                    t_macro: s.t_macro,
                    x: i + 1,
                    r,
                    p,
                })
            })
        });
        art.write_csv("snapshots.csv", rows)?;
    }
    let ledger_rows = runs.iter().flat_map(|run| {
        run.ledger.iter().map(move |l| LedgerRow {
            replica: run.replica,
            t_macro: l.t_macro,
            u: l.u,
            w: l.w,
            q: l.q,
            residual: l.residual,
        })
    });
    art.write_csv("ledger.csv", ledger_rows)?;

    let mut strain_rows = Vec::new();
    let mut block_means = Vec::with_capacity(times.len());
    let mut centre = None;
    for (k, &t) in times.iter().enumerate() {
        let prof = empirical_strain_profile(&runs, k..k + 1, b.block)?;
        let tau = spec.tension.eval(t);
        for (j, be) in prof.iter().enumerate() {
            let limit = length(tau, spec.beta_profile.eval(be.y), b.potential, TOL)?;
            strain_rows.push(StrainRow {
                t_macro: t,
                y: be.y,
                first: be.first,
                last: be.last,
                mean: be.estimate.mean,
                stderr: be.estimate.stderr,
                reference: limit,
                provenance: Provenance::PaperFormula,
            });
            if k + 1 == times.len() && j == prof.len() / 2 {
                centre = Some(StatRow::estimate("strain_center_block", be.estimate).against(limit, Provenance::PaperFormula));
            }
        }
        block_means.push(prof.iter().map(|be| be.estimate.mean).collect::<Vec<_>>());
    }
    art.write_csv("strain_profile.csv", strain_rows)?;

    let work: Vec<f64> = ledger_curve(&runs, |l| l.w)?.iter().map(|(_, e)| e.mean).collect();
    let clausius = clausius_residual(&times, &work, &block_means, &spec.beta_profile, b.potential, TOL)?;
    let records: Vec<ClausiusRecord> = clausius
        .iter()
        .map(|c| ClausiusRecord {
            t: c.t,
            w: c.w,
            df: c.df,
            residual: c.residual,
            alpha: b.alpha,
            n: b.n,
        })
        .collect();
    art.write_json("clausius.json", &records)?;

    let residuals: Vec<f64> = runs.iter().map(|r| r.max_residual).collect();
    let mut stats = vec![StatRow::estimate("first_law_max_residual", EstimateCI::from_samples(&residuals)?)
        .against(0.0, Provenance::ClosedForm)];
    stats.extend(centre);
    let last = clausius.last().expect("non-empty");
    stats.push(StatRow::new("work", last.w, 0.0).against(last.df, Provenance::PaperFormula));
    Ok(stats)
}

#[derive(Serialize)]
struct WalkerRow {
    replica: u64,
    walker: usize,
    absorbed: bool,
    exit_side: Option<i8>,
    tau: Option<f64>,
}

#[derive(Serialize)]
struct SurvivalRow {
    s: f64,
    tail: f64,
    stderr: f64,
}

fn run_dual_model(b: &DualBlock, replicas: u64, seed: SeedSpec, art: &mut Artifact) -> Result<Vec<StatRow>> {
    let drive = parse_drive(&b.rho_minus, &b.rho_plus, ValueRange::closed(0.0, 1.0), b.t)?;
    let initial = parse_exclusion_initial(&b.initial, b.n, &drive)?;
    let sc = scaling(b.n, b.alpha, b.t)?;
    let t_micro = sc.macro_to_micro(b.t);
    let joint_seed = seed.derive(1);

    // Same streams as the joint estimator below, so these walkers are the
    // ones behind that estimate.
    let ensembles = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = joint_seed.with_replica(i).rng();
            run_stirring(&b.sites, b.n, t_micro, b.boundary_rate, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = ensembles.iter().enumerate().flat_map(|(i, ens)| {
        ens.outcomes.iter().enumerate().map(move |(w, o)| WalkerRow {
            replica: i as u64,
            walker: w,
            absorbed: o.absorbed,
            exit_side: o.exit_side,
            tau: o.tau,
        })
    });
    art.write_csv("walkers.csv", rows)?;

    let nn = (b.n * b.n) as f64;
    let s_grid: Vec<f64> = b.survival_grid.iter().map(|s| s * nn).collect();
    let curve = exit_time_tail(b.survival_start, b.n, &s_grid, replicas, seed.derive(2))?;
    let rows = curve.s.iter().zip(&curve.tail).zip(&curve.stderr).map(|((&s, &tail), &stderr)| SurvivalRow {
        s,
        tail,
        stderr,
    });
    art.write_csv("survival.csv", rows)?;

    let problem = DualProblem {
        initial: &initial,
        drive: &drive,
        scaling: sc,
        boundary_rate: b.boundary_rate,
    };
    let opts = OracleOptions::default().with_coupling(b.boundary_rate);
    let mean0 = initial.mean(b.n);
    let n = b.n as i64;
    let mut stats = Vec::new();
    let rho = one_point_evolution(&drive, &sc, &mean0, b.t, &opts)?;
    for (k, &x) in b.sites.iter().enumerate() {
        let e = dual_one_point(&problem, x, b.t, replicas, seed.derive(100 + k as u64))?;
        stats.push(StatRow::estimate(format!("one_point({x})"), e).against(rho[(x + n) as usize], Provenance::Oracle));
    }
    if b.sites.len() >= 2 {
        let e = dual_n_point(&problem, &b.sites, b.t, replicas, joint_seed)?;
        let mut row = StatRow::estimate("joint_moment", e);
        if b.sites.len() == 2 {
            let field = two_point_evolution(&drive, &sc, &MomentField::product(mean0)?, b.t, &opts)?;
            row = row.against(field.pair_moment(b.sites[0], b.sites[1]), Provenance::Oracle);
        }
        stats.push(row);
    }
    if let Some(rate) = curve.fitted_rate {
        stats.push(StatRow::new("exit_decay_rate", rate, 0.0).against(absorption_decay_rate(b.n), Provenance::Oracle));
    }
    Ok(stats)
}

#[derive(Serialize)]
struct OnePointRow {
    x: i64,
    rho: f64,
}

#[derive(Serialize)]
struct TwoPointRow {
    x1: i64,
    x2: i64,
    v: f64,
}

#[derive(Serialize)]
struct ComparisonReport {
    max_abs_err: f64,
    which_formula_closer: Option<ClosestFormula>,
    fitted_rate: Option<f64>,
}

const FORMULA_REL_TOL: f64 = 0.05;

fn run_oracle_model(b: &OracleBlock, art: &mut Artifact) -> Result<Vec<StatRow>> {
    let drive = parse_drive(&b.rho_minus, &b.rho_plus, ValueRange::closed(0.0, 1.0), b.t)?;
    let initial = parse_exclusion_initial(&b.initial, b.n, &drive)?;
    let sc = scaling(b.n, b.alpha, b.t)?;
    let opts = OracleOptions::default().with_coupling(b.coupling).with_tolerance(b.rtol, b.atol);
    let mean0 = initial.mean(b.n);
    let n = b.n as i64;
    let nf = b.n as f64;

    let field = if b.pair {
        two_point_evolution(&drive, &sc, &MomentField::product(mean0)?, b.t, &opts)?
    } else {
        MomentField::product(one_point_evolution(&drive, &sc, &mean0, b.t, &opts)?)?
    };
    let rho = &field.one_point;
    art.write_csv(
        "one_point.csv",
        rho.iter().enumerate().map(|(i, &rho)| OnePointRow { x: i as i64 - n, rho }),
    )?;
    let limit = |i: usize| quasi_static_profile((i as f64 - nf) / nf, b.t, &drive);
    let mut one_point_err = 0.0f64;
    for (i, &v) in rho.iter().enumerate() {
        one_point_err = one_point_err.max((v - limit(i)?).abs());
    }
    let mut stats = vec![
        StatRow::new("rho_center", rho[b.n], 0.0).against(limit(b.n)?, Provenance::PaperFormula),
        StatRow::new("one_point_sup_err", one_point_err, 0.0),
    ];

    let report = if b.pair {
        art.write_csv(
            "two_point.csv",
            field.two_point.entries().map(|(x1, x2, v)| TwoPointRow { x1, x2, v }),
        )?;
        let mut points = Vec::new();
        let mut estimates = Vec::new();
        for &[r1, r2] in &b.points {
            let (r1, r2) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let (x1, x2) = ((r1 * nf).round() as i64, (r2 * nf).round() as i64);
            if x1 == x2 || x1.abs() > n || x2.abs() > n {
                return Err(Error::Config(format!(
                    "`oracle.points`: ({r1}, {r2}) maps to sites ({x1}, {x2}); need distinct sites in the lattice"
                )));
            }
            let scaled = nf * field.two_point.get(x1, x2);
            let (q1, q2) = (x1 as f64 / nf, x2 as f64 / nf);
            stats.push(
                StatRow::new(format!("cov_scaled({r1},{r2})"), scaled, 0.0)
                    .against(covariance_limit_green(q1, q2, b.t, &drive)?, Provenance::ClosedForm),
            );
            stats.push(
                StatRow::new(format!("cov_scaled_vs_product_kernel({r1},{r2})"), scaled, 0.0)
                    .against(covariance_limit_product_kernel(q1, q2, b.t, &drive)?, Provenance::PaperFormula),
            );
            points.push((q1, q2));
            estimates.push(scaled);
        }
        let cmp = compare_limits(&points, &estimates, b.t, &drive, FORMULA_REL_TOL)?;
        ComparisonReport {
            max_abs_err: cmp.max_abs_err,
            which_formula_closer: Some(cmp.which_formula_closer),
            fitted_rate: None,
        }
    } else {
        ComparisonReport {
            max_abs_err: one_point_err,
            which_formula_closer: None,
            fitted_rate: None,
        }
    };
    art.write_json("comparison.json", &report)?;
    Ok(stats)
}

#[derive(Serialize)]
struct ThermoRow {
    tau: f64,
    beta: f64,
    #[serde(rename = "G")]
    g: f64,
    r: f64,
    u: f64,
}

fn run_thermo_model(b: &ThermoBlock, art: &mut Artifact) -> Result<Vec<StatRow>> {
    let mut rows = Vec::new();
    let mut roundtrip = 0.0f64;
    for &beta in &b.beta {
        for &tau in &b.tau {
            let r = length(tau, beta, b.potential, b.tol)?;
            rows.push(ThermoRow {
                tau,
                beta,
                g: gibbs_potential(tau, beta, b.potential, b.tol)?,
                r,
                u: mean_energy(tau, beta, b.potential, b.tol)?,
            });
            roundtrip = roundtrip.max((tension(r, beta, b.potential, b.tol)? - tau).abs());
        }
    }
    art.write_csv("table.csv", rows)?;
    Ok(vec![StatRow::new("tension_roundtrip_max_err", roundtrip, 0.0)])
}
