//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Drive, ProfileKind, ScalingParams, TimeProfile, ValueRange};
use crate::ssep::InitialCondition;
use crate::thermo::Potential;
use crate::zero_range::{RateFunction, ZrInitial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ssep,
    ZeroRange,
    Chain,
    Dual,
    Oracle,
    Thermo,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Ssep => "ssep",
            ModelKind::ZeroRange => "zero_range",
            ModelKind::Chain => "chain",
            ModelKind::Dual => "dual",
            ModelKind::Oracle => "oracle",
            ModelKind::Thermo => "thermo",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub alpha: Vec<f64>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn local_eq() -> String {
    "local_equilibrium".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsepBlock {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub rho_minus: String,
    pub rho_plus: String,
    /// `empty`, `full`, `bernoulli(p)` or `local_equilibrium`.
    #[serde(default = "local_eq")]
    pub initial: String,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "yes")]
    pub write_snapshots: bool,
}

fn zr_empty() -> String {
    "empty".into()
}
fn four() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroRangeBlock {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub rate: RateFunction,
    pub lambda_minus: String,
    pub lambda_plus: String,
    /// `empty` or `equilibrium(λ)`.
    #[serde(default = "zr_empty")]
    pub initial: String,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "four")]
    pub block: usize,
    #[serde(default = "yes")]
    pub write_snapshots: bool,
}

fn eight() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub potential: Potential,
    /// Inverse temperature as a function of `y ∈ [0, 1]`.
    pub beta: String,
    pub tension: String,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "eight")]
    pub block: usize,
    #[serde(default = "yes")]
    pub write_snapshots: bool,
}

fn origin() -> Vec<i64> {
    vec![0]
}
fn survival_grid() -> Vec<f64> {
    (1..=12).map(|k| 0.25 * k as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualBlock {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub t: f64,
    pub rho_minus: String,
    pub rho_plus: String,
    #[serde(default = "local_eq")]
    pub initial: String,
    /// Walker start sites.
    #[serde(default = "origin")]
    pub sites: Vec<i64>,
    #[serde(default = "one")]
    pub boundary_rate: f64,
    #[serde(default)]
    pub survival_start: i64,
    /// Survival grid in units of `N²` microscopic time.
    #[serde(default = "survival_grid")]
    pub survival_grid: Vec<f64>,
}

fn default_points() -> Vec<[f64; 2]> {
    vec![[-0.5, 0.5], [0.25, 0.5]]
}
fn rtol() -> f64 {
    1e-9
}
fn atol() -> f64 {
    1e-11
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub t: f64,
    pub rho_minus: String,
    pub rho_plus: String,
    #[serde(default = "local_eq")]
    pub initial: String,
    #[serde(default = "yes")]
    pub pair: bool,
    /// Macroscopic point pairs `(r1, r2)` for the covariance comparison.
    #[serde(default = "default_points")]
    pub points: Vec<[f64; 2]>,
    #[serde(default = "rtol")]
    pub rtol: f64,
    #[serde(default = "atol")]
    pub atol: f64,
    #[serde(default = "one")]
    pub coupling: f64,
}

fn thermo_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoBlock {
    pub potential: Potential,
    pub tau: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default = "thermo_tol")]
    pub tol: f64,
}

fn default_replicas() -> u64 {
    100
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_budget() -> f64 {
    1e10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Upper bound on elementary operations (events, particle steps).
    #[serde(default = "default_budget")]
    pub max_work: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssep: Option<SsepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_range: Option<ZeroRangeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermo: Option<ThermoBlock>,
}

fn cfg_err(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {reason}"))
}

pub(crate) fn parse_profile(field: &str, s: &str, range: ValueRange) -> Result<TimeProfile> {
    let kind: ProfileKind = s.parse().map_err(|e| cfg_err(field, e))?;
    Ok(TimeProfile::new(kind, range))
}

pub(crate) fn parse_drive(minus: &str, plus: &str, range: ValueRange, horizon: f64) -> Result<Drive> {
    let m = parse_profile("minus", minus, range)?;
    let p = parse_profile("plus", plus, range)?;
    let step = (horizon / 1000.0).max(1e-6);
    m.lipschitz_check(horizon, step).map_err(|e| cfg_err("minus", e))?;
    p.lipschitz_check(horizon, step).map_err(|e| cfg_err("plus", e))?;
    Ok(Drive::new(m, p))
}

fn call_arg(s: &str, name: &str) -> Option<Result<f64>> {
    let inner = s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
    Some(
        inner
            .trim()
            .parse()
            .map_err(|_| cfg_err("initial", format!("bad number in `{s}`"))),
    )
}

pub(crate) fn parse_exclusion_initial(s: &str, n: usize, drive: &Drive) -> Result<InitialCondition> {
    let s = s.trim();
    match s {
        "empty" => Ok(InitialCondition::Empty),
        "full" => Ok(InitialCondition::Full),
        "local_equilibrium" => InitialCondition::local_equilibrium(n, drive),
        _ => match call_arg(s, "bernoulli") {
            Some(p) => Ok(InitialCondition::Bernoulli(p?)),
            None => Err(cfg_err("initial", format!("unknown initial condition `{s}`"))),
        },
    }
}

pub(crate) fn parse_zr_initial(s: &str) -> Result<ZrInitial> {
    let s = s.trim();
    if s == "empty" {
        return Ok(ZrInitial::Empty);
    }
    match call_arg(s, "equilibrium") {
        Some(l) => Ok(ZrInitial::Equilibrium(l?)),
        None => Err(cfg_err("initial", format!("unknown initial condition `{s}`"))),
    }
}

pub(crate) fn snapshot_grid(times: &[f64], horizon: f64) -> Vec<f64> {
    if times.is_empty() {
        vec![horizon]
    } else {
        times.to_vec()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("empty configuration; `model` is required".into()));
        }
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// `(N, α)` of the selected model block, if it has them.
    pub fn size(&self) -> Option<(usize, f64)> {
        match self.model {
            ModelKind::Ssep => self.ssep.as_ref().map(|b| (b.n, b.alpha)),
            ModelKind::ZeroRange => self.zero_range.as_ref().map(|b| (b.n, b.alpha)),
            ModelKind::Chain => self.chain.as_ref().map(|b| (b.n, b.alpha)),
            ModelKind::Dual => self.dual.as_ref().map(|b| (b.n, b.alpha)),
            ModelKind::Oracle => self.oracle.as_ref().map(|b| (b.n, b.alpha)),
            ModelKind::Thermo => None,
        }
    }

    /// Copy with `N` and `α` replaced in the selected model block.
    pub fn with_size(&self, n: usize, alpha: f64) -> Self {
        let mut c = self.clone();
        macro_rules! set {
            ($b:expr) => {
                if let Some(b) = $b.as_mut() {
                    b.n = n;
                    b.alpha = alpha;
                }
            };
        }
        match c.model {
            ModelKind::Ssep => set!(c.ssep),
            ModelKind::ZeroRange => set!(c.zero_range),
            ModelKind::Chain => set!(c.chain),
            ModelKind::Dual => set!(c.dual),
            ModelKind::Oracle => set!(c.oracle),
            ModelKind::Thermo => {}
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let min_replicas = match self.model {
            ModelKind::Oracle | ModelKind::Thermo => 1,
            _ => 2,
        };
        if self.replicas < min_replicas {
            return Err(cfg_err("replicas", format!("need at least {min_replicas}")));
        }
        let missing = |name: &str| cfg_err(name, format!("model `{name}` selected but its block is missing"));
        let check_size = |n: usize, alpha: f64| -> Result<()> {
            ScalingParams::new(n, alpha, 1.0).map(|_| ()).map_err(|e| cfg_err("alpha/n", e))
        };
        match self.model {
            ModelKind::Ssep => {
                let b = self.ssep.as_ref().ok_or_else(|| missing("ssep"))?;
                check_size(b.n, b.alpha)?;
                let d = parse_drive(&b.rho_minus, &b.rho_plus, ValueRange::closed(0.0, 1.0), b.horizon)?;
                parse_exclusion_initial(&b.initial, b.n, &d)?;
            }
            ModelKind::ZeroRange => {
                let b = self.zero_range.as_ref().ok_or_else(|| missing("zero_range"))?;
                check_size(b.n, b.alpha)?;
                let range = ValueRange {
                    lo: 0.0,
                    hi: b.rate.radius(),
                    lo_open: false,
                    hi_open: true,
                };
                parse_drive(&b.lambda_minus, &b.lambda_plus, range, b.horizon)?;
                parse_zr_initial(&b.initial)?;
            }
            ModelKind::Chain => {
                let b = self.chain.as_ref().ok_or_else(|| missing("chain"))?;
                check_size(b.n, b.alpha)?;
                parse_profile("beta", &b.beta, ValueRange::positive())?;
                parse_profile("tension", &b.tension, ValueRange::any())?;
                if b.block == 0 || b.n % b.block != 0 {
                    return Err(cfg_err("chain.block", "must be positive and divide n"));
                }
            }
            ModelKind::Dual => {
                let b = self.dual.as_ref().ok_or_else(|| missing("dual"))?;
                check_size(b.n, b.alpha)?;
                let d = parse_drive(&b.rho_minus, &b.rho_plus, ValueRange::closed(0.0, 1.0), b.t)?;
                parse_exclusion_initial(&b.initial, b.n, &d)?;
                if b.sites.is_empty() {
                    return Err(cfg_err("sites", "need at least one start site"));
                }
            }
            ModelKind::Oracle => {
                let b = self.oracle.as_ref().ok_or_else(|| missing("oracle"))?;
                check_size(b.n, b.alpha)?;
                let d = parse_drive(&b.rho_minus, &b.rho_plus, ValueRange::closed(0.0, 1.0), b.t)?;
                parse_exclusion_initial(&b.initial, b.n, &d)?;
            }
            ModelKind::Thermo => {
                let b = self.thermo.as_ref().ok_or_else(|| missing("thermo"))?;
                if b.tau.is_empty() || b.beta.is_empty() {
                    return Err(cfg_err("thermo", "tau and beta grids must be non-empty"));
                }
                if b.beta.iter().any(|&v| !(v > 0.0)) {
                    return Err(cfg_err("beta", "inverse temperatures must be positive"));
                }
            }
        }
        if let Some(sw) = &self.sweep {
            for &a in &sw.alpha {
                if !(a > 0.0) {
                    return Err(cfg_err("sweep.alpha", format!("must be a positive number, got {a}")));
                }
            }
            if sw.n.contains(&0) {
                return Err(cfg_err("sweep.n", "sizes must be positive"));
            }
        }
        Ok(())
    }
}
