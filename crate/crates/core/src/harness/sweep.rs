//! Sweeps over lattice size and time-scale exponent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use super::output::{plot_script, sha256_hex, Artifact, Manifest};
use super::run::{config_text, run_experiment, Provenance};
use crate::error::{Error, Result};
use crate::stats::fitted_rate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub statistic_name: String,
    pub value: f64,
    pub stderr: f64,
    pub reference_value: Option<f64>,
    pub abs_err: Option<f64>,
    pub provenance: Option<Provenance>,
}

/// Points whose error is within this many standard errors of zero are
/// noise-dominated and left out of rate fits.
const NOISE_SIGMAS: f64 = 3.0;

/// `-d log(abs_err) / d log N` at fixed α, over the points not dominated by
/// Monte Carlo noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedRate {
    pub statistic_name: String,
    pub alpha: f64,
    pub rate: Option<f64>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub model: ModelKind,
    pub rows: Vec<ConvergenceRow>,
    pub fitted_rates: Vec<FittedRate>,
    #[serde(skip)]
    pub manifest: Option<Manifest>,
}

impl ConvergenceTable {
    pub fn rows_for<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a ConvergenceRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic_name == statistic)
    }

    fn fit(rows: &[ConvergenceRow]) -> Vec<FittedRate> {
        let mut groups: BTreeMap<(String, u64), Vec<&ConvergenceRow>> = BTreeMap::new();
        for r in rows {
            groups
                .entry((r.statistic_name.clone(), r.alpha.to_bits()))
                .or_default()
                .push(r);
        }
        groups
            .into_iter()
            .map(|((name, alpha_bits), rs)| {
                let (ns, errs): (Vec<f64>, Vec<f64>) = rs
                    .iter()
                    .filter_map(|r| {
                        r.abs_err
                            .filter(|&e| e > 0.0 && e > NOISE_SIGMAS * r.stderr)
                            .map(|e| (r.n as f64, e))
                    })
                    .unzip();
                let distinct = ns.windows(2).any(|w| w[0] != w[1]);
                FittedRate {
                    statistic_name: name,
                    alpha: f64::from_bits(alpha_bits),
                    rate: (ns.len() >= 2 && distinct).then(|| fitted_rate(&ns, &errs)),
                    points: ns.len(),
                }
            })
            .collect()
    }
}

fn point_dir(n: usize, alpha: f64) -> String {
    format!("N{n}_alpha{alpha}")
}

/// Runs every `(N, α)` in the sweep lists (missing lists fall back to the
/// model block's value), one artifact subdirectory per point, and writes
/// `convergence.csv` / `convergence.json` at the top level.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let (base_n, base_alpha) = cfg
        .size()
        .ok_or_else(|| Error::Config(format!("model `{}` has no (N, alpha) to sweep", cfg.model.name())))?;
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("`sweep` section missing".into()))?;
    if spec.n.is_empty() && spec.alpha.is_empty() {
        return Err(Error::Config("`sweep`: give at least one of `n` or `alpha`".into()));
    }
    let ns = if spec.n.is_empty() { vec![base_n] } else { spec.n.clone() };
    let alphas = if spec.alpha.is_empty() { vec![base_alpha] } else { spec.alpha.clone() };

    let mut points = Vec::new();
    for &alpha in &alphas {
        for &n in &ns {
            let mut point = cfg.with_size(n, alpha);
            point.sweep = None;
            point.output_dir = cfg.output_dir.join(point_dir(n, alpha));
            point.validate()?;
            points.push(point);
        }
    }

    let mut art = Artifact::create(&cfg.output_dir)?;
    let mut rows = Vec::new();
    for point in &points {
        let (n, alpha) = point.size().expect("checked above");
        let summary = run_experiment(point)?;
        art.adopt(&format!("{}/manifest.json", point_dir(n, alpha)))?;
        rows.extend(summary.stats.into_iter().map(|s| ConvergenceRow {
            n,
            alpha,
            statistic_name: s.statistic,
            value: s.value,
            stderr: s.stderr,
            reference_value: s.reference_value,
            abs_err: s.abs_err,
            provenance: s.provenance,
        }));
    }
    let fitted_rates = ConvergenceTable::fit(&rows);
    let mut table = ConvergenceTable {
        model: cfg.model,
        rows,
        fitted_rates,
        manifest: None,
    };
    art.write_csv("convergence.csv", &table.rows)?;
    art.write_json("convergence.json", &table)?;
    art.write_bytes("plot.py", plot_script("sweep").as_bytes())?;
    let text = config_text(cfg);
    art.write_bytes("config.toml", text.as_bytes())?;
    table.manifest = Some(art.finish("sweep", sha256_hex(text.as_bytes()), cfg.master_seed, cfg.replicas)?);
    Ok(table)
}
