//! Candidate closed forms for the limit of `N·v_N(Nr1, Nr2; t)` and the
//! cross-time decorrelation estimate.

use serde::{Deserialize, Serialize};

use super::moments::{one_point_trajectory, OracleOptions};
use crate::error::{invalid, Result};
use crate::model::{Drive, ScalingParams};
use crate::ssep::{run_ssep_replicas, InitialCondition, SsepRunSpec};
use crate::model::SeedSpec;
use crate::stats::EstimateCI;

fn check_pair(r1: f64, r2: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&r1) || !(-1.0..=1.0).contains(&r2) {
        return Err(invalid("r", "macroscopic positions must lie in [-1, 1]"));
    }
    if r1 > r2 {
        return Err(invalid("r1", "expected r1 <= r2"));
    }
    Ok(())
}

/// `-¼·(ρ₊-ρ₋)²·r1·(1-r2)`.
pub fn covariance_limit_product_kernel(r1: f64, r2: f64, t: f64, drive: &Drive) -> Result<f64> {
    check_pair(r1, r2)?;
    let (rm, rp) = drive.at(t);
    Ok(-0.25 * (rp - rm).powi(2) * r1 * (1.0 - r2))
}

/// `-(½(ρ₊-ρ₋))²·G(r1, r2)` with `G(r1, r2) = ½(1+r1)(1-r2)` the Dirichlet
/// Green function of `-∂²` on `[-1, 1]`.
pub fn covariance_limit_green(r1: f64, r2: f64, t: f64, drive: &Drive) -> Result<f64> {
    check_pair(r1, r2)?;
    let (rm, rp) = drive.at(t);
    let grad = 0.5 * (rp - rm);
    Ok(-grad * grad * 0.5 * (1.0 + r1) * (1.0 - r2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosestFormula {
    ProductKernel,
    Green,
    Neither,
}

/// Distance of a finite-size estimate to both closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitComparison {
    pub max_abs_err: f64,
    pub which_formula_closer: ClosestFormula,
    pub fitted_rate: Option<f64>,
    pub err_product_kernel: f64,
    pub err_green: f64,
}

/// Compares `estimates[k]` of the scaled covariance at `points[k]` with both
/// formulas. A formula is declared matching when every point is within
/// `rel_tol` of the larger magnitude of estimate and formula.
pub fn compare_limits(
    points: &[(f64, f64)],
    estimates: &[f64],
    t: f64,
    drive: &Drive,
    rel_tol: f64,
) -> Result<LimitComparison> {
    let mut err_product_kernel = 0.0f64;
    let mut err_green = 0.0f64;
    let mut ok_product_kernel = true;
    let mut ok_green = true;
    for (&(r1, r2), &est) in points.iter().zip(estimates) {
        let p = covariance_limit_product_kernel(r1, r2, t, drive)?;
        let g = covariance_limit_green(r1, r2, t, drive)?;
        err_product_kernel = err_product_kernel.max((est - p).abs());
        err_green = err_green.max((est - g).abs());
        ok_product_kernel &= (est - p).abs() <= rel_tol * est.abs().max(p.abs());
        ok_green &= (est - g).abs() <= rel_tol * est.abs().max(g.abs());
    }
    let which = match (ok_product_kernel, ok_green) {
        (true, false) => ClosestFormula::ProductKernel,
        (false, true) => ClosestFormula::Green,
        (true, true) if err_product_kernel < err_green => ClosestFormula::ProductKernel,
        (true, true) => ClosestFormula::Green,
        (false, false) => ClosestFormula::Neither,
    };
    Ok(LimitComparison {
        max_abs_err: err_product_kernel.min(err_green),
        which_formula_closer: which,
        fitted_rate: None,
        err_product_kernel,
        err_green,
    })
}

/// Monte Carlo estimate of `N·E[(η_s(x)-ρ_N(x,s))(η_t(y)-ρ_N(y,t))]`,
/// with `ρ_N` from the one-point oracle.
#[allow(clippy::too_many_arguments)]
pub fn time_decorrelation_check(
    drive: &Drive,
    scaling: &ScalingParams,
    initial: &InitialCondition,
    sites: (i64, i64),
    s: f64,
    t: f64,
    replicas: u64,
    seed: SeedSpec,
    coupling: f64,
) -> Result<EstimateCI> {
    if !(s >= 0.0) || s >= t {
        return Err(invalid("s", "need 0 <= s < t"));
    }
    let n = scaling.n as i64;
    let (x, y) = sites;
    if x.abs() > n || y.abs() > n {
        return Err(invalid("sites", "sites must lie in the lattice"));
    }
    let scaling = ScalingParams::new(scaling.n, scaling.alpha, scaling.horizon.max(t))?;
    let spec = SsepRunSpec::new(initial.clone(), *drive, scaling, vec![s, t], seed).with_coupling(coupling);
    let opts = OracleOptions::default().with_coupling(coupling);
    let rho = one_point_trajectory(drive, &scaling, &initial.mean(scaling.n), &[s, t], &opts, |_, _| {})?;
    let (ix, iy) = ((x + n) as usize, (y + n) as usize);
    let runs = run_ssep_replicas(&spec, replicas)?;
    let samples: Vec<f64> = runs
        .iter()
        .map(|r| {
            let a = r.snapshot(0).occupancy()[ix] as f64 - rho[0][ix];
            let b = r.snapshot(1).occupancy()[iy] as f64 - rho[1][iy];
            a * b
        })
        .collect();
    Ok(EstimateCI::from_samples(&samples)?.scaled(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let d = Drive::constant(0.2, 0.8);
        assert!((covariance_limit_product_kernel(0.25, 0.5, 0.0, &d).unwrap() + 0.01125).abs() < 1e-15);
        assert!((covariance_limit_green(0.25, 0.5, 0.0, &d).unwrap() + 0.028125).abs() < 1e-15);
        assert_eq!(covariance_limit_product_kernel(0.2, 1.0, 0.0, &d).unwrap(), 0.0);
        assert_eq!(covariance_limit_green(-1.0, 0.3, 0.0, &d).unwrap(), 0.0);
        let flat = Drive::constant(0.4, 0.4);
        assert_eq!(covariance_limit_product_kernel(0.1, 0.2, 0.0, &flat).unwrap(), 0.0);
        assert_eq!(covariance_limit_green(0.1, 0.2, 0.0, &flat).unwrap(), 0.0);
        assert!(covariance_limit_green(0.5, 0.2, 0.0, &d).is_err());
    }

    #[test]
    fn comparison_picks_matching_formula() {
        let d = Drive::constant(0.2, 0.8);
        let pts = [(0.25, 0.5), (-0.5, 0.5)];
        let est: Vec<f64> = pts.iter().map(|&(a, b)| covariance_limit_green(a, b, 0.0, &d).unwrap() * 1.01).collect();
        let c = compare_limits(&pts, &est, 0.0, &d, 0.05).unwrap();
        assert_eq!(c.which_formula_closer, ClosestFormula::Green);
    }

    #[test]
    fn decorrelation_requires_ordered_times() {
        let d = Drive::constant(0.5, 0.5);
        let s = ScalingParams::new(4, 1.0, 1.0).unwrap();
        let r = time_decorrelation_check(&d, &s, &InitialCondition::Bernoulli(0.5), (0, 0), 0.5, 0.5, 10, SeedSpec::new(1, 0), 1.0);
        assert!(r.is_err());
    }
}
