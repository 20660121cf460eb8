//! Absorbed and stirring random walks on `{-(N+1),…,N+1}` and the duality
//! estimators built from them.
//!
//! Walkers start in `{-N,…,N}`; every bond inside the lattice exchanges its
//! two sites at rate ½, the two bonds to `±(N+1)` at a configurable boundary
//! rate. A walker pushed onto `±(N+1)` is absorbed and frozen.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{exp1, Drive, ScalingParams, SeedSpec};
use crate::ssep::InitialCondition;
use crate::stats::{linear_fit, EstimateCI};

/// Absorption record of one walker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkOutcome {
    pub absorbed: bool,
    /// `+1` or `-1` when absorbed.
    pub exit_side: Option<i8>,
    /// Microscopic absorption time.
    pub tau: Option<f64>,
    /// Position at the horizon (the absorption site when absorbed).
    pub final_position: i64,
}

impl WalkOutcome {
    fn running(position: i64) -> Self {
        WalkOutcome {
            absorbed: false,
            exit_side: None,
            tau: None,
            final_position: position,
        }
    }
}

/// Walkers started together under the stirring dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirringEnsemble {
    pub start: Vec<i64>,
    pub outcomes: Vec<WalkOutcome>,
}

fn check_start(xs: &[i64], n: usize) -> Result<()> {
    let n = n as i64;
    if let Some(x) = xs.iter().find(|x| x.abs() > n) {
        return Err(invalid("x", format!("start site {x} outside {{-{n},…,{n}}}")));
    }
    for (i, a) in xs.iter().enumerate() {
        if xs[i + 1..].contains(a) {
            return Err(invalid("xs", format!("duplicate start site {a}")));
        }
    }
    Ok(())
}

/// Runs the stirring dynamics for microscopic time `horizon`.
///
/// Only bonds touching a live walker can change anything, so the event
/// clock runs at the total rate of those bonds.
pub fn run_stirring(
    start: &[i64],
    n: usize,
    horizon: f64,
    boundary_rate: f64,
    rng: &mut impl Rng,
) -> Result<StirringEnsemble> {
    check_start(start, n)?;
    if !(boundary_rate > 0.0) {
        return Err(invalid("boundary_rate", "must be positive"));
    }
    if !(horizon >= 0.0) {
        return Err(invalid("horizon", "must be non-negative"));
    }
    let edge = n as i64 + 1;
    let mut outcomes: Vec<WalkOutcome> = start.iter().map(|&x| WalkOutcome::running(x)).collect();
    // Left endpoints `b` of bonds (b, b+1) adjacent to live walkers.
    let mut bonds: Vec<i64> = Vec::with_capacity(2 * start.len());
    let mut rates: Vec<f64> = Vec::with_capacity(2 * start.len());
    let mut t = 0.0;
    loop {
        bonds.clear();
        for w in outcomes.iter().filter(|w| !w.absorbed) {
            for b in [w.final_position - 1, w.final_position] {
                if !bonds.contains(&b) {
                    bonds.push(b);
                }
            }
        }
        if bonds.is_empty() {
            break;
        }
        rates.clear();
        rates.extend(bonds.iter().map(|&b| {
            if b == -edge || b == edge - 1 {
                boundary_rate
            } else {
                0.5
            }
        }));
        let total: f64 = rates.iter().sum();
        t += exp1(rng) / total;
        if t > horizon {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = bonds.len() - 1;
        for (i, r) in rates.iter().enumerate() {
            if u < *r {
                pick = i;
                break;
            }
            u -= r;
        }
        let (a, b) = (bonds[pick], bonds[pick] + 1);
        for w in outcomes.iter_mut().filter(|w| !w.absorbed) {
            let p = w.final_position;
            let q = if p == a {
                b
            } else if p == b {
                a
            } else {
                continue;
            };
            w.final_position = q;
            if q.abs() == edge {
                w.absorbed = true;
                w.exit_side = Some(q.signum() as i8);
                w.tau = Some(t);
            }
        }
        debug_assert!({
            let live: Vec<i64> = outcomes.iter().filter(|w| !w.absorbed).map(|w| w.final_position).collect();
            live.iter().enumerate().all(|(i, p)| !live[i + 1..].contains(p))
        });
    }
    Ok(StirringEnsemble {
        start: start.to_vec(),
        outcomes,
    })
}

/// One absorbed walk: jumps to each neighbour at rate ½, absorbed at
/// `±(N+1)`, observed up to microscopic time `horizon`.
pub fn sample_absorbed_walk(x: i64, n: usize, horizon: f64, seed: SeedSpec) -> Result<WalkOutcome> {
    let mut rng = seed.rng();
    Ok(run_stirring(&[x], n, horizon, 0.5, &mut rng)?.outcomes[0])
}

/// `P(walk from x exits at N+1) = ½ + x/(2(N+1))`.
pub fn exit_probability_exact(x: i64, n: usize) -> Result<f64> {
    if x.unsigned_abs() as usize > n {
        return Err(invalid("x", "start site outside the lattice"));
    }
    Ok(0.5 + x as f64 / (2.0 * (n as f64 + 1.0)))
}

/// Empirical right-exit frequency over `samples` independent walks.
pub fn exit_frequency(x: i64, n: usize, samples: u64, seed: SeedSpec) -> Result<EstimateCI> {
    check_start(&[x], n)?;
    let hits: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let w = sample_absorbed_walk(x, n, f64::INFINITY, seed.with_replica(i))?;
            Ok(f64::from(u8::from(w.exit_side == Some(1))))
        })
        .collect::<Result<_>>()?;
    EstimateCI::from_samples(&hits)
}

/// Parameters shared by the duality estimators.
#[derive(Clone, Debug)]
pub struct DualProblem<'a> {
    pub initial: &'a InitialCondition,
    pub drive: &'a Drive,
    pub scaling: ScalingParams,
    /// Rate of the bonds to `±(N+1)`; must equal the reservoir coupling of
    /// the forward process for the duality identity to hold.
    pub boundary_rate: f64,
}

impl DualProblem<'_> {
    /// Contribution of one walker to the duality formula at time `t`.
    fn value(&self, w: &WalkOutcome, t_micro: f64, mean0: &[f64]) -> f64 {
        let n = self.scaling.n as i64;
        match (w.absorbed, w.exit_side, w.tau) {
            (true, Some(side), Some(tau)) => {
                let (rm, rp) = self.drive.at(self.scaling.micro_to_macro(t_micro - tau));
                if side > 0 {
                    rp
                } else {
                    rm
                }
            }
            _ => mean0[(w.final_position + n) as usize],
        }
    }

    fn estimate(&self, xs: &[i64], t: f64, samples: u64, seed: SeedSpec) -> Result<EstimateCI> {
        check_start(xs, self.scaling.n)?;
        if !(t >= 0.0) {
            return Err(invalid("t", "must be non-negative"));
        }
        if let InitialCondition::Config(c) = self.initial {
            if c.n() != self.scaling.n {
                return Err(invalid("initial", "configuration size does not match N"));
            }
        }
        // Over a product initial law distinct sites are independent, so the
        // product of site means is the exact conditional expectation.
        let mean0 = self.initial.mean(self.scaling.n);
        let t_micro = self.scaling.macro_to_micro(t);
        let values: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = seed.with_replica(i).rng();
                let ens = run_stirring(xs, self.scaling.n, t_micro, self.boundary_rate, &mut rng)?;
                Ok(ens.outcomes.iter().map(|w| self.value(w, t_micro, &mean0)).product())
            })
            .collect::<Result<_>>()?;
        EstimateCI::from_samples(&values)
    }
}

/// Duality estimate of `E[η_t(x)]`.
pub fn dual_one_point(problem: &DualProblem, x: i64, t: f64, samples: u64, seed: SeedSpec) -> Result<EstimateCI> {
    problem.estimate(&[x], t, samples, seed)
}

/// Duality estimate of `E[Π_i η_t(x_i)]` for distinct sites.
pub fn dual_n_point(problem: &DualProblem, xs: &[i64], t: f64, samples: u64, seed: SeedSpec) -> Result<EstimateCI> {
    if xs.len() < 2 {
        return Err(invalid("xs", "need at least two sites"));
    }
    problem.estimate(xs, t, samples, seed)
}

/// Empirical survival function of the absorption time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub n: usize,
    pub s: Vec<f64>,
    pub tail: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Decay rate of `log P(τ > s)` in units of `s/N²`, fitted over the
    /// grid points with positive tail and `s > 0`.
    pub fitted_rate: Option<f64>,
}

pub fn exit_time_tail(x: i64, n: usize, s_grid: &[f64], samples: u64, seed: SeedSpec) -> Result<SurvivalCurve> {
    check_start(&[x], n)?;
    if s_grid.iter().any(|&s| !(s >= 0.0)) || s_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("s_grid", "must be sorted and non-negative"));
    }
    if samples < 2 {
        return Err(invalid("samples", "need at least two walks"));
    }
    let mut taus: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let w = sample_absorbed_walk(x, n, f64::INFINITY, seed.with_replica(i))?;
            Ok(w.tau.expect("walk without horizon is always absorbed"))
        })
        .collect::<Result<_>>()?;
    taus.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let m = samples as f64;
    let mut tail = Vec::with_capacity(s_grid.len());
    let mut stderr = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let survivors = taus.len() - taus.partition_point(|&tau| tau <= s);
        let p = survivors as f64 / m;
        tail.push(p);
        stderr.push((p * (1.0 - p) / (m - 1.0)).sqrt());
    }
    let scale = (n * n) as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = s_grid
        .iter()
        .zip(&tail)
        .filter(|(&s, &p)| s > 0.0 && p > 0.0)
        .map(|(&s, &p)| (s / scale, p.ln()))
        .unzip();
    let fitted_rate = (xs.len() >= 2).then(|| -linear_fit(&xs, &ys).0);
    Ok(SurvivalCurve {
        n,
        s: s_grid.to_vec(),
        tail,
        stderr,
        fitted_rate,
    })
}

/// Smallest eigenvalue of the killed generator (`1` on the diagonal, `-½`
/// off it, on `2N+1` sites) times `N²`: the asymptotic decay rate of
/// `P(τ > s)` in units of `s/N²`.
pub fn absorption_decay_rate(n: usize) -> f64 {
    let m = 2 * n + 1;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = 1.0;
        if i + 1 < m {
            a[(i, i + 1)] = -0.5;
            a[(i + 1, i)] = -0.5;
        }
    }
    let eig = SymmetricEigen::new(a);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min) * (n * n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssep::ExclusionConfig;

    #[test]
    fn rejects_absorption_sites_and_duplicates() {
        assert!(sample_absorbed_walk(5, 4, 1.0, SeedSpec::new(1, 0)).is_err());
        let mut rng = SeedSpec::new(1, 0).rng();
        assert!(run_stirring(&[1, 1], 4, 1.0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn exact_exit_probabilities() {
        assert_eq!(exit_probability_exact(0, 7).unwrap(), 0.5);
        assert!((exit_probability_exact(4, 4).unwrap() - 0.9).abs() < 1e-15);
        for x in -3..=3 {
            let s = exit_probability_exact(x, 3).unwrap() + exit_probability_exact(-x, 3).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn outcome_invariants() {
        for i in 0..200 {
            let w = sample_absorbed_walk(2, 3, 30.0, SeedSpec::new(5, i)).unwrap();
            if w.absorbed {
                assert!(w.tau.unwrap() <= 30.0);
                assert_eq!(w.final_position.abs(), 4);
                assert_eq!(w.exit_side.unwrap() as i64, w.final_position.signum());
            } else {
                assert!(w.final_position.abs() <= 3);
                assert!(w.exit_side.is_none());
            }
        }
    }

    #[test]
    fn zero_horizon_returns_initial_value() {
        let c = ExclusionConfig::new(2, vec![0, 1, 1, 0, 1]).unwrap();
        let init = InitialCondition::Config(c);
        let drive = Drive::constant(0.2, 0.8);
        let p = DualProblem {
            initial: &init,
            drive: &drive,
            scaling: ScalingParams::new(2, 1.0, 1.0).unwrap(),
            boundary_rate: 1.0,
        };
        for (x, expected) in [(-1, 1.0), (1, 0.0)] {
            let e = dual_one_point(&p, x, 0.0, 50, SeedSpec::new(3, 0)).unwrap();
            assert_eq!(e.mean, expected);
            assert_eq!(e.stderr, 0.0);
        }
        assert!(dual_n_point(&p, &[0, 0], 0.1, 10, SeedSpec::new(3, 0)).is_err());
    }

    #[test]
    fn survival_curve_shape() {
        let c = exit_time_tail(0, 4, &[0.0, 5.0, 10.0, 20.0, 40.0], 2000, SeedSpec::new(9, 0)).unwrap();
        assert_eq!(c.tail[0], 1.0);
        assert!(c.tail.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn decay_rate_closed_form() {
        for n in [1usize, 8, 16] {
            let exact = (1.0 - (std::f64::consts::PI / (2.0 * n as f64 + 2.0)).cos()) * (n * n) as f64;
            assert!((absorption_decay_rate(n) - exact).abs() < 1e-10);
        }
    }
}
