//! Five-stage, L-stable, stiffly accurate SDIRK method of order 4 with an
//! embedded order-3 solution (Hairer & Wanner, table 6.5).

use crate::error::{Error, Result};

const GAMMA: f64 = 0.25;
const C: [f64; 5] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const A: [[f64; 5]; 5] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
const B_HAT: [f64; 5] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];

/// An ODE `y' = F(t, y)` together with a solver for the implicit stage
/// equation `Y - hγ·F(t, Y) = b`.
pub trait StageSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]);
    fn solve_stage(&mut self, t: f64, h_gamma: f64, b: &[f64], out: &mut [f64]) -> Result<()>;

    /// Replaces `err` by `(I - hγ·J)^{-1}·err` (J the Jacobian at `t`), so
    /// that stiff components do not dominate the error estimate.
    fn filter_error(&mut self, _t: f64, _h_gamma: f64, _err: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

impl StepControl {
    pub fn with_tolerance(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }
}

/// Proposed steps are rounded down to `h_ref·2^{k/4}` so that solvers which
/// cache factorizations per step size see only a handful of distinct values.
fn quantize(h: f64, h_ref: f64) -> f64 {
    let k = (4.0 * (h / h_ref).log2()).floor();
    h_ref * (k / 4.0).exp2()
}

/// Integrates from `t0` and returns the state at every time in `outputs`
/// (sorted, `>= t0`). `observer` sees every accepted step.
pub fn integrate<S: StageSystem>(
    sys: &mut S,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    ctl: &StepControl,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<Vec<Vec<f64>>> {
    let dim = sys.dim();
    assert_eq!(y0.len(), dim);
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::Integrator("output times must be sorted and not before t0".into()));
    }
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = ctl.h_init.min(ctl.h_max);
    let h_ref = ctl.h_init;
    let mut results = Vec::with_capacity(outputs.len());
    let mut k = vec![vec![0.0; dim]; 5];
    let mut stage = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut est = vec![0.0; dim];
    let mut steps = 0usize;
    observer(t, &y);

    for &target in outputs {
        while t < target {
            if steps >= ctl.max_steps {
                return Err(Error::Integrator(format!(
                    "tolerance not met within {} steps (t = {t})",
                    ctl.max_steps
                )));
            }
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let h_try = if last { remaining } else { h };

            for i in 0..5 {
                b.copy_from_slice(&y);
                for (j, kj) in k.iter().enumerate().take(i) {
                    let a = A[i][j] * h_try;
                    if a != 0.0 {
                        for (bv, kv) in b.iter_mut().zip(kj) {
                            *bv += a * kv;
                        }
                    }
                }
                let ti = t + C[i] * h_try;
                sys.solve_stage(ti, GAMMA * h_try, &b, &mut stage)?;
                sys.rhs(ti, &stage, &mut k[i]);
            }
            // Stiffly accurate: the last stage is the new solution.
            for (d, e) in est.iter_mut().enumerate() {
                *e = h_try * (0..5).map(|i| (A[4][i] - B_HAT[i]) * k[i][d]).sum::<f64>();
            }
            sys.filter_error(t + h_try, GAMMA * h_try, &mut est)?;
            let mut err = 0.0f64;
            for d in 0..dim {
                let scale = ctl.atol + ctl.rtol * y[d].abs().max(stage[d].abs());
                err = err.max((est[d] / scale).abs());
            }
            steps += 1;
            if !err.is_finite() {
                return Err(Error::Integrator(format!("non-finite error estimate at t = {t}")));
            }
            let fac = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 4.0) };
            if err <= 1.0 {
                t = if last { target } else { t + h_try };
                y.copy_from_slice(&stage);
                observer(t, &y);
                if fac > 1.0 {
                    h = quantize((h_try.max(h) * fac).min(ctl.h_max), h_ref).max(h);
                }
            } else {
                h = quantize(h_try * fac, h_ref);
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::Integrator(format!("step size underflow at t = {t}")));
                }
            }
        }
        results.push(y.clone());
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y' = λ(y - cos t) - sin t, exact solution y = cos t for y(0) = 1.
    struct Prothero {
        lambda: f64,
    }

    impl StageSystem for Prothero {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
            out[0] = self.lambda * (y[0] - t.cos()) - t.sin();
        }
        fn solve_stage(&mut self, t: f64, hg: f64, b: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = (b[0] + hg * (-self.lambda * t.cos() - t.sin())) / (1.0 - hg * self.lambda);
            Ok(())
        }
    }

    #[test]
    fn order_conditions() {
        let b = A[4];
        let sum: f64 = b.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        let bc: f64 = b.iter().zip(C).map(|(b, c)| b * c).sum();
        assert!((bc - 0.5).abs() < 1e-14);
        let bc3: f64 = b.iter().zip(C).map(|(b, c)| b * c * c * c).sum();
        assert!((bc3 - 0.25).abs() < 1e-14);
        for (i, row) in A.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - C[i]).abs() < 1e-14);
        }
        let bh: f64 = B_HAT.iter().sum();
        assert!((bh - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiff_problem_tracks_exact_solution() {
        let mut sys = Prothero { lambda: -1e6 };
        let out = integrate(&mut sys, 0.0, &[1.0], &[1.0, 5.0], &StepControl::default(), |_, _| {}).unwrap();
        assert!((out[0][0] - 1f64.cos()).abs() < 1e-9);
        assert!((out[1][0] - 5f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn observer_sees_outputs() {
        let mut sys = Prothero { lambda: -2.0 };
        let mut seen = Vec::new();
        integrate(&mut sys, 0.0, &[1.0], &[0.5, 2.0], &StepControl::default(), |t, _| seen.push(t)).unwrap();
        assert!(seen.contains(&0.5));
        assert_eq!(*seen.last().unwrap(), 2.0);
        assert!(seen.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn step_budget_reported() {
        let mut sys = Prothero { lambda: -2.0 };
        let ctl = StepControl {
            max_steps: 3,
            ..StepControl::default()
        };
        let err = integrate(&mut sys, 0.0, &[1.0], &[10.0], &ctl, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::Integrator(_)));
    }
}
