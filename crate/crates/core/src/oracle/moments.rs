//! Closed linear systems for the one-point function `ρ_N(x) = E[η(x)]` and
//! the pair covariance `v_N(x1, x2) = E[(η(x1)-ρ_N(x1))(η(x2)-ρ_N(x2))]`.
//!
//! Both are integrated in the diffusive time `ŝ = s/N²` up to `N^α·t`.

use serde::{Deserialize, Serialize};

use super::banded::{BandedCholesky, BandedSpd, FactorCache};
use super::sdirk::{integrate, StageSystem, StepControl};
use crate::error::{invalid, Result};
use crate::model::{Drive, ScalingParams, ValueRange};

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Reservoir coupling, as in [`crate::ssep::SsepRunSpec::coupling`].
    pub coupling: f64,
    pub control: StepControl,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            coupling: 1.0,
            control: StepControl {
                h_init: 1e-3,
                ..StepControl::default()
            },
        }
    }
}

impl OracleOptions {
    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_tolerance(mut self, rtol: f64, atol: f64) -> Self {
        self.control = self.control.with_tolerance(rtol, atol);
        self
    }
}

/// Pairs `x1 < x2` of `{-N,…,N}`, stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairArray {
    n: usize,
    data: Vec<f64>,
}

impl PairArray {
    pub fn zeros(n: usize) -> Self {
        let m = 2 * n + 1;
        PairArray {
            n,
            data: vec![0.0; m * (m - 1) / 2],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(m: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < m);
        i * (2 * m - i - 1) / 2 + (j - i - 1)
    }

    /// `v(x1, x2)`, symmetric, zero when either site is `±(N+1)`.
    ///
    /// # Panics
    /// When `x1 == x2` or a site lies outside `{-(N+1),…,N+1}`.
    pub fn get(&self, x1: i64, x2: i64) -> f64 {
        assert_ne!(x1, x2, "pair covariance is defined off the diagonal");
        let n = self.n as i64;
        assert!(x1.abs() <= n + 1 && x2.abs() <= n + 1, "site outside lattice");
        if x1.abs() == n + 1 || x2.abs() == n + 1 {
            return 0.0;
        }
        let (a, b) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        self.data[Self::index(2 * self.n + 1, (a + n) as usize, (b + n) as usize)]
    }

    pub fn set(&mut self, x1: i64, x2: i64, v: f64) {
        assert_ne!(x1, x2);
        let n = self.n as i64;
        let (a, b) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        let k = Self::index(2 * self.n + 1, (a + n) as usize, (b + n) as usize);
        self.data[k] = v;
    }

    /// `(x1, x2, v)` for all `x1 < x2`.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let n = self.n as i64;
        let m = 2 * self.n + 1;
        (0..m)
            .flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
            .zip(&self.data)
            .map(move |((i, j), &v)| (i as i64 - n, j as i64 - n, v))
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// One- and two-point functions at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentField {
    pub one_point: Vec<f64>,
    pub two_point: PairArray,
}

impl MomentField {
    /// Product initial law with the given site means (zero covariance).
    pub fn product(mean: Vec<f64>) -> Result<Self> {
        let m = mean.len();
        if m < 3 || m.is_multiple_of(2) {
            return Err(invalid("initial_mean", "need 2N+1 entries with N >= 1"));
        }
        Ok(MomentField {
            two_point: PairArray::zeros((m - 1) / 2),
            one_point: mean,
        })
    }

    pub fn n(&self) -> usize {
        self.two_point.n
    }

    pub fn rho(&self, x: i64) -> f64 {
        self.one_point[(x + self.n() as i64) as usize]
    }

    /// `E[η(x1)η(x2)]`.
    pub fn pair_moment(&self, x1: i64, x2: i64) -> f64 {
        self.two_point.get(x1, x2) + self.rho(x1) * self.rho(x2)
    }
}

fn check_inputs(drive: &Drive, scaling: &ScalingParams, mean: &[f64], times: &[f64]) -> Result<()> {
    let n = scaling.n;
    if mean.len() != 2 * n + 1 {
        return Err(invalid("initial_mean", format!("expected {} entries", 2 * n + 1)));
    }
    if mean.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("initial_mean", "entries must lie in [0,1]"));
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("t", "times must be non-negative and sorted"));
    }
    let horizon = times.last().copied().unwrap_or(0.0);
    let step = (horizon / 1000.0).max(1e-3);
    for side in [drive.minus, drive.plus] {
        side.with_range(ValueRange::closed(0.0, 1.0)).lipschitz_check(horizon, step)?;
    }
    Ok(())
}

/// Shared geometry of both systems.
struct Geometry {
    m: usize,
    /// `N²`
    rate: f64,
    /// `N^{-α}`: converts `ŝ` to macroscopic time.
    to_macro: f64,
    coupling: f64,
}

impl Geometry {
    fn new(scaling: &ScalingParams, coupling: f64) -> Self {
        let n = scaling.n as f64;
        Geometry {
            m: 2 * scaling.n + 1,
            rate: n * n,
            to_macro: n.powf(-scaling.alpha),
            coupling,
        }
    }

    /// `N²·L` applied to the one-point function, including the reservoir
    /// forcing at time `ŝ`.
    fn one_point_rhs(&self, drive: &Drive, s: f64, rho: &[f64], out: &mut [f64]) {
        let m = self.m;
        let (rm, rp) = drive.at(s * self.to_macro);
        for i in 0..m {
            let mut d = 0.0;
            if i > 0 {
                d += 0.5 * (rho[i - 1] - rho[i]);
            }
            if i + 1 < m {
                d += 0.5 * (rho[i + 1] - rho[i]);
            }
            out[i] = d;
        }
        out[0] += self.coupling * (rm - rho[0]);
        out[m - 1] += self.coupling * (rp - rho[m - 1]);
        for v in out.iter_mut() {
            *v *= self.rate;
        }
    }

    fn one_point_matrix(&self, h_gamma: f64) -> Result<BandedCholesky> {
        let m = self.m;
        let c = h_gamma * self.rate;
        let mut a = BandedSpd::zeros(m, 1);
        for i in 0..m {
            let mut diag = 0.0;
            if i > 0 {
                diag += 0.5;
                a.add(i, i - 1, -0.5 * c);
            }
            if i + 1 < m {
                diag += 0.5;
            }
            if i == 0 || i + 1 == m {
                diag += self.coupling;
            }
            a.add(i, i, 1.0 + c * diag);
        }
        a.factor()
    }

    fn one_point_solve(
        &self,
        drive: &Drive,
        factor: &BandedCholesky,
        s: f64,
        h_gamma: f64,
        b: &[f64],
        out: &mut [f64],
    ) {
        let m = self.m;
        let (rm, rp) = drive.at(s * self.to_macro);
        out.copy_from_slice(b);
        let c = h_gamma * self.rate * self.coupling;
        out[0] += c * rm;
        out[m - 1] += c * rp;
        factor.solve_in_place(out);
    }

    /// Calls `f(target_index, rate)` for every move of the pair `(i, j)`;
    /// absorbing moves report `None`.
    #[inline]
    fn pair_moves(&self, i: usize, j: usize, mut f: impl FnMut(Option<(usize, usize)>, f64)) {
        let m = self.m;
        if i > 0 {
            f(Some((i - 1, j)), 0.5);
        } else {
            f(None, self.coupling);
        }
        if i + 1 < j {
            f(Some((i + 1, j)), 0.5);
            f(Some((i, j - 1)), 0.5);
        }
        if j + 1 < m {
            f(Some((i, j + 1)), 0.5);
        } else {
            f(None, self.coupling);
        }
    }

    fn pair_rhs(&self, rho: &[f64], v: &[f64], out: &mut [f64]) {
        let m = self.m;
        let mut k = 0;
        for i in 0..m {
            for j in i + 1..m {
                let here = v[k];
                let mut d = 0.0;
                self.pair_moves(i, j, |to, rate| {
                    let there = to.map_or(0.0, |(a, b)| v[PairArray::index(m, a, b)]);
                    d += rate * (there - here);
                });
                if j == i + 1 {
                    let g = rho[i] - rho[j];
                    d -= 0.5 * g * g;
                }
                out[k] = self.rate * d;
                k += 1;
            }
        }
    }

    fn pair_matrix(&self, h_gamma: f64) -> Result<BandedCholesky> {
        let m = self.m;
        let c = h_gamma * self.rate;
        let mut a = BandedSpd::zeros(m * (m - 1) / 2, m.saturating_sub(2).max(1));
        for i in 0..m {
            for j in i + 1..m {
                let k = PairArray::index(m, i, j);
                let mut diag = 0.0;
                self.pair_moves(i, j, |to, rate| {
                    diag += rate;
                    // Each symmetric off-diagonal entry is visited from both
                    // ends; keep the lower-triangle visit only.
                    if let Some((a2, b2)) = to {
                        let k2 = PairArray::index(m, a2, b2);
                        if k2 < k {
                            a.add(k, k2, -c * rate);
                        }
                    }
                });
                a.add(k, k, 1.0 + c * diag);
            }
        }
        a.factor()
    }
}

struct OnePointSystem<'a> {
    geo: Geometry,
    drive: &'a Drive,
    cache: FactorCache<BandedCholesky>,
}

impl StageSystem for OnePointSystem<'_> {
    fn dim(&self) -> usize {
        self.geo.m
    }

    fn rhs(&mut self, s: f64, y: &[f64], out: &mut [f64]) {
        self.geo.one_point_rhs(self.drive, s, y, out);
    }

    fn solve_stage(&mut self, s: f64, h_gamma: f64, b: &[f64], out: &mut [f64]) -> Result<()> {
        let geo = &self.geo;
        let factor = self.cache.get_or_insert_with(h_gamma, || geo.one_point_matrix(h_gamma))?;
        geo.one_point_solve(self.drive, factor, s, h_gamma, b, out);
        Ok(())
    }

    fn filter_error(&mut self, _s: f64, h_gamma: f64, err: &mut [f64]) -> Result<()> {
        let geo = &self.geo;
        let factor = self.cache.get_or_insert_with(h_gamma, || geo.one_point_matrix(h_gamma))?;
        factor.solve_in_place(err);
        Ok(())
    }
}

struct CoupledSystem<'a> {
    geo: Geometry,
    drive: &'a Drive,
    one: FactorCache<BandedCholesky>,
    pair: FactorCache<BandedCholesky>,
}

impl StageSystem for CoupledSystem<'_> {
    fn dim(&self) -> usize {
        let m = self.geo.m;
        m + m * (m - 1) / 2
    }

    fn rhs(&mut self, s: f64, y: &[f64], out: &mut [f64]) {
        let m = self.geo.m;
        let (rho, v) = y.split_at(m);
        let (out_rho, out_v) = out.split_at_mut(m);
        self.geo.one_point_rhs(self.drive, s, rho, out_rho);
        self.geo.pair_rhs(rho, v, out_v);
    }

    fn solve_stage(&mut self, s: f64, h_gamma: f64, b: &[f64], out: &mut [f64]) -> Result<()> {
        let geo = &self.geo;
        let m = geo.m;
        let (b_rho, b_v) = b.split_at(m);
        let (rho, v) = out.split_at_mut(m);
        let f1 = self.one.get_or_insert_with(h_gamma, || geo.one_point_matrix(h_gamma))?;
        geo.one_point_solve(self.drive, f1, s, h_gamma, b_rho, rho);
        // The pair block depends on the one-point stage only through the
        // adjacent-pair source.
        v.copy_from_slice(b_v);
        let c = h_gamma * geo.rate;
        for i in 0..m - 1 {
            let g = rho[i] - rho[i + 1];
            v[PairArray::index(m, i, i + 1)] -= c * 0.5 * g * g;
        }
        let f2 = self.pair.get_or_insert_with(h_gamma, || geo.pair_matrix(h_gamma))?;
        f2.solve_in_place(v);
        Ok(())
    }

    // Block-diagonal part of the Jacobian only; the source coupling is
    // small next to the diffusive blocks.
    fn filter_error(&mut self, _s: f64, h_gamma: f64, err: &mut [f64]) -> Result<()> {
        let geo = &self.geo;
        let (e_rho, e_v) = err.split_at_mut(geo.m);
        self.one
            .get_or_insert_with(h_gamma, || geo.one_point_matrix(h_gamma))?
            .solve_in_place(e_rho);
        self.pair
            .get_or_insert_with(h_gamma, || geo.pair_matrix(h_gamma))?
            .solve_in_place(e_v);
        Ok(())
    }
}

/// `ρ_N(·, t)` at each macroscopic time in `times`; `observer` receives the
/// macroscopic time and state after every accepted step.
pub fn one_point_trajectory(
    drive: &Drive,
    scaling: &ScalingParams,
    initial_mean: &[f64],
    times: &[f64],
    opts: &OracleOptions,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<Vec<Vec<f64>>> {
    check_inputs(drive, scaling, initial_mean, times)?;
    let geo = Geometry::new(scaling, opts.coupling);
    let to_macro = geo.to_macro;
    let mut sys = OnePointSystem {
        geo,
        drive,
        cache: FactorCache::new(8),
    };
    let targets: Vec<f64> = times.iter().map(|t| t / to_macro).collect();
    integrate(&mut sys, 0.0, initial_mean, &targets, &opts.control, |s, y| {
        observer(s * to_macro, y)
    })
}

/// `ρ_N(·, t)` over `{-N,…,N}` started from site means `initial_mean`.
pub fn one_point_evolution(
    drive: &Drive,
    scaling: &ScalingParams,
    initial_mean: &[f64],
    t: f64,
    opts: &OracleOptions,
) -> Result<Vec<f64>> {
    Ok(one_point_trajectory(drive, scaling, initial_mean, &[t], opts, |_, _| {})?.remove(0))
}

/// One- and two-point functions at each time in `times`.
pub fn moment_trajectory(
    drive: &Drive,
    scaling: &ScalingParams,
    initial: &MomentField,
    times: &[f64],
    opts: &OracleOptions,
    mut observer: impl FnMut(f64, &MomentField),
) -> Result<Vec<MomentField>> {
    check_inputs(drive, scaling, &initial.one_point, times)?;
    if initial.n() != scaling.n {
        return Err(invalid("initial", "pair array size does not match N"));
    }
    let geo = Geometry::new(scaling, opts.coupling);
    let m = geo.m;
    let to_macro = geo.to_macro;
    let mut sys = CoupledSystem {
        geo,
        drive,
        one: FactorCache::new(8),
        pair: FactorCache::new(8),
    };
    let mut y0 = initial.one_point.clone();
    y0.extend_from_slice(&initial.two_point.data);
    let split = |y: &[f64]| MomentField {
        one_point: y[..m].to_vec(),
        two_point: PairArray {
            n: scaling.n,
            data: y[m..].to_vec(),
        },
    };
    let targets: Vec<f64> = times.iter().map(|t| t / to_macro).collect();
    let out = integrate(&mut sys, 0.0, &y0, &targets, &opts.control, |s, y| {
        observer(s * to_macro, &split(y))
    })?;
    Ok(out.iter().map(|y| split(y)).collect())
}

/// One- and two-point functions at macroscopic time `t`.
pub fn two_point_evolution(
    drive: &Drive,
    scaling: &ScalingParams,
    initial: &MomentField,
    t: f64,
    opts: &OracleOptions,
) -> Result<MomentField> {
    Ok(moment_trajectory(drive, scaling, initial, &[t], opts, |_, _| {})?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{quasi_static_profile, TimeProfile};

    fn scaling(n: usize, alpha: f64) -> ScalingParams {
        ScalingParams::new(n, alpha, 1.0).unwrap()
    }

    #[test]
    fn flat_profile_is_fixed_point() {
        let d = Drive::constant(0.4, 0.4);
        let rho = one_point_evolution(&d, &scaling(8, 1.0), &[0.4; 17], 1.0, &OracleOptions::default()).unwrap();
        assert!(rho.iter().all(|v| (v - 0.4).abs() < 1e-12));
        let init = MomentField::product(vec![0.4; 17]).unwrap();
        let f = two_point_evolution(&d, &scaling(8, 1.0), &init, 1.0, &OracleOptions::default()).unwrap();
        assert!(f.two_point.values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn relaxes_to_linear_stationary_profile() {
        // The stationary one-point function with coupling κ is affine with
        // effective boundary points ±(N + 1/(2κ)).
        let n = 6;
        let d = Drive::constant(0.2, 0.8);
        for kappa in [0.5, 1.0] {
            let opts = OracleOptions::default().with_coupling(kappa);
            let rho = one_point_evolution(&d, &ScalingParams::new(n, 2.0, 50.0).unwrap(), &[0.0; 13], 50.0, &opts)
                .unwrap();
            let ell = n as f64 + 1.0 / (2.0 * kappa);
            for (i, r) in rho.iter().enumerate() {
                let x = i as f64 - n as f64;
                let expected = 0.5 + 0.3 * x / ell;
                assert!((r - expected).abs() < 1e-9, "kappa {kappa}, x {x}: {r} vs {expected}");
            }
        }
    }

    #[test]
    fn pair_array_indexing() {
        let mut p = PairArray::zeros(2);
        p.set(1, -2, 0.5);
        assert_eq!(p.get(-2, 1), 0.5);
        assert_eq!(p.get(1, -2), 0.5);
        assert_eq!(p.get(3, 0), 0.0);
        assert_eq!(p.entries().count(), 10);
        let (x1, x2, v) = p.entries().find(|e| e.2 != 0.0).unwrap();
        assert_eq!((x1, x2, v), (-2, 1, 0.5));
    }

    #[test]
    fn covariance_nonpositive_and_profile_bounded() {
        let drive = Drive::new(TimeProfile::affine(0.3, 0.1), TimeProfile::affine(0.8, -0.1));
        let init = MomentField::product(vec![0.0; 17]).unwrap();
        let mut bounded = true;
        let f = moment_trajectory(&drive, &scaling(8, 0.5), &init, &[1.0], &OracleOptions::default(), |_, m| {
            bounded &= m.one_point.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v));
            bounded &= m.two_point.values().iter().all(|&v| v <= 1e-14);
        })
        .unwrap();
        assert!(bounded);
        let mid = f[0].rho(0);
        let limit = quasi_static_profile(0.0, 1.0, &drive).unwrap();
        assert!((mid - limit).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_initial_mean() {
        let d = Drive::constant(0.2, 0.8);
        assert!(one_point_evolution(&d, &scaling(2, 1.0), &[0.5; 4], 1.0, &OracleOptions::default()).is_err());
        assert!(one_point_evolution(&d, &scaling(2, 1.0), &[1.5; 5], 1.0, &OracleOptions::default()).is_err());
    }
}
