//! Equilibrium thermodynamics of a single spring: Gibbs potential,
//! length/tension conjugacy, free energy, entropy and the Clausius
//! bookkeeping built on them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::TimeProfile;

/// Nearest-neighbour interaction `V(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Potential {
    /// `r²/2`
    Harmonic,
    /// `r²/2 + a·r³/3 + b·r⁴/4`, `b > 0`
    Fpu { a: f64, b: f64 },
}

/// Result of probing the growth conditions on a finite grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub nonnegative: bool,
    pub superlinear: bool,
    /// `V''` stays bounded at the grid extremes. Quartic potentials fail this
    /// and are still admitted; the dynamics only needs a stable step.
    pub curvature_bounded: bool,
}

impl Potential {
    pub fn fpu(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(invalid("potential", "fpu needs b > 0"));
        }
        // r²/2 + a r³/3 + b r⁴/4 >= 0 iff a²/9 <= b/2.
        if a * a > 4.5 * b {
            return Err(invalid("potential", format!("fpu({a},{b}) takes negative values")));
        }
        Ok(Potential::Fpu { a, b })
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Potential::Harmonic => 0.5 * r * r,
            Potential::Fpu { a, b } => {
                let r2 = r * r;
                r2 * (0.5 + r * a / 3.0 + 0.25 * b * r2)
            }
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Potential::Harmonic => r,
            Potential::Fpu { a, b } => r + r * r * (a + b * r),
        }
    }

    #[inline]
    pub fn second_derivative(&self, r: f64) -> f64 {
        match *self {
            Potential::Harmonic => 1.0,
            Potential::Fpu { a, b } => 1.0 + r * (2.0 * a + 3.0 * b * r),
        }
    }

    pub fn is_even(&self) -> bool {
        match *self {
            Potential::Harmonic => true,
            Potential::Fpu { a, .. } => a == 0.0,
        }
    }

    pub fn growth_report(&self) -> GrowthReport {
        let grid: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.05).collect();
        let nonnegative = grid.iter().all(|&r| self.value(r) >= 0.0);
        let far = 1e3;
        let superlinear = [far, -far]
            .iter()
            .all(|&r| self.value(r) / r.abs() > 10.0 * self.value(r / 10.0) / (r / 10.0).abs());
        let fd = |r: f64| {
            let h = 1e-3 * r.abs().max(1.0);
            (self.value(r + h) - 2.0 * self.value(r) + self.value(r - h)) / (h * h)
        };
        let curvature_bounded = [far, -far].iter().all(|&r| fd(r) <= 2.0 * fd(r / 10.0) + 1.0);
        GrowthReport {
            nonnegative,
            superlinear,
            curvature_bounded,
        }
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Harmonic => write!(f, "harmonic"),
            Potential::Fpu { a, b } => write!(f, "fpu({a},{b})"),
        }
    }
}

impl FromStr for Potential {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "harmonic" {
            return Ok(Potential::Harmonic);
        }
        let args = s
            .strip_prefix("fpu(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| invalid("potential", format!("unknown potential `{s}`")))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(invalid("potential", "fpu takes two arguments"));
        }
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| invalid("potential", format!("bad number `{p}`")))
        };
        Potential::fpu(num(parts[0])?, num(parts[1])?)
    }
}

impl TryFrom<String> for Potential {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Potential> for String {
    fn from(p: Potential) -> String {
        p.to_string()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(invalid("beta", "inverse temperature must be positive and finite"))
    }
}

/// Single-spring Gibbs weight `exp(-β(V(r) - τr))` resolved on a trapezoid
/// grid that has passed the halved-step agreement test.
#[derive(Clone, Debug)]
pub struct SpringLaw {
    pub tau: f64,
    pub beta: f64,
    pub lo: f64,
    pub hi: f64,
    /// `log ∫ exp(-β(V - τr)) dr`
    pub log_z: f64,
    pub mean_r: f64,
    pub var_r: f64,
    pub mean_v: f64,
    log_peak: f64,
    potential: Potential,
}

const TAIL_LOG: f64 = -80.0;
const MAX_HALF_WIDTH: f64 = 1e6;

struct Moments {
    log_z: f64,
    r: f64,
    r2: f64,
    v: f64,
    log_peak: f64,
}

fn trapezoid(pot: Potential, tau: f64, beta: f64, lo: f64, hi: f64, n: usize) -> Moments {
    let h = (hi - lo) / n as f64;
    let phi = |r: f64| -beta * (pot.value(r) - tau * r);
    let nodes: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let expo: Vec<f64> = nodes.iter().map(|&r| phi(r)).collect();
    let peak = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut s1, mut s2, mut sv) = (0.0, 0.0, 0.0, 0.0);
    for (i, (&r, &e)) in nodes.iter().zip(&expo).enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 } * (e - peak).exp();
        z += w;
        s1 += w * r;
        s2 += w * r * r;
        sv += w * pot.value(r);
    }
    Moments {
        log_z: peak + (z * h).ln(),
        r: s1 / z,
        r2: s2 / z,
        v: sv / z,
        log_peak: peak,
    }
}

/// Resolves the Gibbs weight for `(τ, β)`: the interval around the origin is
/// doubled until both ends sit below `e^{-80}` times the peak, then the node
/// count is doubled until two successive grids agree to `tol`.
pub fn spring_law(tau: f64, beta: f64, pot: Potential, tol: f64) -> Result<SpringLaw> {
    check_beta(beta)?;
    if !tau.is_finite() {
        return Err(invalid("tau", "must be finite"));
    }
    let tol = tol.max(1e-14);
    let phi = |r: f64| -beta * (pot.value(r) - tau * r);
    let mut half = 1.0;
    let (lo, hi) = loop {
        let (lo, hi) = (-half, half);
        let peak = (0..=64)
            .map(|k| phi(lo + (hi - lo) * k as f64 / 64.0))
            .fold(f64::NEG_INFINITY, f64::max);
        if phi(lo) < peak + TAIL_LOG && phi(hi) < peak + TAIL_LOG {
            break (lo, hi);
        }
        half *= 2.0;
        if half > MAX_HALF_WIDTH {
            return Err(Error::Divergent(format!(
                "Gibbs integral for {pot} at τ = {tau}, β = {beta} does not converge"
            )));
        }
    };
    let mut n = 128;
    let mut prev = trapezoid(pot, tau, beta, lo, hi, n);
    loop {
        n *= 2;
        let next = trapezoid(pot, tau, beta, lo, hi, n);
        let sd = (prev.r2 - prev.r * prev.r).max(0.0).sqrt();
        let agree = (next.log_z - prev.log_z).abs() <= tol
            && (next.r - prev.r).abs() <= tol * (1.0 + sd + next.r.abs())
            && (next.r2 - prev.r2).abs() <= tol * (1.0 + next.r2)
            && (next.v - prev.v).abs() <= tol * (1.0 + next.v.abs());
        if agree {
            return Ok(SpringLaw {
                tau,
                beta,
                lo,
                hi,
                log_z: next.log_z,
                mean_r: next.r,
                var_r: (next.r2 - next.r * next.r).max(0.0),
                mean_v: next.v,
                log_peak: next.log_peak,
                potential: pot,
            });
        }
        if n > 1 << 22 {
            return Err(Error::Divergent(format!(
                "quadrature for {pot} at τ = {tau}, β = {beta} did not settle"
            )));
        }
        prev = next;
    }
}

impl SpringLaw {
    /// Rejection sample from a uniform proposal on the resolved interval.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        // Nodes are fine enough that the true peak exceeds the grid peak by
        // far less than this margin.
        let ceiling = self.log_peak + 1e-3;
        loop {
            let r = self.lo + (self.hi - self.lo) * rng.random::<f64>();
            let e = -self.beta * (self.potential.value(r) - self.tau * r);
            if rng.random::<f64>().ln() < e - ceiling {
                return r;
            }
        }
    }
}

/// `log[√(2π/β) ∫ exp(-β(V(r) - τr)) dr]`
pub fn gibbs_potential(tau: f64, beta: f64, pot: Potential, tol: f64) -> Result<f64> {
    let law = spring_law(tau, beta, pot, tol)?;
    Ok(0.5 * (2.0 * std::f64::consts::PI / beta).ln() + law.log_z)
}

/// Mean spring length at tension `τ`.
pub fn length(tau: f64, beta: f64, pot: Potential, tol: f64) -> Result<f64> {
    Ok(spring_law(tau, beta, pot, tol)?.mean_r)
}

/// `β⁻¹ ∂_τ G` by a five-point difference; an independent route to
/// [`length`].
pub fn length_from_gibbs(tau: f64, beta: f64, pot: Potential, tol: f64) -> Result<f64> {
    let d = 1e-3;
    let g = |k: f64| gibbs_potential(tau + k * d, beta, pot, tol);
    let deriv = (g(-2.0)? - 8.0 * g(-1.0)? + 8.0 * g(1.0)? - g(2.0)?) / (12.0 * d);
    Ok(deriv / beta)
}

/// Inverse of [`length`] in `τ`. `∂_τ length = β·Var(r) > 0`, so a
/// safeguarded Newton iteration on an expanding bracket converges.
pub fn tension(r: f64, beta: f64, pot: Potential, tol: f64) -> Result<f64> {
    check_beta(beta)?;
    if !r.is_finite() {
        return Err(invalid("r", "must be finite"));
    }
    let quad_tol = (tol * 1e-2).max(1e-14);
    let guess = pot.derivative(r);
    let eval = |t: f64| spring_law(t, beta, pot, quad_tol);
    let mut lo = guess - 1.0;
    let mut hi = guess + 1.0;
    let mut step = 1.0;
    let mut law_lo = eval(lo)?;
    while law_lo.mean_r > r {
        step *= 2.0;
        lo -= step;
        if step > 1e8 {
            return Err(Error::RootFinding(format!("length {r} below attainable range")));
        }
        law_lo = eval(lo)?;
    }
    step = 1.0;
    let mut law_hi = eval(hi)?;
    while law_hi.mean_r < r {
        step *= 2.0;
        hi += step;
        if step > 1e8 {
            return Err(Error::RootFinding(format!("length {r} above attainable range")));
        }
        law_hi = eval(hi)?;
    }
    let mut t = guess.clamp(lo, hi);
    for _ in 0..200 {
        let law = eval(t)?;
        let f = law.mean_r - r;
        if f == 0.0 {
            return Ok(t);
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let slope = beta * law.var_r;
        let newton = t - f / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= tol * 1e-2 * (1.0 + t.abs()) || hi - lo <= tol * 1e-2 {
            return Ok(next);
        }
        t = next;
    }
    Err(Error::RootFinding(format!("tension for r = {r}, β = {beta} did not converge")))
}

/// `F(r, β) = τ*·r - β⁻¹·G(τ*, β)` with `τ* = tension(r, β)`.
pub fn free_energy(r: f64, beta: f64, pot: Potential, tol: f64) -> Result<f64> {
    let tau = tension(r, beta, pot, tol)?;
    Ok(tau * r - gibbs_potential(tau, beta, pot, tol)? / beta)
}

/// `u = 1/(2β) + ⟨V⟩`
pub fn mean_energy(tau: f64, beta: f64, pot: Potential, tol: f64) -> Result<f64> {
    let law = spring_law(tau, beta, pot, tol)?;
    Ok(0.5 / beta + law.mean_v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub s: f64,
    /// Optimizing inverse temperature.
    pub beta_star: f64,
}

/// `S(u, r) = inf_β { β·u - β·F(r, β) }`. The objective is convex in `β`
/// with derivative `u - u(r, β)`, so the optimizer solves
/// `mean_energy(tension(r, β), β) = u`.
pub fn entropy(u: f64, r: f64, pot: Potential, tol: f64) -> Result<EntropyPoint> {
    if !u.is_finite() || !r.is_finite() {
        return Err(invalid("u", "energy and length must be finite"));
    }
    let energy_at = |lb: f64| -> Result<f64> {
        let beta = lb.exp();
        let tau = tension(r, beta, pot, tol)?;
        mean_energy(tau, beta, pot, tol)
    };
    // Energy decreases in β.
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while energy_at(lo)? < u {
        lo -= 2.0;
        if lo < -30.0 {
            return Err(Error::RootFinding(format!("energy {u} too large to bracket at r = {r}")));
        }
    }
    while energy_at(hi)? > u {
        hi += 2.0;
        if hi > 30.0 {
            return Err(Error::RootFinding(format!("energy {u} not attainable at r = {r}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if energy_at(mid)? > u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let beta = (0.5 * (lo + hi)).exp();
    let f = free_energy(r, beta, pot, tol)?;
    Ok(EntropyPoint {
        s: beta * (u - f),
        beta_star: beta,
    })
}

// Five-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss_legendre(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let c = a + w * (k as f64 + 0.5);
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            total += wt * 0.5 * w * f(c + 0.5 * w * x)?;
        }
    }
    Ok(total)
}

/// `∫_a^b F(r(y), β(y)) dy` for a smooth strain profile.
pub fn free_energy_integral(
    strain: impl Fn(f64) -> f64,
    beta: &TimeProfile,
    pot: Potential,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(a..=1.0).contains(&b) {
        return Err(invalid("interval", "need 0 <= a <= b <= 1"));
    }
    gauss_legendre(a, b, 16, |y| free_energy(strain(y), beta.eval(y), pot, tol))
}

/// `∫_0^1 F(r(y), β(y)) dy` for a piecewise-constant profile whose `k`-th
/// value covers `[k/m, (k+1)/m]`.
pub fn free_energy_functional(blocks: &[f64], beta: &TimeProfile, pot: Potential, tol: f64) -> Result<f64> {
    if blocks.is_empty() {
        return Err(Error::InsufficientData("empty strain profile".into()));
    }
    let m = blocks.len() as f64;
    let mut total = 0.0;
    for (k, &r) in blocks.iter().enumerate() {
        let (a, b) = (k as f64 / m, (k + 1) as f64 / m);
        total += gauss_legendre(a, b, 1, |y| free_energy(r, beta.eval(y), pot, tol))
            .map_err(|e| invalid("strain", format!("block {k} (r = {r}): {e}")))?;
    }
    Ok(total)
}

/// `∫_0^1 β⁻¹(y)·S(u(y), r(y)) dy` for piecewise-constant energy and strain
/// blocks.
pub fn entropy_functional(energy: &[f64], strain: &[f64], beta: &TimeProfile, pot: Potential, tol: f64) -> Result<f64> {
    if energy.len() != strain.len() || energy.is_empty() {
        return Err(invalid("blocks", "energy and strain blocks must match and be non-empty"));
    }
    let m = energy.len() as f64;
    let mut total = 0.0;
    for (k, (&u, &r)) in energy.iter().zip(strain).enumerate() {
        let s = entropy(u, r, pot, tol)?.s;
        let (a, b) = (k as f64 / m, (k + 1) as f64 / m);
        total += gauss_legendre(a, b, 1, |y| Ok(s / beta.eval(y)))?;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClausiusRow {
    pub t: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "dF")]
    pub df: f64,
    pub residual: f64,
}

/// `t ↦ |W(t) - (F̃(t) - F̃(t_0))|` with `F̃` from block strain profiles.
pub fn clausius_residual(
    times: &[f64],
    work: &[f64],
    strain_blocks: &[Vec<f64>],
    beta: &TimeProfile,
    pot: Potential,
    tol: f64,
) -> Result<Vec<ClausiusRow>> {
    if times.len() != work.len() || times.len() != strain_blocks.len() || times.is_empty() {
        return Err(invalid("grids", "times, work and strain snapshots must have equal non-zero length"));
    }
    let f: Vec<f64> = strain_blocks
        .iter()
        .map(|b| free_energy_functional(b, beta, pot, tol))
        .collect::<Result<_>>()?;
    Ok(times
        .iter()
        .zip(work)
        .zip(&f)
        .map(|((&t, &w), &fv)| {
            let df = fv - f[0];
            ClausiusRow {
                t,
                w,
                df,
                residual: (w - df).abs(),
            }
        })
        .collect())
}

/// Heat counterpart of [`clausius_residual`]: `|Q(t) - ∫β⁻¹ ΔS dy|`.
pub fn entropy_balance_residual(
    times: &[f64],
    heat: &[f64],
    energy_blocks: &[Vec<f64>],
    strain_blocks: &[Vec<f64>],
    beta: &TimeProfile,
    pot: Potential,
    tol: f64,
) -> Result<Vec<ClausiusRow>> {
    if times.len() != heat.len()
        || times.len() != strain_blocks.len()
        || times.len() != energy_blocks.len()
        || times.is_empty()
    {
        return Err(invalid("grids", "times, heat and block snapshots must have equal non-zero length"));
    }
    let s: Vec<f64> = energy_blocks
        .iter()
        .zip(strain_blocks)
        .map(|(e, r)| entropy_functional(e, r, beta, pot, tol))
        .collect::<Result<_>>()?;
    Ok(times
        .iter()
        .zip(heat)
        .zip(&s)
        .map(|((&t, &q), &sv)| {
            let ds = sv - s[0];
            ClausiusRow {
                t,
                w: q,
                df: ds,
                residual: (q - ds).abs(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-11;
    const FPU: Potential = Potential::Fpu { a: 0.0, b: 1.0 };

    #[test]
    fn potential_grammar() {
        assert_eq!("harmonic".parse::<Potential>().unwrap(), Potential::Harmonic);
        assert_eq!("fpu(0,1)".parse::<Potential>().unwrap(), FPU);
        assert!("fpu(0,-1)".parse::<Potential>().is_err());
        assert!("fpu(5,1)".parse::<Potential>().is_err());
        let rep = FPU.growth_report();
        assert!(rep.nonnegative && rep.superlinear && !rep.curvature_bounded);
        assert!(Potential::Harmonic.growth_report().curvature_bounded);
    }

    #[test]
    fn harmonic_gibbs_closed_form() {
        assert!((gibbs_potential(0.0, 1.0, Potential::Harmonic, TOL).unwrap() - (2.0 * PI).ln()).abs() < 1e-10);
        for (tau, beta) in [(0.3, 0.5), (-1.0, 2.0), (2.0, 1.3)] {
            let g = gibbs_potential(tau, beta, Potential::Harmonic, TOL).unwrap();
            let exact = (2.0 * PI / beta).ln() + beta * tau * tau / 2.0;
            assert!((g - exact).abs() < 1e-9, "{tau} {beta}: {g} vs {exact}");
        }
    }

    #[test]
    fn even_potential_symmetry() {
        let a = gibbs_potential(0.8, 1.0, FPU, TOL).unwrap();
        let b = gibbs_potential(-0.8, 1.0, FPU, TOL).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(length(0.0, 1.3, FPU, TOL).unwrap().abs() < 1e-10);
        assert!(tension(0.0, 1.3, FPU, TOL).unwrap().abs() < 1e-9);
    }

    #[test]
    fn length_two_routes() {
        assert!((length(0.7, 2.0, Potential::Harmonic, TOL).unwrap() - 0.7).abs() < 1e-10);
        let direct = length(0.5, 1.0, FPU, TOL).unwrap();
        let fd = length_from_gibbs(0.5, 1.0, FPU, TOL).unwrap();
        assert!((direct - fd).abs() < 1e-6, "{direct} vs {fd}");
    }

    #[test]
    fn tension_inverts_length() {
        assert!((tension(0.7, 2.0, Potential::Harmonic, 1e-10).unwrap() - 0.7).abs() < 1e-8);
        for tau in [-1.0, 0.0, 0.5, 2.0] {
            let r = length(tau, 1.0, FPU, TOL).unwrap();
            let back = tension(r, 1.0, FPU, 1e-10).unwrap();
            assert!((back - tau).abs() < 1e-8, "{tau}: {back}");
        }
    }

    #[test]
    fn free_energy_harmonic_and_derivative() {
        for (r, beta) in [(0.4, 1.0), (-1.2, 0.7)] {
            let f = free_energy(r, beta, Potential::Harmonic, 1e-10).unwrap();
            let exact = r * r / 2.0 - (2.0 * PI / beta).ln() / beta;
            assert!((f - exact).abs() < 1e-9);
        }
        let d = 1e-3;
        for r in [-0.5, 0.0, 0.5] {
            let fp = free_energy(r + d, 1.0, FPU, 1e-11).unwrap();
            let fm = free_energy(r - d, 1.0, FPU, 1e-11).unwrap();
            let slope = (fp - fm) / (2.0 * d);
            let tau = tension(r, 1.0, FPU, 1e-11).unwrap();
            assert!((slope - tau).abs() < 1e-6, "{r}: {slope} vs {tau}");
        }
    }

    #[test]
    fn mean_energy_forms() {
        assert!((mean_energy(0.5, 1.0, Potential::Harmonic, TOL).unwrap() - 1.125).abs() < 1e-10);
        assert!((mean_energy(0.0, 2.0, Potential::Harmonic, TOL).unwrap() - 0.5).abs() < 1e-10);
        let u: Vec<f64> = [2.0, 1.0, 0.5].iter().map(|&b| mean_energy(0.3, b, FPU, TOL).unwrap()).collect();
        assert!(u[0] < u[1] && u[1] < u[2]);
    }

    #[test]
    fn entropy_harmonic_differences() {
        // S = 1 + log(2π(u - r²/2)) for the harmonic spring.
        let r = 0.4;
        let (u1, u2) = (1.2, 2.5);
        let s1 = entropy(u1, r, Potential::Harmonic, 1e-11).unwrap();
        let s2 = entropy(u2, r, Potential::Harmonic, 1e-11).unwrap();
        let exact = ((u1 - r * r / 2.0) / (u2 - r * r / 2.0)).ln();
        assert!((s1.s - s2.s - exact).abs() < 1e-6);
        assert!((s1.beta_star - 1.0 / (u1 - 0.08)).abs() < 1e-8);
        let sym = entropy(u1, -r, Potential::Harmonic, 1e-11).unwrap();
        assert!((sym.s - s1.s).abs() < 1e-8);
    }

    #[test]
    fn functional_constant_and_additive() {
        let beta = TimeProfile::affine(0.8, 0.4);
        let flat = TimeProfile::constant(1.3);
        let c = free_energy_functional(&[0.6, 0.6], &flat, FPU, 1e-10).unwrap();
        assert!((c - free_energy(0.6, 1.3, FPU, 1e-10).unwrap()).abs() < 1e-10);
        let strain = |y: f64| 0.2 + 0.5 * y;
        let whole = free_energy_integral(strain, &beta, Potential::Harmonic, 0.0, 1.0, 1e-10).unwrap();
        let left = free_energy_integral(strain, &beta, Potential::Harmonic, 0.0, 0.5, 1e-10).unwrap();
        let right = free_energy_integral(strain, &beta, Potential::Harmonic, 0.5, 1.0, 1e-10).unwrap();
        assert!((whole - left - right).abs() < 1e-8);
    }

    #[test]
    fn invalid_beta_rejected() {
        assert!(gibbs_potential(0.0, -1.0, FPU, TOL).is_err());
    }

    #[test]
    fn sampler_matches_moments() {
        use rand::SeedableRng;
        let law = spring_law(0.5, 1.0, FPU, 1e-10).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20000).map(|_| law.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((m - law.mean_r).abs() < 4.0 * (law.var_r / xs.len() as f64).sqrt());
    }
}
