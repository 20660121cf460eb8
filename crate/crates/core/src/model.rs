//! Shared parameterization: time protocols, scaling, lattice geometry and
//! per-replica randomness.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Random stream handed to a single replica.
pub type ReplicaRng = ChaCha8Rng;

/// Interval constraint on the values of a [`TimeProfile`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl ValueRange {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        ValueRange {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub const fn open(lo: f64, hi: f64) -> Self {
        ValueRange {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }

    /// The open unit interval, for reservoir densities.
    pub const fn unit_open() -> Self {
        Self::open(0.0, 1.0)
    }

    /// `(0, ∞)`, for fugacities and inverse temperatures.
    pub const fn positive() -> Self {
        Self::open(0.0, f64::INFINITY)
    }

    pub const fn any() -> Self {
        Self::closed(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        if v.is_nan() {
            return false;
        }
        let above = if self.lo_open { v > self.lo } else { v >= self.lo };
        let below = if self.hi_open { v < self.hi } else { v <= self.hi };
        above && below
    }

    fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }
}

impl fmt::Display for ValueRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// The built-in protocol shapes. Config files name them as
/// `constant(v)`, `affine(a,b)` (= a + b·t) or `sine(mean,amp,period)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProfileKind {
    Constant(f64),
    Affine { a: f64, b: f64 },
    Sine { mean: f64, amp: f64, period: f64 },
}

impl ProfileKind {
    fn natural_lipschitz(&self) -> f64 {
        match *self {
            ProfileKind::Constant(_) => 0.0,
            ProfileKind::Affine { b, .. } => b.abs(),
            ProfileKind::Sine { amp, period, .. } => amp.abs() * 2.0 * std::f64::consts::PI / period,
        }
    }

    fn raw(&self, t: f64) -> f64 {
        match *self {
            ProfileKind::Constant(v) => v,
            ProfileKind::Affine { a, b } => a + b * t,
            ProfileKind::Sine { mean, amp, period } => {
                mean + amp * (2.0 * std::f64::consts::PI * t / period).sin()
            }
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProfileKind::Constant(v) => write!(f, "constant({v})"),
            ProfileKind::Affine { a, b } => write!(f, "affine({a},{b})"),
            ProfileKind::Sine { mean, amp, period } => write!(f, "sine({mean},{amp},{period})"),
        }
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse profile `{s}`"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let args = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        if args.iter().any(|a| !a.is_finite()) {
            return Err(bad());
        }
        match (name, args.as_slice()) {
            ("constant", &[v]) => Ok(ProfileKind::Constant(v)),
            ("affine", &[a, b]) => Ok(ProfileKind::Affine { a, b }),
            ("sine", &[mean, amp, period]) => {
                if period <= 0.0 {
                    return Err(Error::Config(format!("sine period must be positive in `{s}`")));
                }
                Ok(ProfileKind::Sine { mean, amp, period })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ProfileKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProfileKind> for String {
    fn from(k: ProfileKind) -> String {
        k.to_string()
    }
}

/// First failure found by [`TimeProfile::lipschitz_check`].
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProfileViolation {
    #[error("value {value} at t={t} lies outside {range}")]
    OutOfRange { t: f64, value: f64, range: ValueRange },
    #[error("difference quotient {quotient} on [{t0}, {t1}] exceeds Lipschitz bound {bound}")]
    Lipschitz {
        t0: f64,
        t1: f64,
        quotient: f64,
        bound: f64,
    },
}

/// Scalar protocol of macroscopic time (or of the macroscopic position, for
/// temperature profiles) with a declared Lipschitz constant and value range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub kind: ProfileKind,
    pub lipschitz_bound: f64,
    pub range: ValueRange,
}

impl TimeProfile {
    pub fn new(kind: ProfileKind, range: ValueRange) -> Self {
        TimeProfile {
            kind,
            lipschitz_bound: kind.natural_lipschitz(),
            range,
        }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(ProfileKind::Constant(v), ValueRange::any())
    }

    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(ProfileKind::Affine { a, b }, ValueRange::any())
    }

    pub fn sine(mean: f64, amp: f64, period: f64) -> Self {
        Self::new(ProfileKind::Sine { mean, amp, period }, ValueRange::any())
    }

    pub fn with_range(mut self, range: ValueRange) -> Self {
        self.range = range;
        self
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz_bound = bound;
        self
    }

    /// Value at time `t`. Sinusoids are clipped to the range hull.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let v = self.kind.raw(t);
        match self.kind {
            ProfileKind::Sine { .. } => self.range.clamp(v),
            _ => v,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ProfileKind::Constant(_))
    }

    /// Supremum of the profile over `[0, horizon]`.
    pub fn sup_on(&self, horizon: f64) -> f64 {
        match self.kind {
            ProfileKind::Constant(v) => v,
            ProfileKind::Affine { .. } => self.eval(0.0).max(self.eval(horizon)),
            ProfileKind::Sine { mean, amp, period } => {
                if horizon >= period {
                    self.range.clamp(mean + amp.abs())
                } else {
                    let steps = 4096;
                    let grid = (0..=steps)
                        .map(|k| self.eval(horizon * k as f64 / steps as f64))
                        .fold(f64::NEG_INFINITY, f64::max);
                    let slack = self.lipschitz_bound * horizon / steps as f64;
                    self.range.clamp(grid + slack).min(mean + amp.abs())
                }
            }
        }
    }

    /// Checks range membership and difference quotients on the grid
    /// `0, step, 2·step, …, horizon`.
    pub fn lipschitz_check(
        &self,
        horizon: f64,
        grid_step: f64,
    ) -> std::result::Result<(), ProfileViolation> {
        assert!(grid_step > 0.0, "grid step must be positive");
        let n = (horizon / grid_step).ceil().max(0.0) as usize;
        let time = |k: usize| (k as f64 * grid_step).min(horizon);
        let mut prev_t = 0.0;
        let mut prev_v = self.eval(0.0);
        if !self.range.contains(prev_v) {
            return Err(ProfileViolation::OutOfRange {
                t: 0.0,
                value: prev_v,
                range: self.range,
            });
        }
        for k in 1..=n {
            let t = time(k);
            let v = self.eval(t);
            if !self.range.contains(v) {
                return Err(ProfileViolation::OutOfRange {
                    t,
                    value: v,
                    range: self.range,
                });
            }
            let dt = t - prev_t;
            if dt > 0.0 {
                let quotient = (v - prev_v).abs() / dt;
                if quotient > self.lipschitz_bound * (1.0 + 1e-9) + 1e-12 {
                    return Err(ProfileViolation::Lipschitz {
                        t0: prev_t,
                        t1: t,
                        quotient,
                        bound: self.lipschitz_bound,
                    });
                }
            }
            prev_t = t;
            prev_v = v;
        }
        Ok(())
    }

    pub fn satisfies_lipschitz(&self, horizon: f64, grid_step: f64) -> bool {
        self.lipschitz_check(horizon, grid_step).is_ok()
    }
}

impl fmt::Display for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

/// Pair of boundary protocols: `minus` acts at the left end, `plus` at the right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub minus: TimeProfile,
    pub plus: TimeProfile,
}

impl Drive {
    pub fn new(minus: TimeProfile, plus: TimeProfile) -> Self {
        Drive { minus, plus }
    }

    /// Constant reservoir densities in `(0, 1)`.
    pub fn constant(minus: f64, plus: f64) -> Self {
        Drive {
            minus: TimeProfile::constant(minus).with_range(ValueRange::unit_open()),
            plus: TimeProfile::constant(plus).with_range(ValueRange::unit_open()),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.minus.eval(t), self.plus.eval(t))
    }

    pub fn is_constant(&self) -> bool {
        self.minus.is_constant() && self.plus.is_constant()
    }

    /// Runs [`TimeProfile::lipschitz_check`] on both sides.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let step = (horizon / 1000.0).max(1e-3);
        self.minus.lipschitz_check(horizon, step)?;
        self.plus.lipschitz_check(horizon, step)?;
        Ok(())
    }
}

/// Lattice half-width `n`, time-scale exponent `alpha` and macroscopic horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub n: usize,
    pub alpha: f64,
    pub horizon: f64,
}

impl ScalingParams {
    pub fn new(n: usize, alpha: f64, horizon: f64) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n", "lattice size must be at least 1"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("must be a positive number, got {alpha}")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(invalid("horizon", format!("must be finite and non-negative, got {horizon}")));
        }
        Ok(ScalingParams { n, alpha, horizon })
    }

    /// The acceleration factor `N^{2+α}`.
    #[inline]
    pub fn speedup(&self) -> f64 {
        (self.n as f64).powf(2.0 + self.alpha)
    }

    #[inline]
    pub fn macro_to_micro(&self, t: f64) -> f64 {
        self.speedup() * t
    }

    #[inline]
    pub fn micro_to_macro(&self, s: f64) -> f64 {
        s / self.speedup()
    }

    pub fn n_i64(&self) -> i64 {
        self.n as i64
    }
}

/// Microscopic time `N^{2+α}·t` corresponding to macroscopic time `t`.
pub fn macro_to_micro_time(t: f64, scaling: &ScalingParams) -> f64 {
    scaling.macro_to_micro(t)
}

/// Linear interpolation of the two reservoir values at `r ∈ [-1, 1]`.
#[inline]
pub fn linear_interpolation(r: f64, minus: f64, plus: f64) -> f64 {
    0.5 * (plus - minus) * r + 0.5 * (plus + minus)
}

/// The stationary density profile of the current reservoir values at
/// position `r ∈ [-1, 1]` and macroscopic time `t`.
pub fn quasi_static_profile(r: f64, t: f64, drive: &Drive) -> Result<f64> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(invalid("r", format!("{r} outside [-1, 1]")));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", format!("negative time {t}")));
    }
    let (minus, plus) = drive.at(t);
    for v in [minus, plus] {
        if !(v > 0.0 && v < 1.0) {
            return Err(invalid("drive", format!("reservoir density {v} outside (0, 1)")));
        }
    }
    Ok(linear_interpolation(r, minus, plus))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies one replica's random stream.
///
/// The stream is ChaCha8 keyed by the master seed with the replica index as
/// the stream counter, so every replica can be regenerated in isolation and
/// parallel and serial fan-out produce identical bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        SeedSpec {
            master_seed,
            replica_index,
        }
    }

    pub fn rng(&self) -> ReplicaRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replica_index);
        rng
    }

    pub fn with_replica(&self, replica_index: u64) -> Self {
        SeedSpec {
            master_seed: self.master_seed,
            replica_index,
        }
    }

    /// Independent family of streams for a sub-experiment tagged `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        SeedSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(0x5851_f42d))),
            replica_index: self.replica_index,
        }
    }
}

/// Standard exponential variate.
#[inline]
pub fn exp1(rng: &mut impl rand::Rng) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::Exp1, rng)
}

/// Standard normal variate.
#[inline]
pub fn normal(rng: &mut impl rand::Rng) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn drive(minus: f64, plus: f64) -> Drive {
        Drive::constant(minus, plus)
    }

    #[test]
    fn profile_midpoint_and_ends() {
        let d = drive(0.2, 0.8);
        assert!((quasi_static_profile(0.0, 0.3, &d).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(quasi_static_profile(1.0, 0.3, &d).unwrap(), 0.8);
        let flat = drive(0.37, 0.37);
        for r in [-1.0, -0.3, 0.0, 0.9] {
            assert!((quasi_static_profile(r, 2.0, &flat).unwrap() - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_rejects_bad_arguments() {
        let d = drive(0.2, 0.8);
        assert!(quasi_static_profile(1.5, 0.0, &d).is_err());
        assert!(quasi_static_profile(0.0, -1.0, &d).is_err());
    }

    #[test]
    fn micro_time() {
        let s = ScalingParams::new(10, 1.0, 2.0).unwrap();
        assert!((macro_to_micro_time(2.0, &s) - 2000.0).abs() < 1e-9);
        assert_eq!(macro_to_micro_time(0.0, &s), 0.0);
        let s = ScalingParams::new(16, 0.5, 1.0).unwrap();
        assert!((macro_to_micro_time(1.0, &s) - 16f64.powf(2.5)).abs() < 1e-9);
        assert!((macro_to_micro_time(1.0, &s) - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_validation() {
        assert!(ScalingParams::new(0, 1.0, 1.0).is_err());
        assert!(ScalingParams::new(4, 0.0, 1.0).is_err());
        assert!(ScalingParams::new(4, -1.0, 1.0).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        assert!(TimeProfile::constant(0.4).satisfies_lipschitz(5.0, 0.01));
        assert!(TimeProfile::constant(0.4).with_lipschitz(3.0).satisfies_lipschitz(5.0, 0.01));
        let f = TimeProfile::affine(0.3, 0.1);
        assert_eq!(f.lipschitz_bound, 0.1);
        assert!(f.satisfies_lipschitz(3.0, 0.01));
        let err = f.with_lipschitz(0.05).lipschitz_check(3.0, 0.01).unwrap_err();
        match err {
            ProfileViolation::Lipschitz { t0, quotient, .. } => {
                assert_eq!(t0, 0.0);
                assert!((quotient - 0.1).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn range_violation_reported() {
        let f = TimeProfile::affine(0.3, 0.5).with_range(ValueRange::unit_open());
        match f.lipschitz_check(2.0, 0.1).unwrap_err() {
            ProfileViolation::OutOfRange { t, .. } => assert!((t - 1.4).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sine_is_clipped_and_lipschitz() {
        let f = TimeProfile::sine(0.5, 0.6, 1.0).with_range(ValueRange::closed(0.1, 0.9));
        for k in 0..100 {
            let v = f.eval(k as f64 * 0.013);
            assert!((0.1..=0.9).contains(&v));
        }
        assert!(f.satisfies_lipschitz(2.0, 0.001));
        assert!((f.sup_on(3.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn profile_grammar_round_trip() {
        for s in ["constant(0.2)", "affine(0.3,-0.1)", "sine(0.5,0.1,2)"] {
            let k: ProfileKind = s.parse().unwrap();
            assert_eq!(k.to_string().parse::<ProfileKind>().unwrap(), k);
        }
        assert!("linear(1)".parse::<ProfileKind>().is_err());
        assert!("affine(1)".parse::<ProfileKind>().is_err());
        assert!("sine(0.5,0.1,0)".parse::<ProfileKind>().is_err());
        assert!("constant(0.2".parse::<ProfileKind>().is_err());
    }

    #[test]
    fn seed_streams_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8).map(|_| SeedSpec::new(7, 3).rng().random()).collect();
        let b: Vec<u64> = (0..8).map(|_| SeedSpec::new(7, 3).rng().random()).collect();
        assert_eq!(a, b);
        let mut r1 = SeedSpec::new(7, 3).rng();
        let mut r2 = SeedSpec::new(7, 4).rng();
        let mut r3 = SeedSpec::new(7, 3).derive(1).rng();
        let x1: u64 = r1.random();
        assert_ne!(x1, r2.random::<u64>());
        assert_ne!(x1, r3.random::<u64>());
    }

    proptest! {
        #[test]
        fn profile_is_affine_in_r(r1 in -1.0f64..1.0, r2 in -1.0f64..1.0,
                                  a in 0.01f64..0.99, b in 0.01f64..0.99, t in 0.0f64..5.0) {
            let d = Drive::new(TimeProfile::constant(a), TimeProfile::constant(b));
            let mid = quasi_static_profile(0.5 * (r1 + r2), t, &d).unwrap();
            let avg = 0.5 * (quasi_static_profile(r1, t, &d).unwrap() + quasi_static_profile(r2, t, &d).unwrap());
            prop_assert!((mid - avg).abs() < 1e-14);
        }
    }
}
