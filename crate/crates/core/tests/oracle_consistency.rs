use quasistatic::model::{quasi_static_profile, Drive, ScalingParams, TimeProfile};
use quasistatic::oracle::{
    master_equation_distribution, master_equation_trajectory, moment_trajectory, two_point_evolution,
    MasterDistribution, MomentField, OracleOptions,
};
use quasistatic::ssep::ExclusionConfig;

fn tight() -> OracleOptions {
    OracleOptions::default().with_tolerance(1e-11, 1e-13)
}

fn check_against_master(drive: &Drive, n: usize, alpha: f64, t: f64, coupling: f64) -> f64 {
    let scaling = ScalingParams::new(n, alpha, t).unwrap();
    let eta0 = ExclusionConfig::new(n, (0..2 * n + 1).map(|i| (i % 2) as u8).collect()).unwrap();
    let law = master_equation_distribution(drive, &scaling, &eta0, t, coupling).unwrap();
    let init = MomentField::product(eta0.occupancy().iter().map(|&v| v as f64).collect()).unwrap();
    let field = two_point_evolution(drive, &scaling, &init, t, &tight().with_coupling(coupling)).unwrap();
    let nn = n as i64;
    let mut worst = 0.0f64;
    for x in -nn..=nn {
        worst = worst.max((law.marginal(x) - field.rho(x)).abs());
        for y in x + 1..=nn {
            worst = worst.max((law.covariance(x, y) - field.two_point.get(x, y)).abs());
        }
    }
    worst
}

#[test]
fn moments_match_master_equation_constant_drive() {
    let d = Drive::constant(0.2, 0.8);
    for coupling in [1.0, 0.5] {
        let err = check_against_master(&d, 2, 1.0, 1.0, coupling);
        assert!(err < 1e-8, "coupling {coupling}: {err}");
    }
}

#[test]
fn moments_match_master_equation_time_dependent_drive() {
    let d = Drive::new(TimeProfile::affine(0.3, 0.1), TimeProfile::sine(0.6, 0.2, 0.7));
    for n in [1, 3] {
        let err = check_against_master(&d, n, 0.5, 1.0, 1.0);
        assert!(err < 1e-8, "N {n}: {err}");
    }
}

#[test]
fn master_probabilities_sum_to_one_along_trajectory() {
    let d = Drive::new(TimeProfile::affine(0.2, 0.5), TimeProfile::constant(0.9));
    let s = ScalingParams::new(2, 1.0, 1.0).unwrap();
    let start = MasterDistribution::product_bernoulli(2, 0.1).unwrap();
    let laws = master_equation_trajectory(&d, &s, &start, &[0.25, 0.5, 1.0], 1.0).unwrap();
    for law in laws {
        assert!((law.total() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn covariance_cauchy_in_n() {
    let drive = Drive::new(TimeProfile::affine(0.3, 0.1), TimeProfile::affine(0.8, -0.1));
    let mut vals = Vec::new();
    for n in [8usize, 16, 32] {
        let s = ScalingParams::new(n, 1.0, 1.0).unwrap();
        let mean = (0..2 * n + 1)
            .map(|i| quasi_static_profile((i as f64 - n as f64) / n as f64, 0.0, &drive).unwrap())
            .collect();
        let init = MomentField::product(mean).unwrap();
        let opts = OracleOptions::default().with_tolerance(1e-9, 1e-11);
        let f = moment_trajectory(&drive, &s, &init, &[1.0], &opts, |_, _| {}).unwrap();
        let nn = n as f64;
        vals.push(nn * f[0].two_point.get(-(n as i64) / 2, n as i64 / 2));
    }
    let ratio = (vals[1] - vals[0]).abs() / (vals[2] - vals[1]).abs();
    assert!(ratio > 1.7, "{vals:?} ratio {ratio}");
}
