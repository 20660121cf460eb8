use proptest::prelude::*;
use quasistatic::chain::{run_chain, run_chain_replicas, ChainInitial, ChainRunSpec, ChainState, Splitting};
use quasistatic::dual::run_stirring;
use quasistatic::model::{Drive, ScalingParams, SeedSpec, TimeProfile};
use quasistatic::oracle::{moment_trajectory, one_point_trajectory, MomentField, OracleOptions};
use quasistatic::ssep::{run_ssep, EventKind, InitialCondition, SsepRunSpec};
use quasistatic::stats::{ks_test, Tally};
use quasistatic::thermo::{free_energy, gibbs_potential, length, tension, Potential};
use quasistatic::zero_range::{
    run_zero_range, zr_fugacity, zr_mean_density, zr_profile_limit, RateFunction, ZrInitial, ZrRunSpec,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn unit_profile() -> impl Strategy<Value = TimeProfile> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(TimeProfile::constant),
        (0.1f64..0.5, -0.1f64..0.1).prop_map(|(a, b)| TimeProfile::affine(a, b)),
        (0.3f64..0.7, 0.0f64..0.3, 0.2f64..2.0).prop_map(|(m, a, p)| TimeProfile::sine(m, a, p)),
    ]
}

fn potential() -> impl Strategy<Value = Potential> {
    prop_oneof![
        Just(Potential::Harmonic),
        (-1.0f64..1.0, 0.5f64..2.0).prop_map(|(a, b)| Potential::fpu(a, b).unwrap()),
    ]
}

fn rate() -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        Just(RateFunction::Linear),
        Just(RateFunction::Constant),
        (0.2f64..=1.0).prop_map(RateFunction::Power),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ssep_boundary_events_change_count_by_one(
        minus in unit_profile(), plus in unit_profile(), seed in any::<u64>(), n in 2usize..6,
    ) {
        let drive = Drive::new(minus, plus);
        let spec = SsepRunSpec::new(
            InitialCondition::Bernoulli(0.5),
            drive,
            ScalingParams::new(n, 0.5, 1.0).unwrap(),
            vec![0.5, 1.0],
            SeedSpec::new(seed, 0),
        )
        .with_event_log();
        let run = run_ssep(&spec).unwrap();
        let events = run.events.unwrap();
        for w in events.windows(2) {
            let before = w[0].particles_after as i64;
            let after = w[1].particles_after as i64;
            match w[1].kind {
                EventKind::Exchange { .. } => prop_assert_eq!(after, before),
                EventKind::Boundary { created, site } => {
                    prop_assert_eq!(site.abs(), n as i64);
                    prop_assert_eq!(after - before, if created { 1 } else { -1 });
                }
            }
        }
        for s in &run.snapshots {
            prop_assert!(s.config.occupancy().iter().all(|&v| v <= 1));
        }
    }

    #[test]
    fn one_point_oracle_stays_in_unit_interval(
        minus in unit_profile(), plus in unit_profile(), init in 0.0f64..=1.0, alpha in 0.25f64..2.0,
    ) {
        let drive = Drive::new(minus, plus);
        let n = 6;
        let scaling = ScalingParams::new(n, alpha, 1.0).unwrap();
        let mut ok = true;
        one_point_trajectory(&drive, &scaling, &vec![init; 2 * n + 1], &[0.5, 1.0], &OracleOptions::default(), |_, y| {
            ok &= y.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v));
        })
        .unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn pair_correlations_nonpositive_from_product_law(
        minus in unit_profile(), plus in unit_profile(), init in 0.0f64..=1.0,
    ) {
        let drive = Drive::new(minus, plus);
        let n = 4;
        let scaling = ScalingParams::new(n, 1.0, 1.0).unwrap();
        let start = MomentField::product(vec![init; 2 * n + 1]).unwrap();
        let out = moment_trajectory(&drive, &scaling, &start, &[0.25, 1.0], &OracleOptions::default(), |_, _| {}).unwrap();
        for f in &out {
            prop_assert!(f.two_point.values().iter().all(|&v| v <= 1e-12));
        }
    }

    #[test]
    fn stirring_walkers_stay_distinct(seed in any::<u64>(), n in 2usize..8, horizon in 0.0f64..50.0) {
        let start: Vec<i64> = (-(n as i64)..=n as i64).step_by(2).collect();
        let mut rng = SeedSpec::new(seed, 0).rng();
        let ens = run_stirring(&start, n, horizon, 1.0, &mut rng).unwrap();
        let mut alive: Vec<i64> = ens.outcomes.iter().filter(|w| !w.absorbed).map(|w| w.final_position).collect();
        let count = alive.len();
        alive.sort_unstable();
        alive.dedup();
        prop_assert_eq!(alive.len(), count);
        prop_assert!(alive.iter().all(|x| x.abs() <= n as i64));
    }

    #[test]
    fn zr_density_increasing_in_fugacity(g in rate(), a in 0.01f64..0.9, b in 0.01f64..0.9) {
        prop_assume!((a - b).abs() > 1e-3);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (rl, rh) = (zr_mean_density(lo, g, 1e-12).unwrap(), zr_mean_density(hi, g, 1e-12).unwrap());
        prop_assert!(rh > rl, "R({lo}) = {rl}, R({hi}) = {rh}");
    }

    #[test]
    fn zr_limit_has_affine_fugacity(g in rate(), lm in 0.05f64..0.9, lp in 0.05f64..0.9, y1 in -1.0f64..1.0, y2 in -1.0f64..1.0) {
        let drive = Drive::constant(lm, lp);
        let fug = |y: f64| zr_fugacity(zr_profile_limit(y, 0.0, &drive, g, 1e-13).unwrap(), g, 1e-13).unwrap();
        let mid = fug(0.5 * (y1 + y2));
        prop_assert!((mid - 0.5 * (fug(y1) + fug(y2))).abs() < 1e-7);
    }

    #[test]
    fn zr_particle_count_moves_by_at_most_one(g in rate(), lm in 0.0f64..0.8, lp in 0.0f64..0.8, seed in any::<u64>()) {
        let spec = ZrRunSpec {
            record_counts: true,
            ..ZrRunSpec::new(
                ZrInitial::Empty,
                g,
                Drive::constant(lm, lp),
                ScalingParams::new(3, 0.5, 1.0).unwrap(),
                vec![1.0],
                SeedSpec::new(seed, 0),
            )
        };
        let run = run_zero_range(&spec).unwrap();
        let trace = run.particle_trace.unwrap();
        prop_assert!(trace.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1));
        if let Some(&last) = trace.last() {
            prop_assert_eq!(last, run.snapshots[0].config.particles());
        }
    }

    #[test]
    fn tension_inverts_length(pot in potential(), tau in -2.0f64..2.0, beta in 0.3f64..3.0) {
        let r = length(tau, beta, pot, 1e-12).unwrap();
        prop_assert!((tension(r, beta, pot, 1e-12).unwrap() - tau).abs() < 1e-8);
    }

    #[test]
    fn free_energy_slope_is_tension(pot in potential(), tau in -1.5f64..1.5, beta in 0.5f64..2.0) {
        let r = length(tau, beta, pot, 1e-12).unwrap();
        let d = 1e-4;
        let slope = (free_energy(r + d, beta, pot, 1e-12).unwrap() - free_energy(r - d, beta, pot, 1e-12).unwrap()) / (2.0 * d);
        prop_assert!((slope - tau).abs() < 1e-6, "slope {slope} vs {tau}");
    }

    #[test]
    fn gibbs_potential_convex_in_tension(pot in potential(), tau in -1.5f64..1.5, beta in 0.3f64..3.0) {
        let d = 0.05;
        let g = |t: f64| gibbs_potential(t, beta, pot, 1e-12).unwrap();
        prop_assert!(g(tau + d) - 2.0 * g(tau) + g(tau - d) >= -1e-10);
    }

    #[test]
    fn tally_statistics_ignore_completion_order(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 2..20),
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let ordered: Tally = rows.iter().cloned().enumerate().map(|(i, r)| (i as u64, r)).collect();
        let mut shuffled_rows: Vec<(u64, Vec<f64>)> = rows.iter().cloned().enumerate().map(|(i, r)| (i as u64, r)).collect();
        shuffled_rows.shuffle(&mut SeedSpec::new(perm_seed, 0).rng());
        let (a, b) = shuffled_rows.split_at(shuffled_rows.len() / 2);
        let merged = a.iter().cloned().collect::<Tally>().merge(b.iter().cloned().collect());
        let x = ordered.estimates().unwrap();
        let y = merged.estimates().unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert_eq!(p.mean.to_bits(), q.mean.to_bits());
            prop_assert_eq!(p.stderr.to_bits(), q.stderr.to_bits());
        }
    }
}

#[test]
fn thermostat_substep_is_exact_in_law() {
    let n = 10;
    let (gamma, beta, p0) = (0.7, 1.6, 1.3);
    let state = ChainState {
        r: vec![0.0; n],
        p: vec![p0; n],
    };
    let t = 0.005;
    let scaling = ScalingParams::new(n, 0.5, t).unwrap();
    let spec = ChainRunSpec {
        initial: ChainInitial::State(state),
        splitting: Splitting::ThermostatOnly,
        ..ChainRunSpec::new(
            Potential::Harmonic,
            TimeProfile::constant(beta),
            TimeProfile::constant(0.0),
            gamma,
            scaling,
            vec![t],
            SeedSpec::new(77, 0),
        )
        .with_step(scaling.macro_to_micro(t) / 20.0)
    };
    let runs = run_chain_replicas(&spec, 1000).unwrap();
    let s = runs[0].step * runs[0].steps as f64;
    let decay = (-gamma * s).exp();
    assert!(decay > 0.2 && decay < 0.5);
    let law = Normal::new(p0 * decay, ((1.0 - decay * decay) / beta).sqrt()).unwrap();
    let p: Vec<f64> = runs.iter().flat_map(|r| r.snapshots[0].state.p.iter().copied()).collect();
    assert_eq!(p.len(), 10_000);
    let pvalue = ks_test(&p, |x| law.cdf(x));
    assert!(pvalue > 0.01, "KS p-value {pvalue}");
    assert!(runs.iter().all(|r| r.snapshots[0].state.r.iter().all(|&v| v == 0.0)));
}

#[test]
fn work_equals_tension_times_length_change() {
    let tau = 0.8;
    let n = 16;
    let spec = ChainRunSpec::new(
        Potential::fpu(0.3, 1.0).unwrap(),
        TimeProfile::affine(1.0, 0.5),
        TimeProfile::constant(tau),
        1.0,
        ScalingParams::new(n, 0.25, 0.5).unwrap(),
        vec![0.1, 0.3, 0.5],
        SeedSpec::new(3, 0),
    );
    let run = run_chain(&spec).unwrap();
    let l0 = {
        // Replay the initial state from the same seed with no steps.
        let mut s0 = spec.clone();
        s0.snapshot_times = vec![0.0];
        run_chain(&s0).unwrap().snapshots[0].state.length()
    };
    for (snap, led) in run.snapshots.iter().zip(&run.ledger) {
        let expected = tau * (snap.state.length() - l0);
        assert!((led.w - expected).abs() < 1e-9 * (1.0 + expected.abs()), "{} vs {expected}", led.w);
    }
}
