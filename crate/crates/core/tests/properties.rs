use misanthrope::blockstats::{entropy_between_profiles, weighted_fluctuation};
use misanthrope::burgers::{shock_time, solve_characteristics, solve_godunov, Profile};
use misanthrope::equilibrium::DEFAULT_EPS_TAIL;
use misanthrope::simulate::{Configuration, Trajectory};
use misanthrope::{catalog, Catalog, EquilibriumFamily, PeriodicField, RFamily, Spin, TrigPoly};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model_entry(i: usize) -> Catalog {
    match i % 4 {
        0 => Catalog::Tasep,
        1 => Catalog::KExclusion { k: 3, alpha: None },
        2 => Catalog::ZeroRange(RFamily::Linear),
        _ => Catalog::Bricklayers(RFamily::Linear),
    }
}

fn profile(a1: f64, b1: f64, a2: f64) -> TrigPoly {
    let mut u = TrigPoly::sine(a1, 1);
    u.set_cos(1, b1);
    u.set_sin(2, a2);
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectories_conserve_mass_and_stay_in_range(
        which in 0usize..4,
        raw in proptest::collection::vec(0i64..4, 3..40),
        seed in any::<u64>(),
        horizon in 0.1f64..20.0,
    ) {
        let model = catalog(&model_entry(which)).unwrap();
        let b = model.bounds();
        let spins: Vec<Spin> = raw
            .iter()
            .map(|&z| z.clamp(b.z_min.unwrap_or(-3), b.z_max.unwrap_or(3)))
            .collect();
        let total: i64 = spins.iter().sum();
        let mut traj = Trajectory::new(&model, Configuration::new(spins)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        traj.run_until(horizon, &mut rng).unwrap();
        prop_assert_eq!(traj.config().total(), total);
        prop_assert!(traj.config().spins.iter().all(|&z| b.contains(z)));
        prop_assert_eq!(traj.config().micro_time, horizon);
    }

    #[test]
    fn density_is_increasing_in_the_tilt(which in 0usize..4, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let f = EquilibriumFamily::build(&catalog(&model_entry(which)).unwrap(), DEFAULT_EPS_TAIL).unwrap();
        let grid = f.density_grid(9);
        let (lo, hi) = (grid[0], grid[8]);
        let (v1, v2) = (lo + (hi - lo) * a.min(b), lo + (hi - lo) * a.max(b));
        prop_assume!(v2 - v1 > 1e-6);
        let (t1, t2) = (f.theta_of_v(v1).unwrap(), f.theta_of_v(v2).unwrap());
        prop_assert!(t2 > t1);
        prop_assert!(f.moments(t1).unwrap().variance > 0.0);
    }

    #[test]
    fn burgers_conserves_mass_and_respects_extremes(
        a1 in -0.6f64..0.6, b1 in -0.6f64..0.6, a2 in -0.3f64..0.3, frac in 0.0f64..0.9,
    ) {
        let u0 = profile(a1, b1, a2);
        let c0 = -2.0;
        let t_star = shock_time(&u0, c0);
        let t = if t_star.is_finite() { frac * t_star } else { frac };
        let start = Profile::sample(&u0, 512);
        let fine = Profile::sample(&u0, 1 << 16);
        let (lo, hi) = (fine.min(), fine.max());
        let u = solve_characteristics(&u0, c0, t, 512).unwrap();
        prop_assert!((u.mean() - start.mean()).abs() < 1e-8);
        prop_assert!(u.min() >= lo - 1e-8 && u.max() <= hi + 1e-8);
        let g = solve_godunov(&Profile::cell_averages(&u0, 256), c0, t, 0.5).unwrap();
        prop_assert!((g.mean() - Profile::cell_averages(&u0, 256).mean()).abs() < 1e-12);
    }

    #[test]
    fn statistic_obeys_crude_bound(
        raw in proptest::collection::vec(0i64..=1, 64..256),
        t in 0.0f64..0.1,
        b0 in -1.0f64..1.0,
        mode in 1usize..4,
    ) {
        let phi = TrigPoly::cosine(1.0, mode);
        let n = raw.len() as f64;
        let beta = 0.15;
        let s = weighted_fluctuation(&raw, &phi, beta, 0.5, b0, t);
        prop_assert!(s.abs() <= n.powf(beta) * phi.max_abs() * 0.5 + 1e-12);
    }

    #[test]
    fn relative_entropy_is_nonnegative(a in -0.5f64..0.5, b in -0.5f64..0.5, n in 50usize..400) {
        let f = EquilibriumFamily::build(&catalog(&Catalog::Tasep).unwrap(), DEFAULT_EPS_TAIL).unwrap();
        let (u1, u2) = (TrigPoly::sine(a, 1), TrigPoly::sine(b, 1));
        let e = entropy_between_profiles(&f, n, 0.15, 0.5, &u1, &u2).unwrap();
        prop_assert!(e.exact >= 0.0);
        if a == b {
            prop_assert_eq!(e.exact, 0.0);
        } else {
            prop_assert!(e.exact > 0.0);
        }
        let same = entropy_between_profiles(&f, n, 0.15, 0.5, &u1, &u1).unwrap();
        prop_assert_eq!(same.exact, 0.0);
    }
}

#[test]
fn trig_profiles_are_periodic() {
    let u = profile(0.3, -0.2, 0.1);
    for x in [0.0, 0.17, 0.5, 0.93] {
        assert!((u.value(x) - u.value(x + 1.0)).abs() < 1e-12);
    }
}
