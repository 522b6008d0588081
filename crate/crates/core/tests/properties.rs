mod common;

use behinv::hankel::{hankel, min_pe_length};
use behinv::linalg::{null_space, rank, vstack};
use behinv::*;
use common::{collect_bank, random_case, test_input};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x00b3_41e7),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn toeplitz_rank_grows_by_at_most_m(seed in any::<u64>()) {
        let case = random_case(seed);
        let sys = &case.sys;
        let mut prev = 0;
        for t in 0..=sys.n() + 1 {
            let r = rank(&sys.toeplitz_matrix(t));
            prop_assert!(r >= prev);
            prop_assert!(r - prev <= sys.m());
            prev = r;
        }
    }

    #[test]
    fn rank_condition_persists_beyond_inherent_delay(seed in any::<u64>()) {
        let case = random_case(seed);
        for l in case.delay..=case.sys.n() {
            prop_assert!(case.sys.has_delay_inverse(l).unwrap(), "L = {l}");
        }
    }

    #[test]
    fn model_inverse_reproduces_input(seed in any::<u64>(), x_scale in -2.0..2.0f64) {
        let case = random_case(seed);
        let sys = &case.sys;
        let inv = sys.build_model_inverse(case.delay).unwrap();
        let target = {
            let mut s = DMatrix::zeros(sys.m(), sys.m() * (case.delay + 1));
            s.view_mut((0, 0), (sys.m(), sys.m())).fill_with_identity();
            s
        };
        let k_residual = (&inv.k * sys.toeplitz_matrix(case.delay) - target).norm();
        prop_assert!(k_residual <= 1e-10, "K residual {k_residual}");

        let x0 = DVector::from_fn(sys.n(), |i, _| x_scale * (i as f64 + 1.0).cos());
        let u = test_input(sys.m(), 40, 0, seed);
        let (_, y) = sys.simulate(&x0, &u).unwrap();
        let u_hat = inv.simulate(&x0, &y).unwrap();
        prop_assert!(u_hat.max_abs_diff(&u).unwrap() <= 1e-8);
    }

    #[test]
    fn stacked_io_relation(seed in any::<u64>(), k in 0i64..20) {
        let case = random_case(seed);
        let sys = &case.sys;
        let l = case.delay + 1;
        let x0 = DVector::from_fn(sys.n(), |i, _| (i as f64) - 1.0);
        let u = test_input(sys.m(), 30, 0, seed);
        let (x, y) = sys.simulate(&x0, &u).unwrap();
        let lhs = y.stacked(k, k + l as i64).unwrap();
        let rhs = sys.observability_matrix(l) * x.at(k) + sys.toeplitz_matrix(l) * u.stacked(k, k + l as i64).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-10);
    }

    #[test]
    fn hankel_is_linear(
        a in prop::collection::vec(-5.0..5.0f64, 12),
        b in prop::collection::vec(-5.0..5.0f64, 12),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
        depth in 1usize..=6,
    ) {
        let f = Signal::new(0, DMatrix::from_column_slice(2, 6, &a));
        let g = Signal::new(0, DMatrix::from_column_slice(2, 6, &b));
        let combo = Signal::new(0, f.data() * alpha + g.data() * beta);
        let lhs = hankel(&combo, depth).unwrap().data;
        let rhs = hankel(&f, depth).unwrap().data * alpha + hankel(&g, depth).unwrap().data * beta;
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn pe_implies_enough_columns(
        values in prop::collection::vec(-1.0..1.0f64, 2..40),
        q in 1usize..=3,
        order in 1usize..=8,
    ) {
        let len = values.len() / q;
        prop_assume!(len > 0);
        let u = Signal::new(0, DMatrix::from_column_slice(q, len, &values[..q * len]));
        if pe_check(&u, order) {
            prop_assert!(len + 1 >= order + q * order);
            prop_assert!(len >= min_pe_length(q, order));
        }
    }

    #[test]
    fn bank_shape_and_column_consistency(
        t_p in 1usize..=4,
        t_f in 1usize..=4,
        l in 0usize..=3,
        extra in 0usize..=10,
        seed in any::<u64>(),
    ) {
        let t = t_p + t_f + extra;
        let u = test_input(2, t + l, 0, seed);
        let y = test_input(3, t + l, 0, seed.wrapping_add(1));
        let bank = DataBank::build(&u, &y, t_p, t_f, l, None).unwrap();
        let n_cols = t - t_p - t_f + 1;
        for block in [&bank.u_p, &bank.y_p, &bank.u_f, &bank.y_fl] {
            prop_assert_eq!(block.ncols(), n_cols);
        }
        for c in 0..n_cols {
            let c64 = c as i64;
            prop_assert_eq!(bank.u_p.column(c).into_owned(), u.stacked(c64, c64 + t_p as i64 - 1).unwrap());
            prop_assert_eq!(bank.y_p.column(c).into_owned(), y.stacked(c64, c64 + t_p as i64 - 1).unwrap());
            let f0 = c64 + t_p as i64;
            prop_assert_eq!(bank.u_f.column(c).into_owned(), u.stacked(f0, f0 + t_f as i64 - 1).unwrap());
            prop_assert_eq!(bank.y_fl.column(c).into_owned(), y.stacked(f0, f0 + (t_f + l) as i64 - 1).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn data_driven_recovery_is_exact_and_unique(seed in any::<u64>(), t_f in 1usize..=3) {
        let case = random_case(seed);
        let sys = &case.sys;
        let bank = collect_bank(sys, case.t_p, t_f, case.delay, seed);
        prop_assert!(nullspace_equality_check(&bank));

        let x0 = DVector::from_fn(sys.n(), |i, _| 0.5 * (i as f64 + seed as f64).sin());
        let u = test_input(sys.m(), 30, 0, seed.wrapping_add(7));
        let (_, y) = sys.simulate(&x0, &u).unwrap();
        let t0 = 3;
        let problem = InversionProblem::from_trajectory(&bank, &u, &y, t0).unwrap();
        let sol = solve_g(&problem).unwrap();
        let recovered = &bank.u_f * &sol.g;
        let truth = u.stacked(t0 + case.t_p as i64, t0 + (case.t_p + t_f) as i64 - 1).unwrap();
        prop_assert!((&recovered - truth).amax() <= 1e-7);

        let stack = vstack(&[&bank.u_p, &bank.y_p, &bank.y_fl]);
        let z = null_space(&stack);
        if z.ncols() > 0 {
            let shift = DVector::from_fn(z.ncols(), |i, _| ((i + 1) as f64).sqrt());
            let other = &bank.u_f * (&sol.g + &z * shift);
            prop_assert!((other - recovered).amax() <= 1e-9);
        }
    }

    #[test]
    fn realtime_estimator_has_delay_l(seed in any::<u64>()) {
        let case = random_case(seed);
        let sys = &case.sys;
        let bank = collect_bank(sys, case.t_p, 1, case.delay, seed);
        let u = test_input(sys.m(), 40, 0, seed.wrapping_add(3));
        let (_, y) = sys.simulate(&DVector::zeros(sys.n()), &u).unwrap();
        let est = run_algorithm2(&bank, &y, None).unwrap();
        let l = case.delay as i64;
        let delayed = est.u_hat.slice(l, 39).unwrap().with_start(0);
        prop_assert!(delayed.max_abs_diff(&u).unwrap() <= 1e-7);

        let model = sys.build_model_inverse(case.delay).unwrap().simulate(&DVector::zeros(sys.n()), &y).unwrap();
        let after = (case.t_p + case.delay) as i64;
        let cmp = est.u_hat.slice(after, 39).unwrap().with_start(after - l);
        prop_assert!(cmp.max_abs_diff(&model).unwrap() <= 1e-7);
    }

    #[test]
    fn observer_identities(seed in any::<u64>(), d0 in -1.0..1.0f64, d1 in -1.0..1.0f64) {
        let case = random_case(seed);
        prop_assume!(case.delay >= 1);
        let sys = &case.sys;
        let bank = collect_bank(sys, case.t_p, 1, case.delay, seed);
        let u0 = test_input(sys.m(), 50, 0, seed.wrapping_add(5));
        let d = Signal::new(0, DMatrix::from_fn(sys.m(), 50, |i, _| if i % 2 == 0 { d0 } else { d1 }));
        let run = run_dob(sys, &bank, &u0, &d, &DobConfig::default()).unwrap();
        let (d_err, delta_err) = run.identity_defects();
        prop_assert!(d_err <= 1e-6 && delta_err <= 1e-6);
        prop_assert!(verify_transfer_relation(&run) <= 1e-6);
    }

    #[test]
    fn tracked_input_respects_the_box(seed in any::<u64>(), bound in 0.05..2.0f64) {
        let case = random_case(seed);
        let sys = &case.sys;
        let bank = collect_bank(sys, case.t_p, 2, case.delay, seed);
        let u = test_input(sys.m(), 20, 0, seed.wrapping_add(9));
        let (_, y) = sys.simulate(&DVector::zeros(sys.n()), &u).unwrap();
        let tp = case.t_p as i64;
        let rows = sys.p() * (2 + case.delay);
        let problem = TrackingProblem {
            bank: &bank,
            u_past: u.stacked(2, 1 + tp).unwrap(),
            y_past: y.stacked(2, 1 + tp).unwrap(),
            y_star: DVector::from_fn(rows, |i, _| 3.0 * (i as f64 * 1.3).sin()),
            bounds: InputBox::symmetric(sys.m(), bound),
        };
        let sol = track(&problem, &SolverConfig::default()).unwrap();
        prop_assert!(sol.box_violation <= 1e-8);
        prop_assert!(sol.equality_residual <= 1e-8);
    }
}
