mod common;

use behinv::fixtures::example1;
use behinv::*;
use common::collect_bank;
use nalgebra::{DMatrix, DVector};

fn command(len: usize) -> Signal<f64> {
    let data = DMatrix::from_fn(2, len, |i, k| {
        let t = k as f64;
        if i == 0 {
            (0.2 * t).sin()
        } else {
            0.5 * (0.05 * t).cos()
        }
    });
    Signal::new(0, data)
}

fn constant(len: usize, value: [f64; 2]) -> Signal<f64> {
    Signal::new(0, DMatrix::from_fn(2, len, |i, _| value[i]))
}

fn example1_bank() -> DataBank<f64> {
    collect_bank(&example1::<f64>(), 2, 1, 1, 51)
}

#[test]
fn no_disturbance_is_transparent() {
    let plant = example1::<f64>();
    let bank = example1_bank();
    let u0 = command(80);
    let run = run_dob(
        &plant,
        &bank,
        &u0,
        &constant(80, [0.0, 0.0]),
        &DobConfig::default(),
    )
    .unwrap();
    let (_, y_free) = plant.simulate(&DVector::zeros(2), &u0).unwrap();
    assert!(run.y.max_abs_diff(&y_free).unwrap() <= 1e-8);
    assert!(run.d_hat.data().amax() <= 1e-8);
    assert!(verify_transfer_relation(&run) <= 1e-8);
}

#[test]
fn constant_disturbance_is_rejected() {
    let plant = example1::<f64>();
    let bank = example1_bank();
    let u0 = command(100);
    let d = constant(100, [0.8, -0.4]);
    let run = run_dob(&plant, &bank, &u0, &d, &DobConfig::default()).unwrap();
    assert_eq!(run.startup, 3);
    let (_, y_free) = plant.simulate(&DVector::zeros(2), &u0).unwrap();
    let tail = run.y.slice(20, 99).unwrap();
    assert!(tail.max_abs_diff(&y_free).unwrap() <= 1e-4);

    let (d_err, delta_err) = run.identity_defects();
    assert!(d_err <= 1e-6 && delta_err <= 1e-6, "{d_err} {delta_err}");
    assert!(verify_transfer_relation(&run) <= 1e-6);
    // û(k) = d(k−L) + Δ(k−L)
    for k in 4..100 {
        let expected = d.at(k - 1) + run.delta.at(k - 1);
        assert!((run.u_hat.at(k) - expected).amax() <= 1e-6);
    }
}

#[test]
fn slowly_varying_disturbance() {
    let plant = example1::<f64>();
    let bank = example1_bank();
    let u0 = command(200);
    let d = Signal::new(
        0,
        DMatrix::from_fn(2, 200, |i, k| {
            let t = k as f64;
            let step = if k >= 40 { 1.0 } else { 0.0 };
            if i == 0 {
                step + 0.3 * (0.02 * t).sin()
            } else {
                -0.5 * step
            }
        }),
    );
    let run = run_dob(&plant, &bank, &u0, &d, &DobConfig::default()).unwrap();
    assert!(verify_transfer_relation(&run) <= 1e-6);

    let (_, y_free) = plant.simulate(&DVector::zeros(2), &u0).unwrap();
    let open = Signal::new(0, u0.data() + d.data());
    let (_, y_open) = plant.simulate(&DVector::zeros(2), &open).unwrap();
    let late_closed = run
        .y
        .slice(100, 199)
        .unwrap()
        .max_abs_diff(&y_free)
        .unwrap();
    let late_open = y_open
        .slice(100, 199)
        .unwrap()
        .max_abs_diff(&y_free)
        .unwrap();
    assert!(
        late_closed < 0.05 * late_open,
        "{late_closed} vs {late_open}"
    );
}

#[test]
fn nonzero_initial_state() {
    let plant = example1::<f64>();
    let bank = example1_bank();
    let u0 = command(60);
    let d = constant(60, [0.3, 0.3]);
    let config = DobConfig {
        x0: Some(DVector::from_vec(vec![0.5, -0.5])),
        startup: None,
    };
    // With B invertible the at-rest history can still explain x(0) through
    // a fictitious u(-1), so the observer engages exactly after startup.
    let run = run_dob(&plant, &bank, &u0, &d, &config).unwrap();
    let (d_err, delta_err) = run.identity_defects();
    assert!(d_err <= 1e-6 && delta_err <= 1e-6);
    assert!(verify_transfer_relation(&run) <= 1e-6);
}

#[test]
fn feedthrough_plant_with_unit_delay() {
    let plant = StateSpaceSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.4, 0.1, -0.2, 0.3]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
    )
    .unwrap();
    assert_eq!(plant.inherent_delay(None).unwrap(), Some(1));
    let bank = collect_bank(&plant, 2, 1, 1, 52);
    let u0 = command(80);
    let d = constant(80, [-0.6, 0.2]);
    let run = run_dob(&plant, &bank, &u0, &d, &DobConfig::default()).unwrap();
    let (d_err, delta_err) = run.identity_defects();
    assert!(d_err <= 1e-6 && delta_err <= 1e-6);
    assert!(verify_transfer_relation(&run) <= 1e-6);
}

#[test]
fn rejects_bad_configuration() {
    let plant = example1::<f64>();
    let bank = example1_bank();
    let u0 = command(10);
    let d = constant(10, [0.0, 0.0]);
    let no_delay = bank.rebuild(2, 1, 0).unwrap();
    assert!(run_dob(&plant, &no_delay, &u0, &d, &DobConfig::default()).is_err());
    assert!(run_dob(
        &plant,
        &bank,
        &u0,
        &constant(9, [0.0, 0.0]),
        &DobConfig::default()
    )
    .is_err());
    let batch_bank = bank.rebuild(2, 3, 1).unwrap();
    assert!(run_dob(&plant, &batch_bank, &u0, &d, &DobConfig::default()).is_err());
}
