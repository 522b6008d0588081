#![allow(dead_code)]

use behinv::linalg::{pinv, singular_values};
use behinv::{generate_pe_input, DataBank, Signal, StateSpaceSystem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random plant satisfying every hypothesis of exact recovery, with the
/// delay and past-window length it should be inverted with.
pub struct RandomCase {
    pub sys: StateSpaceSystem<f64>,
    pub delay: usize,
    pub t_p: usize,
    pub seed: u64,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn conditioning(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    let smin = sv
        .iter()
        .copied()
        .take(m.nrows().min(m.ncols()))
        .fold(f64::INFINITY, f64::min);
    smin / sv[0]
}

/// Stable, controllable, observable, invertible plant with `n ≤ 6`,
/// `m ≤ p ≤ 4`, a stable model-based inverse and well-conditioned
/// observability and controllability matrices. Feedthrough is drawn full,
/// zero, zero with `CB = 0`, or rank one.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(1..=6);
        let p = rng.random_range(1..=4);
        let m = rng.random_range(1..=p);
        let mut a = uniform(&mut rng, n, n);
        let smax = singular_values(&a)[0];
        if smax > 0.0 {
            a *= rng.random_range(0.3..0.95) / smax;
        }
        let b = uniform(&mut rng, n, m);
        let mut c = uniform(&mut rng, p, n);
        let d = match rng.random_range(0..4) {
            0 => uniform(&mut rng, p, m),
            1 => DMatrix::zeros(p, m),
            2 if n > m => {
                // CB = 0: relative degree two or more
                let proj = DMatrix::identity(n, n) - &b * pinv(&b);
                c = &c * proj;
                DMatrix::zeros(p, m)
            }
            _ => {
                // nonzero but rank-deficient feedthrough
                let col = uniform(&mut rng, p, 1);
                let row = uniform(&mut rng, 1, m);
                if m > 1 {
                    col * row
                } else {
                    DMatrix::zeros(p, m)
                }
            }
        };
        if c.amax() < 0.1 {
            continue;
        }
        let sys = StateSpaceSystem::new(a, b, c, d).unwrap();
        if !sys.is_controllable() || !sys.is_observable() {
            continue;
        }
        // tolerances below assume a reasonably conditioned state basis
        if conditioning(&sys.observability_matrix(n)) < 1e-4
            || conditioning(&sys.controllability_matrix()) < 1e-4
        {
            continue;
        }
        let Ok(Some(delay)) = sys.inherent_delay(None) else {
            continue;
        };
        // floating-point exactness needs the inverse dynamics to be stable
        let inv = sys.build_model_inverse(delay).unwrap();
        let rho = inv
            .a_tilde
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if rho >= 0.95 {
            continue;
        }
        let t_p = sys.observability_index().unwrap();
        return RandomCase {
            sys,
            delay,
            t_p,
            seed,
        };
    }
}

/// Collects `T + L` samples from rest with a PE input of the order the
/// bank needs and assembles the bank.
pub fn collect_bank(
    sys: &StateSpaceSystem<f64>,
    t_p: usize,
    t_f: usize,
    l: usize,
    seed: u64,
) -> DataBank<f64> {
    let order = sys.n() + t_p + t_f + l;
    let t = 2 * ((sys.m() + 1) * order);
    let u_d = generate_pe_input::<f64>(sys.m(), t + l, order, seed).unwrap();
    let (_, y_d) = sys.simulate(&DVector::zeros(sys.n()), &u_d).unwrap();
    let bank = DataBank::build(&u_d, &y_d, t_p, t_f, l, Some(sys.n())).unwrap();
    assert!(bank.pe.unwrap().satisfied);
    bank
}

/// Random test input of length `len` starting at 0, zero before `rest`.
pub fn test_input(m: usize, len: usize, rest: usize, seed: u64) -> Signal<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let data = DMatrix::from_fn(m, len, |_, j| {
        if j < rest {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    Signal::new(0, data)
}
