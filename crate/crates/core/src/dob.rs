//! Closed-loop disturbance observer built on the real-time estimator.
//!
//! The plant sees `u(k) = Δ(k) + d(k)` with `Δ(k) = u0(k) − d̂(k)`. The
//! estimator returns `û(k) = u(k − L)`, from which the observer subtracts
//! the delayed command path: `d̂(k) = û(k) − Δ(k − L) = d(k − L)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hankel::DataBank;
use crate::inversion::InverterState;
use crate::scalar::Scalar;
use crate::signal::Signal;
use crate::system::StateSpaceSystem;

#[derive(Debug, Clone, Default)]
pub struct DobConfig<T: Scalar> {
    /// Initial plant state; zero when absent.
    pub x0: Option<DVector<T>>,
    /// Steps run with `d̂ = 0` before the observer engages; `T_p + L` when absent.
    pub startup: Option<usize>,
}

/// Every signal recorded during one observer run.
#[derive(Debug, Clone)]
pub struct DobRun<T: Scalar> {
    pub plant: StateSpaceSystem<T>,
    pub x0: DVector<T>,
    pub t_p: usize,
    pub l: usize,
    pub startup: usize,
    pub u0: Signal<T>,
    pub d: Signal<T>,
    /// Input actually applied to the plant.
    pub u: Signal<T>,
    pub y: Signal<T>,
    pub u_hat: Signal<T>,
    pub d_hat: Signal<T>,
    pub delta: Signal<T>,
    pub residual_max: T,
}

impl<T: Scalar> DobRun<T> {
    /// `d(k − L)` with zero before the run starts.
    fn delayed_disturbance(&self, k: i64) -> DVector<T> {
        self.d
            .get(k - self.l as i64)
            .unwrap_or_else(|| DVector::zeros(self.d.dim()))
    }

    /// Largest deviations from `d̂(k) = d(k−L)` and `Δ(k) = u0(k) − d(k−L)`
    /// after the startup horizon.
    pub fn identity_defects(&self) -> (T, T) {
        let mut d_err = T::zero();
        let mut delta_err = T::zero();
        for k in (self.u0.start() + self.startup as i64)..self.u0.end() {
            let dk = self.delayed_disturbance(k);
            d_err = d_err.max((self.d_hat.at(k) - &dk).amax());
            delta_err = delta_err.max((self.delta.at(k) - (self.u0.at(k) - &dk)).amax());
        }
        (d_err, delta_err)
    }
}

/// Simulates the observer loop around `plant` with a bank of `T_f = 1`.
///
/// Within step `k` the estimator is evaluated on the output produced by the
/// current state, the observer sets `d̂(k)`, the input `u(k)` is applied and
/// the estimator commits `y(k)`. For plants with feedthrough the first
/// evaluation uses the output under `d̂(k) = 0`; the estimate of
/// `u(k − L)` does not depend on `u(k)` when `L ≥ 1`.
pub fn run_dob<T: Scalar>(
    plant: &StateSpaceSystem<T>,
    bank: &DataBank<T>,
    u0: &Signal<T>,
    d: &Signal<T>,
    config: &DobConfig<T>,
) -> Result<DobRun<T>> {
    let bp = bank.params;
    let (m, p) = (plant.m(), plant.p());
    if bp.m != m || bp.p != p {
        return Err(Error::invalid(format!(
            "bank is {}-in/{}-out, plant is {m}-in/{p}-out",
            bp.m, bp.p
        )));
    }
    if bp.l == 0 {
        return Err(Error::invalid(
            "the observer loop needs L >= 1; L = 0 closes an algebraic loop",
        ));
    }
    if u0.dim() != m || d.dim() != m {
        return Err(Error::invalid(
            "command and disturbance must have input dimension",
        ));
    }
    if u0.len() != d.len() || u0.start() != d.start() {
        return Err(Error::invalid(
            "command and disturbance must cover the same time range",
        ));
    }
    if u0.is_empty() {
        return Err(Error::invalid("empty command signal"));
    }
    let x0 = config
        .x0
        .clone()
        .unwrap_or_else(|| DVector::zeros(plant.n()));
    if x0.len() != plant.n() {
        return Err(Error::invalid(format!(
            "x0 has dimension {}, expected {}",
            x0.len(),
            plant.n()
        )));
    }
    let startup = config.startup.unwrap_or(bp.t_p + bp.l);
    let s = u0.start();
    let len = u0.len();
    let l = bp.l;

    let mut inverter = InverterState::new(bank, s, None)?;
    let mut u_mat = DMatrix::zeros(m, len);
    let mut y_mat = DMatrix::zeros(p, len);
    let mut u_hat_mat = DMatrix::zeros(m, len);
    let mut d_hat_mat = DMatrix::zeros(m, len);
    let mut delta_mat = DMatrix::zeros(m, len);
    let mut residual_max = T::zero();

    let mut x = x0.clone();
    for j in 0..len {
        let k = s + j as i64;
        let u0k = u0.at(k).into_owned();
        let dk = d.at(k).into_owned();

        let d_hat = if j < startup {
            DVector::zeros(m)
        } else {
            let y_trial = plant.output(&x, &(&u0k + &dk));
            let (u_hat, _) = inverter.peek(&y_trial)?;
            let delta_past = if j >= l {
                delta_mat.column(j - l).into_owned()
            } else {
                DVector::zeros(m)
            };
            u_hat - delta_past
        };
        let delta = &u0k - &d_hat;
        let uk = &delta + &dk;
        let yk = plant.output(&x, &uk);
        let (u_hat, residual) = inverter.step_with_residual(&yk)?;
        residual_max = residual_max.max(residual);

        u_mat.set_column(j, &uk);
        y_mat.set_column(j, &yk);
        u_hat_mat.set_column(j, &u_hat);
        d_hat_mat.set_column(j, &d_hat);
        delta_mat.set_column(j, &delta);
        x = plant.next_state(&x, &uk);
    }

    Ok(DobRun {
        plant: plant.clone(),
        x0,
        t_p: bp.t_p,
        l,
        startup,
        u0: u0.clone(),
        d: d.clone(),
        u: Signal::new(s, u_mat),
        y: Signal::new(s, y_mat),
        u_hat: Signal::new(s, u_hat_mat),
        d_hat: Signal::new(s, d_hat_mat),
        delta: Signal::new(s, delta_mat),
        residual_max,
    })
}

/// Resimulates the open-loop plant under `u0(k) + d(k) − d(k − L)` and
/// returns the largest output deviation from the recorded run after the
/// startup horizon.
///
/// During startup the recorded `d̂` is used in place of `d(k − L)`, so
/// the comparison isolates the engaged observer.
pub fn verify_transfer_relation<T: Scalar>(run: &DobRun<T>) -> T {
    let s = run.u0.start();
    let m = run.u0.dim();
    let mut u_eq = DMatrix::zeros(m, run.u0.len());
    for j in 0..run.u0.len() {
        let k = s + j as i64;
        let cancelled = if j < run.startup {
            run.d_hat.at(k).into_owned()
        } else {
            run.delayed_disturbance(k)
        };
        u_eq.set_column(j, &(run.u0.at(k) + run.d.at(k) - cancelled));
    }
    let (_, y_eq) = run
        .plant
        .simulate(&run.x0, &Signal::new(s, u_eq))
        .expect("run signals are consistent with the plant");
    let mut defect = T::zero();
    for k in (s + run.startup as i64)..run.y.end() {
        defect = defect.max((run.y.at(k) - y_eq.at(k)).amax());
    }
    defect
}
