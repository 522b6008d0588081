//! Output tracking under input bounds: pick `g` minimising
//! `‖Y_fL·g − y*‖²` subject to the history equalities and
//! `lower ≤ U_f·g ≤ upper` per channel.
//!
//! The equalities are eliminated with `g = g_part + Z·w` (`Z` an
//! orthonormal null-space basis of `[U_p; Y_p]`); the remaining box-
//! constrained least squares is solved by ADMM on the split `v = U_f·g`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hankel::DataBank;
use crate::inversion::consistency_tolerance;
use crate::linalg::{lstsq_min_norm, null_space, pinv, vconcat, vstack};
use crate::scalar::{lit, widen, Scalar};

/// Per-channel input bounds; `None` leaves that side open.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox<T: Scalar> {
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
}

impl<T: Scalar> InputBox<T> {
    pub fn unbounded(m: usize) -> Self {
        InputBox {
            lower: vec![None; m],
            upper: vec![None; m],
        }
    }

    pub fn symmetric(m: usize, bound: T) -> Self {
        InputBox {
            lower: vec![Some(-bound); m],
            upper: vec![Some(bound); m],
        }
    }

    pub fn channels(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.lower.len() != m || self.upper.len() != m {
            return Err(Error::invalid(format!(
                "bounds must have {m} entries per side"
            )));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo > hi {
                    return Err(Error::invalid(format!("empty interval on channel {i}")));
                }
            }
        }
        Ok(())
    }

    /// Projection of a stacked `m·T_f` vector onto the repeated box.
    fn project(&self, v: &mut DVector<T>) {
        let m = self.channels();
        for (idx, x) in v.iter_mut().enumerate() {
            let ch = idx % m;
            if let Some(lo) = self.lower[ch] {
                if *x < lo {
                    *x = lo;
                }
            }
            if let Some(hi) = self.upper[ch] {
                if *x > hi {
                    *x = hi;
                }
            }
        }
    }

    /// Largest bound violation of a stacked vector.
    pub fn violation(&self, v: &DVector<T>) -> T {
        let m = self.channels();
        let mut worst = T::zero();
        for (idx, &x) in v.iter().enumerate() {
            let ch = idx % m;
            if let Some(lo) = self.lower[ch] {
                worst = worst.max(lo - x);
            }
            if let Some(hi) = self.upper[ch] {
                worst = worst.max(x - hi);
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct TrackingProblem<'a, T: Scalar> {
    pub bank: &'a DataBank<T>,
    pub u_past: DVector<T>,
    pub y_past: DVector<T>,
    /// Desired `y*_[0, T_f+L-1]`.
    pub y_star: DVector<T>,
    pub bounds: InputBox<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T> {
    pub rho: T,
    pub max_iterations: usize,
    pub tolerance: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            rho: T::one(),
            max_iterations: 50_000,
            tolerance: lit::<T>(1e-10).max(T::default_epsilon() * lit(100.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackingSolution<T: Scalar> {
    /// `U_f·g`, stacked over `T_f` steps.
    pub u: DVector<T>,
    /// `‖Y_fL·g − y*‖²`
    pub objective: T,
    pub g: DVector<T>,
    pub equality_residual: T,
    pub box_violation: T,
    pub iterations: usize,
}

/// Solves the constrained tracking problem.
pub fn track<T: Scalar>(
    problem: &TrackingProblem<'_, T>,
    config: &SolverConfig<T>,
) -> Result<TrackingSolution<T>> {
    let bank = problem.bank;
    let bp = bank.params;
    if problem.u_past.len() != bp.m * bp.t_p || problem.y_past.len() != bp.p * bp.t_p {
        return Err(Error::invalid("history windows do not match the bank"));
    }
    if problem.y_star.len() != bp.p * (bp.t_f + bp.l) {
        return Err(Error::invalid(format!(
            "y* has length {}, expected {}",
            problem.y_star.len(),
            bp.p * (bp.t_f + bp.l)
        )));
    }
    problem.bounds.validate(bp.m)?;

    // history equalities
    let eq = vstack(&[&bank.u_p, &bank.y_p]);
    let eq_rhs = vconcat(&[&problem.u_past, &problem.y_past]);
    let (g_part, eq_res) = lstsq_min_norm(&eq, &eq_rhs);
    let eq_tol = consistency_tolerance(eq_rhs.norm());
    // NaN counts as infeasible
    if !matches!(
        eq_res.partial_cmp(&eq_tol),
        Some(Ordering::Less | Ordering::Equal)
    ) {
        return Err(Error::InfeasibleHistory {
            residual: widen(eq_res),
            tolerance: widen(eq_tol),
        });
    }
    let z = null_space(&eq);

    let a = &bank.y_fl * &z;
    let b = &problem.y_star - &bank.y_fl * &g_part;
    let mmat = &bank.u_f * &z;
    let c = &bank.u_f * &g_part;

    let (w, iterations) = if z.ncols() == 0 {
        (DVector::zeros(0), 0)
    } else {
        admm(&a, &b, &mmat, &c, &problem.bounds, config)?
    };

    let g = &g_part + &z * &w;
    let u = &bank.u_f * &g;
    let fit = &bank.y_fl * &g - &problem.y_star;
    let equality_residual = (&eq * &g - &eq_rhs).norm();
    let box_violation = problem.bounds.violation(&u);
    let feas_tol = lit::<T>(1e-8).max(T::default_epsilon().sqrt());
    if box_violation > feas_tol * (T::one() + u.amax()) {
        return Err(Error::Convergence {
            iterations,
            primal: widen(box_violation),
            dual: f64::NAN,
        });
    }
    Ok(TrackingSolution {
        u,
        objective: fit.norm_squared(),
        g,
        equality_residual,
        box_violation,
        iterations,
    })
}

/// Scaled-form ADMM for `min ‖A·w − b‖²` s.t. `M·w + c ∈ box`.
fn admm<T: Scalar>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    mmat: &DMatrix<T>,
    c: &DVector<T>,
    bounds: &InputBox<T>,
    config: &SolverConfig<T>,
) -> Result<(DVector<T>, usize)> {
    let rho = config.rho;
    let two = lit::<T>(2.0);
    let h = a.tr_mul(a) * two + mmat.tr_mul(mmat) * rho;
    let h_inv = pinv(&h);
    let atb2 = a.tr_mul(b) * two;

    let mut v = c.clone();
    bounds.project(&mut v);
    let mut lambda = DVector::zeros(c.len());
    let scale = T::one() + c.amax() + b.amax();

    let mut primal = T::zero();
    let mut dual = T::zero();
    for it in 1..=config.max_iterations {
        let rhs = &atb2 + mmat.tr_mul(&(&v - c - &lambda)) * rho;
        let w = &h_inv * rhs;
        let mw_c = mmat * &w + c;
        let v_prev = v.clone();
        v = &mw_c + &lambda;
        bounds.project(&mut v);
        let r = &mw_c - &v;
        lambda += &r;
        primal = r.amax();
        dual = (mmat.tr_mul(&(&v - &v_prev)) * rho).amax();
        if primal <= config.tolerance * scale && dual <= config.tolerance * scale {
            return Ok((w, it));
        }
    }
    Err(Error::Convergence {
        iterations: config.max_iterations,
        primal: widen(primal),
        dual: widen(dual),
    })
}
