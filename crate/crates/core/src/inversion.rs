//! Input recovery from output data: the stacked Hankel solve, the batch
//! estimator (`T_f`-long blocks) and the real-time one-step estimator.

use std::cmp::Ordering;
use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hankel::{hankel_window, DataBank};
use crate::linalg::{null_space, pinv, vconcat, vstack};
use crate::scalar::{lit, widen, Scalar};
use crate::signal::Signal;

/// Defect allowed in `[U_p; Y_p; Y_fL]·g = rhs` before the windows are
/// declared inconsistent with the data: `tol · (1 + ‖rhs‖)`.
pub fn consistency_tolerance<T: Scalar>(rhs_norm: T) -> T {
    let rel = lit::<T>(1e-6).max(T::default_epsilon().sqrt() * lit(10.0));
    rel * (T::one() + rhs_norm)
}

/// Right-hand side windows of the stacked Hankel system.
#[derive(Debug, Clone)]
pub struct InversionProblem<'a, T: Scalar> {
    pub bank: &'a DataBank<T>,
    /// `u_[t0, t0+T_p-1]`
    pub u_past: DVector<T>,
    /// `y_[t0, t0+T_p-1]`
    pub y_past: DVector<T>,
    /// `y_[t0+T_p, t0+T_p+T_f+L-1]`
    pub y_future: DVector<T>,
}

impl<'a, T: Scalar> InversionProblem<'a, T> {
    pub fn new(
        bank: &'a DataBank<T>,
        u_past: DVector<T>,
        y_past: DVector<T>,
        y_future: DVector<T>,
    ) -> Result<Self> {
        let bp = &bank.params;
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} has length {got}, expected {want}"
                )))
            }
        };
        check("u_past", u_past.len(), bp.m * bp.t_p)?;
        check("y_past", y_past.len(), bp.p * bp.t_p)?;
        check("y_future", y_future.len(), bp.p * (bp.t_f + bp.l))?;
        Ok(InversionProblem {
            bank,
            u_past,
            y_past,
            y_future,
        })
    }

    /// Cuts the windows starting at `t0` out of a recorded trajectory.
    pub fn from_trajectory(
        bank: &'a DataBank<T>,
        u: &Signal<T>,
        y: &Signal<T>,
        t0: i64,
    ) -> Result<Self> {
        let bp = &bank.params;
        let tp = bp.t_p as i64;
        let u_past = u.stacked(t0, t0 + tp - 1)?;
        let y_past = y.stacked(t0, t0 + tp - 1)?;
        let y_future = y.stacked(t0 + tp, t0 + tp + (bp.t_f + bp.l) as i64 - 1)?;
        InversionProblem::new(bank, u_past, y_past, y_future)
    }

    pub fn rhs(&self) -> DVector<T> {
        vconcat(&[&self.u_past, &self.y_past, &self.y_future])
    }
}

/// A solution `g` and the norm of its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct GSolution<T: Scalar> {
    pub g: DVector<T>,
    pub residual: T,
}

/// Precomputed pseudoinverse of `[U_p; Y_p; Y_fL]` for repeated solves
/// against one bank.
#[derive(Debug, Clone)]
pub struct BankSolver<T: Scalar> {
    stack: DMatrix<T>,
    stack_pinv: DMatrix<T>,
    u_f: DMatrix<T>,
}

impl<T: Scalar> BankSolver<T> {
    pub fn new(bank: &DataBank<T>) -> Self {
        let stack = vstack(&[&bank.u_p, &bank.y_p, &bank.y_fl]);
        let stack_pinv = pinv(&stack);
        BankSolver {
            stack,
            stack_pinv,
            u_f: bank.u_f.clone(),
        }
    }

    pub fn stack(&self) -> &DMatrix<T> {
        &self.stack
    }

    /// Minimum-norm least-squares `g`; errors when the defect exceeds
    /// [`consistency_tolerance`].
    pub fn solve(&self, rhs: &DVector<T>) -> Result<GSolution<T>> {
        if rhs.len() != self.stack.nrows() {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, expected {}",
                rhs.len(),
                self.stack.nrows()
            )));
        }
        let g = &self.stack_pinv * rhs;
        let residual = (&self.stack * &g - rhs).norm();
        let tolerance = consistency_tolerance(rhs.norm());
        // NaN counts as inconsistent
        if !matches!(
            residual.partial_cmp(&tolerance),
            Some(Ordering::Less | Ordering::Equal)
        ) {
            return Err(Error::InconsistentTrajectory {
                step: None,
                residual: widen(residual),
                tolerance: widen(tolerance),
            });
        }
        Ok(GSolution { g, residual })
    }

    /// `U_f · g` for the solution of `rhs`, with the residual.
    pub fn recover(&self, rhs: &DVector<T>) -> Result<(DVector<T>, T)> {
        let sol = self.solve(rhs)?;
        Ok((&self.u_f * &sol.g, sol.residual))
    }
}

/// Solves `[U_p; Y_p; Y_fL]·g = [u_past; y_past; y_future]` in the
/// minimum-norm least-squares sense.
pub fn solve_g<T: Scalar>(problem: &InversionProblem<'_, T>) -> Result<GSolution<T>> {
    BankSolver::new(problem.bank).solve(&problem.rhs())
}

/// The hidden input block `u_[t0+T_p, t0+T_p+T_f-1] = U_f·g`.
pub fn recover_input<T: Scalar>(problem: &InversionProblem<'_, T>) -> Result<DVector<T>> {
    let sol = solve_g(problem)?;
    Ok(&problem.bank.u_f * &sol.g)
}

/// Checks `N([U_p; Y_p; U_f; Y_fL]) = N([U_p; Y_p; Y_fL])` numerically.
///
/// Both inclusions are tested on orthonormal null-space bases.
pub fn nullspace_equality_check<T: Scalar>(bank: &DataBank<T>) -> bool {
    let reduced = vstack(&[&bank.u_p, &bank.y_p, &bank.y_fl]);
    let full = vstack(&[&bank.u_p, &bank.y_p, &bank.u_f, &bank.y_fl]);
    let eps_sqrt = T::default_epsilon().sqrt();

    let z = null_space(&reduced);
    let forward =
        z.ncols() == 0 || (&bank.u_f * &z).amax() <= eps_sqrt * (T::one() + bank.u_f.norm());

    let z_full = null_space(&full);
    let backward = z_full.ncols() == 0
        || (&reduced * &z_full).amax() <= eps_sqrt * (T::one() + reduced.norm());

    forward && backward
}

/// Input block completing a recovered window into a full `t + L`-long
/// trajectory: `H_L(u^d_[t, T+L-1]) · g`.
///
/// `g` must have `T − t + 1` entries. Empty when `L = 0`.
pub fn complete_input_tail<T: Scalar>(
    bank: &DataBank<T>,
    g: &DVector<T>,
    t: usize,
) -> Result<DVector<T>> {
    let bp = &bank.params;
    if bp.l == 0 {
        return Ok(DVector::zeros(0));
    }
    if t > bp.t {
        return Err(Error::invalid(format!(
            "window length {t} exceeds T = {}",
            bp.t
        )));
    }
    let cols = bp.t - t + 1;
    if g.len() != cols {
        return Err(Error::invalid(format!(
            "g has length {}, expected {cols}",
            g.len()
        )));
    }
    let s = bank.u_d.start();
    let h = hankel_window(&bank.u_d, s + t as i64, s + (bp.t + bp.l) as i64 - 1, bp.l)?;
    Ok(h.data * g)
}

/// Input/output samples preceding the first estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct History<T: Scalar> {
    pub u: Signal<T>,
    pub y: Signal<T>,
}

impl<T: Scalar> History<T> {
    /// Zero windows for a plant at rest before `start`, sized for the batch
    /// estimator: `u, y` over `[start − T_p, start − 1]`.
    pub fn at_rest_batch(bank: &DataBank<T>, start: i64) -> Self {
        let tp = bank.params.t_p;
        History {
            u: Signal::zeros(start - tp as i64, bank.m(), tp),
            y: Signal::zeros(start - tp as i64, bank.p(), tp),
        }
    }

    /// Zero windows for the real-time estimator: `u` over
    /// `[start − T_p − L, start − L − 1]`, `y` over `[start − T_p − L, start − 1]`.
    pub fn at_rest_realtime(bank: &DataBank<T>, start: i64) -> Self {
        let (tp, l) = (bank.params.t_p, bank.params.l);
        let from = start - (tp + l) as i64;
        History {
            u: Signal::zeros(from, bank.m(), tp),
            y: Signal::zeros(from, bank.p(), tp + l),
        }
    }
}

/// Estimated input stream and bookkeeping from one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T: Scalar> {
    pub u_hat: Signal<T>,
    pub residual_max: T,
    pub steps: usize,
}

/// Batch estimator: consumes `y_[k, k+T_f+L-1]`, emits `û_[k, k+T_f-1]`,
/// advances `k` by `T_f`.
///
/// The first batch starts at `y_stream.start()`; the history covers the
/// `T_p` samples before it and defaults to rest. Estimated inputs feed the
/// input history of later batches.
pub fn run_algorithm1<T: Scalar>(
    bank: &DataBank<T>,
    y_stream: &Signal<T>,
    history: Option<&History<T>>,
) -> Result<Estimate<T>> {
    let bp = bank.params;
    let (m, p, tp, tf, l) = (bp.m, bp.p, bp.t_p, bp.t_f, bp.l);
    let s = y_stream.start();
    if y_stream.dim() != p {
        return Err(Error::invalid(format!(
            "output stream has dimension {}, expected {p}",
            y_stream.dim()
        )));
    }
    if y_stream.len() < tf + l {
        return Err(Error::invalid(format!(
            "output stream needs at least T_f + L = {} samples, got {}",
            tf + l,
            y_stream.len()
        )));
    }
    let rest;
    let history = match history {
        Some(h) => h,
        None => {
            rest = History::at_rest_batch(bank, s);
            &rest
        }
    };
    let hist_from = s - tp as i64;
    if history.u.len() != tp || history.y.len() != tp {
        return Err(Error::invalid(format!(
            "batch history must hold T_p = {tp} samples"
        )));
    }
    if history.u.start() != hist_from || history.y.start() != hist_from {
        return Err(Error::invalid(format!("history must start at {hist_from}")));
    }
    if history.u.dim() != m || history.y.dim() != p {
        return Err(Error::invalid(
            "history dimensions do not match the data bank",
        ));
    }

    let solver = BankSolver::new(bank);
    let batches = (y_stream.len() - l) / tf;

    // u over [s - T_p, …], grows by T_f per batch
    let mut u_all: Vec<T> = history.u.data().iter().copied().collect();
    let mut y_all: Vec<T> = history.y.data().iter().copied().collect();
    y_all.extend(y_stream.data().iter().copied());

    let mut residual_max = T::zero();
    for j in 0..batches {
        let off = j * tf; // position of k relative to s
        let u_past = DVector::from_column_slice(&u_all[off * m..(off + tp) * m]);
        let y_past = DVector::from_column_slice(&y_all[off * p..(off + tp) * p]);
        let fut_from = (off + tp) * p;
        let y_future = DVector::from_column_slice(&y_all[fut_from..fut_from + (tf + l) * p]);
        let rhs = vconcat(&[&u_past, &y_past, &y_future]);
        let k = s + off as i64;
        let (block, residual) = solver.recover(&rhs).map_err(|e| e.at_step(k))?;
        if residual > residual_max {
            residual_max = residual;
        }
        u_all.extend(block.iter().copied());
    }
    let estimated = DMatrix::from_column_slice(m, batches * tf, &u_all[tp * m..]);
    Ok(Estimate {
        u_hat: Signal::new(s, estimated),
        residual_max,
        steps: batches,
    })
}

/// Real-time estimator state: a bank with `T_f = 1` and rolling windows
/// `u_[k−T_p−L, k−L−1]`, `y_[k−T_p−L, k−1]`.
#[derive(Debug, Clone)]
pub struct InverterState<T: Scalar> {
    solver: BankSolver<T>,
    t_p: usize,
    l: usize,
    m: usize,
    p: usize,
    u_buf: VecDeque<DVector<T>>,
    y_buf: VecDeque<DVector<T>>,
    k: i64,
}

impl<T: Scalar> InverterState<T> {
    /// Starts at time `start`. `history` defaults to rest.
    pub fn new(bank: &DataBank<T>, start: i64, history: Option<&History<T>>) -> Result<Self> {
        let bp = bank.params;
        if bp.t_f != 1 {
            return Err(Error::invalid(format!(
                "real-time estimation needs a bank with T_f = 1, got {}",
                bp.t_f
            )));
        }
        let rest;
        let history = match history {
            Some(h) => h,
            None => {
                rest = History::at_rest_realtime(bank, start);
                &rest
            }
        };
        let from = start - (bp.t_p + bp.l) as i64;
        if history.u.len() != bp.t_p || history.y.len() != bp.t_p + bp.l {
            return Err(Error::invalid(format!(
                "real-time history needs {} input and {} output samples",
                bp.t_p,
                bp.t_p + bp.l
            )));
        }
        if history.u.start() != from || history.y.start() != from {
            return Err(Error::invalid(format!("history must start at {from}")));
        }
        if history.u.dim() != bp.m || history.y.dim() != bp.p {
            return Err(Error::invalid(
                "history dimensions do not match the data bank",
            ));
        }
        Ok(InverterState {
            solver: BankSolver::new(bank),
            t_p: bp.t_p,
            l: bp.l,
            m: bp.m,
            p: bp.p,
            u_buf: history.u.iter().map(|(_, v)| v.into_owned()).collect(),
            y_buf: history.y.iter().map(|(_, v)| v.into_owned()).collect(),
            k: start,
        })
    }

    /// Time index of the next output sample to be consumed.
    pub fn time(&self) -> i64 {
        self.k
    }

    pub fn delay(&self) -> usize {
        self.l
    }

    pub fn t_p(&self) -> usize {
        self.t_p
    }

    fn rhs(&self, y_k: &DVector<T>) -> DVector<T> {
        let (m, p) = (self.m, self.p);
        let mut rhs = DVector::zeros(m * self.t_p + p * (self.t_p + self.l + 1));
        let mut r = 0;
        for u in &self.u_buf {
            rhs.rows_mut(r, m).copy_from(u);
            r += m;
        }
        for y in &self.y_buf {
            rhs.rows_mut(r, p).copy_from(y);
            r += p;
        }
        rhs.rows_mut(r, p).copy_from(y_k);
        rhs
    }

    /// Estimate of `u(k − L)` given `y(k)`, without advancing the state.
    pub fn peek(&self, y_k: &DVector<T>) -> Result<(DVector<T>, T)> {
        if y_k.len() != self.p {
            return Err(Error::invalid(format!(
                "output sample has dimension {}, expected {}",
                y_k.len(),
                self.p
            )));
        }
        self.solver
            .recover(&self.rhs(y_k))
            .map_err(|e| e.at_step(self.k))
    }

    /// Consumes `y(k)` and returns `û(k) = u(k − L)`. On error the state is
    /// left untouched.
    pub fn step(&mut self, y_k: &DVector<T>) -> Result<DVector<T>> {
        self.step_with_residual(y_k).map(|(u, _)| u)
    }

    pub fn step_with_residual(&mut self, y_k: &DVector<T>) -> Result<(DVector<T>, T)> {
        let (u_hat, residual) = self.peek(y_k)?;
        self.u_buf.pop_front();
        self.u_buf.push_back(u_hat.clone());
        self.y_buf.pop_front();
        self.y_buf.push_back(y_k.clone());
        self.k += 1;
        Ok((u_hat, residual))
    }
}

/// Runs the real-time estimator over a whole stream. Sample `k` of the
/// result is `û(k) = u(k − L)`.
pub fn run_algorithm2<T: Scalar>(
    bank: &DataBank<T>,
    y_stream: &Signal<T>,
    history: Option<&History<T>>,
) -> Result<Estimate<T>> {
    let mut state = InverterState::new(bank, y_stream.start(), history)?;
    if y_stream.dim() != bank.p() {
        return Err(Error::invalid(format!(
            "output stream has dimension {}, expected {}",
            y_stream.dim(),
            bank.p()
        )));
    }
    let mut out = DMatrix::zeros(bank.m(), y_stream.len());
    let mut residual_max = T::zero();
    for (j, (_, y_k)) in y_stream.iter().enumerate() {
        let (u_hat, residual) = state.step_with_residual(&y_k.into_owned())?;
        out.set_column(j, &u_hat);
        if residual > residual_max {
            residual_max = residual;
        }
    }
    Ok(Estimate {
        u_hat: Signal::new(y_stream.start(), out),
        residual_max,
        steps: y_stream.len(),
    })
}
