//! Discrete-time state-space plants, their structured matrices, the
//! rank test for L-delay invertibility and the model-based inverse used as
//! a reference for the data-driven routines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pinv, rank, vstack};
use crate::scalar::Scalar;
use crate::signal::Signal;

/// `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k) + D u(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
}

impl<T: Scalar> StateSpaceSystem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let p = c.nrows();
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::invalid("n, m and p must all be positive"));
        }
        if a.ncols() != n {
            return Err(Error::invalid(format!(
                "A is {}x{}, not square",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::invalid(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::invalid(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.shape() != (p, m) {
            return Err(Error::invalid(format!(
                "D is {}x{}, expected {p}x{m}",
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(StateSpaceSystem { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn output(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        &self.c * x + &self.d * u
    }

    pub fn next_state(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        &self.a * x + &self.b * u
    }

    /// Runs the plant from `x0` over every sample of `u`.
    ///
    /// Returns the state trajectory (one sample longer than `u`, ending with
    /// the terminal state) and the output trajectory, both starting at
    /// `u.start()`.
    pub fn simulate(&self, x0: &DVector<T>, u: &Signal<T>) -> Result<(Signal<T>, Signal<T>)> {
        if x0.len() != self.n() {
            return Err(Error::invalid(format!(
                "x0 has dimension {}, expected {}",
                x0.len(),
                self.n()
            )));
        }
        if u.dim() != self.m() {
            return Err(Error::invalid(format!(
                "input has dimension {}, expected {}",
                u.dim(),
                self.m()
            )));
        }
        if u.is_empty() {
            return Err(Error::invalid("input signal is empty"));
        }
        let len = u.len();
        let mut xs = DMatrix::zeros(self.n(), len + 1);
        let mut ys = DMatrix::zeros(self.p(), len);
        let mut x = x0.clone();
        for (j, (_, uk)) in u.iter().enumerate() {
            let uk = uk.into_owned();
            xs.set_column(j, &x);
            ys.set_column(j, &self.output(&x, &uk));
            x = self.next_state(&x, &uk);
        }
        xs.set_column(len, &x);
        Ok((Signal::new(u.start(), xs), Signal::new(u.start(), ys)))
    }

    /// Markov parameters `D, CB, CAB, …, CA^{t-1}B`.
    fn markov_parameters(&self, t: usize) -> Vec<DMatrix<T>> {
        let mut out = Vec::with_capacity(t + 1);
        out.push(self.d.clone());
        let mut ca = self.c.clone();
        for _ in 0..t {
            out.push(&ca * &self.b);
            ca = &ca * &self.a;
        }
        out
    }

    /// Block lower-triangular Toeplitz matrix `T_t` of shape
    /// `p(t+1) × m(t+1)`; `T_0 = D`.
    pub fn toeplitz_matrix(&self, t: usize) -> DMatrix<T> {
        let (m, p) = (self.m(), self.p());
        let markov = self.markov_parameters(t);
        let mut out = DMatrix::zeros(p * (t + 1), m * (t + 1));
        for i in 0..=t {
            for j in 0..=i {
                out.view_mut((i * p, j * m), (p, m))
                    .copy_from(&markov[i - j]);
            }
        }
        out
    }

    /// `O_L = [C; CA; …; CA^L]`.
    pub fn observability_matrix(&self, l: usize) -> DMatrix<T> {
        let mut blocks = Vec::with_capacity(l + 1);
        let mut ca = self.c.clone();
        for _ in 0..=l {
            let next = &ca * &self.a;
            blocks.push(ca);
            ca = next;
        }
        let refs: Vec<&DMatrix<T>> = blocks.iter().collect();
        vstack(&refs)
    }

    /// `[B, AB, …, A^{n-1}B]`.
    pub fn controllability_matrix(&self) -> DMatrix<T> {
        let (n, m) = (self.n(), self.m());
        let mut out = DMatrix::zeros(n, n * m);
        let mut ab = self.b.clone();
        for i in 0..n {
            out.view_mut((0, i * m), (n, m)).copy_from(&ab);
            ab = &self.a * &ab;
        }
        out
    }

    pub fn is_controllable(&self) -> bool {
        rank(&self.controllability_matrix()) == self.n()
    }

    pub fn is_observable(&self) -> bool {
        rank(&self.observability_matrix(self.n() - 1)) == self.n()
    }

    /// Smallest `ℓ ≥ 1` with `rank(O_{ℓ-1}) = n`.
    pub fn observability_index(&self) -> Result<usize> {
        let n = self.n();
        let mut last = 0;
        for ell in 1..=n {
            last = rank(&self.observability_matrix(ell - 1));
            if last == n {
                return Ok(ell);
            }
        }
        Err(Error::NotObservable {
            rank: last,
            states: n,
        })
    }

    /// `rank(T_l) − rank(T_{l−1})` with `rank(T_{−1}) = 0`.
    pub fn rank_gain(&self, l: usize) -> usize {
        let hi = rank(&self.toeplitz_matrix(l));
        let lo = if l == 0 {
            0
        } else {
            rank(&self.toeplitz_matrix(l - 1))
        };
        hi.saturating_sub(lo)
    }

    fn require_tall(&self) -> Result<()> {
        if self.m() > self.p() {
            return Err(Error::UnsupportedSystem {
                inputs: self.m(),
                outputs: self.p(),
            });
        }
        Ok(())
    }

    /// Whether an `l`-delay inverse exists.
    pub fn has_delay_inverse(&self, l: usize) -> Result<bool> {
        self.require_tall()?;
        Ok(self.rank_gain(l) == self.m())
    }

    /// Least `L ∈ [0, l_max]` passing the rank test, or `None`.
    ///
    /// `l_max` defaults to the state dimension.
    pub fn inherent_delay(&self, l_max: Option<usize>) -> Result<Option<usize>> {
        self.require_tall()?;
        let l_max = l_max.unwrap_or(self.n());
        let m = self.m();
        let mut prev = 0;
        for l in 0..=l_max {
            let r = rank(&self.toeplitz_matrix(l));
            if r.saturating_sub(prev) == m {
                return Ok(Some(l));
            }
            prev = r;
        }
        Ok(None)
    }

    /// Model-based `l`-delay inverse built from the minimum-norm solution
    /// of `K · T_l = [I_m, 0]`.
    pub fn build_model_inverse(&self, l: usize) -> Result<InverseRealization<T>> {
        self.require_tall()?;
        let gain = self.rank_gain(l);
        if gain != self.m() {
            return Err(Error::NoInverse {
                delay: l,
                rank_gain: gain,
                inputs: self.m(),
            });
        }
        let (m, p) = (self.m(), self.p());
        let tl = self.toeplitz_matrix(l);
        let target = selector::<T>(m, m * (l + 1));
        let k = &target * pinv(&tl);
        let residual = (&k * &tl - &target).norm();
        let bound = T::default_epsilon().sqrt() * (T::one() + tl.norm());
        if residual > bound {
            return Err(Error::NoInverse {
                delay: l,
                rank_gain: gain,
                inputs: m,
            });
        }
        let ol = self.observability_matrix(l);
        let k_ol = &k * &ol;
        debug_assert_eq!(k.shape(), (m, p * (l + 1)));
        Ok(InverseRealization {
            a_tilde: &self.a - &self.b * &k_ol,
            b_tilde: &self.b * &k,
            c_tilde: -k_ol,
            d_tilde: k.clone(),
            delay: l,
            k,
            annihilator_residual: residual,
        })
    }
}

/// `[I_m, 0_{m×(cols−m)}]`.
fn selector<T: Scalar>(m: usize, cols: usize) -> DMatrix<T> {
    let mut s = DMatrix::zeros(m, cols);
    s.view_mut((0, 0), (m, m)).fill_with_identity();
    s
}

/// State-space realization of the `L`-delay inverse driven by the output
/// window `y_[k, k+L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseRealization<T: Scalar> {
    pub a_tilde: DMatrix<T>,
    pub b_tilde: DMatrix<T>,
    pub c_tilde: DMatrix<T>,
    pub d_tilde: DMatrix<T>,
    pub delay: usize,
    pub k: DMatrix<T>,
    /// `‖K·T_L − [I_m, 0]‖_F` at construction.
    pub annihilator_residual: T,
}

impl<T: Scalar> InverseRealization<T> {
    pub fn n(&self) -> usize {
        self.a_tilde.nrows()
    }

    pub fn m(&self) -> usize {
        self.c_tilde.nrows()
    }

    pub fn p(&self) -> usize {
        self.k.ncols() / (self.delay + 1)
    }

    /// Reconstructs `û(k)` for every `k` with a full window `y_[k, k+L]`.
    ///
    /// The result starts at `y.start()` and has `len(y) − L` samples.
    pub fn simulate(&self, x0: &DVector<T>, y: &Signal<T>) -> Result<Signal<T>> {
        let l = self.delay;
        if x0.len() != self.n() {
            return Err(Error::invalid(format!(
                "x0 has dimension {}, expected {}",
                x0.len(),
                self.n()
            )));
        }
        if y.dim() != self.p() {
            return Err(Error::invalid(format!(
                "output has dimension {}, expected {}",
                y.dim(),
                self.p()
            )));
        }
        if y.len() < l + 1 {
            return Err(Error::invalid(format!(
                "need at least {} output samples, got {}",
                l + 1,
                y.len()
            )));
        }
        let count = y.len() - l;
        let mut out = DMatrix::zeros(self.m(), count);
        let mut x = x0.clone();
        for j in 0..count {
            let k = y.start() + j as i64;
            let window = y.stacked(k, k + l as i64)?;
            out.set_column(j, &(&self.c_tilde * &x + &self.d_tilde * &window));
            x = &self.a_tilde * &x + &self.b_tilde * &window;
        }
        Ok(Signal::new(y.start(), out))
    }
}
