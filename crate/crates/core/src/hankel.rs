//! Block-Hankel matrices, persistency of excitation and the four-block data
//! bank assembled from one experiment.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::rank;
use crate::scalar::{lit, Scalar};
use crate::signal::Signal;

/// Block-Hankel matrix `H_t(f)` with `t` block rows of height `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix<T: Scalar> {
    pub data: DMatrix<T>,
    pub block_rows: usize,
    pub block_dim: usize,
}

impl<T: Scalar> HankelMatrix<T> {
    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }
}

/// `H_t` over the whole signal: shape `q·t × (len − t + 1)`.
pub fn hankel<T: Scalar>(f: &Signal<T>, t: usize) -> Result<HankelMatrix<T>> {
    if f.is_empty() {
        return Err(Error::invalid(
            "cannot build a Hankel matrix from an empty signal",
        ));
    }
    hankel_window(f, f.start(), f.end() - 1, t)
}

/// `H_t(f_[i,j])` for absolute time indices `i ≤ j`.
pub fn hankel_window<T: Scalar>(
    f: &Signal<T>,
    i: i64,
    j: i64,
    t: usize,
) -> Result<HankelMatrix<T>> {
    if t == 0 {
        return Err(Error::invalid("Hankel depth must be positive"));
    }
    if i < f.start() || j >= f.end() || j < i {
        return Err(Error::invalid(format!(
            "window [{i}, {j}] outside signal [{}, {})",
            f.start(),
            f.end()
        )));
    }
    let len = (j - i + 1) as usize;
    if t > len {
        return Err(Error::invalid(format!(
            "Hankel depth {t} exceeds window length {len}"
        )));
    }
    let q = f.dim();
    let cols = len - t + 1;
    let mut data = DMatrix::zeros(q * t, cols);
    for c in 0..cols {
        for r in 0..t {
            let k = i + (r + c) as i64;
            data.view_mut((r * q, c), (q, 1)).copy_from(&f.at(k));
        }
    }
    Ok(HankelMatrix {
        data,
        block_rows: t,
        block_dim: q,
    })
}

/// Whether `u` is persistently exciting of the given order, i.e. `H_order(u)`
/// has full row rank. Signals shorter than `order` are not.
pub fn pe_check<T: Scalar>(u: &Signal<T>, order: usize) -> bool {
    if order == 0 || u.len() < order {
        return false;
    }
    let q = u.dim();
    // full row rank needs at least as many columns as rows
    if u.len() - order + 1 < q * order {
        return false;
    }
    match hankel(u, order) {
        Ok(h) => rank(&h.data) == q * order,
        Err(_) => false,
    }
}

/// Smallest signal length for which `H_order` can have full row rank.
pub fn min_pe_length(q: usize, order: usize) -> usize {
    ((q + 1) * order).saturating_sub(1)
}

const PE_ATTEMPTS: usize = 64;

/// Draws a length-`len` signal i.i.d. uniform on `[-1, 1]` from a seeded
/// ChaCha stream, re-drawing until it is persistently exciting of `order`.
pub fn generate_pe_input<T: Scalar>(
    q: usize,
    len: usize,
    order: usize,
    seed: u64,
) -> Result<Signal<T>> {
    if q == 0 || order == 0 {
        return Err(Error::invalid("dimension and order must be positive"));
    }
    let need = min_pe_length(q, order);
    if len < need {
        return Err(Error::invalid(format!(
            "length {len} too short for PE of order {order} with {q} channels (need >= {need})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..PE_ATTEMPTS {
        let data = DMatrix::from_fn(q, len, |_, _| lit::<T>(rng.random_range(-1.0..=1.0)));
        let u = Signal::new(0, data);
        if pe_check(&u, order) {
            return Ok(u);
        }
    }
    Err(Error::GenerationFailed {
        attempts: PE_ATTEMPTS,
    })
}

/// Window sizes that shape a [`DataBank`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankParams {
    pub t_p: usize,
    pub t_f: usize,
    pub l: usize,
    /// Data length without the `L` trailing samples.
    pub t: usize,
    pub m: usize,
    pub p: usize,
}

impl BankParams {
    /// Column count `N = T − T_p − T_f + 1` shared by all four blocks.
    pub fn columns(&self) -> usize {
        self.t + 1 - self.t_p - self.t_f
    }

    /// PE order needed for exact recovery given the state dimension.
    pub fn required_pe_order(&self, n: usize) -> usize {
        n + self.t_p + self.t_f + self.l
    }
}

/// Outcome of the persistency-of-excitation check recorded with a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeCertificate {
    pub order: usize,
    pub satisfied: bool,
}

/// The Hankel blocks `U_p, Y_p, U_f, Y_fL` and the raw data behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBank<T: Scalar> {
    pub u_p: DMatrix<T>,
    pub y_p: DMatrix<T>,
    pub u_f: DMatrix<T>,
    pub y_fl: DMatrix<T>,
    pub params: BankParams,
    pub u_d: Signal<T>,
    pub y_d: Signal<T>,
    pub state_dim: Option<usize>,
    pub pe: Option<PeCertificate>,
}

impl<T: Scalar> DataBank<T> {
    /// Assembles the bank from `T + L` samples of input and output data.
    ///
    /// When the state dimension is given, the input prefix `u^d_[0,T-1]` is
    /// checked for PE of order `n + T_p + T_f + L` and the outcome recorded.
    pub fn build(
        u_d: &Signal<T>,
        y_d: &Signal<T>,
        t_p: usize,
        t_f: usize,
        l: usize,
        state_dim: Option<usize>,
    ) -> Result<Self> {
        if t_p == 0 || t_f == 0 {
            return Err(Error::invalid("T_p and T_f must be positive"));
        }
        if u_d.len() != y_d.len() {
            return Err(Error::invalid(format!(
                "input data has {} samples, output data {}",
                u_d.len(),
                y_d.len()
            )));
        }
        if u_d.start() != y_d.start() {
            return Err(Error::invalid(
                "input and output data must share a start index",
            ));
        }
        if u_d.dim() == 0 || y_d.dim() == 0 {
            return Err(Error::invalid("data signals must have positive dimension"));
        }
        let total = u_d.len();
        if total < l + t_p + t_f {
            return Err(Error::invalid(format!(
                "{total} samples cannot hold T > T_p + T_f - 1 = {} plus L = {l}",
                t_p + t_f - 1
            )));
        }
        let t = total - l;
        let s = u_d.start();
        let at = |i: usize| s + i as i64;

        let u_p = hankel_window(u_d, at(0), at(t - t_f - 1), t_p)?.data;
        let y_p = hankel_window(y_d, at(0), at(t - t_f - 1), t_p)?.data;
        let u_f = hankel_window(u_d, at(t_p), at(t - 1), t_f)?.data;
        let y_fl = hankel_window(y_d, at(t_p), at(t + l - 1), t_f + l)?.data;

        let params = BankParams {
            t_p,
            t_f,
            l,
            t,
            m: u_d.dim(),
            p: y_d.dim(),
        };
        let pe = state_dim.map(|n| {
            let order = params.required_pe_order(n);
            let prefix = u_d.slice(at(0), at(t - 1)).expect("prefix within data");
            PeCertificate {
                order,
                satisfied: pe_check(&prefix, order),
            }
        });
        debug_assert!([&u_p, &y_p, &u_f, &y_fl]
            .iter()
            .all(|b| b.ncols() == params.columns()));
        Ok(DataBank {
            u_p,
            y_p,
            u_f,
            y_fl,
            params,
            u_d: u_d.clone(),
            y_d: y_d.clone(),
            state_dim,
            pe,
        })
    }

    /// Rebuilds from the same raw data with different window sizes.
    pub fn rebuild(&self, t_p: usize, t_f: usize, l: usize) -> Result<Self> {
        DataBank::build(&self.u_d, &self.y_d, t_p, t_f, l, self.state_dim)
    }

    pub fn columns(&self) -> usize {
        self.params.columns()
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn p(&self) -> usize {
        self.params.p
    }
}
