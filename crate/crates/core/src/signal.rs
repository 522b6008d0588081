//! Finite vector-valued time series indexed by absolute time.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Samples `f(k0), f(k0+1), …` of a `q`-dimensional signal.
///
/// Stored column-per-sample; `stacked(i, j)` gives the stacked
/// vector `f_[i,j]` with samples in increasing time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<T: Scalar> {
    start: i64,
    data: DMatrix<T>,
}

impl<T: Scalar> Signal<T> {
    /// Wraps a `q × len` matrix whose columns are consecutive samples.
    pub fn new(start: i64, data: DMatrix<T>) -> Self {
        Signal { start, data }
    }

    pub fn zeros(start: i64, dim: usize, len: usize) -> Self {
        Signal::new(start, DMatrix::zeros(dim, len))
    }

    pub fn from_samples(start: i64, dim: usize, samples: &[DVector<T>]) -> Result<Self> {
        let mut data = DMatrix::zeros(dim, samples.len());
        for (j, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::invalid(format!(
                    "sample {j} has dimension {}, expected {dim}",
                    s.len()
                )));
            }
            data.set_column(j, s);
        }
        Ok(Signal::new(start, data))
    }

    /// Builds a signal from row-major sample lists (one inner vec per time step).
    pub fn from_rows(start: i64, dim: usize, rows: &[Vec<T>]) -> Result<Self> {
        let samples: Vec<DVector<T>> = rows.iter().map(|r| DVector::from_column_slice(r)).collect();
        Signal::from_samples(start, dim, &samples)
    }

    /// Splits a stacked vector `f_[start, start+len-1]` back into samples.
    pub fn from_stacked(start: i64, dim: usize, stacked: &DVector<T>) -> Result<Self> {
        if dim == 0 || !stacked.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "stacked length {} is not a multiple of dimension {dim}",
                stacked.len()
            )));
        }
        let len = stacked.len() / dim;
        Ok(Signal::new(
            start,
            DMatrix::from_column_slice(dim, len, stacked.as_slice()),
        ))
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last time index.
    pub fn end(&self) -> i64 {
        self.start + self.len() as i64
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }

    fn offset(&self, k: i64) -> Option<usize> {
        if k < self.start || k >= self.end() {
            None
        } else {
            Some((k - self.start) as usize)
        }
    }

    pub fn contains(&self, k: i64) -> bool {
        self.offset(k).is_some()
    }

    /// Sample at absolute time `k`.
    ///
    /// # Panics
    /// If `k` lies outside the signal.
    pub fn at(&self, k: i64) -> DVectorView<'_, T> {
        let j = self
            .offset(k)
            .unwrap_or_else(|| panic!("time {k} outside [{}, {})", self.start, self.end()));
        self.data.column(j)
    }

    pub fn get(&self, k: i64) -> Option<DVector<T>> {
        self.offset(k).map(|j| self.data.column(j).into_owned())
    }

    pub fn set(&mut self, k: i64, value: &DVector<T>) {
        let j = self.offset(k).expect("time index outside signal");
        self.data.set_column(j, value);
    }

    /// `f_[from, to]`, inclusive on both ends; empty when `to < from`.
    pub fn stacked(&self, from: i64, to: i64) -> Result<DVector<T>> {
        let q = self.dim();
        if to < from {
            return Ok(DVector::zeros(0));
        }
        let (Some(i), Some(_)) = (self.offset(from), self.offset(to)) else {
            return Err(Error::invalid(format!(
                "window [{from}, {to}] outside signal [{}, {})",
                self.start,
                self.end()
            )));
        };
        let count = (to - from + 1) as usize;
        let view = self.data.columns(i, count);
        Ok(DVector::from_iterator(q * count, view.iter().copied()))
    }

    /// Sub-signal over `[from, to]` inclusive.
    pub fn slice(&self, from: i64, to: i64) -> Result<Self> {
        if to < from {
            return Ok(Signal::zeros(from, self.dim(), 0));
        }
        let (Some(i), Some(_)) = (self.offset(from), self.offset(to)) else {
            return Err(Error::invalid(format!(
                "window [{from}, {to}] outside signal [{}, {})",
                self.start,
                self.end()
            )));
        };
        let count = (to - from + 1) as usize;
        Ok(Signal::new(from, self.data.columns(i, count).into_owned()))
    }

    /// Same samples, relabelled to start at `start`.
    pub fn with_start(mut self, start: i64) -> Self {
        self.start = start;
        self
    }

    /// Iterator over `(k, f(k))`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, DVectorView<'_, T>)> + '_ {
        self.data
            .column_iter()
            .enumerate()
            .map(move |(j, c)| (self.start + j as i64, c))
    }

    /// Largest absolute elementwise difference over the common time range.
    pub fn max_abs_diff(&self, other: &Signal<T>) -> Option<T> {
        let from = self.start.max(other.start);
        let to = self.end().min(other.end());
        if from >= to || self.dim() != other.dim() {
            return None;
        }
        let mut worst = T::zero();
        for k in from..to {
            let d = (self.at(k) - other.at(k)).amax();
            if d > worst {
                worst = d;
            }
        }
        Some(worst)
    }
}
