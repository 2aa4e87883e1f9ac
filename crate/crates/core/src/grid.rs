//! Uniform periodic grids on the unit torus `[-1/2, 1/2)^d`.
//!
//! Node `j` along an axis sits at `-1/2 + j/n`. Spectral arrays use FFT
//! ordering and hold the true Fourier coefficients
//! `f̂(k) = ∫ f(x) e^{-2πi k·x} dx`, so the half-period shift of the grid
//! origin is already folded into the stored phases.

use crate::error::{Error, Result};
use crate::fft::CubeFft;
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

const MAX_POINTS: usize = 1 << 26;

/// Shape of a cubic periodic grid with `n` points per axis in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    d: usize,
    n: usize,
}

impl Grid {
    /// Validates `d >= 1`, even `n >= 4` and a total size below 2^26 points.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even and at least 4")));
        }
        let total = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
        if total > MAX_POINTS as u128 {
            return Err(Error::InvalidGrid(format!("{n}^{d} points exceed the size limit")));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Coordinate of node `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 + j as f64 / self.n as f64
    }

    /// Signed wavenumber stored at FFT index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Per-axis indices of a flat row-major index.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Flat index of a wavevector, wrapping each component into range.
    pub fn flat_index_of_mode(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        k.iter().fold(0usize, |acc, &ka| acc * self.n + ka.rem_euclid(n) as usize)
    }

    /// Position of a flat index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).into_iter().map(|j| self.coordinate(j)).collect()
    }

    /// Wavevector of a flat FFT-ordered index.
    pub fn wavevector(&self, idx: usize) -> Vec<i64> {
        self.multi_index(idx).into_iter().map(|j| self.wavenumber(j)).collect()
    }

    /// `|k|^2` for every flat index.
    pub fn k_squared(&self) -> Vec<f64> {
        let wn: Vec<f64> = (0..self.n).map(|j| self.wavenumber(j) as f64).collect();
        let mut out = vec![0.0; self.len()];
        for (idx, v) in out.iter_mut().enumerate() {
            let mut rest = idx;
            let mut s = 0.0;
            for _ in 0..self.d {
                let k = wn[rest % self.n];
                s += k * k;
                rest /= self.n;
            }
            *v = s;
        }
        out
    }

    /// Component `axis` of the wavevector for every flat index.
    pub fn k_component(&self, axis: usize) -> Vec<f64> {
        let stride = self.n.pow((self.d - 1 - axis) as u32);
        (0..self.len()).map(|idx| self.wavenumber((idx / stride) % self.n) as f64).collect()
    }

    /// Mask selecting modes with every `|k_a| <= n/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = (self.n / 3) as i64;
        (0..self.len())
            .map(|idx| self.wavevector(idx).iter().all(|k| k.abs() <= cut))
            .collect()
    }

    fn shift_sign(&self, idx: usize) -> f64 {
        let mut rest = idx;
        let mut parity = 0usize;
        for _ in 0..self.d {
            parity += rest % self.n;
            rest /= self.n;
        }
        // (-1)^{sum k} equals (-1)^{sum j} because n is even
        if parity % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub(crate) fn plan(&self) -> Arc<CubeFft> {
        static PLANS: OnceLock<Mutex<HashMap<Grid, Arc<CubeFft>>>> = OnceLock::new();
        let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("plan cache poisoned");
        guard
            .entry(*self)
            .or_insert_with(|| Arc::new(CubeFft::new(self.d, self.n)))
            .clone()
    }

    /// True Fourier coefficients of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Forward transform of complex samples into true coefficients.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.plan().forward(buf);
        let scale = 1.0 / self.len() as f64;
        for (idx, c) in buf.iter_mut().enumerate() {
            *c *= scale * self.shift_sign(idx);
        }
    }

    /// Complex samples from true coefficients.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        for (idx, c) in buf.iter_mut().enumerate() {
            *c *= self.shift_sign(idx);
        }
        self.plan().inverse(buf);
    }

    /// Real samples from true coefficients, dropping imaginary round-off.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_has_unit_coefficient() {
        let grid = Grid::new(2, 16).unwrap();
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                (2.0 * std::f64::consts::PI * (3.0 * x[0] - 2.0 * x[1])).cos()
            })
            .collect();
        let c = grid.forward(&vals);
        let i1 = grid.flat_index_of_mode(&[3, -2]);
        let i2 = grid.flat_index_of_mode(&[-3, 2]);
        assert!((c[i1].re - 0.5).abs() < 1e-14 && c[i1].im.abs() < 1e-14);
        assert!((c[i2].re - 0.5).abs() < 1e-14);
        let back = grid.inverse(&c);
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn sine_phase_matches_convention() {
        let grid = Grid::new(1, 8).unwrap();
        let vals: Vec<f64> = (0..8)
            .map(|i| (2.0 * std::f64::consts::PI * grid.point(i)[0]).sin())
            .collect();
        let c = grid.forward(&vals);
        // sin(2πx) = (e^{2πix} - e^{-2πix}) / 2i
        assert!((c[1].im + 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(0, 8).is_err());
        assert!(Grid::new(2, 7).is_err());
        assert!(Grid::new(3, 1024).is_err());
    }
}
