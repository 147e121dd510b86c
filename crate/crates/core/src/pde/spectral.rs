//! Periodic grid and Fourier operators.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::PdeError;

/// Uniform periodic grid `x_j = j L / N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self, PdeError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(PdeError::Config(format!("domain length must be positive, got {length}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(PdeError::Config(format!("N must be a power of two >= 16, got {n}")));
        }
        Ok(Self { length, n })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed mode index of FFT slot `j`.
    pub fn mode(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Trapezoid rule on the periodic grid.
    pub fn integrate(&self, values: impl Iterator<Item = f64>) -> f64 {
        values.sum::<f64>() * self.dx()
    }
}

/// Transforms and diagonal operators for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Wavenumbers for odd derivatives (Nyquist mode zeroed).
    ik: Vec<f64>,
    /// `1 / (1 + k^2)` with the Nyquist wavenumber kept.
    helmholtz: Vec<f64>,
    /// 2/3-rule keep mask.
    mask: Vec<bool>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let base = 2.0 * std::f64::consts::PI / grid.length;
        let mut ik = Vec::with_capacity(grid.n);
        let mut helmholtz = Vec::with_capacity(grid.n);
        let mut mask = Vec::with_capacity(grid.n);
        for j in 0..grid.n {
            let mode = grid.mode(j);
            let k = base * mode as f64;
            ik.push(if 2 * j == grid.n { 0.0 } else { k });
            helmholtz.push(1.0 / (1.0 + k * k));
            mask.push(3 * mode.unsigned_abs() < grid.n as u64);
        }
        Self {
            grid,
            fwd,
            inv,
            ik,
            helmholtz,
            mask,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn forward(&self, v: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = v.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// Inverse transform of a spectrum, normalized.
    pub fn inverse_complex(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        self.inv.process(&mut spec);
        let scale = 1.0 / self.grid.n as f64;
        spec.iter_mut().for_each(|z| *z *= scale);
        spec
    }

    pub fn inverse_real(&self, spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse_complex(spec).into_iter().map(|z| z.re).collect()
    }

    /// `u` and `u_x` from `m = u - u_xx`. Both are recovered with a single
    /// inverse transform of `u_hat + i (ik u_hat)`.
    pub fn helmholtz(&self, m: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut spec = self.forward(m);
        for (j, z) in spec.iter_mut().enumerate() {
            let uhat = *z * self.helmholtz[j];
            let uxhat = Complex64::new(0.0, self.ik[j]) * uhat;
            *z = uhat + Complex64::new(0.0, 1.0) * uxhat;
        }
        let packed = self.inverse_complex(spec);
        packed.iter().map(|z| (z.re, z.im)).unzip()
    }

    /// `m = u - u_xx`.
    pub fn m_from_u(&self, u: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(u);
        for (j, z) in spec.iter_mut().enumerate() {
            *z /= self.helmholtz[j];
        }
        self.inverse_real(spec)
    }

    pub fn derivative(&self, v: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(v);
        for (j, z) in spec.iter_mut().enumerate() {
            *z *= Complex64::new(0.0, self.ik[j]);
        }
        self.inverse_real(spec)
    }

    /// Remove the modes discarded by the 2/3 rule.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(v);
        self.filter(&mut spec);
        self.inverse_real(spec)
    }

    pub fn filter(&self, spec: &mut [Complex64]) {
        for (z, keep) in spec.iter_mut().zip(&self.mask) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `-F(a) - ik F(b)` back in physical space, optionally filtered. This is
    /// `-a - D_x b` for nodal products `a = f m`, `b = g m`.
    pub fn minus_a_minus_dx_b(&self, a: &[f64], b: &[f64], dealias: bool) -> Vec<f64> {
        // pack both real signals in one complex transform
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| Complex64::new(*x, *y)).collect();
        self.fwd.process(&mut buf);
        let n = self.grid.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let zj = buf[j];
            let zc = buf[(n - j) % n].conj();
            let ahat = (zj + zc) * 0.5;
            let bhat = (zj - zc) * Complex64::new(0.0, -0.5);
            out[j] = -ahat - Complex64::new(0.0, self.ik[j]) * bhat;
        }
        if dealias {
            self.filter(&mut out);
        }
        self.inverse_real(out)
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI / self.grid.length * self.grid.mode(j) as f64
    }
}
