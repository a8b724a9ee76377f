//! Multi-dimensional DFT on a periodic grid, applied axis by axis.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::Torus;

/// FFT workspace for one torus shape. Not shareable across threads; each
/// replica owns its own.
pub struct Spectral {
    torus: Torus,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// Signed wavenumber along each axis, per site, stored axis-major.
    wavenumbers: Vec<i64>,
}

impl Spectral {
    pub fn new(torus: Torus) -> Self {
        let n = torus.side();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let d = torus.dim();
        let sites = torus.sites();
        let mut wavenumbers = vec![0i64; d * sites];
        for s in 0..sites {
            for (j, c) in torus.coords(s).into_iter().enumerate() {
                wavenumbers[j * sites + s] = signed_wavenumber(c, n);
            }
        }
        Self {
            torus,
            forward,
            inverse,
            line: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
            wavenumbers,
        }
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    /// Signed wavenumbers of axis `j` for every site of the spectral array.
    #[inline]
    pub fn axis_wavenumbers(&self, j: usize) -> &[i64] {
        let s = self.torus.sites();
        &self.wavenumbers[j * s..(j + 1) * s]
    }

    /// `|k|^2` at spectral index `site`.
    pub fn mode_norm_sq(&self, site: usize) -> f64 {
        (0..self.torus.dim())
            .map(|j| {
                let k = self.axis_wavenumbers(j)[site] as f64;
                k * k
            })
            .sum()
    }

    /// Unnormalized forward transform in place: `X_k = sum_x x_x e^{-2 pi i k.x/n}`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Unnormalized inverse transform in place: `x_x = sum_k X_k e^{2 pi i k.x/n}`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn forward_real(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform scaled by `1/n^d`, keeping real parts.
    pub fn inverse_real_into(&mut self, spectrum: &mut [Complex64], out: &mut [f64]) {
        self.inverse(spectrum);
        let scale = 1.0 / self.torus.sites() as f64;
        for (o, c) in out.iter_mut().zip(spectrum.iter()) {
            *o = c.re * scale;
        }
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.torus.sites());
        let plan = if forward { &self.forward } else { &self.inverse };
        let n = self.torus.side();
        let d = self.torus.dim();
        if d == 1 {
            plan.process_with_scratch(data, &mut self.scratch);
            return;
        }
        for axis in 0..d {
            let stride = self.torus.stride(axis);
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (i, slot) in self.line.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (i, v) in self.line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Maps DFT index `c` in `0..n` to the signed wavenumber in `(-n/2, n/2]`.
#[inline]
pub fn signed_wavenumber(c: usize, n: usize) -> i64 {
    if c <= n / 2 {
        c as i64
    } else {
        c as i64 - n as i64
    }
}

/// Spectral index of a signed wavenumber vector on an `n^d` grid.
pub fn spectral_index(torus: &Torus, k: &[i64]) -> usize {
    torus.site_index(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip_2d() {
        let t = Torus::new(2, 6).unwrap();
        let mut sp = Spectral::new(t);
        let vals: Vec<f64> = (0..t.sites()).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let mut spec = sp.forward_real(&vals);
        let mut back = vec![0.0; vals.len()];
        sp.inverse_real_into(&mut spec, &mut back);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_on_its_index() {
        let t = Torus::new(2, 8).unwrap();
        let mut sp = Spectral::new(t);
        // cos(2 pi (x1 + 2 x2)) has weight n^d / 2 at k = +-(1, 2)
        let vals: Vec<f64> = (0..t.sites())
            .map(|s| {
                let x = t.point(s);
                (2.0 * std::f64::consts::PI * (x[0] + 2.0 * x[1])).cos()
            })
            .collect();
        let spec = sp.forward_real(&vals);
        let half = t.sites() as f64 / 2.0;
        assert!((spec[spectral_index(&t, &[1, 2])].re - half).abs() < 1e-9);
        assert!((spec[spectral_index(&t, &[-1, -2])].re - half).abs() < 1e-9);
        assert!(spec[spectral_index(&t, &[1, -2])].norm() < 1e-9);
    }

    #[test]
    fn wavenumbers_are_signed() {
        assert_eq!(signed_wavenumber(0, 8), 0);
        assert_eq!(signed_wavenumber(4, 8), 4);
        assert_eq!(signed_wavenumber(5, 8), -3);
        assert_eq!(signed_wavenumber(2, 5), 2);
        assert_eq!(signed_wavenumber(3, 5), -2);
    }
}
