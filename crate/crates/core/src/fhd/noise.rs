//! Spatially correlated noise `W_delta = sum_k f_{delta,k} B^k` built from
//! Fourier modes damped by a Gaussian multiplier `theta(2 pi delta |k|)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{GridField, Torus};
use crate::spectral::{spectral_index, Spectral};

/// Modes whose multiplier falls below this are dropped.
pub const MODE_CUTOFF: f64 = 1e-8;

/// Gaussian mollifier multiplier `exp(-r^2 / 2)`.
#[inline]
pub fn theta(r: f64) -> f64 {
    (-0.5 * r * r).exp()
}

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    k: Vec<i64>,
    theta: f64,
}

/// Mode set and derived constants of the correlated noise.
///
/// Modes are kept in half-space form: `k = 0` plus one representative of each
/// pair `+-k`. Each pair carries two real Gaussian degrees of freedom per
/// noise component so that the realized field is real.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    delta: f64,
    d: usize,
    zero_theta: f64,
    pairs: Vec<Mode>,
    f1: f64,
    f3: f64,
}

impl NoiseSpec {
    pub fn new(delta: f64, d: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("correlation length must be positive, got {delta}")));
        }
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        // theta(r) >= cutoff  <=>  r <= sqrt(-2 ln cutoff)
        let r_max = (-2.0 * MODE_CUTOFF.ln()).sqrt();
        let k_max = (r_max / (2.0 * PI * delta)).floor() as i64;
        let mut pairs = Vec::new();
        let mut f1 = 1.0;
        let mut f3 = 0.0;
        let side = (2 * k_max + 1) as usize;
        let box_torus_sites = side.pow(d as u32);
        for idx in 0..box_torus_sites {
            let mut rest = idx;
            let mut k = vec![0i64; d];
            for slot in k.iter_mut().rev() {
                *slot = (rest % side) as i64 - k_max;
                rest /= side;
            }
            let first = k.iter().copied().find(|&c| c != 0);
            if !matches!(first, Some(c) if c > 0) {
                continue;
            }
            let norm_sq: f64 = k.iter().map(|&c| (c * c) as f64).sum();
            let th = theta(2.0 * PI * delta * norm_sq.sqrt());
            if th < MODE_CUTOFF {
                continue;
            }
            // the pair contributes +k and -k
            f1 += 2.0 * th * th;
            f3 += 2.0 * 4.0 * PI * PI * norm_sq * th * th;
            pairs.push(Mode { k, theta: th });
        }
        Ok(Self {
            delta,
            d,
            zero_theta: 1.0,
            pairs,
            f1,
            f3,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `F1 = sum_k theta_k^2`, the pointwise variance rate of each component.
    pub fn f1(&self) -> f64 {
        self.f1
    }

    /// `F3 = sum_k (2 pi |k|)^2 theta_k^2`.
    pub fn f3(&self) -> f64 {
        self.f3
    }

    /// Number of `+-k` pairs retained (excluding `k = 0`).
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Largest absolute mode component retained.
    pub fn max_mode(&self) -> usize {
        self.pairs
            .iter()
            .flat_map(|m| m.k.iter())
            .map(|c| c.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Smallest grid per axis that passes the aliasing guard.
    pub fn min_grid(&self) -> usize {
        (4 * self.max_mode()).max(2)
    }

    /// Default grid `max(4 * cutoff, 64)`.
    pub fn default_grid(&self) -> usize {
        (4 * self.max_mode()).max(64)
    }

    /// Real Gaussian degrees of freedom per increment.
    pub fn dof(&self) -> usize {
        self.d * (1 + 2 * self.pairs.len())
    }

    /// Multiplier `theta(2 pi delta |k|)` for an arbitrary wave vector, zero if
    /// the mode is not retained.
    pub fn multiplier(&self, k: &[i64]) -> f64 {
        if k.iter().all(|&c| c == 0) {
            return self.zero_theta;
        }
        let norm_sq: f64 = k.iter().map(|&c| (c * c) as f64).sum();
        let th = theta(2.0 * PI * self.delta * norm_sq.sqrt());
        if th < MODE_CUTOFF {
            0.0
        } else {
            th
        }
    }

    /// `sum_k |f_k(x)|^2` evaluated in the real basis
    /// `{1, sqrt2 cos(2 pi k.x), sqrt2 sin(2 pi k.x)}`.
    pub fn pointwise_variance(&self, x: &[f64]) -> f64 {
        let mut total = self.zero_theta * self.zero_theta;
        for m in &self.pairs {
            let ph = 2.0 * PI * m.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>();
            let c = 2f64.sqrt() * m.theta * ph.cos();
            let s = 2f64.sqrt() * m.theta * ph.sin();
            total += c * c + s * s;
        }
        total
    }

    /// `sum_k f_k(x) f_k(y)` per unit time, per component.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut total = self.zero_theta * self.zero_theta;
        for m in &self.pairs {
            let ph = 2.0 * PI * m.k.iter().zip(x.iter().zip(y)).map(|(&k, (a, b))| k as f64 * (a - b)).sum::<f64>();
            total += 2.0 * m.theta * m.theta * ph.cos();
        }
        total
    }

    /// Rejects grids too coarse for the retained modes.
    pub fn check_grid(&self, m: usize) -> Result<()> {
        if m < self.min_grid() {
            return Err(Error::InvalidArgument(format!(
                "grid {m} is below 4 x largest noise mode ({}); increase grid_m or delta",
                self.max_mode()
            )));
        }
        Ok(())
    }

    /// Writes the spectrum of component `j` of `sqrt(dt) sum_k f_k xi_k` into
    /// `out` (unnormalized inverse-DFT convention).
    pub(crate) fn fill_spectrum(&self, torus: &Torus, xi: &[f64], j: usize, dt: f64, out: &mut [Complex64]) {
        let per = 1 + 2 * self.pairs.len();
        let xi = &xi[j * per..(j + 1) * per];
        for c in out.iter_mut() {
            *c = Complex64::default();
        }
        let s = dt.sqrt();
        out[0] = Complex64::new(self.zero_theta * xi[0] * s, 0.0);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for (p, m) in self.pairs.iter().enumerate() {
            let a = xi[1 + 2 * p];
            let b = xi[2 + 2 * p];
            let c = Complex64::new(a, b) * (m.theta * s * inv_sqrt2);
            let neg: Vec<i64> = m.k.iter().map(|v| -v).collect();
            out[spectral_index(torus, &m.k)] = c;
            out[spectral_index(torus, &neg)] = c.conj();
        }
    }
}

/// Standard Gaussian coefficients for one increment.
pub fn draw_coefficients<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> Vec<f64> {
    (0..spec.dof()).map(|_| rng.sample(StandardNormal)).collect()
}

/// Realizes `Delta W_delta` on an `m^d` grid from given Gaussian coefficients.
pub fn noise_from_coefficients(spec: &NoiseSpec, xi: &[f64], dt: f64, m: usize) -> Result<GridField> {
    spec.check_grid(m)?;
    if xi.len() != spec.dof() {
        return Err(Error::InvalidArgument(format!(
            "expected {} noise coefficients, got {}",
            spec.dof(),
            xi.len()
        )));
    }
    let torus = Torus::new(spec.dim(), m)?;
    let mut sp = Spectral::new(torus);
    let sites = torus.sites();
    let mut values = vec![0.0; spec.dim() * sites];
    let mut buf = vec![Complex64::default(); sites];
    for j in 0..spec.dim() {
        spec.fill_spectrum(&torus, xi, j, dt, &mut buf);
        sp.inverse(&mut buf);
        for (v, c) in values[j * sites..(j + 1) * sites].iter_mut().zip(&buf) {
            *v = c.re;
        }
    }
    GridField::new(torus, spec.dim(), values)
}

/// Samples one increment `Delta W_delta` over time `dt` on an `m^d` grid.
pub fn make_noise_increment<R: Rng + ?Sized>(spec: &NoiseSpec, dt: f64, m: usize, rng: &mut R) -> Result<GridField> {
    if dt < 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be >= 0, got {dt}")));
    }
    let xi = draw_coefficients(spec, rng);
    noise_from_coefficients(spec, &xi, dt, m)
}
