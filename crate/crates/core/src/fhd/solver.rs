//! Semi-implicit Euler-Maruyama stepping of
//! `d rho = 1/2 Lap rho dt - sqrt(eps) div(sigma_n(rho) dW) + eps/2 F1 div(sigma_n'(rho)^2 grad rho) dt`.
//!
//! Divergence terms are formed in physical space and differentiated
//! spectrally; the Laplacian is treated implicitly by the multiplier
//! `1 / (1 + 1/2 (2 pi |k|)^2 dt)`.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;

use super::noise::{draw_coefficients, NoiseSpec};
use super::sigma::{SigmaKind, SigmaReg};
use crate::error::{Error, Result};
use crate::lattice::{GridField, Torus, TrigExpr};
use crate::spectral::Spectral;

/// Upper limit on the step regardless of the noise strength.
pub const DT_CAP: f64 = 1e-3;

/// `min(0.1 delta^2 / (eps F3 max|sigma'|^2 d), 1e-3)`.
pub fn stability_dt(eps: f64, noise: &NoiseSpec, sigma: &SigmaReg) -> f64 {
    let denom = eps * noise.f3() * sigma.max_abs_deriv().powi(2) * noise.dim() as f64;
    if denom > 0.0 {
        (0.1 * noise.delta().powi(2) / denom).min(DT_CAP)
    } else {
        DT_CAP
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdeParams {
    torus: Torus,
    eps: f64,
    noise: NoiseSpec,
    sigma: SigmaReg,
    dt_max: f64,
}

impl SpdeParams {
    /// Builds parameters on an `m^d` grid (`None` picks the default grid) with
    /// the step bound from [`stability_dt`].
    pub fn new(m: Option<usize>, eps: f64, noise: NoiseSpec, sigma: SigmaReg) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
        }
        let m = m.unwrap_or_else(|| noise.default_grid());
        noise.check_grid(m)?;
        let torus = Torus::new(noise.dim(), m)?;
        let dt_max = stability_dt(eps, &noise, &sigma);
        Ok(Self {
            torus,
            eps,
            noise,
            sigma,
            dt_max,
        })
    }

    /// Tightens the step bound. Values above the stability bound are rejected.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "dt {dt} must lie in (0, {}]",
                self.dt_max
            )));
        }
        self.dt_max = dt;
        Ok(self)
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn sigma(&self) -> &SigmaReg {
        &self.sigma
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }
}

pub struct SpdeState {
    params: SpdeParams,
    spectral: Spectral,
    rho: Vec<f64>,
    time: f64,
    steps: u64,
    negative_points: u64,
    /// `2 pi k_j`, zeroed where a derivative would hit the Nyquist mode.
    deriv: Vec<Vec<f64>>,
    keep: Vec<bool>,
    lap: Vec<f64>,
    rho_hat: Vec<Complex64>,
    acc: Vec<Complex64>,
    buf: Vec<Complex64>,
    grad: Vec<Vec<f64>>,
    sig: Vec<f64>,
    corr: Vec<f64>,
}

impl SpdeState {
    pub fn new(params: SpdeParams, rho0: &TrigExpr) -> Result<Self> {
        rho0.check_dim(params.torus.dim())?;
        let field = GridField::sample(params.torus, rho0);
        Self::from_field(params, field)
    }

    pub fn from_field(params: SpdeParams, field: GridField) -> Result<Self> {
        let torus = params.torus;
        if field.torus() != torus || field.components() != 1 {
            return Err(Error::InvalidArgument("initial field does not match the solver grid".into()));
        }
        let spectral = Spectral::new(torus);
        let d = torus.dim();
        let m = torus.side() as i64;
        let sites = torus.sites();
        let mut deriv = vec![vec![0.0; sites]; d];
        let mut keep = vec![true; sites];
        let mut lap = vec![0.0; sites];
        for (j, dj) in deriv.iter_mut().enumerate() {
            for (s, k) in spectral.axis_wavenumbers(j).iter().enumerate() {
                if 2 * k.abs() < m {
                    dj[s] = 2.0 * PI * *k as f64;
                }
                if 3 * k.abs() > m {
                    keep[s] = false;
                }
                lap[s] += (2.0 * PI * *k as f64).powi(2);
            }
        }
        Ok(Self {
            spectral,
            rho: field.into_values(),
            time: 0.0,
            steps: 0,
            negative_points: 0,
            deriv,
            keep,
            lap,
            rho_hat: vec![Complex64::default(); sites],
            acc: vec![Complex64::default(); sites],
            buf: vec![Complex64::default(); sites],
            grad: vec![vec![0.0; sites]; d],
            sig: vec![0.0; sites],
            corr: vec![0.0; sites],
            params,
        })
    }

    pub fn params(&self) -> &SpdeParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn field(&self) -> GridField {
        GridField::scalar(self.params.torus, self.rho.clone()).expect("state stays finite")
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    /// `M^{-d} sum_x rho(x) phi(x)` against a test function sampled on the grid.
    pub fn pairing(&self, phi_grid: &[f64]) -> f64 {
        assert_eq!(phi_grid.len(), self.rho.len());
        self.rho.iter().zip(phi_grid).map(|(r, p)| r * p).sum::<f64>() / self.rho.len() as f64
    }

    /// Fraction of visited grid points with `rho < 0`, over all steps taken.
    pub fn violation_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.negative_points as f64 / (self.steps as f64 * self.rho.len() as f64)
        }
    }

    /// One step of length `dt` with freshly drawn noise.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<()> {
        let xi = draw_coefficients(&self.params.noise, rng);
        self.step_with_noise(dt, &xi)
    }

    /// One step driven by the given standard Gaussian noise coefficients
    /// (layout as [`draw_coefficients`]).
    pub fn step_with_noise(&mut self, dt: f64, xi: &[f64]) -> Result<()> {
        let p = &self.params;
        if !(dt > 0.0) || dt > p.dt_max * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!("dt {dt} outside (0, {}]", p.dt_max)));
        }
        if xi.len() != p.noise.dof() {
            return Err(Error::InvalidArgument(format!(
                "expected {} noise coefficients, got {}",
                p.noise.dof(),
                xi.len()
            )));
        }
        let d = p.torus.dim();
        let sites = p.torus.sites();
        let scale = 1.0 / sites as f64;

        self.negative_points += self.rho.iter().filter(|&&r| r < 0.0).count() as u64;

        for (c, &v) in self.rho_hat.iter_mut().zip(&self.rho) {
            *c = Complex64::new(v, 0.0);
        }
        self.spectral.forward(&mut self.rho_hat);
        self.acc.copy_from_slice(&self.rho_hat);

        if p.eps > 0.0 {
            for j in 0..d {
                for ((b, r), &k) in self.buf.iter_mut().zip(&self.rho_hat).zip(&self.deriv[j]) {
                    *b = r * Complex64::new(0.0, k);
                }
                self.spectral.inverse(&mut self.buf);
                for (g, b) in self.grad[j].iter_mut().zip(&self.buf) {
                    *g = b.re * scale;
                }
            }
            let ito = 0.5 * p.eps * p.noise.f1() * dt;
            for ((s, c), &r) in self.sig.iter_mut().zip(self.corr.iter_mut()).zip(&self.rho) {
                let (v, dv) = p.sigma.eval(r);
                *s = v;
                *c = ito * dv * dv;
            }
            let root_eps = p.eps.sqrt();
            for j in 0..d {
                p.noise.fill_spectrum(&p.torus, xi, j, dt, &mut self.buf);
                self.spectral.inverse(&mut self.buf);
                for (s, b) in self.buf.iter_mut().enumerate() {
                    let flux = -root_eps * self.sig[s] * b.re + self.corr[s] * self.grad[j][s];
                    *b = Complex64::new(flux, 0.0);
                }
                self.spectral.forward(&mut self.buf);
                for s in 0..sites {
                    if self.keep[s] {
                        self.acc[s] += self.buf[s] * Complex64::new(0.0, self.deriv[j][s]);
                    }
                }
            }
        }

        for (a, &l) in self.acc.iter_mut().zip(&self.lap) {
            *a /= 1.0 + 0.5 * l * dt;
        }
        self.spectral.inverse(&mut self.acc);
        let time = self.time + dt;
        for (r, a) in self.rho.iter_mut().zip(&self.acc) {
            *r = a.re * scale;
        }
        if self.rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time });
        }
        self.time = time;
        self.steps += 1;
        Ok(())
    }

    /// Advances to `target` in equal steps no longer than the step bound.
    pub fn advance_to<R: Rng + ?Sized>(&mut self, target: f64, rng: &mut R) -> Result<()> {
        let span = target - self.time;
        if span < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "cannot step back from t = {} to {target}",
                self.time
            )));
        }
        if span == 0.0 {
            return Ok(());
        }
        let n = (span / self.params.dt_max * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let dt = span / n as f64;
        for _ in 0..n {
            self.step(dt, rng)?;
        }
        self.time = target;
        Ok(())
    }
}

/// `eps^{-1/2} (M^{-d} sum rho phi - <rho_bar, phi>)`.
pub fn spde_fluctuation(state: &SpdeState, phi: &TrigExpr, rho_bar: &TrigExpr) -> Result<f64> {
    let eps = state.params.eps;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("fluctuation field needs eps > 0".into()));
    }
    let phi_grid = GridField::sample(state.params.torus, phi);
    Ok((state.pairing(phi_grid.values()) - rho_bar.inner(phi)) / eps.sqrt())
}

/// Snapshots of a weakly regularized `sigma = sqrt(rho)` run.
#[derive(Debug, Clone)]
pub struct DkRun {
    pub times: Vec<f64>,
    pub fields: Vec<GridField>,
    /// Fraction of grid points with `rho < 0` seen before each step.
    pub violation_fraction: f64,
}

/// Runs the square-root noise model from `rho0`, which must be bounded away
/// from zero, recording the field at each of `times` (nondecreasing).
pub fn dk_truncated_run<R: Rng + ?Sized>(
    params: SpdeParams,
    rho0: &TrigExpr,
    times: &[f64],
    rng: &mut R,
) -> Result<DkRun> {
    if params.sigma.kind() != SigmaKind::Dk {
        return Err(Error::InvalidArgument("dk run needs the square-root noise kind".into()));
    }
    let d = params.torus.dim();
    rho0.check_dim(d)?;
    let (lo, _) = rho0.range_bound();
    if !(lo > 0.0 || rho0.sampled_min(d) > 0.0) {
        return Err(Error::Domain("initial density must be bounded away from 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("observation times must be nondecreasing and >= 0".into()));
    }
    let mut state = SpdeState::new(params, rho0)?;
    let mut fields = Vec::with_capacity(times.len());
    for &t in times {
        state.advance_to(t, rng)?;
        fields.push(state.field());
    }
    Ok(DkRun {
        times: times.to_vec(),
        fields,
        violation_fraction: state.violation_fraction(),
    })
}
