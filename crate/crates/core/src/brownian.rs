//! Independent Brownian particles on the unit torus.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::TrigExpr;

/// Increment variance convention per unit time.
///
/// `Dt` (generator `1/2 Delta`) is the default; `TwoDt` gives generator `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BmVariance {
    #[default]
    Dt,
    TwoDt,
}

impl BmVariance {
    pub fn factor(self) -> f64 {
        match self {
            BmVariance::Dt => 1.0,
            BmVariance::TwoDt => 2.0,
        }
    }

    /// Coefficient `D` of the mean-field equation `d_t rho = D Delta rho`.
    pub fn diffusivity(self) -> f64 {
        0.5 * self.factor()
    }

    pub fn name(self) -> &'static str {
        match self {
            BmVariance::Dt => "dt",
            BmVariance::TwoDt => "2dt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dt" => Some(BmVariance::Dt),
            "2dt" => Some(BmVariance::TwoDt),
            _ => None,
        }
    }
}

/// Particle positions, stored wrapped into `[0, 1)^d`, particle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    d: usize,
    positions: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(d: usize, positions: Vec<f64>) -> Result<Self> {
        if d == 0 || !positions.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates cannot form particles in dimension {d}",
                positions.len()
            )));
        }
        let positions = positions.into_iter().map(wrap_unit).collect();
        Ok(Self { d, positions })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.d)
    }
}

#[inline]
fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid of a tiny negative rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Checks that `rho0` is a probability density: unit mass, nonnegative.
pub fn check_density(rho0: &TrigExpr, d: usize) -> Result<()> {
    rho0.check_dim(d)?;
    let mass = rho0.mean();
    if (mass - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("density integrates to {mass}, expected 1")));
    }
    let (lo, _) = rho0.range_bound();
    if lo < 0.0 && rho0.sampled_min(d) < 0.0 {
        return Err(Error::Domain("density takes negative values".into()));
    }
    Ok(())
}

/// Draws `count` i.i.d. positions with density `rho0` by rejection against
/// the uniform envelope `max rho0 <= c + sum |a|`.
pub fn sample_initial_particles<R: Rng + ?Sized>(
    count: usize,
    d: usize,
    rho0: &TrigExpr,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    check_density(rho0, d)?;
    let (_, envelope) = rho0.range_bound();
    let uniform = rho0.terms().iter().all(|t| t.is_constant());
    let mut positions = Vec::with_capacity(count * d);
    let mut x = vec![0.0; d];
    for _ in 0..count {
        loop {
            for xi in x.iter_mut() {
                *xi = rng.random::<f64>();
            }
            if uniform || rng.random::<f64>() * envelope < rho0.eval(&x) {
                break;
            }
        }
        positions.extend_from_slice(&x);
    }
    Ok(ParticleEnsemble { d, positions })
}

/// Adds independent Gaussian increments of variance `factor * dt` to every
/// coordinate and wraps back into the unit torus. Exact in law.
pub fn advance_particles<R: Rng + ?Sized>(
    ens: &mut ParticleEnsemble,
    dt: f64,
    variance: BmVariance,
    rng: &mut R,
) {
    assert!(dt >= 0.0, "advance needs dt >= 0, got {dt}");
    if dt == 0.0 {
        return;
    }
    let scale = (variance.factor() * dt).sqrt();
    for x in &mut ens.positions {
        let z: f64 = rng.sample(StandardNormal);
        *x = wrap_unit(*x + scale * z);
    }
}

/// `sqrt(N) ((1/N) sum_i phi(B_i) - target)`.
pub fn particle_fluctuation_with_target(ens: &ParticleEnsemble, phi: &TrigExpr, target: f64) -> f64 {
    let n = ens.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = ens.iter().map(|x| phi.eval(x) - target).sum();
    sum / (n as f64).sqrt()
}

/// Fluctuation field `sqrt(N) (pi_N - rho_bar)` paired with `phi`, where
/// `<rho_bar, phi>` is integrated exactly.
pub fn particle_fluctuation(ens: &ParticleEnsemble, phi: &TrigExpr, rho_bar: &TrigExpr) -> f64 {
    particle_fluctuation_with_target(ens, phi, rho_bar.inner(phi))
}
