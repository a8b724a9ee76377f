//! Fluctuating-hydrodynamics SPDE with spatially correlated conservative noise.

mod noise;
mod sigma;
mod solver;

pub use noise::{draw_coefficients, make_noise_increment, noise_from_coefficients, theta, NoiseSpec, MODE_CUTOFF};
pub use sigma::{SigmaKind, SigmaReg};
pub use solver::{dk_truncated_run, spde_fluctuation, stability_dt, DkRun, SpdeParams, SpdeState, DT_CAP};

use crate::error::Result;
use crate::lattice::{Torus, TrigExpr};
use crate::spectral::Spectral;

/// `sum_j sum_k theta_k^2 |(sigma(rho) d_j phi)^_k|^2`: the mobility functional
/// seen through the noise mollifier. Coefficients are computed by DFT on an
/// `m^d` grid, so `m` should resolve `sigma(rho)`.
pub fn mollified_mobility(noise: &NoiseSpec, kind: SigmaKind, rho_t: &TrigExpr, phi: &TrigExpr, m: usize) -> Result<f64> {
    let d = noise.dim();
    rho_t.check_dim(d)?;
    phi.check_dim(d)?;
    let torus = Torus::new(d, m)?;
    let mut sp = Spectral::new(torus);
    let sites = torus.sites();
    let mut weights = vec![0.0; sites];
    for (s, w) in weights.iter_mut().enumerate() {
        let k: Vec<i64> = (0..d).map(|j| sp.axis_wavenumbers(j)[s]).collect();
        *w = noise.multiplier(&k).powi(2);
    }
    let mut total = 0.0;
    for j in 0..d {
        let g: Vec<f64> = (0..sites)
            .map(|s| {
                let x = torus.point(s);
                kind.target(rho_t.eval(&x)) * phi.grad(&x)[j]
            })
            .collect();
        let spec = sp.forward_real(&g);
        let norm = 1.0 / sites as f64;
        total += spec.iter().zip(&weights).map(|(c, w)| w * (c * norm).norm_sqr()).sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mollified_mobility_constant_profile() {
        // sigma(1/2)^2 = 1/4, grad cos(2 pi x) has modes +-1 of size pi
        let noise = NoiseSpec::new(0.1, 1).unwrap();
        let rho: TrigExpr = "const:0.5".parse().unwrap();
        let phi: TrigExpr = "cos:1:1".parse().unwrap();
        let got = mollified_mobility(&noise, SigmaKind::Ssep, &rho, &phi, 64).unwrap();
        let th = theta(2.0 * PI * 0.1);
        let want = 0.25 * 2.0 * PI * PI * th * th;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn mollified_mobility_approaches_unmollified_as_delta_shrinks() {
        let rho: TrigExpr = "const:1+cos:1:0.4".parse().unwrap();
        let phi: TrigExpr = "cos:1:1".parse().unwrap();
        let exact = crate::analytic::mobility_reference(crate::analytic::Mobility::Linear, &rho, &phi, 1).unwrap();
        let mut prev = f64::INFINITY;
        for delta in [0.1, 0.03, 0.01] {
            let noise = NoiseSpec::new(delta, 1).unwrap();
            let v = mollified_mobility(&noise, SigmaKind::Dk, &rho, &phi, 256).unwrap();
            let err = (v - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.01 * exact);
    }
}
