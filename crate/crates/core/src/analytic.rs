//! Reference solvers: continuous heat flow on trig polynomials, the lattice
//! random-walk semigroup, the discrete Laplacian, and the two mobility
//! functionals (exact integral and its lattice Riemann sum).

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{GridField, Torus, TrigExpr};
use crate::spectral::Spectral;

/// Per-direction jump weight `p(+-e_j)` of the exclusion process.
///
/// `Half` gives the `1/2 Delta` hydrodynamic limit and is the default.
/// `InvTwoD` uses `1/(2d)`, which coincides with `Half` in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpWeight {
    #[default]
    Half,
    InvTwoD,
}

impl JumpWeight {
    pub fn value(self, d: usize) -> f64 {
        match self {
            JumpWeight::Half => 0.5,
            JumpWeight::InvTwoD => 1.0 / (2.0 * d as f64),
        }
    }

    /// Coefficient `D` of the limiting heat equation `d_t rho = D Delta rho`.
    pub fn diffusivity(self, d: usize) -> f64 {
        self.value(d)
    }

    pub fn name(self) -> &'static str {
        match self {
            JumpWeight::Half => "half",
            JumpWeight::InvTwoD => "inv2d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "half" => Some(JumpWeight::Half),
            "inv2d" => Some(JumpWeight::InvTwoD),
            _ => None,
        }
    }
}

/// Solves `d_t rho = 1/2 Delta rho` exactly.
pub fn heat_solve(rho0: &TrigExpr, t: f64) -> TrigExpr {
    heat_solve_with(rho0, t, 0.5)
}

/// Solves `d_t rho = D Delta rho`: mode `k` decays by `exp(-D (2 pi |k|)^2 t)`.
pub fn heat_solve_with(rho0: &TrigExpr, t: f64, diffusivity: f64) -> TrigExpr {
    assert!(t >= 0.0, "heat flow needs t >= 0, got {t}");
    let rate = diffusivity * 4.0 * PI * PI;
    rho0.map_amplitudes(|term| (-rate * term.mode_norm_sq() * t).exp())
}

/// `n^2 w sum_j [f(x+e_j) + f(x-e_j) - 2 f(x)]`.
pub fn discrete_laplacian(field: &GridField, w: f64) -> GridField {
    let torus = field.torus();
    let f = field.component(0);
    let n2w = (torus.side() * torus.side()) as f64 * w;
    let values = (0..torus.sites())
        .map(|x| {
            let mut acc = 0.0;
            for j in 0..torus.dim() {
                acc += f[torus.neighbor(x, j, true)] + f[torus.neighbor(x, j, false)] - 2.0 * f[x];
            }
            n2w * acc
        })
        .collect();
    GridField::scalar(torus, values).expect("laplacian of a finite field is finite")
}

/// Transition kernel `G_N(t, .)` of the continuous-time lattice walk.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    t: f64,
    w: f64,
    values: GridField,
}

impl DiscreteKernel {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn torus(&self) -> Torus {
        self.values.torus()
    }

    /// `G_N(t, x)` indexed by displacement site `x`.
    pub fn values(&self) -> &GridField {
        &self.values
    }

    /// `(S_N(t) phi)(y) = sum_x G_N(t, y - x) phi(x)`.
    pub fn apply(&self, field: &GridField) -> GridField {
        let torus = self.torus();
        assert_eq!(torus, field.torus());
        let mut sp = Spectral::new(torus);
        let mut spec = sp.forward_real(field.component(0));
        for (site, c) in spec.iter_mut().enumerate() {
            *c *= walk_multiplier(&sp, site, self.t, self.w);
        }
        let mut out = vec![0.0; torus.sites()];
        sp.inverse_real_into(&mut spec, &mut out);
        GridField::scalar(torus, out).expect("finite semigroup output")
    }
}

/// Fourier multiplier `exp(t n^2 w sum_j 2 (cos(2 pi k_j / n) - 1))`.
fn walk_multiplier(sp: &Spectral, site: usize, t: f64, w: f64) -> f64 {
    let n = sp.torus().side() as f64;
    let exponent: f64 = (0..sp.torus().dim())
        .map(|j| {
            let k = sp.axis_wavenumbers(j)[site] as f64;
            2.0 * ((2.0 * PI * k / n).cos() - 1.0)
        })
        .sum();
    (t * n * n * w * exponent).exp()
}

/// Computes `G_N(t, .)` by inverting its Fourier multiplier.
pub fn discrete_semigroup(torus: Torus, t: f64, w: f64) -> DiscreteKernel {
    assert!(t >= 0.0, "semigroup needs t >= 0, got {t}");
    let mut sp = Spectral::new(torus);
    let mut spec: Vec<Complex64> = (0..torus.sites())
        .map(|s| Complex64::new(walk_multiplier(&sp, s, t, w), 0.0))
        .collect();
    let mut out = vec![0.0; torus.sites()];
    sp.inverse_real_into(&mut spec, &mut out);
    // rounding can leave entries at -1e-18
    for v in &mut out {
        *v = v.max(0.0);
    }
    DiscreteKernel {
        t,
        w,
        values: GridField::scalar(torus, out).expect("finite kernel"),
    }
}

/// Mobility function `m(rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mobility {
    /// `rho (1 - rho)`, defined on `[0, 1]`.
    Ssep,
    /// `rho`, defined on `[0, inf)`.
    Linear,
}

impl Mobility {
    pub fn eval(self, rho: f64) -> f64 {
        match self {
            Mobility::Ssep => rho * (1.0 - rho),
            Mobility::Linear => rho,
        }
    }

    fn check(self, rho: f64) -> Result<()> {
        const SLACK: f64 = 1e-12;
        let ok = match self {
            Mobility::Ssep => (-SLACK..=1.0 + SLACK).contains(&rho),
            Mobility::Linear => rho >= -SLACK,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("density {rho} outside the mobility domain")))
        }
    }
}

/// Points per axis that integrate `m(rho) |grad phi|^2` exactly.
fn quadrature_points(rho: &TrigExpr, phi: &TrigExpr) -> usize {
    (4 * rho.max_mode().max(phi.max_mode()) + 1).max(8)
}

/// `int m(rho(x)) |grad phi(x)|^2 dx` by exact equispaced quadrature.
pub fn mobility_reference(m: Mobility, rho_t: &TrigExpr, phi: &TrigExpr, d: usize) -> Result<f64> {
    let q = quadrature_points(rho_t, phi);
    let torus = Torus::new(d, q)?;
    let mut total = 0.0;
    for s in 0..torus.sites() {
        let x = torus.point(s);
        let r = rho_t.eval(&x);
        m.check(r)?;
        let g: f64 = phi.grad(&x).iter().map(|v| v * v).sum();
        total += m.eval(r) * g;
    }
    Ok(total / torus.sites() as f64)
}

/// `n^{2-d} sum_x sum_z rho(x)(1 - rho(x+z)) p(z) [phi(x+z) - phi(x)]^2`
/// with `p(+-e_j) = w`.
pub fn riemann_mobility(torus: Torus, rho_t: &TrigExpr, phi: &TrigExpr, w: f64) -> f64 {
    let rho = GridField::sample(torus, rho_t);
    let ph = GridField::sample(torus, phi);
    let (rho, ph) = (rho.component(0), ph.component(0));
    let mut total = 0.0;
    for x in 0..torus.sites() {
        for j in 0..torus.dim() {
            for fwd in [true, false] {
                let y = torus.neighbor(x, j, fwd);
                let dphi = ph[y] - ph[x];
                total += rho[x] * (1.0 - rho[y]) * dphi * dphi;
            }
        }
    }
    let n = torus.side() as f64;
    w * n.powi(2 - torus.dim() as i32) * total
}
