//! Fast self-checks against closed forms and independent computations.

use std::f64::consts::PI;

use crate::analytic::{discrete_semigroup, heat_solve, mobility_reference, riemann_mobility, Mobility};
use crate::estimate::{qv_estimate, rate_fit};
use crate::fhd::{NoiseSpec, SigmaKind, SigmaReg, SpdeParams, SpdeState};
use crate::lattice::{GridField, Torus, TrigExpr};
use crate::rng::replica_rng;
use crate::ssep::{self, SsepParams};
use crate::JumpWeight;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> OracleOutcome {
    OracleOutcome { name, passed, detail }
}

fn expr(s: &str) -> TrigExpr {
    s.parse().expect("built-in expression")
}

/// Dense `exp(a)` by scaled Taylor series and repeated squaring.
pub fn dense_expm(a: &[f64], dim: usize) -> Vec<f64> {
    let norm = (0..dim)
        .map(|i| (0..dim).map(|j| a[i * dim + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
    let mul = |x: &[f64], y: &[f64]| {
        let mut z = vec![0.0; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let xik = x[i * dim + k];
                if xik != 0.0 {
                    for j in 0..dim {
                        z[i * dim + j] += xik * y[k * dim + j];
                    }
                }
            }
        }
        z
    };
    let mut result = vec![0.0; dim * dim];
    let mut term = vec![0.0; dim * dim];
    for i in 0..dim {
        result[i * dim + i] = 1.0;
        term[i * dim + i] = 1.0;
    }
    for k in 1..=30 {
        term = mul(&term, &scaled);
        for v in term.iter_mut() {
            *v /= k as f64;
        }
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

/// Generator of the continuous-time walk with rate `n^2 w` per neighbor.
pub fn walk_generator(torus: Torus, w: f64) -> Vec<f64> {
    let s = torus.sites();
    let rate = (torus.side() as f64).powi(2) * w;
    let mut g = vec![0.0; s * s];
    for x in 0..s {
        for j in 0..torus.dim() {
            for fwd in [true, false] {
                let y = torus.neighbor(x, j, fwd);
                g[x * s + y] += rate;
                g[x * s + x] -= rate;
            }
        }
    }
    g
}

fn heat_semigroup_law() -> OracleOutcome {
    let rho = expr("const:0.5+cos:1:0.2+sin:3:0.1");
    let lhs = heat_solve(&heat_solve(&rho, 0.03), 0.05);
    let rhs = heat_solve(&rho, 0.08);
    outcome("heat semigroup law", lhs.approx_eq(&rhs, 1e-14), format!("S(0.05)S(0.03) vs S(0.08): {lhs} / {rhs}"))
}

fn semigroup_vs_expm() -> OracleOutcome {
    let mut worst: f64 = 0.0;
    for (d, n) in [(1, 8), (2, 4)] {
        let torus = Torus::new(d, n).expect("valid torus");
        let t = 0.07;
        let w = 0.5;
        let g: Vec<f64> = walk_generator(torus, w).iter().map(|v| v * t).collect();
        let p = dense_expm(&g, torus.sites());
        let kernel = discrete_semigroup(torus, t, w);
        for (y, k) in kernel.values().values().iter().enumerate() {
            worst = worst.max((p[y] - k).abs());
        }
    }
    outcome("discrete semigroup vs matrix exponential", worst <= 1e-9, format!("max deviation {worst:e}"))
}

fn mobility_closed_forms() -> OracleOutcome {
    let phi = expr("sin:1:1");
    let half = expr("const:0.5");
    let m = mobility_reference(Mobility::Ssep, &half, &phi, 1).unwrap_or(f64::NAN);
    let n = 32usize;
    let torus = Torus::new(1, n).expect("valid torus");
    let r = riemann_mobility(torus, &half, &phi, 0.5);
    let r_exact = 0.5 * (n as f64).powi(2) * (PI / n as f64).sin().powi(2);
    let m_exact = PI * PI / 2.0;
    let ok = (m - m_exact).abs() < 1e-12 && (r - r_exact).abs() < 1e-10;
    outcome("mobility closed forms", ok, format!("reference {m} (want {m_exact}), lattice {r} (want {r_exact})"))
}

fn noise_constancy() -> OracleOutcome {
    let spec = NoiseSpec::new(0.1, 2).expect("valid noise");
    let base = spec.pointwise_variance(&[0.0, 0.0]);
    let worst = [[0.31, 0.77], [0.5, 0.123], [0.9, 0.9]]
        .iter()
        .map(|x| ((spec.pointwise_variance(x) - base) / base).abs())
        .fold(0.0, f64::max);
    let ok = worst <= 1e-10 && (base - spec.f1()).abs() <= 1e-10 * spec.f1();
    outcome("noise pointwise variance is constant", ok, format!("relative variation {worst:e}, F1 {}", spec.f1()))
}

fn spde_mass() -> OracleOutcome {
    let run = || -> crate::Result<f64> {
        let noise = NoiseSpec::new(0.1, 1)?;
        let sigma = SigmaReg::new(SigmaKind::Ssep, 16)?;
        let params = SpdeParams::new(Some(64), 1e-3, noise, sigma)?;
        let dt = params.dt_max();
        let mut st = SpdeState::new(params, &expr("const:0.5+cos:1:0.2"))?;
        let mut rng = replica_rng(1, 0, 0);
        let mut worst: f64 = 0.0;
        let mut prev = st.mean();
        for _ in 0..200 {
            st.step(dt, &mut rng)?;
            worst = worst.max((st.mean() - prev).abs());
            prev = st.mean();
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => outcome("SPDE mass conservation", w <= 1e-12, format!("max per-step drift {w:e}")),
        Err(e) => outcome("SPDE mass conservation", false, e.to_string()),
    }
}

fn estimator_examples() -> OracleOutcome {
    let a = qv_estimate(&[0.3, -0.3], 0.5).ok();
    let z = qv_estimate(&[0.0, 0.0, 0.0], 0.1).ok();
    let hs = [0.01, 0.02, 0.04, 0.08];
    let f = rate_fit(&hs.iter().map(|&h| (h, 3.0 * h)).collect::<Vec<_>>()).ok();
    let ok = a.is_some_and(|(q, se)| (q - 0.18).abs() < 1e-14 && se == 0.0)
        && z == Some((0.0, 0.0))
        && f.is_some_and(|f| (f.slope - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    outcome("estimator and rate-fit examples", ok, format!("{a:?} {z:?} {f:?}"))
}

fn ssep_duality() -> OracleOutcome {
    let torus = Torus::new(1, 16).expect("valid torus");
    let rho0 = expr("const:0.5+cos:1:0.25");
    let phi = GridField::sample(torus, &expr("cos:1:1"));
    let params = SsepParams::new(torus, rho0, JumpWeight::Half, 0).expect("valid params");
    let t = 0.1;
    let reps = 1000;
    let vals: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = replica_rng(2024, 0, r);
            let mut c = ssep::sample_initial(&params, &mut rng).expect("unit profile");
            ssep::advance(&mut c, t, params.weight(), &mut rng);
            c.to_field().lattice_pairing(&phi)
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0) / reps as f64).sqrt();
    let want = ssep::mean_occupancy_oracle(&params, t).lattice_pairing(&phi);
    let ok = (mean - want).abs() <= 4.0 * se;
    outcome("exclusion duality (Monte Carlo)", ok, format!("mean {mean:.6} vs {want:.6}, se {se:.2e}"))
}

/// Runs every oracle.
pub fn run_oracles() -> Vec<OracleOutcome> {
    vec![
        heat_semigroup_law(),
        semigroup_vs_expm(),
        mobility_closed_forms(),
        noise_constancy(),
        spde_mass(),
        estimator_examples(),
        ssep_duality(),
    ]
}
