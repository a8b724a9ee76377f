//! Acceptance suite. Prints one `PASS` or `FAIL` line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run a subset by number: `cargo test --test acceptance -- 1 5`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use flucmob_core::analytic::{discrete_semigroup, heat_solve, mobility_reference, riemann_mobility};
use flucmob_core::estimate::{rate_fit, run_qv_experiment, run_until_resolved};
use flucmob_core::fhd::{make_noise_increment, mollified_mobility, NoiseSpec, SigmaKind, SigmaReg, SpdeParams, SpdeState};
use flucmob_core::lattice::GridField;
use flucmob_core::rng::replica_rng;
use flucmob_core::ssep::{self, SsepParams};
use flucmob_core::{BmVariance, EstimateRecord, JumpWeight, Mobility, ModelConfig, QvRequest, Torus, TrigExpr};
use nalgebra::DMatrix;

const SEED: u64 = 2026;
const H_GRID: [f64; 4] = [0.01, 0.02, 0.04, 0.08];

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            passed,
            detail: detail.into(),
        }
    }
}

fn expr(s: &str) -> TrigExpr {
    s.parse().unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn requests(model: &ModelConfig, t: f64, hs: &[f64], phi: &TrigExpr, replicas: usize, base: u64) -> Vec<QvRequest> {
    hs.iter()
        .enumerate()
        .map(|(i, &h)| QvRequest {
            model: model.clone(),
            t,
            h,
            phi: phi.clone(),
            replicas,
            seed: SEED,
            experiment: base + i as u64,
        })
        .collect()
}

fn run_all(reqs: &[QvRequest]) -> Vec<EstimateRecord> {
    reqs.iter().map(|r| run_qv_experiment(r).unwrap()).collect()
}

/// Errors ordered by increasing `h` never rise by more than Monte Carlo noise
/// as `h` shrinks.
fn non_increasing_as_h_shrinks(recs: &[EstimateRecord]) -> bool {
    recs.windows(2).all(|w| {
        let tol = 3.0 * (w[0].q_se.powi(2) + w[1].q_se.powi(2)).sqrt();
        w[0].abs_error <= w[1].abs_error + tol
    })
}

fn error_table(recs: &[EstimateRecord]) -> String {
    recs.iter()
        .map(|r| format!("h={} err={:.4}±{:.4}", r.h, r.abs_error, r.q_se))
        .collect::<Vec<_>>()
        .join(", ")
}

fn stationary_anchor() -> Verdict {
    let n = 32;
    let torus = Torus::new(1, n).unwrap();
    let phi = expr("sin:1:1");
    let rho = expr("const:0.5");
    let model = ModelConfig::Ssep {
        torus,
        rho0: rho.clone(),
        jump_weight: JumpWeight::Half,
    };
    let rec = run_qv_experiment(&requests(&model, 0.1, &[0.01], &phi, 2000, 100)[0]).unwrap();
    // riemann_mobility already carries the p(1-p) = 1/4 factor
    let oracle = riemann_mobility(torus, &rho, &phi, 0.5);
    let continuum = PI * PI / 2.0;
    let oracle_close = (oracle / continuum - 1.0).abs() <= 0.04;
    let within = (rec.q_hat - oracle).abs() <= 3.0 * rec.q_se;
    let lambda = 4.0 * (n * n) as f64 * 0.5 * (PI / n as f64).sin().powi(2);
    let finite_h = 0.25 * (1.0 - (-lambda * rec.h).exp()) / rec.h;
    Verdict::new(
        oracle_close && within,
        format!(
            "q_hat={:.4} q_se={:.4} oracle={:.4} ({:+.2}% from pi^2/2); exact finite-h mean {:.4} ({:.1} se away)",
            rec.q_hat,
            rec.q_se,
            oracle,
            100.0 * (oracle / continuum - 1.0),
            finite_h,
            (rec.q_hat - finite_h).abs() / rec.q_se
        ),
    )
}

fn duality() -> Verdict {
    let n = 16;
    let torus = Torus::new(1, n).unwrap();
    let params = SsepParams::new(torus, expr("const:0.5+cos:1:0.25"), JumpWeight::Half, 0).unwrap();
    let phi = GridField::sample(torus, &expr("cos:1:1"));
    let t = 0.1;
    let reps = 5000;
    let vals: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = replica_rng(SEED, 200, r);
            let mut c = ssep::sample_initial(&params, &mut rng).unwrap();
            ssep::advance(&mut c, t, params.weight(), &mut rng);
            c.to_field().lattice_pairing(&phi)
        })
        .collect();
    let (m, se) = mean_se(&vals);
    let lib = ssep::mean_occupancy_oracle(&params, t).lattice_pairing(&phi);
    // single-mode eigenvalue of the walk generator
    let lambda = 4.0 * (n * n) as f64 * 0.5 * (PI / n as f64).sin().powi(2);
    let closed = 0.125 * (-lambda * t).exp();
    let agree = (lib - closed).abs() < 1e-12;
    Verdict::new(
        agree && (m - closed).abs() <= 3.0 * se,
        format!("mc={m:.5} se={se:.5} oracle={closed:.5} (library {lib:.5})"),
    )
}

fn brownian_rate() -> Verdict {
    let model = ModelConfig::Brownian {
        d: 1,
        particles: 20_000,
        rho0: expr("const:1"),
        variance: BmVariance::Dt,
    };
    let reqs = requests(&model, 0.1, &H_GRID, &expr("sin:1:1"), 4000, 300);
    let esc = run_until_resolved(&reqs, 5.0, 3).unwrap();
    let pts: Vec<(f64, f64)> = esc.records.iter().map(|r| (r.h, r.abs_error)).collect();
    let fit = rate_fit(&pts).unwrap();
    let regime = if esc.resolved {
        format!("resolved above 5 se at R={}", esc.replicas)
    } else {
        format!("NOT resolved above 5 se at R={}", esc.replicas)
    };
    Verdict::new(
        esc.resolved && (0.6..=1.4).contains(&fit.slope),
        format!("slope={:.3} r2={:.3}; {regime}; {}", fit.slope, fit.r2, error_table(&esc.records)),
    )
}

fn ssep_h_trend() -> Verdict {
    let model = ModelConfig::Ssep {
        torus: Torus::new(1, 64).unwrap(),
        rho0: expr("const:0.5+cos:1:0.2"),
        jump_weight: JumpWeight::Half,
    };
    let recs = run_all(&requests(&model, 0.1, &H_GRID, &expr("sin:1:1"), 4000, 400));
    let floor = &recs[0];
    let cap = (3.0 * floor.q_se).max(0.1 * floor.mobility_ref);
    let mono = non_increasing_as_h_shrinks(&recs);
    Verdict::new(
        mono && floor.abs_error <= cap,
        format!(
            "monotone={mono}; floor {:.4} vs cap {:.4} (mobility_ref {:.4}); {}",
            floor.abs_error,
            cap,
            floor.mobility_ref,
            error_table(&recs)
        ),
    )
}

fn analytic_exactness() -> Verdict {
    let rho = expr("const:0.5+cos:1:0.2+sin:3:0.1");
    let composed = heat_solve(&heat_solve(&rho, 0.03), 0.07);
    let direct = heat_solve(&rho, 0.1);
    let semigroup = composed.approx_eq(&direct, 4.0 * f64::EPSILON);

    let mut worst: f64 = 0.0;
    for (d, n) in [(1, 4), (1, 7), (1, 8), (2, 4), (3, 2)] {
        let torus = Torus::new(d, n).unwrap();
        let w = JumpWeight::Half.value(d);
        let s = torus.sites();
        let rate = (n * n) as f64 * w;
        let mut g = DMatrix::<f64>::zeros(s, s);
        for x in 0..s {
            for j in 0..d {
                for fwd in [true, false] {
                    g[(x, torus.neighbor(x, j, fwd))] += rate;
                    g[(x, x)] -= rate;
                }
            }
        }
        for t in [0.01, 0.1, 0.5] {
            let p = (g.clone() * t).exp();
            let k = discrete_semigroup(torus, t, w);
            for y in 0..s {
                worst = worst.max((p[(0, y)] - k.values().values()[y]).abs());
            }
        }
    }
    let expm_ok = worst <= 1e-9;

    let rho_bar = expr("const:0.5+cos:1:0.2");
    let phi = expr("sin:1:1");
    let limit = mobility_reference(Mobility::Ssep, &rho_bar, &phi, 1).unwrap();
    let pts: Vec<(f64, f64)> = [16usize, 32, 64, 128]
        .iter()
        .map(|&n| {
            let r = riemann_mobility(Torus::new(1, n).unwrap(), &rho_bar, &phi, 0.5);
            (n as f64, (r - limit).abs())
        })
        .collect();
    let fit = rate_fit(&pts).unwrap();
    let slope_ok = (-1.6..=-0.7).contains(&fit.slope);
    Verdict::new(
        semigroup && expm_ok && slope_ok,
        format!(
            "semigroup={semigroup}; expm max diff {worst:.2e}; riemann slope {:.3} (need [-1.6, -0.7]), errors {:?}",
            fit.slope,
            pts.iter().map(|p| format!("{:.2e}", p.1)).collect::<Vec<_>>()
        ),
    )
}

fn spde_mass_and_noise() -> Verdict {
    let noise = NoiseSpec::new(0.1, 1).unwrap();
    let sigma = SigmaReg::new(SigmaKind::Ssep, 16).unwrap();
    let params = SpdeParams::new(Some(128), 1e-3, noise.clone(), sigma).unwrap();
    let dt = params.dt_max();
    let mut st = SpdeState::new(params, &expr("const:0.5+cos:1:0.2")).unwrap();
    let m0 = st.mean();
    let mut rng = replica_rng(SEED, 600, 0);
    for _ in 0..1000 {
        st.step(dt, &mut rng).unwrap();
    }
    let drift = (st.mean() - m0).abs();

    let draws = 10_000;
    let step = 1e-3;
    let mut rng = replica_rng(SEED, 601, 0);
    let sq: Vec<f64> = (0..draws)
        .map(|_| make_noise_increment(&noise, step, 128, &mut rng).unwrap().values()[37].powi(2))
        .collect();
    let var = sq.iter().sum::<f64>() / draws as f64;
    let rel = var / (noise.f1() * step) - 1.0;
    Verdict::new(
        drift <= 1e-10 && rel.abs() <= 0.05,
        format!("mass drift over 1000 steps {drift:.2e}; noise variance {:+.2}% from F1*dt", 100.0 * rel),
    )
}

fn spde_eps_trend() -> Verdict {
    let noise = NoiseSpec::new(0.1, 1).unwrap();
    let sigma = SigmaReg::new(SigmaKind::Ssep, 16).unwrap();
    let phi = expr("sin:1:1");
    let mut floors: Vec<(f64, f64, f64)> = Vec::new();
    let mut mono_all = true;
    let mut lines = Vec::new();
    for (i, eps) in [1e-4, 5e-5, 2.5e-5].into_iter().enumerate() {
        let params = SpdeParams::new(Some(128), eps, noise.clone(), sigma).unwrap();
        let model = ModelConfig::Spde {
            params,
            rho0: expr("const:0.5+cos:1:0.2"),
        };
        let recs = run_all(&requests(&model, 0.1, &H_GRID, &phi, 500, 700 + 10 * i as u64));
        let mono = non_increasing_as_h_shrinks(&recs);
        mono_all &= mono;
        floors.push((eps, recs[0].abs_error, recs[0].q_se));
        lines.push(format!(
            "eps={eps:e} (eps/delta^3={:.3}) monotone={mono} [{}]",
            eps / noise.delta().powi(3),
            error_table(&recs)
        ));
    }
    let floors_ok = floors
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    Verdict::new(
        mono_all && floors_ok,
        format!("floors non-increasing in eps={floors_ok}; {}", lines.join("; ")),
    )
}

fn dk_identity() -> Verdict {
    let noise = NoiseSpec::new(0.1, 1).unwrap();
    let sigma = SigmaReg::new(SigmaKind::Dk, 64).unwrap();
    let params = SpdeParams::new(None, 1e-4, noise.clone(), sigma).unwrap();
    let m = params.torus().side();
    let rho0 = expr("const:1");
    let phi = expr("sin:1:1");
    let model = ModelConfig::Spde {
        params,
        rho0: rho0.clone(),
    };
    let recs = run_all(&requests(&model, 0.1, &[0.0025, 0.005, 0.01], &phi, 1000, 800));
    let r = &recs[0];
    let target = 2.0 * PI * PI;
    let tol = (3.0 * r.q_se).max(0.1 * target);
    let mollified = mollified_mobility(&noise, SigmaKind::Dk, &rho0, &phi, m).unwrap();
    Verdict::new(
        (r.q_hat - target).abs() <= tol,
        format!(
            "q_hat={:.3} q_se={:.3} at h={} vs 2pi^2={target:.3} (tol {tol:.3}); delta-mollified limit {mollified:.3}; {}",
            r.q_hat,
            r.q_se,
            r.h,
            error_table(&recs)
        ),
    )
}

fn cli(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_flucmob"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let validate = cli(&["validate"], dir.path());
    let cfg = "model = ssep\nn = 16, 32\nrho0 = const:0.5+cos:1:0.2\nh = 0.02, 0.01\nreplicas = 64\nseed = 17\n";
    std::fs::write(dir.path().join("sweep.cfg"), cfg).unwrap();
    let a = cli(&["sweep", "--config", "sweep.cfg", "--workers", "1", "--out", "a.csv"], dir.path());
    let b = cli(&["sweep", "--config", "sweep.cfg", "--workers", "4", "--out", "b.csv"], dir.path());
    let ca = std::fs::read(dir.path().join("a.csv")).unwrap_or_default();
    let cb = std::fs::read(dir.path().join("b.csv")).unwrap_or_default();
    let rows = ca.iter().filter(|&&c| c == b'\n').count().saturating_sub(1);
    let ok = validate.status.success() && a.status.success() && b.status.success() && !ca.is_empty() && ca == cb;
    Verdict::new(
        ok,
        format!(
            "validate exit {:?}; sweep exits {:?}/{:?}; {rows} rows, identical={}",
            validate.status.code(),
            a.status.code(),
            b.status.code(),
            ca == cb
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 9] = [
    (1, "stationary exclusion QV anchor", stationary_anchor),
    (2, "duality oracle", duality),
    (3, "Brownian QV rate in h", brownian_rate),
    (4, "exclusion error trend in h", ssep_h_trend),
    (5, "analytic solver exactness", analytic_exactness),
    (6, "SPDE mass and noise isometry", spde_mass_and_noise),
    (7, "SPDE error trend in h and eps", spde_eps_trend),
    (8, "Dean-Kawasaki fluctuation identity", dk_identity),
    (9, "determinism across worker counts", determinism),
];

fn main() {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in CRITERIA {
        if !picked.is_empty() && !picked.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id} ({name}) [{:.1}s]: {}", start.elapsed().as_secs_f64(), v.detail);
        failed += usize::from(!v.passed);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
