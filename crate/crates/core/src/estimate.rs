//! Quadratic-variation estimator, mobility comparison, and rate fitting.

use std::fmt;

use rayon::prelude::*;

use crate::analytic::{heat_solve_with, mobility_reference, JumpWeight, Mobility};
use crate::brownian::{advance_particles, check_density, particle_fluctuation, sample_initial_particles, BmVariance};
use crate::error::{Error, Result};
use crate::fhd::{SigmaKind, SpdeParams, SpdeState};
use crate::lattice::{GridField, Torus, TrigExpr};
use crate::rng::replica_rng;
use crate::ssep::{self, SsepParams};

/// `(q_hat, q_se)` with `q_hat = mean(dX^2) / h` and
/// `q_se = std(dX^2) / (h sqrt(R))`.
pub fn qv_estimate(increments: &[f64], h: f64) -> Result<(f64, f64)> {
    let r = increments.len();
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 increments, got {r}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let rf = r as f64;
    let mean = increments.iter().map(|x| x * x).sum::<f64>() / rf;
    let var = increments.iter().map(|x| (x * x - mean).powi(2)).sum::<f64>() / (rf - 1.0);
    Ok((mean / h, var.sqrt() / (h * rf.sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `log error` on `log scale`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("rate fit needs >= 3 points, got {}", points.len())));
    }
    if let Some(&(s, e)) = points.iter().find(|(s, e)| !(*s > 0.0 && *e > 0.0)) {
        return Err(Error::InvalidArgument(format!("rate fit needs positive values, got ({s}, {e})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct scales".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { slope, intercept, r2 })
}

/// Model simulated by [`run_qv_experiment`].
#[derive(Debug, Clone)]
pub enum ModelConfig {
    Ssep {
        torus: Torus,
        rho0: TrigExpr,
        jump_weight: JumpWeight,
    },
    Brownian {
        d: usize,
        particles: usize,
        rho0: TrigExpr,
        variance: BmVariance,
    },
    Spde {
        params: SpdeParams,
        rho0: TrigExpr,
    },
}

impl ModelConfig {
    /// Tag written to the `model` column.
    pub fn tag(&self) -> &'static str {
        match self {
            ModelConfig::Ssep { .. } => "ssep",
            ModelConfig::Brownian { .. } => "brownian",
            ModelConfig::Spde { params, .. } => match params.sigma().kind() {
                SigmaKind::Ssep => "spde",
                SigmaKind::Dk => "dk",
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Ssep { torus, .. } => torus.dim(),
            ModelConfig::Brownian { d, .. } => *d,
            ModelConfig::Spde { params, .. } => params.torus().dim(),
        }
    }

    pub fn rho0(&self) -> &TrigExpr {
        match self {
            ModelConfig::Ssep { rho0, .. } | ModelConfig::Brownian { rho0, .. } | ModelConfig::Spde { rho0, .. } => rho0,
        }
    }

    pub fn mobility(&self) -> Mobility {
        match self {
            ModelConfig::Ssep { .. } => Mobility::Ssep,
            ModelConfig::Brownian { .. } => Mobility::Linear,
            ModelConfig::Spde { params, .. } => match params.sigma().kind() {
                SigmaKind::Ssep => Mobility::Ssep,
                SigmaKind::Dk => Mobility::Linear,
            },
        }
    }

    /// `D` in the hydrodynamic equation `d_t rho = D Delta rho`.
    pub fn diffusivity(&self) -> f64 {
        match self {
            ModelConfig::Ssep { torus, jump_weight, .. } => jump_weight.diffusivity(torus.dim()),
            ModelConfig::Brownian { variance, .. } => variance.diffusivity(),
            ModelConfig::Spde { .. } => 0.5,
        }
    }

    /// Deterministic profile `rho_bar(t)`.
    pub fn rho_bar(&self, t: f64) -> TrigExpr {
        heat_solve_with(self.rho0(), t, self.diffusivity())
    }

    /// Limit of the estimator: `2D <grad phi, m(rho_bar(t)) grad phi>`; the
    /// factor is 1 under the default conventions.
    pub fn mobility_ref(&self, t: f64, phi: &TrigExpr) -> Result<f64> {
        let base = mobility_reference(self.mobility(), &self.rho_bar(t), phi, self.dim())?;
        Ok(2.0 * self.diffusivity() * base)
    }

    fn validate(&self) -> Result<()> {
        let rho0 = self.rho0();
        rho0.check_dim(self.dim())?;
        match self {
            ModelConfig::Ssep { .. } => {
                if !rho0.is_unit_profile() {
                    let lo = rho0.sampled_min(self.dim());
                    let hi = -rho0.map_amplitudes(|t| -t.amplitude).sampled_min(self.dim());
                    if lo < 0.0 || hi > 1.0 {
                        return Err(Error::Domain("exclusion initial profile must lie in [0, 1]".into()));
                    }
                }
                Ok(())
            }
            ModelConfig::Brownian { d, .. } => check_density(rho0, *d),
            ModelConfig::Spde { .. } => Ok(()),
        }
    }
}

/// One estimator evaluation request.
#[derive(Debug, Clone)]
pub struct QvRequest {
    pub model: ModelConfig,
    pub t: f64,
    pub h: f64,
    pub phi: TrigExpr,
    pub replicas: usize,
    pub seed: u64,
    /// Stream key separating experiments that share a seed.
    pub experiment: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    Invalid,
}

impl RecordStatus {
    pub fn name(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Invalid => "invalid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RecordStatus::Ok),
            "invalid" => Some(RecordStatus::Invalid),
            _ => None,
        }
    }
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Replicas may abort (solver blow-up) up to this fraction before a record
/// is marked invalid.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub model: String,
    pub d: usize,
    /// Lattice side (ssep) or particle count (brownian).
    pub n: Option<usize>,
    /// SPDE grid points per axis.
    pub grid_m: Option<usize>,
    pub t: f64,
    pub h: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub reg_n: Option<usize>,
    pub replicas: usize,
    pub q_hat: f64,
    pub q_se: f64,
    pub mobility_ref: f64,
    pub abs_error: f64,
    pub seed: u64,
    pub status: RecordStatus,
    pub aborted: usize,
}

impl EstimateRecord {
    pub fn ok_replicas(&self) -> usize {
        self.replicas - self.aborted
    }
}

/// Simulates `replicas` independent paths to `t` and `t + h` and applies
/// [`qv_estimate`] to the within-path fluctuation increments. Runs on the
/// current rayon pool; results do not depend on its size.
pub fn run_qv_experiment(req: &QvRequest) -> Result<EstimateRecord> {
    let (t, h) = (req.t, req.h);
    if !(h > 0.0 && h < t && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < h < t, got h = {h}, t = {t}")));
    }
    if req.replicas < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicas, got {}", req.replicas)));
    }
    let model = &req.model;
    model.validate()?;
    req.phi.check_dim(model.dim())?;
    let mobility_ref = model.mobility_ref(t, &req.phi)?;
    let rho_t = model.rho_bar(t);
    let rho_th = model.rho_bar(t + h);

    let outcomes: Vec<Result<Option<f64>>> = (0..req.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(req.seed, req.experiment, r);
            replica_increment(model, &req.phi, t, h, &rho_t, &rho_th, &mut rng)
        })
        .collect();
    let mut increments = Vec::with_capacity(req.replicas);
    let mut aborted = 0;
    for o in outcomes {
        match o? {
            Some(v) => increments.push(v),
            None => aborted += 1,
        }
    }

    let (q_hat, q_se) = if increments.len() >= 2 {
        qv_estimate(&increments, h)?
    } else {
        (f64::NAN, f64::NAN)
    };
    let status = if aborted as f64 > MAX_ABORT_FRACTION * req.replicas as f64 || increments.len() < 2 {
        RecordStatus::Invalid
    } else {
        RecordStatus::Ok
    };
    let (n, grid_m, eps, delta, reg_n) = match model {
        ModelConfig::Ssep { torus, .. } => (Some(torus.side()), None, None, None, None),
        ModelConfig::Brownian { particles, .. } => (Some(*particles), None, None, None, None),
        ModelConfig::Spde { params, .. } => (
            None,
            Some(params.torus().side()),
            Some(params.eps()),
            Some(params.noise().delta()),
            Some(params.sigma().reg_n()),
        ),
    };
    Ok(EstimateRecord {
        model: model.tag().to_string(),
        d: model.dim(),
        n,
        grid_m,
        t,
        h,
        eps,
        delta,
        reg_n,
        replicas: req.replicas,
        q_hat,
        q_se,
        mobility_ref,
        abs_error: (q_hat - mobility_ref).abs(),
        seed: req.seed,
        status,
        aborted,
    })
}

/// Increment `X(t+h) - X(t)` of one path; `None` when the solver blew up.
fn replica_increment<R: rand::Rng + ?Sized>(
    model: &ModelConfig,
    phi: &TrigExpr,
    t: f64,
    h: f64,
    rho_t: &TrigExpr,
    rho_th: &TrigExpr,
    rng: &mut R,
) -> Result<Option<f64>> {
    match model {
        ModelConfig::Ssep {
            torus,
            rho0,
            jump_weight,
        } => {
            let params = SsepParams::new(*torus, rho0.clone(), *jump_weight, 0)?;
            let w = params.weight();
            let phi_g = GridField::sample(*torus, phi);
            let mut config = ssep::sample_initial(&params, rng)?;
            ssep::advance(&mut config, t, w, rng);
            let a = ssep::fluctuation_sampled(&config, &phi_g, &GridField::sample(*torus, rho_t));
            ssep::advance(&mut config, h, w, rng);
            let b = ssep::fluctuation_sampled(&config, &phi_g, &GridField::sample(*torus, rho_th));
            Ok(Some(b - a))
        }
        ModelConfig::Brownian {
            d,
            particles,
            rho0,
            variance,
        } => {
            let mut ens = sample_initial_particles(*particles, *d, rho0, rng)?;
            advance_particles(&mut ens, t, *variance, rng);
            let a = particle_fluctuation(&ens, phi, rho_t);
            advance_particles(&mut ens, h, *variance, rng);
            let b = particle_fluctuation(&ens, phi, rho_th);
            Ok(Some(b - a))
        }
        ModelConfig::Spde { params, rho0 } => {
            let phi_g = GridField::sample(params.torus(), phi);
            let root_eps = params.eps().sqrt();
            let mut state = SpdeState::new(params.clone(), rho0)?;
            let observed = (|| {
                state.advance_to(t, rng)?;
                let a = state.pairing(phi_g.values()) - rho_t.inner(phi);
                state.advance_to(t + h, rng)?;
                let b = state.pairing(phi_g.values()) - rho_th.inner(phi);
                Ok::<_, Error>((b - a) / root_eps)
            })();
            match observed {
                Ok(v) => Ok(Some(v)),
                Err(Error::BlowUp { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        }
    }
}

/// Outcome of [`run_until_resolved`].
#[derive(Debug, Clone)]
pub struct Escalation {
    pub records: Vec<EstimateRecord>,
    /// Replica count of the final round.
    pub replicas: usize,
    pub doublings: usize,
    /// Whether every error exceeded `factor * q_se` in the final round.
    pub resolved: bool,
}

/// Runs all requests, doubling the replica count (at most `max_doublings`
/// times) until every record has `abs_error > factor * q_se`, i.e. the error
/// is resolved above the Monte Carlo noise.
pub fn run_until_resolved(requests: &[QvRequest], factor: f64, max_doublings: usize) -> Result<Escalation> {
    let mut reqs = requests.to_vec();
    let mut doublings = 0;
    loop {
        let records = reqs.iter().map(run_qv_experiment).collect::<Result<Vec<_>>>()?;
        let resolved = records.iter().all(|r| r.abs_error > factor * r.q_se);
        if resolved || doublings == max_doublings {
            let replicas = reqs.first().map_or(0, |r| r.replicas);
            return Ok(Escalation {
                records,
                replicas,
                doublings,
                resolved,
            });
        }
        for r in &mut reqs {
            r.replicas *= 2;
        }
        doublings += 1;
    }
}
