//! Symmetric simple exclusion process on the discrete torus.
//!
//! Occupancy is bit-packed, 64 sites per word. Dynamics use rejection
//! kinetic Monte Carlo: a single Poisson clock of rate
//! `2d * n^d * n^2 * w` proposes a uniformly random directed edge, and the
//! proposal is executed only if it moves a particle into a hole. This is an
//! exact sample of the continuous-time chain.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::analytic::{discrete_semigroup, JumpWeight};
use crate::error::{Error, Result};
use crate::lattice::{GridField, Torus, TrigExpr};

/// Occupation state `eta in {0,1}^{T^d_N}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    torus: Torus,
    words: Vec<u64>,
    count: usize,
}

impl Configuration {
    pub fn empty(torus: Torus) -> Self {
        Self {
            torus,
            words: vec![0; torus.sites().div_ceil(64)],
            count: 0,
        }
    }

    pub fn full(torus: Torus) -> Self {
        Self::from_occupancy(torus, &vec![true; torus.sites()])
    }

    pub fn from_occupancy(torus: Torus, occ: &[bool]) -> Self {
        assert_eq!(occ.len(), torus.sites());
        let mut c = Self::empty(torus);
        for (s, &o) in occ.iter().enumerate() {
            if o {
                c.words[s >> 6] |= 1 << (s & 63);
            }
        }
        c.count = c.popcount();
        c
    }

    #[inline]
    pub fn torus(&self) -> Torus {
        self.torus
    }

    #[inline]
    pub fn get(&self, site: usize) -> bool {
        (self.words[site >> 6] >> (site & 63)) & 1 == 1
    }

    /// Cached particle number.
    #[inline]
    pub fn particle_count(&self) -> usize {
        self.count
    }

    /// Particle number recounted from the bit array.
    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn occupancy(&self) -> Vec<bool> {
        (0..self.torus.sites()).map(|s| self.get(s)).collect()
    }

    pub fn to_field(&self) -> GridField {
        let vals = (0..self.torus.sites())
            .map(|s| if self.get(s) { 1.0 } else { 0.0 })
            .collect();
        GridField::scalar(self.torus, vals).expect("0/1 field")
    }

    /// Exchanges the occupation variables at `x` and `y`.
    #[inline]
    pub fn swap(&mut self, x: usize, y: usize) {
        if self.get(x) != self.get(y) {
            self.words[x >> 6] ^= 1 << (x & 63);
            self.words[y >> 6] ^= 1 << (y & 63);
        }
    }

    /// `N^{-d} sum_x eta(x) phi(x)` for `phi` sampled on the lattice.
    pub fn empirical_sampled(&self, phi: &GridField) -> f64 {
        let p = phi.component(0);
        let sum: f64 = (0..self.torus.sites())
            .filter(|&s| self.get(s))
            .map(|s| p[s])
            .sum();
        sum / self.torus.sites() as f64
    }
}

/// Exclusion process parameters with slowly varying Bernoulli initial data.
#[derive(Debug, Clone)]
pub struct SsepParams {
    pub torus: Torus,
    pub rho0: TrigExpr,
    pub jump_weight: JumpWeight,
    pub seed: u64,
}

impl SsepParams {
    pub fn new(torus: Torus, rho0: TrigExpr, jump_weight: JumpWeight, seed: u64) -> Result<Self> {
        rho0.check_dim(torus.dim())?;
        Ok(Self {
            torus,
            rho0,
            jump_weight,
            seed,
        })
    }

    #[inline]
    pub fn weight(&self) -> f64 {
        self.jump_weight.value(self.torus.dim())
    }
}

/// Draws independent `Bernoulli(rho0(x))` occupations.
pub fn sample_initial<R: Rng + ?Sized>(params: &SsepParams, rng: &mut R) -> Result<Configuration> {
    let profile = GridField::sample(params.torus, &params.rho0);
    sample_product(&profile, rng)
}

/// Product Bernoulli configuration with per-site parameters from `profile`.
pub fn sample_product<R: Rng + ?Sized>(profile: &GridField, rng: &mut R) -> Result<Configuration> {
    let torus = profile.torus();
    let p = profile.component(0);
    if let Some(s) = p.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Domain(format!(
            "initial profile {} at site {s} is outside [0, 1]",
            p[s]
        )));
    }
    let mut c = Configuration::empty(torus);
    for (s, &ps) in p.iter().enumerate() {
        // p = 1 must always fill, p = 0 never
        if rng.random::<f64>() < ps {
            c.words[s >> 6] |= 1 << (s & 63);
        }
    }
    c.count = c.popcount();
    Ok(c)
}

/// Total proposal rate `2d * n^d * n^2 * w`.
pub fn proposal_rate(torus: Torus, w: f64) -> f64 {
    let n = torus.side() as f64;
    2.0 * torus.dim() as f64 * torus.sites() as f64 * n * n * w
}

/// Evolves `config` exactly over macroscopic time `dt`.
pub fn advance<R: Rng + ?Sized>(config: &mut Configuration, dt: f64, w: f64, rng: &mut R) {
    assert!(dt >= 0.0, "advance needs dt >= 0, got {dt}");
    let torus = config.torus;
    if dt == 0.0 || config.count == 0 || config.count == torus.sites() {
        return;
    }
    let mean = proposal_rate(torus, w) * dt;
    let events = Poisson::new(mean).expect("positive finite rate").sample(rng) as u64;
    let two_d = 2 * torus.dim();
    let edges = two_d * torus.sites();
    if torus.dim() == 1 {
        let n = torus.side();
        for _ in 0..events {
            let e = rng.random_range(0..edges);
            let x = e >> 1;
            let y = if e & 1 == 0 {
                if x + 1 == n { 0 } else { x + 1 }
            } else if x == 0 {
                n - 1
            } else {
                x - 1
            };
            config.try_jump(x, y);
        }
    } else {
        for _ in 0..events {
            let e = rng.random_range(0..edges);
            let x = e / two_d;
            let r = e % two_d;
            let y = torus.neighbor(x, r >> 1, r & 1 == 0);
            config.try_jump(x, y);
        }
    }
}

impl Configuration {
    #[inline]
    fn try_jump(&mut self, x: usize, y: usize) {
        let xb = (self.words[x >> 6] >> (x & 63)) & 1;
        let yb = (self.words[y >> 6] >> (y & 63)) & 1;
        if xb == 1 && yb == 0 {
            self.words[x >> 6] ^= 1 << (x & 63);
            self.words[y >> 6] ^= 1 << (y & 63);
        }
    }
}

/// `N^{-d} sum_x eta(x) phi(x)`.
pub fn empirical(config: &Configuration, phi: &TrigExpr) -> f64 {
    config.empirical_sampled(&GridField::sample(config.torus, phi))
}

/// `N^{-d/2} sum_x (eta(x) - rho_bar(x)) phi(x)` with both fields sampled.
pub fn fluctuation_sampled(config: &Configuration, phi: &GridField, rho_bar: &GridField) -> f64 {
    let torus = config.torus;
    let (p, r) = (phi.component(0), rho_bar.component(0));
    let sum: f64 = (0..torus.sites())
        .map(|s| {
            let eta = if config.get(s) { 1.0 } else { 0.0 };
            (eta - r[s]) * p[s]
        })
        .sum();
    sum / (torus.sites() as f64).sqrt()
}

/// Fluctuation field paired with `phi`, centered at `rho_bar = rho(t)`.
pub fn fluctuation(config: &Configuration, phi: &TrigExpr, rho_bar: &TrigExpr) -> f64 {
    let torus = config.torus;
    fluctuation_sampled(
        config,
        &GridField::sample(torus, phi),
        &GridField::sample(torus, rho_bar),
    )
}

/// Carre du champ of the linear observable `f(eta) = sum_x a(x) eta(x)`:
/// `n^2 sum_x sum_z eta(x)(1 - eta(x+z)) p(z) (a(x+z) - a(x))^2`.
pub fn carre_du_champ_linear(config: &Configuration, weights: &[f64], w: f64) -> f64 {
    let torus = config.torus;
    assert_eq!(weights.len(), torus.sites());
    let mut total = 0.0;
    for x in (0..torus.sites()).filter(|&x| config.get(x)) {
        for j in 0..torus.dim() {
            for fwd in [true, false] {
                let y = torus.neighbor(x, j, fwd);
                if !config.get(y) {
                    let da = weights[y] - weights[x];
                    total += da * da;
                }
            }
        }
    }
    let n = torus.side() as f64;
    n * n * w * total
}

/// Instantaneous quadratic-variation rate of the fluctuation field paired
/// with `phi`: `N^{2-d} sum_x sum_z eta(x)(1-eta(x+z)) p(z) [phi(x+z)-phi(x)]^2`.
pub fn carre_du_champ_qv_rate(config: &Configuration, phi: &GridField, w: f64) -> f64 {
    let scale = (config.torus.sites() as f64).sqrt().recip();
    let weights: Vec<f64> = phi.component(0).iter().map(|v| v * scale).collect();
    carre_du_champ_linear(config, &weights, w)
}

/// Exact mean occupancy `E eta_t(x) = (S_N(t) rho0)(x)`.
pub fn mean_occupancy_oracle(params: &SsepParams, t: f64) -> GridField {
    let profile = GridField::sample(params.torus, &params.rho0);
    mean_occupancy_from(&profile, t, params.weight())
}

/// `S_N(t)` applied to an arbitrary initial mean profile.
pub fn mean_occupancy_from(profile: &GridField, t: f64, w: f64) -> GridField {
    discrete_semigroup(profile.torus(), t, w).apply(profile)
}

/// Configuration snapshots of one path at increasing observation times.
#[derive(Debug, Clone)]
pub struct SsepPath {
    snapshots: Vec<(f64, Configuration)>,
}

impl SsepPath {
    /// Runs one path from `initial` and records it at each of `times`.
    pub fn observe<R: Rng + ?Sized>(
        params: &SsepParams,
        initial: Configuration,
        times: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "observation times must be nonnegative and strictly increasing".into(),
            ));
        }
        let w = params.weight();
        let mut clock = 0.0;
        let mut state = initial;
        let mut snapshots = Vec::with_capacity(times.len());
        for &t in times {
            advance(&mut state, t - clock, w, rng);
            clock = t;
            snapshots.push((t, state.clone()));
        }
        Ok(Self { snapshots })
    }

    pub fn snapshots(&self) -> &[(f64, Configuration)] {
        &self.snapshots
    }
}

/// `max_x |mean(eta(x) eta(x+e_axis)) - m(x) m(x+e_axis)|` over samples.
///
/// Exploratory diagnostic for two-point correlations; carries no tolerance.
pub fn pair_correlation_deviation(samples: &[Configuration], mean: &GridField, axis: usize) -> f64 {
    let Some(first) = samples.first() else {
        return 0.0;
    };
    let torus = first.torus;
    let m = mean.component(0);
    let r = samples.len() as f64;
    (0..torus.sites())
        .map(|x| {
            let y = torus.neighbor(x, axis, true);
            let both = samples.iter().filter(|c| c.get(x) && c.get(y)).count() as f64 / r;
            (both - m[x] * m[y]).abs()
        })
        .fold(0.0, f64::max)
}
