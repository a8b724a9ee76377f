//! Flat `key = value` experiment configuration.
//!
//! Pairs are separated by newlines or commas; a comma-separated token without
//! `=` continues the previous value, so `h = 0.01, 0.02` is a list and
//! `phi = sin:1,0:1` keeps its mode vector. `#` starts a comment.

use std::fmt;
use std::path::PathBuf;

use crate::analytic::JumpWeight;
use crate::brownian::BmVariance;
use crate::error::{Error, Result};
use crate::estimate::{ModelConfig, QvRequest};
use crate::fhd::{NoiseSpec, SigmaKind, SigmaReg, SpdeParams};
use crate::lattice::{Torus, TrigExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ssep,
    Brownian,
    Spde,
    Dk,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ssep => "ssep",
            ModelKind::Brownian => "brownian",
            ModelKind::Spde => "spde",
            ModelKind::Dk => "dk",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ssep" => Some(ModelKind::Ssep),
            "brownian" => Some(ModelKind::Brownian),
            "spde" => Some(ModelKind::Spde),
            "dk" => Some(ModelKind::Dk),
            _ => None,
        }
    }

    fn is_spde(self) -> bool {
        matches!(self, ModelKind::Spde | ModelKind::Dk)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const KEYS: &[&str] = &[
    "model",
    "d",
    "n",
    "grid_m",
    "t",
    "h",
    "eps",
    "delta",
    "reg_n",
    "jump_weight",
    "bm_variance",
    "rho0",
    "phi",
    "replicas",
    "seed",
    "workers",
    "out",
    "manifest",
];

/// One `key = value` pair with the line it came from (0 for flag overrides).
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Raw pairs in source order; later pairs override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: Vec<Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut current: Option<Entry> = None;
            for token in body.split(',') {
                if let Some((k, v)) = token.split_once('=') {
                    if let Some(e) = current.take() {
                        entries.push(e);
                    }
                    let key = k.trim().to_string();
                    check_key(&key, line_no)?;
                    current = Some(Entry {
                        key,
                        value: v.trim().to_string(),
                        line: line_no,
                    });
                } else if let Some(e) = current.as_mut() {
                    e.value.push(',');
                    e.value.push_str(token.trim());
                } else {
                    return Err(Error::Config {
                        key: token.trim().to_string(),
                        line: line_no,
                        message: "expected `key = value`".into(),
                    });
                }
            }
            entries.extend(current);
        }
        Ok(Self { entries })
    }

    /// Applies a `KEY=VALUE` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::Config {
            key: assignment.to_string(),
            line: 0,
            message: "override must look like KEY=VALUE".into(),
        })?;
        let key = k.trim().to_string();
        check_key(&key, 0)?;
        self.entries.push(Entry {
            key,
            value: v.trim().to_string(),
            line: 0,
        });
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }
}

fn check_key(key: &str, line: usize) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config {
            key: key.to_string(),
            line,
            message: "unknown key".into(),
        })
    }
}

/// Validated experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub d: usize,
    /// Lattice side (ssep) or particle count (brownian); unused by the SPDE.
    pub n: Vec<usize>,
    pub grid_m: Option<usize>,
    pub t: f64,
    /// Sorted ascending.
    pub h: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub reg_n: usize,
    pub jump_weight: JumpWeight,
    pub bm_variance: BmVariance,
    pub rho0: TrigExpr,
    pub phi: TrigExpr,
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            key: key.to_string(),
            line: self.raw.get(key).map_or(0, |e| e.line),
            message: message.into(),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(|e| e.value.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.str(key) {
            Some(v) => v.parse().map_err(|_| self.err(key, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| self.err(key, "required key is missing")),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        let Some(v) = self.str(key) else {
            return Ok(default);
        };
        let items = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| self.err(key, format!("cannot parse list item `{s}`"))))
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(self.err(key, "list must be nonempty"));
        }
        Ok(items)
    }

    fn trig(&self, key: &str, default: &str) -> Result<TrigExpr> {
        let v = self.str(key).unwrap_or(default);
        v.parse().map_err(|e| match e {
            Error::TrigParse { position, message } => self.err(key, format!("at byte {position}: {message}")),
            other => self.err(key, other.to_string()),
        })
    }
}

impl ExperimentConfig {
    /// Builds a config for `model` (the subcommand), or for the `model` key
    /// when `model` is `None`.
    pub fn from_raw(raw: &RawConfig, model: Option<ModelKind>) -> Result<Self> {
        let r = Reader { raw };
        let model = match model {
            Some(m) => m,
            None => {
                let v = r.str("model").ok_or_else(|| r.err("model", "required key is missing"))?;
                ModelKind::parse(v).ok_or_else(|| r.err("model", format!("unknown model `{v}`")))?
            }
        };
        let d: usize = r.parse("d", Some(1))?;
        if d == 0 {
            return Err(r.err("d", "dimension must be >= 1"));
        }
        let default_n = if model == ModelKind::Brownian { 1000 } else { 32 };
        let n: Vec<usize> = r.list("n", vec![default_n])?;
        let min_n = if model == ModelKind::Brownian { 1 } else { 2 };
        if n.iter().any(|&v| v < min_n) {
            return Err(r.err("n", format!("values must be >= {min_n}")));
        }
        let grid_m = match r.str("grid_m") {
            Some(_) => Some(r.parse::<usize>("grid_m", None)?),
            None => None,
        };
        let t: f64 = r.parse("t", Some(0.1))?;
        let mut h: Vec<f64> = r.list("h", vec![0.01])?;
        h.sort_by(f64::total_cmp);
        if let Some(bad) = h.iter().find(|&&v| !(v > 0.0 && v < t)) {
            return Err(r.err("h", format!("h = {bad} violates 0 < h < t (t = {t})")));
        }
        let eps: Vec<f64> = r.list("eps", vec![1e-4])?;
        if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(r.err("eps", "values must be positive"));
        }
        let delta: f64 = r.parse("delta", Some(0.1))?;
        if !(delta > 0.0) {
            return Err(r.err("delta", "must be positive"));
        }
        let reg_n: usize = r.parse("reg_n", Some(16))?;
        if reg_n < 2 {
            return Err(r.err("reg_n", "must be >= 2"));
        }
        let jump_weight = match r.str("jump_weight") {
            Some(v) => JumpWeight::parse(v).ok_or_else(|| r.err("jump_weight", "expected `half` or `inv2d`"))?,
            None => JumpWeight::Half,
        };
        let bm_variance = match r.str("bm_variance") {
            Some(v) => BmVariance::parse(v).ok_or_else(|| r.err("bm_variance", "expected `dt` or `2dt`"))?,
            None => BmVariance::Dt,
        };
        let default_rho = match model {
            ModelKind::Brownian | ModelKind::Dk => "const:1",
            _ => "const:0.5",
        };
        let rho0 = r.trig("rho0", default_rho)?;
        let phi = r.trig("phi", "sin:1:1")?;
        for (key, e) in [("rho0", &rho0), ("phi", &phi)] {
            if e.implied_dim().is_some_and(|k| k != d) {
                return Err(r.err(key, format!("expression dimension does not match d = {d}")));
            }
        }
        match model {
            ModelKind::Ssep => {
                let (lo, hi) = rho0.range_bound();
                if (lo < 0.0 || hi > 1.0)
                    && (rho0.sampled_min(d) < 0.0 || -rho0.map_amplitudes(|t| -t.amplitude).sampled_min(d) > 1.0)
                {
                    return Err(r.err("rho0", "exclusion profile must lie in [0, 1]"));
                }
            }
            ModelKind::Brownian => {
                crate::brownian::check_density(&rho0, d).map_err(|e| r.err("rho0", e.to_string()))?;
            }
            ModelKind::Dk => {
                if !(rho0.range_bound().0 > 0.0 || rho0.sampled_min(d) > 0.0) {
                    return Err(r.err("rho0", "square-root model needs a profile bounded away from 0"));
                }
            }
            ModelKind::Spde => {}
        }
        let replicas: usize = r.parse("replicas", Some(100))?;
        if replicas < 2 {
            return Err(r.err("replicas", "need at least 2 replicas"));
        }
        let seed: u64 = r.parse("seed", None)?;
        let workers: usize = r.parse("workers", Some(1))?;
        if workers == 0 {
            return Err(r.err("workers", "must be >= 1"));
        }
        let cfg = Self {
            model,
            d,
            n,
            grid_m,
            t,
            h,
            eps,
            delta,
            reg_n,
            jump_weight,
            bm_variance,
            rho0,
            phi,
            replicas,
            seed,
            workers,
            out: r.str("out").map(PathBuf::from),
            manifest: r.str("manifest").map(PathBuf::from),
        };
        // surface grid and noise problems at config time
        if model.is_spde() {
            cfg.spde_params(cfg.eps[0]).map_err(|e| r.err("grid_m", e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Parses `text` and applies `overrides` (`KEY=VALUE`) on top.
    pub fn parse(text: &str, overrides: &[String], model: Option<ModelKind>) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        for o in overrides {
            raw.set(o)?;
        }
        Self::from_raw(&raw, model)
    }

    fn spde_params(&self, eps: f64) -> Result<SpdeParams> {
        let noise = NoiseSpec::new(self.delta, self.d)?;
        let kind = if self.model == ModelKind::Dk { SigmaKind::Dk } else { SigmaKind::Ssep };
        let sigma = SigmaReg::new(kind, self.reg_n)?;
        SpdeParams::new(self.grid_m, eps, noise, sigma)
    }

    /// The experiment grid in output order: `n` (or `eps`) outermost, then `h`.
    pub fn requests(&self) -> Result<Vec<QvRequest>> {
        let mut models = Vec::new();
        match self.model {
            ModelKind::Ssep => {
                for &n in &self.n {
                    models.push(ModelConfig::Ssep {
                        torus: Torus::new(self.d, n)?,
                        rho0: self.rho0.clone(),
                        jump_weight: self.jump_weight,
                    });
                }
            }
            ModelKind::Brownian => {
                for &n in &self.n {
                    models.push(ModelConfig::Brownian {
                        d: self.d,
                        particles: n,
                        rho0: self.rho0.clone(),
                        variance: self.bm_variance,
                    });
                }
            }
            ModelKind::Spde | ModelKind::Dk => {
                for &eps in &self.eps {
                    models.push(ModelConfig::Spde {
                        params: self.spde_params(eps)?,
                        rho0: self.rho0.clone(),
                    });
                }
            }
        }
        let mut out = Vec::new();
        for model in models {
            for &h in &self.h {
                out.push(QvRequest {
                    model: model.clone(),
                    t: self.t,
                    h,
                    phi: self.phi.clone(),
                    replicas: self.replicas,
                    seed: self.seed,
                    experiment: out.len() as u64,
                });
            }
        }
        Ok(out)
    }

    /// Normalized `key = value` echo used by the manifest.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = vec![
            ("model".to_string(), self.model.name().to_string()),
            ("d".into(), self.d.to_string()),
            ("n".into(), join(self.n.iter().map(|v| v.to_string()).collect())),
        ];
        if let Some(m) = self.grid_m {
            out.push(("grid_m".into(), m.to_string()));
        }
        out.extend([
            ("t".into(), self.t.to_string()),
            ("h".into(), join(self.h.iter().map(|v| v.to_string()).collect())),
            ("eps".into(), join(self.eps.iter().map(|v| v.to_string()).collect())),
            ("delta".into(), self.delta.to_string()),
            ("reg_n".into(), self.reg_n.to_string()),
            ("jump_weight".into(), self.jump_weight.name().to_string()),
            ("bm_variance".into(), self.bm_variance.name().to_string()),
            ("rho0".into(), self.rho0.to_string()),
            ("phi".into(), self.phi.to_string()),
            ("replicas".into(), self.replicas.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("workers".into(), self.workers.to_string()),
        ]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TermKind;

    fn cfg(text: &str, model: ModelKind) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, &[], Some(model))
    }

    #[test]
    fn parses_trig_values() {
        let c = cfg("seed = 1\nphi = sin:1:1", ModelKind::Ssep).unwrap();
        assert_eq!(c.phi.terms().len(), 1);
        assert_eq!(c.phi.terms()[0].kind, TermKind::Sin);
        assert_eq!(c.phi.terms()[0].mode, vec![1]);
        assert_eq!(c.phi.terms()[0].amplitude, 1.0);
        let c = cfg("seed = 1\nrho0 = const:0.5+cos:1:0.25", ModelKind::Ssep).unwrap();
        assert_eq!(c.rho0.terms().len(), 2);
    }

    #[test]
    fn rejects_h_not_below_t() {
        match cfg("seed = 1\nh = 0.2, t = 0.1", ModelKind::Ssep) {
            Err(Error::Config { key, message, .. }) => {
                assert_eq!(key, "h");
                assert!(message.contains("0 < h < t"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comma_lists_and_vector_modes() {
        let c = cfg("seed = 2, d = 2, phi = sin:1,0:1\nh = 0.04, 0.01,0.02", ModelKind::Ssep).unwrap();
        assert_eq!(c.h, vec![0.01, 0.02, 0.04]);
        assert_eq!(c.phi.terms()[0].mode, vec![1, 0]);
    }

    #[test]
    fn error_reporting() {
        match cfg("seed = 1\nbogus = 3", ModelKind::Ssep) {
            Err(Error::Config { key, line, .. }) => assert_eq!((key.as_str(), line), ("bogus", 2)),
            other => panic!("{other:?}"),
        }
        match cfg("seed = 1\nphi = sin:1:1+tan:1:2", ModelKind::Ssep) {
            Err(Error::Config { key, line, message }) => {
                assert_eq!((key.as_str(), line), ("phi", 2));
                assert!(message.contains("byte 8"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match cfg("t = 0.1", ModelKind::Ssep) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "seed"),
            other => panic!("{other:?}"),
        }
        assert!(cfg("seed = 1\nrho0 = const:0.5+cos:1:0.7", ModelKind::Ssep).is_err());
        assert!(cfg("seed = 1\nrho0 = const:0.5", ModelKind::Brownian).is_err());
        assert!(cfg("seed = 1\ndelta = 0.1\ngrid_m = 16", ModelKind::Spde).is_err());
    }

    #[test]
    fn overrides_win() {
        let c = ExperimentConfig::parse("seed = 1\nreplicas = 10", &["replicas=20".into()], Some(ModelKind::Ssep)).unwrap();
        assert_eq!(c.replicas, 20);
        assert!(ExperimentConfig::parse("seed = 1", &["nope".into()], Some(ModelKind::Ssep)).is_err());
    }

    #[test]
    fn grid_order() {
        let c = cfg("seed = 1\nn = 8, 16\nh = 0.01, 0.02", ModelKind::Ssep).unwrap();
        let reqs = c.requests().unwrap();
        assert_eq!(reqs.len(), 4);
        let hs: Vec<f64> = reqs.iter().map(|r| r.h).collect();
        assert_eq!(hs, vec![0.01, 0.02, 0.01, 0.02]);
        assert_eq!(reqs.iter().map(|r| r.experiment).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn echo_reparses_to_same_config() {
        let c = cfg("seed = 5\nn = 8,16\nh = 0.02,0.01\nrho0 = const:0.5+cos:1:0.2", ModelKind::Ssep).unwrap();
        let text: String = c.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let again = ExperimentConfig::parse(&text, &[], None).unwrap();
        assert_eq!(c, again);
    }
}
