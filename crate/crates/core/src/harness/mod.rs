//! Experiment orchestration: configuration, parallel runs, persistence, and
//! reporting.

mod config;
mod output;
mod report;
pub mod validate;

use std::path::Path;
use std::time::Instant;

pub use config::{Entry, ExperimentConfig, ModelKind, RawConfig, KEYS};
pub use output::{read_csv, record_checksum, record_fields, render_csv, write_csv, RecordSummary, RunManifest, CSV_COLUMNS};
pub use report::{report, Group, Report};

use crate::error::{Error, Result};
use crate::estimate::{run_qv_experiment, EstimateRecord, RecordStatus};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EstimateRecord>,
    pub csv: String,
    pub manifest: RunManifest,
}

impl RunOutput {
    /// Records marked invalid because too many replicas aborted.
    pub fn invalid_count(&self) -> usize {
        self.records.iter().filter(|r| r.status == RecordStatus::Invalid).count()
    }
}

/// Runs every experiment of `cfg` on a pool of `cfg.workers` threads.
/// The CSV depends only on the config and seed.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let requests = cfg.requests()?;
    let records = pool.install(|| requests.iter().map(run_qv_experiment).collect::<Result<Vec<_>>>())?;
    let csv = render_csv(&records)?;
    let manifest = RunManifest::new(cfg.echo(), &records, start.elapsed().as_secs_f64());
    Ok(RunOutput { records, csv, manifest })
}

/// Writes the CSV and, if requested, the manifest.
pub fn write_outputs(out: &RunOutput, csv_path: &Path, manifest_path: Option<&Path>) -> Result<()> {
    for p in std::iter::once(csv_path).chain(manifest_path) {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(csv_path, &out.csv)?;
    if let Some(m) = manifest_path {
        std::fs::write(m, out.manifest.render())?;
    }
    Ok(())
}

/// Reads and concatenates records from several CSV files.
pub fn read_records(paths: &[impl AsRef<Path>]) -> Result<Vec<EstimateRecord>> {
    let mut all = Vec::new();
    for p in paths {
        let f = std::fs::File::open(p.as_ref())?;
        all.extend(read_csv(f)?);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_exclusion_row() {
        let cfg = ExperimentConfig::parse("seed = 4\nn = 8\nrho0 = const:1\nreplicas = 2", &[], Some(ModelKind::Ssep)).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].q_hat, 0.0);
        assert!(out.csv.lines().nth(1).unwrap().starts_with("ssep,1,8,,0.1,0.01,,,,2,0,0,0,0,4,ok"));
    }

    #[test]
    fn sweep_rows_and_determinism() {
        let text = "seed = 11\nn = 200\nh = 0.08, 0.01, 0.04, 0.02\nreplicas = 20";
        let a = ExperimentConfig::parse(text, &["workers=1".into()], Some(ModelKind::Brownian)).unwrap();
        let b = ExperimentConfig::parse(text, &["workers=3".into()], Some(ModelKind::Brownian)).unwrap();
        let (oa, ob) = (run(&a).unwrap(), run(&b).unwrap());
        assert_eq!(oa.csv, ob.csv);
        assert_eq!(oa.records.len(), 4);
        let hs: Vec<f64> = oa.records.iter().map(|r| r.h).collect();
        assert!(hs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(oa.manifest.replicas_ok() + oa.manifest.replicas_aborted(), 80);
    }

    #[test]
    fn outputs_round_trip_through_disk() {
        let cfg = ExperimentConfig::parse("seed = 2\nn = 50\nreplicas = 4", &[], Some(ModelKind::Brownian)).unwrap();
        let out = run(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("sub/out.csv");
        let man = dir.path().join("sub/out.manifest");
        write_outputs(&out, &csv, Some(&man)).unwrap();
        let back = read_records(&[&csv]).unwrap();
        assert_eq!(render_csv(&back).unwrap(), out.csv);
        let m = RunManifest::parse(&std::fs::read_to_string(&man).unwrap()).unwrap();
        assert_eq!(m, out.manifest);
        assert_eq!(m.records[0].checksum, record_checksum(&back[0]));
    }
}
