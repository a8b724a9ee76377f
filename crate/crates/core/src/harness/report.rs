//! Grouping, rate fits, and plot-data emission for finished runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::estimate::{rate_fit, EstimateRecord, RateFit};

/// Records sharing `(model, n, grid_m, eps, delta)`, ordered by `h`.
#[derive(Debug, Clone)]
pub struct Group {
    pub label: String,
    pub records: Vec<EstimateRecord>,
    pub fit: Option<RateFit>,
    /// Why no fit was produced.
    pub notice: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: String,
    pub h_groups: Vec<Group>,
    /// Fits of error against `n` at fixed `h`.
    pub n_groups: Vec<Group>,
    pub files: Vec<PathBuf>,
}

fn fmt_opt<T: ToString>(name: &str, v: Option<T>) -> String {
    v.map(|x| format!("_{name}{}", x.to_string())).unwrap_or_default()
}

fn h_label(r: &EstimateRecord) -> String {
    format!(
        "{}_d{}{}{}{}{}{}",
        r.model,
        r.d,
        fmt_opt("n", r.n),
        fmt_opt("m", r.grid_m),
        fmt_opt("eps", r.eps),
        fmt_opt("delta", r.delta),
        fmt_opt("reg", r.reg_n)
    )
}

fn n_label(r: &EstimateRecord) -> String {
    format!(
        "{}_d{}{}{}{}_h{}",
        r.model,
        r.d,
        fmt_opt("m", r.grid_m),
        fmt_opt("eps", r.eps),
        fmt_opt("delta", r.delta),
        r.h
    )
}

fn fit_group(label: String, mut records: Vec<EstimateRecord>, scale: fn(&EstimateRecord) -> f64, axis: &str) -> Group {
    records.sort_by(|a, b| scale(a).total_cmp(&scale(b)));
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (scale(r), r.abs_error)).collect();
    let (fit, notice) = if pts.len() < 3 {
        (None, Some(format!("fit skipped: {} point(s) in {axis}, need 3", pts.len())))
    } else {
        match rate_fit(&pts) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(format!("fit skipped: {e}"))),
        }
    };
    Group {
        label,
        records,
        fit,
        notice,
    }
}

fn group_by(records: &[EstimateRecord], key: fn(&EstimateRecord) -> String) -> BTreeMap<String, Vec<EstimateRecord>> {
    let mut map: BTreeMap<String, Vec<EstimateRecord>> = BTreeMap::new();
    for r in records {
        map.entry(key(r)).or_default().push(r.clone());
    }
    map
}

/// Builds the summary. When `out_dir` is given, writes one two-column
/// `scale error` file per group there.
pub fn report(records: &[EstimateRecord], out_dir: Option<&Path>) -> Result<Report> {
    let h_groups: Vec<Group> = group_by(records, h_label)
        .into_iter()
        .map(|(l, rs)| fit_group(l, rs, |r| r.h, "h"))
        .collect();
    let n_groups: Vec<Group> = group_by(records, n_label)
        .into_iter()
        .filter(|(_, rs)| rs.iter().all(|r| r.n.is_some()) && rs.len() > 1)
        .map(|(l, rs)| fit_group(l, rs, |r| r.n.unwrap_or(0) as f64, "n"))
        .collect();

    let mut summary = String::new();
    let _ = writeln!(summary, "{} record(s), {} group(s) by h", records.len(), h_groups.len());
    for (title, groups, axis) in [("error vs h", &h_groups, "h"), ("error vs n", &n_groups, "n")] {
        if groups.is_empty() {
            continue;
        }
        let _ = writeln!(summary, "\n== {title} ==");
        for g in groups.iter() {
            let _ = writeln!(summary, "[{}]", g.label);
            let _ = writeln!(summary, "  {:>12} {:>14} {:>12} {:>14} {:>8}", axis, "q_hat", "q_se", "abs_error", "status");
            for r in &g.records {
                let s = if axis == "h" { r.h } else { r.n.unwrap_or(0) as f64 };
                let _ = writeln!(
                    summary,
                    "  {:>12} {:>14.6} {:>12.6} {:>14.6} {:>8}",
                    s, r.q_hat, r.q_se, r.abs_error, r.status
                );
            }
            match (&g.fit, &g.notice) {
                (Some(f), _) => {
                    let _ = writeln!(summary, "  slope {:.4}  intercept {:.4}  r2 {:.4}", f.slope, f.intercept, f.r2);
                }
                (None, Some(n)) => {
                    let _ = writeln!(summary, "  {n}");
                }
                (None, None) => {}
            }
        }
    }

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        for (suffix, groups, scale) in [
            ("h", &h_groups, (|r: &EstimateRecord| r.h) as fn(&EstimateRecord) -> f64),
            ("n", &n_groups, |r: &EstimateRecord| r.n.unwrap_or(0) as f64),
        ] {
            for g in groups.iter() {
                let path = dir.join(format!("{}.{suffix}.dat", g.label));
                let mut body = format!("# {suffix} abs_error\n");
                for r in &g.records {
                    let _ = writeln!(body, "{} {}", scale(r), r.abs_error);
                }
                std::fs::write(&path, body)?;
                files.push(path);
            }
        }
    }
    Ok(Report {
        summary,
        h_groups,
        n_groups,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::RecordStatus;

    fn rec(model: &str, n: usize, h: f64, err: f64) -> EstimateRecord {
        EstimateRecord {
            model: model.into(),
            d: 1,
            n: Some(n),
            grid_m: None,
            t: 0.1,
            h,
            eps: None,
            delta: None,
            reg_n: None,
            replicas: 10,
            q_hat: 1.0 + err,
            q_se: 0.01,
            mobility_ref: 1.0,
            abs_error: err,
            seed: 1,
            status: RecordStatus::Ok,
            aborted: 0,
        }
    }

    #[test]
    fn exact_linear_errors_fit_slope_one() {
        let recs: Vec<_> = [0.08, 0.01, 0.04, 0.02].iter().map(|&h| rec("ssep", 32, h, 3.0 * h)).collect();
        let rep = report(&recs, None).unwrap();
        assert_eq!(rep.h_groups.len(), 1);
        let f = rep.h_groups[0].fit.unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(rep.summary.contains("slope 1.0000"));
    }

    #[test]
    fn single_row_skips_fit() {
        let rep = report(&[rec("ssep", 32, 0.01, 0.1)], None).unwrap();
        assert!(rep.h_groups[0].fit.is_none());
        assert!(rep.summary.contains("fit skipped"));
    }

    #[test]
    fn models_do_not_mix() {
        let mut recs: Vec<_> = [0.01, 0.02, 0.04].iter().map(|&h| rec("ssep", 32, h, h)).collect();
        recs.extend([0.01, 0.02, 0.04].iter().map(|&h| rec("brownian", 32, h, h * h)));
        let rep = report(&recs, None).unwrap();
        assert_eq!(rep.h_groups.len(), 2);
        for g in &rep.h_groups {
            assert!(g.records.iter().all(|r| r.model == g.records[0].model));
            let want = if g.records[0].model == "ssep" { 1.0 } else { 2.0 };
            assert!((g.fit.unwrap().slope - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fits_against_n_and_writes_files() {
        let recs: Vec<_> = [16, 32, 64, 128].iter().map(|&n| rec("ssep", n, 0.01, 5.0 / n as f64)).collect();
        let dir = tempfile::tempdir().unwrap();
        let rep = report(&recs, Some(dir.path())).unwrap();
        assert_eq!(rep.n_groups.len(), 1);
        assert!((rep.n_groups[0].fit.unwrap().slope + 1.0).abs() < 1e-12);
        assert_eq!(rep.files.len(), rep.h_groups.len() + rep.n_groups.len());
        let body = std::fs::read_to_string(&rep.files[rep.files.len() - 1]).unwrap();
        assert_eq!(body.lines().count(), 5);
    }
}
