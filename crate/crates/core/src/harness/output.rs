//! CSV records and the run manifest.

use std::fmt::Write as _;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{EstimateRecord, RecordStatus};

pub const CSV_COLUMNS: [&str; 16] = [
    "model",
    "d",
    "n",
    "grid_m",
    "t",
    "h",
    "eps",
    "delta",
    "reg_n",
    "replicas",
    "q_hat",
    "q_se",
    "mobility_ref",
    "abs_error",
    "seed",
    "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// Field values of one record in column order.
pub fn record_fields(r: &EstimateRecord) -> [String; 16] {
    [
        r.model.clone(),
        r.d.to_string(),
        opt(r.n),
        opt(r.grid_m),
        num(r.t),
        num(r.h),
        opt(r.eps),
        opt(r.delta),
        opt(r.reg_n),
        r.replicas.to_string(),
        num(r.q_hat),
        num(r.q_se),
        num(r.mobility_ref),
        num(r.abs_error),
        r.seed.to_string(),
        r.status.to_string(),
    ]
}

/// Writes the header and one row per record.
pub fn write_csv<W: Write>(out: W, records: &[EstimateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Renders records to CSV text.
pub fn render_csv(records: &[EstimateRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// SHA-256 of the rendered CSV row (without line terminator).
pub fn record_checksum(r: &EstimateRecord) -> String {
    let line = record_fields(r).join(",");
    let digest = Sha256::digest(line.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Reads records back. Missing columns are reported by name; the abort
/// count is not stored in the CSV and reads as 0.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<EstimateRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 16];
    for (slot, col) in idx.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::Schema(col.to_string()))?;
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad = |i: usize| Error::InvalidArgument(format!("row {}: cannot parse `{}` = `{}`", row + 1, CSV_COLUMNS[i], field(i)));
        let req_f = |i: usize| -> Result<f64> {
            let s = field(i);
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| bad(i))
            }
        };
        let opt_f = |i: usize| -> Result<Option<f64>> {
            let s = field(i);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(i))
            }
        };
        let opt_u = |i: usize| -> Result<Option<usize>> {
            let s = field(i);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(i))
            }
        };
        out.push(EstimateRecord {
            model: field(0).to_string(),
            d: field(1).parse().map_err(|_| bad(1))?,
            n: opt_u(2)?,
            grid_m: opt_u(3)?,
            t: req_f(4)?,
            h: req_f(5)?,
            eps: opt_f(6)?,
            delta: opt_f(7)?,
            reg_n: opt_u(8)?,
            replicas: field(9).parse().map_err(|_| bad(9))?,
            q_hat: req_f(10)?,
            q_se: req_f(11)?,
            mobility_ref: req_f(12)?,
            abs_error: req_f(13)?,
            seed: field(14).parse().map_err(|_| bad(14))?,
            status: RecordStatus::parse(field(15)).ok_or_else(|| bad(15))?,
            aborted: 0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordSummary {
    pub checksum: String,
    pub ok: usize,
    pub aborted: usize,
}

/// Provenance of one run: config echo, tool version, timing, checksums.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub wall_clock_s: f64,
    pub config: Vec<(String, String)>,
    pub records: Vec<RecordSummary>,
}

impl RunManifest {
    pub fn new(config: Vec<(String, String)>, records: &[EstimateRecord], wall_clock_s: f64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s,
            config,
            records: records
                .iter()
                .map(|r| RecordSummary {
                    checksum: record_checksum(r),
                    ok: r.ok_replicas(),
                    aborted: r.aborted,
                })
                .collect(),
        }
    }

    pub fn replicas_ok(&self) -> usize {
        self.records.iter().map(|r| r.ok).sum()
    }

    pub fn replicas_aborted(&self) -> usize {
        self.records.iter().map(|r| r.aborted).sum()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool_version = {}", self.tool_version);
        let _ = writeln!(s, "wall_clock_s = {}", self.wall_clock_s);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        let _ = writeln!(s, "records = {}", self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(s, "record.{i}.sha256 = {}", r.checksum);
            let _ = writeln!(s, "record.{i}.ok = {}", r.ok);
            let _ = writeln!(s, "record.{i}.aborted = {}", r.aborted);
        }
        let _ = writeln!(s, "replicas_ok = {}", self.replicas_ok());
        let _ = writeln!(s, "replicas_aborted = {}", self.replicas_aborted());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, key: &str, message: &str| Error::Config {
            key: key.to_string(),
            line,
            message: message.to_string(),
        };
        let mut tool_version = None;
        let mut wall = None;
        let mut config = Vec::new();
        let mut count = None;
        let mut records: Vec<RecordSummary> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(ln, line, "expected `key = value`"))?;
            let num = |v: &str| v.parse::<usize>().map_err(|_| bad(ln, k, "expected an integer"));
            if let Some(ck) = k.strip_prefix("config.") {
                config.push((ck.to_string(), v.to_string()));
            } else if let Some(rest) = k.strip_prefix("record.") {
                let (idx, field) = rest.split_once('.').ok_or_else(|| bad(ln, k, "malformed record key"))?;
                let idx = num(idx)?;
                if idx == records.len() {
                    records.push(RecordSummary {
                        checksum: String::new(),
                        ok: 0,
                        aborted: 0,
                    });
                } else if idx + 1 != records.len() {
                    return Err(bad(ln, k, "record keys out of order"));
                }
                let r = records.last_mut().expect("pushed above");
                match field {
                    "sha256" => r.checksum = v.to_string(),
                    "ok" => r.ok = num(v)?,
                    "aborted" => r.aborted = num(v)?,
                    _ => return Err(bad(ln, k, "unknown record field")),
                }
            } else {
                match k {
                    "tool_version" => tool_version = Some(v.to_string()),
                    "wall_clock_s" => wall = Some(v.parse::<f64>().map_err(|_| bad(ln, k, "expected a number"))?),
                    "records" => count = Some(num(v)?),
                    "replicas_ok" | "replicas_aborted" => {}
                    _ => return Err(bad(ln, k, "unknown manifest key")),
                }
            }
        }
        if count != Some(records.len()) {
            return Err(bad(0, "records", "record count does not match entries"));
        }
        Ok(Self {
            tool_version: tool_version.ok_or_else(|| bad(0, "tool_version", "missing"))?,
            wall_clock_s: wall.ok_or_else(|| bad(0, "wall_clock_s", "missing"))?,
            config,
            records,
        })
    }
}
