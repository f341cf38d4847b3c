//! JSONL traces, run summaries and atomic file writes.
//!
//! A trace file starts with one header line `{"header": …, "stop_reason": …,
//! "records": k}` followed by `k` lines, one [`IterateRecord`] each. Floats are
//! written in shortest round-trip form, so reading a trace back reproduces
//! every `f64` bit for bit.

use crate::error::{Error, Result};
use crate::fejer_monitor::{IterateRecord, IterateTrace, StopReason, TraceHeader};
use crate::problem::{Overrides, ProblemFile};
use crate::serde_util;
use crate::Vector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: TraceHeader,
    stop_reason: StopReason,
    records: usize,
}

/// Serializes a trace as JSONL.
pub fn trace_to_jsonl(trace: &IterateTrace) -> String {
    let head = HeaderLine { header: trace.header.clone(), stop_reason: trace.stop_reason, records: trace.records.len() };
    let mut out = serde_json::to_string(&head).expect("trace header serializes");
    out.push('\n');
    for r in &trace.records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses a JSONL trace, checking that the header comes first, that the record
/// count matches and that `n` is strictly increasing.
pub fn trace_from_jsonl(text: &str) -> Result<IterateTrace> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::invalid("trace file is empty"))?;
    let head: HeaderLine =
        serde_json::from_str(first).map_err(|e| Error::invalid(format!("trace line 1 is not a header: {e}")))?;
    let mut records: Vec<IterateRecord> = Vec::with_capacity(head.records);
    for (i, line) in lines {
        let r: IterateRecord =
            serde_json::from_str(line).map_err(|e| Error::invalid(format!("trace line {}: {e}", i + 1)))?;
        if let Some(prev) = records.last() {
            if r.n <= prev.n {
                return Err(Error::invalid(format!("trace line {}: n = {} does not increase", i + 1, r.n)));
            }
        }
        records.push(r);
    }
    if records.len() != head.records {
        return Err(Error::invalid(format!("trace header announces {} records, found {}", head.records, records.len())));
    }
    let trace = IterateTrace { header: head.header, records, stop_reason: head.stop_reason };
    trace.validate()?;
    Ok(trace)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// SHA-256 of the compact JSON form of the problem, hex encoded.
pub fn config_hash(p: &ProblemFile) -> String {
    text_hash(&serde_json::to_string(p).expect("problem files serialize"))
}

/// SHA-256 of raw text, hex encoded. Used for files that do not parse.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ValidationFailure,
    NumericFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ValidationFailure => 2,
            RunStatus::NumericFailure => 3,
        }
    }

    pub fn of_error(e: &Error) -> Self {
        if e.is_numeric() {
            RunStatus::NumericFailure
        } else {
            RunStatus::ValidationFailure
        }
    }
}

/// Verdict of the run certificate as stored in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub passed: bool,
    pub violations: usize,
    pub min_slack: f64,
    pub tol: f64,
    /// Where the certificate targets came from.
    pub targets: String,
}

/// The machine-readable outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    pub iterations: usize,
    #[serde(default, with = "serde_util::opt_vector", skip_serializing_if = "Option::is_none")]
    pub final_point: Option<Vector>,
    /// Per-set distances of the final point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config_hash: String,
    pub overrides: Overrides,
    pub threads: usize,
}

impl RunSummary {
    /// A summary for a run that failed before producing a trace.
    pub fn failure(kind: &str, error: &Error, config_hash: String, overrides: Overrides, seed: Option<u64>) -> Self {
        RunSummary {
            schema: crate::problem::SCHEMA_VERSION,
            status: RunStatus::of_error(error),
            diagnostic: Some(error.to_string()),
            kind: kind.into(),
            solver: None,
            stop_reason: None,
            iterations: 0,
            final_point: None,
            residuals: Vec::new(),
            objective: None,
            certificate: None,
            seed,
            config_hash,
            overrides,
            threads: 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn sample() -> IterateTrace {
        let pts = vec![dvector![0.1, 1.0 / 3.0], dvector![f64::MIN_POSITIVE, 2.0f64.sqrt()], dvector![-1e300, 7.0]];
        IterateTrace::from_points(pts, None).unwrap()
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let t = sample();
        let text = trace_to_jsonl(&t);
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"header\""));
        assert_eq!(trace_from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn rejects_out_of_order_and_headless() {
        let t = sample();
        let text = trace_to_jsonl(&t);
        let lines: Vec<&str> = text.lines().collect();
        let swapped = [lines[0], lines[2], lines[1], lines[3]].join("\n");
        assert!(trace_from_jsonl(&swapped).is_err());
        let headless = lines[1..].join("\n");
        assert!(trace_from_jsonl(&headless).is_err());
        let short = lines[..3].join("\n");
        assert!(trace_from_jsonl(&short).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("vmfejer-atomic-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunStatus::of_error(&Error::InvalidInput("x".into())).exit_code(), 2);
        let e = Error::Numeric { message: "m".into(), residual: 1.0 };
        assert_eq!(RunStatus::of_error(&e).exit_code(), 3);
    }
}
