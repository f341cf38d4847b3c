//! Command implementations behind the `vmfejer` binary.
//!
//! Each command returns its process exit code: 0 on success, 2 when an input
//! or a hypothesis is rejected, 3 when the numerics fail. Human-readable
//! progress goes to the supplied writer; machine-readable results go to files.

use std::fs;
use std::io::Write;
use std::path::Path;

use vmfejer::trace_io::{text_hash, CertificateSummary};
use vmfejer::{
    check_quasi_fejer, config_hash, generate, trace_from_jsonl, trace_to_jsonl, write_atomic, EpsSpec, Error,
    GenerateKind, IterateTrace, Overrides, Phi, ProblemFile, RunStatus, RunSummary, Vector,
};

/// Tolerance on negative slack used by `report`.
pub const REPORT_TOL: f64 = 1e-9;

fn write_file(path: &Path, bytes: &[u8], out: &mut dyn Write) -> bool {
    match write_atomic(path, bytes) {
        Ok(()) => true,
        Err(e) => {
            let _ = writeln!(out, "error: cannot write {}: {e}", path.display());
            false
        }
    }
}

fn fail_summary(out_dir: &Path, summary: &RunSummary, out: &mut dyn Write) -> i32 {
    let _ = writeln!(out, "{}: {}", status_name(summary.status), summary.diagnostic.as_deref().unwrap_or(""));
    write_file(&out_dir.join("summary.json"), summary.to_json().as_bytes(), out);
    summary.status.exit_code()
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Ok => "ok",
        RunStatus::ValidationFailure => "validation failure",
        RunStatus::NumericFailure => "numeric failure",
    }
}

fn load_problem(path: &Path, overrides: &Overrides) -> Result<(ProblemFile, String), (Error, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| (Error::InvalidInput(format!("cannot read {}: {e}", path.display())), String::new()))?;
    let mut p = ProblemFile::from_json(&text).map_err(|e| (e, text_hash(&text)))?;
    p.apply_overrides(overrides);
    p.check_shape().map_err(|e| (e, text_hash(&text)))?;
    let hash = config_hash(&p);
    Ok((p, hash))
}

/// Validates, solves and certifies a problem file, writing `trace.jsonl`,
/// `certificate.json` and `summary.json` into `out_dir`.
pub fn cmd_run(problem_path: &Path, out_dir: &Path, overrides: &Overrides, out: &mut dyn Write) -> i32 {
    if let Err(e) = fs::create_dir_all(out_dir) {
        let _ = writeln!(out, "error: cannot create {}: {e}", out_dir.display());
        return RunStatus::ValidationFailure.exit_code();
    }
    let (p, hash) = match load_problem(problem_path, overrides) {
        Ok(v) => v,
        Err((e, hash)) => {
            let s = RunSummary::failure("unknown", &e, hash, overrides.clone(), overrides.seed);
            return fail_summary(out_dir, &s, out);
        }
    };
    let kind = p.kind.name();
    let failed: Vec<String> = p
        .validate_hypotheses()
        .into_iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({})", c.hypothesis, c.detail))
        .collect();
    if !failed.is_empty() {
        let e = Error::Hypothesis(failed.join("; "));
        let s = RunSummary::failure(kind, &e, hash, overrides.clone(), p.seed);
        return fail_summary(out_dir, &s, out);
    }
    let mut trace = match p.run() {
        Ok(t) => t,
        Err(e) => {
            let s = RunSummary::failure(kind, &e, hash, overrides.clone(), p.seed);
            return fail_summary(out_dir, &s, out);
        }
    };
    trace.header.config_hash = Some(hash.clone());
    if !write_file(&out_dir.join("trace.jsonl"), trace_to_jsonl(&trace).as_bytes(), out) {
        return RunStatus::ValidationFailure.exit_code();
    }
    let (cert, source) = match p.certify(&trace) {
        Ok(v) => v,
        Err(e) => {
            let s = RunSummary::failure(kind, &e, hash, overrides.clone(), p.seed);
            return fail_summary(out_dir, &s, out);
        }
    };
    let cert_json = serde_json::to_string_pretty(&cert).expect("certificates serialize");
    if !write_file(&out_dir.join("certificate.json"), cert_json.as_bytes(), out) {
        return RunStatus::ValidationFailure.exit_code();
    }
    let last = trace.records.last().expect("runs produce records");
    let (status, diagnostic) = if cert.passed {
        (RunStatus::Ok, None)
    } else {
        (
            RunStatus::NumericFailure,
            Some(format!(
                "certificate failed: {} violations, min slack {:e}",
                cert.violations.len(),
                cert.min_slack
            )),
        )
    };
    let summary = RunSummary {
        schema: vmfejer::problem::SCHEMA_VERSION,
        status,
        diagnostic,
        kind: kind.into(),
        solver: Some(trace.header.solver.clone()),
        stop_reason: Some(trace.stop_reason),
        iterations: last.n,
        final_point: Some(last.x.clone()),
        residuals: last.residuals.clone(),
        objective: last.objective,
        certificate: Some(CertificateSummary {
            passed: cert.passed,
            violations: cert.violations.len(),
            min_slack: cert.min_slack,
            tol: cert.tol,
            targets: source.into(),
        }),
        seed: p.seed,
        config_hash: hash,
        overrides: overrides.clone(),
        threads: trace.header.threads,
    };
    if !write_file(&out_dir.join("summary.json"), summary.to_json().as_bytes(), out) {
        return RunStatus::ValidationFailure.exit_code();
    }
    let max_res = last.residuals.iter().copied().fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "{}: {} stopped after {} iterations ({:?}), max residual {max_res:e}, certificate {} (min slack {:e})",
        status_name(status),
        trace.header.solver,
        last.n,
        trace.stop_reason,
        if cert.passed { "passed" } else { "failed" },
        cert.min_slack
    );
    status.exit_code()
}

/// Prints the hypothesis table of a problem file.
pub fn cmd_validate(problem_path: &Path, overrides: &Overrides, out: &mut dyn Write) -> i32 {
    let p = match load_problem(problem_path, overrides) {
        Ok((p, _)) => p,
        Err((e, _)) => {
            let _ = writeln!(out, "validation failure: {e}");
            return RunStatus::of_error(&e).exit_code();
        }
    };
    let checks = p.validate_hypotheses();
    let width = checks.iter().map(|c| c.hypothesis.chars().count()).max().unwrap_or(0).max(10);
    let _ = writeln!(out, "{:<width$}  verdict  detail", "hypothesis");
    for c in &checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(out, "{:<width$}  {verdict:<7}  {}", c.hypothesis, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        0
    } else {
        RunStatus::ValidationFailure.exit_code()
    }
}

/// Reads targets from a JSON file holding a vector, a list of vectors, or an
/// object with a `targets` field (problem files and certificates both have one).
pub fn read_targets(path: &Path) -> vmfejer::Result<Vec<Vector>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("targets file: {e}")))?;
    let list = match &value {
        serde_json::Value::Object(m) => {
            m.get("targets").cloned().ok_or_else(|| Error::InvalidInput("targets file has no `targets` field".into()))?
        }
        v => v.clone(),
    };
    let rows: Vec<Vec<f64>> = match serde_json::from_value::<Vec<Vec<f64>>>(list.clone()) {
        Ok(rows) => rows,
        Err(_) => vec![serde_json::from_value::<Vec<f64>>(list)
            .map_err(|e| Error::InvalidInput(format!("targets must be a vector or a list of vectors: {e}")))?],
    };
    if rows.is_empty() {
        return Err(Error::InvalidInput("targets file lists no targets".into()));
    }
    Ok(rows.into_iter().map(Vector::from_vec).collect())
}

/// Options of `report`.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub phi: Phi,
    /// Infer `ε_n` instead of using the logged perturbation envelope.
    pub auto_eps: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { phi: Phi::Abs, auto_eps: false }
    }
}

/// Certifies a stored trace, writing `certificate.json` and `certificate.csv`
/// into `out_dir`. Without targets the final iterate is used.
pub fn cmd_report(
    trace_path: &Path,
    targets_path: Option<&Path>,
    out_dir: &Path,
    opts: &ReportOptions,
    out: &mut dyn Write,
) -> i32 {
    let trace: IterateTrace = match fs::read_to_string(trace_path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", trace_path.display())))
        .and_then(|t| trace_from_jsonl(&t))
    {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(out, "validation failure: {e}");
            return RunStatus::of_error(&e).exit_code();
        }
    };
    let targets = match targets_path {
        Some(p) => match read_targets(p) {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(out, "validation failure: {e}");
                return RunStatus::ValidationFailure.exit_code();
            }
        },
        None => trace.last_point().into_iter().cloned().collect(),
    };
    let eps = if opts.auto_eps { EpsSpec::Auto } else { EpsSpec::Envelope };
    let cert = match check_quasi_fejer(&trace, &targets, trace.schedule().eta_sequence(), opts.phi, &eps, REPORT_TOL) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "{}: {e}", status_name(RunStatus::of_error(&e)));
            return RunStatus::of_error(&e).exit_code();
        }
    };
    if let Err(e) = fs::create_dir_all(out_dir) {
        let _ = writeln!(out, "error: cannot create {}: {e}", out_dir.display());
        return RunStatus::ValidationFailure.exit_code();
    }
    let json = serde_json::to_string_pretty(&cert).expect("certificates serialize");
    if !write_file(&out_dir.join("certificate.json"), json.as_bytes(), out)
        || !write_file(&out_dir.join("certificate.csv"), cert.to_csv().as_bytes(), out)
    {
        return RunStatus::ValidationFailure.exit_code();
    }
    let _ = writeln!(
        out,
        "certificate {}: {} targets, {} steps, {} violations, min slack {:e}",
        if cert.passed { "passed" } else { "failed" },
        cert.targets.len(),
        trace.len() - 1,
        cert.violations.len(),
        cert.min_slack
    );
    if cert.passed {
        0
    } else {
        RunStatus::ValidationFailure.exit_code()
    }
}

/// Writes a seeded synthetic problem file.
pub fn cmd_generate(kind: GenerateKind, dim: usize, seed: u64, out_path: &Path, out: &mut dyn Write) -> i32 {
    let p = match generate(kind, dim, seed) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(out, "validation failure: {e}");
            return RunStatus::of_error(&e).exit_code();
        }
    };
    let mut text = p.to_json();
    text.push('\n');
    if !write_file(out_path, text.as_bytes(), out) {
        return RunStatus::ValidationFailure.exit_code();
    }
    let _ = writeln!(out, "wrote {} ({} problem, dim {dim}, seed {seed})", out_path.display(), p.kind.name());
    0
}
