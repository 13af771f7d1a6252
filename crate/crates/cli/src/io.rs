//! Trace and summary serialization.
//!
//! Traces are CSV, one row per recorded step, with a mandatory header:
//! `n,t,gamma,x_0..,e_0..,r_0..,h_0..,P_0..`. Reals are written as the
//! shortest decimal that round-trips, so re-reading a trace reproduces the
//! in-memory records bit for bit. Summaries and reports are JSON.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use projsa::engine::{IterateRecord, Trajectory};

use crate::CliError;

fn fmt_f64(v: f64, out: &mut String) -> Result<(), CliError> {
    if !v.is_finite() {
        return Err(CliError::Runtime(format!("non-finite value {v} in trace")));
    }
    use std::fmt::Write as _;
    // `{}` prints the shortest uniquely-identifying decimal for f64
    write!(out, "{v}").expect("string write");
    Ok(())
}

fn header(dim: usize) -> String {
    let mut cols: Vec<String> = vec!["n".into(), "t".into(), "gamma".into()];
    for prefix in ["x", "e", "r", "h", "P"] {
        for i in 0..dim {
            cols.push(format!("{prefix}_{i}"));
        }
    }
    cols.join(",")
}

/// Writes one trajectory as a CSV trace file.
pub fn write_trace(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let dim = traj.meta.dim;
    writeln!(w, "{}", header(dim)).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut line = String::with_capacity(64);
    for rec in &traj.records {
        line.clear();
        use std::fmt::Write as _;
        write!(line, "{}", rec.n).expect("string write");
        line.push(',');
        fmt_f64(rec.t, &mut line)?;
        line.push(',');
        fmt_f64(rec.gamma, &mut line)?;
        for field in [&rec.x, &rec.e, &rec.r, &rec.hval, &rec.proj] {
            for v in field.iter() {
                line.push(',');
                fmt_f64(*v, &mut line)?;
            }
        }
        writeln!(w, "{line}").map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Reads a CSV trace back into records. The header determines the dimension
/// and is validated against the expected column layout.
pub fn read_trace(path: &Path) -> Result<Vec<IterateRecord>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot open trace {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let head = lines
        .next()
        .ok_or_else(|| CliError::Validation("trace is empty (missing header)".into()))?
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let cols: Vec<&str> = head.trim_end().split(',').collect();
    if cols.len() < 8 || (cols.len() - 3) % 5 != 0 {
        return Err(CliError::Validation(format!(
            "trace header has {} columns, expected 3 + 5*dim",
            cols.len()
        )));
    }
    let dim = (cols.len() - 3) / 5;
    if head.trim_end() != header(dim) {
        return Err(CliError::Validation("trace header does not match the expected layout".into()));
    }

    let parse = |tok: &str, line_no: usize| -> Result<f64, CliError> {
        tok.parse::<f64>().map_err(|_| {
            CliError::Validation(format!("trace line {line_no}: bad real value {tok:?}"))
        })
    };
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.trim_end().split(',').collect();
        if toks.len() != 3 + 5 * dim {
            return Err(CliError::Validation(format!(
                "trace line {}: {} fields, expected {}",
                i + 2,
                toks.len(),
                3 + 5 * dim
            )));
        }
        let n: u64 = toks[0]
            .parse()
            .map_err(|_| CliError::Validation(format!("trace line {}: bad step index", i + 2)))?;
        let t = parse(toks[1], i + 2)?;
        let gamma = parse(toks[2], i + 2)?;
        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(5);
        for f in 0..5 {
            let base = 3 + f * dim;
            let mut v = Vec::with_capacity(dim);
            for k in 0..dim {
                v.push(parse(toks[base + k], i + 2)?);
            }
            fields.push(v);
        }
        let proj = fields.pop().unwrap();
        let hval = fields.pop().unwrap();
        let r = fields.pop().unwrap();
        let e = fields.pop().unwrap();
        let x = fields.pop().unwrap();
        records.push(IterateRecord { n, t, gamma, x, e, r, hval, proj });
    }
    Ok(records)
}

/// Writes a pretty-printed JSON document (deterministic field order).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// SHA-256 of the raw config bytes, hex-encoded; recorded in every summary.
pub fn content_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        write!(out, "{b:02x}").expect("string write");
    }
    out
}
