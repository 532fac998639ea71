//! Deterministic CSV emission for sweep and bound rows.
//!
//! Reals are rendered with 17 significant digits so files round-trip
//! bit-exactly; reruns of the same config produce byte-identical output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::sweep::{BoundRow, SweepResult, SweepRow};

pub const SWEEP_HEADER: &str = "design,gamma,K,n,p,replicate,estimator,risk,excess_vs_oracle,excess_vs_star,null_risk,interp_residual,coef_norm_sq,converged";
pub const BOUNDS_HEADER: &str = "gamma,K,n,p,bound_name,value,conditions_json";

/// 17-significant-digit rendering; round-trips through f64 parsing.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_real(s: &str) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad real '{s}': {e}"))),
    }
}

fn quote_csv(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.into()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    file.write_all(contents.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn render_sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.design,
            fmt_real(r.gamma),
            r.k,
            r.n,
            r.p,
            r.replicate,
            r.estimator,
            fmt_real(r.risk),
            fmt_real(r.excess_vs_oracle),
            fmt_real(r.excess_vs_star),
            fmt_real(r.null_risk),
            fmt_real(r.interp_residual),
            fmt_real(r.coef_norm_sq),
            r.converged
        ));
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_file(path, &render_sweep_csv(result))
}

pub fn render_bounds_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from(BOUNDS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_real(r.gamma),
            r.k,
            r.n,
            r.p,
            r.bound_name,
            fmt_real(r.value),
            quote_csv(&r.conditions_json)
        ));
    }
    out
}

pub fn emit_bounds_csv(rows: &[BoundRow], path: &Path) -> Result<()> {
    write_file(path, &render_bounds_csv(rows))
}

/// Parses a sweep CSV back into rows (the inverse of [`emit_csv`]).
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "unexpected sweep header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(Error::Config(format!(
                "row {} has {} fields, expected 14",
                idx + 2,
                f.len()
            )));
        }
        rows.push(SweepRow {
            design: f[0].into(),
            gamma: parse_real(f[1])?,
            k: f[2].parse().map_err(|e| Error::Config(format!("{e}")))?,
            n: f[3].parse().map_err(|e| Error::Config(format!("{e}")))?,
            p: f[4].parse().map_err(|e| Error::Config(format!("{e}")))?,
            replicate: f[5].parse().map_err(|e| Error::Config(format!("{e}")))?,
            estimator: f[6].into(),
            risk: parse_real(f[7])?,
            excess_vs_oracle: parse_real(f[8])?,
            excess_vs_star: parse_real(f[9])?,
            null_risk: parse_real(f[10])?,
            interp_residual: parse_real(f[11])?,
            coef_norm_sq: parse_real(f[12])?,
            converged: f[13] == "true",
        });
    }
    Ok(rows)
}
