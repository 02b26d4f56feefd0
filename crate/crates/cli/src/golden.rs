use std::path::Path;

use clap::Parser;
use serde_json::Value;

use crate::output::{Artifact, Cell};
use crate::{commands, common_of, Cli, CliError, Format};

const MAX_REPORTED: usize = 20;
const CSV_REL_TOL: f64 = 1e-10;

/// Name and arguments of every golden; the format comes from `--format`.
pub const GOLDENS: &[(&str, &[&str])] = &[
    ("moments_fig1", &["moments", "--n", "0", "--alpha", "0", "--kappa", "1.292"]),
    ("moments_fractional", &["moments", "--n", "-2", "--delta", "0.4", "--alpha", "1.1", "--kappa", "3.5", "--l-top", "4"]),
    ("bound_curve", &["bound-curve", "--kappa-s-min", "0.05", "--kappa-s-max", "6", "--points", "40", "--format", "csv"]),
    ("bound_curve_log", &["bound-curve", "--kappa-s-min", "0.1", "--kappa-s-max", "50", "--points", "12", "--spacing", "log"]),
    ("kappa_match", &["kappa-match", "--kappa-s", "1.146"]),
    ("kappa_match_forward", &["kappa-match", "--kappa-a", "1.632", "--format", "csv"]),
    ("teleport", &["teleport", "--n", "1", "--delta-in", "0.3", "--alpha", "0.5", "--kappa", "1.2", "--delta-a", "0.6", "--delta-b", "0.8", "--half-width", "30", "--samples", "6", "--psi-grid", "64", "--seed", "17"]),
    ("teleport_csv", &["teleport", "--kappa", "2.0", "--half-width", "30", "--samples", "4", "--psi-grid", "32", "--seed", "3", "--format", "csv"]),
    ("wigner_char", &["phasespace", "--kind", "wigner-char", "--kappa", "0.8", "--component", "0.5:0:0", "--component", "0.5:0:3.141592653589793", "--window", "16", "--l-max", "6", "--grid", "16"]),
    ("p_char", &["phasespace", "--kind", "p-char", "--kappa", "0.8", "--component", "1:1:0.4", "--window", "16", "--l-max", "4", "--grid", "16"]),
    ("q", &["phasespace", "--kind", "q", "--kappa", "1.0", "--window", "10", "--grid", "64", "--n-half-width", "8", "--format", "csv"]),
    ("kernel", &["phasespace", "--kind", "kernel", "--kappa", "1.0", "--grid", "16", "--n-half-width", "6"]),
];

fn produce(args: &[&str], perturb: f64) -> Result<(String, Format), CliError> {
    let cli = Cli::try_parse_from(std::iter::once("cylspace").chain(args.iter().copied()))
        .map_err(|e| CliError::Validation(format!("golden arguments {args:?}: {e}")))?;
    let format = common_of(&cli.command).format;
    let mut artifact = commands::dispatch(&cli.command)?;
    if perturb != 0.0 {
        perturb_artifact(&mut artifact, perturb);
    }
    Ok((artifact.render(format)?, format))
}

fn file_name(name: &str, format: Format) -> String {
    match format {
        Format::Json => format!("{name}.json"),
        Format::Csv => format!("{name}.csv"),
    }
}

pub fn generate(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    let mut manifest = serde_json::Map::new();
    for (name, args) in GOLDENS {
        let (text, format) = produce(args, 0.0)?;
        let file = file_name(name, format);
        std::fs::write(dir.join(&file), text)
            .map_err(|e| CliError::Validation(format!("cannot write {file}: {e}")))?;
        manifest.insert(file, Value::Array(args.iter().map(|a| Value::String(a.to_string())).collect()));
    }
    let text = serde_json::to_string_pretty(&Value::Object(manifest)).expect("manifest serialises") + "\n";
    std::fs::write(dir.join("manifest.json"), text)
        .map_err(|e| CliError::Validation(format!("cannot write manifest: {e}")))?;
    Ok(())
}

/// Mismatch lines, at most [`MAX_REPORTED`] of them; empty when everything agrees.
pub fn check(dir: &Path, perturb: f64) -> Result<Vec<String>, CliError> {
    let mut report = Vec::new();
    for (name, args) in GOLDENS {
        let (fresh, format) = produce(args, perturb)?;
        let file = file_name(name, format);
        let stored = match std::fs::read_to_string(dir.join(&file)) {
            Ok(s) => s,
            Err(e) => {
                report.push(format!("{file}: cannot read golden ({e})"));
                continue;
            }
        };
        match format {
            Format::Json => compare_json(&file, &stored, &fresh, &mut report),
            Format::Csv => compare_csv(&file, &stored, &fresh, &mut report),
        }
        if report.len() >= MAX_REPORTED {
            break;
        }
    }
    report.truncate(MAX_REPORTED);
    Ok(report)
}

/// Numbers rewritten with 15 significant digits.
pub fn canonical(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(format!("{:.14e}", n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), canonical(v))).collect()),
        other => other.clone(),
    }
}

fn diff_paths(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    if out.len() >= MAX_REPORTED {
        return;
    }
    match (a, b) {
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                diff_paths(&format!("{path}[{i}]"), p, q, out);
            }
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() && x.keys().eq(y.keys()) => {
            for (k, p) in x {
                diff_paths(&format!("{path}.{k}"), p, &y[k], out);
            }
        }
        _ if a != b => out.push(format!("{path}: golden {a} vs current {b}")),
        _ => {}
    }
}

fn compare_json(file: &str, stored: &str, fresh: &str, report: &mut Vec<String>) {
    let parse = |s: &str| serde_json::from_str::<Value>(s).map(|v| canonical(&v));
    match (parse(stored), parse(fresh)) {
        (Ok(a), Ok(b)) => {
            let (sa, sb) = (serde_json::to_string(&a).unwrap_or_default(), serde_json::to_string(&b).unwrap_or_default());
            if sa != sb {
                diff_paths(file, &a, &b, report);
            }
        }
        (Err(e), _) | (_, Err(e)) => report.push(format!("{file}: unreadable JSON ({e})")),
    }
}

fn cells_agree(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) if x.is_nan() || y.is_nan() => x.is_nan() && y.is_nan(),
        (Ok(x), Ok(y)) => x == y || (x - y).abs() <= CSV_REL_TOL * x.abs().max(y.abs()),
        _ => a == b,
    }
}

fn compare_csv(file: &str, stored: &str, fresh: &str, report: &mut Vec<String>) {
    let (a, b): (Vec<&str>, Vec<&str>) = (stored.lines().collect(), fresh.lines().collect());
    if a.len() != b.len() {
        report.push(format!("{file}: {} lines in golden, {} now", a.len(), b.len()));
        return;
    }
    for (row, (la, lb)) in a.iter().zip(&b).enumerate() {
        let (ca, cb): (Vec<&str>, Vec<&str>) = (la.split(',').collect(), lb.split(',').collect());
        if ca.len() != cb.len() {
            report.push(format!("{file}:{}: {} cells in golden, {} now", row + 1, ca.len(), cb.len()));
            continue;
        }
        for (col, (x, y)) in ca.iter().zip(&cb).enumerate() {
            if !cells_agree(x, y) {
                report.push(format!("{file}:{}:{}: golden {x} vs current {y}", row + 1, col + 1));
                if report.len() >= MAX_REPORTED {
                    return;
                }
            }
        }
    }
}

fn perturb_value(v: &mut Value, rel: f64) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::json!(x * (1.0 + rel));
            }
        }
        Value::Array(a) => a.iter_mut().for_each(|x| perturb_value(x, rel)),
        Value::Object(o) => o.values_mut().for_each(|x| perturb_value(x, rel)),
        _ => {}
    }
}

fn perturb_artifact(a: &mut Artifact, rel: f64) {
    perturb_value(&mut a.json, rel);
    if let Some(t) = a.csv.as_mut() {
        for row in &mut t.rows {
            for c in row.iter_mut() {
                if let Cell::Float(x) = c {
                    *x *= 1.0 + rel;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_rounds_to_fifteen_digits() {
        let a = canonical(&serde_json::json!({"x": 0.1 + 0.2, "n": 3}));
        let b = canonical(&serde_json::json!({"x": 0.3, "n": 3}));
        assert_eq!(a, b);
        let c = canonical(&serde_json::json!({"x": 0.30000000000001}));
        assert_ne!(b, c);
    }

    #[test]
    fn csv_cells_use_relative_tolerance() {
        assert!(!cells_agree("1.000000000000e0", "1.000000001000e0"));
        assert!(cells_agree("1.000000000000e0", "1.0000000000001e0"));
        assert!(cells_agree("NaN", "NaN"));
        assert!(cells_agree("kappa_s", "kappa_s"));
    }
}
