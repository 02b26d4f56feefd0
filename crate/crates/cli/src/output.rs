use std::io::Write;

use serde_json::Value;

use crate::{CliError, CommonArgs, Format};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.12e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// One command result in both serialisations; CSV is absent for
/// results that are not tabular.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub json: Value,
    pub csv: Option<Table>,
}

impl Artifact {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json)
                    .map_err(|e| CliError::Numerical(format!("serialisation failed: {e}")))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => self
                .csv
                .as_ref()
                .map(Table::render)
                .ok_or_else(|| CliError::Validation("this command has no CSV form".into())),
        }
    }
}

pub fn write(artifact: &Artifact, common: &CommonArgs) -> Result<(), CliError> {
    let text = artifact.render(common.format)?;
    match &common.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Validation(format!("cannot write to stdout: {e}"))),
    }
}

/// `[re, im]` pairs; NaN becomes `null`.
pub fn complex_list<'a>(values: impl Iterator<Item = &'a cylspace::C64>) -> Value {
    Value::Array(values.map(|z| serde_json::json!([z.re, z.im])).collect())
}
