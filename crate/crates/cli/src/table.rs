//! CSV tables with a fixed byte-level contract: one header row, a fixed
//! column order, LF newlines, floats at 12 significant digits, and a hard
//! refusal to emit non-finite numbers or text that would need quoting.
//! Keeping the writer this rigid makes reruns comparable byte for byte.

use std::fs;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> Result<String, String> {
        match self {
            Cell::Int(v) => Ok(v.to_string()),
            Cell::Float(x) if x.is_finite() => Ok(format!("{x:.11e}")),
            Cell::Float(x) => Err(format!("non-finite value {x}")),
            Cell::Bool(b) => Ok(b.to_string()),
            Cell::Text(s) => {
                if s.bytes().any(|b| matches!(b, b',' | b'"' | b'\n' | b'\r')) {
                    Err(format!("text {s:?} would need quoting"))
                } else {
                    Ok(s.clone())
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<I, S>(columns: I) -> Table
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), CliError> {
        if row.len() != self.columns.len() {
            return Err(CliError::Run(format!(
                "row {} has {} cells for {} columns",
                self.rows.len() + 1,
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Header plus rows; a table without rows renders as the header alone.
    pub fn render(&self) -> Result<String, CliError> {
        let mut out = self.columns.join(",");
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let text = cell.render().map_err(|why| {
                    CliError::Run(format!(
                        "refusing to write column `{}` of row {}: {why}",
                        self.columns[j],
                        i + 1
                    ))
                })?;
                out.push_str(&text);
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = self.render()?;
        fs::write(path, text)
            .map_err(|e| CliError::Run(format!("writing {}: {e}", path.display())))
    }
}
