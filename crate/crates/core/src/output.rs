//! CSV tables with a commented header, and gnuplot scripts.
//!
//! Floats are written as `{:.12e}` so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

fn render(c: &Cell) -> String {
    match c {
        Cell::Float(x) => format!("{x:.12e}"),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Comment lines written after the rows.
    pub footer: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Full file text: `header` lines as comments, the column line, the rows, the footer.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        for line in &self.footer {
            let _ = writeln!(s, "# {line}");
        }
        s
    }
}

/// Header shared by every output file: tool version and the normalised config.
pub fn header(config_dump: &str) -> String {
    let mut s = format!("roachlab {}\n", env!("CARGO_PKG_VERSION"));
    for line in config_dump.lines() {
        s.push_str(line);
        s.push('\n');
    }
    s
}

/// A file to be written: relative name and contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn csv(name: impl Into<String>, table: &Table, header: &str) -> Self {
        Self {
            name: name.into(),
            contents: table.to_csv(header),
        }
    }
}

/// Writes all artifacts below `dir`, creating it if needed.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Gnuplot script plotting columns of one CSV file against its first listed column.
pub fn gnuplot_script(csv: &str, title: &str, xlabel: &str, x_col: usize, y_cols: &[(usize, &str)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{}'", csv.replace(".csv", ".png"));
    let plots: Vec<String> = y_cols
        .iter()
        .map(|(c, name)| format!("'{csv}' using {x_col}:{c} with lines title '{name}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["n", "x", "label"]);
        t.push(vec![3usize.into(), 0.5.into(), "a".into()]);
        t.footer.push("done".into());
        let text = t.to_csv("line one\nline two");
        assert_eq!(
            text,
            "# line one\n# line two\nn,x,label\n3,5.000000000000e-1,a\n# done\n"
        );
    }

    #[test]
    fn writes_into_a_fresh_directory() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("nested");
        let paths = write_all(
            &target,
            &[Artifact {
                name: "a.csv".into(),
                contents: "x\n".into(),
            }],
        )
        .unwrap();
        assert_eq!(std::fs::read_to_string(&paths[0]).unwrap(), "x\n");
    }

    #[test]
    fn script_names_the_csv() {
        let s = gnuplot_script("series.csv", "mass", "t", 1, &[(2, "mass")]);
        assert!(s.contains("'series.csv' using 1:2"));
        assert!(s.contains("series.png"));
    }
}
