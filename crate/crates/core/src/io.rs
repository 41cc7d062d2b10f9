//! Plain-text result files: a `# key = value` header followed by CSV with a
//! header row. Numbers are written with `{:e}`, which round-trips `f64`
//! exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::evolve::EvolutionReport;
use crate::petviashvili::SolveReport;
use crate::spectral::{ComplexField, Grid};

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing header key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

/// Header metadata plus named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, meta: &[(String, String)]) -> Self {
        self.meta.extend_from_slice(meta);
        self
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, IoError> {
        self.get(key).ok_or_else(|| IoError::Missing(key.to_string()))
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once('=').ok_or_else(|| IoError::Parse {
                    line: line_no,
                    msg: "header line without `=`".into(),
                })?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(|c| c.trim().to_string()).collect()),
                Some(cols) => {
                    let row = line
                        .split(',')
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<Result<Vec<f64>, _>>()
                        .map_err(|e| IoError::Parse {
                            line: line_no,
                            msg: e.to_string(),
                        })?;
                    if row.len() != cols.len() {
                        return Err(IoError::Parse {
                            line: line_no,
                            msg: format!("{} cells, header has {}", row.len(), cols.len()),
                        });
                    }
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or_else(|| IoError::Parse {
            line: 0,
            msg: "no column header".into(),
        })?;
        Ok(Self {
            meta,
            columns,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_text()).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Format and tool version lines every file starts with.
pub fn provenance(kind: &str) -> Vec<(String, String)> {
    vec![
        ("format".into(), kind.into()),
        ("format_version".into(), FORMAT_VERSION.to_string()),
        ("tool_version".into(), TOOL_VERSION.into()),
    ]
}

/// Profile samples with columns `x, re, im`.
pub fn snapshot_table(field: &ComplexField, meta: &[(String, String)]) -> Table {
    let grid = field.grid();
    let mut t = Table::new(&["x", "re", "im"]).with_meta(&provenance("snapshot"));
    t.meta("l", format!("{:e}", grid.half_length()));
    t.meta("n", grid.len());
    t.meta.extend_from_slice(meta);
    for (j, z) in field.samples().iter().enumerate() {
        t.push(vec![grid.point(j), z.re, z.im]);
    }
    t
}

/// Rebuilds the grid from the `l` and `n` header keys and checks the `x`
/// column against it.
pub fn field_from_table(t: &Table) -> Result<ComplexField, IoError> {
    let parse = |key: &str| -> Result<f64, IoError> {
        t.require(key)?
            .parse::<f64>()
            .map_err(|e| IoError::Invalid(format!("header `{key}`: {e}")))
    };
    let l = parse("l")?;
    let n = parse("n")? as usize;
    let grid: Arc<Grid> =
        Grid::shared(l, n).map_err(|e| IoError::Invalid(format!("grid: {e}")))?;
    if t.rows.len() != n {
        return Err(IoError::Invalid(format!("{} rows for n = {n}", t.rows.len())));
    }
    let (xs, re, im) = match (t.column("x"), t.column("re"), t.column("im")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(IoError::Invalid("snapshot needs columns x, re, im".into())),
    };
    for (j, x) in xs.iter().enumerate() {
        if (x - grid.point(j)).abs() > 1e-9 * l.max(1.0) {
            return Err(IoError::Invalid(format!("x[{j}] = {x} is off the grid")));
        }
    }
    let samples = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
    ComplexField::new(grid, samples).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn write_snapshot(
    path: &Path,
    field: &ComplexField,
    meta: &[(String, String)],
) -> Result<(), IoError> {
    snapshot_table(field, meta).write(path)
}

pub fn read_snapshot(path: &Path) -> Result<(ComplexField, Table), IoError> {
    let t = Table::read(path)?;
    Ok((field_from_table(&t)?, t))
}

/// `iter, residual, m_nu`.
pub fn solve_report_table(rep: &SolveReport, meta: &[(String, String)]) -> Table {
    let mut t = Table::new(&["iter", "residual", "m_nu"]).with_meta(&provenance("solve_report"));
    t.meta.extend_from_slice(meta);
    t.meta("iterations", rep.iterations);
    t.meta("converged", rep.converged);
    t.meta("cycles", rep.cycles.len());
    t.meta("fallbacks", rep.fallbacks());
    t.meta("amplitude", format!("{:e}", rep.amplitude()));
    for (i, (r, m)) in rep.residual_history.iter().zip(&rep.m_history).enumerate() {
        t.push(vec![i as f64, *r, *m]);
    }
    t
}

/// `t, I1, I2, H, amplitude, peak_x`.
pub fn evolution_table(rep: &EvolutionReport, meta: &[(String, String)]) -> Table {
    let mut t = Table::new(&["t", "I1", "I2", "H", "amplitude", "peak_x"])
        .with_meta(&provenance("evolution"));
    t.meta.extend_from_slice(meta);
    t.meta("max_sweeps", rep.max_sweeps);
    if let Some(speed) = rep.speed() {
        t.meta("speed", format!("{speed:e}"));
    }
    if let Some(e) = &rep.failure {
        t.meta("failure", e);
    }
    for i in 0..rep.t.len() {
        t.push(vec![
            rep.t[i],
            rep.mass[i],
            rep.momentum[i],
            rep.hamiltonian[i],
            rep.amplitude[i],
            rep.peak_x[i],
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("k", "v = w");
        t.push(vec![0.1, -1.0 / 3.0]);
        t.push(vec![f64::MIN_POSITIVE, 1e300]);
        let back = Table::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get("k"), Some("v = w"));
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::shared(8.0, 32).unwrap();
        let f = ComplexField::from_fn(g, |x| Complex64::new(1.0 / x.cosh(), (0.3 * x).sin()));
        let t = snapshot_table(&f, &[("s".into(), "0.75".into())]);
        let back = field_from_table(&Table::parse(&t.to_text()).unwrap()).unwrap();
        assert_eq!(back.samples(), f.samples());
        assert!(back.grid().same_as(f.grid()));
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(Table::parse("# nokey\n"), Err(IoError::Parse { .. })));
        assert!(matches!(Table::parse("a,b\n1,2,3\n"), Err(IoError::Parse { line: 2, .. })));
        assert!(matches!(Table::parse("a\nxyz\n"), Err(IoError::Parse { .. })));
        let t = Table::parse("x,re,im\n0,1,0\n").unwrap();
        assert!(matches!(field_from_table(&t), Err(IoError::Missing(_))));
    }
}
