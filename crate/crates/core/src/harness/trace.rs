//! Per-iteration run trace and its CSV form.
//!
//! The file starts with a `# bpgrad-trace v1` comment line (optionally followed
//! by `key=value` metadata), then a header row and one row per iteration.
//! Floats are written in Rust's shortest round-trip form so a parsed trace is
//! bit-identical to the one that was written.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_MAGIC: &str = "# bpgrad-trace v1";
pub const TRACE_COLUMNS: [&str; 10] =
    ["iter", "phase", "rho", "f", "running_min", "eta", "lhs", "rhs", "satisfied", "wall_ms"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub phase: usize,
    pub rho: f64,
    pub f: f64,
    pub running_min: f64,
    pub eta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// Informational; excluded from determinism comparisons.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Iterations per training epoch; `None` for global-optimization runs.
    pub iters_per_epoch: Option<usize>,
}

impl RunTrace {
    pub fn new(iters_per_epoch: Option<usize>) -> Self {
        Self { rows: Vec::new(), iters_per_epoch }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Zeroes the wall-clock column.
    pub fn strip_timing(&mut self) {
        for r in &mut self.rows {
            r.wall_ms = 0.0;
        }
    }

    /// Checks `iter` strictly increasing and `rho` nondecreasing.
    pub fn validate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if w[1].iter <= w[0].iter {
                return Err(Error::InvalidState(format!(
                    "trace iter not increasing: {} then {}",
                    w[0].iter, w[1].iter
                )));
            }
            if w[1].rho < w[0].rho {
                return Err(Error::InvalidState(format!(
                    "trace rho decreased at iter {}: {} -> {}",
                    w[1].iter, w[0].rho, w[1].rho
                )));
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let pick: fn(&TraceRow) -> f64 = match name {
            "iter" => |r| r.iter as f64,
            "phase" => |r| r.phase as f64,
            "rho" => |r| r.rho,
            "f" => |r| r.f,
            "running_min" => |r| r.running_min,
            "eta" => |r| r.eta,
            "lhs" => |r| r.lhs,
            "rhs" => |r| r.rhs,
            "satisfied" => |r| if r.satisfied { 1.0 } else { 0.0 },
            "wall_ms" => |r| r.wall_ms,
            _ => return None,
        };
        Some(self.rows.iter().map(pick).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TRACE_MAGIC);
        if let Some(n) = self.iters_per_epoch {
            let _ = write!(out, " iters_per_epoch={n}");
        }
        out.push('\n');
        out.push_str(&TRACE_COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.phase,
                r.rho,
                r.f,
                r.running_min,
                r.eta,
                r.lhs,
                r.rhs,
                r.satisfied,
                r.wall_ms
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_csv_string().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file), path)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes(), Path::new("<memory>"))
    }

    fn from_reader<R: BufRead>(mut reader: R, path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Format { path: path.to_path_buf(), detail };
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let first = first.trim_end();
        let meta = first
            .strip_prefix(TRACE_MAGIC)
            .ok_or_else(|| bad(format!("missing `{TRACE_MAGIC}` header, found {first:?}")))?;
        let mut iters_per_epoch = None;
        for kv in meta.split_whitespace() {
            if let Some(v) = kv.strip_prefix("iters_per_epoch=") {
                iters_per_epoch =
                    Some(v.parse().map_err(|_| bad(format!("bad iters_per_epoch {v:?}")))?);
            }
        }

        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != TRACE_COLUMNS {
            return Err(bad(format!("unexpected columns {header:?}")));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| {
                    bad(format!("row {}: column {} is not a number: {:?}", line + 1, TRACE_COLUMNS[i], &rec[i]))
                })
            };
            let int = |i: usize| -> Result<usize> {
                rec[i].parse::<usize>().map_err(|_| {
                    bad(format!("row {}: column {} is not an integer: {:?}", line + 1, TRACE_COLUMNS[i], &rec[i]))
                })
            };
            let satisfied = match &rec[8] {
                "true" => true,
                "false" => false,
                other => return Err(bad(format!("row {}: bad boolean {other:?}", line + 1))),
            };
            rows.push(TraceRow {
                iter: int(0)?,
                phase: int(1)?,
                rho: num(2)?,
                f: num(3)?,
                running_min: num(4)?,
                eta: num(5)?,
                lhs: num(6)?,
                rhs: num(7)?,
                satisfied,
                wall_ms: num(9)?,
            });
        }
        Ok(Self { rows, iters_per_epoch })
    }
}
