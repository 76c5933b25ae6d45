//! CSV formats.
//!
//! * measures: header `index,mu,nu`, one row per index; the shorter column is
//!   padded with empty fields. Split files use `index,mu` and `index,nu`.
//! * cost and plan: headerless, `n` rows of `m` comma-separated values.
//!
//! Every float is written with 17 significant digits, which round-trips `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use screenkhorn::{CostMatrix, DiscreteMeasure};

use crate::error::BenchError;

/// Weights may sum to 1 up to this relative error; they are then renormalized.
pub const SIMPLEX_TOLERANCE: f64 = 1e-4;

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn open(path: &Path) -> Result<File, BenchError> {
    File::open(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> BenchError {
    BenchError::Parse {
        path: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

/// Reads weight columns named `names` from a measure file.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header = reader.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("index").chain(names.iter().copied()).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(
            path,
            1,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut columns = vec![Vec::new(); names.len()];
    let mut ended = vec![false; names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record_line(&record, row + 2);
        let index: usize = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, 1, format!("bad index `{}`", &record[0])))?;
        if index != row {
            return Err(parse_err(path, line, 1, format!("expected index {row}, found {index}")));
        }
        for (k, name) in names.iter().enumerate() {
            let field = &record[k + 1];
            let column = k + 2;
            if field.is_empty() {
                ended[k] = true;
                continue;
            }
            if ended[k] {
                return Err(parse_err(path, line, column, format!("value after padding in column `{name}`")));
            }
            let w: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, column, format!("cannot parse `{field}`")))?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(parse_err(path, line, column, format!("weight {w} must be positive")));
            }
            columns[k].push(w);
        }
    }
    for (k, name) in names.iter().enumerate() {
        if columns[k].is_empty() {
            return Err(parse_err(path, 2, k + 2, format!("column `{name}` is empty")));
        }
    }
    Ok(columns)
}

fn to_measure(path: &Path, name: &str, weights: Vec<f64>) -> Result<DiscreteMeasure, BenchError> {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(BenchError::Input(format!(
            "{}: `{name}` weights sum to {total}, expected 1",
            path.display()
        )));
    }
    Ok(DiscreteMeasure::new(Array1::from(weights))?)
}

pub fn read_measures(path: &Path) -> Result<(DiscreteMeasure, DiscreteMeasure), BenchError> {
    let mut cols = read_columns(path, &["mu", "nu"])?;
    let nu = cols.pop().unwrap();
    let mu = cols.pop().unwrap();
    Ok((to_measure(path, "mu", mu)?, to_measure(path, "nu", nu)?))
}

pub fn read_measure(path: &Path, name: &str) -> Result<DiscreteMeasure, BenchError> {
    let w = read_columns(path, &[name])?.pop().unwrap();
    to_measure(path, name, w)
}

pub fn read_cost(path: &Path) -> Result<CostMatrix, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record_line(&record, row + 1);
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(parse_err(
                path,
                line,
                record.len(),
                format!("row has {} columns, expected {}", record.len(), width.unwrap()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let c: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, j + 1, format!("cannot parse `{field}`")))?;
            if !(c >= 0.0 && c.is_finite()) {
                return Err(parse_err(path, line, j + 1, format!("cost {c} must be finite and nonnegative")));
            }
            values.push(c);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| BenchError::Input(format!("{}: empty cost file", path.display())))?;
    let entries = Array2::from_shape_vec((rows, width), values).expect("shape checked per row");
    Ok(CostMatrix::new(entries)?)
}

pub enum MeasureSource<'a> {
    Combined(&'a Path),
    Split { mu: &'a Path, nu: &'a Path },
}

/// Measures and cost, checked for matching dimensions.
pub fn load_problem(
    measures: MeasureSource<'_>,
    cost_path: &Path,
) -> Result<(DiscreteMeasure, DiscreteMeasure, CostMatrix), BenchError> {
    let (mu, nu) = match measures {
        MeasureSource::Combined(p) => read_measures(p)?,
        MeasureSource::Split { mu, nu } => (read_measure(mu, "mu")?, read_measure(nu, "nu")?),
    };
    let cost = read_cost(cost_path)?;
    let (n, m) = cost.dim();
    if (mu.len(), nu.len()) != (n, m) {
        return Err(BenchError::Input(format!(
            "{}: cost is {n}x{m} but measures have lengths ({}, {})",
            cost_path.display(),
            mu.len(),
            nu.len()
        )));
    }
    Ok((mu, nu, cost))
}

pub fn write_matrix(path: &Path, entries: &Array2<f64>) -> Result<(), BenchError> {
    let mut w = create(path)?;
    for row in entries.rows() {
        let line: Vec<String> = row.iter().map(|&x| fmt17(x)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_measures(path: &Path, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(), BenchError> {
    let mut w = create(path)?;
    writeln!(w, "index,mu,nu").map_err(io_err(path))?;
    let cell = |m: &DiscreteMeasure, i: usize| m.weights().get(i).map(|&x| fmt17(x)).unwrap_or_default();
    for i in 0..mu.len().max(nu.len()) {
        writeln!(w, "{i},{},{}", cell(mu, i), cell(nu, i)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
