//! Text formats for masks, constraint matrices and data sets.
//!
//! * Mask: one line per equation, whitespace-separated `0`/`1` tokens;
//!   `#` starts a comment and blank lines are skipped.
//! * Constraint matrix: CSV without a header, one equation per line.
//! * Data: CSV with header `v1,...,vn` and one time sample per line, i.e.
//!   the transpose of the in-memory `n x N` layout.
//!
//! Numbers are written with 17 significant digits so files round-trip
//! exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strucid_core::{Mat, StructureMask};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: strucid_core::Error },
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.into(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| IoError::File { path: path.into(), source })
}

/// Round-trip decimal form of a float.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { path: path.into(), line, msg: msg.into() }
}

/// Parse the mask text format. `path` is only used in error messages.
pub fn parse_mask(text: &str, path: &Path) -> Result<StructureMask> {
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| match tok {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_error(path, idx + 1, format!("expected 0 or 1, found `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(path, idx + 1, format!("expected {} entries, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let refs: Vec<&[bool]> = rows.iter().map(Vec::as_slice).collect();
    StructureMask::from_rows(&refs).map_err(|source| IoError::Model { path: path.into(), source })
}

pub fn read_mask(path: &Path) -> Result<StructureMask> {
    parse_mask(&read(path)?, path)
}

pub fn mask_to_string(mask: &StructureMask) -> String {
    let mut out = String::new();
    for i in 0..mask.rows() {
        let tokens: Vec<&str> = mask.row(i).iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&tokens.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_mask(path: &Path, mask: &StructureMask) -> Result<()> {
    write(path, &mask_to_string(mask))
}

fn parse_number(path: &Path, line: usize, field: &str) -> Result<f64> {
    let field = field.trim();
    let value: f64 = match field {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => field.parse().map_err(|_| parse_error(path, line, format!("not a number: `{field}`")))?,
    };
    if !value.is_finite() {
        return Err(parse_error(path, line, "non-finite value"));
    }
    Ok(value)
}

type Records = (Option<Vec<String>>, Vec<Vec<f64>>);

/// Rows of numeric records. With `header`, the first record is returned
/// separately.
fn read_records(path: &Path, header: bool) -> Result<Records> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.into(), source })?;
    let names = if header {
        let h = reader.headers().map_err(|source| IoError::Csv { path: path.into(), source })?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IoError::Csv { path: path.into(), source })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record.iter().map(|f| parse_number(path, line, f)).collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}

fn rows_to_mat(path: &Path, rows: &[Vec<f64>]) -> Result<Mat> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(parse_error(path, 1, "no numeric rows"));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Read a header-less numeric CSV (a constraint matrix or estimate).
pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let (_, rows) = read_records(path, false)?;
    rows_to_mat(path, &rows)
}

fn csv_lines(a: &Mat, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(names) = header {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for row in a.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, a: &Mat) -> Result<()> {
    write(path, &csv_lines(a, None))
}

/// Read a data CSV into the `n x N` layout used by the estimators.
pub fn read_data_csv(path: &Path) -> Result<Mat> {
    let (names, rows) = read_records(path, true)?;
    let names = names.unwrap_or_default();
    for (j, name) in names.iter().enumerate() {
        if *name != format!("v{}", j + 1) {
            return Err(parse_error(path, 1, format!("header column {} should be `v{}`, found `{name}`", j + 1, j + 1)));
        }
    }
    let samples = rows_to_mat(path, &rows)?;
    if samples.ncols() != names.len() {
        return Err(parse_error(path, 1, "header and data widths differ"));
    }
    Ok(samples.transpose())
}

pub fn data_header(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("v{j}")).collect()
}

/// Write `x` (`n x N`) as a data CSV.
pub fn write_data_csv(path: &Path, x: &Mat) -> Result<()> {
    write(path, &csv_lines(&x.transpose(), Some(&data_header(x.nrows()))))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.into(), source })?;
    let _ = writeln!(text);
    write(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.into(), source })
}

/// `dir/name` unless `name` is absolute.
pub fn resolve(dir: &Path, name: &Path) -> PathBuf {
    if name.is_absolute() { name.to_path_buf() } else { dir.join(name) }
}

/// `data.csv` becomes `data.<suffix>.json` next to it.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.json"))
}
