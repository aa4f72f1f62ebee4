//! Plain-text matrix files.
//!
//! ```text
//! # <rows> <cols> dense|sparse
//! ```
//!
//! followed by `rows` lines of `cols` whitespace-separated values (dense), or
//! by `row col value` lines with 0-based indices (sparse; absent entries are
//! zero). Blank lines and further `#` lines are ignored. Numbers use a dot as
//! decimal separator.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{Block, Mask, Matrix, SparseMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Dense,
    Sparse,
}

impl MatrixFormat {
    pub fn name(self) -> &'static str {
        match self {
            MatrixFormat::Dense => "dense",
            MatrixFormat::Sparse => "sparse",
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(MatrixFormat::Dense),
            "sparse" => Ok(MatrixFormat::Sparse),
            other => Err(Error::Format(format!("unknown matrix format '{other}'"))),
        }
    }
}

/// What values a file may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueDomain {
    /// Nonnegative (relations).
    Nonnegative,
    /// Any finite value (views).
    Signed,
    /// 0 or 1 (masks).
    Binary,
}

/// A parsed matrix file.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile<T> {
    pub format: MatrixFormat,
    pub block: Block<T>,
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_value<T: Scalar>(tok: &str, path: &str, line: usize, domain: ValueDomain) -> Result<T> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value '{tok}'")));
    }
    match domain {
        ValueDomain::Nonnegative if v < 0.0 => {
            return Err(parse_err(path, line, format!("negative value {tok} in a relation file")));
        }
        ValueDomain::Binary if v != 0.0 && v != 1.0 => {
            return Err(parse_err(path, line, format!("mask value {tok} is not 0 or 1")));
        }
        _ => {}
    }
    Ok(T::lit(v))
}

fn parse_index(tok: &str, bound: usize, what: &str, path: &str, line: usize) -> Result<usize> {
    let i: usize = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} index '{tok}'")))?;
    if i >= bound {
        return Err(parse_err(path, line, format!("{what} index {i} out of range 0..{bound}")));
    }
    Ok(i)
}

/// Parses matrix text; `path` is only used in messages.
pub fn parse_matrix<T: Scalar>(text: &str, path: &str, domain: ValueDomain) -> Result<MatrixFile<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let fields: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, header_line, "expected header '# rows cols format'"))?
        .split_whitespace()
        .collect();
    let [rows, cols, format] = fields[..] else {
        return Err(parse_err(path, header_line, "expected header '# rows cols format'"));
    };
    let rows: usize = rows
        .parse()
        .map_err(|_| parse_err(path, header_line, format!("invalid row count '{rows}'")))?;
    let cols: usize = cols
        .parse()
        .map_err(|_| parse_err(path, header_line, format!("invalid column count '{cols}'")))?;
    let format: MatrixFormat = format
        .parse()
        .map_err(|e: Error| parse_err(path, header_line, e.to_string()))?;
    let body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let block = match format {
        MatrixFormat::Dense => {
            let mut data = Vec::with_capacity(rows * cols);
            let mut seen_rows = 0;
            for (n, line) in body {
                if seen_rows == rows {
                    return Err(parse_err(path, n, format!("more than {rows} rows")));
                }
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(parse_value(tok, path, n, domain)?);
                }
                if data.len() - before != cols {
                    return Err(parse_err(
                        path,
                        n,
                        format!("expected {cols} values, found {}", data.len() - before),
                    ));
                }
                seen_rows += 1;
            }
            if seen_rows != rows {
                return Err(parse_err(
                    path,
                    text.lines().count().max(1),
                    format!("expected {rows} rows, found {seen_rows}"),
                ));
            }
            Block::Dense(Matrix::from_vec(rows, cols, data)?)
        }
        MatrixFormat::Sparse => {
            let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();
            let mut entries = Vec::new();
            for (n, line) in body {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let [r, c, v] = toks[..] else {
                    return Err(parse_err(path, n, "expected 'row col value'"));
                };
                let r = parse_index(r, rows, "row", path, n)?;
                let c = parse_index(c, cols, "column", path, n)?;
                let v: T = parse_value(v, path, n, domain)?;
                if let Some(prev) = first_seen.insert((r, c), n) {
                    return Err(parse_err(
                        path,
                        n,
                        format!("duplicate entry ({r}, {c}) on lines {prev} and {n}"),
                    ));
                }
                entries.push((r, c, v));
            }
            Block::auto(SparseMatrix::from_triplets(rows, cols, entries)?)
        }
    };
    Ok(MatrixFile { format, block })
}

pub fn read_matrix<T: Scalar>(path: &Path, domain: ValueDomain) -> Result<MatrixFile<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, &path.display().to_string(), domain)
}

/// Reads a 0/1 mask file.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let file: MatrixFile<f64> = read_matrix(path, ValueDomain::Binary)?;
    let dense = file.block.dense();
    Ok(Mask::from_fn(dense.rows(), dense.cols(), |r, c| dense[(r, c)] == 1.0))
}

/// Shortest text that parses back to the same value.
pub(crate) fn format_value<T: Scalar>(v: T) -> String {
    format!("{v:e}")
}

pub fn format_matrix<T: Scalar>(block: &Block<T>, format: MatrixFormat) -> String {
    let (rows, cols) = block.shape();
    let mut out = format!("# {rows} {cols} {}\n", format.name());
    match format {
        MatrixFormat::Dense => {
            let dense = block.dense();
            for r in 0..rows {
                let line: Vec<String> = dense.row(r).iter().map(|&v| format_value(v)).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        MatrixFormat::Sparse => {
            block.for_each_nonzero(|r, c, v| {
                let _ = writeln!(out, "{r} {c} {}", format_value(v));
            });
        }
    }
    out
}

pub fn format_mask(mask: &Mask) -> String {
    let mut out = format!("# {} {} dense\n", mask.rows(), mask.cols());
    for r in 0..mask.rows() {
        let line: Vec<&str> = (0..mask.cols()).map(|c| if mask.get(r, c) { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_matrix<T: Scalar>(path: &Path, block: &Block<T>, format: MatrixFormat) -> Result<()> {
    write_text(path, &format_matrix(block, format))
}
