//! Model files.
//!
//! ```text
//! fusionmf-model 1
//! types <m>
//! ranks <k_0> ... <k_{m-1}>
//! factor <i> <rows> <cols>      followed by `rows` lines
//! core <i> <j> <rows> <cols>    followed by `rows` lines
//! relation_weights <m> <m>      followed by `m` lines
//! view_weights <m> <tau>        followed by `m` lines
//! history <n>                   followed by one line of `n` values (may be empty)
//! ```
//!
//! Values are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::matrix::write_text;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::solver::FactorModel;

pub const MODEL_MAGIC: &str = "fusionmf-model";
pub const MODEL_VERSION: u32 = 1;

fn push_matrix<T: Scalar>(out: &mut String, m: &Matrix<T>) {
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn format_model<T: Scalar>(model: &FactorModel<T>) -> String {
    let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION}\ntypes {}\nranks", model.num_types());
    for k in model.ranks() {
        out.push_str(&format!(" {k}"));
    }
    out.push('\n');
    for (i, g) in model.factors.iter().enumerate() {
        out.push_str(&format!("factor {i} {} {}\n", g.rows(), g.cols()));
        push_matrix(&mut out, g);
    }
    for (&(i, j), s) in &model.cores {
        out.push_str(&format!("core {i} {j} {} {}\n", s.rows(), s.cols()));
        push_matrix(&mut out, s);
    }
    let (wr, wh) = (&model.relation_weights, &model.view_weights);
    out.push_str(&format!("relation_weights {} {}\n", wr.rows(), wr.cols()));
    push_matrix(&mut out, wr);
    out.push_str(&format!("view_weights {} {}\n", wh.rows(), wh.cols()));
    push_matrix(&mut out, wh);
    out.push_str(&format!("history {}\n", model.history.len()));
    let history: Vec<String> = model.history.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
    out.push_str(&history.join(" "));
    out.push('\n');
    out
}

pub fn save_model<T: Scalar>(model: &FactorModel<T>, path: &Path) -> Result<()> {
    write_text(path, &format_model(model))
}

struct Reader<'a> {
    path: &'a str,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Reader<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, l)) => Ok((i + 1, l)),
            None => Err(Error::Parse {
                path: self.path.to_string(),
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    /// Reads `<keyword> <usize>...` and returns the numbers.
    fn keyword(&mut self, keyword: &str, count: usize) -> Result<(usize, Vec<usize>)> {
        let (n, line) = self.next_line(keyword)?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(keyword) {
            return Err(self.err(n, format!("expected '{keyword}', found '{line}'")));
        }
        let nums = toks
            .map(|t| t.parse::<usize>().map_err(|_| self.err(n, format!("invalid integer '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        if nums.len() != count {
            return Err(self.err(n, format!("'{keyword}' expects {count} integers, found {}", nums.len())));
        }
        Ok((n, nums))
    }

    fn values<T: Scalar>(&self, n: usize, line: &str, expected: usize) -> Result<Vec<T>> {
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| self.err(n, format!("invalid number '{t}'")))
            })
            .collect::<Result<Vec<T>>>()?;
        if vals.len() != expected {
            return Err(self.err(n, format!("expected {expected} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> Result<Matrix<T>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, line) = self.next_line("a matrix row")?;
            data.extend(self.values::<T>(n, line, cols)?);
        }
        Matrix::from_vec(rows, cols, data)
    }
}

pub fn parse_model<T: Scalar>(text: &str, path: &str) -> Result<FactorModel<T>> {
    let mut rd = Reader {
        path,
        lines: text.lines().enumerate().peekable(),
    };
    let (n, magic) = rd.next_line("the model header")?;
    let toks: Vec<&str> = magic.split_whitespace().collect();
    match toks[..] {
        [MODEL_MAGIC, v] => {
            if v.parse::<u32>().ok() != Some(MODEL_VERSION) {
                return Err(rd.err(n, format!("unsupported model version {v} (this build reads {MODEL_VERSION})")));
            }
        }
        _ => return Err(rd.err(n, format!("not a model file (expected '{MODEL_MAGIC} {MODEL_VERSION}')"))),
    }
    let (_, m) = rd.keyword("types", 1)?;
    let m = m[0];
    let (ranks_line, ranks) = rd.keyword("ranks", m)?;

    let mut factors = Vec::with_capacity(m);
    for i in 0..m {
        let (n, dims) = rd.keyword("factor", 3)?;
        if dims[0] != i {
            return Err(rd.err(n, format!("expected factor {i}, found factor {}", dims[0])));
        }
        if dims[2] != ranks[i] {
            return Err(rd.err(
                n,
                format!(
                    "factor {i} has {} columns but the rank header (line {ranks_line}) declares rank {}",
                    dims[2], ranks[i]
                ),
            ));
        }
        factors.push(rd.matrix(dims[1], dims[2])?);
    }

    let mut cores = BTreeMap::new();
    while rd.lines.peek().is_some_and(|(_, l)| l.starts_with("core ")) {
        let (n, d) = rd.keyword("core", 4)?;
        let (i, j) = (d[0], d[1]);
        if i >= m || j >= m {
            return Err(rd.err(n, format!("core ({i}, {j}) refers to a type beyond {m}")));
        }
        if (d[2], d[3]) != (ranks[i], ranks[j]) {
            return Err(rd.err(
                n,
                format!(
                    "core ({i}, {j}) is {}x{} but the rank header declares {}x{}",
                    d[2], d[3], ranks[i], ranks[j]
                ),
            ));
        }
        if cores.insert((i, j), rd.matrix(d[2], d[3])?).is_some() {
            return Err(rd.err(n, format!("core ({i}, {j}) appears twice")));
        }
    }

    let (n, d) = rd.keyword("relation_weights", 2)?;
    if d != [m, m] {
        return Err(rd.err(n, format!("relation weights must be {m}x{m}")));
    }
    let relation_weights = rd.matrix(m, m)?;
    let (n, d) = rd.keyword("view_weights", 2)?;
    if d[0] != m {
        return Err(rd.err(n, format!("view weights must have {m} rows")));
    }
    let view_weights = rd.matrix(m, d[1])?;
    let (_, len) = rd.keyword("history", 1)?;
    let history = match rd.lines.next() {
        Some((i, line)) => rd.values(i + 1, line, len[0])?,
        None if len[0] == 0 => Vec::new(),
        None => return Err(rd.err(0, "missing history values")),
    };
    if let Some((i, extra)) = rd.lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(rd.err(i + 1, format!("unexpected trailing content '{extra}'")));
    }
    let model = FactorModel {
        factors,
        cores,
        relation_weights,
        view_weights,
        history,
    };
    model.check_shapes()?;
    Ok(model)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<FactorModel<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}
