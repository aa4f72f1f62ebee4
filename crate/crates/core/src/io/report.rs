//! Evaluation report files.
//!
//! ```text
//! fusionmf-report 1
//! method <name>
//! folds <n>
//! <round> <fold> <avg_f1> <auroc> <auprc> <k> <skipped_labels>     n lines
//! summary <metric> <mean>±<std>                                     one per metric
//! round_means <metric> <v_0> ... <v_r>                              one per metric
//! compare <other> <n>                                               optional, repeatable
//! <round> <fold> <avg_f1> <auroc> <auprc> <k> <skipped_labels>     n lines
//! test <metric> <t> <p> <significant> <better|worse|tie>            one per metric
//! ```
//!
//! Summary lines use three decimals; fold metrics are written in full.
//! `summary` and `round_means` lines are derived and ignored on reading.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{direction_name, Comparison, EvalReport, FoldRecord, Metric};
use crate::io::matrix::write_text;

pub const REPORT_MAGIC: &str = "fusionmf-report";
pub const REPORT_VERSION: u32 = 1;

/// `0.967±0.004`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.3}±{std:.3}")
}

fn fold_line(out: &mut String, f: &FoldRecord) {
    let _ = writeln!(
        out,
        "{} {} {:e} {:e} {:e} {} {}",
        f.round, f.fold, f.avg_f1, f.auroc, f.auprc, f.k, f.skipped_labels
    );
}

pub fn format_report(report: &EvalReport) -> String {
    let mut out = format!("{REPORT_MAGIC} {REPORT_VERSION}\nmethod {}\nfolds {}\n", report.method, report.folds.len());
    for f in &report.folds {
        fold_line(&mut out, f);
    }
    for m in Metric::ALL {
        let (mean, std) = report.mean_std(m);
        let _ = writeln!(out, "summary {} {}", m.name(), format_mean_std(mean, std));
    }
    for m in Metric::ALL {
        let means: Vec<String> = report.round_means(m).iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(out, "round_means {} {}", m.name(), means.join(" "));
    }
    for c in &report.comparisons {
        let _ = writeln!(out, "compare {} {}", c.other, c.other_folds.len());
        for f in &c.other_folds {
            fold_line(&mut out, f);
        }
        for (m, t) in &c.tests {
            let _ = writeln!(
                out,
                "test {} {:e} {:e} {} {}",
                m.name(),
                t.t,
                t.p_value,
                t.significant,
                direction_name(t.direction)
            );
        }
    }
    out
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    write_text(path, &format_report(report))
}

fn parse_fold(line: &str, n: usize, path: &str) -> Result<FoldRecord> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line: n,
        msg,
    };
    let toks: Vec<&str> = line.split_whitespace().collect();
    let [round, fold, f1, auroc, auprc, k, skipped] = toks[..] else {
        return Err(err(format!("expected 7 fold fields, found '{line}'")));
    };
    let int = |t: &str| t.parse::<usize>().map_err(|_| err(format!("invalid integer '{t}'")));
    let real = |t: &str| t.parse::<f64>().map_err(|_| err(format!("invalid number '{t}'")));
    Ok(FoldRecord {
        round: int(round)?,
        fold: int(fold)?,
        avg_f1: real(f1)?,
        auroc: real(auroc)?,
        auprc: real(auprc)?,
        k: int(k)?,
        skipped_labels: int(skipped)?,
    })
}

struct Cursor<'a> {
    path: &'a str,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(0, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(line)
    }

    fn folds(&mut self, count: usize) -> Result<Vec<FoldRecord>> {
        (0..count)
            .map(|_| {
                let (n, l) = self.next("a fold line")?;
                parse_fold(l, n, self.path)
            })
            .collect()
    }
}

/// Parses a report. Comparisons are re-tested from the stored folds, so the
/// `test` lines only need to be well-formed.
pub fn parse_report(text: &str, path: &str) -> Result<EvalReport> {
    let mut cur = Cursor {
        path,
        lines: text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect(),
        pos: 0,
    };
    let (n, header) = cur.next("the report header")?;
    if header != format!("{REPORT_MAGIC} {REPORT_VERSION}") {
        return Err(cur.err(n, format!("not a version {REPORT_VERSION} report: '{header}'")));
    }
    let (n, method) = cur.next("method")?;
    let method = method
        .strip_prefix("method ")
        .ok_or_else(|| cur.err(n, "expected 'method <name>'".into()))?
        .to_string();
    let (n, count) = cur.next("folds")?;
    let count: usize = count
        .strip_prefix("folds ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| cur.err(n, "expected 'folds <n>'".into()))?;
    let folds = cur.folds(count)?;

    let mut report = EvalReport {
        method,
        folds,
        comparisons: Vec::new(),
    };
    let mut others = Vec::new();
    while cur.pos < cur.lines.len() {
        let (n, line) = cur.next("")?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("summary" | "round_means" | "test") => {}
            Some("compare") => {
                let (Some(name), Some(len), None) = (toks.next(), toks.next(), toks.next()) else {
                    return Err(cur.err(n, "expected 'compare <name> <n>'".into()));
                };
                let len: usize = len
                    .parse()
                    .map_err(|_| cur.err(n, format!("invalid fold count '{len}'")))?;
                let folds = cur.folds(len)?;
                others.push(EvalReport {
                    method: name.to_string(),
                    folds,
                    comparisons: Vec::new(),
                });
            }
            _ => return Err(cur.err(n, format!("unexpected line '{line}'"))),
        }
    }
    for other in &others {
        report.compare_with(other)?;
    }
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text, &path.display().to_string())
}

/// Paired t-test summary of one comparison, one metric.
pub fn describe_comparison(c: &Comparison, metric: Metric) -> Option<String> {
    let t = c.test(metric)?;
    Some(format!(
        "{} vs {}: t = {:.3}, p = {:.4}, {}{}",
        metric.name(),
        c.other,
        t.t,
        t.p_value,
        direction_name(t.direction),
        if t.significant { " (significant)" } else { "" }
    ))
}
