//! CSV readers and writers for traces, learning-game matrices, regret curves
//! and tournament results, plus a minimal SVG polyline writer.

use std::io::Write;

use thiserror::Error;

use crate::engine::{MatchTrace, StepRecord};
use crate::evaluation::{LearningGameMatrix, PopulationState, RegretCurve, Tournament, TrialResult};

#[derive(Error, Debug)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing column {0}")]
    MissingColumn(&'static str),
    #[error("row {row}: bad value {value:?} in column {column}")]
    BadValue {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("{0}")]
    Eval(#[from] crate::evaluation::EvalError),
}

/// Formats a float with 10 significant digits, without trailing zeros.
pub fn fmt10(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.9e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let body = if !(-7..=15).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        }
    } else if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            format!("{}{}", digits, "0".repeat(int_len - digits.len()))
        } else {
            format!("{}.{}", &digits[..int_len], &digits[int_len..])
        }
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

/// Trace columns `t,a1,a2,y1,y2,x,r1,r2`, followed by `expert1` and/or
/// `expert2` when the trace carries expert indices.
pub fn write_trace<W: Write>(trace: &MatchTrace, out: W) -> Result<(), IoError> {
    let mut w = writer(out);
    let mut header = vec!["t", "a1", "a2", "y1", "y2", "x", "r1", "r2"];
    if trace.experts1.is_some() {
        header.push("expert1");
    }
    if trace.experts2.is_some() {
        header.push("expert2");
    }
    w.write_record(&header)?;
    for (n, r) in trace.records.iter().enumerate() {
        let mut row = vec![
            r.t.to_string(),
            r.a1.to_string(),
            r.a2.to_string(),
            u8::from(r.y1).to_string(),
            u8::from(r.y2).to_string(),
            fmt10(r.x),
            fmt10(r.r1),
            fmt10(r.r2),
        ];
        for e in [&trace.experts1, &trace.experts2].into_iter().flatten() {
            row.push(e.get(n).map_or_else(String::new, |v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

struct Columns {
    names: Vec<String>,
}

impl Columns {
    fn find(&self, name: &'static str) -> Result<usize, IoError> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or(IoError::MissingColumn(name))
    }

    fn opt(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    row: usize,
    column: &'static str,
) -> Result<T, IoError> {
    let raw = rec.get(idx).unwrap_or("");
    raw.trim().parse().map_err(|_| IoError::BadValue {
        row,
        column,
        value: raw.to_string(),
    })
}

fn finite(v: f64, row: usize, column: &'static str) -> Result<f64, IoError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(IoError::BadValue {
            row,
            column,
            value: v.to_string(),
        })
    }
}

fn bit(rec: &csv::StringRecord, idx: usize, row: usize, column: &'static str) -> Result<bool, IoError> {
    match rec.get(idx).map(str::trim) {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        other => Err(IoError::BadValue {
            row,
            column,
            value: other.unwrap_or("").to_string(),
        }),
    }
}

fn reader(data: &[u8]) -> Result<(csv::Reader<&[u8]>, Columns), IoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let names = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    Ok((r, Columns { names }))
}

/// Reads a trace written by [`write_trace`].
pub fn parse_trace(data: &[u8]) -> Result<MatchTrace, IoError> {
    let (mut r, cols) = reader(data)?;
    let idx = [
        cols.find("t")?,
        cols.find("a1")?,
        cols.find("a2")?,
        cols.find("y1")?,
        cols.find("y2")?,
        cols.find("x")?,
        cols.find("r1")?,
        cols.find("r2")?,
    ];
    let e1 = cols.opt("expert1");
    let e2 = cols.opt("expert2");
    let mut trace = MatchTrace {
        experts1: e1.map(|_| Vec::new()),
        experts2: e2.map(|_| Vec::new()),
        ..Default::default()
    };
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = n + 1;
        trace.records.push(StepRecord {
            t: field(&rec, idx[0], row, "t")?,
            a1: field(&rec, idx[1], row, "a1")?,
            a2: field(&rec, idx[2], row, "a2")?,
            y1: bit(&rec, idx[3], row, "y1")?,
            y2: bit(&rec, idx[4], row, "y2")?,
            x: finite(field(&rec, idx[5], row, "x")?, row, "x")?,
            r1: finite(field(&rec, idx[6], row, "r1")?, row, "r1")?,
            r2: finite(field(&rec, idx[7], row, "r2")?, row, "r2")?,
        });
        if let (Some(i), Some(v)) = (e1, trace.experts1.as_mut()) {
            v.push(field(&rec, i, row, "expert1")?);
        }
        if let (Some(i), Some(v)) = (e2, trace.experts2.as_mut()) {
            v.push(field(&rec, i, row, "expert2")?);
        }
    }
    Ok(trace)
}

/// Columns `i,j,m1,m2`, one row per ordered pair; `i` indexes `m.labels`.
pub fn write_learning_game<W: Write>(m: &LearningGameMatrix, out: W) -> Result<(), IoError> {
    let mut w = writer(out);
    w.write_record(["i", "j", "m1", "m2"])?;
    let n = m.size();
    for i in 0..n {
        for j in 0..n {
            w.write_record([i.to_string(), j.to_string(), fmt10(m.m1(i, j)), fmt10(m.m2(i, j))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `t,avg_regret`. `stride` thins the rows; the last step is always written.
pub fn write_regret<W: Write>(curve: &RegretCurve, stride: usize, out: W) -> Result<(), IoError> {
    let mut w = writer(out);
    w.write_record(["t", "avg_regret"])?;
    let stride = stride.max(1);
    let n = curve.cumulative.len();
    for t in 1..=n {
        if t % stride == 0 || t == n {
            w.write_record([t.to_string(), fmt10(curve.average_at(t))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `generation` then one share column per label.
pub fn write_population<W: Write>(labels: &[String], path: &[PopulationState], out: W) -> Result<(), IoError> {
    let mut w = writer(out);
    let mut header = vec!["generation".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (g, state) in path.iter().enumerate() {
        let mut row = vec![g.to_string()];
        row.extend(state.p.iter().map(|v| fmt10(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `game,trial,i,j,row,col,m1,m2`, one row per match and orientation.
pub fn write_trials<W: Write>(t: &Tournament, out: W) -> Result<(), IoError> {
    let mut w = writer(out);
    w.write_record(["game", "trial", "i", "j", "row", "col", "m1", "m2"])?;
    for r in &t.results {
        w.write_record([
            r.game.clone(),
            r.trial.to_string(),
            r.i.to_string(),
            r.j.to_string(),
            t.labels[r.i].clone(),
            t.labels[r.j].clone(),
            fmt10(r.m1),
            fmt10(r.m2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_trials`]; labels are recovered from the
/// `row` column.
pub fn parse_trials(data: &[u8]) -> Result<Tournament, IoError> {
    let (mut r, cols) = reader(data)?;
    let idx = [
        cols.find("game")?,
        cols.find("trial")?,
        cols.find("i")?,
        cols.find("j")?,
        cols.find("row")?,
        cols.find("m1")?,
        cols.find("m2")?,
    ];
    let mut labels: Vec<Option<String>> = Vec::new();
    let mut results = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = n + 1;
        let i: usize = field(&rec, idx[2], row, "i")?;
        let j: usize = field(&rec, idx[3], row, "j")?;
        let label = rec.get(idx[4]).unwrap_or("").to_string();
        if i.max(j) >= 4096 {
            return Err(IoError::BadRow {
                row,
                reason: format!("algorithm index {} too large", i.max(j)),
            });
        }
        if labels.len() <= i.max(j) {
            labels.resize(i.max(j) + 1, None);
        }
        match &labels[i] {
            Some(l) if *l != label => {
                return Err(IoError::BadRow {
                    row,
                    reason: format!("index {i} labelled both {l:?} and {label:?}"),
                })
            }
            _ => labels[i] = Some(label),
        }
        results.push(TrialResult {
            game: rec.get(idx[0]).unwrap_or("").to_string(),
            trial: field(&rec, idx[1], row, "trial")?,
            i,
            j,
            m1: finite(field(&rec, idx[5], row, "m1")?, row, "m1")?,
            m2: finite(field(&rec, idx[6], row, "m2")?, row, "m2")?,
        });
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(k, l)| {
            l.ok_or(IoError::BadRow {
                row: 0,
                reason: format!("no row for algorithm {k}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Tournament::from_results(labels, results)?)
}

/// A bare SVG line chart: one polyline per series over a shared x axis.
pub fn write_svg<W: Write>(series: &[(String, Vec<(f64, f64)>)], mut out: W) -> Result<(), IoError> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    ];
    let pts = series
        .iter()
        .flat_map(|(_, s)| s.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )?;
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<polyline points="{PAD},{PAD} {PAD},{b} {r},{b}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    )?;
    writeln!(
        out,
        r#"<text x="{PAD}" y="{}" font-size="10">{}</text>"#,
        PAD - 8.0,
        fmt10(y1)
    )?;
    writeln!(
        out,
        r#"<text x="{PAD}" y="{}" font-size="10">{}</text>"#,
        H - PAD + 14.0,
        fmt10(y0)
    )?;
    for (k, (label, s)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = s
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}"/>"#,
            points.join(" ")
        )?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 14.0 * (k as f64 + 1.0),
            escape(label)
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
