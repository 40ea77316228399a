use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const MAX_SCORE: u8 = 5;

/// Per-attribute ordinal scores of one sample.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScoreRecord {
    pub sample_id: usize,
    pub scores: Vec<u8>,
}

impl ScoreRecord {
    pub fn new(sample_id: usize, scores: Vec<u8>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|&&s| s > MAX_SCORE) {
            return Err(Error::Data(format!("score {bad} outside 0..=5 for sample {sample_id}")));
        }
        Ok(ScoreRecord { sample_id, scores })
    }
}

pub fn scores_to_csv(records: &[ScoreRecord], n: usize) -> String {
    let mut out = String::from("sample_id");
    for k in 0..n {
        let _ = write!(out, ",attr_{k}");
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}", r.sample_id);
        for s in &r.scores {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    out
}

pub fn scores_from_csv(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty scores file".into()))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.first() != Some(&"sample_id") {
        return Err(Error::Data(format!("bad scores header {header:?}")));
    }
    for (k, f) in fields[1..].iter().enumerate() {
        if *f != format!("attr_{k}") {
            return Err(Error::Data(format!("bad scores header column {f:?}")));
        }
    }
    let n = fields.len() - 1;
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("scores line {}: {line:?}", lineno + 2));
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != n + 1 {
            return Err(bad());
        }
        let id = parts[0].parse().map_err(|_| bad())?;
        let scores = parts[1..]
            .iter()
            .map(|p| p.parse::<u8>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        out.push(ScoreRecord::new(id, scores)?);
    }
    Ok(out)
}

pub fn write_scores(path: &Path, records: &[ScoreRecord], n: usize) -> Result<()> {
    std::fs::write(path, scores_to_csv(records, n)).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scores_from_csv(&text)
}

/// Plain CSV of floats, one matrix row per line, no header.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Data(format!("matrix row {}: bad value {v:?}", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows).map_err(|_| Error::Data("ragged matrix CSV".into()))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_csv(&text)
}
