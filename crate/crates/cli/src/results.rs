//! `results.csv`: one row per measured quantity.

use chaoscope_core::{Error, Result};
use serde::Serialize;
use std::io::Write;

pub const HEADER: &str = "N,j,t,quantity,value,stderr,config_hash,seed";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: usize,
    pub j: usize,
    pub t: f64,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

impl ResultRow {
    pub fn new(n: usize, j: usize, t: f64, quantity: &str, value: f64) -> Self {
        Self { n, j, t, quantity: quantity.to_string(), value, stderr: None }
    }

    pub fn with_stderr(mut self, stderr: f64) -> Self {
        self.stderr = Some(stderr);
        self
    }
}

/// Floats use 17 significant digits so that values round-trip exactly.
pub fn write_csv(rows: &[ResultRow], hash: &str, seed: u64, mut w: impl Write) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        let stderr = r.stderr.map(|s| format!("{s:.16e}")).unwrap_or_default();
        writeln!(w, "{},{},{:.16e},{},{:.16e},{},{},{}", r.n, r.j, r.t, r.quantity, r.value, stderr, hash, seed)?;
    }
    Ok(())
}

pub fn read_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header `{HEADER}`") }),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse { line: idx + 1, msg: format!("bad {what} in `{line}`") };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("column count"));
        }
        rows.push(ResultRow {
            n: f[0].parse().map_err(|_| bad("N"))?,
            j: f[1].parse().map_err(|_| bad("j"))?,
            t: f[2].parse().map_err(|_| bad("t"))?,
            quantity: f[3].to_string(),
            value: f[4].parse().map_err(|_| bad("value"))?,
            stderr: if f[5].is_empty() { None } else { Some(f[5].parse().map_err(|_| bad("stderr"))?) },
        });
    }
    Ok(rows)
}
