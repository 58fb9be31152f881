//! CSV files written by a tracking run and read back for evaluation.
//!
//! Every file starts with a `# seed=...` comment line so outputs can be
//! traced to the run that made them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::eval::BoundingBox;
use crate::tracker::TrackerRun;

pub const RESULTS_HEADER: &str = "frame,x,y,s,abrupt,g,l,log_posterior";

fn header_comment(run: &TrackerRun) -> String {
    format!("# seed={} ref_w={} ref_h={}", run.config.seed, run.ref_w, run.ref_h)
}

pub fn write_results<W: Write>(run: &TrackerRun, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header_comment(run))?;
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in &run.frames {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.frame,
            r.state.x,
            r.state.y,
            r.state.s,
            u8::from(r.report.abrupt),
            r.report.g,
            r.report.l,
            r.log_posterior
        )?;
    }
    Ok(())
}

pub fn write_abruptness<W: Write>(run: &TrackerRun, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header_comment(run))?;
    writeln!(out, "frame,g,l,a,abrupt")?;
    for r in &run.frames {
        let a = &r.report;
        writeln!(out, "{},{},{},{},{}", r.frame, a.g, a.l, a.a, u8::from(a.abrupt))?;
    }
    Ok(())
}

/// One row per chain iteration of every frame.
pub fn write_diagnostics<W: Write>(run: &TrackerRun, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header_comment(run))?;
    writeln!(out, "frame,iteration,accepted,log_posterior,dos_entropy")?;
    for r in &run.frames {
        for it in &r.iterations {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.frame, it.iteration, it.accepted, it.log_posterior, it.dos_entropy
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResultRow {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub abrupt: bool,
    pub g: f64,
    pub l: f64,
    pub log_posterior: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultsTable {
    pub seed: Option<u64>,
    /// Reference box size from the header comment, when present.
    pub reference: Option<(f64, f64)>,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Boxes per frame. Without a reference size in the header, `fallback`
    /// supplies it.
    pub fn boxes(&self, fallback: Option<(f64, f64)>) -> Result<BTreeMap<usize, BoundingBox>> {
        let (w, h) = self
            .reference
            .or(fallback)
            .ok_or_else(|| Error::Parse {
                what: "results",
                line: 1,
                message: "no reference box size".into(),
            })?;
        Ok(self
            .rows
            .iter()
            .map(|r| (r.frame, BoundingBox::from_center(r.x, r.y, w * r.s, h * r.s)))
            .collect())
    }
}

fn parse_comment(line: &str, table: &mut ResultsTable) {
    let mut ref_w = None;
    let mut ref_h = None;
    for tok in line.trim_start_matches('#').split_whitespace() {
        match tok.split_once('=') {
            Some(("seed", v)) => table.seed = v.parse().ok(),
            Some(("ref_w", v)) => ref_w = v.parse::<f64>().ok(),
            Some(("ref_h", v)) => ref_h = v.parse::<f64>().ok(),
            _ => {}
        }
    }
    if let (Some(w), Some(h)) = (ref_w, ref_h) {
        table.reference = Some((w, h));
    }
}

pub fn read_results<R: BufRead>(reader: R) -> Result<ResultsTable> {
    let mut table = ResultsTable {
        seed: None,
        reference: None,
        rows: Vec::new(),
    };
    let mut header_seen = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            parse_comment(trimmed, &mut table);
            continue;
        }
        if !header_seen {
            if trimmed != RESULTS_HEADER {
                return Err(Error::Parse {
                    what: "results",
                    line: line_no,
                    message: format!("expected header {RESULTS_HEADER}"),
                });
            }
            header_seen = true;
            continue;
        }
        let bad = |message: String| Error::Parse {
            what: "results",
            line: line_no,
            message,
        };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("field {}: {e}", k + 1)))
        };
        table.rows.push(ResultRow {
            frame: fields[0].parse().map_err(|e| bad(format!("frame: {e}")))?,
            x: num(1)?,
            y: num(2)?,
            s: num(3)?,
            abrupt: match fields[4] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("abrupt flag {other:?}"))),
            },
            g: num(5)?,
            l: num(6)?,
            log_posterior: num(7)?,
        });
    }
    if !header_seen {
        return Err(Error::Parse {
            what: "results",
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(table)
}
