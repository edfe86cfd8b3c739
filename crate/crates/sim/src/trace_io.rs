//! JSON-lines trace files: a header line followed by one event per line.

use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use terra_core::sweep::{Trace, TraceEvent, TRACE_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub trace: String,
    pub scenario: String,
    pub seed: u64,
    pub horizon: f64,
    pub slot: f64,
    /// Outage floor and reference RSS the run was analyzed with.
    pub floor: f64,
    pub reference_rss: f64,
}

pub fn write_trace(mut w: impl Write, header: &TraceHeader, trace: &Trace) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for e in &trace.events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(header: &TraceHeader, trace: &Trace) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, header, trace)?;
    Ok(String::from_utf8(buf)?)
}

pub fn read_trace(r: impl BufRead) -> Result<(TraceHeader, Trace)> {
    let mut lines = r.lines();
    let first = lines.next().context("empty trace file")??;
    let header: TraceHeader =
        serde_json::from_str(&first).context("line 1: invalid trace header")?;
    if header.trace != TRACE_VERSION {
        bail!(
            "line 1: trace version {:?} is not supported, expected {:?}",
            header.trace,
            TRACE_VERSION
        );
    }
    let mut trace = Trace {
        events: Vec::new(),
        horizon: header.horizon,
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: TraceEvent =
            serde_json::from_str(&line).with_context(|| format!("line {}", i + 2))?;
        trace.events.push(e);
    }
    Ok((header, trace))
}
