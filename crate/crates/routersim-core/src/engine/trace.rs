//! Trace records and their CSV serialization.
//!
//! One record per (decimated) sample. Formatting is fixed-decimal with a
//! constant digit count so that identical runs serialize to byte-identical
//! files.

use std::io::{self, Write};

use crate::matrix::{SwitchTopology, PORT_COUNT};

/// Per-port slice of one trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortTrace {
    pub v: f64,
    pub i: f64,
    pub p: f64,
    /// Windowed average, `None` while the averager is still priming.
    pub p_avg: Option<f64>,
}

/// One sampled row: time, all four ports, the active mode, and the gate
/// states in the topology's switch order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub ports: [PortTrace; PORT_COUNT],
    pub mode: u8,
    pub gates: Vec<bool>,
}

/// CSV header for traces over `topology`: `t`, then `v/i/p/pavg` per port,
/// then `mode` and one 0/1 column per switch.
pub fn csv_header(topology: &SwitchTopology) -> String {
    let mut cols = vec!["t".to_string()];
    for n in 1..=PORT_COUNT {
        cols.push(format!("v{n}"));
        cols.push(format!("i{n}"));
        cols.push(format!("p{n}"));
        cols.push(format!("pavg{n}"));
    }
    cols.push("mode".to_string());
    for sw in topology.switches() {
        cols.push(sw.column_name());
    }
    cols.join(",")
}

/// Format one record as a CSV row (no trailing newline).
///
/// Times carry nine decimals (sub-nanosecond at any practical sample rate);
/// electrical quantities carry six. A priming average serializes as an empty
/// cell.
pub fn csv_row(record: &TraceRecord) -> String {
    let mut row = format!("{:.9}", record.t);
    for port in &record.ports {
        row.push_str(&format!(",{:.6},{:.6},{:.6}", port.v, port.i, port.p));
        match port.p_avg {
            Some(avg) => row.push_str(&format!(",{avg:.6}")),
            None => row.push(','),
        }
    }
    row.push_str(&format!(",{}", record.mode));
    for &on in &record.gates {
        row.push_str(if on { ",1" } else { ",0" });
    }
    row
}

/// Write a full trace CSV: header plus one row per record.
pub fn write_csv<W: Write>(
    out: &mut W,
    topology: &SwitchTopology,
    records: &[TraceRecord],
) -> io::Result<()> {
    writeln!(out, "{}", csv_header(topology))?;
    for record in records {
        writeln!(out, "{}", csv_row(record))?;
    }
    Ok(())
}
