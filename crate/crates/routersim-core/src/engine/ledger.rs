//! Energy-attribution ledger: watt-hours exchanged between connected port
//! pairs, recorded as intervals so every transaction has a source, a sink, a
//! time span, and the mode it ran under.
//!
//! Attribution uses averaged (not instantaneous) power: the source of a pair
//! is the port whose windowed average inflow is positive. While neither side
//! shows positive average — priming, or the brief near-zero crossing around a
//! mode switch — nothing accumulates, which bounds the error by the zero-band
//! epsilon times the crossing time.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::matrix::{Partition, PortId};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// One closed attribution interval: energy that flowed `source` → `sink`.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerInterval {
    pub source: PortId,
    pub sink: PortId,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub mode: u8,
    pub energy_wh: f64,
}

/// Accumulating ledger; `update` once per sample, `finish` at end of run.
#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    closed: Vec<LedgerInterval>,
    open: BTreeMap<(PortId, PortId), LedgerInterval>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Account one sample: for every two-port block whose averaged powers are
    /// ready and show a positive-inflow side, add `avg * dt` to the open
    /// interval for that (source, sink, mode), opening or rolling intervals
    /// as direction, connectivity, or mode change.
    pub fn update(
        &mut self,
        t: f64,
        dt: f64,
        partition: &Partition,
        averages: &BTreeMap<PortId, Option<f64>>,
        mode: u8,
    ) {
        // Decide, per connected pair, who sources the flow this sample.
        let mut active: BTreeMap<(PortId, PortId), (PortId, PortId, f64)> = BTreeMap::new();
        for block in partition.blocks() {
            let [a, b] = block[..] else { continue };
            let avg_a = averages.get(&a).copied().flatten();
            let avg_b = averages.get(&b).copied().flatten();
            let (Some(avg_a), Some(avg_b)) = (avg_a, avg_b) else {
                continue;
            };
            let (source, sink, avg) = if avg_a > 0.0 {
                (a, b, avg_a)
            } else if avg_b > 0.0 {
                (b, a, avg_b)
            } else {
                continue;
            };
            active.insert((a, b), (source, sink, avg));
        }

        // Close any open interval whose pair vanished or flipped.
        let stale: Vec<(PortId, PortId)> = self
            .open
            .iter()
            .filter(|(pair, interval)| {
                !matches!(
                    active.get(pair),
                    Some(&(source, _, _))
                        if source == interval.source && interval.mode == mode
                )
            })
            .map(|(&pair, _)| pair)
            .collect();
        for pair in stale {
            let interval = self.open.remove(&pair).expect("stale key came from the map");
            self.closed.push(interval);
        }

        // Accumulate into (possibly fresh) open intervals.
        for (pair, (source, sink, avg)) in active {
            let interval = self.open.entry(pair).or_insert(LedgerInterval {
                source,
                sink,
                t_start_s: t,
                t_end_s: t,
                mode,
                energy_wh: 0.0,
            });
            interval.energy_wh += avg * dt / SECONDS_PER_HOUR;
            interval.t_end_s = t;
        }
    }

    /// Close all open intervals (end of run).
    pub fn finish(&mut self) {
        let open = std::mem::take(&mut self.open);
        self.closed.extend(open.into_values());
        self.closed
            .sort_by(|x, y| x.t_start_s.total_cmp(&y.t_start_s));
    }

    pub fn intervals(&self) -> &[LedgerInterval] {
        &self.closed
    }

    /// Total energy per (source, sink) pair, in Wh.
    pub fn totals_by_pair(&self) -> BTreeMap<(PortId, PortId), f64> {
        let mut totals = BTreeMap::new();
        for interval in &self.closed {
            *totals
                .entry((interval.source, interval.sink))
                .or_insert(0.0) += interval.energy_wh;
        }
        totals
    }

    /// Total energy across all intervals, in Wh.
    pub fn total_wh(&self) -> f64 {
        self.closed.iter().map(|i| i.energy_wh).sum()
    }

    /// Write the interval list as CSV.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "source_port,sink_port,t_start_s,t_end_s,mode,energy_wh")?;
        for i in &self.closed {
            writeln!(
                out,
                "{},{},{:.9},{:.9},{},{:.9}",
                i.source, i.sink, i.t_start_s, i.t_end_s, i.mode, i.energy_wh
            )?;
        }
        Ok(())
    }
}
