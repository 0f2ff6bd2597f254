//! End-of-run summary: steady-state window means, switch timing, waveform
//! cleanliness checks, peak stresses against switch ratings, and energy
//! totals, serialized as JSON for the CLI.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ctrl::SwitchEvent;
use crate::matrix::{connectivity, GateStates, SwitchTopology, PORT_COUNT};

use super::ledger::EnergyLedger;
use super::scenario::Scenario;
use super::trace::TraceRecord;
use super::SimError;

/// Mean averaged power per port over one evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStats {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub sample_count: u64,
    /// Port number ("1".."4") to mean instantaneous power in watts.
    pub mean_power_w: BTreeMap<String, f64>,
}

/// One mode switch as reported in the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchEventSummary {
    pub detected_at_s: f64,
    pub completed_at_s: Option<f64>,
    pub from_mode: u8,
    pub to_mode: u8,
}

/// Peak port stresses versus the switch ratings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatingsSummary {
    pub voltage_rating_v: f64,
    pub current_rating_a: f64,
    pub peak_voltage_v: BTreeMap<String, f64>,
    pub peak_current_a: BTreeMap<String, f64>,
    pub within_ratings: bool,
}

/// Energy moved between one source/sink port pair over the whole run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEnergy {
    pub source_port: u8,
    pub sink_port: u8,
    pub energy_wh: f64,
}

/// Ledger totals as reported in the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub total_wh: f64,
    pub transfers: Vec<PairEnergy>,
}

/// Everything a run reports once it finishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub duration_s: f64,
    pub fs_hz: f64,
    pub record_count: u64,
    pub final_mode: u8,
    pub final_soc: f64,
    pub pre_window: WindowStats,
    pub post_window: WindowStats,
    pub switch_events: Vec<SwitchEventSummary>,
    /// Largest |v - ideal sinusoid| across all ports and samples; the stiff
    /// line makes this exactly zero.
    pub max_bus_voltage_deviation_v: f64,
    /// Largest |sum of instantaneous port powers| over any connected block.
    pub max_power_balance_residual_w: f64,
    /// Largest observed battery power rate of change.
    pub max_battery_slew_w_per_s: f64,
    pub ratings: RatingsSummary,
    pub energy: EnergySummary,
}

/// Condense a finished run into a `Summary`.
///
/// Errors if either steady-state window contains no trace samples (wrong
/// window, or decimation swallowed it).
pub fn summarize(
    records: &[TraceRecord],
    scenario: &Scenario,
    events: &[SwitchEvent],
    ledger: &EnergyLedger,
    final_soc: f64,
    max_battery_slew_w_per_s: f64,
) -> Result<Summary, SimError> {
    let pre_window = window_stats(records, scenario.summary_windows.pre_s, "pre")?;
    let post_window = window_stats(records, scenario.summary_windows.post_s, "post")?;

    let mut max_voltage_deviation = 0.0_f64;
    let mut max_balance_residual = 0.0_f64;
    let mut peak_v = [0.0_f64; PORT_COUNT];
    let mut peak_i = [0.0_f64; PORT_COUNT];
    // Partitions repeat across long gate-stable stretches; rebuild only when
    // the gate vector changes.
    let mut cached_gates: Option<(Vec<bool>, Vec<Vec<usize>>)> = None;
    for record in records {
        let v_ideal = scenario.grid.voltage(record.t);
        for (idx, port) in record.ports.iter().enumerate() {
            max_voltage_deviation = max_voltage_deviation.max((port.v - v_ideal).abs());
            peak_v[idx] = peak_v[idx].max(port.v.abs());
            peak_i[idx] = peak_i[idx].max(port.i.abs());
        }
        let rebuild = match &cached_gates {
            Some((gates, _)) => gates != &record.gates,
            None => true,
        };
        if rebuild {
            let blocks = block_indices(&scenario.topology, &record.gates);
            cached_gates = Some((record.gates.clone(), blocks));
        }
        let (_, blocks) = cached_gates.as_ref().expect("cache filled above");
        for block in blocks {
            let residual: f64 = block.iter().map(|&idx| record.ports[idx].p).sum();
            max_balance_residual = max_balance_residual.max(residual.abs());
        }
    }

    let port_map = |values: [f64; PORT_COUNT]| -> BTreeMap<String, f64> {
        values
            .iter()
            .enumerate()
            .map(|(idx, &x)| ((idx + 1).to_string(), x))
            .collect()
    };
    let within_ratings = peak_v
        .iter()
        .all(|&v| v <= scenario.topology.voltage_rating_v())
        && peak_i
            .iter()
            .all(|&i| i <= scenario.topology.current_rating_a());

    let transfers = ledger
        .totals_by_pair()
        .into_iter()
        .map(|((source, sink), energy_wh)| PairEnergy {
            source_port: source.index(),
            sink_port: sink.index(),
            energy_wh,
        })
        .collect();

    Ok(Summary {
        duration_s: scenario.duration_s,
        fs_hz: scenario.fs_hz,
        record_count: records.len() as u64,
        final_mode: records.last().map(|r| r.mode).unwrap_or(scenario.initial_mode.0),
        final_soc,
        pre_window,
        post_window,
        switch_events: events
            .iter()
            .map(|e| SwitchEventSummary {
                detected_at_s: e.detected_at,
                completed_at_s: e.completed_at,
                from_mode: e.from.0,
                to_mode: e.to.0,
            })
            .collect(),
        max_bus_voltage_deviation_v: max_voltage_deviation,
        max_power_balance_residual_w: max_balance_residual,
        max_battery_slew_w_per_s,
        ratings: RatingsSummary {
            voltage_rating_v: scenario.topology.voltage_rating_v(),
            current_rating_a: scenario.topology.current_rating_a(),
            peak_voltage_v: port_map(peak_v),
            peak_current_a: port_map(peak_i),
            within_ratings,
        },
        energy: EnergySummary {
            total_wh: ledger.total_wh(),
            transfers,
        },
    })
}

/// Connected blocks as 0-based port indices, for a gate vector in the
/// topology's switch order.
fn block_indices(topology: &SwitchTopology, gates: &[bool]) -> Vec<Vec<usize>> {
    let state: std::collections::BTreeMap<_, _> = topology
        .switches()
        .zip(gates.iter().copied())
        .collect();
    let partition = connectivity(topology, &GateStates::from_map(state));
    partition
        .blocks()
        .iter()
        .map(|block| block.iter().map(|p| p.index() as usize - 1).collect())
        .collect()
}

fn window_stats(
    records: &[TraceRecord],
    window: (f64, f64),
    label: &str,
) -> Result<WindowStats, SimError> {
    let (start, end) = window;
    let mut sums = [0.0_f64; PORT_COUNT];
    let mut count = 0_u64;
    for record in records {
        if record.t >= start && record.t < end {
            for (idx, port) in record.ports.iter().enumerate() {
                sums[idx] += port.p;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(SimError::WindowOutsideTrace {
            label: label.to_string(),
            start,
            end,
        });
    }
    let mean_power_w = sums
        .iter()
        .enumerate()
        .map(|(idx, &sum)| ((idx + 1).to_string(), sum / count as f64))
        .collect();
    Ok(WindowStats {
        t_start_s: start,
        t_end_s: end,
        sample_count: count,
        mean_power_w,
    })
}
