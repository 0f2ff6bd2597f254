//! Fixed-step simulation engine: advances plant, sensing, and controller one
//! sample at a time, records traces, and maintains the energy ledger.
//!
//! Everything is deterministic: time is recomputed as `k / fs` (never
//! accumulated), iteration orders are fixed, and no randomness or wall-clock
//! input enters the loop, so identical scenarios produce bit-identical
//! traces.

mod ledger;
mod scenario;
mod summary;
mod trace;

pub use ledger::{EnergyLedger, LedgerInterval};
pub use scenario::{BatterySpec, Scenario, ScenarioEvent, SummaryWindows};
pub use summary::{
    summarize, EnergySummary, PairEnergy, RatingsSummary, Summary, SwitchEventSummary, WindowStats,
};
pub use trace::{csv_header, csv_row, write_csv, PortTrace, TraceRecord};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ctrl::{Controller, CtrlError, StepOutput, SwitchEvent};
use crate::matrix::{connectivity, GateStates, Partition, PortId, PORT_COUNT};
use crate::plant::{BatteryState, PlantError, PlantModel};
use crate::sense::{PowerAverager, SenseError, ZeroDetector};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("scenario validation failed: {}", problems.join("; "))]
    InvalidScenario { problems: Vec<String> },
    #[error("ports {ports:?} form a multi-port connection at t={t} s; pairwise routing is ambiguous")]
    MultiConnection { t: f64, ports: Vec<PortId> },
    #[error("command at t={t} s rejected: {source}")]
    Command { t: f64, source: CtrlError },
    #[error("controller fault at t={t} s: {source}")]
    Controller { t: f64, source: CtrlError },
    #[error(transparent)]
    Sense(#[from] SenseError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Ctrl(#[from] CtrlError),
    #[error("{label} summary window [{start}, {end}] s contains no trace samples")]
    WindowOutsideTrace {
        label: String,
        start: f64,
        end: f64,
    },
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub ledger: EnergyLedger,
    pub events: Vec<SwitchEvent>,
    pub summary: Summary,
}

/// Execute one scenario start to finish.
///
/// The per-sample order is: apply gate changes decided on the previous
/// sample, apply scripted events, advance the battery, solve port flows,
/// update the power averages and ledger, record the trace row, then let the
/// controller look at the fresh averages. Gate changes it requests take
/// effect on the next sample, mirroring a digital controller that acts one
/// cycle after it measures.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, SimError> {
    scenario.validate()?;

    let fs = scenario.fs_hz;
    let dt = 1.0 / fs;
    let tick_count = (scenario.duration_s * fs).round() as u64;

    let plant = PlantModel {
        grid: scenario.grid,
        battery_port: scenario.battery.port,
        houses: scenario.houses.clone(),
    };
    let mut battery = BatteryState::new(
        scenario.battery.initial_power_w,
        scenario.battery.slew_w_per_s,
        scenario.battery.capacity_wh,
        scenario.battery.initial_soc,
        scenario.battery.lag_s,
    )?;
    let mut controller = Controller::new(
        scenario.table.clone(),
        ZeroDetector::new(scenario.epsilon_w)?,
        scenario.dead_time_samples,
        scenario.initial_mode,
    )?;
    let mut averagers: BTreeMap<PortId, PowerAverager> = PortId::all()
        .map(|p| {
            PowerAverager::for_line(fs, scenario.grid.f_line_hz(), scenario.averaging_periods)
                .map(|avg| (p, avg))
        })
        .collect::<Result<_, _>>()?;

    let mut gates = controller.current_gates().clone();
    let mut partition = checked_partition(&scenario.topology, &gates, 0.0)?;
    let mut pending_gates: Option<GateStates> = None;

    let mut ledger = EnergyLedger::new();
    let mut records = Vec::with_capacity(tick_count as usize / scenario.trace_decimate + 1);
    let mut event_queue = scenario.events.iter().peekable();
    let mut max_battery_slew = 0.0_f64;

    for tick in 0..tick_count {
        let t = tick as f64 / fs;

        // Gate changes decided on the previous sample take effect now.
        if let Some(next) = pending_gates.take() {
            gates = next;
            partition = checked_partition(&scenario.topology, &gates, t)?;
        }

        // Scripted events due at (or before) this sample time.
        while let Some(event) = event_queue.peek() {
            if event.t_s() > t + 1e-12 {
                break;
            }
            match *event_queue.next().expect("peeked event exists") {
                ScenarioEvent::BatteryReference { power_w, .. } => battery.set_reference(power_w),
                ScenarioEvent::ModeCommand {
                    target, watch_port, ..
                } => controller
                    .issue_mode_command(target, watch_port)
                    .map_err(|source| SimError::Command { t, source })?,
            }
        }

        // Plant dynamics. The first sample shows initial conditions.
        if tick > 0 {
            let step_w = battery.step(dt);
            max_battery_slew = max_battery_slew.max(step_w.abs() / dt);
        }
        let flows = plant.port_flows(&partition, &battery, t);

        // Sense: instantaneous and windowed power per port.
        let mut ports = [PortTrace {
            v: 0.0,
            i: 0.0,
            p: 0.0,
            p_avg: None,
        }; PORT_COUNT];
        let mut averages: BTreeMap<PortId, Option<f64>> = BTreeMap::new();
        for (idx, port) in PortId::all().enumerate() {
            let (v, i) = flows[&port];
            let p = v * i;
            let p_avg = averagers
                .get_mut(&port)
                .expect("averager per port")
                .update(p);
            ports[idx] = PortTrace { v, i, p, p_avg };
            averages.insert(port, p_avg);
        }

        let mode = controller.current_mode().0;
        ledger.update(t, dt, &partition, &averages, mode);

        if tick % scenario.trace_decimate as u64 == 0 {
            records.push(TraceRecord {
                t,
                ports,
                mode,
                gates: scenario.topology.switches().map(|sw| gates.is_on(sw)).collect(),
            });
        }

        // Controller reacts to this sample's averages; any gate change lands
        // on the next sample.
        match controller
            .step(t, &averages)
            .map_err(|source| SimError::Controller { t, source })?
        {
            StepOutput::NoChange => {}
            StepOutput::Apply(next) => pending_gates = Some(next),
        }
    }

    ledger.finish();
    let events = controller.events().to_vec();
    let summary = summarize(
        &records,
        scenario,
        &events,
        &ledger,
        battery.soc(),
        max_battery_slew,
    )?;
    Ok(RunOutput {
        records,
        ledger,
        events,
        summary,
    })
}

/// Connectivity with the engine's safety rule: no block may span more than
/// two ports, because a multi-port connection has no pairwise attribution.
fn checked_partition(
    topology: &crate::matrix::SwitchTopology,
    gates: &GateStates,
    t: f64,
) -> Result<Partition, SimError> {
    let partition = connectivity(topology, gates);
    if let Some(block) = partition.blocks().iter().find(|b| b.len() > 2) {
        return Err(SimError::MultiConnection {
            t,
            ports: block.clone(),
        });
    }
    Ok(partition)
}
