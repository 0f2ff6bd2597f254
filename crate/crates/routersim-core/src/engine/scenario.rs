//! Scenario description: everything a simulation run needs, fully resolved —
//! plant parameters, topology, mode table, controller settings, the scripted
//! event list, and output options.

use crate::ctrl::{GateLookupTable, RouterMode};
use crate::matrix::{PortId, SwitchTopology};
use crate::plant::{GridSource, HouseNet};

use super::SimError;

/// Battery converter parameters (positive power = charging).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySpec {
    pub port: PortId,
    pub initial_power_w: f64,
    pub slew_w_per_s: f64,
    pub capacity_wh: f64,
    pub initial_soc: f64,
    pub lag_s: f64,
}

/// One scripted occurrence during a run. Events at equal times apply in
/// listing order within the same sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioEvent {
    /// Step the battery power reference (positive = charging).
    BatteryReference { t_s: f64, power_w: f64 },
    /// Command a mode transition, arming the zero detector on `watch_port`.
    ModeCommand {
        t_s: f64,
        target: RouterMode,
        watch_port: PortId,
    },
}

impl ScenarioEvent {
    pub fn t_s(&self) -> f64 {
        match self {
            ScenarioEvent::BatteryReference { t_s, .. } => *t_s,
            ScenarioEvent::ModeCommand { t_s, .. } => *t_s,
        }
    }
}

/// Time windows over which the summary reports steady-state averaged powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryWindows {
    pub pre_s: (f64, f64),
    pub post_s: (f64, f64),
}

/// A fully resolved simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration_s: f64,
    pub fs_hz: f64,
    pub averaging_periods: u32,
    pub grid: GridSource,
    pub battery: BatterySpec,
    pub houses: Vec<HouseNet>,
    pub topology: SwitchTopology,
    pub table: GateLookupTable,
    pub initial_mode: RouterMode,
    pub epsilon_w: f64,
    pub dead_time_samples: u32,
    pub events: Vec<ScenarioEvent>,
    pub trace_decimate: usize,
    pub summary_windows: SummaryWindows,
}

impl Scenario {
    /// The default three-port routing scenario: 200 Vrms / 60 Hz line sampled
    /// at 12 kHz; battery on port 3 charging 700 W from house 1 in mode 1; at
    /// t = 1.0 s the reference steps to 700 W discharge and mode 2 is
    /// commanded with the zero detector watching port 3; 4 s total.
    pub fn reference() -> Self {
        Scenario {
            duration_s: 4.0,
            fs_hz: 12_000.0,
            averaging_periods: 1,
            grid: GridSource::new(200.0, 60.0, 0.0).expect("default grid parameters are valid"),
            battery: BatterySpec {
                port: PortId::new(3).unwrap(),
                initial_power_w: 700.0,
                slew_w_per_s: 720.0,
                capacity_wh: 6500.0,
                initial_soc: 0.5,
                lag_s: 0.0,
            },
            houses: vec![
                HouseNet {
                    port: PortId::new(1).unwrap(),
                    net_injection_w: 700.0,
                },
                HouseNet {
                    port: PortId::new(2).unwrap(),
                    net_injection_w: -700.0,
                },
            ],
            topology: SwitchTopology::two_switch(),
            table: GateLookupTable::charge_discharge(),
            initial_mode: RouterMode(1),
            epsilon_w: 5.0,
            dead_time_samples: 1,
            events: vec![
                ScenarioEvent::BatteryReference {
                    t_s: 1.0,
                    power_w: -700.0,
                },
                ScenarioEvent::ModeCommand {
                    t_s: 1.0,
                    target: RouterMode(2),
                    watch_port: PortId::new(3).unwrap(),
                },
            ],
            trace_decimate: 1,
            summary_windows: SummaryWindows {
                pre_s: (0.4, 0.9),
                post_s: (3.4, 3.9),
            },
        }
    }

    /// Cross-field consistency checks; every violation is a distinct error.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if !(self.duration_s > 0.0) {
            problems.push(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.fs_hz > 0.0) {
            problems.push(format!("sample rate must be positive, got {}", self.fs_hz));
        }
        let per_period = self.fs_hz / self.grid.f_line_hz();
        if !(per_period.is_finite() && (per_period - per_period.round()).abs() < 1e-9) {
            problems.push(format!(
                "sample rate {} Hz is not an integer multiple of the line frequency {} Hz",
                self.fs_hz,
                self.grid.f_line_hz()
            ));
        }
        if self.averaging_periods == 0 {
            problems.push("averaging window must span at least one line period".to_string());
        }
        if !(self.epsilon_w > 0.0) {
            problems.push(format!("epsilon must be positive, got {}", self.epsilon_w));
        }
        if self.trace_decimate == 0 {
            problems.push("trace decimation must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.battery.initial_soc) {
            problems.push(format!(
                "initial state of charge {} outside 0..=1",
                self.battery.initial_soc
            ));
        }
        if !(self.battery.slew_w_per_s > 0.0) {
            problems.push(format!(
                "battery slew must be positive, got {}",
                self.battery.slew_w_per_s
            ));
        }
        if !(self.battery.capacity_wh > 0.0) {
            problems.push(format!(
                "battery capacity must be positive, got {}",
                self.battery.capacity_wh
            ));
        }
        if self.houses.iter().any(|h| h.port == self.battery.port) {
            problems.push(format!(
                "battery port {} also carries a house",
                self.battery.port
            ));
        }
        if let Err(e) = self.table.validate(&self.topology) {
            problems.push(e.to_string());
        }
        if !self.table.contains(self.initial_mode) {
            problems.push(format!("initial mode {} is not in the mode table", self.initial_mode));
        }
        let mut last_t = 0.0;
        for (idx, event) in self.events.iter().enumerate() {
            let t = event.t_s();
            if t < last_t {
                problems.push(format!("events[{idx}] at t={t} is out of order"));
            }
            last_t = last_t.max(t);
            if t < 0.0 || t > self.duration_s {
                problems.push(format!(
                    "events[{idx}] at t={t} falls outside the run duration {}",
                    self.duration_s
                ));
            }
            if let ScenarioEvent::ModeCommand { target, .. } = event {
                if !self.table.contains(*target) {
                    problems.push(format!(
                        "events[{idx}] targets mode {target} which is not in the mode table"
                    ));
                }
            }
        }
        for (label, (a, b)) in [
            ("pre", self.summary_windows.pre_s),
            ("post", self.summary_windows.post_s),
        ] {
            if !(a < b) || a < 0.0 || b > self.duration_s {
                problems.push(format!(
                    "{label} summary window [{a}, {b}] does not fit inside the run"
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidScenario { problems })
        }
    }
}
