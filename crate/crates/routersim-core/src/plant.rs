//! Electrical environment around the switch matrix: the AC line, the
//! slew-limited battery converter, and the house connections, plus the flow
//! solver that turns a connectivity partition into per-port voltage/current
//! samples.
//!
//! The model is waveform-level but idealized: switches are lossless, the line
//! is stiff (every port sees the same sinusoidal bus voltage), and the battery
//! converter tracks its power reference exactly up to a slew limit. Power that
//! enters a connected pair at one port leaves at the other in the same
//! instant, so each closed block conserves power sample by sample.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::matrix::{Partition, PortId};

/// Angular frequency shorthand.
const TAU: f64 = std::f64::consts::TAU;

/// Seconds per hour, for watt-hour bookkeeping.
const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("rms voltage must be positive, got {0}")]
    NonPositiveVoltage(f64),
    #[error("line frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("slew limit must be positive, got {0} W/s")]
    NonPositiveSlew(f64),
    #[error("battery capacity must be positive, got {0} Wh")]
    NonPositiveCapacity(f64),
    #[error("state of charge {0} outside 0..=1")]
    SocOutOfRange(f64),
    #[error("response lag must be non-negative, got {0} s")]
    NegativeLag(f64),
}

/// The single-phase AC line behind the router.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSource {
    vrms: f64,
    f_line_hz: f64,
    phase_rad: f64,
}

impl GridSource {
    pub fn new(vrms: f64, f_line_hz: f64, phase_rad: f64) -> Result<Self, PlantError> {
        if !(vrms > 0.0) {
            return Err(PlantError::NonPositiveVoltage(vrms));
        }
        if !(f_line_hz > 0.0) {
            return Err(PlantError::NonPositiveFrequency(f_line_hz));
        }
        Ok(Self {
            vrms,
            f_line_hz,
            phase_rad,
        })
    }

    pub fn vrms(&self) -> f64 {
        self.vrms
    }

    pub fn f_line_hz(&self) -> f64 {
        self.f_line_hz
    }

    pub fn phase_rad(&self) -> f64 {
        self.phase_rad
    }

    /// Instantaneous bus voltage at time `t`.
    ///
    /// The line is modeled as stiff: this same waveform appears at every
    /// port, switched or not, for the whole run.
    pub fn voltage(&self, t: f64) -> f64 {
        2.0_f64.sqrt() * self.vrms * (TAU * self.f_line_hz * t + self.phase_rad).sin()
    }
}

/// The battery converter: tracks a power reference under a slew limit while
/// integrating state of charge.
///
/// Sign convention is battery-centric: positive power means charging, i.e.
/// power leaving the router at the battery port. The averaged power measured
/// at the battery port under the inflow-positive convention is therefore
/// `-p_act_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryState {
    p_ref_w: f64,
    p_act_w: f64,
    slew_w_per_s: f64,
    capacity_wh: f64,
    soc: f64,
    lag_s: f64,
    /// Internal first-order tracking target; equals `p_ref_w` when `lag_s` is 0.
    p_lagged_w: f64,
}

impl BatteryState {
    pub fn new(
        initial_power_w: f64,
        slew_w_per_s: f64,
        capacity_wh: f64,
        initial_soc: f64,
        lag_s: f64,
    ) -> Result<Self, PlantError> {
        if !(slew_w_per_s > 0.0) {
            return Err(PlantError::NonPositiveSlew(slew_w_per_s));
        }
        if !(capacity_wh > 0.0) {
            return Err(PlantError::NonPositiveCapacity(capacity_wh));
        }
        if !(0.0..=1.0).contains(&initial_soc) {
            return Err(PlantError::SocOutOfRange(initial_soc));
        }
        if lag_s < 0.0 {
            return Err(PlantError::NegativeLag(lag_s));
        }
        Ok(Self {
            p_ref_w: initial_power_w,
            p_act_w: initial_power_w,
            slew_w_per_s,
            capacity_wh,
            soc: initial_soc,
            lag_s,
            p_lagged_w: initial_power_w,
        })
    }

    pub fn p_ref_w(&self) -> f64 {
        self.p_ref_w
    }

    pub fn p_act_w(&self) -> f64 {
        self.p_act_w
    }

    pub fn soc(&self) -> f64 {
        self.soc
    }

    pub fn slew_w_per_s(&self) -> f64 {
        self.slew_w_per_s
    }

    /// Change the power reference. The actual power ramps toward it under the
    /// slew limit on subsequent `step` calls.
    pub fn set_reference(&mut self, p_ref_w: f64) {
        self.p_ref_w = p_ref_w;
    }

    /// Advance the converter by `dt` seconds: ramp actual power toward the
    /// reference under the slew limit, then integrate state of charge.
    ///
    /// Returns the step taken in watts (useful for slew verification). At the
    /// charge boundaries the converter derates to whatever power the
    /// remaining headroom allows, overriding the slew-limited value.
    pub fn step(&mut self, dt: f64) -> f64 {
        let before = self.p_act_w;
        let target = if self.lag_s > 0.0 {
            // First-order response to the reference.
            let alpha = 1.0 - (-dt / self.lag_s).exp();
            self.p_lagged_w += alpha * (self.p_ref_w - self.p_lagged_w);
            self.p_lagged_w
        } else {
            self.p_lagged_w = self.p_ref_w;
            self.p_ref_w
        };
        let max_step = self.slew_w_per_s * dt;
        self.p_act_w = before + (target - before).clamp(-max_step, max_step);

        // Positive p_act charges the battery. Trapezoidal charge update, with
        // power capped to what the boundary can actually absorb/supply.
        let stored_wh = self.soc * self.capacity_wh;
        let room_wh = (1.0 - self.soc) * self.capacity_wh;
        let dt_h = dt / SECONDS_PER_HOUR;
        let mean_w = (before + self.p_act_w) / 2.0;
        if -mean_w * dt_h > stored_wh {
            // Would over-discharge: cap so the battery just reaches empty.
            self.p_act_w = (-2.0 * stored_wh / dt_h - before).min(0.0);
        } else if mean_w * dt_h > room_wh {
            // Would over-charge: cap so the battery just reaches full.
            self.p_act_w = (2.0 * room_wh / dt_h - before).max(0.0);
        }
        let mean_w = (before + self.p_act_w) / 2.0;
        self.soc = (self.soc + mean_w * dt_h / self.capacity_wh).clamp(0.0, 1.0);
        self.p_act_w - before
    }
}

/// A house connection: a port and the net power it is prepared to exchange
/// (positive = surplus exported toward the router).
///
/// Houses are passive bookkeeping here — the battery sets the transferred
/// power — but the record keeps attribution and configuration explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseNet {
    pub port: PortId,
    pub net_injection_w: f64,
}

/// Everything the flow solver needs to know about what hangs off each port.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub grid: GridSource,
    pub battery_port: PortId,
    pub houses: Vec<HouseNet>,
}

impl PlantModel {
    /// Instantaneous voltage/current pairs for all four ports at time `t`.
    ///
    /// Current flows only inside a closed block containing the battery port:
    /// the battery draws (or injects) a line-frequency current sized to its
    /// actual power, and the peer port carries the exact opposite current.
    /// Every other port idles at zero current. Blocks of more than two ports
    /// are the engine's job to reject before calling this.
    pub fn port_flows(
        &self,
        partition: &Partition,
        battery: &BatteryState,
        t: f64,
    ) -> BTreeMap<PortId, (f64, f64)> {
        let v = self.grid.voltage(t);
        // Unit-power current template: in phase with the bus voltage and
        // scaled so <v * i_unit> = 1 W per watt of transfer.
        let omega_t = TAU * self.grid.f_line_hz() * t + self.grid.phase_rad();
        let i_unit = 2.0_f64.sqrt() / self.grid.vrms() * omega_t.sin();

        let mut flows: BTreeMap<PortId, (f64, f64)> =
            PortId::all().map(|p| (p, (v, 0.0))).collect();

        let block = partition.block_of(self.battery_port);
        if block.len() == 2 {
            let peer = block
                .iter()
                .copied()
                .find(|&p| p != self.battery_port)
                .expect("two-port block contains the peer");
            if self.houses.iter().any(|h| h.port == peer) {
                // Charging (positive battery power) pulls current out of the
                // router at the battery port, so that port's averaged power
                // comes out as -p_act; the peer returns the same current.
                let i_batt = -battery.p_act_w() * i_unit;
                flows.insert(self.battery_port, (v, i_batt));
                flows.insert(peer, (v, -i_batt));
            }
            // A peer with no house behind it (e.g. the unused port) has no
            // circuit to complete; the pair idles.
        }
        flows
    }
}
