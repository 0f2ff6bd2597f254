//! Switching controller: maps mode commands to gate states through a lookup
//! table, and defers the actual gate change until the averaged power at a
//! watched port has decayed into the zero band.
//!
//! The controller never opens a switch under load on its own initiative; a
//! commanded transition arms the zero detector and waits. Transitions between
//! gate states that both close switches go through a break-before-make
//! intermediate so no instant ever shorts two sources together.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::matrix::{GateStates, PortId, SwitchTopology};
use crate::sense::ZeroDetector;

#[derive(Debug, Error, PartialEq)]
pub enum CtrlError {
    #[error("mode {0} is not in the lookup table")]
    UnknownMode(RouterMode),
    #[error("mode command rejected: a transition to mode {pending} is already in progress")]
    Busy { pending: RouterMode },
    #[error("mode command rejected: router is already in mode {0}")]
    NoOpCommand(RouterMode),
    #[error("mode {mode} gate states do not cover the switch topology")]
    TableTopologyMismatch { mode: RouterMode },
    #[error("no averaged power available for watched port {0}")]
    MissingWatchAverage(PortId),
    #[error("gate sequence requested between identical states")]
    IdenticalStates,
}

/// Numeric operating-mode identifier as it appears in commands and traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct RouterMode(pub u8);

impl fmt::Display for RouterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One row of the lookup table: a human-readable label plus the gate states
/// the mode drives.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEntry {
    pub label: String,
    pub gates: GateStates,
}

/// Mode-to-gates lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct GateLookupTable {
    entries: BTreeMap<RouterMode, ModeEntry>,
}

impl GateLookupTable {
    pub fn new(entries: BTreeMap<RouterMode, ModeEntry>) -> Self {
        Self { entries }
    }

    /// The two modes of the three-port routing scenario on the two-switch
    /// topology: mode 1 closes SW1A (ports 1-3), mode 2 closes SW2A (2-3).
    pub fn charge_discharge() -> Self {
        use crate::matrix::SwitchId;
        let topo = SwitchTopology::two_switch();
        let mut entries = BTreeMap::new();
        entries.insert(
            RouterMode(1),
            ModeEntry {
                label: "battery charges from house 1".to_string(),
                gates: topo.all_off().set_gate(SwitchId::Sw1A, true).unwrap(),
            },
        );
        entries.insert(
            RouterMode(2),
            ModeEntry {
                label: "battery supplies house 2".to_string(),
                gates: topo.all_off().set_gate(SwitchId::Sw2A, true).unwrap(),
            },
        );
        Self { entries }
    }

    pub fn get(&self, mode: RouterMode) -> Result<&ModeEntry, CtrlError> {
        self.entries.get(&mode).ok_or(CtrlError::UnknownMode(mode))
    }

    pub fn contains(&self, mode: RouterMode) -> bool {
        self.entries.contains_key(&mode)
    }

    pub fn modes(&self) -> impl Iterator<Item = RouterMode> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RouterMode, &ModeEntry)> {
        self.entries.iter().map(|(&m, e)| (m, e))
    }

    /// Check that every entry assigns exactly the switches of `topology`.
    pub fn validate(&self, topology: &SwitchTopology) -> Result<(), CtrlError> {
        for (&mode, entry) in &self.entries {
            if !entry.gates.covers(topology) {
                return Err(CtrlError::TableTopologyMismatch { mode });
            }
        }
        Ok(())
    }
}

/// Where the controller is in its command/detect/switch cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// No transition pending.
    Steady,
    /// A mode command is latched; the zero detector is armed on the watch port.
    Armed,
    /// Zero detected; the gate stage sequence is being clocked out.
    Switching,
    /// Final gates applied this tick; next tick returns to `Steady`.
    DoneLogging,
}

/// One stage of a gate transition and how many ticks to hold it before the
/// next stage may be applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GateStage {
    pub gates: GateStates,
    pub hold_samples: u32,
}

/// Record of one completed (or in-flight) mode switch.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    /// Time of the sample whose averaged power first fell inside the zero band.
    pub detected_at: f64,
    pub from: RouterMode,
    pub to: RouterMode,
    /// Time the final gate states took effect; `None` while stages are still
    /// being clocked out.
    pub completed_at: Option<f64>,
}

/// What `Controller::step` wants done with the gates this tick.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutput {
    NoChange,
    Apply(GateStates),
}

/// Break-before-make stage sequence from `old` to `new`.
///
/// The intermediate state closes only switches common to both (bitwise AND),
/// so the sequence only ever opens contacts before it closes new ones. When
/// one state's closed set contains the other's, the intermediate would equal
/// one endpoint and is skipped.
pub fn gate_sequence(
    old: &GateStates,
    new: &GateStates,
    dead_time_samples: u32,
) -> Result<Vec<GateStage>, CtrlError> {
    if old == new {
        return Err(CtrlError::IdenticalStates);
    }
    let mid = GateStates::from_map(
        old.iter()
            .map(|(sw, on)| (sw, on && new.is_on(sw)))
            .collect(),
    );
    let mut stages = Vec::new();
    if mid != *old && mid != *new {
        stages.push(GateStage {
            gates: mid,
            hold_samples: dead_time_samples,
        });
    }
    stages.push(GateStage {
        gates: new.clone(),
        hold_samples: 0,
    });
    Ok(stages)
}

/// The mode-switching state machine.
///
/// Drive it once per sample with the current averaged powers; it answers with
/// the gate states to apply from the next sample on, if any.
#[derive(Debug, Clone)]
pub struct Controller {
    table: GateLookupTable,
    detector: ZeroDetector,
    dead_time_samples: u32,
    current: RouterMode,
    pending: Option<RouterMode>,
    watch_port: Option<PortId>,
    phase: Phase,
    stages: Vec<GateStage>,
    next_stage: usize,
    hold_remaining: u32,
    events: Vec<SwitchEvent>,
}

impl Controller {
    pub fn new(
        table: GateLookupTable,
        detector: ZeroDetector,
        dead_time_samples: u32,
        initial_mode: RouterMode,
    ) -> Result<Self, CtrlError> {
        if !table.contains(initial_mode) {
            return Err(CtrlError::UnknownMode(initial_mode));
        }
        Ok(Self {
            table,
            detector,
            dead_time_samples,
            current: initial_mode,
            pending: None,
            watch_port: None,
            phase: Phase::Steady,
            stages: Vec::new(),
            next_stage: 0,
            hold_remaining: 0,
            events: Vec::new(),
        })
    }

    pub fn current_mode(&self) -> RouterMode {
        self.current
    }

    pub fn pending_mode(&self) -> Option<RouterMode> {
        self.pending
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn table(&self) -> &GateLookupTable {
        &self.table
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    /// Gate states of the current mode (the steady-state output).
    pub fn current_gates(&self) -> &GateStates {
        &self.table.get(self.current).expect("current mode validated at construction").gates
    }

    /// Latch a mode command and arm the zero detector on `watch`.
    ///
    /// The gates do not change here; they change on the first later sample
    /// whose averaged power at `watch` sits inside the zero band.
    pub fn issue_mode_command(&mut self, target: RouterMode, watch: PortId) -> Result<(), CtrlError> {
        if self.phase != Phase::Steady {
            return Err(CtrlError::Busy {
                pending: self.pending.expect("non-steady phase implies a pending mode"),
            });
        }
        if target == self.current {
            return Err(CtrlError::NoOpCommand(target));
        }
        self.table.get(target)?;
        self.pending = Some(target);
        self.watch_port = Some(watch);
        self.detector.arm();
        self.phase = Phase::Armed;
        Ok(())
    }

    /// Advance one sample.
    ///
    /// `averages` carries the latest windowed power per port, `None` while a
    /// port's window is still priming. A priming watch port simply defers
    /// detection; a watch port missing from the map entirely is a wiring bug
    /// and an error.
    pub fn step(
        &mut self,
        t: f64,
        averages: &BTreeMap<PortId, Option<f64>>,
    ) -> Result<StepOutput, CtrlError> {
        match self.phase {
            Phase::Steady => Ok(StepOutput::NoChange),
            Phase::Armed => {
                let watch = self.watch_port.expect("armed phase implies a watch port");
                let avg = averages
                    .get(&watch)
                    .copied()
                    .ok_or(CtrlError::MissingWatchAverage(watch))?;
                let Some(avg) = avg else {
                    return Ok(StepOutput::NoChange);
                };
                if !self.detector.detect(avg) {
                    return Ok(StepOutput::NoChange);
                }
                // Zero crossing found: record the event and clock out the
                // first stage of the gate sequence.
                let target = self.pending.expect("armed phase implies a pending mode");
                self.detector.disarm();
                self.events.push(SwitchEvent {
                    detected_at: t,
                    from: self.current,
                    to: target,
                    completed_at: None,
                });
                let old = self.table.get(self.current)?.gates.clone();
                let new = self.table.get(target)?.gates.clone();
                self.stages = gate_sequence(&old, &new, self.dead_time_samples)?;
                self.next_stage = 0;
                self.phase = Phase::Switching;
                Ok(self.advance_stage(t))
            }
            Phase::Switching => {
                if self.hold_remaining > 0 {
                    self.hold_remaining -= 1;
                    return Ok(StepOutput::NoChange);
                }
                Ok(self.advance_stage(t))
            }
            Phase::DoneLogging => {
                self.phase = Phase::Steady;
                Ok(StepOutput::NoChange)
            }
        }
    }

    fn advance_stage(&mut self, t: f64) -> StepOutput {
        let stage = self.stages[self.next_stage].clone();
        self.next_stage += 1;
        if self.next_stage == self.stages.len() {
            // Final stage: the transition is complete.
            let target = self.pending.take().expect("switching phase implies a pending mode");
            self.watch_port = None;
            self.current = target;
            self.phase = Phase::DoneLogging;
            let event = self.events.last_mut().expect("switching phase implies an open event");
            event.completed_at = Some(t);
        } else {
            self.hold_remaining = stage.hold_samples;
        }
        StepOutput::Apply(stage.gates)
    }
}
