//! Waveform-level simulator of a line-switching bidirectional power router.
//!
//! The router is a crossbar of bidirectional switches: closing one switch
//! joins a pair of ports into an isolated circuit, so each power transaction
//! flows over its own physical path. Re-routing never interrupts a live
//! transfer — the controller watches the moving-average power through the
//! affected port and changes gates only once that average sits inside a small
//! zero band.
//!
//! The crate is organized along the signal path:
//!
//! - [`matrix`]: switch topology, gate states, and port connectivity.
//! - [`sense`]: instantaneous power, the periodic moving average, and the
//!   zero-band detector.
//! - [`ctrl`]: the mode lookup table and the break-before-make switching
//!   state machine.
//! - [`plant`]: stiff AC line, slew-limited battery converter, and the
//!   per-port flow solver.
//! - [`engine`]: the fixed-step simulation loop, trace recording, energy
//!   ledger, and run summaries.
//! - [`config`]: TOML scenario files and their validation.
//!
//! ```
//! use routersim_core::{run_scenario, Scenario};
//!
//! let out = run_scenario(&Scenario::reference()).unwrap();
//! assert_eq!(out.summary.final_mode, 2);
//! assert_eq!(out.events.len(), 1);
//! ```

pub mod config;
pub mod ctrl;
pub mod engine;
pub mod matrix;
pub mod plant;
pub mod sense;

pub use config::{load_config, parse_config, ConfigError, FigureWindows, LoadedConfig};
pub use ctrl::{Controller, CtrlError, GateLookupTable, ModeEntry, RouterMode, SwitchEvent};
pub use engine::{
    run_scenario, EnergyLedger, RunOutput, Scenario, ScenarioEvent, SimError, Summary, TraceRecord,
};
pub use matrix::{
    connected_peer, connectivity, GateStates, MatrixError, Partition, PortId, SwitchId,
    SwitchTopology,
};
pub use plant::{BatteryState, GridSource, HouseNet, PlantError, PlantModel};
pub use sense::{PortSample, PowerAverager, SenseError, ZeroDetector};
