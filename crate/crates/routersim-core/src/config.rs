//! Scenario configuration files: a TOML schema mirroring the scenario
//! structure, strict parsing, and cross-field validation that reports every
//! violation with its field path.
//!
//! The canonical example lives at `configs/reference.toml` in the repository
//! root; the same text is embedded here as the built-in default so running
//! without a config file and running with the shipped file are identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::ctrl::{GateLookupTable, ModeEntry, RouterMode};
use crate::engine::{BatterySpec, Scenario, ScenarioEvent, SummaryWindows};
use crate::matrix::{PortId, SwitchId, SwitchTopology};
use crate::plant::{GridSource, HouseNet};

/// The shipped default scenario configuration (`configs/reference.toml`).
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/reference.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config validation failed:\n{}", violations.join("\n"))]
    Invalid { violations: Vec<String> },
}

/// Figure-slice windows, consumed by the CLI `figures` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureWindows {
    pub steady1_s: (f64, f64),
    pub steady2_s: (f64, f64),
    /// Half-width of the port-power zoom around the detected switch.
    pub switch_margin_s: f64,
    /// Half-width of the bus-voltage zoom around the detected switch.
    pub bus_margin_s: f64,
}

impl Default for FigureWindows {
    fn default() -> Self {
        Self {
            steady1_s: (0.4, 0.5),
            steady2_s: (3.4, 3.5),
            switch_margin_s: 0.2,
            bus_margin_s: 0.05,
        }
    }
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub scenario: Scenario,
    pub figures: FigureWindows,
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Parse and validate configuration text.
pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    raw.resolve()
}

// ---------------------------------------------------------------------------
// Raw schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioSection,
    sampling: SamplingSection,
    grid: GridSection,
    battery: BatterySection,
    controller: ControllerSection,
    #[serde(default)]
    topology: TopologySection,
    modes: Vec<ModeSection>,
    #[serde(default)]
    houses: Vec<HouseSection>,
    #[serde(default)]
    trace: TraceSection,
    #[serde(default)]
    summary: SummarySection,
    #[serde(default)]
    figures: FiguresSection,
    #[serde(default)]
    events: Vec<EventSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    duration_s: f64,
    initial_mode: u8,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingSection {
    fs_hz: f64,
    #[serde(default = "one")]
    averaging_periods: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    vrms: f64,
    f_line_hz: f64,
    #[serde(default)]
    phase_rad: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatterySection {
    port: u8,
    /// Initial power and reference, positive = charging.
    initial_power_w: f64,
    slew_w_per_s: f64,
    capacity_wh: f64,
    #[serde(default = "half")]
    initial_soc: f64,
    #[serde(default)]
    lag_s: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    epsilon_w: f64,
    dead_time_samples: u32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    /// "two_switch" (SW1A: 1-3, SW2A: 2-3) or "extended" (all eight switches).
    preset: Option<String>,
    #[serde(default)]
    switches: Vec<SwitchSection>,
    voltage_rating_v: Option<f64>,
    current_rating_a: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchSection {
    id: String,
    ports: [u8; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeSection {
    id: u8,
    #[serde(default)]
    label: Option<String>,
    /// Switches closed in this mode; everything else is open.
    on: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HouseSection {
    port: u8,
    net_injection_w: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceSection {
    #[serde(default = "one_usize")]
    decimate: usize,
}

fn one_usize() -> usize {
    1
}

impl Default for TraceSection {
    fn default() -> Self {
        Self { decimate: 1 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummarySection {
    pre_window_s: [f64; 2],
    post_window_s: [f64; 2],
}

impl Default for SummarySection {
    fn default() -> Self {
        Self {
            pre_window_s: [0.4, 0.9],
            post_window_s: [3.4, 3.9],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiguresSection {
    steady1_window_s: [f64; 2],
    steady2_window_s: [f64; 2],
    switch_margin_s: f64,
    bus_margin_s: f64,
}

impl Default for FiguresSection {
    fn default() -> Self {
        let d = FigureWindows::default();
        Self {
            steady1_window_s: [d.steady1_s.0, d.steady1_s.1],
            steady2_window_s: [d.steady2_s.0, d.steady2_s.1],
            switch_margin_s: d.switch_margin_s,
            bus_margin_s: d.bus_margin_s,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum EventSection {
    BatteryReference { t_s: f64, power_w: f64 },
    ModeCommand { t_s: f64, target: u8, watch_port: u8 },
}

// ---------------------------------------------------------------------------
// Resolution

/// Collects violations instead of failing fast, so one `validate` run shows
/// the user everything that is wrong.
struct Checker {
    violations: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Self {
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, path: &str, message: impl AsRef<str>) {
        self.violations.push(format!("{path}: {}", message.as_ref()));
    }

    fn require(&mut self, ok: bool, path: &str, message: impl AsRef<str>) {
        if !ok {
            self.fail(path, message);
        }
    }

    fn port(&mut self, index: u8, path: &str) -> Option<PortId> {
        match PortId::new(index) {
            Ok(p) => Some(p),
            Err(e) => {
                self.fail(path, e.to_string());
                None
            }
        }
    }
}

impl RawConfig {
    fn resolve(self) -> Result<LoadedConfig, ConfigError> {
        let mut check = Checker::new();
        let duration = self.scenario.duration_s;
        check.require(
            duration > 0.0,
            "scenario.duration_s",
            "must be positive",
        );
        check.require(self.sampling.fs_hz > 0.0, "sampling.fs_hz", "must be positive");
        check.require(self.grid.vrms > 0.0, "grid.vrms", "must be positive");
        check.require(
            self.grid.f_line_hz > 0.0,
            "grid.f_line_hz",
            "must be positive",
        );
        if self.sampling.fs_hz > 0.0 && self.grid.f_line_hz > 0.0 {
            let per_period = self.sampling.fs_hz / self.grid.f_line_hz;
            check.require(
                (per_period - per_period.round()).abs() < 1e-9,
                "sampling.fs_hz",
                format!(
                    "must be an integer multiple of grid.f_line_hz ({} / {} = {per_period})",
                    self.sampling.fs_hz, self.grid.f_line_hz
                ),
            );
        }
        check.require(
            self.sampling.averaging_periods >= 1,
            "sampling.averaging_periods",
            "must be at least 1",
        );
        check.require(
            self.controller.epsilon_w > 0.0,
            "controller.epsilon_w",
            "must be positive",
        );
        check.require(self.trace.decimate >= 1, "trace.decimate", "must be at least 1");
        check.require(
            self.battery.slew_w_per_s > 0.0,
            "battery.slew_w_per_s",
            "must be positive",
        );
        check.require(
            self.battery.capacity_wh > 0.0,
            "battery.capacity_wh",
            "must be positive",
        );
        check.require(
            (0.0..=1.0).contains(&self.battery.initial_soc),
            "battery.initial_soc",
            "must lie in 0..=1",
        );
        check.require(self.battery.lag_s >= 0.0, "battery.lag_s", "must be non-negative");

        let battery_port = check.port(self.battery.port, "battery.port");
        let topology = self.resolve_topology(&mut check);
        let table = self.resolve_modes(&topology, &mut check);
        let houses = self.resolve_houses(battery_port, &mut check);
        let events = self.resolve_events(duration, &table, &mut check);

        check.require(
            table.contains(RouterMode(self.scenario.initial_mode)),
            "scenario.initial_mode",
            format!("mode {} is not defined in [[modes]]", self.scenario.initial_mode),
        );

        for (path, [a, b]) in [
            ("summary.pre_window_s", self.summary.pre_window_s),
            ("summary.post_window_s", self.summary.post_window_s),
            ("figures.steady1_window_s", self.figures.steady1_window_s),
            ("figures.steady2_window_s", self.figures.steady2_window_s),
        ] {
            check.require(
                a < b && a >= 0.0 && b <= duration,
                path,
                format!("window [{a}, {b}] must fit inside the run (0..{duration})"),
            );
        }
        check.require(
            self.figures.switch_margin_s > 0.0,
            "figures.switch_margin_s",
            "must be positive",
        );
        check.require(
            self.figures.bus_margin_s > 0.0,
            "figures.bus_margin_s",
            "must be positive",
        );

        if !check.violations.is_empty() {
            return Err(ConfigError::Invalid {
                violations: check.violations,
            });
        }

        let scenario = Scenario {
            duration_s: duration,
            fs_hz: self.sampling.fs_hz,
            averaging_periods: self.sampling.averaging_periods,
            grid: GridSource::new(self.grid.vrms, self.grid.f_line_hz, self.grid.phase_rad)
                .expect("grid fields checked above"),
            battery: BatterySpec {
                port: battery_port.expect("battery port checked above"),
                initial_power_w: self.battery.initial_power_w,
                slew_w_per_s: self.battery.slew_w_per_s,
                capacity_wh: self.battery.capacity_wh,
                initial_soc: self.battery.initial_soc,
                lag_s: self.battery.lag_s,
            },
            houses,
            topology,
            table,
            initial_mode: RouterMode(self.scenario.initial_mode),
            epsilon_w: self.controller.epsilon_w,
            dead_time_samples: self.controller.dead_time_samples,
            events,
            trace_decimate: self.trace.decimate,
            summary_windows: SummaryWindows {
                pre_s: (self.summary.pre_window_s[0], self.summary.pre_window_s[1]),
                post_s: (self.summary.post_window_s[0], self.summary.post_window_s[1]),
            },
        };
        // The scenario's own validation backstops anything missed above.
        if let Err(e) = scenario.validate() {
            return Err(ConfigError::Invalid {
                violations: vec![e.to_string()],
            });
        }
        Ok(LoadedConfig {
            scenario,
            figures: FigureWindows {
                steady1_s: (
                    self.figures.steady1_window_s[0],
                    self.figures.steady1_window_s[1],
                ),
                steady2_s: (
                    self.figures.steady2_window_s[0],
                    self.figures.steady2_window_s[1],
                ),
                switch_margin_s: self.figures.switch_margin_s,
                bus_margin_s: self.figures.bus_margin_s,
            },
        })
    }

    fn resolve_topology(&self, check: &mut Checker) -> SwitchTopology {
        let voltage = self.topology.voltage_rating_v.unwrap_or(650.0);
        let current = self.topology.current_rating_a.unwrap_or(20.0);
        check.require(voltage > 0.0, "topology.voltage_rating_v", "must be positive");
        check.require(current > 0.0, "topology.current_rating_a", "must be positive");

        if !self.topology.switches.is_empty() {
            if self.topology.preset.is_some() {
                check.fail(
                    "topology",
                    "give either `preset` or explicit [[topology.switches]], not both",
                );
            }
            let mut bridges = BTreeMap::new();
            for (idx, sw) in self.topology.switches.iter().enumerate() {
                let path = format!("topology.switches[{idx}]");
                let Ok(id) = sw.id.parse::<SwitchId>() else {
                    check.fail(&path, format!("unknown switch name `{}`", sw.id));
                    continue;
                };
                let a = check.port(sw.ports[0], &path);
                let b = check.port(sw.ports[1], &path);
                let (Some(a), Some(b)) = (a, b) else { continue };
                if a == b {
                    check.fail(&path, format!("switch {id} bridges port {a} to itself"));
                    continue;
                }
                if bridges.insert(id, (a, b)).is_some() {
                    check.fail(&path, format!("switch {id} defined twice"));
                }
            }
            return SwitchTopology::new(bridges, voltage, current)
                .unwrap_or_else(|_| SwitchTopology::two_switch());
        }

        match self.topology.preset.as_deref() {
            None | Some("two_switch") => {
                let base = SwitchTopology::two_switch();
                SwitchTopology::new(base.bridges().collect(), voltage, current)
                    .expect("preset bridges are valid")
            }
            Some("extended") => {
                let base = SwitchTopology::extended_eight();
                SwitchTopology::new(base.bridges().collect(), voltage, current)
                    .expect("preset bridges are valid")
            }
            Some(other) => {
                check.fail(
                    "topology.preset",
                    format!("unknown preset `{other}` (expected `two_switch` or `extended`)"),
                );
                SwitchTopology::two_switch()
            }
        }
    }

    fn resolve_modes(&self, topology: &SwitchTopology, check: &mut Checker) -> GateLookupTable {
        check.require(!self.modes.is_empty(), "modes", "at least one mode is required");
        let mut entries = BTreeMap::new();
        for (idx, mode) in self.modes.iter().enumerate() {
            let path = format!("modes[{idx}]");
            let mut gates = topology.all_off();
            for name in &mode.on {
                let Ok(id) = name.parse::<SwitchId>() else {
                    check.fail(&path, format!("unknown switch name `{name}` in `on`"));
                    continue;
                };
                match gates.set_gate(id, true) {
                    Ok(next) => gates = next,
                    Err(e) => check.fail(&path, e.to_string()),
                }
            }
            let entry = ModeEntry {
                label: mode
                    .label
                    .clone()
                    .unwrap_or_else(|| format!("mode {}", mode.id)),
                gates,
            };
            if entries.insert(RouterMode(mode.id), entry).is_some() {
                check.fail(&path, format!("mode id {} defined twice", mode.id));
            }
        }
        GateLookupTable::new(entries)
    }

    fn resolve_houses(&self, battery_port: Option<PortId>, check: &mut Checker) -> Vec<HouseNet> {
        let mut houses = Vec::new();
        let mut seen = Vec::new();
        for (idx, house) in self.houses.iter().enumerate() {
            let path = format!("houses[{idx}]");
            let Some(port) = check.port(house.port, &path) else {
                continue;
            };
            if seen.contains(&port) {
                check.fail(&path, format!("port {port} already carries a house"));
                continue;
            }
            if battery_port == Some(port) {
                check.fail(&path, format!("port {port} is the battery port"));
                continue;
            }
            seen.push(port);
            houses.push(HouseNet {
                port,
                net_injection_w: house.net_injection_w,
            });
        }
        houses
    }

    fn resolve_events(
        &self,
        duration: f64,
        table: &GateLookupTable,
        check: &mut Checker,
    ) -> Vec<ScenarioEvent> {
        let mut events = Vec::new();
        let mut last_t = 0.0_f64;
        for (idx, event) in self.events.iter().enumerate() {
            let path = format!("events[{idx}]");
            let t_s = match *event {
                EventSection::BatteryReference { t_s, .. } => t_s,
                EventSection::ModeCommand { t_s, .. } => t_s,
            };
            check.require(
                t_s >= last_t,
                &path,
                format!("t_s={t_s} is earlier than the previous event at {last_t}"),
            );
            check.require(
                (0.0..=duration).contains(&t_s),
                &path,
                format!("t_s={t_s} falls outside the run duration {duration}"),
            );
            last_t = last_t.max(t_s);
            match *event {
                EventSection::BatteryReference { t_s, power_w } => {
                    events.push(ScenarioEvent::BatteryReference { t_s, power_w });
                }
                EventSection::ModeCommand {
                    t_s,
                    target,
                    watch_port,
                } => {
                    check.require(
                        table.contains(RouterMode(target)),
                        &path,
                        format!("target mode {target} is not defined in [[modes]]"),
                    );
                    let Some(watch) = check.port(watch_port, &path) else {
                        continue;
                    };
                    events.push(ScenarioEvent::ModeCommand {
                        t_s,
                        target: RouterMode(target),
                        watch_port: watch,
                    });
                }
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<String> {
        match parse_config(text).unwrap_err() {
            ConfigError::Invalid { violations } => violations,
            other => panic!("expected validation failure, got {other}"),
        }
    }

    #[test]
    fn shipped_default_matches_the_built_in_scenario() {
        let loaded = parse_config(DEFAULT_CONFIG).unwrap();
        assert_eq!(loaded.scenario, Scenario::reference());
        assert_eq!(loaded.figures, FigureWindows::default());
    }

    #[test]
    fn fractional_sampling_ratio_is_reported_with_its_path() {
        let text = DEFAULT_CONFIG.replace("fs_hz = 12000.0", "fs_hz = 10000.0");
        let v = violations(&text);
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("sampling.fs_hz:"), "got {v:?}");
    }

    #[test]
    fn negative_epsilon_is_reported_with_its_path() {
        let text = DEFAULT_CONFIG.replace("epsilon_w = 5.0", "epsilon_w = -5.0");
        let v = violations(&text);
        assert!(v.iter().any(|line| line.starts_with("controller.epsilon_w:")));
    }

    #[test]
    fn multiple_violations_are_all_reported() {
        let text = DEFAULT_CONFIG
            .replace("epsilon_w = 5.0", "epsilon_w = 0.0")
            .replace("decimate = 1", "decimate = 0")
            .replace("initial_soc = 0.5", "initial_soc = 1.5");
        let v = violations(&text);
        assert_eq!(v.len(), 3, "got {v:?}");
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let text = format!("{DEFAULT_CONFIG}\n[controller2]\nx = 1\n");
        assert!(matches!(
            parse_config(&text).unwrap_err(),
            ConfigError::Parse(_)
        ));
    }

    #[test]
    fn unknown_switch_in_mode_is_reported() {
        let text = DEFAULT_CONFIG.replace("on = [\"SW1A\"]", "on = [\"SW9Z\"]");
        let v = violations(&text);
        assert!(v.iter().any(|line| line.contains("unknown switch name `SW9Z`")));
    }

    #[test]
    fn unknown_initial_mode_is_reported() {
        let text = DEFAULT_CONFIG.replace("initial_mode = 1", "initial_mode = 9");
        let v = violations(&text);
        assert!(v.iter().any(|line| line.starts_with("scenario.initial_mode:")));
    }

    #[test]
    fn out_of_order_events_are_reported() {
        // Move the mode command before the battery reference in time.
        let text = DEFAULT_CONFIG.replace(
            "kind = \"mode_command\"\nt_s = 1.0",
            "kind = \"mode_command\"\nt_s = 0.5",
        );
        let v = violations(&text);
        assert!(v.iter().any(|line| line.starts_with("events[1]:")), "got {v:?}");
    }

    #[test]
    fn explicit_switch_list_builds_a_custom_topology() {
        let text = r#"
[scenario]
duration_s = 1.0
initial_mode = 1

[sampling]
fs_hz = 6000.0

[grid]
vrms = 200.0
f_line_hz = 60.0

[battery]
port = 4
initial_power_w = 100.0
slew_w_per_s = 500.0
capacity_wh = 1000.0

[controller]
epsilon_w = 5.0
dead_time_samples = 1

[[topology.switches]]
id = "SW1B"
ports = [1, 4]

[[modes]]
id = 1
on = ["SW1B"]

[[houses]]
port = 1
net_injection_w = 100.0

[summary]
pre_window_s = [0.1, 0.4]
post_window_s = [0.5, 0.9]

[figures]
steady1_window_s = [0.1, 0.2]
steady2_window_s = [0.8, 0.9]
switch_margin_s = 0.05
bus_margin_s = 0.02
"#;
        let loaded = parse_config(text).unwrap();
        assert_eq!(loaded.scenario.topology.len(), 1);
        assert!(loaded.scenario.topology.contains(SwitchId::Sw1B));
        assert_eq!(loaded.scenario.battery.port, PortId::new(4).unwrap());
    }

    #[test]
    fn preset_and_explicit_switches_conflict() {
        let text = DEFAULT_CONFIG.replace(
            "preset = \"two_switch\"",
            "preset = \"two_switch\"\n\n[[topology.switches]]\nid = \"SW1A\"\nports = [1, 3]",
        );
        let v = violations(&text);
        assert!(v.iter().any(|line| line.starts_with("topology:")), "got {v:?}");
    }

    #[test]
    fn extended_preset_widens_the_mode_tables() {
        // `on` names only the closed switches, so the same mode list stays
        // valid when the topology grows to all eight switches.
        let text = DEFAULT_CONFIG.replace("preset = \"two_switch\"", "preset = \"extended\"");
        let loaded = parse_config(&text).unwrap();
        assert_eq!(loaded.scenario.topology.len(), 8);
        loaded.scenario.validate().unwrap();
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_config(Path::new("/nonexistent/config.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }
}
