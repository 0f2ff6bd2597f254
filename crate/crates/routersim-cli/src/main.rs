//! `routersim` — run, validate, and slice power-router scenarios.
//!
//! Three subcommands share one config format: `run` executes a scenario and
//! writes the trace and energy ledger next to a JSON summary on stdout,
//! `validate` reports every config violation with its field path, and
//! `figures` cuts a written trace into the plot-ready zoom windows. Exit
//! codes are 0 for success, 1 for config or file problems, and 2 for
//! simulation faults.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use routersim_core::config::DEFAULT_CONFIG;
use routersim_core::engine::write_csv;
use routersim_core::{load_config, parse_config, run_scenario, ConfigError, LoadedConfig};

#[derive(Parser)]
#[command(name = "routersim", version, about = "Line-switching power router simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; write trace.csv and ledger.csv, print a JSON summary
    Run {
        /// Scenario config (TOML); the bundled default scenario when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Keep every Nth trace row (overrides the config)
        #[arg(long)]
        decimate: Option<usize>,
    },
    /// Check a config and report every violation with its field path
    Validate {
        /// Scenario config (TOML); the bundled default scenario when omitted
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Slice a written trace into plot-ready figure CSVs
    Figures {
        /// Scenario config (TOML); supplies the figure windows
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory holding trace.csv; slices are written beside it
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// A command failure carrying its exit code: 1 for config and file
/// problems, 2 for simulation faults.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn simulation(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, decimate } => cmd_run(config.as_deref(), &out, decimate),
        Command::Validate { config } => cmd_validate(config.as_deref()),
        Command::Figures { config, out } => cmd_figures(config.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("routersim: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn load(config: Option<&Path>) -> Result<LoadedConfig, ConfigError> {
    match config {
        Some(path) => load_config(path),
        None => parse_config(DEFAULT_CONFIG),
    }
}

fn cmd_run(config: Option<&Path>, out_dir: &Path, decimate: Option<usize>) -> Result<(), Failure> {
    let mut loaded = load(config).map_err(|e| Failure::config(e.to_string()))?;
    if let Some(decimate) = decimate {
        if decimate == 0 {
            return Err(Failure::config("--decimate must be at least 1"));
        }
        loaded.scenario.trace_decimate = decimate;
    }

    let output = run_scenario(&loaded.scenario).map_err(|e| Failure::simulation(e.to_string()))?;

    fs::create_dir_all(out_dir)
        .map_err(|e| Failure::config(format!("cannot create `{}`: {e}", out_dir.display())))?;
    let trace_path = out_dir.join("trace.csv");
    let trace = fs::File::create(&trace_path)
        .map_err(|e| Failure::config(format!("cannot write `{}`: {e}", trace_path.display())))?;
    let mut trace = BufWriter::new(trace);
    write_csv(&mut trace, &loaded.scenario.topology, &output.records)
        .and_then(|_| trace.flush())
        .map_err(|e| Failure::config(format!("cannot write `{}`: {e}", trace_path.display())))?;

    let ledger_path = out_dir.join("ledger.csv");
    let ledger = fs::File::create(&ledger_path)
        .map_err(|e| Failure::config(format!("cannot write `{}`: {e}", ledger_path.display())))?;
    let mut ledger = BufWriter::new(ledger);
    output
        .ledger
        .write_csv(&mut ledger)
        .and_then(|_| ledger.flush())
        .map_err(|e| Failure::config(format!("cannot write `{}`: {e}", ledger_path.display())))?;

    let summary = serde_json::to_string_pretty(&output.summary)
        .expect("summary serializes to JSON");
    println!("{summary}");
    Ok(())
}

fn cmd_validate(config: Option<&Path>) -> Result<(), Failure> {
    match load(config) {
        Ok(loaded) => {
            println!(
                "ok: {} s at {} Hz, {} mode(s), {} event(s)",
                loaded.scenario.duration_s,
                loaded.scenario.fs_hz,
                loaded.scenario.table.modes().count(),
                loaded.scenario.events.len(),
            );
            Ok(())
        }
        Err(e) => Err(Failure::config(e.to_string())),
    }
}

/// One parsed trace line: the verbatim text plus the fields slicing needs.
struct TraceLine {
    text: String,
    t: f64,
    mode: u8,
}

fn cmd_figures(config: Option<&Path>, out_dir: &Path) -> Result<(), Failure> {
    let loaded = load(config).map_err(|e| Failure::config(e.to_string()))?;
    let windows = &loaded.figures;

    let trace_path = out_dir.join("trace.csv");
    let raw = fs::read_to_string(&trace_path)
        .map_err(|e| Failure::config(format!("cannot read `{}`: {e}", trace_path.display())))?;
    let (header, lines) = parse_trace(&raw, &trace_path)?;

    // The switch zooms center on the first mode change in the trace.
    let switch_t = lines
        .windows(2)
        .find(|pair| pair[1].mode != pair[0].mode)
        .map(|pair| pair[1].t)
        .ok_or_else(|| {
            Failure::config(format!("`{}` contains no mode change to zoom on", trace_path.display()))
        })?;

    let slices = [
        ("fig_full.csv", f64::NEG_INFINITY, f64::INFINITY),
        ("fig_steady1.csv", windows.steady1_s.0, windows.steady1_s.1),
        ("fig_steady2.csv", windows.steady2_s.0, windows.steady2_s.1),
        (
            "fig_switch_port3.csv",
            switch_t - windows.switch_margin_s,
            switch_t + windows.switch_margin_s,
        ),
        (
            "fig_bus_voltage.csv",
            switch_t - windows.bus_margin_s,
            switch_t + windows.bus_margin_s,
        ),
    ];
    for (name, t_start, t_end) in slices {
        let rows: Vec<&str> = lines
            .iter()
            .filter(|line| t_start <= line.t && line.t < t_end)
            .map(|line| line.text.as_str())
            .collect();
        if rows.is_empty() {
            return Err(Failure::config(format!(
                "{name}: window [{t_start}, {t_end}) s contains no trace rows"
            )));
        }
        let path = out_dir.join(name);
        let mut body = String::with_capacity(raw.len().min(rows.len() * 128 + header.len() + 2));
        body.push_str(header);
        body.push('\n');
        for row in &rows {
            body.push_str(row);
            body.push('\n');
        }
        fs::write(&path, body)
            .map_err(|e| Failure::config(format!("cannot write `{}`: {e}", path.display())))?;
        println!("wrote {} ({} rows)", path.display(), rows.len());
    }
    Ok(())
}

/// Split a trace file into its header and parsed data lines. Rows are kept
/// verbatim; only the time and mode columns are interpreted.
fn parse_trace<'a>(raw: &'a str, path: &Path) -> Result<(&'a str, Vec<TraceLine>), Failure> {
    let malformed = |what: &str| {
        Failure::config(format!("`{}` is not a trace file: {what}", path.display()))
    };
    let mut lines = raw.lines();
    let header = lines.next().ok_or_else(|| malformed("empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"t") {
        return Err(malformed("first column is not `t`"));
    }
    let mode_idx = columns
        .iter()
        .position(|&c| c == "mode")
        .ok_or_else(|| malformed("no `mode` column"))?;
    let mut parsed = Vec::new();
    for line in lines {
        let mut fields = line.split(',');
        let t = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| malformed("unparseable time value"))?;
        let mode = fields
            .nth(mode_idx - 1)
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| malformed("unparseable mode value"))?;
        parsed.push(TraceLine { text: line.to_string(), t, mode });
    }
    Ok((header, parsed))
}
