//! `qbridge`: run any library module from a JSON config or flags.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use config::CommandName;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qbridge", version, about = "Semiclassical quantization and equilibrium phase-space tools")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<String>,
    #[arg(long, global = true, value_parser = ["paper", "normalized"])]
    normalization: Option<String>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct Common {
    /// Potential as a JSON file path or an inline JSON object.
    #[arg(long, value_name = "JSON")]
    potential: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long = "k-b")]
    k_b: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Characteristic function on a (q, delta_q) grid.
    Wigner {
        #[command(flatten)]
        common: Common,
        /// start:stop:count
        #[arg(long, allow_hyphen_values = true)]
        q: Option<String>,
        /// start:stop:count
        #[arg(long, allow_hyphen_values = true)]
        dq: Option<String>,
        /// Normalization box lo:hi.
        #[arg(long = "box", allow_hyphen_values = true)]
        bounds: Option<String>,
        #[arg(long, value_parser = ["corrected", "as_printed"])]
        form: Option<String>,
    },
    /// Equilibria and curvature-matched temperatures.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// lo:hi
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Entropy and free-energy profile.
    Thermo {
        #[command(flatten)]
        common: Common,
        /// start:stop:count
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Bohr-Sommerfeld spectrum.
    Quantize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["auto", "libration", "rotation"])]
        class: Option<String>,
        /// n0..n1, inclusive
        #[arg(long)]
        levels: Option<String>,
        #[arg(long, value_parser = ["on", "off"])]
        oracle: Option<String>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Classical action and time-sliced kernel phase.
    Propagate {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long)]
        time: Option<f64>,
        /// N[,N2,...]
        #[arg(long)]
        slices: Option<String>,
        /// auto or a number
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<String>,
    },
    /// Finite-difference eigenvalues.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Number of levels.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, value_parser = ["dirichlet", "periodic"])]
        boundary: Option<String>,
        /// lo:hi
        #[arg(long = "box", allow_hyphen_values = true)]
        bounds: Option<String>,
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long, value_parser = ["on", "off"])]
        richardson: Option<String>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        vectors: bool,
    },
}

/// Overrides collected from flags, applied on top of the config document.
struct Patch<'a> {
    doc: &'a mut Map<String, Value>,
}

impl Patch<'_> {
    fn section(&mut self, key: &str) -> Result<&mut Map<String, Value>, CliError> {
        let entry = self.doc.entry(key).or_insert_with(|| Value::Object(Map::new()));
        if entry.is_null() {
            *entry = Value::Object(Map::new());
        }
        entry
            .as_object_mut()
            .ok_or_else(|| CliError::validation(key, "must be a JSON object"))
    }

    fn set(&mut self, section: &str, key: &str, value: Option<Value>) -> Result<(), CliError> {
        if let Some(value) = value {
            self.section(section)?.insert(key.to_string(), value);
        }
        Ok(())
    }

    fn common(&mut self, c: Common) -> Result<(), CliError> {
        if let Some(p) = c.potential {
            self.doc.insert("potential".into(), load_potential(&p)?);
        }
        self.set("ensemble", "beta", c.beta.map(Value::from))?;
        self.set("ensemble", "hbar", c.hbar.map(Value::from))?;
        self.set("ensemble", "k_B", c.k_b.map(Value::from))
    }

    fn option(&mut self, key: &str, value: Option<impl Into<Value>>) -> Result<(), CliError> {
        self.set("options", key, value.map(Into::into))
    }
}

fn on_off(s: Option<String>) -> Option<bool> {
    s.map(|s| s == "on")
}

fn load_potential(arg: &str) -> Result<Value, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::validation("potential", &format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::validation("potential", &format!("malformed JSON: {e}")))
}

fn load_config(path: &PathBuf) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("config", &format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::validation("config", "must be a JSON object")),
        Err(e) => Err(CliError::validation("config", &format!("malformed JSON: {e}"))),
    }
}

fn build_document(cli: Cli) -> Result<Value, CliError> {
    let mut doc = match &cli.config {
        Some(path) => load_config(path)?,
        None => Map::new(),
    };
    let mut patch = Patch { doc: &mut doc };
    if let Some(command) = cli.command {
        let name = match command {
            Command::Wigner { common, q, dq, bounds, form } => {
                patch.common(common)?;
                patch.option("q", q)?;
                patch.option("dq", dq)?;
                patch.option("box", bounds)?;
                patch.option("form", form)?;
                CommandName::Wigner
            }
            Command::Equilibrium { common, interval, tolerance } => {
                patch.common(common)?;
                patch.option("interval", interval)?;
                patch.option("tolerance", tolerance)?;
                CommandName::Equilibrium
            }
            Command::Thermo { common, grid } => {
                patch.common(common)?;
                patch.option("grid", grid)?;
                CommandName::Thermo
            }
            Command::Quantize { common, class, levels, oracle, order, grid_points } => {
                patch.common(common)?;
                patch.option("class", class)?;
                patch.option("levels", levels)?;
                patch.option("oracle", on_off(oracle))?;
                patch.option("order", order)?;
                patch.option("grid_points", grid_points)?;
                CommandName::Quantize
            }
            Command::Propagate { common, from, to, time, slices, energy } => {
                patch.common(common)?;
                patch.option("from", from)?;
                patch.option("to", to)?;
                patch.option("time", time)?;
                patch.option("slices", slices)?;
                patch.option("energy", energy)?;
                CommandName::Propagate
            }
            Command::Oracle { common, levels, boundary, bounds, grid_points, richardson, tolerance, vectors } => {
                patch.common(common)?;
                patch.option("levels", levels)?;
                patch.option("boundary", boundary)?;
                patch.option("box", bounds)?;
                patch.option("grid_points", grid_points)?;
                patch.option("richardson", on_off(richardson))?;
                patch.option("tolerance", tolerance)?;
                patch.option("vectors", vectors.then_some(true))?;
                CommandName::Oracle
            }
        };
        match doc.get("command") {
            Some(Value::String(existing)) if existing != name.as_str() => {
                return Err(CliError::validation(
                    "command",
                    &format!("config is for `{existing}` but `{}` was invoked", name.as_str()),
                ));
            }
            _ => {
                doc.insert("command".into(), Value::from(name.as_str()));
            }
        }
    } else if cli.config.is_none() {
        return Err(CliError::validation("command", "give a subcommand or --config"));
    }
    for (key, value) in [("format", cli.format), ("out", cli.out), ("normalization", cli.normalization)] {
        if let Some(v) = value {
            doc.insert(key.into(), Value::from(v));
        }
    }
    Ok(Value::Object(doc))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = config::resolve(build_document(cli)?)?;
    let artifact = commands::run(&config)?;
    let text = output::render(&config, &artifact);
    match &config.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e))
        }
    }
}

fn report(err: &CliError) -> ExitCode {
    let text = serde_json::to_string(err).expect("error object serializes");
    eprintln!("{text}");
    ExitCode::from(err.exit_code() as u8)
}

fn clap_failure(err: &clap::Error) -> CliError {
    let field = match err.get(ContextKind::InvalidArg) {
        Some(ContextValue::String(s)) => s.clone(),
        _ => match err.kind() {
            ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand => "command".into(),
            _ => "arguments".into(),
        },
    };
    let message = err.render().to_string();
    let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
    CliError::validation(&field, first)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => return report(&clap_failure(&err)),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report(&err),
    }
}
