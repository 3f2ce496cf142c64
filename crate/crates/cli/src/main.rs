//! `torus-pressure`: batch front end for pressure estimation, decomposition,
//! gluing, expansivity and certificates on torus endomorphisms.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures. A numerical failure also writes `error.json` to the output
//! directory.

mod commands;
mod config;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use commands::Ctx;
use config::{config_error, ConfigError, Mode, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "torus-pressure", version, about = "Pressure laboratory for torus endomorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Key/value run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Sets)]
    mode: ModeArg,
    /// Bundled system: doubling, cat, endomorphism, product, center-linear or mane.
    #[arg(long, global = true)]
    system: Option<String>,
    /// Potential such as `cos(x1)` or `0.5*cos(x3) + 0.2`.
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    r: Option<f64>,
    #[arg(long, global = true)]
    n_min: Option<usize>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Any other configuration key, as `KEY=VALUE`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Sets,
    EigenOracle,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Topological entropy from separated sets.
    Entropy,
    /// Topological pressure of the configured potential.
    Pressure,
    /// Unstable pressure on an unstable disk.
    UPressure,
    /// Stable pressure through preimage branches of a stable segment.
    SPressure,
    /// Unstable minus stable pressure.
    Gap,
    /// Good-segment fractions and bad-collection pressure over a list of r.
    Decompose,
    /// Glues sampled good segments into one orbit.
    Glue,
    /// Expansivity diagnostic on sampled histories.
    Gamma,
    /// Runs the five numbered checks.
    Certify,
    /// Perturbs the system and potential and re-runs the gap.
    Scan,
    /// Writes the pitchfork example configuration.
    ExampleMane {
        #[arg(long, default_value_t = torus_pressure::systems::bundled::DEFAULT_STRENGTH)]
        strength: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::Pressure => "pressure",
            Command::UPressure => "u-pressure",
            Command::SPressure => "s-pressure",
            Command::Gap => "gap",
            Command::Decompose => "decompose",
            Command::Glue => "glue",
            Command::Gamma => "gamma",
            Command::Certify => "certify",
            Command::Scan => "scan",
            Command::ExampleMane { .. } => "example-mane",
        }
    }
}

fn overrides(cli: &Cli) -> anyhow::Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| config_error(format!("--set expects KEY=VALUE, got {kv}")))?;
        m.insert(k.trim().to_string(), v.trim().to_string());
    }
    let named = [
        ("system", cli.system.clone()),
        ("potential", cli.potential.clone()),
        ("delta", cli.delta.map(|x| format!("{x:?}"))),
        ("eps", cli.eps.map(|x| format!("{x:?}"))),
        ("r", cli.r.map(|x| format!("{x:?}"))),
        ("n_min", cli.n_min.map(|x| x.to_string())),
        ("n_max", cli.n_max.map(|x| x.to_string())),
        ("depth", cli.depth.map(|x| x.to_string())),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    }
    Ok(m)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    if let Command::ExampleMane { strength } = cli.command {
        return commands::example_mane(&cli.out, strength);
    }
    let mode = match cli.mode {
        ModeArg::Sets => Mode::Sets,
        ModeArg::EigenOracle => Mode::EigenOracle,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides(cli)?, cli.seed, cli.out.clone(), mode)?;
    let mut ctx = Ctx::new(cfg)?;
    match &cli.command {
        Command::Entropy | Command::Pressure => commands::topological(&mut ctx, cli.command.name()),
        Command::UPressure | Command::SPressure => commands::leaf_pressure(&mut ctx, cli.command.name()),
        Command::Gap => commands::gap(&mut ctx),
        Command::Decompose => commands::decompose(&mut ctx),
        Command::Glue => commands::glue(&mut ctx),
        Command::Gamma => commands::gamma(&mut ctx),
        Command::Certify => commands::certify(&mut ctx),
        Command::Scan => commands::scan(&mut ctx),
        Command::ExampleMane { .. } => unreachable!("handled above"),
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<ConfigError>().is_some()
            || matches!(
                c.downcast_ref::<torus_pressure::Error>(),
                Some(torus_pressure::Error::Config(_) | torus_pressure::Error::InvalidInput(_))
            )
    })
}

fn variant_name(e: &anyhow::Error) -> String {
    match e.chain().find_map(|c| c.downcast_ref::<torus_pressure::Error>()) {
        Some(inner) => {
            let dbg = format!("{inner:?}");
            dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
        }
        None => "Io".to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_config_error(&e) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("numerical failure: {e:#}");
            let mut m = report::record("error");
            m.insert("command".into(), Value::from(cli.command.name()));
            m.insert(
                "error".into(),
                serde_json::json!({ "kind": variant_name(&e), "message": format!("{e:#}") }),
            );
            if let Err(w) = report::write_json(&cli.out, "error.json", &Value::Object(m)) {
                eprintln!("could not write error.json: {w:#}");
            }
            ExitCode::from(3)
        }
    }
}
