use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;
use stirap_cli::{run, CliError, Command, Layer, RunConfig};

#[derive(Parser)]
#[command(name = "stirap", version, about = "Atom-molecule STIRAP simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML config, or a manifest.json from an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for map/sweep/optimize cells
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Free-bound detuning, e.g. `-103.6` or `-103.6MHz`
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta1: Option<String>,

    /// Free-bound detuning in units of γ_b
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta1_over_gamma_b: Option<String>,

    /// Free-bound pulse centre, e.g. `3.77tau` or `8976us`
    #[arg(long, global = true, allow_hyphen_values = true)]
    t1: Option<String>,

    /// Bound-bound pulse centre
    #[arg(long, global = true, allow_hyphen_values = true)]
    t2: Option<String>,

    /// Excited-molecule decay rate
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma_b: Option<String>,

    /// Peak Rabi frequency
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega0: Option<String>,

    /// Pulse width
    #[arg(long, global = true, allow_hyphen_values = true)]
    tau: Option<String>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    reltol: Option<String>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    abstol: Option<String>,

    /// Any config key, `KEY=VALUE` in TOML syntax; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Integrate one pulse sequence; writes trajectory.csv
    Evolve,
    /// Dark-state populations against Ω₁/Ω₂; writes cpt.csv
    Cpt,
    /// Dark-state stability over (Ω₂/Ω₁, Δ₁/Ω₁); writes stability_map.csv
    StabilityMap,
    /// Conversion efficiency over (Δ₁, t₁); writes sweep.csv
    Sweep,
    /// Search (Δ₁, delay) for the best conversion; writes optimize.csv
    Optimize,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Evolve => Command::Evolve,
            Cmd::Cpt => Command::Cpt,
            Cmd::StabilityMap => Command::StabilityMap,
            Cmd::Sweep => Command::Sweep,
            Cmd::Optimize => Command::Optimize,
        }
    }
}

fn layers(cli: &Cli) -> Result<Vec<Layer>, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = &cli.config {
        layers.push(Layer::from_file(path)?);
    }
    let mut set = Layer::new();
    for a in &cli.set {
        set.set_assignment(a)?;
    }
    layers.push(set);

    let mut flags = Layer::new();
    let named = [
        ("delta1", &cli.delta1),
        ("delta1_over_gamma_b", &cli.delta1_over_gamma_b),
        ("t1", &cli.t1),
        ("t2", &cli.t2),
        ("gamma_b", &cli.gamma_b),
        ("omega0", &cli.omega0),
        ("tau", &cli.tau),
        ("reltol", &cli.reltol),
        ("abstol", &cli.abstol),
    ];
    for (key, value) in named {
        if let Some(v) = value {
            flags.set(key, Value::String(v.clone()))?;
        }
    }
    if let Some(n) = cli.threads {
        flags.set("threads", Value::from(n))?;
    }
    layers.push(flags);
    Ok(layers)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = layers(&cli)
        .and_then(|l| RunConfig::from_layers(&l).map_err(CliError::from))
        .and_then(|config| run(cli.command.into(), &config, &cli.out));
    match result {
        Ok(report) => {
            println!("wrote {} and {}", report.csv.display(), report.manifest.display());
            for (k, v) in &report.results {
                println!("  {k} = {v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
