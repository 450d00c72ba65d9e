use std::path::PathBuf;

use clap::{Parser, Subcommand};
use qcloak_cli::commands::{self, Scenario};
use qcloak_cli::config::{ExperimentConfig, Overrides};
use qcloak_cli::output::{Manifest, RunDir};

#[derive(Parser)]
#[command(name = "qcloak", version, about = "Approximate quantum cloak experiments")]
struct Cli {
    /// TOML experiment configuration; a previous run's manifest.toml works too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory receiving tables and the run manifest.
    #[arg(long, global = true, env = "QCLOAK_OUTPUT_DIR", default_value = "qcloak-out")]
    output_dir: PathBuf,

    /// Run even when the energy is next to an excluded eigenvalue.
    #[arg(long, global = true)]
    force: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the layered medium and its gauge potential.
    Synthesize,
    /// Phase shifts of every channel.
    PhaseShifts,
    /// Boundary channel values against free space.
    DnCompare,
    /// DN deviation and total cross section along a sequence of radii.
    Convergence,
    /// Reproduce one of the three reference configurations.
    Scenario {
        #[arg(value_enum)]
        name: Scenario,
    },
    /// Driven interior response over the scan window.
    ResonanceScan {
        /// Scan the two-shell toy with its pole at (pi/6)^2 instead.
        #[arg(long)]
        toy: bool,
    },
    /// Plane-wave total field on the segment and the y = 0 slice.
    FieldMap,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Synthesize => "synthesize".into(),
            Command::PhaseShifts => "phase-shifts".into(),
            Command::DnCompare => "dn-compare".into(),
            Command::Convergence => "convergence".into(),
            Command::Scenario { name } => format!("scenario {}", name.name()),
            Command::ResonanceScan { toy: true } => "resonance-scan --toy".into(),
            Command::ResonanceScan { toy: false } => "resonance-scan".into(),
            Command::FieldMap => "field-map".into(),
        }
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply(&cli.overrides)?;
    config.validate()?;

    let manifest_config = match &cli.command {
        Command::Scenario { name } => name.config(&config),
        _ => config.clone(),
    };
    let mut dir = RunDir::create(&cli.output_dir, Manifest::new(&cli.command.name(), &manifest_config))?;
    let lines = match cli.command {
        Command::Synthesize => commands::run_synthesize(&config, &mut dir)?,
        Command::PhaseShifts => commands::run_phase_shifts(&config, cli.force, &mut dir)?,
        Command::DnCompare => commands::run_dn_compare(&config, cli.force, &mut dir)?,
        Command::Convergence => commands::run_convergence(&config, cli.force, &mut dir)?,
        Command::Scenario { name } => commands::run_scenario(&config, name, cli.force, &mut dir)?,
        Command::ResonanceScan { toy } => commands::run_resonance_scan(&config, toy, &mut dir)?,
        Command::FieldMap => commands::run_field_map(&config, cli.force, &mut dir)?,
    };
    for line in lines {
        println!("{line}");
    }
    for path in dir.written() {
        println!("wrote {}", path.display());
    }
    Ok(())
}
