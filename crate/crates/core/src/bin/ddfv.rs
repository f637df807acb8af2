use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddfv::config::{Experiment, Preset, RunConfig};
use ddfv::runs::execute;
use ddfv::{DdfvError, SchemeKind};

#[derive(Parser)]
#[command(name = "ddfv", version, about = "Finite volume experiments for degenerate drift-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; its `experiment` must match the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Restrict to these schemes (repeatable): centered, sedan, activity, bess_ch.
    #[arg(long, global = true)]
    scheme: Vec<SchemeKind>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evolution on a 1D interval with blocking contacts.
    Run1d {
        /// Initial data preset: evoli, evolii or evoliii.
        #[arg(long, value_parser = parse_preset)]
        preset: Option<Preset>,
    },
    /// Stationary or transient grid-refinement study.
    Converge1d,
    /// Gate-voltage sweep of the FET.
    Fet {
        /// Uniform refinements of the coarse triangulation.
        #[arg(long)]
        n_ref: Option<u32>,
    },
    /// Face concentration of every scheme over a potential jump range.
    FaceConcentration,
    /// Quick internal consistency checks.
    Selftest,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    match s {
        "evoli" => Ok(Preset::Evoli),
        "evolii" => Ok(Preset::Evolii),
        "evoliii" => Ok(Preset::Evoliii),
        _ => Err(format!("unknown preset {s:?}, expected evoli, evolii or evoliii")),
    }
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Run1d { .. } => Experiment::Run1d,
            Command::Converge1d => Experiment::Converge1d,
            Command::Fet { .. } => Experiment::Fet,
            Command::FaceConcentration => Experiment::FaceConcentration,
            Command::Selftest => Experiment::Selftest,
        }
    }
}

fn resolve(cli: &Cli) -> ddfv::Result<RunConfig> {
    let experiment = cli.command.experiment();
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(experiment),
    };
    if config.experiment != experiment {
        return Err(DdfvError::Config(format!(
            "configuration is for {}, not {}",
            config.experiment.name(),
            experiment.name()
        )));
    }
    if !cli.scheme.is_empty() {
        config.schemes = cli.scheme.clone();
    }
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    match cli.command {
        Command::Run1d { preset: Some(p) } => {
            // an explicit preset replaces whatever the file set
            config.run1d.preset = Some(p);
            let (c0, phi_left) = p.data();
            config.run1d.c0 = Some(c0);
            config.run1d.phi_left = Some(phi_left);
        }
        Command::Fet { n_ref: Some(n) } => config.fet.n_ref = n,
        _ => {}
    }
    config.run1d.resolve();
    config.validate()?;
    Ok(config)
}

fn exit_code(e: &DdfvError) -> u8 {
    match e {
        DdfvError::Config(_) | DdfvError::InvalidArgument(_) | DdfvError::Admissibility(_) => 3,
        DdfvError::SolverFailure { .. } | DdfvError::SingularSystem(_) | DdfvError::Domain { .. } => 2,
        DdfvError::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("DDFV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = resolve(&cli).and_then(|config| execute(&config));
    match result {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ddfv: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
