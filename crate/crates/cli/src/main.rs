use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phenokin::{AdvectionScheme, ModelKind, Profile, SimConfig, SimError};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "phenokin",
    version,
    about = "Phenotype-structured population simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single model and write its moments, snapshots and manifest.
    Run(RunArgs),
    /// Run the limit equation, the IDE per epsilon and the ABM per (epsilon, seed)
    /// for each drift value and write comparison reports.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    /// Comma-separated snapshot times.
    #[arg(long, value_name = "CSV-LIST")]
    snapshot_times: Option<String>,
    /// Discretization of the drift term in the limit equation.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Record invariant violations as manifest warnings instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Extra `key=value` assignments applied after the configuration file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Drift values; defaults to -0.3, 0 and 0.3.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Vec<f64>,
    /// Scaling parameters; defaults to 1, 10^(-1/2) and 0.1.
    #[arg(long)]
    epsilon: Vec<f64>,
    /// Number of agent-based replicates per (alpha, epsilon); 0 skips the ABM.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// First seed; replicate i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Abm,
    Ide,
    Pde,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Abm => ModelKind::Abm,
            ModelArg::Ide => ModelKind::Ide,
            ModelArg::Pde => ModelKind::Pde,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Upwind,
    Central,
}

impl CommonArgs {
    /// Profile preset, then the configuration file, then positional
    /// overrides, then dedicated flags.
    fn resolve(&self) -> phenokin::Result<SimConfig> {
        let profile = match self.profile {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        };
        let mut cfg = SimConfig::for_profile(profile);
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                SimError::config("config", format!("cannot read {}: {e}", path.display()))
            })?;
            cfg.apply_text(&text)?;
        }
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(scheme) = self.scheme {
            cfg.scheme = match scheme {
                SchemeArg::Upwind => AdvectionScheme::Upwind,
                SchemeArg::Central => AdvectionScheme::Central,
            };
        }
        match &self.snapshot_times {
            Some(list) => cfg.snapshot_times = parse_times(list)?,
            None => cfg.snapshot_times = vec![cfg.t_final],
        }
        Ok(cfg)
    }
}

fn parse_times(list: &str) -> phenokin::Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| SimError::config("snapshot_times", format!("`{s}` is not a number")))
        })
        .collect()
}

fn exit_code(err: &SimError) -> u8 {
    match err {
        SimError::Config { .. } | SimError::Guard { .. } | SimError::Usage(_) => 2,
        SimError::Invariant { .. } => 3,
        SimError::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.common.resolve().and_then(|mut cfg| {
            cfg.model = args.model.into();
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(a) = args.alpha {
                cfg.alpha = a;
            }
            if let Some(e) = args.epsilon {
                cfg.epsilon = e;
            }
            commands::run(&cfg, &args.common.out_dir, args.common.lenient)
        }),
        Command::Compare(args) => args.common.resolve().and_then(|mut cfg| {
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let alphas = if args.alpha.is_empty() {
                vec![-0.3, 0.0, 0.3]
            } else {
                args.alpha
            };
            let epsilons = if args.epsilon.is_empty() {
                vec![1.0, 10f64.powf(-0.5), 0.1]
            } else {
                args.epsilon
            };
            let plan = commands::ComparePlan {
                alphas,
                epsilons,
                seeds: (0..args.seeds).map(|i| cfg.seed.wrapping_add(i)).collect(),
                jobs: args.jobs,
                lenient: args.common.lenient,
            };
            commands::compare(&cfg, &plan, &args.common.out_dir)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
