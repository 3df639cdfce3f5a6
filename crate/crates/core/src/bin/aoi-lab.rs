use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_core::harness::config::{default_config_text, parse_config, Experiment, ScenarioKind};
use aoi_core::harness::run_scenario;
use aoi_core::learning::Mode;

/// Run age-of-information learning experiments and write CSV tables.
#[derive(Debug, Parser)]
#[command(name = "aoi-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learning trajectory of a fixed roster against its best responses.
    Convergence(Overrides),
    /// Learning under roster changes.
    Churn(Overrides),
    /// Converged probability against roster size.
    SweepProbVsN(Overrides),
    /// Average age against roster size.
    SweepAgeVsN(Overrides),
    /// Price of anarchy against roster size.
    SweepPoaVsN(Overrides),
    /// Learning on the contention channel beside the round-robin schedule.
    RrCompare(Overrides),
    /// Run whatever scenario the configuration file names.
    Run {
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    frame_length: Option<usize>,
    /// Initial roster size (identical nodes).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// stochastic or expected.
    #[arg(long)]
    mode: Option<Mode>,
    /// Restart the learning-rate clock at every roster change.
    #[arg(long)]
    reinit_kappa: Option<bool>,
    /// Directory for tables and manifest [default: out/<scenario>].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn positive(name: &str, value: Option<usize>) -> Result<Option<usize>, String> {
    match value {
        Some(0) => Err(format!("--{name} must be at least 1")),
        v => Ok(v),
    }
}

fn load(kind: Option<ScenarioKind>, o: &Overrides) -> Result<Experiment, String> {
    let text = match (&o.config, kind) {
        (Some(path), _) => {
            std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?
        }
        (None, Some(kind)) => default_config_text(kind),
        (None, None) => return Err("`run` needs --config".into()),
    };
    let mut exp = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(kind) = kind {
        if exp.scenario.kind != kind {
            return Err(format!(
                "configuration describes scenario `{}`, not `{kind}`",
                exp.scenario.kind
            ));
        }
    }
    if let Some(seed) = o.seed {
        exp.game.seed = seed;
    }
    if let Some(frames) = positive("frames", o.frames)? {
        exp.scenario.frames = frames;
    }
    if let Some(m) = positive("frame-length", o.frame_length)? {
        exp.game.frame_length = m;
    }
    if let Some(n) = positive("n", o.n)? {
        exp.game.nodes = vec![exp.default_params(); n];
        exp.scenario.n = n;
    }
    if let Some(r) = positive("replicates", o.replicates)? {
        exp.scenario.replicates = r;
    }
    if let Some(mode) = o.mode {
        exp.scenario.mode = mode;
    }
    if let Some(flag) = o.reinit_kappa {
        exp.game.reinit_kappa_on_churn = flag;
    }
    exp.game.validate().map_err(|e| e.to_string())?;
    Ok(exp)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, overrides) = match &cli.command {
        Command::Convergence(o) => (Some(ScenarioKind::Convergence), o),
        Command::Churn(o) => (Some(ScenarioKind::Churn), o),
        Command::SweepProbVsN(o) => (Some(ScenarioKind::SweepProbVsN), o),
        Command::SweepAgeVsN(o) => (Some(ScenarioKind::SweepAgeVsN), o),
        Command::SweepPoaVsN(o) => (Some(ScenarioKind::SweepPoaVsN), o),
        Command::RrCompare(o) => (Some(ScenarioKind::RrCompare), o),
        Command::Run { overrides } => (None, overrides),
    };
    let exp = match load(kind, overrides) {
        Ok(exp) => exp,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let out_dir = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(exp.scenario.kind.name()));
    log::info!("running {} into {}", exp.scenario.kind, out_dir.display());
    let report = match run_scenario(&exp, &out_dir) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for table in &report.tables {
        println!("wrote {}", out_dir.join(table.file_name()).display());
    }
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", check.name, check.detail);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
