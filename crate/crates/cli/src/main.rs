use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ffd_recon_cli::commands;
use ffd_recon_cli::logging::{self, event};
use ffd_recon_cli::{CliResult, Outcome, PipelineConfig};
use log::LevelFilter;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "ffd-recon",
    version,
    about = "FFD model graphs and single-image mesh reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON config; `synth --emit-config` prints every field with its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set graph.theta_iou=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true)]
    instances: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log level for library messages.
    #[arg(long, global = true, default_value = "warn", value_parser = parse_level)]
    log_level: LevelFilter,
}

#[derive(Subcommand)]
enum Command {
    /// Correspond every ordered pair of models and save the graph.
    BuildGraph,
    /// Fit every graph node to each instance and keep the best.
    Select(InstanceArg),
    /// Refine combination weights and pose from the selection.
    Reconstruct(InstanceArg),
    /// Compare reconstructions with ground truth.
    Eval(InstanceArg),
    /// Generate a synthetic class and test instances.
    Synth {
        /// Print the effective config and exit.
        #[arg(long)]
        emit_config: bool,
    },
}

#[derive(Args)]
struct InstanceArg {
    /// Process only this instance directory.
    #[arg(long)]
    instance: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut all = self.overrides.clone();
        let path =
            |k: &str, p: &Option<PathBuf>| p.as_ref().map(|p| format!("paths.{k}={}", json!(p)));
        all.extend(self.seed.map(|s| format!("seed={s}")));
        all.extend(path("models", &self.models));
        all.extend(path("graph", &self.graph));
        all.extend(path("instances", &self.instances));
        all.extend(path("out", &self.out));
        all
    }
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    let cfg = PipelineConfig::load(cli.common.config.as_deref(), &cli.common.overrides())?;
    match &cli.command {
        Command::Synth { emit_config: true } => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(Outcome::Complete)
        }
        Command::Synth { emit_config: false } => commands::synth(&cfg),
        Command::BuildGraph => commands::build_graph(&cfg),
        Command::Select(a) => commands::select(&cfg, a.instance.as_deref()),
        Command::Reconstruct(a) => commands::reconstruct(&cfg, a.instance.as_deref()),
        Command::Eval(a) => commands::eval(&cfg, a.instance.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    logging::init(cli.common.log_level);
    match run(&cli) {
        Ok(o) => o.exit_code(),
        Err(e) => {
            event(
                "main",
                "error",
                json!({ "error": e.to_string(), "code": e.exit_code() }),
            );
            ExitCode::from(e.exit_code())
        }
    }
}

fn parse_level(s: &str) -> Result<LevelFilter, String> {
    s.parse().map_err(|_| format!("unknown log level {s:?}"))
}
