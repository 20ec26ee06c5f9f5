use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use socsense_cli::{parse_config, run_scenario, CliError, ConfigIssue, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "socsense",
    version,
    about = "Social learning, reputation fusion, detection and regret-matching runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sequential social learning and herding.
    SocialLearning(RunArgs),
    /// Reputation fusion on an information flow graph.
    Reputation(RunArgs),
    /// Quickest detection from raw observations.
    QdClassic(RunArgs),
    /// Quickest detection from the actions of social learners.
    QdSocial(RunArgs),
    /// Reveal-or-herd stopping.
    Privacy(RunArgs),
    /// Regret matching in a repeated game.
    Game(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the `out` key.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::SocialLearning(a) => (ScenarioKind::SocialLearning, a),
        Command::Reputation(a) => (ScenarioKind::Reputation, a),
        Command::QdClassic(a) => (ScenarioKind::QdClassic, a),
        Command::QdSocial(a) => (ScenarioKind::QdSocial, a),
        Command::Privacy(a) => (ScenarioKind::Privacy, a),
        Command::Game(a) => (ScenarioKind::Game, a),
    };
    match execute(kind, args) {
        Ok(manifest) => {
            println!(
                "{}",
                serde_json::to_string(&serde_json::json!({
                    "status": "ok",
                    "kind": manifest.kind,
                    "seed": manifest.seed,
                    "out": manifest.out_dir,
                    "outputs": manifest.outputs,
                }))
                .expect("manifest serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::to_string(&e.record()).expect("error record serializes")
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(kind: ScenarioKind, args: RunArgs) -> Result<socsense_cli::RunManifest, CliError> {
    let mut config = parse_config(&args.config)?;
    if config.kind != kind {
        return Err(CliError::Validation(vec![ConfigIssue {
            field: "kind".into(),
            message: format!("file describes `{}`, command was `{kind}`", config.kind),
        }]));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args.out.or_else(|| {
        config.out.as_ref().map(|o| {
            let base = args
                .config
                .parent()
                .unwrap_or_else(|| std::path::Path::new("."));
            base.join(o)
        })
    });
    let out = out.unwrap_or_else(|| PathBuf::from("out").join(kind.as_str()));
    run_scenario(&config, &out)
}
