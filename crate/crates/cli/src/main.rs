use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use docsiam::pipeline::{self, PipelineConfig};

#[derive(Parser)]
#[command(name = "docsiam", version, about = "Siamese document embeddings: data preparation, training and evaluation")]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a config key, e.g. `--set train.lr0=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    /// Base directory for relative corpus and word-vector paths.
    #[arg(long, env = "DOCSIAM_DATA_DIR", global = true)]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load the corpus, split it and cache the tokens.
    Prepare,
    /// Write one feature matrix per configured representation and dimension.
    Featurize,
    /// Sample relevant and non-relevant document pairs for each split.
    Pairs,
    /// Train a Siamese model per configured input representation.
    Train,
    /// Write deep representations from the trained models.
    Embed,
    /// Run the classifier grid and write the macro-F1 sweep.
    Evaluate,
    /// Project test documents to 2-D and write scatter plots.
    Tsne,
    /// Run every stage in order.
    All,
}

fn config(cli: &Cli) -> docsiam::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(dir) = &cli.data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> docsiam::Result<()> {
    let cfg = config(cli)?;
    match cli.command {
        Command::Prepare => pipeline::cmd_prepare(&cfg),
        Command::Featurize => pipeline::cmd_featurize(&cfg),
        Command::Pairs => pipeline::cmd_pairs(&cfg),
        Command::Train => pipeline::cmd_train(&cfg),
        Command::Embed => pipeline::cmd_embed(&cfg),
        Command::Evaluate => pipeline::cmd_evaluate(&cfg),
        Command::Tsne => pipeline::cmd_tsne(&cfg),
        Command::All => pipeline::cmd_all(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
