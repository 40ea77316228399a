use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gem_core::disgraph::DisGraph;
use gem_core::kv::KvDoc;
use gem_core::pipeline::{
    cmd_ablate, cmd_eval, cmd_generate, cmd_init_graph, cmd_score, cmd_train, cmd_traverse, TrainLayout,
    TrainingConfig, TRAVERSE_RANGE, TRAVERSE_STEPS,
};
use gem_core::relranker::{read_scores, PredictorConfig};
use gem_core::synthgen::{Corpus, FactorSpec};
use gem_core::vae::Checkpoint;
use gem_core::{Error, Result};

const DEFAULT_SAMPLES: usize = 5000;

#[derive(Parser)]
#[command(name = "gem", version, about = "Synthetic disentanglement pipeline with a learned attribute graph")]
struct Cli {
    /// Flat `key = value` configuration shared by every stage.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the `seed` key of the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic corpus.
    Generate {
        #[arg(long, value_name = "CORPUS")]
        out: PathBuf,
        /// Number of samples; falls back to the `samples` key, then 5000.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Score every corpus image with the configured predictor.
    Score {
        #[arg(long = "in", value_name = "CORPUS")]
        input: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Build the prior attribute graph from scores.
    InitGraph {
        #[arg(long = "in", value_name = "SCORES")]
        input: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Train the model and refine the graph.
    Train {
        #[command(flatten)]
        inputs: TrainInputs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Decode a sweep along one latent dimension.
    Traverse {
        /// Training output directory.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "CORPUS")]
        corpus: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long, default_value_t = TRAVERSE_STEPS)]
        steps: usize,
    },
    /// Recompute metrics for a trained model.
    Eval {
        /// Training output directory.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "CORPUS")]
        corpus: PathBuf,
        /// Reference graph; defaults to the corpus ground truth.
        #[arg(long, value_name = "CSV")]
        truth: Option<PathBuf>,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Train every ablation variant over several seeds.
    Ablate {
        #[command(flatten)]
        inputs: TrainInputs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct TrainInputs {
    #[arg(long = "in", value_name = "CORPUS")]
    input: PathBuf,
    #[arg(long, value_name = "CSV")]
    graph: PathBuf,
    /// Score CSV feeding the graph-fit target.
    #[arg(long, value_name = "CSV")]
    scores: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<KvDoc> {
    let mut doc = match &cli.config {
        Some(path) => KvDoc::read(path).map_err(|e| match e {
            Error::NotFound(p) => Error::Config(format!("config file {} not found", p.display())),
            other => other,
        })?,
        None => KvDoc::new(),
    };
    if let Some(seed) = cli.seed {
        doc.set("seed", seed);
    }
    Ok(doc)
}

fn load_scores(path: Option<&Path>) -> Result<Option<Vec<gem_core::relranker::ScoreRecord>>> {
    path.map(read_scores).transpose()
}

fn run(cli: &Cli) -> Result<()> {
    let doc = load_config(cli)?;
    match &cli.command {
        Command::Generate { out, samples } => {
            let spec = FactorSpec::from_kv(&doc)?;
            let n = match samples {
                Some(n) => *n,
                None => doc.parse_or("samples", DEFAULT_SAMPLES)?,
            };
            cmd_generate(&spec, n, out)?;
        }
        Command::Score { input, out } => {
            let cfg = PredictorConfig::from_kv(&doc)?;
            let corpus = Corpus::read(input)?;
            cmd_score(&corpus, &cfg, out)?;
        }
        Command::InitGraph { input, out } => {
            let cfg = TrainingConfig::from_kv(&doc)?;
            let names = FactorSpec::from_kv(&doc)?.names;
            let scores = read_scores(input)?;
            cmd_init_graph(&scores, names, cfg.init_window, cfg.somers_convention, cfg.eta, out)?;
        }
        Command::Train { inputs, out } => {
            let cfg = TrainingConfig::from_kv(&doc)?;
            let corpus = Corpus::read(&inputs.input)?;
            let graph = DisGraph::read(&inputs.graph)?;
            let scores = load_scores(inputs.scores.as_deref())?;
            let run = cmd_train(&corpus, &graph, scores.as_deref(), &cfg, out)?;
            log::info!(
                "reconstruction_mse {:.5}, relation_mae {:.4}, mean alignment {:.3}",
                run.metrics.reconstruction_mse,
                run.metrics.relation_mae,
                run.metrics.mean_alignment()
            );
        }
        Command::Traverse { input, corpus, out, dim, sample, steps } => {
            let layout = TrainLayout::new(input);
            let ck = Checkpoint::read(&layout.checkpoint)?;
            let graph = DisGraph::read(&layout.graph)?;
            let corpus = Corpus::read(corpus)?;
            cmd_traverse(&ck, &graph, &corpus, *sample, *dim, *steps, TRAVERSE_RANGE, out)?;
        }
        Command::Eval { input, corpus, truth, out } => {
            let layout = TrainLayout::new(input);
            let ck = Checkpoint::read(&layout.checkpoint)?;
            let graph = DisGraph::read(&layout.graph)?;
            let corpus = Corpus::read(corpus)?;
            let truth = truth.as_deref().map(DisGraph::read).transpose()?;
            cmd_eval(&ck, &graph, &corpus, truth.as_ref())?.write(out)?;
        }
        Command::Ablate { inputs, out, seeds } => {
            let cfg = TrainingConfig::from_kv(&doc)?;
            let corpus = Corpus::read(&inputs.input)?;
            let graph = DisGraph::read(&inputs.graph)?;
            let scores = load_scores(inputs.scores.as_deref())?;
            cmd_ablate(&corpus, &graph, scores.as_deref(), &cfg, seeds, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if !usage {
                return ExitCode::SUCCESS;
            }
            eprintln!("error[config]: invalid command line");
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
