use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::disgraph::{init_graph, relation_aware, DisGraph, GraphLearner};
use crate::error::{Error, Result};
use crate::imageio::{tile_row, upscale, write_pgm, write_png};
use crate::numcore::{Matrix, Rng};
use crate::pipeline::metrics::{evaluate, reconstruction_mse, split_ids, MetricsReport};
use crate::pipeline::{Ablations, TrainingConfig};
use crate::relranker::{relation_matrix, score_samples, write_scores, PredictorConfig, RelationTally, ScoreRecord, SomersConvention};
use crate::synthgen::{ground_truth_relations, Corpus, FactorSpec, IMAGE_SIDE};
use crate::vae::{train_step, Checkpoint, GraphState, LossBreakdown, VaeArch, VaeModel};

pub const TRAVERSE_RANGE: (f64, f64) = (-3.0, 3.0);
pub const TRAVERSE_STEPS: usize = 8;
pub const TRAVERSE_UPSCALE: usize = 8;

pub fn cmd_generate(spec: &FactorSpec, samples: usize, out: &Path) -> Result<Corpus> {
    let corpus = Corpus::generate(spec, samples)?;
    corpus.write(out)?;
    log::info!("wrote {} samples to {}", corpus.len(), out.display());
    Ok(corpus)
}

/// One score row per sample, in id order.
pub fn cmd_score(corpus: &Corpus, cfg: &PredictorConfig, out: &Path) -> Result<Vec<ScoreRecord>> {
    let samples: Vec<_> = corpus.samples.iter().collect();
    let records = score_samples(cfg, &corpus.spec.names, &samples)?;
    write_scores(out, &records, corpus.n_attributes())?;
    Ok(records)
}

/// Prior graph from the relation matrix of the first `init_window` score rows.
pub fn init_graph_from_scores(
    records: &[ScoreRecord],
    names: Vec<String>,
    init_window: usize,
    convention: SomersConvention,
    eta: f64,
) -> Result<DisGraph> {
    let need = init_window.max(2);
    if records.len() < need {
        return Err(Error::Contract(format!(
            "init window needs {need} score rows, only {} available",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| r.scores.len() != names.len()) {
        return Err(Error::Data(format!(
            "sample {} has {} scores for {} attributes",
            r.sample_id,
            r.scores.len(),
            names.len()
        )));
    }
    let s = relation_matrix(&records[..need], convention)?;
    let mut graph = init_graph(names, &[s], eta)?;
    graph.convention = convention;
    graph.init_window = need;
    Ok(graph)
}

pub fn cmd_init_graph(
    records: &[ScoreRecord],
    names: Vec<String>,
    init_window: usize,
    convention: SomersConvention,
    eta: f64,
    out: &Path,
) -> Result<DisGraph> {
    let graph = init_graph_from_scores(records, names, init_window, convention, eta)?;
    graph.write(out)?;
    Ok(graph)
}

/// Everything a training run produces.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub graph: DisGraph,
    pub losses: Vec<LossBreakdown>,
    pub metrics: MetricsReport,
}

pub fn losses_to_csv(losses: &[LossBreakdown]) -> String {
    let mut out = String::from("step,reconstruction,kl,adv,dis,total,discriminator,graph_fit\n");
    for (k, l) in losses.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{},{},{}",
            l.reconstruction, l.kl, l.adv, l.dis, l.total, l.discriminator, l.graph_fit
        );
    }
    out
}

fn check_consistent(corpus: &Corpus, graph: &DisGraph, cfg: &TrainingConfig) -> Result<()> {
    if corpus.len() < 2 {
        return Err(Error::Contract(format!("training needs at least 2 samples, corpus has {}", corpus.len())));
    }
    if corpus.n_attributes() != graph.n() || graph.n() != cfg.latent_n {
        return Err(Error::Contract(format!(
            "corpus has {} attributes, graph {} nodes, latent_n is {}",
            corpus.n_attributes(),
            graph.n(),
            cfg.latent_n
        )));
    }
    if corpus.image_side() != IMAGE_SIDE {
        return Err(Error::Contract(format!("unexpected image side {}", corpus.image_side())));
    }
    Ok(())
}

/// Trains from scratch. `scores`, when given, feed the running relation
/// estimate that the graph learner is fit to. Intermediate checkpoints are
/// written under `checkpoint_dir` when one is given.
pub fn train(
    corpus: &Corpus,
    graph: &DisGraph,
    scores: Option<&[ScoreRecord]>,
    cfg: &TrainingConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainRun> {
    cfg.validate()?;
    check_consistent(corpus, graph, cfg)?;
    let eff = cfg.effective();
    let n = eff.latent_n;
    let step_cfg = cfg.step_config();

    let mut init_rng = Rng::derived(eff.seed, 1);
    let mut model = VaeModel::new(VaeArch::standard(IMAGE_SIDE * IMAGE_SIDE, n), &mut init_rng)?;
    let learner = GraphLearner::new(n, eff.gcn_layers, &mut init_rng)?;
    let refine = !eff.ablations.disable_graph_learner;
    let mut state = GraphState::new(graph.clone().with_eta(eff.eta)?, learner, refine)?;
    state.refresh()?;

    let by_id: Vec<Option<&ScoreRecord>> = match scores {
        Some(records) => {
            let mut v = vec![None; corpus.len()];
            for r in records {
                if r.scores.len() != n {
                    return Err(Error::Data(format!("sample {} has {} scores, expected {n}", r.sample_id, r.scores.len())));
                }
                if let Some(slot) = v.get_mut(r.sample_id) {
                    *slot = Some(r);
                }
            }
            v
        }
        None => Vec::new(),
    };
    let mut tally = scores.map(|_| RelationTally::new(n));

    let truth = ground_truth_relations(corpus, eff.somers_convention)?;
    let (train_ids, held_ids) = split_ids(corpus.len());
    let initial_mse = reconstruction_mse(&model, state.graph.adjacency(), &corpus.image_batch(&held_ids))?;

    let mut step_rng = Rng::derived(eff.seed, 2);
    let mut shuffle_rng = Rng::derived(eff.seed, 3);
    let mut losses = Vec::new();
    for epoch in 0..eff.epochs {
        let order = shuffle_rng.permutation(train_ids.len());
        for chunk in order.chunks(eff.batch_size) {
            let ids: Vec<usize> = chunk.iter().map(|&k| train_ids[k]).collect();
            if let Some(t) = tally.as_mut() {
                let batch: Vec<&ScoreRecord> = ids.iter().filter_map(|&id| by_id.get(id).copied().flatten()).collect();
                t.add_batch(&batch)?;
                if t.records() >= 2 {
                    state.target = Some(t.matrix(eff.somers_convention).map(f64::abs));
                }
            }
            let x = corpus.image_batch(&ids);
            let loss = train_step(&mut model, &mut state, &x, &step_cfg, &mut step_rng, losses.len())?;
            losses.push(loss);
        }
        log::info!(
            "epoch {}/{}: total {:.4}",
            epoch + 1,
            eff.epochs,
            losses.last().map_or(f64::NAN, |l| l.total)
        );
        let done = epoch + 1;
        if let Some(dir) = checkpoint_dir {
            if eff.checkpoint_every > 0 && done % eff.checkpoint_every == 0 && done < eff.epochs {
                let ck = Checkpoint {
                    model: model.clone(),
                    learner: state.learner.clone(),
                    step: losses.len(),
                    config_hash: cfg.hash(),
                };
                ck.write(&dir.join(format!("epoch-{done:04}.ckpt")))?;
            }
        }
    }

    let mut metrics = evaluate(&model, &state.graph, corpus, truth.adjacency())?;
    metrics.initial_reconstruction_mse = Some(initial_mse);
    metrics.steps = losses.len();
    metrics.final_total_loss = losses.last().map(|l| l.total);
    Ok(TrainRun {
        checkpoint: Checkpoint {
            model,
            learner: state.learner,
            step: losses.len(),
            config_hash: cfg.hash(),
        },
        graph: state.graph,
        losses,
        metrics,
    })
}

/// Output file names inside a training directory.
pub struct TrainLayout {
    pub checkpoint: PathBuf,
    pub graph: PathBuf,
    pub losses: PathBuf,
    pub metrics: PathBuf,
    pub config: PathBuf,
}

impl TrainLayout {
    pub fn new(dir: &Path) -> Self {
        TrainLayout {
            checkpoint: dir.join("model.ckpt"),
            graph: dir.join("graph.csv"),
            losses: dir.join("losses.csv"),
            metrics: dir.join("metrics.csv"),
            config: dir.join("config.cfg"),
        }
    }
}

pub fn cmd_train(
    corpus: &Corpus,
    graph: &DisGraph,
    scores: Option<&[ScoreRecord]>,
    cfg: &TrainingConfig,
    out_dir: &Path,
) -> Result<TrainRun> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let run = train(corpus, graph, scores, cfg, Some(out_dir))?;
    let layout = TrainLayout::new(out_dir);
    run.checkpoint.write(&layout.checkpoint)?;
    run.graph.write(&layout.graph)?;
    std::fs::write(&layout.losses, losses_to_csv(&run.losses)).map_err(|e| Error::io(&layout.losses, e))?;
    run.metrics.write(&layout.metrics)?;
    cfg.to_kv().write(&layout.config)?;
    Ok(run)
}

/// Evenly spaced values from `lo` to `hi`; a single step yields `lo`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// Decoded images for `z[dim]` swept over `values` from the posterior mean of `image`.
pub fn traversal(model: &VaeModel, graph: &DisGraph, image: &Matrix, dim: usize, values: &[f64]) -> Result<Vec<Matrix>> {
    let n = model.arch.latent_n;
    if dim >= n {
        return Err(Error::Config(format!("traversal dim {dim} out of range for {n} latents")));
    }
    if values.is_empty() {
        return Err(Error::Config("traversal needs at least one step".into()));
    }
    let flat = Matrix::from_vec(1, image.len(), image.data().to_vec())?;
    let mu = model.encode_with_eps(&flat, &Matrix::zeros(1, n))?.mu;
    let z = Matrix::from_fn(values.len(), n, |r, c| if c == dim { values[r] } else { mu.get(0, c) });
    let decoded = model.decode(&relation_aware(graph.adjacency(), &z)?)?;
    let side = image.rows();
    (0..values.len())
        .map(|r| Matrix::from_vec(side, decoded.cols() / side, decoded.row(r).to_vec()))
        .collect()
}

/// Writes the traversal grid as PGM at `out` and an upscaled PNG beside it.
#[allow(clippy::too_many_arguments)]
pub fn cmd_traverse(
    ck: &Checkpoint,
    graph: &DisGraph,
    corpus: &Corpus,
    sample: usize,
    dim: usize,
    steps: usize,
    range: (f64, f64),
    out: &Path,
) -> Result<Matrix> {
    let s = corpus
        .samples
        .get(sample)
        .ok_or_else(|| Error::Config(format!("sample {sample} not in corpus of {}", corpus.len())))?;
    let frames = traversal(&ck.model, graph, &s.image, dim, &linspace(range.0, range.1, steps))?;
    let grid = tile_row(&frames);
    write_pgm(out, &grid)?;
    write_png(&out.with_extension("png"), &upscale(&grid, TRAVERSE_UPSCALE))?;
    Ok(grid)
}

pub fn cmd_eval(ck: &Checkpoint, graph: &DisGraph, corpus: &Corpus, truth: Option<&DisGraph>) -> Result<MetricsReport> {
    let computed;
    let truth = match truth {
        Some(t) => t,
        None => {
            computed = ground_truth_relations(corpus, graph.convention)?;
            &computed
        }
    };
    if truth.n() != graph.n() {
        return Err(Error::Contract(format!("truth graph has {} nodes, graph {}", truth.n(), graph.n())));
    }
    let mut m = evaluate(&ck.model, graph, corpus, truth.adjacency())?;
    m.steps = ck.step;
    Ok(m)
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Debug)]
pub struct AblationRun {
    pub variant: &'static str,
    pub seed: u64,
    pub metrics: MetricsReport,
}

pub fn ablation_csv(runs: &[AblationRun]) -> String {
    let mut out = String::from("variant,seed,reconstruction_mse,relation_mae,mean_factor_alignment\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.variant,
            r.seed,
            r.metrics.reconstruction_mse,
            r.metrics.relation_mae,
            r.metrics.mean_alignment()
        );
    }
    for (variant, _) in Ablations::VARIANTS {
        let of = |f: fn(&MetricsReport) -> f64| -> Vec<f64> {
            runs.iter().filter(|r| r.variant == variant).map(|r| f(&r.metrics)).collect()
        };
        let mse = of(|m| m.reconstruction_mse);
        if mse.is_empty() {
            continue;
        }
        let cols = [mse, of(|m| m.relation_mae), of(MetricsReport::mean_alignment)];
        let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_std(c)).collect();
        let _ = writeln!(out, "{variant},mean,{},{},{}", stats[0].0, stats[1].0, stats[2].0);
        let _ = writeln!(out, "{variant},std,{},{},{}", stats[0].1, stats[1].1, stats[2].1);
    }
    out
}

/// Trains every ablation variant for every seed under `out_dir/<variant>/seed-<s>`.
pub fn cmd_ablate(
    corpus: &Corpus,
    graph: &DisGraph,
    scores: Option<&[ScoreRecord]>,
    cfg: &TrainingConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<AblationRun>> {
    let mut runs = Vec::new();
    for (variant, ablations) in Ablations::VARIANTS {
        for &seed in seeds {
            let c = TrainingConfig {
                seed,
                ablations,
                ..cfg.clone()
            };
            let dir = out_dir.join(variant).join(format!("seed-{seed}"));
            log::info!("ablation {variant}, seed {seed}");
            let run = cmd_train(corpus, graph, scores, &c, &dir)?;
            runs.push(AblationRun {
                variant,
                seed,
                metrics: run.metrics,
            });
        }
    }
    let path = out_dir.join("ablation.csv");
    std::fs::write(&path, ablation_csv(&runs)).map_err(|e| Error::io(&path, e))?;
    Ok(runs)
}
