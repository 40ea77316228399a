//! Stage-level behaviour: reproducible artifacts, ablation wiring and file round trips.

mod common;

use std::collections::BTreeSet;

use common::dir_bytes;
use gem_core::disgraph::DisGraph;
use gem_core::kv::KvDoc;
use gem_core::numcore::Rng;
use gem_core::pipeline::*;
use gem_core::relranker::{mock_score, read_scores, PredictorConfig, SomersConvention};
use gem_core::synthgen::{Corpus, FactorSpec};
use gem_core::vae::Checkpoint;

fn spec() -> FactorSpec {
    FactorSpec::with_rules(31, &[(0, 1, 1.0), (2, 5, -0.8)]).unwrap()
}

fn quick_config() -> TrainingConfig {
    TrainingConfig {
        epochs: 2,
        checkpoint_every: 1,
        seed: 4,
        ..TrainingConfig::default()
    }
}

/// Runs generate, score, init-graph and train into `dir`.
fn run_stages(dir: &std::path::Path) {
    let corpus_path = dir.join("corpus.gemc");
    let corpus = cmd_generate(&spec(), 400, &corpus_path).unwrap();
    let scores = cmd_score(&corpus, &PredictorConfig::mock(0.1, 9), &dir.join("scores.csv")).unwrap();
    let graph = cmd_init_graph(&scores, corpus.spec.names.clone(), 256, SomersConvention::Independent, 0.5, &dir.join("prior.csv")).unwrap();
    cmd_train(&corpus, &graph, Some(&scores), &quick_config(), &dir.join("train")).unwrap();
}

#[test]
fn stages_are_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_stages(a.path());
    run_stages(b.path());
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between runs");
    }
    for expected in ["corpus.gemc", "scores.csv", "prior.csv", "train/model.ckpt", "train/model.ckpt.bin", "train/epoch-0001.ckpt", "train/metrics.csv"] {
        assert!(fa.contains_key(expected), "missing {expected}");
    }
}

#[test]
fn artifacts_read_back() {
    let dir = tempfile::tempdir().unwrap();
    run_stages(dir.path());
    let corpus = Corpus::read(&dir.path().join("corpus.gemc")).unwrap();
    assert_eq!(corpus.len(), 400);
    let scores = read_scores(&dir.path().join("scores.csv")).unwrap();
    assert_eq!(scores.len(), 400);
    let graph = DisGraph::read(&dir.path().join("prior.csv")).unwrap();
    let layout = TrainLayout::new(&dir.path().join("train"));
    let ck = Checkpoint::read(&layout.checkpoint).unwrap();
    let trained = DisGraph::read(&layout.graph).unwrap();
    assert_eq!(trained.prior(), graph.prior());
    let saved = MetricsReport::read(&layout.metrics).unwrap();
    let again = cmd_eval(&ck, &trained, &corpus, None).unwrap();
    assert_eq!(again.reconstruction_mse, saved.reconstruction_mse);
    assert_eq!(again.factor_alignment, saved.factor_alignment);
    let cfg = TrainingConfig::from_kv(&KvDoc::read(&layout.config).unwrap()).unwrap();
    assert_eq!(cfg.hash(), ck.config_hash);

    let out = dir.path().join("traverse.pgm");
    let grid = cmd_traverse(&ck, &trained, &corpus, 3, 1, TRAVERSE_STEPS, TRAVERSE_RANGE, &out).unwrap();
    assert_eq!(grid.shape(), (16, 16 * TRAVERSE_STEPS));
    assert!(out.with_extension("png").exists());
}

#[test]
fn ablation_flags_change_only_their_parameters() {
    let base = TrainingConfig::default().effective().to_kv();
    let expected = [
        ("vanilla_vae", vec!["use_vanilla_vae", "beta"]),
        ("no_graph_learner", vec!["disable_graph_learner", "eta"]),
        ("no_adversarial", vec!["disable_adversarial", "lambda_adv"]),
    ];
    for (variant, ablations) in Ablations::VARIANTS {
        let doc = TrainingConfig { ablations, ..TrainingConfig::default() }.effective().to_kv();
        let changed: BTreeSet<&str> = base.keys().filter(|k| base.get(k) != doc.get(k)).collect();
        let want: BTreeSet<&str> = expected.iter().find(|(v, _)| *v == variant).map(|(_, keys)| keys.iter().copied().collect()).unwrap_or_default();
        assert_eq!(changed, want, "variant {variant}");
    }
}

#[test]
fn mock_scored_window_sees_strong_rule() {
    let corpus = Corpus::generate(&FactorSpec::with_rules(32, &[(0, 1, 1.0)]).unwrap(), 256).unwrap();
    let scores: Vec<_> = corpus.samples.iter().map(|s| mock_score(s, 0.1, &mut Rng::derived(5, s.id as u64))).collect();
    let g = init_graph_from_scores(&scores, corpus.spec.names.clone(), 256, SomersConvention::Independent, 0.5).unwrap();
    assert!(g.adjacency().get(0, 1) >= 0.3, "{}", g.adjacency().get(0, 1));
}

#[test]
fn ablate_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Corpus::generate(&spec(), 200).unwrap();
    let scores: Vec<_> = corpus.samples.iter().map(|s| mock_score(s, 0.1, &mut Rng::derived(5, s.id as u64))).collect();
    let graph = init_graph_from_scores(&scores, corpus.spec.names.clone(), 100, SomersConvention::Independent, 0.5).unwrap();
    let cfg = TrainingConfig { epochs: 1, ..TrainingConfig::default() };
    let runs = cmd_ablate(&corpus, &graph, Some(&scores), &cfg, &[0, 1], dir.path()).unwrap();
    assert_eq!(runs.len(), 8);
    let csv = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8 + 2 * 4);
    assert!(dir.path().join("no_adversarial/seed-1/model.ckpt").exists());
}
