//! Fixtures shared by the benchmarks.

use gem_core::disgraph::{DisGraph, GraphLearner};
use gem_core::numcore::{Matrix, Rng};
use gem_core::synthgen::{Corpus, FactorSpec, DEFAULT_NAMES};
use gem_core::vae::{GraphState, VaeArch, VaeModel};

/// Two score columns of length `m` with values in `0..=5`.
pub fn score_columns(m: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = Rng::new(seed);
    let x: Vec<u8> = (0..m).map(|_| rng.below(6) as u8).collect();
    let y: Vec<u8> = x.iter().map(|&v| if rng.bernoulli(0.3) { rng.below(6) as u8 } else { v }).collect();
    (x, y)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    Rng::new(seed).normal_matrix(rows, cols)
}

/// Full-size model, graph state and one batch of 32 corpus images.
pub fn training_fixture(seed: u64) -> (VaeModel, GraphState, Matrix) {
    let mut rng = Rng::new(seed);
    let model = VaeModel::new(VaeArch::standard(256, 6), &mut rng).expect("model");
    let names: Vec<String> = DEFAULT_NAMES.iter().map(|s| s.to_string()).collect();
    let prior = Matrix::from_fn(6, 6, |i, j| if i == j { 0.0 } else { 0.2 });
    let graph = DisGraph::from_prior(names, prior).expect("graph");
    let learner = GraphLearner::new(6, 2, &mut rng).expect("learner");
    let state = GraphState::new(graph, learner, true).expect("state");
    let corpus = Corpus::generate(&FactorSpec::independent(seed), 32).expect("corpus");
    let ids: Vec<usize> = (0..32).collect();
    (model, state, corpus.image_batch(&ids))
}
