//! Weighted attribute graph, GCN graph learner and relation-aware latents.

mod graph;
mod learner;

pub use graph::{augment_normalize, init_graph, relation_aware, relation_aware_var, DisGraph, DEFAULT_ETA};
pub use learner::{
    gcn_forward, graph_fit_loss, refine_adjacency, refine_var, GraphLearner, RefinedVars, DEFAULT_LAYERS,
};
