//! Synthetic corpus with known, optionally correlated, ground-truth factors.

mod corpus;
mod render;
mod spec;

pub use corpus::{sample_factors, Corpus, SceneSample, FORMAT_VERSION, MAGIC};
pub use render::{render, IMAGE_SIDE, SQUARE_HI, SQUARE_LO};
pub use spec::{CorrelationRule, FactorSpec, DEFAULT_NAMES, MAX_ATTRIBUTES};

use crate::disgraph::DisGraph;
use crate::error::{Error, Result};
use crate::relranker::{relation_matrix, ScoreRecord, SomersConvention, MAX_SCORE};

/// Ground-truth 0..=5 score of a single factor value.
pub fn quantize(factor: f64) -> u8 {
    ((factor * 6.0).floor().max(0.0) as u8).min(MAX_SCORE)
}

pub fn quantize_scores(sample_id: usize, factors: &[f64]) -> ScoreRecord {
    ScoreRecord {
        sample_id,
        scores: factors.iter().map(|&f| quantize(f)).collect(),
    }
}

/// Somers' D over the quantized true factors of the whole corpus, mapped to `[0, 1]` by magnitude.
pub fn ground_truth_relations(corpus: &Corpus, convention: SomersConvention) -> Result<DisGraph> {
    if corpus.is_empty() {
        return Err(Error::Contract("ground truth needs a non-empty corpus".into()));
    }
    let n = corpus.n_attributes();
    let weights = if corpus.len() < 2 {
        crate::numcore::Matrix::zeros(n, n)
    } else {
        let records: Vec<ScoreRecord> = corpus
            .samples
            .iter()
            .map(|s| quantize_scores(s.id, &s.factors))
            .collect();
        relation_matrix(&records, convention)?.map(f64::abs)
    };
    DisGraph::from_prior(corpus.spec.names.clone(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_edges() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 5);
        assert_eq!(quantize(0.5), 3);
        assert_eq!(quantize(0.1666), 0);
        assert_eq!(quantize(0.1667), 1);
    }

    #[test]
    fn single_sample_has_no_relations() {
        let corpus = Corpus::generate(&FactorSpec::with_rules(1, &[(0, 1, 1.0)]).unwrap(), 1).unwrap();
        let g = ground_truth_relations(&corpus, SomersConvention::Independent).unwrap();
        assert!(g.adjacency().data().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn empty_corpus_rejected() {
        let corpus = Corpus::generate(&FactorSpec::independent(1), 0).unwrap();
        assert!(ground_truth_relations(&corpus, SomersConvention::Independent).is_err());
    }
}
