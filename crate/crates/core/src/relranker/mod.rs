//! Ordinal attribute scoring and pairwise relation statistics.

mod mock;
mod pairs;
mod prompt;
mod records;
mod remote;
pub mod stub;

pub use mock::mock_score;
pub use pairs::{
    count_pairs, relation_estimate, relation_matrix, somers_d, Direction, PairCounts,
    RelationEstimate, RelationTally, SomersConvention,
};
pub use prompt::{build_prompt, sample_descriptor, SYSTEM_PROMPT};
pub use records::{
    matrix_from_csv, matrix_to_csv, read_matrix, read_scores, scores_from_csv, scores_to_csv, write_matrix,
    write_scores, ScoreRecord, MAX_SCORE,
};
pub use remote::{
    image_data_url, parse_reply, request_body, PredictorConfig, PredictorKind, RemoteScorer, REMOTE_UPSCALE,
};

use crate::error::Result;
use crate::numcore::Rng;
use crate::synthgen::SceneSample;

/// Scores samples with whichever predictor the config selects.
pub fn score_samples(cfg: &PredictorConfig, names: &[String], samples: &[&SceneSample]) -> Result<Vec<ScoreRecord>> {
    cfg.validate()?;
    match cfg.kind {
        PredictorKind::Mock => Ok(samples
            .iter()
            .map(|s| mock_score(s, cfg.noise, &mut Rng::derived(cfg.seed, s.id as u64)))
            .collect()),
        PredictorKind::Remote => {
            let scorer = RemoteScorer::new(cfg, names)?;
            let items: Vec<_> = samples.iter().map(|s| (s.id, &s.image)).collect();
            scorer.score_all(&items)
        }
    }
}
