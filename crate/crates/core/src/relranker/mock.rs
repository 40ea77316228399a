use crate::numcore::Rng;
use crate::relranker::{ScoreRecord, MAX_SCORE};
use crate::synthgen::{quantize_scores, SceneSample};

/// Ground-truth scores with per-attribute ±1 perturbations.
///
/// Each attribute is perturbed with probability `noise`; the direction is
/// random, reflected inward at 0 and 5 so that every perturbation changes the
/// score by exactly one.
pub fn mock_score(sample: &SceneSample, noise: f64, rng: &mut Rng) -> ScoreRecord {
    let mut rec = quantize_scores(sample.id, &sample.factors);
    for s in &mut rec.scores {
        if rng.bernoulli(noise) {
            let up = rng.bernoulli(0.5);
            *s = match (*s, up) {
                (0, _) => 1,
                (MAX_SCORE, _) => MAX_SCORE - 1,
                (v, true) => v + 1,
                (v, false) => v - 1,
            };
        }
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{Corpus, FactorSpec};

    fn corpus(n: usize) -> Corpus {
        Corpus::generate(&FactorSpec::independent(21), n).unwrap()
    }

    #[test]
    fn zero_noise_is_ground_truth() {
        let c = corpus(200);
        let mut rng = Rng::new(1);
        for s in &c.samples {
            assert_eq!(mock_score(s, 0.0, &mut rng), quantize_scores(s.id, &s.factors));
        }
    }

    #[test]
    fn full_noise_moves_every_score_by_one() {
        let c = corpus(500);
        let mut rng = Rng::new(2);
        let mut saw_edges = [false; 2];
        for s in &c.samples {
            let truth = quantize_scores(s.id, &s.factors);
            let noisy = mock_score(s, 1.0, &mut rng);
            for (t, n) in truth.scores.iter().zip(&noisy.scores) {
                assert_eq!((*t as i32 - *n as i32).abs(), 1);
                if *t == 0 {
                    saw_edges[0] = true;
                }
                if *t == MAX_SCORE {
                    saw_edges[1] = true;
                }
            }
        }
        assert!(saw_edges[0] && saw_edges[1]);
    }

    #[test]
    fn flip_rate_matches_noise() {
        let c = corpus(10_000);
        let mut rng = Rng::new(3);
        let mut flips = 0usize;
        let mut total = 0usize;
        for s in &c.samples {
            let truth = quantize_scores(s.id, &s.factors);
            let noisy = mock_score(s, 0.1, &mut rng);
            flips += truth.scores.iter().zip(&noisy.scores).filter(|(a, b)| a != b).count();
            total += truth.scores.len();
        }
        let rate = flips as f64 / total as f64;
        assert!((0.08..=0.12).contains(&rate), "flip rate {rate}");
    }
}
