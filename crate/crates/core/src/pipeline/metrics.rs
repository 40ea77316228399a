use std::fmt::Write as _;
use std::path::Path;

use crate::disgraph::{relation_aware, DisGraph};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::synthgen::Corpus;
use crate::vae::VaeModel;

/// Fraction of the corpus (by id, from the end) held out for evaluation.
pub const HELD_OUT_FRACTION: f64 = 0.1;

pub const METRICS_HEADER: &str =
    "# desk-scale stand-in metrics; pass thresholds applied to them are repository targets";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub reconstruction_mse: f64,
    /// Same measurement before the first update, when known.
    pub initial_reconstruction_mse: Option<f64>,
    pub relation_mae: f64,
    pub factor_alignment: Vec<f64>,
    pub steps: usize,
    pub final_total_loss: Option<f64>,
}

impl MetricsReport {
    pub fn mean_alignment(&self) -> f64 {
        if self.factor_alignment.is_empty() {
            return 0.0;
        }
        self.factor_alignment.iter().sum::<f64>() / self.factor_alignment.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push_str("\nmetric,value\n");
        let _ = writeln!(out, "reconstruction_mse,{}", self.reconstruction_mse);
        if let Some(v) = self.initial_reconstruction_mse {
            let _ = writeln!(out, "initial_reconstruction_mse,{v}");
        }
        let _ = writeln!(out, "relation_mae,{}", self.relation_mae);
        for (k, a) in self.factor_alignment.iter().enumerate() {
            let _ = writeln!(out, "factor_alignment_{k},{a}");
        }
        let _ = writeln!(out, "mean_factor_alignment,{}", self.mean_alignment());
        let _ = writeln!(out, "steps,{}", self.steps);
        if let Some(v) = self.final_total_loss {
            let _ = writeln!(out, "final_total_loss,{v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut report = MetricsReport {
            reconstruction_mse: f64::NAN,
            initial_reconstruction_mse: None,
            relation_mae: f64::NAN,
            factor_alignment: Vec::new(),
            steps: 0,
            final_total_loss: None,
        };
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).skip(1) {
            let (key, value) = line
                .split_once(',')
                .ok_or_else(|| Error::Data(format!("bad metrics line {line:?}")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("bad metrics value {value:?}")))?;
            match key {
                "reconstruction_mse" => report.reconstruction_mse = v,
                "initial_reconstruction_mse" => report.initial_reconstruction_mse = Some(v),
                "relation_mae" => report.relation_mae = v,
                "steps" => report.steps = v as usize,
                "final_total_loss" => report.final_total_loss = Some(v),
                k if k.starts_with("factor_alignment_") => report.factor_alignment.push(v),
                _ => {}
            }
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// `(train_ids, held_out_ids)`: the last 10% of ids (at least one) are held out.
pub fn split_ids(len: usize) -> (Vec<usize>, Vec<usize>) {
    let held = ((len as f64 * HELD_OUT_FRACTION).ceil() as usize).clamp(len.min(1), len);
    let cut = len - held;
    ((0..cut).collect(), (cut..len).collect())
}

/// Average ranks (ties share the mean of their positions).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim("spearman", format!("{} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Ok(0.0);
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// For each factor column, the largest |Spearman| against any latent column.
pub fn factor_alignment(factors: &Matrix, latents: &Matrix) -> Result<Vec<f64>> {
    if factors.rows() != latents.rows() {
        return Err(Error::dim("factor_alignment", format!("{} vs {} rows", factors.rows(), latents.rows())));
    }
    let lat: Vec<Vec<f64>> = (0..latents.cols()).map(|j| latents.column(j)).collect();
    (0..factors.cols())
        .map(|k| {
            let f = factors.column(k);
            lat.iter()
                .map(|l| spearman(&f, l).map(f64::abs))
                .try_fold(0.0f64, |best, r| r.map(|r| best.max(r)))
        })
        .collect()
}

/// Per-pixel MSE of decoding `mu (A + I)` against the inputs.
pub fn reconstruction_mse(model: &VaeModel, adjacency: &Matrix, images: &Matrix) -> Result<f64> {
    if images.rows() == 0 {
        return Err(Error::Contract("reconstruction_mse needs at least one image".into()));
    }
    let eps = Matrix::zeros(images.rows(), model.arch.latent_n);
    let out = model.encode_with_eps(images, &eps)?;
    let recon = model.decode(&relation_aware(adjacency, &out.mu)?)?;
    let diff = recon.sub(images)?;
    Ok(diff.data().iter().map(|d| d * d).sum::<f64>() / diff.len() as f64)
}

/// Metrics on the held-out split against a ground-truth adjacency.
pub fn evaluate(model: &VaeModel, graph: &DisGraph, corpus: &Corpus, truth: &Matrix) -> Result<MetricsReport> {
    if corpus.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty corpus".into()));
    }
    if corpus.n_attributes() != graph.n() || model.arch.latent_n != graph.n() {
        return Err(Error::dim(
            "evaluate",
            format!(
                "corpus {} attributes, graph {} nodes, model {} latents",
                corpus.n_attributes(),
                graph.n(),
                model.arch.latent_n
            ),
        ));
    }
    let (_, held) = split_ids(corpus.len());
    let images = corpus.image_batch(&held);
    let mse = reconstruction_mse(model, graph.adjacency(), &images)?;
    let mu = model.encode_with_eps(&images, &Matrix::zeros(held.len(), model.arch.latent_n))?.mu;
    Ok(MetricsReport {
        reconstruction_mse: mse,
        initial_reconstruction_mse: None,
        relation_mae: graph.off_diagonal_mae(truth)?,
        factor_alignment: factor_alignment(&corpus.factor_matrix(&held), &mu)?,
        steps: 0,
        final_total_loss: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![2.5, 0.0, 2.5, 1.0]);
    }

    #[test]
    fn spearman_monotone_and_constant() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[1.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn alignment_picks_best_latent() {
        let f = Matrix::from_rows(&[vec![0.1, 0.9], vec![0.2, 0.5], vec![0.3, 0.1]]).unwrap();
        let z = Matrix::from_rows(&[vec![5.0, 0.0, 1.0], vec![4.0, 0.0, 2.0], vec![3.0, 0.0, 3.0]]).unwrap();
        let a = factor_alignment(&f, &z).unwrap();
        assert_eq!(a, vec![1.0, 1.0]);
    }

    #[test]
    fn split_holds_out_tail() {
        let (train, held) = split_ids(100);
        assert_eq!(train.len(), 90);
        assert_eq!(held, (90..100).collect::<Vec<_>>());
        assert_eq!(split_ids(1), (vec![], vec![0]));
        assert_eq!(split_ids(0), (vec![], vec![]));
    }

    #[test]
    fn csv_roundtrip() {
        let m = MetricsReport {
            reconstruction_mse: 0.01,
            initial_reconstruction_mse: Some(0.2),
            relation_mae: 0.1,
            factor_alignment: vec![0.5, 0.25],
            steps: 10,
            final_total_loss: Some(12.5),
        };
        let text = m.to_csv();
        assert!(text.starts_with('#'));
        assert_eq!(MetricsReport::from_csv(&text).unwrap(), m);
    }
}
