use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::numcore::{Matrix, Tape, Var};
use crate::relranker::{matrix_from_csv, matrix_to_csv, SomersConvention};

pub const DEFAULT_ETA: f64 = 0.5;

/// Weighted directed graph over attributes. Row `i` is the independent node.
#[derive(Clone, Debug, PartialEq)]
pub struct DisGraph {
    names: Vec<String>,
    adjacency: Matrix,
    prior: Matrix,
    eta: f64,
    pub convention: SomersConvention,
    pub init_window: usize,
}

fn check_weights(names: &[String], m: &Matrix, what: &str) -> Result<()> {
    let n = names.len();
    if m.shape() != (n, n) {
        return Err(Error::Contract(format!(
            "{what} must be {n}x{n} for {n} nodes, got {:?}",
            m.shape()
        )));
    }
    if let Some(bad) = m.data().iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::Contract(format!("{what} weight {bad} outside [0, 1]")));
    }
    Ok(())
}

fn zero_diagonal(mut m: Matrix) -> Matrix {
    for i in 0..m.rows().min(m.cols()) {
        m.set(i, i, 0.0);
    }
    m
}

impl DisGraph {
    /// Graph whose adjacency starts at `prior`; the diagonal is dropped.
    pub fn from_prior(names: Vec<String>, prior: Matrix) -> Result<Self> {
        check_weights(&names, &prior, "prior")?;
        let prior = zero_diagonal(prior);
        Ok(DisGraph {
            names,
            adjacency: prior.clone(),
            prior,
            eta: DEFAULT_ETA,
            convention: SomersConvention::default(),
            init_window: 0,
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Config(format!("eta {eta} outside [0, 1]")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn prior(&self) -> &Matrix {
        &self.prior
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn set_adjacency(&mut self, a: Matrix) -> Result<()> {
        check_weights(&self.names, &a, "adjacency")?;
        self.adjacency = zero_diagonal(a);
        Ok(())
    }

    /// Mean absolute off-diagonal difference to `other`.
    pub fn off_diagonal_mae(&self, other: &Matrix) -> Result<f64> {
        let n = self.n();
        if other.shape() != (n, n) {
            return Err(Error::dim("off_diagonal_mae", format!("{:?} vs {n}x{n}", other.shape())));
        }
        if n < 2 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += (self.adjacency.get(i, j) - other.get(i, j)).abs();
                }
            }
        }
        Ok(total / (n * (n - 1)) as f64)
    }

    /// Unordered pairs `(i, j)`, `i < j`, by descending mean weight of both directions.
    pub fn ranked_pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let a = &self.adjacency;
        let mut pairs: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, 0.5 * (a.get(i, j) + a.get(j, i))))
            .collect();
        pairs.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
        pairs
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    fn sidecar(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("names", self.names.join(","));
        doc.set("eta", self.eta);
        doc.set("convention", self.convention);
        doc.set("init_window", self.init_window);
        let prior: Vec<String> = self.prior.data().iter().map(|v| format!("{v}")).collect();
        doc.set("prior", prior.join(","));
        doc
    }

    /// Adjacency CSV at `path` plus a `.meta` key-value sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, matrix_to_csv(&self.adjacency)).map_err(|e| Error::io(path, e))?;
        self.sidecar().write(&Self::sidecar_path(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let adjacency = matrix_from_csv(&text)?;
        let doc = KvDoc::read(&Self::sidecar_path(path))?;
        let names = doc
            .list("names")
            .ok_or_else(|| Error::Data("graph sidecar lacks names".into()))?;
        let n = names.len();
        let prior_vals = doc
            .require("prior")?
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Data(format!("bad prior value {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let prior = Matrix::from_vec(n, n, prior_vals).map_err(|_| Error::Data("prior size does not match names".into()))?;
        let mut g = DisGraph::from_prior(names, prior)
            .map_err(|e| Error::Data(format!("graph file {}: {e}", path.display())))?
            .with_eta(doc.parse_or("eta", DEFAULT_ETA)?)?;
        g.convention = doc.parse_or("convention", SomersConvention::default())?;
        g.init_window = doc.parse_or("init_window", 0)?;
        g.set_adjacency(adjacency)
            .map_err(|e| Error::Data(format!("graph file {}: {e}", path.display())))?;
        Ok(g)
    }
}

/// Prior from signed relation matrices: `clamp(|mean S_ij|, 0, 1)`.
pub fn init_graph(names: Vec<String>, relations: &[Matrix], eta: f64) -> Result<DisGraph> {
    let n = names.len();
    if relations.is_empty() {
        return Err(Error::Contract("init_graph needs at least one relation matrix".into()));
    }
    let mut sum = Matrix::zeros(n, n);
    for s in relations {
        if s.shape() != (n, n) {
            return Err(Error::Contract(format!("relation matrix {:?} for {n} nodes", s.shape())));
        }
        if !s.is_finite() {
            return Err(Error::Contract("relation matrix has missing pair estimates".into()));
        }
        sum.add_assign(s);
    }
    let prior = sum.scale(1.0 / relations.len() as f64).map(|v| v.abs().clamp(0.0, 1.0));
    DisGraph::from_prior(names, prior)?.with_eta(eta)
}

/// `D^{-1/2} S D^{-1/2}` with `S` the symmetrized `A + I` and `D` its row sums.
pub fn augment_normalize(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Contract(format!("augment_normalize needs a square matrix, got {:?}", a.shape())));
    }
    let sym = Matrix::from_fn(n, n, |i, j| {
        let self_loop = if i == j { 1.0 } else { 0.0 };
        0.5 * (a.get(i, j) + a.get(j, i)) + self_loop
    });
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = sym.row(i).iter().sum();
            1.0 / d.sqrt()
        })
        .collect();
    Ok(Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * sym.get(i, j) * inv_sqrt[j]))
}

/// `z (A + I)`: each latent vector plus its propagation along the edges.
pub fn relation_aware(adjacency: &Matrix, z: &Matrix) -> Result<Matrix> {
    let n = adjacency.rows();
    if z.cols() != n {
        return Err(Error::dim("relation_aware", format!("z has {} columns, graph {n} nodes", z.cols())));
    }
    z.matmul(adjacency)?.add(z)
}

/// Tape form of [`relation_aware`] with `a` a (possibly tracked) n×n adjacency.
pub fn relation_aware_var(tape: &mut Tape, a: Var, z: Var) -> Result<Var> {
    let za = tape.matmul(z, a)?;
    tape.add(za, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("f{k}")).collect()
    }

    #[test]
    fn init_magnitude_mapping() {
        let s = Matrix::filled(3, 3, -0.4);
        let g = init_graph(names(3), &[s], 0.5).unwrap();
        assert_eq!(g.prior().get(0, 1), 0.4);
        assert_eq!(g.prior().get(1, 1), 0.0);
        assert_eq!(g.adjacency(), g.prior());

        let ones = init_graph(names(2), &[Matrix::filled(2, 2, 1.0)], 0.5).unwrap();
        assert_eq!(ones.adjacency().get(0, 1), 1.0);
        assert_eq!(ones.adjacency().get(1, 0), 1.0);
    }

    #[test]
    fn init_averages_signed_values() {
        let a = Matrix::from_rows(&[vec![0.0, 0.6], vec![-0.2, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0, 0.2], vec![0.2, 0.0]]).unwrap();
        let g = init_graph(names(2), &[a, b], 0.5).unwrap();
        assert!((g.prior().get(0, 1) - 0.4).abs() < 1e-15);
        assert_eq!(g.prior().get(1, 0), 0.0);
    }

    #[test]
    fn init_rejects_missing_estimates() {
        assert!(init_graph(names(2), &[], 0.5).is_err());
        let nan = Matrix::filled(2, 2, f64::NAN);
        assert!(init_graph(names(2), &[nan], 0.5).is_err());
    }

    #[test]
    fn normalize_closed_forms() {
        assert_eq!(augment_normalize(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3));
        let out = augment_normalize(&Matrix::filled(2, 2, 1.0)).unwrap();
        // Diagonal of A+I is 2 here since the input diagonal is 1.
        let expect = Matrix::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-15);
        assert!(augment_normalize(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn relation_aware_hand_product() {
        let mut a = Matrix::zeros(3, 3);
        a.set(0, 1, 1.0);
        let z = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(relation_aware(&a, &z).unwrap().row(0), &[1.0, 1.0, 0.0]);
        assert_eq!(relation_aware(&Matrix::zeros(3, 3), &z).unwrap(), z);
        assert!(relation_aware(&a, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn ranked_pairs_use_both_directions() {
        let a = Matrix::from_rows(&[
            vec![0.0, 0.9, 0.1],
            vec![0.1, 0.0, 0.6],
            vec![0.5, 0.6, 0.0],
        ])
        .unwrap();
        let g = DisGraph::from_prior(names(3), a).unwrap();
        let top: Vec<(usize, usize)> = g.ranked_pairs().iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(top, vec![(1, 2), (0, 1), (0, 2)]);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let prior = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 / 10.0);
        let mut g = DisGraph::from_prior(names(3), prior).unwrap().with_eta(0.25).unwrap();
        g.init_window = 64;
        g.set_adjacency(Matrix::filled(3, 3, 1.0 / 3.0)).unwrap();
        g.write(&path).unwrap();
        assert_eq!(DisGraph::read(&path).unwrap(), g);
    }

    #[test]
    fn weights_outside_unit_interval_rejected() {
        assert!(DisGraph::from_prior(names(2), Matrix::filled(2, 2, 1.5)).is_err());
        assert!(DisGraph::from_prior(names(2), Matrix::zeros(3, 3)).is_err());
        let g = DisGraph::from_prior(names(2), Matrix::zeros(2, 2)).unwrap();
        assert!(g.with_eta(2.0).is_err());
    }
}
