//! Helpers shared by the integration tests: finite differences, brute-force
//! oracles and the micro model used by the gradient checks.
#![allow(dead_code)]

use gem_core::disgraph::{DisGraph, GraphLearner};
use gem_core::numcore::{Matrix, ParameterSet, Rng, Tape};
use gem_core::relranker::{Direction, PairCounts, SomersConvention};
use gem_core::vae::{objective, GraphState, StepConfig, VaeArch, VaeModel};

pub const FD_STEP: f64 = 1e-5;

/// Gradients below this magnitude are compared absolutely against it.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Largest relative error between `analytic(name)` and central differences of
/// `f` over every scalar in `params`. Returns the error and where it occurred.
pub fn max_fd_error(
    params: &ParameterSet,
    analytic: &dyn Fn(&str) -> Matrix,
    f: &dyn Fn(&ParameterSet) -> f64,
) -> (f64, String) {
    let mut worst = (0.0, String::new());
    let names: Vec<String> = params.iter().map(|p| p.name().to_string()).collect();
    for name in &names {
        let base = params.value(name).clone();
        let grad = analytic(name);
        assert_eq!(grad.shape(), base.shape(), "gradient shape for {name}");
        let mut probe = params.clone();
        for k in 0..base.len() {
            let mut plus = base.clone();
            plus.data_mut()[k] += FD_STEP;
            probe.set_value(name, plus).unwrap();
            let fp = f(&probe);
            let mut minus = base.clone();
            minus.data_mut()[k] -= FD_STEP;
            probe.set_value(name, minus).unwrap();
            let fm = f(&probe);
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let e = rel_error(grad.data()[k], numeric);
            if e > worst.0 {
                worst = (e, format!("{name}[{k}]: analytic {} numeric {numeric}", grad.data()[k]));
            }
        }
        probe.set_value(name, base).unwrap();
    }
    worst
}

/// O(m²) pair classification used as the oracle for the table-based counter.
pub fn naive_counts(x: &[u8], y: &[u8]) -> PairCounts {
    let mut c = PairCounts::default();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].cmp(&x[j]);
            let dy = y[i].cmp(&y[j]);
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => c.ties_both += 1,
                (Equal, _) => c.ties_first += 1,
                (_, Equal) => c.ties_second += 1,
                (a, b) if a == b => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

/// Somers' D written out from the pair classes.
pub fn naive_somers(c: &PairCounts, direction: Direction, convention: SomersConvention) -> f64 {
    let (tie_indep, tie_dep) = match direction {
        Direction::Forward => (c.ties_first, c.ties_second),
        Direction::Reverse => (c.ties_second, c.ties_first),
    };
    let ties = match convention {
        SomersConvention::Independent => tie_indep,
        SomersConvention::Classical => tie_dep,
    };
    let denom = c.concordant + c.discordant + ties;
    if denom == 0 {
        0.0
    } else {
        (c.concordant as f64 - c.discordant as f64) / denom as f64
    }
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("attr_{k}")).collect()
}

pub fn random_unit_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform())
}

/// 8x8 images, six latents, every network small enough for exhaustive checks.
pub struct MicroSetup {
    pub model: VaeModel,
    pub state: GraphState,
    pub x: Matrix,
    pub eps: Matrix,
    pub cfg: StepConfig,
}

pub const MICRO_BATCH: usize = 4;

pub fn micro_setup(seed: u64) -> MicroSetup {
    let n = 6;
    let mut rng = Rng::new(seed);
    let model = VaeModel::new(VaeArch::compact(64, n, 16, 8), &mut rng).unwrap();
    let mut prior = random_unit_matrix(n, n, &mut rng);
    for i in 0..n {
        prior.set(i, i, 0.0);
    }
    let graph = DisGraph::from_prior(names(n), prior).unwrap();
    let learner = GraphLearner::new(n, 2, &mut rng).unwrap();
    let mut state = GraphState::new(graph, learner, true).unwrap();
    state.target = Some(random_unit_matrix(n, n, &mut rng));
    state.refresh().unwrap();
    let x = random_unit_matrix(MICRO_BATCH, 64, &mut rng);
    let eps = rng.normal_matrix(MICRO_BATCH, n);
    MicroSetup {
        model,
        state,
        x,
        eps,
        cfg: StepConfig::default(),
    }
}

impl MicroSetup {
    pub fn objective_value(&self, model: &VaeModel, state: &GraphState) -> f64 {
        let mut tape = Tape::new();
        let o = objective(&mut tape, model, state, &self.x, &self.eps, &self.cfg).unwrap();
        tape.value(o.objective).get(0, 0)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|r| m.row(r).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Every file below `dir`, keyed by relative path.
pub fn dir_bytes(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let key = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
