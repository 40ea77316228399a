use crate::disgraph::{augment_normalize, DisGraph};
use crate::error::{Error, Result};
use crate::numcore::{Bound, Matrix, ParameterSet, Rng, Tape, UnaryOp, Var};

pub const DEFAULT_LAYERS: usize = 2;

/// Stack of `n×n` GCN weights `Ω¹..Ωᴸ`.
#[derive(Clone, Debug)]
pub struct GraphLearner {
    n: usize,
    layers: usize,
    /// Activation of hidden layers; the last layer is always linear.
    pub hidden: Option<UnaryOp>,
    pub params: ParameterSet,
}

/// Tape handles produced by [`refine_var`].
#[derive(Clone, Copy, Debug)]
pub struct RefinedVars {
    /// Off-diagonal similarity logits `t_i·t_j/√n` (diagonal zeroed).
    pub logits: Var,
    /// `sigmoid(logits)` with the diagonal masked to zero.
    pub similarity: Var,
    /// `η P + (1 − η) Â`.
    pub adjacency: Var,
}

fn omega_name(l: usize) -> String {
    format!("gcn.omega_{l}")
}

fn off_diagonal_mask(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })
}

impl GraphLearner {
    /// Near-identity weights so the untrained learner roughly preserves its input.
    pub fn new(n: usize, layers: usize, rng: &mut Rng) -> Result<Self> {
        let mut params = ParameterSet::new();
        for l in 1..=layers {
            let noise = rng.normal_matrix(n, n).scale(0.01);
            params.insert(omega_name(l), Matrix::identity(n).add(&noise)?)?;
        }
        Self::with_params(n, layers, Some(UnaryOp::Tanh), params)
    }

    pub fn with_params(n: usize, layers: usize, hidden: Option<UnaryOp>, params: ParameterSet) -> Result<Self> {
        if layers == 0 {
            return Err(Error::Config("graph learner needs at least one layer".into()));
        }
        for l in 1..=layers {
            match params.get(&omega_name(l)) {
                Some(m) if m.shape() == (n, n) => {}
                Some(m) => return Err(Error::dim("GraphLearner", format!("Ω{l} is {:?}, expected {n}x{n}", m.shape()))),
                None => return Err(Error::Contract(format!("missing parameter {}", omega_name(l)))),
            }
        }
        Ok(GraphLearner {
            n,
            layers,
            hidden,
            params,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// `T^l = σ(N T^{l-1} Ω^l)` on the tape.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, norm: Var, t0: Var) -> Result<Var> {
        let mut t = t0;
        for l in 1..=self.layers {
            let nt = tape.matmul(norm, t)?;
            t = tape.matmul(nt, bound.var(&omega_name(l)))?;
            if l < self.layers {
                if let Some(op) = self.hidden {
                    t = tape.unary(op, t)?;
                }
            }
        }
        Ok(t)
    }
}

/// Similarity and blended adjacency from embeddings `t` on the tape.
pub fn refine_var(tape: &mut Tape, t: Var, prior: &Matrix, eta: f64) -> Result<RefinedVars> {
    let n = prior.rows();
    if tape.value(t).shape() != (n, n) {
        return Err(Error::dim("refine_adjacency", format!("embeddings {:?} for {n} nodes", tape.value(t).shape())));
    }
    let tt = tape.transpose(t)?;
    let gram = tape.matmul(t, tt)?;
    let scaled = tape.scale(gram, 1.0 / (n as f64).sqrt())?;
    let mask = tape.constant(off_diagonal_mask(n));
    let logits = tape.mul(scaled, mask)?;
    let sig = tape.sigmoid(logits)?;
    let similarity = tape.mul(sig, mask)?;
    let p = tape.constant(prior.scale(eta));
    let learned = tape.scale(similarity, 1.0 - eta)?;
    let adjacency = tape.add(p, learned)?;
    Ok(RefinedVars {
        logits,
        similarity,
        adjacency,
    })
}

/// Mean off-diagonal binary cross-entropy between `sigmoid(logits)` and `target`.
pub fn graph_fit_loss(tape: &mut Tape, logits: Var, target: &Matrix) -> Result<Var> {
    let n = target.rows();
    if tape.value(logits).shape() != target.shape() || n < 2 {
        return Err(Error::dim("graph_fit_loss", format!("{:?} vs {:?}", tape.value(logits).shape(), target.shape())));
    }
    let sp = tape.softplus(logits)?;
    let y = tape.constant(target.map(|v| v.clamp(0.0, 1.0)));
    let yl = tape.mul(y, logits)?;
    let per = tape.sub(sp, yl)?;
    let mask = tape.constant(off_diagonal_mask(n));
    let masked = tape.mul(per, mask)?;
    let total = tape.sum(masked)?;
    tape.scale(total, 1.0 / (n * (n - 1)) as f64)
}

/// Embeddings of `t0` propagated over the normalized prior (sketched) adjacency of `graph`.
pub fn gcn_forward(learner: &GraphLearner, graph: &DisGraph, t0: &Matrix) -> Result<Matrix> {
    let n = graph.n();
    if learner.n() != n || t0.shape() != (n, n) {
        return Err(Error::dim("gcn_forward", format!("learner {}, graph {n}, T0 {:?}", learner.n(), t0.shape())));
    }
    let mut tape = Tape::new();
    let bound = learner.params.bind(&mut tape, false);
    let norm = tape.constant(augment_normalize(graph.prior())?);
    let t0 = tape.constant(t0.clone());
    let t = learner.forward(&mut tape, &bound, norm, t0)?;
    Ok(tape.value(t).clone())
}

/// New graph whose adjacency is `η P + (1 − η) sigmoid(T Tᵀ/√n)` off the diagonal.
pub fn refine_adjacency(graph: &DisGraph, t: &Matrix) -> Result<DisGraph> {
    let mut tape = Tape::new();
    let tv = tape.constant(t.clone());
    let r = refine_var(&mut tape, tv, graph.prior(), graph.eta())?;
    let mut out = graph.clone();
    out.set_adjacency(tape.value(r.adjacency).map(|v| v.clamp(0.0, 1.0)))?;
    Ok(out)
}
