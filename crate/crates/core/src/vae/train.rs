use crate::disgraph::{augment_normalize, gcn_forward, graph_fit_loss, refine_adjacency, refine_var, DisGraph, GraphLearner};
use crate::error::{Error, Result};
use crate::numcore::{AdamConfig, Bound, Matrix, Rng, Tape, Var};
use crate::vae::loss::{discriminator_loss_var, kl_var, reconstruction_nll_var, repeat_rows, LossBreakdown, LossWeights};
use crate::vae::{reparameterize, VaeModel};
use crate::disgraph::relation_aware_var;

/// Hyperparameters of one alternating update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    pub weights: LossWeights,
    /// Posterior samples per input.
    pub n_m: usize,
    pub adam: AdamConfig,
    pub graph_adam: AdamConfig,
    /// Weight of the graph-fit term on the graph learner.
    pub lambda_graph: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            weights: LossWeights::default(),
            n_m: 1,
            adam: AdamConfig::default(),
            graph_adam: AdamConfig::with_lr(2e-2),
            lambda_graph: 300.0,
        }
    }
}

/// Graph, its learner and the relation target that the learner is fit to.
#[derive(Clone, Debug)]
pub struct GraphState {
    pub graph: DisGraph,
    pub learner: GraphLearner,
    /// When false the adjacency is a constant and the learner is never updated.
    pub refine: bool,
    /// Running `|S|` estimate for the graph-fit term; `None` disables it.
    pub target: Option<Matrix>,
}

impl GraphState {
    pub fn new(graph: DisGraph, learner: GraphLearner, refine: bool) -> Result<Self> {
        if learner.n() != graph.n() {
            return Err(Error::dim("GraphState", format!("learner {} vs graph {}", learner.n(), graph.n())));
        }
        Ok(GraphState {
            graph,
            learner,
            refine,
            target: None,
        })
    }

    /// Recomputes the adjacency from the current learner weights.
    pub fn refresh(&mut self) -> Result<()> {
        if self.refine {
            let t = gcn_forward(&self.learner, &self.graph, self.graph.prior())?;
            self.graph = refine_adjacency(&self.graph, &t)?;
        }
        Ok(())
    }
}

/// Handles of the encoder/decoder-side objective on a tape.
pub struct Objective {
    pub enc: Bound,
    pub dec: Bound,
    /// Bound as constants; never receives gradients here.
    pub disc: Bound,
    pub gcn: Option<Bound>,
    pub z: Var,
    pub adjacency: Var,
    pub reconstruction: Var,
    pub kl: Var,
    pub adv: Var,
    pub dis: Var,
    pub total: Var,
    pub graph_fit: Option<Var>,
    /// `total + λ_graph·graph_fit`; what gets differentiated.
    pub objective: Var,
}

struct Encoded {
    enc: Bound,
    x: Var,
    z: Var,
    mu: Var,
    log_var: Var,
}

fn encode_part(tape: &mut Tape, model: &VaeModel, x_rep: &Matrix, eps: &Matrix) -> Result<Encoded> {
    let enc = model.encoder.bind(tape, true);
    let x = tape.constant(x_rep.clone());
    let (mu, log_var) = model.encoder_vars(tape, &enc, x)?;
    let z = reparameterize(tape, mu, log_var, eps)?;
    Ok(Encoded { enc, x, z, mu, log_var })
}

fn objective_part(tape: &mut Tape, model: &VaeModel, state: &GraphState, e: Encoded, cfg: &StepConfig) -> Result<Objective> {
    let w = &cfg.weights;
    let dec = model.decoder.bind(tape, true);
    let disc = model.discriminator.bind(tape, false);

    let (adjacency, gcn, graph_fit) = if state.refine {
        let gcn = state.learner.params.bind(tape, true);
        let norm = tape.constant(augment_normalize(state.graph.prior())?);
        let t0 = tape.constant(state.graph.prior().clone());
        let t = state.learner.forward(tape, &gcn, norm, t0)?;
        let r = refine_var(tape, t, state.graph.prior(), state.graph.eta())?;
        let fit = match &state.target {
            Some(target) if cfg.lambda_graph > 0.0 => Some(graph_fit_loss(tape, r.logits, target)?),
            _ => None,
        };
        (r.adjacency, Some(gcn), fit)
    } else {
        (tape.constant(state.graph.adjacency().clone()), None, None)
    };

    let z_rel = relation_aware_var(tape, adjacency, e.z)?;
    let logits = model.decoder_logits(tape, &dec, z_rel)?;
    let reconstruction = reconstruction_nll_var(tape, logits, e.x)?;
    let kl = kl_var(tape, e.mu, e.log_var)?;
    let d = model.disc_logits(tape, &disc, e.x, e.z)?;
    let ratio = tape.mean(d)?;
    let adv = tape.scale(ratio, -1.0)?;

    let bkl = tape.scale(kl, w.beta)?;
    let dis = tape.add(reconstruction, bkl)?;
    let a = tape.scale(adv, w.lambda_adv)?;
    let b = tape.scale(dis, w.lambda_dis)?;
    let total = tape.add(a, b)?;
    let objective = match graph_fit {
        Some(g) => {
            let g = tape.scale(g, cfg.lambda_graph)?;
            tape.add(total, g)?
        }
        None => total,
    };
    Ok(Objective {
        enc: e.enc,
        dec,
        disc,
        gcn,
        z: e.z,
        adjacency,
        reconstruction,
        kl,
        adv,
        dis,
        total,
        graph_fit,
        objective,
    })
}

/// Builds the encoder/decoder-side objective for `x` (already repeated `N_m`
/// times) with a fixed posterior draw `eps`. The discriminator enters as a constant.
pub fn objective(tape: &mut Tape, model: &VaeModel, state: &GraphState, x_rep: &Matrix, eps: &Matrix, cfg: &StepConfig) -> Result<Objective> {
    let e = encode_part(tape, model, x_rep, eps)?;
    objective_part(tape, model, state, e, cfg)
}

/// Discriminator loss on joint pairs and pairs shuffled by `perm`, with the
/// discriminator tracked. Returns the tape, its bound parameters and the loss.
pub fn discriminator_objective(model: &VaeModel, x_rep: &Matrix, z: &Matrix, perm: &[usize]) -> Result<(Tape, Bound, Var)> {
    let mut tape = Tape::new();
    let disc = model.discriminator.bind(&mut tape, true);
    let x = tape.constant(x_rep.clone());
    let zj = tape.constant(z.clone());
    let zs = tape.gather_rows(zj, perm)?;
    let dj = model.disc_logits(&mut tape, &disc, x, zj)?;
    let ds = model.disc_logits(&mut tape, &disc, x, zs)?;
    let loss = discriminator_loss_var(&mut tape, dj, ds)?;
    Ok((tape, disc, loss))
}

fn diverged(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NumericDomain { op, detail } => Error::Divergence {
            step,
            detail: format!("{op}: {detail}"),
        },
        other => other,
    }
}

/// One alternating update: the discriminator on its loss with the
/// encoder/decoder frozen, then encoder, decoder and graph learner on the
/// total loss with the discriminator frozen.
pub fn train_step(model: &mut VaeModel, state: &mut GraphState, x: &Matrix, cfg: &StepConfig, rng: &mut Rng, step: usize) -> Result<LossBreakdown> {
    cfg.weights.validate()?;
    if cfg.n_m == 0 {
        return Err(Error::Config("n_m must be at least 1".into()));
    }
    if x.cols() != model.arch.image_dim || x.rows() == 0 {
        return Err(Error::dim("train_step", format!("batch {:?} for image dim {}", x.shape(), model.arch.image_dim)));
    }
    if state.graph.n() != model.arch.latent_n {
        return Err(Error::dim("train_step", format!("graph has {} nodes, latent_n is {}", state.graph.n(), model.arch.latent_n)));
    }
    let x_rep = repeat_rows(x, cfg.n_m);
    let rows = x_rep.rows();
    let eps = rng.normal_matrix(rows, model.arch.latent_n);
    let perm = rng.permutation(rows);

    let mut run = || -> Result<LossBreakdown> {
        let mut tape = Tape::new();
        let e = encode_part(&mut tape, model, &x_rep, &eps)?;

        // Discriminator update; the encoder is not touched so `z` stays valid.
        let z = tape.value(e.z).clone();
        let (mut dtape, dbound, dloss) = discriminator_objective(model, &x_rep, &z, &perm)?;
        let disc_loss = dtape.value(dloss).get(0, 0);
        dtape.backward(dloss)?;
        model.discriminator.accumulate_grads(&dtape, &dbound);
        model.discriminator.adam_step(&cfg.adam);

        let obj = objective_part(&mut tape, model, state, e, cfg)?;
        let scalar = |v: Var| tape.value(v).get(0, 0);
        let out = LossBreakdown {
            reconstruction: scalar(obj.reconstruction),
            kl: scalar(obj.kl),
            adv: scalar(obj.adv),
            dis: scalar(obj.dis),
            total: scalar(obj.total),
            discriminator: disc_loss,
            graph_fit: obj.graph_fit.map(scalar).unwrap_or(0.0),
        };
        if !out.total.is_finite() {
            return Err(Error::NumericDomain {
                op: "train_step",
                detail: "non-finite total loss".into(),
            });
        }
        tape.backward(obj.objective)?;
        model.encoder.accumulate_grads(&tape, &obj.enc);
        model.decoder.accumulate_grads(&tape, &obj.dec);
        model.encoder.adam_step(&cfg.adam);
        model.decoder.adam_step(&cfg.adam);
        if let Some(gcn) = &obj.gcn {
            state.learner.params.accumulate_grads(&tape, gcn);
            state.learner.params.adam_step(&cfg.graph_adam);
        }
        Ok(out)
    };
    let out = run().map_err(diverged(step))?;
    state.refresh().map_err(diverged(step))?;
    Ok(out)
}
