use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::numcore::AdamConfig;
use crate::relranker::SomersConvention;
use crate::vae::{LossWeights, StepConfig, DEFAULT_BETA, DEFAULT_LAMBDA_ADV, DEFAULT_LAMBDA_DIS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablations {
    /// β forced to 1.
    pub use_vanilla_vae: bool,
    /// Adjacency frozen at its prior; the graph learner is not trained.
    pub disable_graph_learner: bool,
    /// λ_adv forced to 0.
    pub disable_adversarial: bool,
}

impl Ablations {
    pub const VARIANTS: [(&'static str, Ablations); 4] = [
        ("default", Ablations { use_vanilla_vae: false, disable_graph_learner: false, disable_adversarial: false }),
        ("vanilla_vae", Ablations { use_vanilla_vae: true, disable_graph_learner: false, disable_adversarial: false }),
        ("no_graph_learner", Ablations { use_vanilla_vae: false, disable_graph_learner: true, disable_adversarial: false }),
        ("no_adversarial", Ablations { use_vanilla_vae: false, disable_graph_learner: false, disable_adversarial: true }),
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub beta: f64,
    pub lambda_adv: f64,
    pub lambda_dis: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub n_m: usize,
    pub epochs: usize,
    pub latent_n: usize,
    pub init_window: usize,
    pub eta: f64,
    pub seed: u64,
    pub ablations: Ablations,
    pub somers_convention: SomersConvention,
    /// Weight of the graph-fit term that pulls the learned similarity toward running relation scores.
    pub lambda_graph: f64,
    pub graph_lr: f64,
    pub gcn_layers: usize,
    /// Write an intermediate checkpoint every this many epochs; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            beta: DEFAULT_BETA,
            lambda_adv: DEFAULT_LAMBDA_ADV,
            lambda_dis: DEFAULT_LAMBDA_DIS,
            lr: 1e-4,
            batch_size: 32,
            n_m: 1,
            epochs: 30,
            latent_n: 6,
            init_window: 256,
            eta: 0.5,
            seed: 0,
            ablations: Ablations::default(),
            somers_convention: SomersConvention::Independent,
            lambda_graph: 300.0,
            graph_lr: 2e-2,
            gcn_layers: 2,
            checkpoint_every: 10,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss_weights().validate()?;
        let positive = [("lr", self.lr), ("graph_lr", self.graph_lr)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_graph >= 0.0 && self.lambda_graph.is_finite()) {
            return Err(Error::Config(format!("lambda_graph must be non-negative, got {}", self.lambda_graph)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta {} outside [0, 1]", self.eta)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("n_m", self.n_m),
            ("latent_n", self.latent_n),
            ("gcn_layers", self.gcn_layers),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            beta: self.beta,
            lambda_adv: self.lambda_adv,
            lambda_dis: self.lambda_dis,
        }
    }

    /// The configuration actually trained: ablations folded into the
    /// parameters they override.
    pub fn effective(&self) -> TrainingConfig {
        let mut c = self.clone();
        if c.ablations.use_vanilla_vae {
            c.beta = 1.0;
        }
        if c.ablations.disable_adversarial {
            c.lambda_adv = 0.0;
        }
        if c.ablations.disable_graph_learner {
            c.eta = 1.0;
        }
        c
    }

    pub fn step_config(&self) -> StepConfig {
        let e = self.effective();
        StepConfig {
            weights: e.loss_weights(),
            n_m: e.n_m,
            adam: AdamConfig::with_lr(e.lr),
            graph_adam: AdamConfig::with_lr(e.graph_lr),
            lambda_graph: e.lambda_graph,
        }
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let cfg = TrainingConfig {
            beta: doc.parse_or("beta", d.beta)?,
            lambda_adv: doc.parse_or("lambda_adv", d.lambda_adv)?,
            lambda_dis: doc.parse_or("lambda_dis", d.lambda_dis)?,
            lr: doc.parse_or("lr", d.lr)?,
            batch_size: doc.parse_or("batch_size", d.batch_size)?,
            n_m: doc.parse_or("n_m", d.n_m)?,
            epochs: doc.parse_or("epochs", d.epochs)?,
            latent_n: doc.parse_or("latent_n", d.latent_n)?,
            init_window: doc.parse_or("init_window", d.init_window)?,
            eta: doc.parse_or("eta", d.eta)?,
            seed: doc.parse_or("seed", d.seed)?,
            ablations: Ablations {
                use_vanilla_vae: doc.parse_bool_or("use_vanilla_vae", false)?,
                disable_graph_learner: doc.parse_bool_or("disable_graph_learner", false)?,
                disable_adversarial: doc.parse_bool_or("disable_adversarial", false)?,
            },
            somers_convention: doc.parse_or("somers_convention", d.somers_convention)?,
            lambda_graph: doc.parse_or("lambda_graph", d.lambda_graph)?,
            graph_lr: doc.parse_or("graph_lr", d.graph_lr)?,
            gcn_layers: doc.parse_or("gcn_layers", d.gcn_layers)?,
            checkpoint_every: doc.parse_or("checkpoint_every", d.checkpoint_every)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("beta", self.beta);
        doc.set("lambda_adv", self.lambda_adv);
        doc.set("lambda_dis", self.lambda_dis);
        doc.set("lr", self.lr);
        doc.set("batch_size", self.batch_size);
        doc.set("n_m", self.n_m);
        doc.set("epochs", self.epochs);
        doc.set("latent_n", self.latent_n);
        doc.set("init_window", self.init_window);
        doc.set("eta", self.eta);
        doc.set("seed", self.seed);
        doc.set("use_vanilla_vae", self.ablations.use_vanilla_vae);
        doc.set("disable_graph_learner", self.ablations.disable_graph_learner);
        doc.set("disable_adversarial", self.ablations.disable_adversarial);
        doc.set("somers_convention", self.somers_convention);
        doc.set("lambda_graph", self.lambda_graph);
        doc.set("graph_lr", self.graph_lr);
        doc.set("gcn_layers", self.gcn_layers);
        doc.set("checkpoint_every", self.checkpoint_every);
        doc
    }

    /// SHA-256 of the rendered configuration, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv().render().as_bytes()))
    }
}
