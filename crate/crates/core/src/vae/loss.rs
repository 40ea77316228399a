use crate::error::{Error, Result};
use crate::numcore::{softplus, Matrix, Tape, Var};
use crate::vae::{EncoderOutput, VaeModel};

pub const DEFAULT_BETA: f64 = 4.0;
pub const DEFAULT_LAMBDA_ADV: f64 = 0.8;
pub const DEFAULT_LAMBDA_DIS: f64 = 0.6;

/// Loss terms of one training step.
///
/// `reconstruction` is the per-image Bernoulli negative log-likelihood, i.e.
/// the pixel count times [`reconstruction_loss`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub adv: f64,
    pub dis: f64,
    pub total: f64,
    /// Discriminator loss of the preceding discriminator update.
    pub discriminator: f64,
    /// Graph-fit loss of the graph learner, 0 when it is not trained.
    pub graph_fit: f64,
}

/// Weighting of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub beta: f64,
    pub lambda_adv: f64,
    pub lambda_dis: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta: DEFAULT_BETA,
            lambda_adv: DEFAULT_LAMBDA_ADV,
            lambda_dis: DEFAULT_LAMBDA_DIS,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("lambda_adv", self.lambda_adv), ("lambda_dis", self.lambda_dis)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// `dis = reconstruction + β·kl`, `total = λ_adv·adv + λ_dis·dis`.
pub fn total_loss(reconstruction: f64, kl: f64, adv: f64, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    let dis = reconstruction + w.beta * kl;
    Ok(LossBreakdown {
        reconstruction,
        kl,
        adv,
        dis,
        total: w.lambda_adv * adv + w.lambda_dis * dis,
        ..LossBreakdown::default()
    })
}

/// Batch mean of the closed-form `KL(q(z|x) || N(0, I))`.
pub fn kl_divergence(out: &EncoderOutput) -> f64 {
    let b = out.mu.rows();
    if b == 0 {
        return 0.0;
    }
    let total: f64 = out
        .mu
        .data()
        .iter()
        .zip(out.log_var.data())
        .map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum();
    total / b as f64
}

/// Mean per-pixel binary cross-entropy of `x_hat` against targets `x` in `[0, 1]`.
pub fn reconstruction_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    x.same_shape(x_hat, "reconstruction_loss")?;
    if x.is_empty() {
        return Ok(0.0);
    }
    const EPS: f64 = 1e-12;
    let total: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(&t, &p)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / x.len() as f64)
}

/// `(loss_D, ratio_term)` for joint and shuffled latents. `z_*` may hold `N_m`
/// stacked copies of the batch; `x` is repeated to match.
pub fn adversarial_loss(model: &VaeModel, x: &Matrix, z_joint: &Matrix, z_shuffled: &Matrix) -> Result<(f64, f64)> {
    z_joint.same_shape(z_shuffled, "adversarial_loss")?;
    let b = x.rows();
    if b == 0 || !z_joint.rows().is_multiple_of(b) {
        return Err(Error::dim(
            "adversarial_loss",
            format!("{} latent rows for {b} images", z_joint.rows()),
        ));
    }
    let x_rep = repeat_rows(x, z_joint.rows() / b);
    let dj = model.discriminate(&x_rep, z_joint)?;
    let ds = model.discriminate(&x_rep, z_shuffled)?;
    let m = dj.len() as f64;
    let loss = dj.data().iter().map(|&d| softplus(-d)).sum::<f64>() / m + ds.data().iter().map(|&d| softplus(d)).sum::<f64>() / m;
    Ok((loss, dj.mean()))
}

/// `x` stacked `copies` times, copy-major.
pub fn repeat_rows(x: &Matrix, copies: usize) -> Matrix {
    let b = x.rows();
    Matrix::from_fn(b * copies, x.cols(), |r, c| x.get(r % b, c))
}

/// Tape form of [`kl_divergence`].
pub fn kl_var(tape: &mut Tape, mu: Var, log_var: Var) -> Result<Var> {
    let (b, n) = tape.value(mu).shape();
    let mu2 = tape.square(mu)?;
    let var = tape.exp(log_var)?;
    let a = tape.add(mu2, var)?;
    let a = tape.sub(a, log_var)?;
    let s = tape.sum(a)?;
    let offset = tape.constant(Matrix::scalar(-((b * n) as f64)));
    let s = tape.add(s, offset)?;
    tape.scale(s, 0.5 / b as f64)
}

/// Per-image Bernoulli NLL from decoder logits: batch mean of `Σ softplus(l) − x·l`.
pub fn reconstruction_nll_var(tape: &mut Tape, logits: Var, x: Var) -> Result<Var> {
    let b = tape.value(logits).rows();
    let sp = tape.softplus(logits)?;
    let xl = tape.mul(x, logits)?;
    let per = tape.sub(sp, xl)?;
    let s = tape.sum(per)?;
    tape.scale(s, 1.0 / b as f64)
}

/// `mean softplus(−D_joint) + mean softplus(D_shuffled)`.
pub fn discriminator_loss_var(tape: &mut Tape, d_joint: Var, d_shuffled: Var) -> Result<Var> {
    let neg = tape.scale(d_joint, -1.0)?;
    let a = tape.softplus(neg)?;
    let a = tape.mean(a)?;
    let b = tape.softplus(d_shuffled)?;
    let b = tape.mean(b)?;
    tape.add(a, b)
}
