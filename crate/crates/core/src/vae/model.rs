use crate::error::{Error, Result};
use crate::numcore::{Bound, Matrix, ParameterSet, Rng, Tape, Var};

/// Layer widths of the three networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VaeArch {
    pub image_dim: usize,
    pub latent_n: usize,
    pub encoder_hidden: [usize; 2],
    pub decoder_hidden: [usize; 2],
    pub disc_hidden: [usize; 2],
}

impl VaeArch {
    pub fn standard(image_dim: usize, latent_n: usize) -> Self {
        VaeArch {
            image_dim,
            latent_n,
            encoder_hidden: [256, 128],
            decoder_hidden: [128, 256],
            disc_hidden: [256, 128],
        }
    }

    /// Same shape with every hidden width set to `h0, h1`; for tests and quick runs.
    pub fn compact(image_dim: usize, latent_n: usize, h0: usize, h1: usize) -> Self {
        VaeArch {
            image_dim,
            latent_n,
            encoder_hidden: [h0, h1],
            decoder_hidden: [h1, h0],
            disc_hidden: [h0, h1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [self.encoder_hidden, self.decoder_hidden, self.disc_hidden];
        if self.image_dim == 0 || self.latent_n == 0 || widths.iter().flatten().any(|&w| w == 0) {
            return Err(Error::Config(format!("architecture has a zero-width layer: {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn encoder_dims(&self) -> [usize; 4] {
        let [a, b] = self.encoder_hidden;
        [self.image_dim, a, b, 2 * self.latent_n]
    }

    pub(crate) fn decoder_dims(&self) -> [usize; 4] {
        let [a, b] = self.decoder_hidden;
        [self.latent_n, a, b, self.image_dim]
    }

    pub(crate) fn disc_dims(&self) -> [usize; 4] {
        let [a, b] = self.disc_hidden;
        [self.image_dim + self.latent_n, a, b, 1]
    }
}

/// Posterior parameters and the reparameterized sample for a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    pub mu: Matrix,
    pub log_var: Matrix,
    pub z: Matrix,
    /// The standard-normal draw used for `z`.
    pub eps: Matrix,
}

pub const LOG_VAR_BOUND: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct VaeModel {
    pub arch: VaeArch,
    pub encoder: ParameterSet,
    pub decoder: ParameterSet,
    pub discriminator: ParameterSet,
}

fn mlp_params(prefix: &str, dims: &[usize], rng: Option<&mut Rng>) -> Result<ParameterSet> {
    let mut set = ParameterSet::new();
    let mut rng = rng;
    let last = dims.len() - 2;
    for (l, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let w = format!("{prefix}.w{}", l + 1);
        match rng.as_deref_mut() {
            Some(r) if l < last => set.insert_he(&w, fan_in, fan_out, r)?,
            Some(r) => set.insert_glorot(&w, fan_in, fan_out, r)?,
            None => set.insert(w, Matrix::zeros(fan_in, fan_out))?,
        }
        set.insert(format!("{prefix}.b{}", l + 1), Matrix::zeros(1, fan_out))?;
    }
    Ok(set)
}

/// ReLU on hidden layers, linear output.
fn mlp_forward(tape: &mut Tape, bound: &Bound, prefix: &str, layers: usize, x: Var) -> Result<Var> {
    let mut h = x;
    for l in 1..=layers {
        let xw = tape.matmul(h, bound.var(&format!("{prefix}.w{l}")))?;
        h = tape.add_row(xw, bound.var(&format!("{prefix}.b{l}")))?;
        if l < layers {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

impl VaeModel {
    pub fn new(arch: VaeArch, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        Ok(VaeModel {
            encoder: mlp_params("enc", &arch.encoder_dims(), Some(rng))?,
            decoder: mlp_params("dec", &arch.decoder_dims(), Some(rng))?,
            discriminator: mlp_params("disc", &arch.disc_dims(), Some(rng))?,
            arch,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(arch: VaeArch) -> Result<Self> {
        arch.validate()?;
        Ok(VaeModel {
            encoder: mlp_params("enc", &arch.encoder_dims(), None)?,
            decoder: mlp_params("dec", &arch.decoder_dims(), None)?,
            discriminator: mlp_params("disc", &arch.disc_dims(), None)?,
            arch,
        })
    }

    pub fn scalar_count(&self) -> usize {
        self.encoder.scalar_count() + self.decoder.scalar_count() + self.discriminator.scalar_count()
    }

    fn check_cols(&self, op: &'static str, m: &Matrix, cols: usize) -> Result<()> {
        if m.cols() != cols {
            return Err(Error::dim(op, format!("expected {cols} columns, got {}", m.cols())));
        }
        Ok(())
    }

    /// `(mu, log_var)` with `log_var` clamped to `[-10, 10]`.
    pub fn encoder_vars(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<(Var, Var)> {
        let n = self.arch.latent_n;
        let heads = mlp_forward(tape, bound, "enc", 3, x)?;
        let mu = tape.slice_cols(heads, 0, n)?;
        let raw = tape.slice_cols(heads, n, 2 * n)?;
        let log_var = tape.clamp(raw, -LOG_VAR_BOUND, LOG_VAR_BOUND)?;
        Ok((mu, log_var))
    }

    /// Decoder logits; pixels are `sigmoid` of these.
    pub fn decoder_logits(&self, tape: &mut Tape, bound: &Bound, z_rel: Var) -> Result<Var> {
        mlp_forward(tape, bound, "dec", 3, z_rel)
    }

    /// Density-ratio logit `D(x, z)` per row.
    pub fn disc_logits(&self, tape: &mut Tape, bound: &Bound, x: Var, z: Var) -> Result<Var> {
        let xz = tape.concat_cols(x, z)?;
        mlp_forward(tape, bound, "disc", 3, xz)
    }

    pub fn encode_with_eps(&self, x: &Matrix, eps: &Matrix) -> Result<EncoderOutput> {
        self.check_cols("encode", x, self.arch.image_dim)?;
        if eps.shape() != (x.rows(), self.arch.latent_n) {
            return Err(Error::dim("encode", format!("eps {:?} for batch of {}", eps.shape(), x.rows())));
        }
        let mut tape = Tape::new();
        let bound = self.encoder.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let (mu, lv) = self.encoder_vars(&mut tape, &bound, xv)?;
        let z = reparameterize(&mut tape, mu, lv, eps)?;
        Ok(EncoderOutput {
            mu: tape.value(mu).clone(),
            log_var: tape.value(lv).clone(),
            z: tape.value(z).clone(),
            eps: eps.clone(),
        })
    }

    pub fn encode(&self, x: &Matrix, rng: &mut Rng) -> Result<EncoderOutput> {
        let eps = rng.normal_matrix(x.rows(), self.arch.latent_n);
        self.encode_with_eps(x, &eps)
    }

    /// Pixel intensities in `(0, 1)` for relation-aware latents.
    pub fn decode(&self, z_rel: &Matrix) -> Result<Matrix> {
        self.check_cols("decode", z_rel, self.arch.latent_n)?;
        let mut tape = Tape::new();
        let bound = self.decoder.bind(&mut tape, false);
        let z = tape.constant(z_rel.clone());
        let logits = self.decoder_logits(&mut tape, &bound, z)?;
        let out = tape.sigmoid(logits)?;
        Ok(tape.value(out).clone())
    }

    pub fn discriminate(&self, x: &Matrix, z: &Matrix) -> Result<Matrix> {
        self.check_cols("discriminate", x, self.arch.image_dim)?;
        self.check_cols("discriminate", z, self.arch.latent_n)?;
        let mut tape = Tape::new();
        let bound = self.discriminator.bind(&mut tape, false);
        let (xv, zv) = (tape.constant(x.clone()), tape.constant(z.clone()));
        let d = self.disc_logits(&mut tape, &bound, xv, zv)?;
        Ok(tape.value(d).clone())
    }
}

/// `z = mu + exp(log_var / 2) ⊙ eps`.
pub fn reparameterize(tape: &mut Tape, mu: Var, log_var: Var, eps: &Matrix) -> Result<Var> {
    let half = tape.scale(log_var, 0.5)?;
    let std = tape.exp(half)?;
    let e = tape.constant(eps.clone());
    let noise = tape.mul(std, e)?;
    tape.add(mu, noise)
}
