//! Key-value manifest plus a little-endian `f64` blob in parameter declaration order.

use std::path::{Path, PathBuf};

use crate::disgraph::GraphLearner;
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::numcore::{ParameterSet, Rng, UnaryOp};
use crate::vae::{VaeArch, VaeModel};

pub const CHECKPOINT_FORMAT: &str = "gem-checkpoint-1";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: VaeModel,
    pub learner: GraphLearner,
    pub step: usize,
    pub config_hash: String,
}

fn pair(v: [usize; 2]) -> String {
    format!("{},{}", v[0], v[1])
}

fn parse_pair(doc: &KvDoc, key: &str) -> Result<[usize; 2]> {
    let bad = || Error::Data(format!("checkpoint manifest: bad {key}"));
    let parts = doc.list(key).ok_or_else(bad)?;
    match parts.as_slice() {
        [a, b] => Ok([a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?]),
        _ => Err(bad()),
    }
}

fn sets(c: &Checkpoint) -> [&ParameterSet; 4] {
    [&c.model.encoder, &c.model.decoder, &c.model.discriminator, &c.learner.params]
}

impl Checkpoint {
    pub fn blob_path(manifest: &Path) -> PathBuf {
        let mut s = manifest.as_os_str().to_owned();
        s.push(".bin");
        PathBuf::from(s)
    }

    pub fn manifest(&self) -> KvDoc {
        let a = &self.model.arch;
        let mut doc = KvDoc::new();
        doc.set("format", CHECKPOINT_FORMAT);
        doc.set("image_dim", a.image_dim);
        doc.set("latent_n", a.latent_n);
        doc.set("encoder_hidden", pair(a.encoder_hidden));
        doc.set("decoder_hidden", pair(a.decoder_hidden));
        doc.set("disc_hidden", pair(a.disc_hidden));
        doc.set("gcn_layers", self.learner.layers());
        doc.set("gcn_hidden", if self.learner.hidden.is_some() { "tanh" } else { "identity" });
        doc.set("step", self.step);
        doc.set("config_hash", &self.config_hash);
        let count: usize = sets(self).iter().map(|s| s.scalar_count()).sum();
        doc.set("scalars", count);
        doc
    }

    pub fn blob(&self) -> Vec<u8> {
        sets(self)
            .iter()
            .flat_map(|s| s.flatten())
            .flat_map(f64::to_le_bytes)
            .collect()
    }

    pub fn write(&self, manifest: &Path) -> Result<()> {
        let blob = Self::blob_path(manifest);
        std::fs::write(&blob, self.blob()).map_err(|e| Error::io(&blob, e))?;
        self.manifest().write(manifest)
    }

    pub fn read(manifest: &Path) -> Result<Self> {
        let doc = KvDoc::read(manifest)?;
        if doc.get("format") != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Data(format!("{} is not a checkpoint manifest", manifest.display())));
        }
        let need = |k: &str| -> Result<usize> {
            doc.parse_value(k)?
                .ok_or_else(|| Error::Data(format!("checkpoint manifest lacks {k}")))
        };
        let arch = VaeArch {
            image_dim: need("image_dim")?,
            latent_n: need("latent_n")?,
            encoder_hidden: parse_pair(&doc, "encoder_hidden")?,
            decoder_hidden: parse_pair(&doc, "decoder_hidden")?,
            disc_hidden: parse_pair(&doc, "disc_hidden")?,
        };
        let layers = need("gcn_layers")?;
        let hidden = match doc.get("gcn_hidden") {
            Some("identity") => None,
            _ => Some(UnaryOp::Tanh),
        };
        // Shapes come from fresh initializers; values are overwritten from the blob.
        let mut rng = Rng::new(0);
        let model = VaeModel::new(arch.clone(), &mut rng).map_err(|e| Error::Data(e.to_string()))?;
        let fresh = GraphLearner::new(arch.latent_n, layers, &mut rng).map_err(|e| Error::Data(e.to_string()))?;
        let learner = GraphLearner::with_params(arch.latent_n, layers, hidden, fresh.params)?;
        let mut ck = Checkpoint {
            model,
            learner,
            step: need("step")?,
            config_hash: doc.get("config_hash").unwrap_or_default().to_string(),
        };

        let blob_path = Self::blob_path(manifest);
        let bytes = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        let expected: usize = sets(&ck).iter().map(|s| s.scalar_count()).sum();
        if bytes.len() != expected * 8 || need("scalars")? != expected {
            return Err(Error::Data(format!(
                "checkpoint blob has {} bytes, architecture needs {}",
                bytes.len(),
                expected * 8
            )));
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        ck.model.encoder.load_flat(&mut values)?;
        ck.model.decoder.load_flat(&mut values)?;
        ck.model.discriminator.load_flat(&mut values)?;
        ck.learner.params.load_flat(&mut values)?;
        Ok(ck)
    }
}
