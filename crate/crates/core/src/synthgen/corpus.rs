use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::numcore::{Matrix, Rng};
use crate::synthgen::render::{render, IMAGE_SIDE};
use crate::synthgen::spec::FactorSpec;

pub const MAGIC: &[u8; 4] = b"GEMC";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSample {
    pub id: usize,
    pub factors: Vec<f64>,
    pub image: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub spec: FactorSpec,
    pub samples: Vec<SceneSample>,
}

/// Draws i.i.d. uniform base values, then applies the correlation rules in list order.
pub fn sample_factors(spec: &FactorSpec, rng: &mut Rng) -> Vec<f64> {
    let mut f: Vec<f64> = (0..spec.n_attributes()).map(|_| rng.uniform()).collect();
    for rule in &spec.rules {
        let shifted = f[rule.target] + rule.strength * (f[rule.source] - 0.5);
        f[rule.target] = shifted.clamp(0.0, 1.0);
    }
    f
}

impl Corpus {
    /// `n` samples; sample `id` draws from its own stream derived from `spec.seed ^ id`.
    pub fn generate(spec: &FactorSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        let samples = (0..n)
            .into_par_iter()
            .map(|id| {
                let mut rng = Rng::derived(spec.seed, id as u64);
                let factors = sample_factors(spec, &mut rng);
                let image = render(&factors);
                SceneSample { id, factors, image }
            })
            .collect();
        Ok(Corpus {
            spec: spec.clone(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.spec.n_attributes()
    }

    pub fn image_side(&self) -> usize {
        IMAGE_SIDE
    }

    /// Flattened images of `ids`, one per row.
    pub fn image_batch(&self, ids: &[usize]) -> Matrix {
        let dim = IMAGE_SIDE * IMAGE_SIDE;
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            data.extend_from_slice(self.samples[id].image.data());
        }
        Matrix::from_vec(ids.len(), dim, data).expect("image batch shape")
    }

    pub fn factor_matrix(&self, ids: &[usize]) -> Matrix {
        let n = self.n_attributes();
        Matrix::from_fn(ids.len(), n, |r, c| self.samples[ids[r]].factors[c])
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_attributes();
        let side = IMAGE_SIDE;
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (4 + 8 * (n + side * side)));
        out.extend_from_slice(MAGIC);
        for v in [FORMAT_VERSION, self.len() as u32, n as u32, side as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in &self.samples {
            out.extend_from_slice(&(s.id as u32).to_le_bytes());
            for f in &s.factors {
                out.extend_from_slice(&f.to_le_bytes());
            }
            for p in s.image.data() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], spec: FactorSpec) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Data("not a GEMC corpus (bad magic)".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (version, count, n, side) = (word(0), word(1), word(2), word(3));
        if version != FORMAT_VERSION as usize {
            return Err(Error::Data(format!("unsupported corpus version {version}")));
        }
        if side != IMAGE_SIDE {
            return Err(Error::Data(format!("image side {side}, expected {IMAGE_SIDE}")));
        }
        if n != spec.n_attributes() {
            return Err(Error::Data(format!(
                "corpus has {n} attributes but its sidecar names {}",
                spec.n_attributes()
            )));
        }
        let record = 4 + 8 * (n + side * side);
        if bytes.len() != HEADER_LEN + count * record {
            return Err(Error::Data(format!(
                "corpus length {} does not match {count} records",
                bytes.len()
            )));
        }
        let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let mut samples = Vec::with_capacity(count);
        for k in 0..count {
            let base = HEADER_LEN + k * record;
            let id = u32::from_le_bytes(bytes[base..base + 4].try_into().unwrap()) as usize;
            if id != k {
                return Err(Error::Data(format!("record {k} carries id {id}; ids must be dense")));
            }
            let factors = (0..n).map(|j| f64_at(base + 4 + 8 * j)).collect();
            let pixels = (0..side * side)
                .map(|j| f64_at(base + 4 + 8 * (n + j)))
                .collect();
            samples.push(SceneSample {
                id,
                factors,
                image: Matrix::from_vec(side, side, pixels)?,
            });
        }
        Ok(Corpus { spec, samples })
    }

    /// Writes the binary container and its `.meta` sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
        let mut meta = self.spec.to_kv();
        meta.set("samples", self.len());
        meta.set("image_side", IMAGE_SIDE);
        meta.write(&Self::sidecar_path(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let spec = FactorSpec::from_kv(&KvDoc::read(&Self::sidecar_path(path))?)?;
        Self::from_bytes(&bytes, spec)
    }
}
