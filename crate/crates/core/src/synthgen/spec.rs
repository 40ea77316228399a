use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvDoc;

pub const DEFAULT_NAMES: [&str; 6] = [
    "background",
    "square_size",
    "square_intensity",
    "bar_height",
    "bar_position",
    "dot_radius",
];

/// Renderer supports one visual property per factor, six in total.
pub const MAX_ATTRIBUTES: usize = 6;

/// `target <- clamp(target + strength * (source - 0.5), 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationRule {
    pub source: usize,
    pub target: usize,
    pub strength: f64,
}

impl fmt::Display for CorrelationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}:{}", self.source, self.target, self.strength)
    }
}

impl std::str::FromStr for CorrelationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad rule {s:?}, expected `source>target:strength`"));
        let (pair, strength) = s.split_once(':').ok_or_else(bad)?;
        let (src, dst) = pair.split_once('>').ok_or_else(bad)?;
        Ok(CorrelationRule {
            source: src.trim().parse().map_err(|_| bad())?,
            target: dst.trim().parse().map_err(|_| bad())?,
            strength: strength.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpec {
    pub names: Vec<String>,
    pub rules: Vec<CorrelationRule>,
    pub seed: u64,
}

impl FactorSpec {
    pub fn new(names: Vec<String>, rules: Vec<CorrelationRule>, seed: u64) -> Result<Self> {
        let spec = FactorSpec { names, rules, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Six independent factors with the default names.
    pub fn independent(seed: u64) -> Self {
        FactorSpec {
            names: DEFAULT_NAMES.iter().map(|s| s.to_string()).collect(),
            rules: Vec::new(),
            seed,
        }
    }

    pub fn with_rules(seed: u64, rules: &[(usize, usize, f64)]) -> Result<Self> {
        let mut spec = Self::independent(seed);
        spec.rules = rules
            .iter()
            .map(|&(source, target, strength)| CorrelationRule {
                source,
                target,
                strength,
            })
            .collect();
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_attributes(&self) -> usize {
        self.names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_attributes();
        if !(2..=MAX_ATTRIBUTES).contains(&n) {
            return Err(Error::Config(format!(
                "n_attributes must be in 2..={MAX_ATTRIBUTES}, got {n}"
            )));
        }
        for r in &self.rules {
            if r.source >= n || r.target >= n {
                return Err(Error::Config(format!("rule {r} references a missing attribute")));
            }
            if r.source == r.target {
                return Err(Error::Config(format!("rule {r} is a self-rule")));
            }
            if !(-1.0..=1.0).contains(&r.strength) {
                return Err(Error::Config(format!("rule {r} strength outside [-1, 1]")));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("n_attributes", self.n_attributes());
        doc.set("names", self.names.join(","));
        doc.set(
            "rules",
            self.rules
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        doc.set("seed", self.seed);
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let n: Option<usize> = doc.parse_value("n_attributes")?;
        let names = match doc.list("names") {
            Some(names) => names,
            None => {
                let n = n.unwrap_or(DEFAULT_NAMES.len());
                (0..n)
                    .map(|k| DEFAULT_NAMES.get(k).map_or(format!("attr_{k}"), |s| s.to_string()))
                    .collect()
            }
        };
        if let Some(n) = n {
            if n != names.len() {
                return Err(Error::Config(format!(
                    "n_attributes = {n} but {} names given",
                    names.len()
                )));
            }
        }
        let rules = doc
            .list("rules")
            .unwrap_or_default()
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()?;
        let seed = doc.parse_or("seed", 0u64)?;
        Self::new(names, rules, seed)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvDoc::read(path)?)
    }
}
