use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numcore::matrix::Matrix;
use crate::numcore::rng::Rng;
use crate::numcore::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Parameter {
    name: String,
    value: Matrix,
    grad: Matrix,
    first_moment: Matrix,
    second_moment: Matrix,
    steps: u64,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn grad(&self) -> &Matrix {
        &self.grad
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Named trainable matrices in declaration order, each with Adam state.
#[derive(Clone, Debug, Default)]
pub struct ParameterSet {
    entries: Vec<Parameter>,
    index: HashMap<String, usize>,
}

/// Tape handles for every entry of a [`ParameterSet`] registered on one tape.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        self.vars[self.index[name]]
    }
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter name {name}")));
        }
        let (r, c) = value.shape();
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(Parameter {
            name,
            value,
            grad: Matrix::zeros(r, c),
            first_moment: Matrix::zeros(r, c),
            second_moment: Matrix::zeros(r, c),
            steps: 0,
        });
        Ok(())
    }

    /// Glorot-uniform weight of shape `fan_in x fan_out`.
    pub fn insert_glorot(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<()> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Matrix::from_fn(fan_in, fan_out, |_, _| rng.uniform_range(-limit, limit));
        self.insert(name, w)
    }

    /// He-uniform weight of shape `fan_in x fan_out`, suited to ReLU layers.
    pub fn insert_he(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<()> {
        let limit = (6.0 / fan_in as f64).sqrt();
        let w = Matrix::from_fn(fan_in, fan_out, |_, _| rng.uniform_range(-limit, limit));
        self.insert(name, w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.entries.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn value(&self, name: &str) -> &Matrix {
        self.get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn grad(&self, name: &str) -> Option<&Matrix> {
        self.index.get(name).map(|&i| &self.entries[i].grad)
    }

    pub fn set_value(&mut self, name: &str, value: Matrix) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))?;
        let p = &mut self.entries[i];
        if p.value.shape() != value.shape() {
            return Err(Error::dim("set_value", format!("{name}: {:?} vs {:?}", p.value.shape(), value.shape())));
        }
        p.value = value;
        Ok(())
    }

    /// Registers every entry on `tape`, as tracked variables when `trainable`
    /// or as constants (frozen) otherwise.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .entries
            .iter()
            .map(|p| {
                if trainable {
                    tape.variable(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect();
        Bound {
            vars,
            index: self.index.clone(),
        }
    }

    /// Adds the tape gradients of bound entries into the gradient slots.
    pub fn accumulate_grads(&mut self, tape: &Tape, bound: &Bound) {
        for (p, &v) in self.entries.iter_mut().zip(&bound.vars) {
            if tape.requires_grad(v) {
                p.grad.add_assign(&tape.grad(v));
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Bias-corrected Adam update; gradient slots are zeroed afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        for p in &mut self.entries {
            p.steps += 1;
            let t = p.steps as i32;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            let w = p.value.data_mut();
            let g = p.grad.data_mut();
            let m = p.first_moment.data_mut();
            let v = p.second_moment.data_mut();
            for k in 0..w.len() {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                w[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                g[k] = 0.0;
            }
        }
    }

    /// All values flattened in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    /// Inverse of [`ParameterSet::flatten`]; consumes values from the front of `flat`.
    pub fn load_flat(&mut self, flat: &mut impl Iterator<Item = f64>) -> Result<()> {
        for p in &mut self.entries {
            for w in p.value.data_mut() {
                *w = flat
                    .next()
                    .ok_or_else(|| Error::Data("parameter blob too short".into()))?;
            }
        }
        Ok(())
    }
}
