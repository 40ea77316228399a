//! Dense matrices, a small reverse-mode gradient engine, Adam and seeded randomness.

mod matrix;
mod params;
mod rng;
mod tape;

pub use matrix::Matrix;
pub use params::{AdamConfig, Bound, Parameter, ParameterSet};
pub use rng::Rng;
pub use tape::{sigmoid, softplus, Tape, UnaryOp, Var};
