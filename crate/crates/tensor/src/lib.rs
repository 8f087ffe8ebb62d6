//! Minimal numerical substrate for the motion models: dense matrices, a
//! reverse-mode autodiff tape, parameter stores, Adam and checkpoints.

pub mod checkpoint;
mod graph;
mod matrix;
mod optim;
mod params;

pub use graph::{Gradients, Graph, ParamGrads, Var};
pub use matrix::Matrix;
pub use optim::{Adam, AdamConfig};
pub use params::{normal, xavier, ParamId, ParamStore};
