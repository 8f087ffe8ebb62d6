//! End-to-end pipeline behind the `dyadic` command: corpus preparation,
//! model training, sampling, evaluation and the ablation experiments.

pub mod cli;
pub mod commands;
pub mod experiments;
pub mod pipeline;
pub mod runs;
