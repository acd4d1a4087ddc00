//! Differentiable core: tensors, reverse-mode graph, residual 1-D encoder,
//! heads, losses, optimizers and checkpoints.

pub mod checkpoint;
pub mod conv;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use graph::{Binding, Gradients, Graph, Var};
pub use layers::{Decoder, Encoder, EncoderConfig, LinearHead};
pub use optim::{OptimConfig, OptimKind, Optimizer};
pub use params::{ParamId, ParamStore};
pub use tensor::{Real, Tensor};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

