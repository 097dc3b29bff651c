//! Dense math, the feed-forward classifier and its optimizer.

pub mod matrix;
pub mod mlp;
pub mod optim;

pub use matrix::Matrix;
pub use mlp::{
    argmax_rows, backward, backward_from, cross_entropy, forward, forward_cached, softmax, Activations, Gradient,
    Layer, ParameterSet,
};
pub use optim::{poly_lr, sgd_step, OptimizerState};
