//! Dense reverse-mode automatic differentiation over `f64` matrices.

mod check;
mod graph;
mod optim;
mod store;
mod tensor;

pub use check::grad_check;
pub use graph::{softmax_rows, Bound, Graph, Var};
pub use optim::{sgd_step, Adam, AdamConfig};
pub use store::ParamStore;
pub use tensor::Tensor;
