//! Small dense networks, Gaussian heads, optimizers and checkpoints.

mod adam;
mod gaussian;
pub mod gradcheck;
mod mlp;
pub mod tensor_io;

pub use adam::Adam;
pub use gaussian::{entropy, kl, log_prob, GaussianHead};
pub use mlp::{Activation, Dense, Mlp, Trace};
pub(crate) use mlp::{axpy, dot};
pub use tensor_io::{Tensor, TensorList};
