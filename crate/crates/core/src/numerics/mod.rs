//! Small dense-network toolkit used by the agent: MLP forward/backward,
//! Adam, polyak averaging, running input normalization and a seedable RNG.

mod adam;
mod mlp;
mod normalizer;
mod rng;

pub use adam::{adam_step, AdamState};
pub use mlp::{polyak_update, ForwardCache, Gradients, Mlp, OutputActivation};
pub use normalizer::RunningNormalizer;
pub use rng::{RngState, SeededRng};
