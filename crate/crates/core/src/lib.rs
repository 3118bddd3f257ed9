pub mod aggregate;
pub mod data;
pub mod error;
pub mod gradients;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod pacbayes;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod train;

pub use aggregate::{AggregateForward, Evaluator, ForwardMode};
pub use error::{Error, Result};
pub use network::{NetworkArchitecture, NetworkParams};
pub use pacbayes::{BoundInputs, BoundReport};
pub use rng::RngStream;

/// Double-precision network parameters.
pub type Params = NetworkParams<f64>;
pub type Gradients = gradients::LayerGradients<f64>;
pub type Forward = AggregateForward<f64>;
