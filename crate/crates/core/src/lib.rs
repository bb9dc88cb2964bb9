pub mod analysis;
pub mod approx;
pub mod data;
pub mod error;
pub mod layers;
pub mod net;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{randn_seeded, reduce_l2_norm, ConvGeometry, RngState, Tensor};
