//! Native CNN inference for the pilot denoiser.

pub mod conv;
pub mod model;
pub mod tensor;

pub use conv::{Activation, Conv2d};
pub use model::{
    check_model_geometry, load_model, write_weights, Architecture, DenoiserModel, LayerSpec, ResBlock,
    RESIDUAL_BLOCKS, WEIGHT_MAGIC, WEIGHT_VERSION,
};
pub use tensor::{pack_batch, pack_input, unpack_item, unpack_output, Tensor4};
