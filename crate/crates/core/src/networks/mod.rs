//! Generator and discriminator construction from the `c7s1-k, dk, Rk, uk, Ck`
//! layer notation, weight initialization, and the forward pass.

mod layer;
mod model;
mod spec;

pub use layer::{parse_layer_spec, LayerKind, LayerSpec, Norm, Padding, LEAKY_SLOPE};
pub use model::{forward, init_weights, ModelState, Network, INIT_STD};
pub use spec::{
    build_discriminator, build_discriminator_with, build_generator, build_generator_with,
    default_residual_blocks, receptive_field, GeneratorOptions, NetworkSpec, ParamKind,
    ParamShape, Role,
};
