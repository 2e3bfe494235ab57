//! Fully connected and convolutional variational autoencoders with a
//! hand-written training loop.

mod checkpoint;
mod layers;
mod model;
mod spec;
mod train;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_as, load_checkpoint_file, save_checkpoint, save_checkpoint_file,
    CHECKPOINT_VERSION,
};
pub use layers::{col2im, im2col, Param, ParamStore, BN_EPSILON, BN_MOMENTUM};
pub use model::{
    build_model, kl_divergence, mse, normal_matrix, sample_latent, tile_cross_entropy, BatchInput, BatchLoss,
    ReconLoss, VaeModel, LOGVAR_CLAMP,
};
pub use spec::{ConvShape, LayerPlan, LayerShape, NetworkSpec, OutputKind, Variant};
pub use train::{
    kl_weight, loss, train, train_with_hook, EpochRecord, LossParts, TrainConfig, TrainHistory, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPSILON,
};
