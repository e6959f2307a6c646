//! Variational trainer: Gaussian encoders with a standard-normal prior,
//! Gaussian or categorical decoders, all small rectifier networks.

mod adam;
mod checkpoint;
mod heads;
mod mlp;
mod model;
mod train;

pub use adam::Adam;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use heads::{
    categorical_log_prob, gaussian_log_density, kl_to_standard_normal, reparam_sample, softmax, CategoricalHead,
    GaussianHead, DECODER_LOG_VAR_RANGE, ENCODER_LOG_VAR_RANGE,
};
pub use mlp::{LayerSlot, MlpSpec, NetLayout, Tape};
pub use model::{
    empirical_cost, empirical_cost_grad, empirical_cost_seeded, view_input_widths, Batch, BatchTargets, CostTerms,
    DvibArch, DvibModel, NoiseBlock, ParamLayout, TargetKind,
};
pub use train::{
    estimate_pair, predict, target_entropy, train, EpochRecord, PairEstimate, PredictMode, Prediction, TrainConfig,
    TrainTrace,
};
