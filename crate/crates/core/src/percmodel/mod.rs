//! Patch-based perceptual quality model.
//!
//! Frames are downsampled in space and time, 112x112 patches are drawn with
//! probabilities given by head-movement weights, a [`LocalScorer`] turns each
//! patch into a local score and a sensitivity map, the local scores are
//! combined with eye-movement weights and passed through a small rectified
//! head, and everything is trained on a loss that adds a total-variation
//! penalty on the sensitivity maps and an L2 penalty on the parameters.

mod head;
mod loss;
mod preprocess;
mod sampling;
mod scorer;
mod train;

pub use head::{aggregate, head_backward, head_forward, identity_head, HEAD_PARAMS, HEAD_WIDTH};
pub use loss::{loss, sobel, tv_gradient, tv_term, LossWeights};
pub use preprocess::{
    downsample_to_width, preprocess, resize_weight_map, ErrorMap, PreparedFrame, PreprocessConfig,
};
pub use sampling::{
    candidate_positions, em_weight_vector, footprint_sum, sample_patches, sample_sequence, Patch,
    PATCH_SIZE, PATCH_STRIDE,
};
pub use scorer::{LinearFeatures, LinearScorer, LocalScorer, ScorerGrad, SensitivityMap};
pub use train::{
    evaluate_objective, predict, train, ModelParams, TrainConfig, TrainReport, TrainingItem,
};
