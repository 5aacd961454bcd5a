//! Minimal deterministic neural-network engine.

pub mod codec;
pub mod gradcheck;
pub mod loss;
mod matrix;
pub mod mlp;
mod params;
pub mod rnn;
pub mod sgd;

pub use codec::{decode_mlp, decode_model, decode_rnn, encode_mlp, encode_rnn, AnyModel};
pub use gradcheck::{gradient_check, gradient_check_subset};
pub use loss::{cross_entropy_loss, kl_divergence_loss, softmax, softmax_rows, PROB_CLAMP};
pub use matrix::Matrix;
pub use mlp::{mlp_forward, Activation, Architecture, MlpModel};
pub use params::Parameters;
pub use rnn::{rnn_attention_forward, RnnAttentionModel, RnnOutput};
pub use sgd::{
    sgd_train, sgd_train_with_hook, ClassificationObjective, DistillationObjective, Objective,
    SequenceObjective, SgdConfig, TrainOutcome,
};
