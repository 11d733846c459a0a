//! Learning agents for SFC provisioning.
//!
//! * [`dqn`]: a three-branch attention DQN that picks the VNF action on a
//!   given DC, trained with experience replay and a target network.
//! * [`vae`], [`value`], [`dataset`]: the generative DC selector. A VAE
//!   learns to predict a DC's next state from its current one; a value
//!   network scores the VAE's mean embedding and the best-scoring DC is used.

pub mod dataset;
pub mod dqn;
pub mod genai;
pub mod replay;
pub mod train;
pub mod vae;
pub mod value;

pub use dataset::{collect_dataset, shuffle_pairs, Dataset, TransitionRow};
pub use dqn::{action_space, select_action, select_masked_action, DqnAgent, DqnConfig, DqnNetwork, Transition};
pub use genai::{argmax_lowest, dc_scores, select_dc, GenAiSelector};
pub use replay::ReplayBuffer;
pub use train::{train_batch, train_dqn, CurvePoint, TrainedDqn};
pub use vae::{train_vae, vae_loss, Vae, VaeConfig, VaeCurve, VaeEpoch, VaeLoss};
pub use value::{compute_value_label, train_value, ValueLabelWeights, ValueNetwork};

use sfc_nn::{CheckpointError, NnError};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset has {rows} rows, wanted at least {target}")]
    DatasetTooSmall { rows: usize, target: usize },
    #[error("dataset file is malformed: {0}")]
    BadDataset(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
}
