//! Critic training, the mask policy, and PPO alignment.

mod dataset;
mod optim;
mod policy;
mod ppo;
mod reward;
mod scrl;
mod supervised;

pub use dataset::{attach_embeddings, build_samples, mean_mse, split_date, DaySample};
pub use optim::Adam;
pub use policy::{init_actor, policy_distribution, sigmoid, softplus, Actor, MaskPolicy, PolicyMode};
pub use ppo::{
    clipped_surrogate, mean_probabilities, ppo_align, BaselineKind, PpoOutcome, RolloutSummary, ScrlConfig, StepLog,
    SurrogateValue, Trajectory, TrajectoryStep,
};
pub use reward::{kl_term, step_reward, RewardKind};
pub use scrl::{scrl_loop, validation_rank_ic, EmbeddingSource, FileEmbeddings, RoundReport, ScrlOutcome, StaticEmbeddings};
pub use supervised::{train_critic, SupervisedConfig, TrainReport};
