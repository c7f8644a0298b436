//! Warm-start actor-critic: linear critic, softmax actor, the tabular
//! Bellman-evaluation variant and the two error-injection mechanisms.

pub mod actor;
pub mod critic;
pub mod noise;
pub mod run;
pub mod sampling;

use serde::{Deserialize, Serialize};

pub use actor::{
    actor_update, exact_gradient, objective, softmax_constants, ActorParams, ActorSettings, SoftmaxConstants,
};
pub use critic::{critic_update_exact, critic_update_sampled, CriticModel, CriticTarget, CriticUpdate};
pub use noise::{inject_value_noise, mix_uniform, perturb_policy, CriticNoise, ErrorSpec, NoiseDraw};
pub use run::{run_ac, run_ac_with_oracle, AcConfig, AcTrace, FeatureSpec, IterationRecord, Variant, WarmStart};
pub use sampling::{collect_samples, SampleBatch, Trajectory};

/// Expectation-based or sample-based update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sampled,
}
