//! Two-way private query with in-group reordering, and its attacks.

pub mod attacks;
pub mod protocol;

use crate::postprocess::PostprocessError;
use crate::quantum::QuantumError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChangError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("group of size {0} exceeds the enumeration limit")]
    GroupTooLarge(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("announced data has zero likelihood under the sent group")]
    ImpossibleData,
    #[error("gave up after {0} restarts")]
    RestartsExhausted(usize),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
}

pub use attacks::{
    announcement_likelihood, counting_infer, counting_leakage, fake_composition,
    store_fake_extract, store_fake_step2, store_fake_step4_reply, FakeSequencePlan, LeakageStats,
    PositionPosterior, Step4Reply,
};
pub use protocol::{
    alice_measure_group, bob_step3_check, bob_step4_check, build_raw_key, chang_prepare, run_group,
    run_session, step4_all, x_originals, ChangParams, ChangSessionOutcome, GroupExchange,
    GroupTranscript, Step3Outcome, Step4Outcome, UserStrategy,
};
