//! Honesty-checked single-qubit private query and its attacks.

pub mod attacks;
pub mod protocol;

use crate::postprocess::PostprocessError;
use crate::quantum::QuantumError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum YuError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("database has no committed bit at position {0}")]
    Uncommitted(usize),
    #[error("no round recorded at position {0}")]
    UnknownPosition(usize),
    #[error("gave up after {0} restarts")]
    RestartsExhausted(usize),
    #[error("position {0} was already measured for a check reply")]
    ReplyTwice(usize),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
}

pub use attacks::{
    cheating_select_checks, conclusiveness_pair, distribution_distance, entangle,
    honest_joint_distribution, run_two_step_attack, two_step_announce, two_step_check_reply,
    two_step_guess_conclusive, two_step_joint_distribution, two_step_joint_distribution_b_first,
    two_step_unitary, CheatSelection, ConclusivenessGuess, JointDistribution, TwoStepAttacker,
    TwoStepDatabase, TwoStepRoundState, TwoStepRun,
};
pub use protocol::{
    alice_infer, run_session, run_stage1, run_stage2, CheckPolicy, HonestDatabase,
    ProtocolTranscript, RawKeyRecord, Verdict, YuDatabase, YuParams, YuSessionOutcome,
};
