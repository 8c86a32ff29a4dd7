//! Role-structured refinement: proposals from three roles, a confidence gate,
//! the state transition, and the stopping rule.

mod action;
mod confidence;
mod interactive;
mod policy;
mod refine;
mod state;
mod transition;

pub use action::{Action, ActionKind, ActionParams, Evidence, Role};
pub use confidence::{combine, q_model_from_delta, Confidence};
pub use policy::{
    keyword_overlap, label_exclusivity, propose_actions, within_variance, AgentConfig, AgentPolicy,
    HeuristicAgent, HeuristicThresholds, PolicyMode, Proposal, ProposalSource, RolePolicies, ScriptEntry,
    ScriptedAgent,
};
pub use interactive::{InteractiveAgent, Judgment, JudgmentError, ProposalQueue, ProposalStatus, QueuedProposal, SharedQueue};
pub use refine::{
    advance, evaluate_confidence, run_refinement, step, submit, Agents, StepCursor, StepReport, StepStatus, StoppingRule,
};
pub use state::{SystemState, TopicProvenance, TopicState, Workspace};
pub use transition::{split_seed, transition, Transition};

use thiserror::Error;

use crate::audit::AuditError;
use crate::descriptor::DescriptorError;
use crate::induction::InductionError;
use crate::metrics::MetricError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("script: {0}")]
    Script(String),
    #[error("stopping rule: {0}")]
    Stopping(String),
    #[error("{0} is interactive and needs the review service")]
    Interactive(Role),
    #[error(transparent)]
    Induction(#[from] InductionError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Metrics(#[from] MetricError),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

impl AgentError {
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            AgentError::InvalidAction(_) | AgentError::Script(_) | AgentError::Stopping(_) | AgentError::Interactive(_)
        )
    }
}
