//! Proposals that wait for a human judgment. The heuristic generator decides
//! what to propose; an expert supplies `q_expert` through a shared queue, and
//! the step resumes once the judgment is in.

use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    combine, evaluate_confidence, propose_actions, Action, AgentConfig, Evidence, HeuristicThresholds, Proposal,
    ProposalSource, Role, SystemState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    #[serde(default = "default_rater")]
    pub rater: String,
    pub q_expert: f64,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
}

fn default_rater() -> String {
    "expert".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Accepted,
    Rejected,
    /// The state moved on before the proposal was gated.
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueuedProposal {
    pub id: u64,
    pub role: Role,
    /// The action as generated, before judgments are folded in.
    pub action: Action,
    /// `None` when the action fails validation against the state it was
    /// proposed for.
    pub q_model: Option<f64>,
    pub alpha: f64,
    pub eta: f64,
    pub state_hash: String,
    pub status: ProposalStatus,
    pub judgments: Vec<Judgment>,
    /// Audit seq once gated.
    pub seq: Option<u64>,
}

impl QueuedProposal {
    /// Mean expert confidence over raters.
    pub fn q_expert(&self) -> Option<f64> {
        if self.judgments.is_empty() {
            return None;
        }
        Some(self.judgments.iter().map(|j| j.q_expert).sum::<f64>() / self.judgments.len() as f64)
    }

    /// Combined confidence the gate will see, once judged.
    pub fn q(&self) -> Option<f64> {
        Some(combine(self.alpha, self.q_model?, self.q_expert()?))
    }

    /// The action with judges' rationales appended and their evidence merged.
    pub fn judged_action(&self) -> Action {
        let mut action = self.action.clone();
        for j in &self.judgments {
            let r = j.rationale.trim();
            if !r.is_empty() {
                if !action.rationale.is_empty() {
                    action.rationale.push('\n');
                }
                action.rationale.push_str(&format!("{}: {r}", j.rater));
            }
            for e in &j.evidence {
                if !action.evidence.contains(e) {
                    action.evidence.push(e.clone());
                }
            }
        }
        action
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JudgmentError {
    #[error("no proposal with id {0}")]
    UnknownProposal(u64),
    #[error("proposal {id} is already {status:?}")]
    Resolved { id: u64, status: ProposalStatus },
    #[error("q_expert {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("rater must be non-empty")]
    EmptyRater,
}

#[derive(Debug, Default)]
pub struct ProposalQueue {
    proposals: Vec<QueuedProposal>,
}

pub type SharedQueue = Arc<Mutex<ProposalQueue>>;

impl ProposalQueue {
    pub fn shared() -> SharedQueue {
        Arc::new(Mutex::new(Self::default()))
    }

    /// Locks `queue`, recovering from a panicked holder.
    pub fn lock(queue: &SharedQueue) -> MutexGuard<'_, ProposalQueue> {
        queue.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn proposals(&self) -> &[QueuedProposal] {
        &self.proposals
    }

    pub fn pending(&self) -> impl Iterator<Item = &QueuedProposal> {
        self.proposals.iter().filter(|p| p.status == ProposalStatus::Pending)
    }

    pub fn get(&self, id: u64) -> Option<&QueuedProposal> {
        self.proposals.iter().find(|p| p.id == id)
    }

    /// Records a judgment. A rater judging the same proposal again replaces
    /// their earlier judgment.
    pub fn judge(&mut self, id: u64, judgment: Judgment) -> Result<&QueuedProposal, JudgmentError> {
        if !(0.0..=1.0).contains(&judgment.q_expert) {
            return Err(JudgmentError::InvalidConfidence(judgment.q_expert));
        }
        if judgment.rater.trim().is_empty() {
            return Err(JudgmentError::EmptyRater);
        }
        let p = self
            .proposals
            .iter_mut()
            .find(|p| p.id == id)
            .ok_or(JudgmentError::UnknownProposal(id))?;
        if p.status != ProposalStatus::Pending {
            return Err(JudgmentError::Resolved { id, status: p.status });
        }
        match p.judgments.iter_mut().find(|j| j.rater == judgment.rater) {
            Some(j) => *j = judgment,
            None => p.judgments.push(judgment),
        }
        Ok(p)
    }

    /// Marks pending proposals made for any state other than `hash` as
    /// superseded.
    pub fn supersede_except(&mut self, hash: &str) {
        for p in &mut self.proposals {
            if p.status == ProposalStatus::Pending && p.state_hash != hash {
                p.status = ProposalStatus::Superseded;
            }
        }
    }

    /// The pending entry for `action` at the current state, created if new.
    /// Pending entries made for other states are superseded.
    fn offer(&mut self, role: Role, action: Action, state: &SystemState) -> &QueuedProposal {
        let hash = state.state_hash();
        self.supersede_except(&hash);
        if let Some(i) = self.proposals.iter().position(|p| {
            p.status == ProposalStatus::Pending && p.role == role && p.action.params == action.params
        }) {
            return &self.proposals[i];
        }
        let cfg = &state.config().agent;
        let q_model = evaluate_confidence(state, &action, 0.5).ok().map(|(c, _)| c.q_model);
        self.proposals.push(QueuedProposal {
            id: self.proposals.len() as u64 + 1,
            role,
            action,
            q_model,
            alpha: cfg.alpha,
            eta: cfg.eta,
            state_hash: hash,
            status: ProposalStatus::Pending,
            judgments: Vec::new(),
            seq: None,
        });
        self.proposals.last().expect("just pushed")
    }

    fn resolve(&mut self, id: u64, seq: u64, accepted: bool) {
        if let Some(p) = self.proposals.iter_mut().find(|p| p.id == id) {
            p.status = if accepted {
                ProposalStatus::Accepted
            } else {
                ProposalStatus::Rejected
            };
            p.seq = Some(seq);
        }
    }
}

/// Heuristic proposals gated by expert judgments from a shared queue.
#[derive(Debug, Clone)]
pub struct InteractiveAgent {
    pub thresholds: HeuristicThresholds,
    pub retrain_max_iter: usize,
    queue: SharedQueue,
}

impl InteractiveAgent {
    pub fn new(cfg: &AgentConfig, queue: SharedQueue) -> Self {
        Self {
            thresholds: cfg.thresholds,
            retrain_max_iter: cfg.retrain_max_iter,
            queue,
        }
    }
}

impl ProposalSource for InteractiveAgent {
    fn next(&mut self, role: Role, state: &SystemState, considered: &[Action]) -> Option<Proposal> {
        // Judged actions carry extra rationale and evidence, so compare params.
        let action = propose_actions(role, state, &self.thresholds, self.retrain_max_iter)
            .into_iter()
            .find(|a| !considered.iter().any(|c| c.params == a.params))?;
        let mut queue = ProposalQueue::lock(&self.queue);
        let p = queue.offer(role, action, state);
        Some(Proposal {
            id: Some(p.id),
            action: p.judged_action(),
            q_expert: p.q_expert(),
        })
    }

    fn resolved(&mut self, proposal: &Proposal, seq: u64, accepted: bool) {
        if let Some(id) = proposal.id {
            ProposalQueue::lock(&self.queue).resolve(id, seq, accepted);
        }
    }
}
