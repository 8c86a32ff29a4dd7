use serde::{Deserialize, Serialize};

use super::{
    q_model_from_delta, transition, Action, AgentError, Confidence, HeuristicAgent, InteractiveAgent, PolicyMode,
    ProposalSource, Role, ScriptedAgent, SharedQueue, SystemState, Transition,
};
use crate::audit::AuditRecord;

/// Stop when the score moves less than `epsilon` or `t_max` steps are done.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub epsilon: f64,
    pub t_max: usize,
}

impl StoppingRule {
    pub fn new(epsilon: f64, t_max: usize) -> Result<Self, AgentError> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(AgentError::Stopping(format!("epsilon = {epsilon} must be non-negative")));
        }
        Ok(Self { epsilon, t_max })
    }
}

/// The proposal source of each participating role.
#[derive(Default)]
pub struct Agents {
    sources: Vec<(Role, Box<dyn ProposalSource>)>,
}

impl Agents {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sources for `roles` as configured. Scripted roles share one script
    /// file; interactive roles have no source outside the service.
    pub fn from_config(state: &SystemState, roles: &[Role]) -> Result<Self, AgentError> {
        Self::build(state, roles, None)
    }

    /// Like [`Agents::from_config`], with interactive roles reading judgments
    /// from `queue`.
    pub fn with_queue(state: &SystemState, roles: &[Role], queue: &SharedQueue) -> Result<Self, AgentError> {
        Self::build(state, roles, Some(queue))
    }

    fn build(state: &SystemState, roles: &[Role], queue: Option<&SharedQueue>) -> Result<Self, AgentError> {
        let cfg = &state.config().agent;
        let mut agents = Agents::new();
        for &role in roles {
            let source: Box<dyn ProposalSource> = match cfg.policies.mode(role) {
                PolicyMode::Heuristic => Box::new(HeuristicAgent::from_config(cfg)),
                PolicyMode::Scripted => {
                    let path = cfg
                        .script
                        .as_ref()
                        .ok_or_else(|| AgentError::Script("scripted policy without a script file".into()))?;
                    let all = ScriptedAgent::load(path)?;
                    let mine = all.entries().iter().filter(|e| e.role == role).cloned().collect();
                    Box::new(ScriptedAgent::new(mine)?)
                }
                PolicyMode::Interactive => match queue {
                    Some(q) => Box::new(InteractiveAgent::new(cfg, q.clone())),
                    None => return Err(AgentError::Interactive(role)),
                },
            };
            agents.set(role, source);
        }
        Ok(agents)
    }

    /// Installs `source` for `role`, replacing any previous one.
    pub fn set(&mut self, role: Role, source: Box<dyn ProposalSource>) {
        self.sources.retain(|(r, _)| *r != role);
        self.sources.push((role, source));
    }

    pub fn roles(&self) -> Vec<Role> {
        Role::ORDER.into_iter().filter(|r| self.sources.iter().any(|(s, _)| s == r)).collect()
    }

    fn source(&mut self, role: Role) -> Option<&mut Box<dyn ProposalSource>> {
        self.sources.iter_mut().find(|(r, _)| *r == role).map(|(_, s)| s)
    }
}

/// Confidence of `action` against `state`, with the trial transition when
/// the action is valid. `q_model` comes from the score change of the trial
/// with stability and expert terms held at their current values.
pub fn evaluate_confidence(
    state: &SystemState,
    action: &Action,
    q_expert: f64,
) -> Result<(Confidence, Transition), AgentError> {
    let cfg = &state.config().agent;
    let trial = transition(
        &state.workspace,
        &state.topics,
        &state.metrics,
        action,
        state.log.next_seq(),
    )?;
    let delta = state.score_of(&trial.metrics) - state.score_of(&state.metrics);
    let q_model = q_model_from_delta(delta, cfg.gamma);
    Ok((Confidence::new(q_model, q_expert, cfg.alpha, cfg.eta), trial))
}

/// Gates `action`, applies it when accepted, and logs the outcome. Invalid
/// actions are logged as rejected without a confidence.
pub fn submit(
    state: &mut SystemState,
    action: Action,
    q_expert: f64,
    proposal_id: Option<u64>,
) -> Result<&AuditRecord, AgentError> {
    if !(0.0..=1.0).contains(&q_expert) {
        return Err(AgentError::InvalidAction(format!("q_expert {q_expert} outside [0, 1]")));
    }
    let before = state.snapshot();
    let seq = state.log.next_seq();
    let mut record = AuditRecord {
        seq,
        iteration: state.iteration,
        proposal_id,
        action: action.clone(),
        accepted: false,
        confidence: None,
        metrics_before: before,
        metrics_after: None,
        undo_of: None,
        state_hash_after: None,
        note: None,
    };
    match evaluate_confidence(state, &action, q_expert) {
        Err(AgentError::InvalidAction(msg)) => record.note = Some(msg),
        Err(e) => return Err(e),
        Ok((confidence, trial)) => {
            record.confidence = Some(confidence);
            if confidence.accepted() {
                // The score snapshot keeps this iteration's expert term as it
                // was when the trial ran, so its change equals the trial delta.
                record.metrics_after = Some(trial.metrics.summary(state.score_of(&trial.metrics)));
                record.accepted = true;
                record.undo_of = trial.undo_of;
                state.apply_accepted(trial, action.kind(), q_expert);
                record.state_hash_after = Some(state.state_hash());
            }
        }
    }
    state.log.append(record)?;
    Ok(state.log.records().last().expect("just appended"))
}

/// Per-step summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub proposals: usize,
    pub accepted: usize,
}

/// Position inside a step: the role being polled and the actions it has
/// offered so far. A step paused on an unjudged proposal resumes from here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepCursor {
    role: usize,
    considered: Vec<Action>,
    report: StepReport,
}

impl StepCursor {
    /// True when no role has been polled yet.
    pub fn is_fresh(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    /// The iteration closed.
    Completed { report: StepReport },
    /// `role` offered a proposal that still needs an expert judgment.
    Waiting { role: Role, report: StepReport },
}

/// Polls the roles in order from `cursor`, gating and applying proposals,
/// and closes the iteration once every role is done. Stops early, leaving
/// the iteration open, when a proposal arrives without `q_expert`.
pub fn advance(state: &mut SystemState, agents: &mut Agents, cursor: &mut StepCursor) -> Result<StepStatus, AgentError> {
    let cap = state.config().agent.proposal_cap;
    while cursor.role < Role::ORDER.len() {
        let role = Role::ORDER[cursor.role];
        if let Some(source) = agents.source(role) {
            while cursor.considered.len() < cap {
                let Some(proposal) = source.next(role, state, &cursor.considered) else {
                    break;
                };
                let Some(q_expert) = proposal.q_expert else {
                    return Ok(StepStatus::Waiting {
                        role,
                        report: cursor.report.clone(),
                    });
                };
                cursor.considered.push(proposal.action.clone());
                let record = submit(state, proposal.action.clone(), q_expert, proposal.id)?;
                let (seq, accepted) = (record.seq, record.accepted);
                cursor.report.proposals += 1;
                cursor.report.accepted += usize::from(accepted);
                source.resolved(&proposal, seq, accepted);
            }
        }
        cursor.role += 1;
        cursor.considered.clear();
    }
    state.close_iteration();
    let report = std::mem::take(cursor).report;
    Ok(StepStatus::Completed { report })
}

/// One refinement cycle over the roles in order, then a score update.
/// Sources must not wait for judgments; use [`advance`] for those.
pub fn step(state: &mut SystemState, agents: &mut Agents) -> Result<StepReport, AgentError> {
    match advance(state, agents, &mut StepCursor::default())? {
        StepStatus::Completed { report } => Ok(report),
        StepStatus::Waiting { role, .. } => Err(AgentError::Interactive(role)),
    }
}

/// Steps until the score change falls below `epsilon` or `t_max` steps have
/// completed.
pub fn run_refinement(state: &mut SystemState, agents: &mut Agents, rule: StoppingRule) -> Result<usize, AgentError> {
    let start = state.iteration;
    while state.iteration < rule.t_max {
        step(state, agents)?;
        let h = &state.score_history;
        if (h[h.len() - 1] - h[h.len() - 2]).abs() < rule.epsilon {
            break;
        }
    }
    Ok(state.iteration - start)
}
