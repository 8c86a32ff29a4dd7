use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Action, ActionParams, AgentError, Evidence, Role, SystemState};
use crate::matrix::{cosine, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicThresholds {
    /// Pairwise embedding cosine at or above which a later document counts
    /// as a duplicate of an earlier one.
    pub duplicate_cosine: f64,
    /// Documents with fewer vocabulary tokens are proposed for filtering.
    pub min_doc_tokens: usize,
    pub merge_cosine: f64,
    pub merge_overlap: f64,
    /// Split when a topic's within-cluster variance exceeds this multiple of
    /// the mean over topics.
    pub split_variance_ratio: f64,
}

impl Default for HeuristicThresholds {
    fn default() -> Self {
        Self {
            duplicate_cosine: 0.995,
            min_doc_tokens: 3,
            merge_cosine: 0.95,
            merge_overlap: 0.6,
            split_variance_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    Heuristic,
    Scripted,
    Interactive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolePolicies {
    pub data_steward: PolicyMode,
    pub modeling_analyst: PolicyMode,
    pub domain_expert: PolicyMode,
}

impl RolePolicies {
    pub fn uniform(mode: PolicyMode) -> Self {
        Self {
            data_steward: mode,
            modeling_analyst: mode,
            domain_expert: mode,
        }
    }

    pub fn mode(&self, role: Role) -> PolicyMode {
        match role {
            Role::DataSteward => self.data_steward,
            Role::ModelingAnalyst => self.modeling_analyst,
            Role::DomainExpert => self.domain_expert,
        }
    }
}

/// One role's configured behaviour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPolicy {
    pub role: Role,
    pub mode: PolicyMode,
    pub thresholds: HeuristicThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub t_max: usize,
    /// Proposals evaluated per role per iteration.
    pub proposal_cap: usize,
    /// Expert confidence attached to heuristic proposals.
    pub heuristic_q_expert: f64,
    pub retrain_max_iter: usize,
    pub thresholds: HeuristicThresholds,
    pub policies: RolePolicies,
    /// Action file for scripted roles.
    pub script: Option<PathBuf>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            eta: 0.6,
            gamma: 5.0,
            epsilon: 1e-3,
            t_max: 10,
            proposal_cap: 5,
            heuristic_q_expert: 0.5,
            retrain_max_iter: 100,
            thresholds: HeuristicThresholds::default(),
            policies: RolePolicies::default(),
            script: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} must lie in [0, 1]"))
            }
        };
        unit("alpha", self.alpha)?;
        unit("heuristic_q_expert", self.heuristic_q_expert)?;
        if self.eta.is_nan() {
            return Err("eta must be a number".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(format!("gamma = {} must be finite and non-negative", self.gamma));
        }
        if !(self.epsilon >= 0.0) {
            return Err(format!("epsilon = {} must be non-negative", self.epsilon));
        }
        if self.retrain_max_iter < 1 {
            return Err("retrain_max_iter must be at least 1".into());
        }
        let uses_script = Role::ORDER.iter().any(|&r| self.policies.mode(r) == PolicyMode::Scripted);
        if uses_script && self.script.is_none() {
            return Err("scripted policy without a script file".into());
        }
        Ok(())
    }

    pub fn policy(&self, role: Role) -> AgentPolicy {
        AgentPolicy {
            role,
            mode: self.policies.mode(role),
            thresholds: self.thresholds,
        }
    }
}

/// A candidate action together with its expert confidence. `q_expert` is
/// `None` while a human judgment is outstanding.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub id: Option<u64>,
    pub action: Action,
    pub q_expert: Option<f64>,
}

/// Supplies one role's proposals. Sources are asked repeatedly within a turn
/// so each proposal is formed against the state left by the previous one.
pub trait ProposalSource: Send {
    /// Next proposal not among `considered` (actions already evaluated this
    /// turn), or `None` when the role has nothing further to offer.
    fn next(&mut self, role: Role, state: &SystemState, considered: &[Action]) -> Option<Proposal>;

    /// Called after a proposal has been logged under `seq`.
    fn resolved(&mut self, _proposal: &Proposal, _seq: u64, _accepted: bool) {}
}

/// Threshold-driven proposals with a fixed expert confidence.
#[derive(Debug, Clone)]
pub struct HeuristicAgent {
    pub thresholds: HeuristicThresholds,
    pub q_expert: f64,
    pub retrain_max_iter: usize,
}

impl HeuristicAgent {
    pub fn from_config(cfg: &AgentConfig) -> Self {
        Self {
            thresholds: cfg.thresholds,
            q_expert: cfg.heuristic_q_expert,
            retrain_max_iter: cfg.retrain_max_iter,
        }
    }
}

impl ProposalSource for HeuristicAgent {
    fn next(&mut self, role: Role, state: &SystemState, considered: &[Action]) -> Option<Proposal> {
        propose_actions(role, state, &self.thresholds, self.retrain_max_iter)
            .into_iter()
            .find(|a| !considered.contains(a))
            .map(|action| Proposal {
                id: None,
                action,
                q_expert: Some(self.q_expert),
            })
    }
}

/// One line of a scripted policy file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub iteration: usize,
    pub role: Role,
    #[serde(flatten)]
    pub params: ActionParams,
    pub q_expert: f64,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
}

impl ScriptEntry {
    pub fn action(&self) -> Action {
        Action {
            params: self.params.clone(),
            proposer: self.role,
            rationale: self.rationale.clone(),
            evidence: self.evidence.clone(),
        }
    }
}

/// Replays a fixed action list; entries fire at their iteration, in file order.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    entries: Vec<ScriptEntry>,
    used: Vec<bool>,
}

impl ScriptedAgent {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, AgentError> {
        for (i, e) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.q_expert) {
                return Err(AgentError::Script(format!("entry {i}: q_expert {} outside [0, 1]", e.q_expert)));
            }
        }
        let used = vec![false; entries.len()];
        Ok(Self { entries, used })
    }

    /// Reads a JSON array of entries.
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let raw = fs::read_to_string(path).map_err(|e| AgentError::Script(format!("{}: {e}", path.display())))?;
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(&raw).map_err(|e| AgentError::Script(format!("{}: {e}", path.display())))?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }
}

impl ProposalSource for ScriptedAgent {
    fn next(&mut self, role: Role, state: &SystemState, _considered: &[Action]) -> Option<Proposal> {
        let i = (0..self.entries.len())
            .find(|&i| !self.used[i] && self.entries[i].role == role && self.entries[i].iteration == state.iteration)?;
        self.used[i] = true;
        let e = &self.entries[i];
        Some(Proposal {
            id: None,
            action: e.action(),
            q_expert: Some(e.q_expert),
        })
    }
}

/// `|a ∩ b| / min(|a|, |b|)`; 0 when either list is empty.
pub fn keyword_overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let denom = a.len().min(b.len());
    if denom == 0 {
        return 0.0;
    }
    let left: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let right: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    left.intersection(&right).count() as f64 / denom as f64
}

/// Mean squared distance of each topic's members to its centroid.
pub fn within_variance(state: &SystemState) -> Vec<f64> {
    let data = state.data();
    let k = state.k();
    let mut sums = vec![0.0; k];
    for (i, &t) in state.topics.partition.assignments().iter().enumerate() {
        sums[t] += squared_distance(data.matrix.row(i), state.topics.centroids.row(t));
    }
    sums.iter()
        .zip(state.topics.partition.cluster_sizes())
        .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect()
}

/// Mean share of each auto-label term's occurrences that fall in the topic.
pub fn label_exclusivity(state: &SystemState) -> Vec<f64> {
    let counts = state.topics.term_counts(&state.workspace);
    let vocab = state.workspace.corpus.vocabulary();
    state
        .topics
        .descriptors
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let shares: Vec<f64> = d
                .keyword_terms()
                .take(3)
                .filter_map(|t| vocab.id(t))
                .map(|id| term_share(&counts, id, k))
                .collect();
            if shares.is_empty() {
                0.0
            } else {
                shares.iter().sum::<f64>() / shares.len() as f64
            }
        })
        .collect()
}

fn term_share(counts: &crate::descriptor::TopicTermCounts, id: u32, k: usize) -> f64 {
    let total = counts.total_tf(id);
    if total == 0 {
        0.0
    } else {
        counts.tf(id, k) as f64 / total as f64
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn rep_evidence(state: &SystemState, topic: usize, n: usize) -> impl Iterator<Item = Evidence> + '_ {
    state.topics.descriptors[topic]
        .representatives
        .iter()
        .take(n)
        .map(|(id, _)| Evidence::Doc(id.clone()))
}

/// Heuristic proposals of `role` against `state`, strongest first.
pub fn propose_actions(
    role: Role,
    state: &SystemState,
    th: &HeuristicThresholds,
    retrain_max_iter: usize,
) -> Vec<Action> {
    match role {
        Role::DataSteward => steward_proposals(state, th),
        Role::ModelingAnalyst => analyst_proposals(state, th, retrain_max_iter),
        Role::DomainExpert => expert_proposals(state),
    }
}

fn steward_proposals(state: &SystemState, th: &HeuristicThresholds) -> Vec<Action> {
    let ws = &state.workspace;
    let data = state.data();
    let k = state.k();
    let mut out = Vec::new();

    let mut dup = vec![false; data.len()];
    let mut pairs = Vec::new();
    for j in 0..data.len() {
        for i in 0..j {
            if !dup[i] && cosine(data.matrix.row(i), data.matrix.row(j)) >= th.duplicate_cosine {
                dup[j] = true;
                pairs.push((i, j));
                break;
            }
        }
    }
    let dups: Vec<String> = pairs.iter().map(|&(_, j)| data.ids[j].clone()).collect();
    if !dups.is_empty() && data.len() - dups.len() >= k {
        let evidence = pairs
            .iter()
            .take(5)
            .flat_map(|&(i, j)| [Evidence::Doc(data.ids[j].clone()), Evidence::Doc(data.ids[i].clone())]);
        out.push(
            Action::new(
                ActionParams::Filter {
                    doc_ids: dups.clone(),
                    reason: "near_duplicate".into(),
                    readmit: false,
                },
                Role::DataSteward,
                format!(
                    "{} document(s) have embedding cosine >= {} with an earlier document",
                    dups.len(),
                    th.duplicate_cosine
                ),
            )
            .with_evidence(evidence),
        );
    }

    let short: Vec<String> = data
        .ids
        .iter()
        .zip(&data.doc_index)
        .filter(|(id, &pos)| ws.corpus.documents()[pos].tokens.len() < th.min_doc_tokens && !dups.contains(id))
        .map(|(id, _)| id.clone())
        .collect();
    if !short.is_empty() && data.len() - dups.len() - short.len() >= k {
        let evidence: Vec<Evidence> = short.iter().take(10).map(|id| Evidence::Doc(id.clone())).collect();
        out.push(
            Action::new(
                ActionParams::Filter {
                    doc_ids: short.clone(),
                    reason: "too_short".into(),
                    readmit: false,
                },
                Role::DataSteward,
                format!(
                    "{} document(s) have fewer than {} vocabulary tokens",
                    short.len(),
                    th.min_doc_tokens
                ),
            )
            .with_evidence(evidence),
        );
    }
    out
}

fn analyst_proposals(state: &SystemState, th: &HeuristicThresholds, retrain_max_iter: usize) -> Vec<Action> {
    let k = state.k();
    let mut out = Vec::new();

    let mut merges = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let cos = cosine(state.topics.centroids.row(a), state.topics.centroids.row(b));
            let kw_a: Vec<&str> = state.topics.descriptors[a].keyword_terms().collect();
            let kw_b: Vec<&str> = state.topics.descriptors[b].keyword_terms().collect();
            let overlap = keyword_overlap(&kw_a, &kw_b);
            if cos >= th.merge_cosine || overlap >= th.merge_overlap {
                merges.push((cos.max(overlap), a, b, cos, overlap));
            }
        }
    }
    merges.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (_, a, b, cos, overlap) in merges {
        let evidence = [Evidence::Topic(a), Evidence::Topic(b)]
            .into_iter()
            .chain(rep_evidence(state, a, 1))
            .chain(rep_evidence(state, b, 1))
            .chain([Evidence::Metric("centroid_cosine".into()), Evidence::Metric("keyword_overlap".into())]);
        out.push(
            Action::new(
                ActionParams::Merge { a, b },
                Role::ModelingAnalyst,
                format!("topics {a} and {b}: centroid cosine {cos:.3}, keyword overlap {overlap:.2}"),
            )
            .with_evidence(evidence),
        );
    }

    let var = within_variance(state);
    let sizes = state.topics.partition.cluster_sizes();
    let mean_var = var.iter().sum::<f64>() / k as f64;
    let widest = (0..k)
        .filter(|&t| sizes[t] >= 2)
        .max_by(|&x, &y| var[x].total_cmp(&var[y]).then(y.cmp(&x)));
    if let Some(t) = widest {
        if mean_var > 0.0 && var[t] > th.split_variance_ratio * mean_var {
            let evidence = [Evidence::Topic(t)]
                .into_iter()
                .chain(rep_evidence(state, t, 2))
                .chain([Evidence::Metric("within_variance".into())]);
            out.push(
                Action::new(
                    ActionParams::Split { topic: t },
                    Role::ModelingAnalyst,
                    format!(
                        "topic {t} within-cluster variance {:.4} exceeds {} x mean {:.4}",
                        var[t], th.split_variance_ratio, mean_var
                    ),
                )
                .with_evidence(evidence),
            );
        }
    }

    if state.structural_pending {
        out.push(
            Action::new(
                ActionParams::Retrain {
                    max_iter: retrain_max_iter,
                },
                Role::ModelingAnalyst,
                "structural change since the last retrain; re-run assignment to a fixed point",
            )
            .with_evidence([Evidence::Metric("inertia".into())]),
        );
    }
    out
}

fn expert_proposals(state: &SystemState) -> Vec<Action> {
    let k = state.k();
    if k < 2 {
        return Vec::new();
    }
    let excl = label_exclusivity(state);
    let cut = median(&excl);
    let counts = state.topics.term_counts(&state.workspace);
    let vocab = state.workspace.corpus.vocabulary();
    let mut out = Vec::new();
    for t in 0..k {
        if excl[t] >= cut {
            continue;
        }
        let d = &state.topics.descriptors[t];
        let mut ranked: Vec<(usize, &str, f64)> = d
            .keyword_terms()
            .enumerate()
            .filter_map(|(i, w)| vocab.id(w).map(|id| (i, w, term_share(&counts, id, t))))
            .collect();
        ranked.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)));
        let label = ranked.iter().take(3).map(|r| r.1).collect::<Vec<_>>().join("/");
        if label.is_empty() || label == d.label {
            continue;
        }
        let evidence = [Evidence::Topic(t)]
            .into_iter()
            .chain(rep_evidence(state, t, 2))
            .chain([Evidence::Metric("exclusivity".into())]);
        out.push(
            Action::new(
                ActionParams::Relabel { topic: t, label },
                Role::DomainExpert,
                format!(
                    "label terms of topic {t} have exclusivity {:.3}, below the median {cut:.3}",
                    excl[t]
                ),
            )
            .with_evidence(evidence),
        );
    }
    out
}
