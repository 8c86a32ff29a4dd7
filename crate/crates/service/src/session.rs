//! The single refinement session a service process hosts, and the read
//! views it serves.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use topicbench::agent::{
    advance, submit, Action, ActionParams, Agents, Evidence, Judgment, ProposalQueue, QueuedProposal,
    SharedQueue, StepCursor, StepReport, StepStatus, StoppingRule, SystemState, Workspace,
};
use topicbench::assessment::{build_packets, PacketDoc, PacketKey, RawRating, Rating, TopicPacket};
use topicbench::audit::{indicators, AuditIndicators, AuditRecord};
use topicbench::config::{Mode, RunConfig};
use topicbench::descriptor::topic_correlation_matrix;
use topicbench::harness::{export_state, MetricsExport};
use topicbench::induction::project_2d;
use topicbench::metrics::MetricSummary;

use crate::ApiError;

const AUDIT_TAIL: usize = 10;
const EXCERPT_CHARS: usize = 280;

#[derive(Debug, Clone, Serialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub label: String,
    pub size: usize,
    pub keywords: Vec<String>,
}

/// Read-only view of one state version.
#[derive(Debug, Clone, Serialize)]
pub struct SessionSnapshot {
    pub mode: Mode,
    pub iteration: usize,
    pub state_hash: String,
    pub run_config_hash: String,
    pub k: usize,
    pub score: f64,
    pub score_history: Vec<f64>,
    pub stability: Option<f64>,
    pub expert_alignment: f64,
    pub metrics: MetricSummary,
    pub topics: Vec<TopicSummary>,
    pub pending: Vec<QueuedProposal>,
    /// An iteration is open, paused on an unjudged proposal or between
    /// roles.
    pub step_in_progress: bool,
    pub audit_tail: Vec<AuditRecord>,
    pub indicators: AuditIndicators,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeywordBar {
    pub term: String,
    pub salience: f64,
    pub topic_tf: u64,
    pub corpus_tf: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Representative {
    pub id: String,
    pub distance: f64,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopicCard {
    pub topic: usize,
    pub label: String,
    pub size: usize,
    pub keywords: Vec<KeywordBar>,
    pub representatives: Vec<Representative>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopicMetrics {
    pub npmi: Option<f64>,
    pub umass: f64,
    pub cv: f64,
    pub excl: f64,
}

/// Everything a reviewer needs to judge one topic.
#[derive(Debug, Clone, Serialize)]
pub struct TopicReview {
    #[serde(flatten)]
    pub card: TopicCard,
    pub metrics: TopicMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectedDoc {
    pub id: String,
    pub topic: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectedTopic {
    pub topic: usize,
    pub label: String,
    pub size: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionView {
    pub documents: Vec<ProjectedDoc>,
    pub topics: Vec<ProjectedTopic>,
    pub explained_variance: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationView {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProposalView {
    #[serde(flatten)]
    pub proposal: QueuedProposal,
    pub q_expert: Option<f64>,
    pub q: Option<f64>,
    /// Topics the action touches, as of the current state.
    pub topics: Vec<TopicSummary>,
    pub documents: Vec<PacketDoc>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ManualAction {
    #[serde(flatten)]
    pub action: Action,
    pub q_expert: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepResponse {
    #[serde(flatten)]
    pub status: StepStatus,
    pub iteration: usize,
    pub score: f64,
    pub pending: Vec<QueuedProposal>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub struct RunRequest {
    pub epsilon: Option<f64>,
    pub t_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStop {
    Converged,
    IterationLimit,
    /// Paused on a proposal that needs a judgment.
    Waiting,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResponse {
    pub steps: usize,
    pub stopped: RunStop,
    pub iteration: usize,
    pub score: f64,
    pub report: StepReport,
    pub pending: Vec<QueuedProposal>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatingsResponse {
    pub stored: usize,
    pub total: usize,
}

/// One run: the evolving state, its proposal queue, and the rating store.
pub struct Session {
    state: SystemState,
    initial: SystemState,
    mode: Mode,
    agents: Agents,
    queue: SharedQueue,
    cursor: StepCursor,
    packets: Option<(Vec<TopicPacket>, PacketKey)>,
    ratings: Vec<Rating>,
    out: Option<PathBuf>,
}

impl Session {
    pub fn new(initial: SystemState, mode: Mode, out: Option<PathBuf>) -> Result<Self, ApiError> {
        let queue = ProposalQueue::shared();
        let agents = Agents::with_queue(&initial, mode.roles(), &queue).map_err(ApiError::from_agent)?;
        let session = Self {
            state: initial.clone(),
            initial,
            mode,
            agents,
            queue,
            cursor: StepCursor::default(),
            packets: None,
            ratings: Vec::new(),
            out,
        };
        session.export()?;
        Ok(session)
    }

    /// Loads inputs and clusters them.
    pub fn load(config: RunConfig, mode: Mode, out: Option<PathBuf>) -> Result<Self, ApiError> {
        let ws = Workspace::load(config).map_err(ApiError::from_core)?;
        let initial = SystemState::initial(Arc::new(ws)).map_err(ApiError::from_agent)?;
        Self::new(initial, mode, out)
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn queue(&self) -> &SharedQueue {
        &self.queue
    }

    fn pending(&self) -> Vec<QueuedProposal> {
        ProposalQueue::lock(&self.queue).pending().cloned().collect()
    }

    fn topic_summary(&self, topic: usize) -> TopicSummary {
        let d = &self.state.topics.descriptors[topic];
        TopicSummary {
            topic,
            label: d.label.clone(),
            size: self.state.topics.partition.cluster_sizes()[topic],
            keywords: d.keyword_terms().map(str::to_owned).collect(),
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let s = &self.state;
        let records = s.log.records();
        SessionSnapshot {
            mode: self.mode,
            iteration: s.iteration,
            state_hash: s.state_hash(),
            run_config_hash: s.workspace.config_hash.clone(),
            k: s.k(),
            score: s.score(),
            score_history: s.score_history.clone(),
            stability: s.stability,
            expert_alignment: s.expert_alignment(),
            metrics: s.metrics.summary(s.score()),
            topics: (0..s.k()).map(|t| self.topic_summary(t)).collect(),
            pending: self.pending(),
            step_in_progress: !self.cursor.is_fresh(),
            audit_tail: records[records.len().saturating_sub(AUDIT_TAIL)..].to_vec(),
            indicators: indicators(&s.log),
        }
    }

    pub fn topic_cards(&self) -> Vec<TopicCard> {
        let s = &self.state;
        let ws = &s.workspace;
        let vocab = ws.corpus.vocabulary();
        let counts = s.topics.term_counts(ws);
        (0..s.k())
            .map(|t| {
                let d = &s.topics.descriptors[t];
                TopicCard {
                    topic: t,
                    label: d.label.clone(),
                    size: s.topics.partition.cluster_sizes()[t],
                    keywords: d
                        .keywords
                        .iter()
                        .map(|(term, salience)| {
                            let (topic_tf, corpus_tf) = vocab
                                .id(term)
                                .map_or((0, 0), |w| (counts.tf(w, t), vocab.corpus_freq(w)));
                            KeywordBar {
                                term: term.clone(),
                                salience: *salience,
                                topic_tf,
                                corpus_tf,
                            }
                        })
                        .collect(),
                    representatives: d
                        .representatives
                        .iter()
                        .map(|(id, distance)| Representative {
                            id: id.clone(),
                            distance: *distance,
                            text: self.text(id),
                        })
                        .collect(),
                }
            })
            .collect()
    }

    pub fn topic_review(&self, topic: usize) -> Result<TopicReview, ApiError> {
        let k = self.state.k();
        if topic >= k {
            return Err(ApiError::NotFound(format!("topic {topic} out of range (k = {k})")));
        }
        let per = &self.state.metrics.per_topic;
        let card = self.topic_cards().swap_remove(topic);
        Ok(TopicReview {
            card,
            metrics: TopicMetrics {
                npmi: per.npmi[topic],
                umass: per.umass[topic],
                cv: per.cv[topic],
                excl: per.excl[topic],
            },
        })
    }

    pub fn projection(&self) -> Result<ProjectionView, ApiError> {
        let s = &self.state;
        let data = s.data();
        let p = project_2d(&data.matrix, &s.topics.centroids)
            .map_err(|e| ApiError::Internal(format!("projection: {e}")))?;
        let assignments = s.topics.partition.assignments();
        let sizes = s.topics.partition.cluster_sizes();
        Ok(ProjectionView {
            documents: data
                .ids
                .iter()
                .zip(&p.documents)
                .zip(assignments)
                .map(|((id, [x, y]), &topic)| ProjectedDoc {
                    id: id.clone(),
                    topic,
                    x: *x,
                    y: *y,
                })
                .collect(),
            topics: p
                .centroids
                .iter()
                .enumerate()
                .map(|(t, [x, y])| ProjectedTopic {
                    topic: t,
                    label: s.topics.descriptors[t].label.clone(),
                    size: sizes[t],
                    x: *x,
                    y: *y,
                })
                .collect(),
            explained_variance: p.explained_variance,
        })
    }

    pub fn correlations(&self) -> CorrelationView {
        let s = &self.state;
        let m = topic_correlation_matrix(&s.topics.term_counts(&s.workspace));
        CorrelationView {
            labels: s.topics.descriptors.iter().map(|d| d.label.clone()).collect(),
            matrix: (0..m.rows()).map(|i| m.row(i).to_vec()).collect(),
        }
    }

    fn text(&self, id: &str) -> String {
        self.state
            .workspace
            .corpus
            .document(id)
            .map(|d| d.display_text())
            .unwrap_or_default()
    }

    fn excerpt(&self, id: &str) -> PacketDoc {
        let text = self.text(id);
        let text = match text.char_indices().nth(EXCERPT_CHARS) {
            Some((cut, _)) => format!("{}...", &text[..cut]),
            None => text,
        };
        PacketDoc { id: id.to_owned(), text }
    }

    fn proposal_view(&self, p: &QueuedProposal) -> ProposalView {
        let k = self.state.k();
        let mut topics: Vec<usize> = match &p.action.params {
            ActionParams::Merge { a, b } => vec![*a, *b],
            ActionParams::Split { topic } | ActionParams::Relabel { topic, .. } => vec![*topic],
            ActionParams::Filter { .. } | ActionParams::Retrain { .. } => Vec::new(),
        };
        let mut docs: Vec<&str> = Vec::new();
        if let ActionParams::Filter { doc_ids, .. } = &p.action.params {
            docs.extend(doc_ids.iter().map(String::as_str));
        }
        let action = p.judged_action();
        for e in &action.evidence {
            match e {
                Evidence::Doc(id) if !docs.contains(&id.as_str()) => docs.push(id),
                Evidence::Topic(t) => topics.push(*t),
                _ => {}
            }
        }
        let topics: BTreeSet<usize> = topics.into_iter().filter(|&t| t < k).collect();
        ProposalView {
            q_expert: p.q_expert(),
            q: p.q(),
            topics: topics.into_iter().map(|t| self.topic_summary(t)).collect(),
            documents: docs.into_iter().map(|id| self.excerpt(id)).collect(),
            proposal: p.clone(),
        }
    }

    pub fn proposals(&self) -> Vec<ProposalView> {
        let queue = ProposalQueue::lock(&self.queue);
        queue.proposals().iter().map(|p| self.proposal_view(p)).collect()
    }

    /// Records a judgment; the step picks it up when it next reaches the
    /// proposal.
    pub fn judge(&self, id: u64, judgment: Judgment) -> Result<ProposalView, ApiError> {
        let mut queue = ProposalQueue::lock(&self.queue);
        let p = queue.judge(id, judgment)?.clone();
        drop(queue);
        Ok(self.proposal_view(&p))
    }

    /// Gates and logs a manual action outside the role order.
    pub fn act(&mut self, manual: ManualAction) -> Result<AuditRecord, ApiError> {
        if !(0.0..=1.0).contains(&manual.q_expert) {
            return Err(ApiError::Unprocessable(format!("q_expert {} outside [0, 1]", manual.q_expert)));
        }
        let record = submit(&mut self.state, manual.action, manual.q_expert, None)
            .map_err(ApiError::from_agent)?
            .clone();
        self.supersede_stale();
        self.export()?;
        Ok(record)
    }

    fn supersede_stale(&self) {
        let hash = self.state.state_hash();
        let mut queue = ProposalQueue::lock(&self.queue);
        queue.supersede_except(&hash);
    }

    fn advance(&mut self) -> Result<StepStatus, ApiError> {
        advance(&mut self.state, &mut self.agents, &mut self.cursor).map_err(ApiError::from_agent)
    }

    pub fn step(&mut self) -> Result<StepResponse, ApiError> {
        let status = self.advance()?;
        self.export()?;
        Ok(StepResponse {
            status,
            iteration: self.state.iteration,
            score: self.state.score(),
            pending: self.pending(),
        })
    }

    /// Steps until the score settles, the iteration limit is reached, or a
    /// proposal needs a judgment. Defaults come from the run config.
    pub fn run(&mut self, req: RunRequest) -> Result<RunResponse, ApiError> {
        let cfg = &self.state.config().agent;
        let rule = StoppingRule::new(req.epsilon.unwrap_or(cfg.epsilon), req.t_max.unwrap_or(cfg.t_max))
            .map_err(ApiError::from_agent)?;
        let start = self.state.iteration;
        let mut report = StepReport::default();
        let stopped = loop {
            if self.state.iteration >= rule.t_max {
                break RunStop::IterationLimit;
            }
            match self.advance()? {
                StepStatus::Waiting { report: partial, .. } => {
                    report.proposals += partial.proposals;
                    report.accepted += partial.accepted;
                    break RunStop::Waiting;
                }
                StepStatus::Completed { report: r } => {
                    report.proposals += r.proposals;
                    report.accepted += r.accepted;
                    let h = &self.state.score_history;
                    if (h[h.len() - 1] - h[h.len() - 2]).abs() < rule.epsilon {
                        break RunStop::Converged;
                    }
                }
            }
        };
        self.export()?;
        Ok(RunResponse {
            steps: self.state.iteration - start,
            stopped,
            iteration: self.state.iteration,
            score: self.state.score(),
            report,
            pending: self.pending(),
        })
    }

    pub fn audit(&self, from: u64) -> Vec<AuditRecord> {
        self.state.log.since(from).to_vec()
    }

    pub fn metrics(&self) -> MetricsExport {
        let s = &self.state;
        MetricsExport {
            summary: s.metrics.summary(s.score()),
            report: s.metrics.clone(),
            score_history: s.score_history.clone(),
            indicators: indicators(&s.log),
        }
    }

    /// Blinded packets comparing the initial state with the current one.
    /// Built on first request and fixed afterwards so ratings keep their
    /// referents.
    pub fn packets(&mut self) -> Result<Vec<TopicPacket>, ApiError> {
        if self.packets.is_none() {
            let current = if self.mode == Mode::Oneshot { "current" } else { self.mode.as_str() };
            let cfg = self.state.config();
            let sample_k = cfg.assessment.sample_k.min(self.initial.k()).min(self.state.k());
            let built = build_packets(
                &[(Mode::Oneshot.as_str(), &self.initial), (current, &self.state)],
                sample_k,
                cfg.seeds.packets,
            )
            .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
            if let Some(out) = &self.out {
                built.1.save(&out.join("packet_key.json")).map_err(|e| ApiError::Internal(e.to_string()))?;
                write_json(&out.join("packets.json"), &built.0)?;
            }
            self.packets = Some(built);
        }
        Ok(self.packets.as_ref().map(|(p, _)| p.clone()).unwrap_or_default())
    }

    pub fn packet_key(&self) -> Option<&PacketKey> {
        self.packets.as_ref().map(|(_, k)| k)
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    /// Validates and stores ratings. A rater rating the same packet again
    /// replaces the earlier rating. The batch is all-or-nothing.
    pub fn rate(&mut self, raw: Vec<RawRating>) -> Result<RatingsResponse, ApiError> {
        let key = self
            .packet_key()
            .ok_or_else(|| ApiError::Conflict("no packets have been published; GET /packets first".into()))?;
        let mut valid = Vec::with_capacity(raw.len());
        for (i, r) in raw.into_iter().enumerate() {
            let rating = r.validate(i + 1).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
            if key.entry(&rating.packet).is_none() {
                return Err(ApiError::Unprocessable(format!("rating {}: unknown packet {}", i + 1, rating.packet)));
            }
            valid.push(rating);
        }
        let stored = valid.len();
        for rating in valid {
            match self
                .ratings
                .iter_mut()
                .find(|r| r.packet == rating.packet && r.rater == rating.rater)
            {
                Some(r) => *r = rating,
                None => self.ratings.push(rating),
            }
        }
        if let Some(out) = &self.out {
            write_ratings(&out.join("ratings.jsonl"), &self.ratings)?;
        }
        Ok(RatingsResponse {
            stored,
            total: self.ratings.len(),
        })
    }

    fn export(&self) -> Result<(), ApiError> {
        match &self.out {
            Some(out) => export_state(&self.state, Some(self.mode), out).map_err(ApiError::from_core),
            None => Ok(()),
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), ApiError> {
    let body = serde_json::to_string_pretty(value).map_err(|e| ApiError::Internal(e.to_string()))?;
    fs::write(path, body).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))
}

fn write_ratings(path: &Path, ratings: &[Rating]) -> Result<(), ApiError> {
    let io = |e: std::io::Error| ApiError::Internal(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(path).map_err(io)?;
    for r in ratings {
        let line = serde_json::to_string(r).map_err(|e| ApiError::Internal(e.to_string()))?;
        writeln!(f, "{line}").map_err(io)?;
    }
    Ok(())
}

impl From<topicbench::agent::JudgmentError> for ApiError {
    fn from(e: topicbench::agent::JudgmentError) -> Self {
        use topicbench::agent::JudgmentError as J;
        match e {
            J::UnknownProposal(_) => ApiError::NotFound(e.to_string()),
            J::Resolved { .. } => ApiError::Conflict(e.to_string()),
            J::InvalidConfidence(_) | J::EmptyRater => ApiError::Unprocessable(e.to_string()),
        }
    }
}
