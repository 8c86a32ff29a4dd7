use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ActionKind, AgentError, Transition};
use crate::audit::AuditLog;
use crate::config::RunConfig;
use crate::corpus::{load_corpus, Corpus, LoadReport};
use crate::descriptor::{build_descriptors, TopicDescriptor, TopicTermCounts};
use crate::embedding::{align, load_embeddings, AlignReport, AlignedDataset, EmbeddingSet};
use crate::induction::{kmeans_fit, Centroids, TopicPartition};
use crate::metrics::{adjusted_rand_index, evaluate, quality_score, EvaluationInput, MetricReport, MetricSummary};
use crate::Result;

/// Immutable inputs shared by every state of a run.
#[derive(Debug)]
pub struct Workspace {
    pub corpus: Corpus,
    /// Documents available for clustering.
    pub train: AlignedDataset,
    /// Documents scored by perplexity only.
    pub holdout: AlignedDataset,
    pub config: RunConfig,
    pub config_hash: String,
    pub load_report: Option<LoadReport>,
    pub align_report: AlignReport,
    train_rows: HashMap<String, usize>,
}

impl Workspace {
    /// Reads the corpus and embeddings named by `config`.
    pub fn load(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let (corpus, report) = load_corpus(&config.corpus, &config.preprocess)?;
        let emb = load_embeddings(&config.embeddings.header, &config.embeddings.data, config.normalize_embeddings)?;
        let mut ws = Self::from_parts(corpus, &emb, config)?;
        ws.load_report = Some(report);
        Ok(ws)
    }

    /// Splits off the holdout set and aligns `corpus` with `embeddings`.
    pub fn from_parts(corpus: Corpus, embeddings: &EmbeddingSet, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let corpus = corpus.split_holdout(config.holdout_ratio, config.seeds.split)?;
        let (aligned, align_report) = align(&corpus, embeddings)?;
        let train = aligned.filter(|id| !corpus.is_holdout(id));
        let holdout = aligned.filter(|id| corpus.is_holdout(id));
        if train.len() < config.k {
            return Err(crate::Error::Config(format!(
                "k = {} exceeds the {} training documents",
                config.k,
                train.len()
            )));
        }
        let train_rows = train.ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            corpus,
            train,
            holdout,
            config_hash: config.hash(),
            config,
            load_report: None,
            align_report,
            train_rows,
        })
    }

    pub fn train_row(&self, id: &str) -> Option<usize> {
        self.train_rows.get(id).copied()
    }
}

/// Where a topic's current form came from; drives undo links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicProvenance {
    /// Seq of the merge that produced this topic.
    pub merged_by: Option<u64>,
    /// Label set by a relabel action, with that action's seq.
    pub custom_label: Option<(String, u64)>,
}

/// The part of the state that actions change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicState {
    /// Rows of the workspace training set still in play, ascending.
    pub active: Vec<usize>,
    /// Assignment of each active row, in `active` order.
    pub partition: TopicPartition,
    pub centroids: Centroids,
    pub descriptors: Vec<TopicDescriptor>,
    pub provenance: Vec<TopicProvenance>,
    /// Filtered document id -> seq of the filter that removed it.
    pub filtered: BTreeMap<String, u64>,
}

impl TopicState {
    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn data(&self, ws: &Workspace) -> AlignedDataset {
        ws.train.select(&self.active)
    }

    pub fn term_counts(&self, ws: &Workspace) -> TopicTermCounts {
        let doc_index: Vec<usize> = self.active.iter().map(|&r| ws.train.doc_index[r]).collect();
        TopicTermCounts::build(&self.partition, &doc_index, &ws.corpus)
    }

    /// Rebuilds descriptors, keeping labels set by relabel actions.
    pub fn rebuild_descriptors(&mut self, ws: &Workspace, data: &AlignedDataset) -> Result<(), AgentError> {
        let mut descriptors = build_descriptors(data, &self.partition, &self.centroids, &ws.corpus, &ws.config.descriptor)?;
        for (d, p) in descriptors.iter_mut().zip(&self.provenance) {
            if let Some((label, _)) = &p.custom_label {
                d.label = label.clone();
            }
        }
        self.descriptors = descriptors;
        Ok(())
    }

    pub fn evaluate(&self, ws: &Workspace, data: &AlignedDataset) -> Result<MetricReport, AgentError> {
        let input = EvaluationInput {
            corpus: &ws.corpus,
            data,
            partition: &self.partition,
            centroids: &self.centroids,
            descriptors: &self.descriptors,
            holdout: &ws.holdout,
        };
        Ok(evaluate(&input, &ws.config.metrics)?)
    }

    /// Hex SHA-256 over active set, assignments, centroid bits, descriptors,
    /// provenance, and filter history.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.active.len() as u64).to_le_bytes());
        for &r in &self.active {
            h.update((r as u64).to_le_bytes());
        }
        h.update((self.k() as u64).to_le_bytes());
        for &a in self.partition.assignments() {
            h.update((a as u64).to_le_bytes());
        }
        for v in self.centroids.matrix.as_slice() {
            h.update(v.to_bits().to_le_bytes());
        }
        let rest = serde_json::to_vec(&(&self.descriptors, &self.provenance, &self.filtered)).expect("state serializes");
        h.update(&rest);
        hex::encode(h.finalize())
    }
}

/// Full refinement state: topics, metrics, log, and score history.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub workspace: Arc<Workspace>,
    pub topics: TopicState,
    pub metrics: MetricReport,
    pub log: AuditLog,
    /// Completed refinement steps.
    pub iteration: usize,
    pub score_history: Vec<f64>,
    /// Stability term of the latest score; `None` before the first step.
    pub stability: Option<f64>,
    /// q_expert of actions accepted during the current iteration.
    pub accepted_expert: Vec<f64>,
    /// A merge, split, or filter was accepted since the last retrain.
    pub structural_pending: bool,
    /// Active rows and their topics at the start of the current iteration.
    checkpoint: Vec<(usize, usize)>,
}

impl SystemState {
    /// Clusters the training set and scores the result.
    pub fn initial(workspace: Arc<Workspace>) -> Result<Self, AgentError> {
        let ws = &*workspace;
        let cfg = &ws.config;
        let fit = kmeans_fit(&ws.train.matrix, cfg.k, cfg.max_iter, cfg.seeds.cluster)?;
        let mut topics = TopicState {
            active: (0..ws.train.len()).collect(),
            partition: fit.partition,
            centroids: fit.centroids,
            descriptors: Vec::new(),
            provenance: vec![TopicProvenance::default(); cfg.k],
            filtered: BTreeMap::new(),
        };
        topics.rebuild_descriptors(ws, &ws.train)?;
        let metrics = topics.evaluate(ws, &ws.train)?;
        let score = quality_score(metrics.npmi, None, 0.5, &cfg.weights);
        let log = AuditLog::new(ws.config_hash.clone());
        let checkpoint = snapshot_assignment(&topics);
        Ok(Self {
            workspace,
            topics,
            metrics,
            log,
            iteration: 0,
            score_history: vec![score],
            stability: None,
            accepted_expert: Vec::new(),
            structural_pending: false,
            checkpoint,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.workspace.config
    }

    pub fn k(&self) -> usize {
        self.topics.k()
    }

    pub fn state_hash(&self) -> String {
        self.topics.hash()
    }

    pub fn data(&self) -> AlignedDataset {
        self.topics.data(&self.workspace)
    }

    pub fn score(&self) -> f64 {
        *self.score_history.last().expect("score history is never empty")
    }

    /// Mean q_expert of actions accepted this iteration, or 0.5 when none.
    pub fn expert_alignment(&self) -> f64 {
        if self.accepted_expert.is_empty() {
            0.5
        } else {
            self.accepted_expert.iter().sum::<f64>() / self.accepted_expert.len() as f64
        }
    }

    /// Score of `report` with stability and expert terms held at their
    /// current values.
    pub fn score_of(&self, report: &MetricReport) -> f64 {
        quality_score(report.npmi, self.stability, self.expert_alignment(), &self.config().weights)
    }

    pub fn snapshot(&self) -> MetricSummary {
        self.metrics.summary(self.score_of(&self.metrics))
    }

    /// ARI between the partition at the start of the iteration and now, over
    /// documents active in both, clamped to `[0, 1]`.
    pub fn stability_since_checkpoint(&self) -> f64 {
        let before: HashMap<usize, usize> = self.checkpoint.iter().copied().collect();
        let (a, b): (Vec<usize>, Vec<usize>) = snapshot_assignment(&self.topics)
            .into_iter()
            .filter_map(|(row, t)| before.get(&row).map(|&s| (s, t)))
            .unzip();
        adjusted_rand_index(&a, &b).clamp(0.0, 1.0)
    }

    /// Installs an accepted transition.
    pub(crate) fn apply_accepted(&mut self, trial: Transition, kind: ActionKind, q_expert: f64) {
        self.topics = trial.topics;
        self.metrics = trial.metrics;
        self.accepted_expert.push(q_expert);
        if kind.is_structural() {
            self.structural_pending = true;
        } else if kind == ActionKind::Retrain {
            self.structural_pending = false;
        }
    }

    /// Ends the current iteration: appends the score and moves the checkpoint.
    pub(crate) fn close_iteration(&mut self) {
        let stability = self.stability_since_checkpoint();
        let score = quality_score(
            self.metrics.npmi,
            Some(stability),
            self.expert_alignment(),
            &self.config().weights,
        );
        self.score_history.push(score);
        self.stability = Some(stability);
        self.iteration += 1;
        self.log.close_iteration();
        self.accepted_expert.clear();
        self.checkpoint = snapshot_assignment(&self.topics);
    }

    /// Copy of the initial state of this run: same workspace, fresh log.
    pub fn restart(&self) -> Result<Self, AgentError> {
        Self::initial(Arc::clone(&self.workspace))
    }
}

fn snapshot_assignment(topics: &TopicState) -> Vec<(usize, usize)> {
    topics
        .active
        .iter()
        .copied()
        .zip(topics.partition.assignments().iter().copied())
        .collect()
}
