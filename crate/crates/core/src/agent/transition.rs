use std::collections::BTreeSet;

use super::{Action, ActionParams, AgentError, TopicProvenance, TopicState, Workspace};
use crate::induction::{kmeans_fit, means_from_assignments, reassign, retrain, Centroids, TopicPartition};
use crate::metrics::MetricReport;

/// Outcome of applying one action to a private copy of the topic state.
#[derive(Debug, Clone)]
pub struct Transition {
    pub topics: TopicState,
    pub metrics: MetricReport,
    /// Seq of the earlier accepted action this one reverses.
    pub undo_of: Option<u64>,
}

fn invalid(msg: impl Into<String>) -> AgentError {
    AgentError::InvalidAction(msg.into())
}

/// Seed for the 2-means inside a split, fixed by the run seed and the seq the
/// split is recorded under.
pub fn split_seed(agent_seed: u64, seq: u64) -> u64 {
    agent_seed ^ seq.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Applies `action` as record `seq`. `current` is the metric report of
/// `topics`, reused when the partition is untouched.
pub fn transition(
    ws: &Workspace,
    topics: &TopicState,
    current: &MetricReport,
    action: &Action,
    seq: u64,
) -> Result<Transition, AgentError> {
    let mut next = topics.clone();
    let k = topics.k();
    let mut undo_of = None;
    match &action.params {
        ActionParams::Merge { a, b } => {
            let (a, b) = (*a, *b);
            if a >= k || b >= k {
                return Err(invalid(format!("merge({a}, {b}) with k = {k}")));
            }
            if a == b {
                return Err(invalid(format!("merge of topic {a} with itself")));
            }
            let (lo, hi) = (a.min(b), a.max(b));
            let assignments: Vec<usize> = topics
                .partition
                .assignments()
                .iter()
                .map(|&t| match t {
                    t if t == hi => lo,
                    t if t > hi => t - 1,
                    t => t,
                })
                .collect();
            let data = topics.data(ws);
            let means = means_from_assignments(&data.matrix, &assignments, k - 1);
            let mut centroids = topics.centroids.matrix.clone();
            centroids.remove_row(hi);
            centroids.row_mut(lo).copy_from_slice(means.row(lo));
            next.partition = TopicPartition::new(assignments, k - 1);
            next.centroids = Centroids::new(centroids);
            next.provenance.remove(hi);
            next.provenance[lo] = TopicProvenance {
                merged_by: Some(seq),
                custom_label: None,
            };
        }
        ActionParams::Split { topic } => {
            let topic = *topic;
            if topic >= k {
                return Err(invalid(format!("split of topic {topic} with k = {k}")));
            }
            let members: Vec<usize> = topics.partition.members(topic).collect();
            if members.len() < 2 {
                return Err(invalid(format!("topic {topic} has {} member(s); cannot split", members.len())));
            }
            let data = topics.data(ws);
            let sub = data.matrix.select_rows(&members);
            let fit = kmeans_fit(&sub, 2, ws.config.max_iter, split_seed(ws.config.seeds.agent, seq))?;
            let mut assignments = topics.partition.assignments().to_vec();
            for (&row, &half) in members.iter().zip(fit.partition.assignments()) {
                if half == 1 {
                    assignments[row] = k;
                }
            }
            let mut centroids = topics.centroids.matrix.clone();
            centroids.row_mut(topic).copy_from_slice(fit.centroids.row(0));
            centroids.push_row(fit.centroids.row(1));
            next.partition = TopicPartition::new(assignments, k + 1);
            next.centroids = Centroids::new(centroids);
            undo_of = topics.provenance[topic].merged_by;
            next.provenance[topic] = TopicProvenance::default();
            next.provenance.push(TopicProvenance::default());
        }
        ActionParams::Relabel { topic, label } => {
            let topic = *topic;
            if topic >= k {
                return Err(invalid(format!("relabel of topic {topic} with k = {k}")));
            }
            let label = label.trim();
            if label.is_empty() {
                return Err(invalid("relabel with an empty label"));
            }
            undo_of = topics.provenance[topic].custom_label.as_ref().map(|(_, s)| *s);
            next.provenance[topic].custom_label = Some((label.to_owned(), seq));
            next.descriptors[topic].label = label.to_owned();
            return Ok(Transition {
                topics: next,
                metrics: current.clone(),
                undo_of,
            });
        }
        ActionParams::Filter {
            doc_ids,
            readmit,
            ..
        } => {
            if doc_ids.is_empty() {
                return Err(invalid("filter lists no documents"));
            }
            let mut rows = BTreeSet::new();
            for id in doc_ids {
                let row = ws
                    .train_row(id)
                    .ok_or_else(|| invalid(format!("`{id}` is not a training document")))?;
                if !rows.insert(row) {
                    return Err(invalid(format!("`{id}` listed twice")));
                }
            }
            let mut active: BTreeSet<usize> = topics.active.iter().copied().collect();
            if *readmit {
                for id in doc_ids {
                    if !topics.filtered.contains_key(id) {
                        return Err(invalid(format!("`{id}` was not filtered")));
                    }
                }
                undo_of = topics.filtered.get(&doc_ids[0]).copied();
                for id in doc_ids {
                    next.filtered.remove(id);
                }
                active.extend(rows);
            } else {
                for id in doc_ids {
                    if topics.filtered.contains_key(id) {
                        return Err(invalid(format!("`{id}` is already filtered")));
                    }
                }
                if active.len() - rows.len() < k {
                    return Err(invalid(format!(
                        "filter would leave {} documents for {k} topics",
                        active.len() - rows.len()
                    )));
                }
                for id in doc_ids {
                    next.filtered.insert(id.clone(), seq);
                }
                active.retain(|r| !rows.contains(r));
            }
            next.active = active.into_iter().collect();
            let (partition, centroids) = reassign(&ws.train.select(&next.active).matrix, &topics.centroids)?;
            next.partition = partition;
            next.centroids = centroids;
        }
        ActionParams::Retrain { max_iter } => {
            if *max_iter < 1 {
                return Err(invalid("retrain with max_iter = 0"));
            }
            let data = topics.data(ws);
            let fit = retrain(&data.matrix, &topics.centroids, *max_iter)?;
            next.partition = fit.partition;
            next.centroids = fit.centroids;
        }
    }
    let data = next.data(ws);
    next.rebuild_descriptors(ws, &data)?;
    let metrics = next.evaluate(ws, &data)?;
    Ok(Transition {
        topics: next,
        metrics,
        undo_of,
    })
}
