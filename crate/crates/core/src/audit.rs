//! Append-only audit log, process-auditability indicators, and replay.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{transition, Action, AgentError, Confidence, Evidence, SystemState};
use crate::metrics::MetricSummary;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("record seq {got} out of order (expected {expected})")]
    SeqOrder { expected: u64, got: u64 },
    #[error("record {seq}: metrics_after must be present exactly when accepted")]
    MetricsAfter { seq: u64 },
    #[error("record {seq}: undo_of {target} is not an earlier accepted record")]
    UndoTarget { seq: u64, target: u64 },
    #[error("log belongs to config {log}, state has config {state}")]
    ConfigHash { log: String, state: String },
    #[error("replay failed at seq {seq}: {reason}")]
    Replay { seq: u64, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {seq}: iteration {got} precedes iteration {previous}")]
    IterationOrder { seq: u64, got: usize, previous: usize },
}

impl AuditError {
    pub fn is_input_error(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub iteration: usize,
    /// Service queue id when the action came through the review service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_id: Option<u64>,
    pub action: Action,
    pub accepted: bool,
    /// Absent when the action failed validation and was never gated.
    pub confidence: Option<Confidence>,
    pub metrics_before: MetricSummary,
    pub metrics_after: Option<MetricSummary>,
    pub undo_of: Option<u64>,
    /// Topic-state hash after applying an accepted action.
    pub state_hash_after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AuditRecord {
    pub fn rationale(&self) -> &str {
        &self.action.rationale
    }

    pub fn evidence(&self) -> &[Evidence] {
        &self.action.evidence
    }

    /// Action, rationale, evidence, and both metric snapshots all present.
    pub fn is_complete(&self) -> bool {
        !self.action.rationale.trim().is_empty() && !self.action.evidence.is_empty() && self.metrics_after.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub run_config_hash: String,
    /// Iterations closed when the log was written.
    #[serde(default)]
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
    run_config_hash: String,
    iterations: usize,
}

impl AuditLog {
    pub fn new(run_config_hash: String) -> Self {
        Self {
            records: Vec::new(),
            run_config_hash,
            iterations: 0,
        }
    }

    /// Completed refinement iterations, including ones with no records.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn close_iteration(&mut self) {
        self.iterations += 1;
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn run_config_hash(&self) -> &str {
        &self.run_config_hash
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Seqs start at 1.
    pub fn next_seq(&self) -> u64 {
        self.records.last().map_or(1, |r| r.seq + 1)
    }

    pub fn get(&self, seq: u64) -> Option<&AuditRecord> {
        let first = self.records.first()?.seq;
        self.records.get(seq.checked_sub(first)? as usize)
    }

    pub fn accepted(&self) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    /// Records with `seq >= from`.
    pub fn since(&self, from: u64) -> &[AuditRecord] {
        let start = self.records.partition_point(|r| r.seq < from);
        &self.records[start..]
    }

    pub fn append(&mut self, record: AuditRecord) -> Result<(), AuditError> {
        let expected = self.next_seq();
        if record.seq != expected {
            return Err(AuditError::SeqOrder {
                expected,
                got: record.seq,
            });
        }
        if record.accepted != record.metrics_after.is_some() {
            return Err(AuditError::MetricsAfter { seq: record.seq });
        }
        let previous = self.records.last().map_or(self.iterations, |r| r.iteration.max(self.iterations));
        if record.iteration < previous {
            return Err(AuditError::IterationOrder {
                seq: record.seq,
                got: record.iteration,
                previous,
            });
        }
        if let Some(target) = record.undo_of {
            if !self.get(target).is_some_and(|r| r.accepted) {
                return Err(AuditError::UndoTarget {
                    seq: record.seq,
                    target,
                });
            }
        }
        self.records.push(record);
        Ok(())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Share of accepted records that are complete; 1 when nothing was accepted.
pub fn trace_completeness(log: &AuditLog) -> f64 {
    let accepted: Vec<&AuditRecord> = log.accepted().collect();
    ratio(accepted.iter().filter(|r| r.is_complete()).count(), accepted.len())
}

/// Share of accepted records citing at least one document; 1 when nothing
/// was accepted.
pub fn evidence_linkage_rate(log: &AuditLog) -> f64 {
    let accepted: Vec<&AuditRecord> = log.accepted().collect();
    ratio(accepted.iter().filter(|r| r.action.cites_document()).count(), accepted.len())
}

/// `1 - N_undo / N_rev` over accepted records; 1 when nothing was accepted.
pub fn revision_consistency(log: &AuditLog) -> f64 {
    let n_rev = log.accepted().count();
    if n_rev == 0 {
        return 1.0;
    }
    let undone: BTreeSet<u64> = log.records().iter().filter_map(|r| r.undo_of).collect();
    let n_undo = log.accepted().filter(|r| undone.contains(&r.seq)).count();
    1.0 - n_undo as f64 / n_rev as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditIndicators {
    pub tc: f64,
    pub elr: f64,
    pub rc: f64,
}

pub fn indicators(log: &AuditLog) -> AuditIndicators {
    AuditIndicators {
        tc: trace_completeness(log),
        elr: evidence_linkage_rate(log),
        rc: revision_consistency(log),
    }
}

/// Re-applies every accepted action of `log` to `initial` in seq order and
/// checks each recorded state hash, undo link, metric snapshot, and gate
/// decision.
pub fn replay(log: &AuditLog, initial: &SystemState) -> Result<SystemState, AuditError> {
    if log.run_config_hash() != initial.workspace.config_hash {
        return Err(AuditError::ConfigHash {
            log: log.run_config_hash().to_owned(),
            state: initial.workspace.config_hash.clone(),
        });
    }
    let mut state = initial.clone();
    let cfg = &initial.config().agent;
    for rec in log.records() {
        let fail = |reason: String| AuditError::Replay { seq: rec.seq, reason };
        if rec.iteration < state.iteration {
            return Err(fail(format!("iteration {} already closed", rec.iteration)));
        }
        while state.iteration < rec.iteration {
            state.close_iteration();
        }
        if !same_summary(&rec.metrics_before, &state.snapshot()) {
            return Err(fail("metrics_before differs from the replayed state".into()));
        }
        match &rec.confidence {
            Some(c) => {
                if c.alpha != cfg.alpha || c.eta != cfg.eta {
                    return Err(fail("confidence parameters differ from the run config".into()));
                }
                let q = Confidence::new(c.q_model, c.q_expert, c.alpha, c.eta);
                if q.q != c.q || q.accepted() != rec.accepted {
                    return Err(fail("recorded decision is inconsistent with its confidence".into()));
                }
            }
            None if rec.accepted => return Err(fail("accepted record without a confidence".into())),
            None => {}
        }
        if !rec.accepted {
            continue;
        }
        let t = transition(&state.workspace, &state.topics, &state.metrics, &rec.action, rec.seq).map_err(
            |e: AgentError| fail(e.to_string()),
        )?;
        if t.undo_of != rec.undo_of {
            return Err(fail(format!("undo link {:?} recorded, {:?} recomputed", rec.undo_of, t.undo_of)));
        }
        let after = t.metrics.summary(state.score_of(&t.metrics));
        if !same_summary(rec.metrics_after.as_ref().expect("accepted records carry metrics_after"), &after) {
            return Err(fail("metrics differ from the recorded snapshot".into()));
        }
        let q_expert = rec.confidence.as_ref().expect("checked above").q_expert;
        state.apply_accepted(t, rec.action.kind(), q_expert);
        let hash = state.state_hash();
        if rec.state_hash_after.as_deref() != Some(hash.as_str()) {
            return Err(fail("state hash differs from the recorded one".into()));
        }
    }
    let last = log.records().last().map_or(0, |r| r.iteration);
    if log.iterations() < last {
        return Err(AuditError::IterationOrder {
            seq: log.next_seq(),
            got: log.iterations(),
            previous: last,
        });
    }
    while state.iteration < log.iterations() {
        state.close_iteration();
    }
    state.log = log.clone();
    Ok(state)
}

/// Equality of every metric and the score, with NaN equal to NaN.
fn same_summary(a: &MetricSummary, b: &MetricSummary) -> bool {
    let same = |x: f64, y: f64| x == y || (x.is_nan() && y.is_nan());
    a.values().iter().zip(b.values()).all(|(x, y)| same(*x, y)) && same(a.score, b.score)
}

/// Writes a header line and one JSON record per line.
pub fn export_log(log: &AuditLog, path: &Path) -> Result<(), AuditError> {
    let io = |source| AuditError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let header = LogHeader {
        version: LOG_VERSION,
        run_config_hash: log.run_config_hash.clone(),
        iterations: log.iterations,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
    for r in &log.records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn import_log(path: &Path) -> Result<AuditLog, AuditError> {
    let io = |source| AuditError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(io)?,
        None => {
            return Err(AuditError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let header: LogHeader = serde_json::from_str(&header).map_err(|e| AuditError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.version != LOG_VERSION {
        return Err(AuditError::Parse {
            line: 1,
            message: format!("unsupported log version {}", header.version),
        });
    }
    let mut log = AuditLog::new(header.run_config_hash);
    for (i, line) in lines {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AuditRecord = serde_json::from_str(&line).map_err(|e| AuditError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        log.append(rec)?;
    }
    let last = log.records.last().map_or(0, |r| r.iteration);
    if header.iterations < last {
        return Err(AuditError::Parse {
            line: 1,
            message: format!("header closes {} iterations but records reach iteration {last}", header.iterations),
        });
    }
    log.iterations = header.iterations;
    Ok(log)
}
