//! End-to-end runs: load, cluster, describe, score, refine under one or more
//! role conditions, and export every artifact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assessment::build_packets;
use crate::agent::{run_refinement, Agents, StoppingRule, SystemState, Workspace};
use crate::audit::{export_log, import_log, indicators, replay, AuditIndicators};
use crate::config::{Mode, RunConfig};
use crate::induction::{inertia, PartitionExport};
use crate::metrics::{MetricReport, MetricSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsExport {
    pub summary: MetricSummary,
    pub report: MetricReport,
    pub score_history: Vec<f64>,
    pub indicators: AuditIndicators,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateExport {
    pub mode: Option<Mode>,
    pub iteration: usize,
    pub k: usize,
    pub state_hash: String,
    pub run_config_hash: String,
    pub active_docs: usize,
    pub filtered: Vec<String>,
    pub records: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub mode: Mode,
    pub state: SystemState,
    pub steps: usize,
    pub dir: PathBuf,
}

/// One row per condition, one column per headline metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub metrics: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub condition: Mode,
    pub values: Vec<f64>,
}

impl ComparisonTable {
    pub fn from_outcomes(outcomes: &[ModeOutcome]) -> Self {
        Self {
            metrics: MetricSummary::NAMES.iter().map(|s| (*s).to_owned()).collect(),
            rows: outcomes
                .iter()
                .map(|o| ComparisonRow {
                    condition: o.mode,
                    values: o.state.metrics.summary(o.state.score()).values().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Condition |");
        for m in &self.metrics {
            let _ = write!(s, " {m} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|".repeat(self.metrics.len()));
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "| {} |", r.condition);
            for v in &r.values {
                let _ = write!(s, " {v:.4} |");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("condition,{}\n", self.metrics.join(","));
        for r in &self.rows {
            let vals: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{},{}", r.condition, vals.join(","));
        }
        s
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&raw)?)
}

/// Refines a copy of `initial` with the roles of `mode`.
pub fn run_mode(initial: &SystemState, mode: Mode) -> Result<(SystemState, usize)> {
    let mut state = initial.clone();
    let roles = mode.roles();
    if roles.is_empty() {
        return Ok((state, 0));
    }
    let cfg = &state.config().agent;
    let rule = StoppingRule::new(cfg.epsilon, cfg.t_max)?;
    let mut agents = Agents::from_config(&state, roles)?;
    let steps = run_refinement(&mut state, &mut agents, rule)?;
    Ok((state, steps))
}

/// Writes the artifacts of one state into `dir`.
pub fn export_state(state: &SystemState, mode: Option<Mode>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ws = &state.workspace;
    write_json(&dir.join("run_config.json"), &ws.config)?;
    let data = state.data();
    let fit_inertia = inertia(&data.matrix, state.topics.partition.assignments(), &state.topics.centroids.matrix);
    let partition = PartitionExport::new(&data.ids, &state.topics.partition, fit_inertia, ws.config.seeds.cluster);
    write_json(&dir.join("partition.json"), &partition)?;
    write_json(&dir.join("descriptors.json"), &state.topics.descriptors)?;
    write_json(
        &dir.join("metrics.json"),
        &MetricsExport {
            summary: state.metrics.summary(state.score()),
            report: state.metrics.clone(),
            score_history: state.score_history.clone(),
            indicators: indicators(&state.log),
        },
    )?;
    export_log(&state.log, &dir.join("audit.jsonl"))?;
    write_json(
        &dir.join("state.json"),
        &StateExport {
            mode,
            iteration: state.iteration,
            k: state.k(),
            state_hash: state.state_hash(),
            run_config_hash: ws.config_hash.clone(),
            active_docs: state.topics.active.len(),
            filtered: state.topics.filtered.keys().cloned().collect(),
            records: state.log.len(),
            accepted: state.log.accepted().count(),
        },
    )?;
    Ok(())
}

/// Runs every requested condition from one shared initial state and writes
/// `<out>/<mode>/...`. With more than one condition it also writes
/// `comparison.{md,csv,json}` and blinded rating packets (`packets.json`)
/// with their key kept apart in `packet_key.json`.
pub fn cli_run(config: RunConfig, modes: &[Mode], out: &Path) -> Result<Vec<ModeOutcome>> {
    if modes.is_empty() {
        return Err(Error::Config("no modes requested".into()));
    }
    let ws = Arc::new(Workspace::load(config)?);
    let initial = SystemState::initial(ws)?;
    let mut outcomes = Vec::new();
    for &mode in modes {
        let (state, steps) = run_mode(&initial, mode)?;
        let dir = out.join(mode.as_str());
        export_state(&state, Some(mode), &dir)?;
        outcomes.push(ModeOutcome { mode, state, steps, dir });
    }
    if outcomes.len() > 1 {
        let table = ComparisonTable::from_outcomes(&outcomes);
        write_json(&out.join("comparison.json"), &table)?;
        fs::write(out.join("comparison.md"), table.to_markdown()).map_err(|e| Error::io(out, e))?;
        fs::write(out.join("comparison.csv"), table.to_csv()).map_err(|e| Error::io(out, e))?;
        let conditions: Vec<(&str, &SystemState)> = outcomes.iter().map(|o| (o.mode.as_str(), &o.state)).collect();
        let min_k = outcomes.iter().map(|o| o.state.k()).min().unwrap_or(0);
        let seeds = &initial.config().seeds;
        let sample_k = initial.config().assessment.sample_k.min(min_k);
        let (packets, key) = build_packets(&conditions, sample_k, seeds.packets)?;
        write_json(&out.join("packets.json"), &packets)?;
        key.save(&out.join("packet_key.json"))?;
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub records: usize,
    pub accepted: usize,
    pub state_hash: String,
    /// Hash recorded by the last accepted record, if any.
    pub recorded_hash: Option<String>,
    pub summary: MetricSummary,
}

/// Rebuilds the initial state from `config` and replays `log` over it.
pub fn replay_files(log_path: &Path, config: RunConfig) -> Result<(SystemState, ReplayOutcome)> {
    let log = import_log(log_path)?;
    let initial = SystemState::initial(Arc::new(Workspace::load(config)?))?;
    let state = replay(&log, &initial)?;
    let outcome = ReplayOutcome {
        records: log.len(),
        accepted: log.accepted().count(),
        state_hash: state.state_hash(),
        recorded_hash: log.accepted().last().and_then(|r| r.state_hash_after.clone()),
        summary: state.metrics.summary(state.score()),
    };
    Ok((state, outcome))
}

/// Reconstructs the state exported to `dir` by replaying its audit log.
pub fn load_state_dir(dir: &Path) -> Result<SystemState> {
    let config: RunConfig = read_json(&dir.join("run_config.json"))?;
    let (state, _) = replay_files(&dir.join("audit.jsonl"), config)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes() {
        let t = ComparisonTable {
            metrics: MetricSummary::NAMES.iter().map(|s| (*s).to_owned()).collect(),
            rows: Mode::ALL
                .iter()
                .map(|&m| ComparisonRow {
                    condition: m,
                    values: vec![0.5; 7],
                })
                .collect(),
        };
        let md = t.to_markdown();
        assert_eq!(md.lines().count(), 6);
        assert!(md.starts_with("| Condition | TD | iRBO | NPMI | UMass | C_V | Excl | PPL |"));
        assert_eq!(t.to_csv().lines().nth(1).unwrap().split(',').count(), 8);
    }
}
