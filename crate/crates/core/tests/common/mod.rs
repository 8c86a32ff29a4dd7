#![allow(dead_code)]

use std::sync::Arc;

use topicbench::agent::{ActionParams, Agents, Evidence, Role, ScriptEntry, ScriptedAgent, SystemState, Workspace};
use topicbench::config::RunConfig;
use topicbench::corpus::{Corpus, PreprocessConfig};
use topicbench::synth::{planted_corpus, PlantedCorpus, PlantedSpec};

pub fn small_spec() -> PlantedSpec {
    PlantedSpec {
        n_docs: 120,
        ..PlantedSpec::default()
    }
}

pub fn workspace(planted: &PlantedCorpus, config: RunConfig) -> Arc<Workspace> {
    let (corpus, _) = Corpus::from_records(planted.records.clone(), &config.preprocess).unwrap();
    Arc::new(Workspace::from_parts(corpus, &planted.embeddings, config).unwrap())
}

/// Initial state over a planted corpus clustered into `k` topics.
pub fn planted_state(spec: &PlantedSpec, k: usize, tweak: impl FnOnce(&mut RunConfig)) -> SystemState {
    let planted = planted_corpus(spec).unwrap();
    let mut config = RunConfig::new("unused", "unused", "unused", k);
    config.preprocess = PreprocessConfig::default();
    tweak(&mut config);
    SystemState::initial(workspace(&planted, config)).unwrap()
}

/// Planted topic of each active row, by document label.
pub fn planted_labels(state: &SystemState) -> Vec<usize> {
    let data = state.data();
    data.doc_index
        .iter()
        .map(|&pos| {
            let label = state.workspace.corpus.documents()[pos].label.as_deref().unwrap();
            label.trim_start_matches("topic").parse().unwrap()
        })
        .collect()
}

/// Agreement after the best one-to-one matching of clusters to planted topics.
pub fn best_match_agreement(found: &[usize], truth: &[usize], k: usize) -> f64 {
    let kt = truth.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; kt]; k];
    for (&f, &t) in found.iter().zip(truth) {
        table[f][t] += 1;
    }
    let mut best = 0;
    let mut perm: Vec<usize> = (0..kt).collect();
    permute(&mut perm, 0, &mut |p| {
        let hits: usize = (0..k.min(kt)).map(|c| table[c][p[c]]).sum();
        best = best.max(hits);
    });
    best as f64 / found.len() as f64
}

fn permute(v: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

pub fn scripted(entries: Vec<ScriptEntry>, roles: &[Role]) -> Agents {
    let mut agents = Agents::new();
    for &role in roles {
        let mine = entries.iter().filter(|e| e.role == role).cloned().collect();
        agents.set(role, Box::new(ScriptedAgent::new(mine).unwrap()));
    }
    agents
}

pub fn entry(iteration: usize, role: Role, params: ActionParams, q_expert: f64) -> ScriptEntry {
    ScriptEntry {
        iteration,
        role,
        params,
        q_expert,
        rationale: format!("scripted {iteration}"),
        evidence: vec![Evidence::Doc("doc00001".into())],
    }
}

/// A mixed script over three iterations for a planted state with `k = 4`.
/// Some entries are meant to be rejected under the default threshold.
pub fn mixed_script(merge: (usize, usize)) -> Vec<ScriptEntry> {
    let (a, b) = merge;
    vec![
        entry(0, Role::DataSteward, ActionParams::Filter { doc_ids: vec!["doc00003".into(), "doc00010".into()], reason: "noise".into(), readmit: false }, 0.9),
        entry(0, Role::ModelingAnalyst, ActionParams::Merge { a, b }, 0.9),
        entry(0, Role::DomainExpert, ActionParams::Relabel { topic: 0, label: "finance".into() }, 0.2),
        entry(0, Role::DomainExpert, ActionParams::Relabel { topic: 1, label: "sport".into() }, 0.9),
        entry(1, Role::ModelingAnalyst, ActionParams::Retrain { max_iter: 50 }, 0.8),
        entry(1, Role::ModelingAnalyst, ActionParams::Split { topic: 2 }, 0.3),
        entry(1, Role::DomainExpert, ActionParams::Relabel { topic: 1, label: "football".into() }, 0.95),
        entry(2, Role::DataSteward, ActionParams::Filter { doc_ids: vec!["doc00003".into(), "doc00010".into()], reason: "restore".into(), readmit: true }, 0.9),
        entry(2, Role::ModelingAnalyst, ActionParams::Merge { a: 0, b: 0 }, 0.9),
    ]
}
