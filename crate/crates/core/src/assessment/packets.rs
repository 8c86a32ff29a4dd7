use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AssessmentError;
use crate::agent::SystemState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketDoc {
    pub id: String,
    pub text: String,
}

/// What a rater sees. Nothing here identifies the condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicPacket {
    pub packet_id: String,
    /// Topic index, drawn from the same sample for every condition.
    pub topic: usize,
    pub label: Option<String>,
    pub keywords: Vec<String>,
    pub representatives: Vec<PacketDoc>,
    pub condition_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub packet_id: String,
    pub condition_token: String,
    pub condition: String,
    pub topic: usize,
}

/// Sealed mapping from packets to conditions, stored apart from the packets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketKey {
    pub entries: Vec<KeyEntry>,
}

impl PacketKey {
    pub fn entry(&self, packet_id: &str) -> Option<&KeyEntry> {
        self.entries.iter().find(|e| e.packet_id == packet_id)
    }

    /// Conditions in first-appearance order.
    pub fn conditions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.condition.as_str()) {
                out.push(&e.condition);
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), AssessmentError> {
        let body = serde_json::to_string_pretty(self).expect("key serializes");
        fs::write(path, body).map_err(|e| AssessmentError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, AssessmentError> {
        let err = |message: String| AssessmentError::File {
            path: path.display().to_string(),
            message,
        };
        let raw = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&raw).map_err(|e| err(e.to_string()))
    }
}

/// Samples `sample_k` topic indices shared by all conditions and builds one
/// packet per (condition, topic), shuffled under `seed`.
pub fn build_packets(
    conditions: &[(&str, &SystemState)],
    sample_k: usize,
    seed: u64,
) -> Result<(Vec<TopicPacket>, PacketKey), AssessmentError> {
    let min_k = conditions
        .iter()
        .map(|(_, s)| s.k())
        .min()
        .ok_or(AssessmentError::NoConditions)?;
    if sample_k > min_k || sample_k == 0 {
        return Err(AssessmentError::SampleTooLarge { sample_k, min_k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topics: Vec<usize> = (0..min_k).collect();
    topics.shuffle(&mut rng);
    topics.truncate(sample_k);
    topics.sort_unstable();

    let mut drafts = Vec::new();
    for &(name, state) in conditions {
        let corpus = &state.workspace.corpus;
        for &t in &topics {
            let d = &state.topics.descriptors[t];
            let token = hex::encode(rng.random::<[u8; 16]>());
            let representatives = d
                .representatives
                .iter()
                .map(|(id, _)| PacketDoc {
                    id: id.clone(),
                    text: corpus.document(id).map(|doc| doc.display_text()).unwrap_or_default(),
                })
                .collect();
            drafts.push((
                name.to_owned(),
                TopicPacket {
                    packet_id: String::new(),
                    topic: t,
                    label: Some(d.label.clone()),
                    keywords: d.keyword_terms().map(str::to_owned).collect(),
                    representatives,
                    condition_token: token,
                },
            ));
        }
    }
    drafts.shuffle(&mut rng);
    let mut packets = Vec::with_capacity(drafts.len());
    let mut key = PacketKey::default();
    for (i, (condition, mut p)) in drafts.into_iter().enumerate() {
        p.packet_id = format!("pkt-{:03}", i + 1);
        key.entries.push(KeyEntry {
            packet_id: p.packet_id.clone(),
            condition_token: p.condition_token.clone(),
            condition,
            topic: p.topic,
        });
        packets.push(p);
    }
    Ok((packets, key))
}
