use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    DataSteward,
    ModelingAnalyst,
    DomainExpert,
}

impl Role {
    /// Order in which roles act within one iteration.
    pub const ORDER: [Role; 3] = [Role::DataSteward, Role::ModelingAnalyst, Role::DomainExpert];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::DataSteward => "data_steward",
            Role::ModelingAnalyst => "modeling_analyst",
            Role::DomainExpert => "domain_expert",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Merge,
    Split,
    Relabel,
    Filter,
    Retrain,
}

impl ActionKind {
    /// Kinds that change the partition.
    pub fn is_structural(self) -> bool {
        matches!(self, ActionKind::Merge | ActionKind::Split | ActionKind::Filter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ActionParams {
    Merge {
        a: usize,
        b: usize,
    },
    Split {
        topic: usize,
    },
    Relabel {
        topic: usize,
        label: String,
    },
    /// Removes documents from the active set, or puts previously removed
    /// ones back when `readmit` is set.
    Filter {
        doc_ids: Vec<String>,
        reason: String,
        #[serde(default)]
        readmit: bool,
    },
    Retrain {
        max_iter: usize,
    },
}

impl ActionParams {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionParams::Merge { .. } => ActionKind::Merge,
            ActionParams::Split { .. } => ActionKind::Split,
            ActionParams::Relabel { .. } => ActionKind::Relabel,
            ActionParams::Filter { .. } => ActionKind::Filter,
            ActionParams::Retrain { .. } => ActionKind::Retrain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Doc(String),
    Topic(usize),
    Metric(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    #[serde(flatten)]
    pub params: ActionParams,
    pub proposer: Role,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
}

impl Action {
    pub fn new(params: ActionParams, proposer: Role, rationale: impl Into<String>) -> Self {
        Self {
            params,
            proposer,
            rationale: rationale.into(),
            evidence: Vec::new(),
        }
    }

    pub fn with_evidence(mut self, evidence: impl IntoIterator<Item = Evidence>) -> Self {
        self.evidence.extend(evidence);
        self
    }

    pub fn kind(&self) -> ActionKind {
        self.params.kind()
    }

    pub fn cites_document(&self) -> bool {
        self.evidence.iter().any(|e| matches!(e, Evidence::Doc(_)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let a = Action::new(
            ActionParams::Relabel {
                topic: 2,
                label: "credit disputes".into(),
            },
            Role::DomainExpert,
            "clearer",
        )
        .with_evidence([Evidence::Doc("d1".into()), Evidence::Metric("excl".into())]);
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v["kind"], "relabel");
        assert_eq!(v["params"]["topic"], 2);
        assert_eq!(v["proposer"], "domain_expert");
        assert_eq!(v["evidence"][0]["doc"], "d1");
        let back: Action = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
        assert!(back.cites_document());
    }

    #[test]
    fn filter_readmit_defaults_off() {
        let a: Action = serde_json::from_str(
            r#"{"kind":"filter","params":{"doc_ids":["x"],"reason":"dup"},"proposer":"data_steward"}"#,
        )
        .unwrap();
        assert_eq!(
            a.params,
            ActionParams::Filter {
                doc_ids: vec!["x".into()],
                reason: "dup".into(),
                readmit: false
            }
        );
        assert!(a.rationale.is_empty());
    }
}
