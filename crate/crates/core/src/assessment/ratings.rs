use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AssessmentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Clarity,
    Relevance,
    LabelAdequacy,
    TheoreticalUsefulness,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Clarity,
        Dimension::Relevance,
        Dimension::LabelAdequacy,
        Dimension::TheoreticalUsefulness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Clarity => "clarity",
            Dimension::Relevance => "relevance",
            Dimension::LabelAdequacy => "label_adequacy",
            Dimension::TheoreticalUsefulness => "theoretical_usefulness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scores {
    pub clarity: u8,
    pub relevance: u8,
    pub label_adequacy: u8,
    pub theoretical_usefulness: u8,
}

impl Scores {
    pub fn get(&self, d: Dimension) -> u8 {
        match d {
            Dimension::Clarity => self.clarity,
            Dimension::Relevance => self.relevance,
            Dimension::LabelAdequacy => self.label_adequacy,
            Dimension::TheoreticalUsefulness => self.theoretical_usefulness,
        }
    }

    pub fn uniform(v: u8) -> Self {
        Self {
            clarity: v,
            relevance: v,
            label_adequacy: v,
            theoretical_usefulness: v,
        }
    }
}

/// A validated rating: every dimension scored with an integer in 1..=5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rating {
    pub rater: String,
    pub packet: String,
    pub scores: Scores,
    pub flag: bool,
}

/// A rating as submitted, before range and integrality checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRating {
    pub rater: String,
    pub packet: String,
    pub scores: RawScores,
    #[serde(default)]
    pub flag: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub clarity: Option<f64>,
    pub relevance: Option<f64>,
    pub label_adequacy: Option<f64>,
    pub theoretical_usefulness: Option<f64>,
}

impl RawRating {
    pub fn validate(self, index: usize) -> Result<Rating, AssessmentError> {
        let bad = |message: String| AssessmentError::InvalidRating { index, message };
        if self.rater.trim().is_empty() || self.packet.trim().is_empty() {
            return Err(bad("rater and packet must be non-empty".into()));
        }
        let check = |d: Dimension, v: Option<f64>| -> Result<u8, AssessmentError> {
            let v = v.ok_or_else(|| bad(format!("{} is missing", d.as_str())))?;
            if v.fract() != 0.0 || !(1.0..=5.0).contains(&v) {
                return Err(bad(format!("{} = {v} is not an integer in 1..=5", d.as_str())));
            }
            Ok(v as u8)
        };
        let s = &self.scores;
        let scores = Scores {
            clarity: check(Dimension::Clarity, s.clarity)?,
            relevance: check(Dimension::Relevance, s.relevance)?,
            label_adequacy: check(Dimension::LabelAdequacy, s.label_adequacy)?,
            theoretical_usefulness: check(Dimension::TheoreticalUsefulness, s.theoretical_usefulness)?,
        };
        Ok(Rating {
            rater: self.rater,
            packet: self.packet,
            scores,
            flag: self.flag,
        })
    }
}

impl<'de> Deserialize<'de> for Rating {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        RawRating::deserialize(d)?.validate(0).map_err(serde::de::Error::custom)
    }
}

/// Line-delimited JSON ratings.
pub fn read_ratings(path: &Path) -> Result<Vec<Rating>, AssessmentError> {
    let file_err = |message: String| AssessmentError::File {
        path: path.display().to_string(),
        message,
    };
    let raw = fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: RawRating = serde_json::from_str(l).map_err(|e| file_err(format!("line {}: {e}", i + 1)))?;
            r.validate(i + 1)
        })
        .collect()
}
