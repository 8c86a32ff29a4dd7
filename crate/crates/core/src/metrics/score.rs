use serde::{Deserialize, Serialize};

use super::MetricError;

/// Weights of the refinement quality signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w_coherence: f64,
    pub w_stability: f64,
    pub w_expert: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w_coherence: 0.5,
            w_stability: 0.3,
            w_expert: 0.2,
        }
    }
}

impl ScoreWeights {
    pub fn new(w_coherence: f64, w_stability: f64, w_expert: f64) -> Result<Self, MetricError> {
        let w = Self {
            w_coherence,
            w_stability,
            w_expert,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let parts = [self.w_coherence, self.w_stability, self.w_expert];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(MetricError::Weights);
        }
        Ok(())
    }
}

/// `w_c * (npmi + 1) / 2 + w_s * stability + w_e * expert`.
///
/// Without a stability value (the first iteration), its weight is shared
/// between the other two terms in proportion to their weights.
pub fn quality_score(npmi: f64, stability: Option<f64>, expert_alignment: f64, weights: &ScoreWeights) -> f64 {
    let coherence = (npmi.clamp(-1.0, 1.0) + 1.0) / 2.0;
    match stability {
        Some(s) => weights.w_coherence * coherence + weights.w_stability * s + weights.w_expert * expert_alignment,
        None => {
            let rest = weights.w_coherence + weights.w_expert;
            if rest == 0.0 {
                return 1.0;
            }
            (weights.w_coherence * coherence + weights.w_expert * expert_alignment) / rest
        }
    }
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index of two labelings of the same items. Degenerate cases
/// where the expected index equals the maximum score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len() as u64;
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n);
    let max = (sa + sb) / 2.0;
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
