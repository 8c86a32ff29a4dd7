use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub q_model: f64,
    pub q_expert: f64,
    pub alpha: f64,
    pub q: f64,
    pub eta: f64,
}

impl Confidence {
    pub fn new(q_model: f64, q_expert: f64, alpha: f64, eta: f64) -> Self {
        Self {
            q_model,
            q_expert,
            alpha,
            q: combine(alpha, q_model, q_expert),
            eta,
        }
    }

    pub fn accepted(&self) -> bool {
        self.q >= self.eta
    }
}

/// `alpha * q_model + (1 - alpha) * q_expert`.
pub fn combine(alpha: f64, q_model: f64, q_expert: f64) -> f64 {
    alpha * q_model + (1.0 - alpha) * q_expert
}

/// Maps a trial score change to `[0, 1]` around the neutral value 0.5.
pub fn q_model_from_delta(delta: f64, gamma: f64) -> f64 {
    if delta.is_nan() {
        return 0.0;
    }
    (0.5 + gamma * delta).clamp(0.0, 1.0)
}
