use serde::{Deserialize, Serialize};

/// Acceptance statistics of a protocol run: an exact probability, a sampled
/// frequency, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub summary: String,
}

impl ProtocolOutcome {
    pub fn exact(probability: f64, summary: impl Into<String>) -> Self {
        Self {
            probability: Some(probability.clamp(0.0, 1.0)),
            frequency: None,
            trials: None,
            accepted: None,
            seed: None,
            summary: summary.into(),
        }
    }

    pub fn sampled(frequency: f64, trials: usize, accepted: usize, seed: u64, summary: impl Into<String>) -> Self {
        Self {
            probability: None,
            frequency: Some(frequency),
            trials: Some(trials),
            accepted: Some(accepted),
            seed: Some(seed),
            summary: summary.into(),
        }
    }

    /// Exact probability if known, otherwise the sampled frequency.
    pub fn value(&self) -> f64 {
        self.probability.or(self.frequency).unwrap_or(0.0)
    }

    /// Binomial standard error of the sampled frequency.
    pub fn std_error(&self) -> Option<f64> {
        let f = self.frequency?;
        let t = self.trials? as f64;
        Some((f * (1.0 - f) / t).sqrt())
    }
}
