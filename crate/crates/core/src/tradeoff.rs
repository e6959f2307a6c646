use serde::{Deserialize, Serialize};

/// One point of a relevance / sum-complexity curve, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    /// Tradeoff multiplier the point belongs to (`inf` at the zero-rate end).
    pub s: f64,
    pub relevance: f64,
    pub sum_complexity: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl TradeoffPoint {
    /// Same point with both coordinates converted to bits.
    pub fn in_bits(self) -> Self {
        TradeoffPoint {
            relevance: crate::info::nats_to_bits(self.relevance),
            sum_complexity: crate::info::nats_to_bits(self.sum_complexity),
            ..self
        }
    }
}
