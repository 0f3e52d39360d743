//! Token and cost accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Per-million-token USD prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRate {
    pub input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub models: BTreeMap<String, ModelRate>,
    /// Rate for models missing from the table.
    pub default: ModelRate,
}

impl Default for RateTable {
    fn default() -> Self {
        Self {
            models: BTreeMap::new(),
            default: ModelRate {
                input: 5.0,
                output: 25.0,
            },
        }
    }
}

impl RateTable {
    pub fn from_json(src: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(src)
    }

    pub fn rate(&self, model: &str) -> ModelRate {
        self.models.get(model).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub usage: BTreeMap<String, ModelUsage>,
    pub rates: RateTable,
}

impl CostLedger {
    pub fn new(rates: RateTable) -> Self {
        Self {
            usage: BTreeMap::new(),
            rates,
        }
    }

    pub fn record(&mut self, model: &str, input_tokens: u64, output_tokens: u64) {
        let u = self.usage.entry(model.to_string()).or_default();
        u.input_tokens += input_tokens;
        u.output_tokens += output_tokens;
        u.calls += 1;
    }

    pub fn call_count(&self) -> u64 {
        self.usage.values().map(|u| u.calls).sum()
    }

    pub fn total_input_tokens(&self) -> u64 {
        self.usage.values().map(|u| u.input_tokens).sum()
    }

    pub fn total_output_tokens(&self) -> u64 {
        self.usage.values().map(|u| u.output_tokens).sum()
    }

    pub fn cost(&self) -> f64 {
        self.usage
            .iter()
            .map(|(m, u)| cost_of(self.rates.rate(m), u.input_tokens, u.output_tokens))
            .sum()
    }
}

pub fn cost_of(rate: ModelRate, input_tokens: u64, output_tokens: u64) -> f64 {
    (input_tokens as f64 * rate.input + output_tokens as f64 * rate.output) / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_hand_computation() {
        let mut l = CostLedger::new(RateTable::default());
        l.record("opus", 1000, 200);
        assert!((l.cost() - 0.01).abs() < 1e-15);
        assert_eq!(l.call_count(), 1);
    }

    #[test]
    fn per_model_rates() {
        let mut rates = RateTable::default();
        rates.models.insert("small".into(), ModelRate { input: 1.0, output: 2.0 });
        let mut l = CostLedger::new(rates);
        l.record("small", 1_000_000, 1_000_000);
        l.record("big", 0, 0);
        assert!((l.cost() - 3.0).abs() < 1e-12);
        assert!(l.cost() >= 0.0);
    }
}
