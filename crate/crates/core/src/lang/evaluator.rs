use serde::{Deserialize, Serialize};

use super::{DescriptionTable, RolloutDescription};
use crate::{Error, Result};

/// Ties within this margin count as optimal.
pub const DEFAULT_OPTIMALITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critique {
    pub optimal: bool,
    /// Estimated discounted return; the image of `g`.
    pub sentiment: f64,
    /// Futures the critique was formed from, with their aggregation weights.
    pub justifications: Vec<(RolloutDescription, f64)>,
}

impl Critique {
    /// Justifications as a sorted multiset, for comparing what two critiques
    /// say independently of the order they were produced in.
    pub fn justification_key(&self) -> Vec<(String, u64)> {
        let mut key: Vec<(String, u64)> = self
            .justifications
            .iter()
            .map(|(d, w)| (d.canonical(), w.to_bits()))
            .collect();
        key.sort();
        key
    }
}

/// The monotone map from critiques onto the reals.
pub fn scalarize_g(critique: &Critique) -> f64 {
    critique.sentiment
}

/// Aggregates sampled futures into a critique. The verdict compares the
/// action against the other actions at the same state under the model's
/// expected description values.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    model: &'a DescriptionTable,
    margin: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a DescriptionTable) -> Self {
        Self {
            model,
            margin: DEFAULT_OPTIMALITY_MARGIN,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn model(&self) -> &'a DescriptionTable {
        self.model
    }

    pub fn evaluate(
        &self,
        state: usize,
        action: usize,
        descriptions: &[RolloutDescription],
    ) -> Result<Critique> {
        let weight = 1.0 / descriptions.len().max(1) as f64;
        self.evaluate_weighted(
            state,
            action,
            descriptions.iter().map(|d| (d.clone(), weight)).collect(),
        )
    }

    pub fn evaluate_weighted(
        &self,
        state: usize,
        action: usize,
        justifications: Vec<(RolloutDescription, f64)>,
    ) -> Result<Critique> {
        if justifications.is_empty() {
            return Err(Error::NoDescriptions);
        }
        if state >= self.model.num_states() {
            return Err(Error::StateOutOfRange(state));
        }
        if action >= self.model.num_actions() {
            return Err(Error::ActionOutOfRange(action));
        }
        let total: f64 = justifications.iter().map(|(_, w)| w).sum();
        let sentiment = justifications.iter().map(|(d, w)| w * d.value()).sum::<f64>() / total;
        let own = self
            .model
            .get(state, action)
            .map_or(sentiment, |m| m.expected_value());
        let best_other = (0..self.model.num_actions())
            .filter(|&b| b != action)
            .filter_map(|b| self.model.get(state, b))
            .map(|m| m.expected_value())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Critique {
            optimal: best_other <= own + self.margin,
            sentiment,
            justifications,
        })
    }
}
