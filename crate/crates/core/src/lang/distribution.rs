use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RolloutDescription;
use crate::{Error, Result};

pub const DEFAULT_SUPPORT_CAP: usize = 4096;
pub const DESCRIPTION_SCHEMA_VERSION: u32 = 1;

const SUM_TOL: f64 = 1e-9;

/// Categorical distribution over rollout descriptions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<WeightedDescription>", into = "Vec<WeightedDescription>")]
pub struct DescriptionDistribution {
    support: BTreeMap<RolloutDescription, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedDescription {
    pub description: RolloutDescription,
    pub prob: f64,
}

impl DescriptionDistribution {
    pub fn point_mass(description: RolloutDescription) -> Self {
        Self {
            support: BTreeMap::from([(description, 1.0)]),
        }
    }

    /// Accumulates unnormalized weights; duplicates merge. Call
    /// [`normalize`](Self::normalize) afterwards.
    pub fn accumulate(&mut self, description: RolloutDescription, weight: f64) {
        if weight > 0.0 {
            *self.support.entry(description).or_insert(0.0) += weight;
        }
    }

    pub fn from_weighted(items: impl IntoIterator<Item = (RolloutDescription, f64)>) -> Result<Self> {
        let mut dist = Self::default();
        for (d, w) in items {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("invalid weight {w} for {d}")));
            }
            dist.accumulate(d, w);
        }
        dist.normalize()?;
        Ok(dist)
    }

    /// Empirical distribution of a sample.
    pub fn empirical(samples: impl IntoIterator<Item = RolloutDescription>) -> Result<Self> {
        Self::from_weighted(samples.into_iter().map(|d| (d, 1.0)))
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total: f64 = self.support.values().sum();
        if !(total > 0.0) {
            return Err(Error::Config("distribution has no mass".into()));
        }
        for p in self.support.values_mut() {
            *p /= total;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, description: &RolloutDescription) -> f64 {
        self.support.get(description).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RolloutDescription, f64)> {
        self.support.iter().map(|(d, &p)| (d, p))
    }

    pub fn total_mass(&self) -> f64 {
        self.support.values().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= SUM_TOL
    }

    /// Keeps the `cap` most probable descriptions and renormalizes. Returns
    /// the evicted mass, which bounds the total-variation change.
    pub fn cap_support(&mut self, cap: usize) -> f64 {
        if self.support.len() <= cap {
            return 0.0;
        }
        let mut ranked: Vec<(RolloutDescription, f64)> =
            std::mem::take(&mut self.support).into_iter().collect();
        // descending probability, canonical order breaks ties
        ranked.sort_by(|(da, pa), (db, pb)| pb.total_cmp(pa).then_with(|| da.cmp(db)));
        let evicted: f64 = ranked[cap..].iter().map(|(_, p)| p).sum();
        ranked.truncate(cap);
        self.support = ranked.into_iter().collect();
        let kept = 1.0 - evicted;
        if kept > 0.0 {
            for p in self.support.values_mut() {
                *p /= kept;
            }
        }
        evicted
    }

    /// `½ Σ |p − q|`.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut total = 0.0;
        for (d, p) in &self.support {
            total += (p - other.prob(d)).abs();
        }
        for (d, q) in &other.support {
            if !self.support.contains_key(d) {
                total += q;
            }
        }
        0.5 * total
    }

    /// `KL(self ‖ model) = Σ p log(p/q)`; infinite when `model` misses part
    /// of this distribution's support.
    pub fn kl_divergence(&self, model: &Self) -> f64 {
        let mut total = 0.0;
        for (d, &p) in &self.support {
            if p == 0.0 {
                continue;
            }
            let q = model.prob(d);
            if q == 0.0 {
                return f64::INFINITY;
            }
            total += p * (p / q).ln();
        }
        total.max(0.0)
    }

    /// `E[value(d)]`.
    pub fn expected_value(&self) -> f64 {
        self.support.iter().map(|(d, p)| p * d.value()).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &RolloutDescription {
        let u: f64 = rng.random::<f64>() * self.total_mass();
        let mut acc = 0.0;
        let mut last = None;
        for (d, p) in &self.support {
            acc += p;
            last = Some(d);
            if u < acc {
                return d;
            }
        }
        last.expect("sampling from an empty distribution")
    }

    /// First-step marginal as `(state, action) -> prob`.
    pub fn first_step_marginal(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for (d, p) in &self.support {
            if let Some(step) = d.steps().first() {
                *out.entry((step.state, step.action)).or_insert(0.0) += p;
            }
        }
        out
    }
}

impl TryFrom<Vec<WeightedDescription>> for DescriptionDistribution {
    type Error = Error;

    fn try_from(items: Vec<WeightedDescription>) -> Result<Self> {
        let mut support = BTreeMap::new();
        for item in items {
            if !(item.prob >= 0.0) {
                return Err(Error::Config(format!("negative probability for {}", item.description)));
            }
            if support.insert(item.description.clone(), item.prob).is_some() {
                return Err(Error::Config(format!("duplicate description {}", item.description)));
            }
        }
        let dist = Self { support };
        if !dist.is_normalized() {
            return Err(Error::Config(format!(
                "probabilities sum to {}",
                dist.total_mass()
            )));
        }
        Ok(dist)
    }
}

impl From<DescriptionDistribution> for Vec<WeightedDescription> {
    fn from(dist: DescriptionDistribution) -> Self {
        dist.support
            .into_iter()
            .map(|(description, prob)| WeightedDescription { description, prob })
            .collect()
    }
}

/// Successor model `M(·|s, a)` as one distribution per `(s, a)`; pairs
/// without data have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionTable {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    entries: Vec<Option<DescriptionDistribution>>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    schema_version: u32,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    entries: Vec<TableEntry>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    state: usize,
    action: usize,
    support: DescriptionDistribution,
}

impl DescriptionTable {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            num_states,
            num_actions,
            horizon,
            entries: vec![None; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, state: usize, action: usize) -> Option<&DescriptionDistribution> {
        self.entries
            .get(state * self.num_actions + action)
            .and_then(Option::as_ref)
    }

    pub fn require(&self, state: usize, action: usize) -> Result<&DescriptionDistribution> {
        self.get(state, action)
            .ok_or(Error::MissingModelEntry { state, action })
    }

    pub fn set(&mut self, state: usize, action: usize, dist: DescriptionDistribution) {
        self.entries[state * self.num_actions + action] = Some(dist);
    }

    /// Defined pairs in `(state, action)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, &DescriptionDistribution)> {
        self.entries.iter().enumerate().filter_map(|(i, e)| {
            e.as_ref()
                .map(|d| (i / self.num_actions, i % self.num_actions, d))
        })
    }

    /// Largest per-pair total-variation distance over pairs defined in both.
    pub fn max_tv_distance(&self, other: &Self) -> f64 {
        self.pairs()
            .filter_map(|(s, a, d)| other.get(s, a).map(|o| d.tv_distance(o)))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TableFile {
            schema_version: DESCRIPTION_SCHEMA_VERSION,
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            entries: self
                .pairs()
                .map(|(state, action, d)| TableEntry {
                    state,
                    action,
                    support: d.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text)?;
        if file.schema_version != DESCRIPTION_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: file.schema_version,
                expected: DESCRIPTION_SCHEMA_VERSION,
            });
        }
        let mut table = Self::new(file.num_states, file.num_actions, file.horizon);
        for entry in file.entries {
            if entry.state >= file.num_states {
                return Err(Error::StateOutOfRange(entry.state));
            }
            if entry.action >= file.num_actions {
                return Err(Error::ActionOutOfRange(entry.action));
            }
            table.set(entry.state, entry.action, entry.support);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Combinator;
    use crate::mdp::{random_mdp, RandomMdpSpec};

    fn descriptions(n: usize) -> Vec<RolloutDescription> {
        let mdp = random_mdp(&RandomMdpSpec::new(6, 2, 2, 0.5, 1)).unwrap();
        let b = Combinator::new(&mdp, 2).unwrap();
        (0..n).map(|i| b.combine(i as f64, i % 5, 0, &b.empty())).collect()
    }

    #[test]
    fn cap_evicts_lowest_and_renormalizes() {
        let ds = descriptions(4);
        let mut dist = DescriptionDistribution::from_weighted(
            ds.iter().cloned().zip([0.4, 0.3, 0.2, 0.1]),
        )
        .unwrap();
        let evicted = dist.cap_support(2);
        assert!((evicted - 0.3).abs() < 1e-15);
        assert_eq!(dist.len(), 2);
        assert!((dist.prob(&ds[0]) - 0.4 / 0.7).abs() < 1e-15);
        assert!(dist.is_normalized());
    }

    #[test]
    fn tv_of_disjoint_is_one() {
        let ds = descriptions(2);
        let a = DescriptionDistribution::point_mass(ds[0].clone());
        let b = DescriptionDistribution::point_mass(ds[1].clone());
        assert_eq!(a.tv_distance(&b), 1.0);
        assert_eq!(a.tv_distance(&a), 0.0);
    }

    #[test]
    fn table_json_round_trip() {
        let ds = descriptions(3);
        let mut table = DescriptionTable::new(6, 2, 2);
        table.set(
            1,
            0,
            DescriptionDistribution::from_weighted(ds.iter().cloned().zip([0.5, 0.25, 0.25])).unwrap(),
        );
        table.set(4, 1, DescriptionDistribution::point_mass(ds[2].clone()));
        let text = table.to_json().unwrap();
        assert_eq!(DescriptionTable::from_json(&text).unwrap(), table);
    }

    #[test]
    fn rejects_unnormalized_support() {
        let ds = descriptions(2);
        let items = vec![
            WeightedDescription { description: ds[0].clone(), prob: 0.5 },
            WeightedDescription { description: ds[1].clone(), prob: 0.4 },
        ];
        assert!(DescriptionDistribution::try_from(items).is_err());
    }
}
