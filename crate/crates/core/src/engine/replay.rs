use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::rng::seeded;
use crate::{Error, Result};

pub const DEFAULT_PRIORITY_ALPHA: f64 = 0.1;

/// Fixed-capacity FIFO buffer sampled with probability `p_i^α / Σ_j p_j^α`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    records: VecDeque<T>,
    priorities: VecDeque<f64>,
    alpha: f64,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize, alpha: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("priority exponent {alpha} must be finite and ≥ 0")));
        }
        Ok(Self {
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
            priorities: VecDeque::with_capacity(capacity.min(1 << 16)),
            alpha,
            capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Appends a record, evicting the oldest when full.
    pub fn push(&mut self, record: T, priority: f64) -> Result<()> {
        check_priority(priority)?;
        if self.records.len() == self.capacity {
            self.records.pop_front();
            self.priorities.pop_front();
        }
        self.records.push_back(record);
        self.priorities.push_back(priority);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.records.get(index)
    }

    pub fn records(&self) -> impl Iterator<Item = &T> {
        self.records.iter()
    }

    pub fn priorities(&self) -> impl Iterator<Item = f64> + '_ {
        self.priorities.iter().copied()
    }

    pub fn max_priority(&self) -> f64 {
        self.priorities.iter().copied().fold(0.0, f64::max)
    }

    pub fn set_priority(&mut self, index: usize, priority: f64) -> Result<()> {
        check_priority(priority)?;
        let slot = self
            .priorities
            .get_mut(index)
            .ok_or_else(|| Error::Config(format!("replay index {index} out of range")))?;
        *slot = priority;
        Ok(())
    }

    /// Exact sampling distribution.
    pub fn sampling_probs(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let weights: Vec<f64> = self.priorities.iter().map(|p| p.powf(self.alpha)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroPriorityMass);
        }
        Ok(weights.into_iter().map(|w| w / total).collect())
    }

    /// Indices of `batch` draws with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        let probs = self.sampling_probs()?;
        let dist = WeightedIndex::new(&probs).map_err(|_| Error::ZeroPriorityMass)?;
        Ok((0..batch).map(|_| dist.sample(rng)).collect())
    }

    pub fn priority_sample(&self, batch: usize, seed: u64) -> Result<Vec<&T>> {
        let mut rng = seeded(seed);
        Ok(self
            .sample_indices(batch, &mut rng)?
            .into_iter()
            .map(|i| &self.records[i])
            .collect())
    }
}

fn check_priority(priority: f64) -> Result<()> {
    if priority >= 0.0 && priority.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("priority {priority} must be finite and ≥ 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2, 1.0).unwrap();
        for i in 0..3 {
            b.push(i, 1.0).unwrap();
        }
        assert_eq!(b.records().copied().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn empty_and_zero_mass() {
        let mut b: ReplayBuffer<u8> = ReplayBuffer::new(4, 1.0).unwrap();
        assert!(matches!(b.priority_sample(1, 0), Err(Error::EmptyBuffer)));
        b.push(1, 0.0).unwrap();
        assert!(matches!(b.priority_sample(1, 0), Err(Error::ZeroPriorityMass)));
    }

    #[test]
    fn alpha_zero_ignores_priorities() {
        let mut b = ReplayBuffer::new(4, 0.0).unwrap();
        b.push('a', 0.0).unwrap();
        b.push('b', 9.0).unwrap();
        assert_eq!(b.sampling_probs().unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_priority_never_sampled() {
        let mut b = ReplayBuffer::new(4, 1.0).unwrap();
        b.push(0, 0.0).unwrap();
        b.push(1, 1.0).unwrap();
        assert!(b.priority_sample(1000, 3).unwrap().iter().all(|&&r| r == 1));
    }

    #[test]
    fn rejects_negative_priority() {
        let mut b = ReplayBuffer::new(4, 1.0).unwrap();
        assert!(b.push(0, -1.0).is_err());
    }
}
