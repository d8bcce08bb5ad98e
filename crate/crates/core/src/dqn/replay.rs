use std::sync::Arc;

use rand::Rng;

use super::TrainError;

/// One environment transition. Observations are shared between
/// consecutive transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<O> {
    pub observation: Arc<O>,
    pub action: usize,
    pub reward: f64,
    pub next_observation: Arc<O>,
    /// Goal reached; the target does not bootstrap.
    pub done: bool,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<O> {
    items: Vec<Transition<O>>,
    capacity: usize,
    inserted: u64,
}

impl<O> ReplayBuffer<O> {
    pub fn new(capacity: usize) -> Result<Self, TrainError> {
        if capacity == 0 {
            return Err(TrainError::Config("replay capacity must be positive".into()));
        }
        Ok(Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, inserted: 0 })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition<O>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = t;
        }
        self.inserted += 1;
    }

    /// Entries from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition<O>> {
        let start = if self.items.len() < self.capacity { 0 } else { (self.inserted % self.capacity as u64) as usize };
        self.items[start..].iter().chain(self.items[..start].iter())
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<&Transition<O>>, TrainError> {
        if n == 0 || self.items.len() < n {
            return Err(TrainError::NotReady { have: self.items.len(), need: n.max(1) });
        }
        Ok((0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }
}
