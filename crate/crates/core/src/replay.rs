//! Bounded FIFO sample buffer with uniform batch sampling, shared by the
//! quantile models and the agent.

use std::collections::VecDeque;

use rand::Rng;

/// Fixed-capacity FIFO buffer. Pushing past capacity evicts the oldest item.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    /// Uniform sample of `min(amount, len)` items without replacement.
    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R, amount: usize) -> Vec<T> {
        let k = amount.min(self.items.len());
        if k == 0 {
            return Vec::new();
        }
        rand::seq::index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}
