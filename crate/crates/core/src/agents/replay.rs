use std::collections::VecDeque;

use rand::Rng;

use crate::env::Experience;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferKind {
    Main,
    Side,
}

impl BufferKind {
    pub fn default_capacity(self) -> usize {
        match self {
            BufferKind::Main => 12_000,
            BufferKind::Side => 192_000,
        }
    }
}

/// Bounded FIFO experience store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T = Experience> {
    kind: BufferKind,
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(kind: BufferKind, capacity: usize) -> Self {
        Self {
            kind,
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn with_default_capacity(kind: BufferKind) -> Self {
        Self::new(kind, kind.default_capacity())
    }

    pub fn kind(&self) -> BufferKind {
        self.kind
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends `item`, evicting the oldest entry when full.
    pub fn push(&mut self, item: T) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `n` items drawn uniformly with replacement; empty if the buffer is.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}
