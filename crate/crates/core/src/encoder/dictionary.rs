//! FIFO dictionary of momentum-encoded keys.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::loss::Labels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyDictionary {
    entries: VecDeque<(Vec<f64>, Labels)>,
    capacity: usize,
}

impl KeyDictionary {
    pub fn new(capacity: usize) -> Self {
        Self { entries: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &(Vec<f64>, Labels)> {
        self.entries.iter()
    }

    /// Appends a batch, evicting the oldest entries beyond capacity. A batch
    /// larger than the capacity keeps only its newest entries. Returns the
    /// number of evicted or dropped keys.
    pub fn push(&mut self, batch: Vec<(Vec<f64>, Labels)>) -> usize {
        let mut dropped = 0;
        let mut batch = batch;
        if batch.len() > self.capacity {
            dropped = batch.len() - self.capacity;
            log::warn!("key batch of {} exceeds dictionary capacity {}; keeping the newest", batch.len(), self.capacity);
            batch.drain(..dropped);
        }
        for item in batch {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
                dropped += 1;
            }
            self.entries.push_back(item);
        }
        dropped
    }
}
