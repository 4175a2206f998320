use std::collections::VecDeque;
use std::time::Instant;

/// Bounded ring of the most recent samples. Pushing past capacity evicts
/// the oldest samples; the producer never waits.
#[derive(Debug, Clone)]
pub struct StreamBuffer {
    ring: VecDeque<f64>,
    capacity: usize,
    sample_rate: u32,
    total: u64,
    /// `(index of first sample, arrival time)` per push, oldest first.
    arrivals: VecDeque<(u64, Instant)>,
}

impl StreamBuffer {
    pub fn new(capacity: usize, sample_rate: u32) -> Self {
        let capacity = capacity.max(1);
        Self { ring: VecDeque::with_capacity(capacity), capacity, sample_rate, total: 0, arrivals: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Samples consumed since creation (including evicted ones).
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn push(&mut self, samples: &[f64], arrived: Instant) {
        if samples.is_empty() {
            return;
        }
        self.arrivals.push_back((self.total, arrived));
        for &s in samples {
            if self.ring.len() == self.capacity {
                self.ring.pop_front();
            }
            self.ring.push_back(s);
        }
        self.total += samples.len() as u64;
        let oldest = self.total - self.ring.len() as u64;
        // keep the entry covering `oldest`, drop anything before it
        while self.arrivals.len() > 1 && self.arrivals[1].0 <= oldest {
            self.arrivals.pop_front();
        }
    }

    /// The newest `n` samples, oldest first.
    pub fn latest(&self, n: usize) -> Option<Vec<f64>> {
        if n > self.ring.len() {
            return None;
        }
        Some(self.ring.iter().skip(self.ring.len() - n).copied().collect())
    }

    /// When the sample with absolute index `index` arrived, if still held.
    pub fn arrival_of(&self, index: u64) -> Option<Instant> {
        let oldest = self.total - self.ring.len() as u64;
        if index < oldest || index >= self.total {
            return None;
        }
        self.arrivals.iter().rev().find(|(start, _)| *start <= index).map(|&(_, t)| t)
    }
}
