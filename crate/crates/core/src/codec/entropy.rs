//! Order-0 code-length estimates.

use std::collections::HashMap;

#[derive(Debug, Clone, Default)]
pub struct Histogram {
    counts: HashMap<i32, u64>,
    total: u64,
}

impl Histogram {
    pub fn add(&mut self, symbol: i32) {
        *self.counts.entry(symbol).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn extend(&mut self, symbols: impl IntoIterator<Item = i32>) {
        for s in symbols {
            self.add(s);
        }
    }

    /// Ideal code length of one occurrence of `symbol`, in bits.
    pub fn cost(&self, symbol: i32) -> f64 {
        let count = self.counts.get(&symbol).copied().unwrap_or(0);
        if count == 0 || self.total == 0 {
            return f64::INFINITY;
        }
        (self.total as f64 / count as f64).log2()
    }
}

/// Rounds an accumulated code length up to whole bits, ignoring
/// floating-point noise just above an integer.
pub fn whole_bits(length: f64) -> u64 {
    (length - 1e-9).ceil().max(0.0) as u64
}
