//! Instrumentation for squared-distance evaluations.
//!
//! A distance evaluation is the unit of computational cost reported by every
//! fit in this crate. Each computation of `||y - mu||^2` against a cluster
//! centre bumps a counter by exactly one, whether it happens during seeding,
//! an E-step, the variance update, or a flagged metric evaluation.

/// Monotone tally of squared-distance evaluations.
///
/// Parallel passes keep one tally per chunk and merge them in chunk order, so
/// totals are identical regardless of worker count.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct DistanceCounter {
    count: u64,
}

impl DistanceCounter {
    pub const fn new() -> Self {
        Self { count: 0 }
    }

    /// Records a single distance evaluation.
    #[inline]
    pub fn record(&mut self) {
        self.count += 1;
    }

    /// Adds a batch of evaluations, e.g. a per-chunk tally.
    #[inline]
    pub fn add(&mut self, n: u64) {
        self.count += n;
    }

    /// Merges another counter into this one.
    pub fn merge(&mut self, other: DistanceCounter) {
        self.count += other.count;
    }

    /// Total evaluations recorded since construction or the last reset.
    pub fn total(&self) -> u64 {
        self.count
    }

    pub fn reset(&mut self) {
        self.count = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_monotone_and_mergeable() {
        let mut a = DistanceCounter::new();
        a.record();
        a.record();
        assert_eq!(a.total(), 2);

        let mut b = DistanceCounter::new();
        b.add(40);
        a.merge(b);
        assert_eq!(a.total(), 42);

        a.reset();
        assert_eq!(a.total(), 0);
    }
}
