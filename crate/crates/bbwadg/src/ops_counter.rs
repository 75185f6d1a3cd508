//! Global multiply-add counters for the complexity benchmarks and the
//! setup/loop separation checks.

use std::sync::atomic::{AtomicU64, Ordering};

pub struct Counter(AtomicU64);

impl Counter {
    pub const fn new() -> Self {
        Self(AtomicU64::new(0))
    }

    #[inline]
    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Multiply-adds spent in quadrature-based weight-adjusted applies.
pub static ORACLE_APPLY: Counter = Counter::new();
/// Multiply-adds spent in Bernstein polynomial multiplication.
pub static FAST_MULTIPLY: Counter = Counter::new();
/// Multiply-adds spent in telescoping projection applies.
pub static FAST_PROJECT: Counter = Counter::new();
/// Number of material projection calls (must stay flat during time loops).
pub static MATERIAL_PROJECTIONS: Counter = Counter::new();

pub fn reset_all() {
    ORACLE_APPLY.reset();
    FAST_MULTIPLY.reset();
    FAST_PROJECT.reset();
    MATERIAL_PROJECTIONS.reset();
}
