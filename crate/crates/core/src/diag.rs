//! Runtime diagnostics counters.
//!
//! Counts the guarded events the model clamps instead of failing on:
//! gate clamping after explicit steps, reverse blood-ECS gradients,
//! phosphorylation-ratio saturation, volume floor hits, oxygen floors.
//! Atomic so per-node loops can share one instance; counts are totals and
//! never feed back into the dynamics.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct Diagnostics {
    pub gate_clamps: AtomicU64,
    pub reverse_flux_clamps: AtomicU64,
    pub ratio_saturations: AtomicU64,
    pub volume_floor_hits: AtomicU64,
    pub oxygen_floor_hits: AtomicU64,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> [u64; 5] {
        [
            self.gate_clamps.load(Ordering::Relaxed),
            self.reverse_flux_clamps.load(Ordering::Relaxed),
            self.ratio_saturations.load(Ordering::Relaxed),
            self.volume_floor_hits.load(Ordering::Relaxed),
            self.oxygen_floor_hits.load(Ordering::Relaxed),
        ]
    }

    pub fn restore(&self, snap: [u64; 5]) {
        self.gate_clamps.store(snap[0], Ordering::Relaxed);
        self.reverse_flux_clamps.store(snap[1], Ordering::Relaxed);
        self.ratio_saturations.store(snap[2], Ordering::Relaxed);
        self.volume_floor_hits.store(snap[3], Ordering::Relaxed);
        self.oxygen_floor_hits.store(snap[4], Ordering::Relaxed);
    }
}
