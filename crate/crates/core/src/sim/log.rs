//! Per-run measurements.

use crate::alloc::mix64;
use crate::analysis::stats::MeanSe;
use crate::id::Id;
use crate::metrics::{Bandwidth, Category};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FetchRecord {
    pub launched: u64,
    /// Ticks from launch to the answer, or to giving up.
    pub latency: u64,
    pub probes: u32,
    pub hops: u32,
    pub attempts: u32,
    pub found: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossEvent {
    pub time: u64,
    pub key: Id,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsLog {
    pub seed: u64,
    /// One record per launched fetch, in launch order.
    pub fetches: Vec<FetchRecord>,
    /// Measured-period bandwidth by category.
    pub bandwidth: Bandwidth,
    /// Bytes of the items stored in the system at the start of the
    /// measured period.
    pub data_bytes: u64,
    /// Keys whose last copy disappeared with a failed node.
    pub losses: Vec<LossEvent>,
    /// Keys with no copy anywhere at the end of the run.
    pub lost_at_end: usize,
    pub failures: u64,
    pub joins: u64,
    pub warmup_rounds: u32,
    /// Servable stale replicas on location owners right after each update.
    pub stale_after_update: Vec<u32>,
    pub events: u64,
    /// Fold of every processed event; equal traces give equal hashes.
    pub trace_hash: u64,
}

impl MetricsLog {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            fetches: Vec::new(),
            bandwidth: Bandwidth::default(),
            data_bytes: 0,
            losses: Vec::new(),
            lost_at_end: 0,
            failures: 0,
            joins: 0,
            warmup_rounds: 0,
            stale_after_update: Vec::new(),
            events: 0,
            trace_hash: 0,
        }
    }

    pub fn trace(&mut self, words: &[u64]) {
        for w in words {
            self.trace_hash = mix64(self.trace_hash ^ w);
        }
        self.events += 1;
    }

    pub fn success_rate(&self) -> f64 {
        if self.fetches.is_empty() {
            return 1.0;
        }
        self.fetches.iter().filter(|f| f.found).count() as f64 / self.fetches.len() as f64
    }

    fn found<T>(&self, f: impl Fn(&FetchRecord) -> T) -> Vec<T> {
        self.fetches.iter().filter(|r| r.found).map(f).collect()
    }

    /// Latency of successful fetches, in ticks.
    pub fn latency(&self) -> MeanSe<f64> {
        MeanSe::of(&self.found(|r| r.latency as f64))
    }

    pub fn probes(&self) -> MeanSe<f64> {
        MeanSe::of(&self.found(|r| r.probes as f64))
    }

    pub fn hops(&self) -> MeanSe<f64> {
        MeanSe::of(&self.found(|r| r.hops as f64))
    }

    /// Maintenance data movement as a fraction of the data in the system.
    pub fn data_moved_fraction(&self) -> f64 {
        if self.data_bytes == 0 {
            return 0.0;
        }
        self.bandwidth.bytes(Category::DataMovement) as f64 / self.data_bytes as f64
    }

    pub fn overhead_bytes(&self) -> u64 {
        self.bandwidth.bytes(Category::MaintenanceOverhead)
    }
}

/// Mean and standard error of a per-run statistic across repeats.
pub fn across<F: Fn(&MetricsLog) -> f64>(logs: &[MetricsLog], f: F) -> MeanSe<f64> {
    MeanSe::of(&logs.iter().map(f).collect::<Vec<_>>())
}
