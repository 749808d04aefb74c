//! Scenario parameters.

use std::fmt;
use std::str::FromStr;

use crate::alloc::{AllocationConfig, AllocationKind};
use crate::dhash::DHashConfig;
use crate::dynamic::{DynamicConfig, UpdateMode};
use crate::error::{Error, Result};
use crate::id::IdSpace;
use crate::metrics::DEFAULT_ITEM_BYTES;

pub const SECOND: u64 = 10;
pub const MINUTE: u64 = 60 * SECOND;
pub const HOUR: u64 = 60 * MINUTE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    DHash,
    Dynamic(AllocationKind),
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::DHash,
        Algorithm::Dynamic(AllocationKind::Successor),
        Algorithm::Dynamic(AllocationKind::Predecessor),
        Algorithm::Dynamic(AllocationKind::Block),
        Algorithm::Dynamic(AllocationKind::Finger),
        Algorithm::Dynamic(AllocationKind::Random),
    ];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::DHash => f.write_str("dhash"),
            Algorithm::Dynamic(k) => write!(f, "dyn-{k}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "dhash" {
            return Ok(Algorithm::DHash);
        }
        s.strip_prefix("dyn-")
            .and_then(|k| k.parse().ok())
            .map(Algorithm::Dynamic)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChurnMode {
    None,
    /// Every node lives an exponential lifetime and is replaced shortly
    /// after it fails.
    Steady,
    /// One failure per lifetime-mean across the whole system, each
    /// followed by a replacement.
    SystemWide,
    /// A one-off simultaneous failure of this fraction of the nodes right
    /// after warm-up, with no replacements.
    Catastrophe(f64),
}

impl fmt::Display for ChurnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChurnMode::None => f.write_str("none"),
            ChurnMode::Steady => f.write_str("steady"),
            ChurnMode::SystemWide => f.write_str("system-wide"),
            ChurnMode::Catastrophe(x) => write!(f, "catastrophe:{x}"),
        }
    }
}

impl FromStr for ChurnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ChurnMode::None),
            "steady" => Ok(ChurnMode::Steady),
            "system-wide" => Ok(ChurnMode::SystemWide),
            _ => s
                .strip_prefix("catastrophe:")
                .and_then(|x| x.parse().ok())
                .map(ChurnMode::Catastrophe)
                .ok_or_else(|| Error::Config(format!("unknown churn mode `{s}`"))),
        }
    }
}

/// Everything one simulated run needs. Times are in ticks; one tick is one
/// message hop and [`SECOND`] ticks make a simulated second.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub nodes: usize,
    pub bits: u32,
    pub algorithm: Algorithm,
    /// DHash successors holding a copy besides the owner.
    pub replicas: u32,
    pub r_min: u32,
    pub r_max: u32,
    /// Maintenance runs per half life.
    pub maintenance_per_half_life: u32,
    pub items_per_node: usize,
    pub item_size: u32,
    pub churn: ChurnMode,
    pub fetches: usize,
    /// Version updates issued during the measured period (dynamic only).
    pub updates: usize,
    pub seed: u64,
    pub repeats: usize,
    pub lifetime_mean: u64,
    pub replacement_delay: u64,
    pub chord_repair_interval: u64,
    pub rtt_timeout: Option<u64>,
    pub recursive_timeout: Option<u64>,
    /// Fetch retries after the first attempt; `None` is unlimited.
    pub max_retries: Option<u32>,
    pub core_first: bool,
    pub remove_single: bool,
    pub update_mode: UpdateMode,
    pub overload_threshold: Option<u64>,
    /// Upper bound on warm-up maintenance rounds.
    pub warmup_rounds: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            nodes: 200,
            bits: 32,
            algorithm: Algorithm::DHash,
            replicas: 6,
            r_min: 7,
            r_max: 12,
            maintenance_per_half_life: 8,
            items_per_node: 50,
            item_size: DEFAULT_ITEM_BYTES,
            churn: ChurnMode::Steady,
            fetches: 50_000,
            updates: 0,
            seed: 1,
            repeats: 4,
            lifetime_mean: 24 * HOUR,
            replacement_delay: MINUTE,
            chord_repair_interval: 30 * MINUTE,
            rtt_timeout: None,
            recursive_timeout: None,
            max_retries: Some(8),
            core_first: true,
            remove_single: false,
            update_mode: UpdateMode::Fast { stop_after_empty: 2 },
            overload_threshold: None,
            warmup_rounds: 20,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.nodes < 2 {
            return bad("nodes must be at least 2");
        }
        if (self.nodes as u128) > IdSpace::new(self.bits)?.size() / 4 {
            return bad("ring too small for the node count");
        }
        if self.maintenance_per_half_life == 0 || self.items_per_node == 0 || self.item_size == 0 {
            return bad("maintenance rate, items per node and item size must be positive");
        }
        if self.repeats == 0 || self.replicas == 0 {
            return bad("repeats and replicas must be positive");
        }
        if self.lifetime_mean == 0 || self.chord_repair_interval == 0 {
            return bad("lifetime and repair interval must be positive");
        }
        if let ChurnMode::Catastrophe(f) = self.churn {
            if !(0.0..1.0).contains(&f) {
                return bad("catastrophe fraction must lie in [0, 1)");
            }
        }
        if let Algorithm::Dynamic(_) = self.algorithm {
            self.allocation()?;
        }
        Ok(())
    }

    pub fn space(&self) -> Result<IdSpace> {
        IdSpace::new(self.bits)
    }

    /// Time for half the nodes to be replaced.
    pub fn half_life(&self) -> u64 {
        match self.churn {
            ChurnMode::SystemWide => self.lifetime_mean * (self.nodes as u64 / 2).max(1),
            // N/2 replacements at an aggregate rate of N per mean lifetime.
            _ => self.lifetime_mean / 2,
        }
    }

    pub fn maintenance_interval(&self) -> u64 {
        (self.half_life() / self.maintenance_per_half_life as u64).max(1)
    }

    /// `(rtt timeout, recursive timeout)` in ticks.
    pub fn timeouts(&self) -> (u64, u64) {
        let (rtt, rec) = timeout_policy(self.nodes);
        (self.rtt_timeout.unwrap_or(rtt), self.recursive_timeout.unwrap_or(rec))
    }

    pub fn allocation(&self) -> Result<AllocationConfig> {
        let kind = match self.algorithm {
            Algorithm::Dynamic(k) => k,
            Algorithm::DHash => AllocationKind::Successor,
        };
        AllocationConfig::new(kind, self.space()?, self.nodes as u64, self.r_min, self.r_max)
    }

    pub fn dhash(&self) -> DHashConfig {
        DHashConfig {
            replicas: self.replicas,
        }
    }

    pub fn dynamic(&self) -> Result<DynamicConfig> {
        Ok(DynamicConfig {
            alloc: self.allocation()?,
            core_first: self.core_first,
            remove_single: self.remove_single,
            update_mode: self.update_mode,
            overload_threshold: self.overload_threshold,
        })
    }

    /// Seeds of the repeats, in order.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

/// RTT timeout of 3 hops and a recursive timeout of `round(2·log2 N)` hops.
pub fn timeout_policy(nodes: usize) -> (u64, u64) {
    let n = nodes.max(2) as f64;
    (3, (2.0 * n.log2()).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timeouts_follow_network_size() {
        assert_eq!(timeout_policy(200), (3, 15));
        assert_eq!(timeout_policy(2), (3, 2));
        assert_eq!(timeout_policy(400), (3, 17));
    }

    #[test]
    fn half_life_is_twelve_hours() {
        let c = ScenarioConfig::default();
        assert_eq!(c.half_life(), 12 * HOUR);
        assert_eq!(c.maintenance_interval(), 90 * MINUTE);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dyn-spiral".parse::<Algorithm>().is_err());
    }

    #[test]
    fn rejects_bad_catastrophe_fraction() {
        let c = ScenarioConfig {
            churn: ChurnMode::Catastrophe(1.0),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
