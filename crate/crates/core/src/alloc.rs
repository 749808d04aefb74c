//! Replica allocation functions `h(m, d)` for dynamic replication.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::id::{Id, IdSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllocationKind {
    Successor,
    Predecessor,
    Block,
    Finger,
    /// Keyed pseudo-random translation per index: `h(m, d) = d + PRF(m)`.
    Random,
}

impl AllocationKind {
    pub const ALL: [AllocationKind; 5] = [
        AllocationKind::Successor,
        AllocationKind::Predecessor,
        AllocationKind::Block,
        AllocationKind::Finger,
        AllocationKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AllocationKind::Successor => "successor",
            AllocationKind::Predecessor => "predecessor",
            AllocationKind::Block => "block",
            AllocationKind::Finger => "finger",
            AllocationKind::Random => "random",
        }
    }

    /// Kinds whose consecutive locations sit one node-spacing apart, and so
    /// need spare peripheral indices to absorb collisions.
    pub fn needs_collision_slack(self) -> bool {
        matches!(
            self,
            AllocationKind::Successor | AllocationKind::Predecessor | AllocationKind::Block
        )
    }
}

impl fmt::Display for AllocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AllocationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AllocationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown allocation kind `{s}`")))
    }
}

/// Smallest `R_MAX - R_MIN` that leaves room for collisions 95% of the time.
pub fn min_peripheral_slack(r_min: u32) -> u32 {
    (1.645 * (r_min as f64).sqrt()).ceil() as u32
}

/// SplitMix64 finalizer; the keyed pseudo-random function behind the
/// `random` kind and the Bloom filter hashes.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllocationConfig {
    pub kind: AllocationKind,
    pub space: IdSpace,
    /// Node-count estimate `N`, supplied by configuration.
    pub nodes: u64,
    pub r_min: u32,
    pub r_max: u32,
    /// Key of the pseudo-random function (random kind only).
    pub random_key: u64,
}

impl AllocationConfig {
    pub fn new(kind: AllocationKind, space: IdSpace, nodes: u64, r_min: u32, r_max: u32) -> Result<Self> {
        let cfg = Self {
            kind,
            space,
            nodes,
            r_min,
            r_max,
            random_key: 0x05ee_d0fa_110c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`AllocationConfig::new`] but without the collision-slack
    /// requirement (the reliability model sweeps `R_MAX = r`).
    pub fn unchecked(kind: AllocationKind, space: IdSpace, nodes: u64, r_min: u32, r_max: u32) -> Result<Self> {
        if nodes == 0 || r_min == 0 || r_min > r_max {
            return Err(Error::Config(format!(
                "need N >= 1 and 1 <= R_MIN <= R_MAX (N={nodes}, R_MIN={r_min}, R_MAX={r_max})"
            )));
        }
        Ok(Self {
            kind,
            space,
            nodes,
            r_min,
            r_max,
            random_key: 0x05ee_d0fa_110c,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::unchecked(self.kind, self.space, self.nodes, self.r_min, self.r_max)?;
        if self.kind.needs_collision_slack() && self.r_max - self.r_min < min_peripheral_slack(self.r_min) {
            return Err(Error::Config(format!(
                "{} allocation needs R_MAX - R_MIN >= {} for R_MIN = {}",
                self.kind,
                min_peripheral_slack(self.r_min),
                self.r_min
            )));
        }
        Ok(())
    }

    /// `⌊K/N⌋`.
    pub fn spacing(&self) -> u64 {
        (self.space.size() / self.nodes as u128).min(self.space.mask() as u128) as u64
    }

    /// `⌊K·R_MAX/N⌋`, the block length of block allocation.
    pub fn block_len(&self) -> u128 {
        self.space.size() * self.r_max as u128 / self.nodes as u128
    }

    /// `round(log2(K/N))`.
    pub fn finger_delta(&self) -> u32 {
        let d = self.space.bits() as f64 - (self.nodes as f64).log2();
        d.round().max(0.0) as u32
    }

    pub fn is_core(&self, m: u32) -> bool {
        m <= self.r_min
    }

    /// Replica location of index `m` for item `d`.
    pub fn allocate(&self, m: u32, d: Id) -> Id {
        let sp = &self.space;
        let s = self.spacing();
        match self.kind {
            AllocationKind::Successor => sp.add(d, s.wrapping_mul(m as u64)),
            AllocationKind::Predecessor => sp.sub(d, s.wrapping_mul(m as u64)),
            AllocationKind::Block => {
                let b = self.block_len();
                let dv = d.0 as u128;
                let base = dv - dv % b.max(1);
                let within = dv % s.max(1) as u128;
                let loc = (base + within + s as u128 * m as u128) % sp.size();
                Id(loc as u64)
            }
            AllocationKind::Finger => sp.add(d, sp.pow2(m + self.finger_delta())),
            AllocationKind::Random => sp.add(d, self.random_offset(m)),
        }
    }

    /// Keyed pseudo-random translation used by the random kind.
    pub fn random_offset(&self, m: u32) -> u64 {
        mix64(self.random_key ^ mix64(m as u64)) & self.space.mask()
    }

    /// Constant `c_m` with `h(m, d) = h(1, d) + c_m` for every `d`.
    pub fn offset_from_owner(&self, m: u32) -> u64 {
        let sp = &self.space;
        let s = self.spacing();
        let steps = (m as u64).wrapping_sub(1);
        match self.kind {
            AllocationKind::Successor | AllocationKind::Block => s.wrapping_mul(steps) & sp.mask(),
            AllocationKind::Predecessor => 0u64.wrapping_sub(s.wrapping_mul(steps)) & sp.mask(),
            AllocationKind::Finger => {
                let delta = self.finger_delta();
                sp.pow2(m + delta).wrapping_sub(sp.pow2(1 + delta)) & sp.mask()
            }
            AllocationKind::Random => self.random_offset(m).wrapping_sub(self.random_offset(1)) & sp.mask(),
        }
    }

    /// All candidate locations `(m, h(m, d))` for `m = 1..=R_MAX`.
    pub fn replica_locations(&self, d: Id) -> Vec<(u32, Id)> {
        (1..=self.r_max).map(|m| (m, self.allocate(m, d))).collect()
    }
}
