//! Identifier arithmetic on a ring of `K = 2^bits` points.

use std::fmt;

use crate::error::{Error, Result};

/// A point on the identifier ring.
///
/// The raw value is always reduced into `[0, K)` by the [`IdSpace`] that
/// produced it; an `Id` on its own carries no ring size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Id(pub u64);

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// The identifier space: `K = 2^bits` with `1 <= bits <= 64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IdSpace {
    bits: u32,
}

impl IdSpace {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 64 {
            return Err(Error::Config(format!("id bits must be in 1..=64, got {bits}")));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `K - 1`; all arithmetic is masked with this.
    pub fn mask(&self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    /// Ring size `K`.
    pub fn size(&self) -> u128 {
        1u128 << self.bits
    }

    pub fn id(&self, raw: u64) -> Id {
        Id(raw & self.mask())
    }

    /// Clockwise distance from `a` to `b`, i.e. `(b - a) mod K`.
    pub fn distance_cw(&self, a: Id, b: Id) -> u64 {
        b.0.wrapping_sub(a.0) & self.mask()
    }

    pub fn add(&self, a: Id, offset: u64) -> Id {
        Id(a.0.wrapping_add(offset) & self.mask())
    }

    pub fn sub(&self, a: Id, offset: u64) -> Id {
        Id(a.0.wrapping_sub(offset) & self.mask())
    }

    /// `2^exp mod K` (zero once the power reaches the ring size).
    pub fn pow2(&self, exp: u32) -> u64 {
        if exp >= self.bits {
            0
        } else {
            1u64 << exp
        }
    }

    /// True when `x` lies strictly inside the open arc `(a, b)`.
    pub fn between_open(&self, a: Id, x: Id, b: Id) -> bool {
        if a == b {
            return x != a;
        }
        let dx = self.distance_cw(a, x);
        dx != 0 && dx < self.distance_cw(a, b)
    }
}

/// Clockwise half-open arc `(start, end]`. `start == end` is the full ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KeyRange {
    pub start: Id,
    pub end: Id,
}

impl KeyRange {
    pub fn new(start: Id, end: Id) -> Self {
        Self { start, end }
    }

    pub fn full(at: Id) -> Self {
        Self { start: at, end: at }
    }

    pub fn is_full(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, space: &IdSpace, x: Id) -> bool {
        if self.is_full() {
            return true;
        }
        let dx = space.distance_cw(self.start, x);
        dx != 0 && dx <= space.distance_cw(self.start, self.end)
    }

    /// Number of identifiers in the arc.
    pub fn len(&self, space: &IdSpace) -> u128 {
        if self.is_full() {
            space.size()
        } else {
            space.distance_cw(self.start, self.end) as u128
        }
    }

    /// The same arc rotated clockwise by `offset`.
    pub fn shifted(&self, space: &IdSpace, offset: u64) -> Self {
        Self {
            start: space.add(self.start, offset),
            end: space.add(self.end, offset),
        }
    }
}
