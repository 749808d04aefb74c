//! Bloom filter summaries exchanged by peripheral maintenance.

use crate::alloc::mix64;
use crate::id::Id;
use crate::metrics::HEADER_BYTES;

pub const DEFAULT_BITS_PER_ITEM: usize = 10;
pub const DEFAULT_HASHES: u32 = 7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomSummary {
    words: Vec<u64>,
    m_bits: usize,
    k: u32,
    inserted: usize,
}

impl BloomSummary {
    pub fn new(m_bits: usize, k: u32) -> Self {
        let m_bits = m_bits.max(1);
        Self {
            words: vec![0; m_bits.div_ceil(64)],
            m_bits,
            k: k.max(1),
            inserted: 0,
        }
    }

    /// Sized for `n` keys at the default 10 bits per item, k = 7.
    pub fn for_items(n: usize) -> Self {
        Self::new(n * DEFAULT_BITS_PER_ITEM, DEFAULT_HASHES)
    }

    pub fn from_keys<I: IntoIterator<Item = Id>>(keys: I, n_hint: usize) -> Self {
        let mut b = Self::for_items(n_hint);
        for k in keys {
            b.insert(k);
        }
        b
    }

    fn positions(&self, key: Id) -> impl Iterator<Item = usize> + '_ {
        let h1 = mix64(key.0 ^ 0x51_7cc1_b727_220a);
        let h2 = mix64(key.0 ^ 0x2545_f491_4f6c_dd1d) | 1;
        (0..self.k as u64).map(move |i| (h1.wrapping_add(i.wrapping_mul(h2)) % self.m_bits as u64) as usize)
    }

    pub fn insert(&mut self, key: Id) {
        let pos: Vec<usize> = self.positions(key).collect();
        for p in pos {
            self.words[p / 64] |= 1 << (p % 64);
        }
        self.inserted += 1;
    }

    pub fn contains(&self, key: Id) -> bool {
        self.positions(key).all(|p| self.words[p / 64] & (1 << (p % 64)) != 0)
    }

    pub fn inserted(&self) -> usize {
        self.inserted
    }

    pub fn m_bits(&self) -> usize {
        self.m_bits
    }

    pub fn hashes(&self) -> u32 {
        self.k
    }

    /// `(1 - e^(-k n / m))^k` for the current fill.
    pub fn expected_fp_rate(&self) -> f64 {
        let k = self.k as f64;
        (1.0 - (-k * self.inserted as f64 / self.m_bits as f64).exp()).powf(k)
    }

    /// Wire size: header plus the bit array.
    pub fn byte_size(&self) -> u64 {
        HEADER_BYTES + self.m_bits.div_ceil(8) as u64
    }
}
