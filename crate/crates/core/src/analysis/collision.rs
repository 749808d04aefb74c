//! Keyspace spanned by consecutive nodes, and the bound used to size the
//! peripheral group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::stats::{Proportion, Z95};
use crate::scalar::Real;

/// One-sided 95% normal quantile.
pub const Z_ONE_SIDED_95: f64 = 1.645;

/// `(r + z·sqrt(r))·K/N`: keyspace covered by `r` consecutive nodes is
/// below this with the confidence that `z` encodes.
pub fn collision_bound_z<T: Real>(r: u32, k: T, n: T, z: T) -> T {
    let r = T::from_count(r as u64);
    (r + z * r.sqrt()) * k / n
}

/// [`collision_bound_z`] at 95%.
pub fn collision_bound<T: Real>(r: u32, k: T, n: T) -> T {
    collision_bound_z(r, k, n, T::lit(Z_ONE_SIDED_95))
}

/// Monte Carlo coverage of the 95% bound: the fraction of windows of `r`
/// consecutive inter-node gaps whose total is within the bound, over
/// uniformly placed rings of `n` nodes in a `2^bits` space.
///
/// Every node of each sampled ring starts one window, so `trials` windows
/// come from `ceil(trials / n)` rings.
pub fn collision_coverage(r: u32, n: u32, bits: u32, trials: u64, seed: u64) -> Proportion<f64> {
    assert!(n >= 2 && (r as usize) < n as usize && bits <= 64);
    let k = 2f64.powi(bits as i32);
    let bound = collision_bound(r, k, n as f64);
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = vec![0u64; n as usize];
    let (mut inside, mut total) = (0u64, 0u64);
    while total < trials {
        for x in ids.iter_mut() {
            *x = rng.random::<u64>() & mask;
        }
        ids.sort_unstable();
        for i in 0..n as usize {
            if total == trials {
                break;
            }
            let j = (i + r as usize) % n as usize;
            let span = ids[j].wrapping_sub(ids[i]) & mask;
            if (span as f64) <= bound {
                inside += 1;
            }
            total += 1;
        }
    }
    Proportion::wilson(inside, total, Z95)
}
