//! Monte Carlo model of data loss under a mass failure, per allocation
//! function.
//!
//! Each sample places `nodes` uniform IDs on the ring and marks `failed` of
//! them dead. A key is lost when every one of its `r` replica locations
//! `h(1, d) .. h(r, d)` falls in keyspace owned by a dead node. Loss is
//! evaluated exactly over the whole keyspace by intersecting arc sets, so
//! the lost quantity is a fraction of the keyspace rather than a count of
//! sampled items.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alloc::{mix64, AllocationConfig, AllocationKind};
use crate::analysis::stats::{MeanSe, Proportion, Z95};
use crate::error::{Error, Result};
use crate::id::{Id, IdSpace};

/// Disjoint half-open intervals `[start, end)` sorted by start.
type Arcs = Vec<(u128, u128)>;

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementModel {
    pub nodes: u32,
    pub failed: u32,
    pub kind: AllocationKind,
    pub r: u32,
    pub bits: u32,
    pub samples: u64,
    pub seed: u64,
}

/// Shared sampled networks evaluated for several kinds and replica counts.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementSweep {
    pub nodes: u32,
    pub failed: u32,
    pub bits: u32,
    pub kinds: Vec<AllocationKind>,
    pub rs: Vec<u32>,
    pub samples: u64,
    pub seed: u64,
}

impl Default for PlacementSweep {
    fn default() -> Self {
        Self {
            nodes: 500,
            failed: 250,
            bits: 32,
            kinds: vec![
                AllocationKind::Block,
                AllocationKind::Successor,
                AllocationKind::Finger,
                AllocationKind::Random,
            ],
            rs: (1..=24).collect(),
            samples: 100_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementLoss {
    pub kind: AllocationKind,
    pub r: u32,
    /// Probability that any data is lost (Wilson 95% interval).
    pub loss: Proportion<f64>,
    /// Fraction of keyspace lost, over the samples that lost anything.
    pub lost_fraction: MeanSe<f64>,
}

pub fn placement_loss_model(model: &PlacementModel) -> Result<PlacementLoss> {
    let sweep = PlacementSweep {
        nodes: model.nodes,
        failed: model.failed,
        bits: model.bits,
        kinds: vec![model.kind],
        rs: vec![model.r],
        samples: model.samples,
        seed: model.seed,
    };
    Ok(placement_sweep(&sweep)?.remove(0))
}

#[derive(Clone, Debug, Default)]
struct Acc {
    failures: u64,
    sum: f64,
    sumsq: f64,
}

/// Results in `kinds × rs` order.
pub fn placement_sweep(sweep: &PlacementSweep) -> Result<Vec<PlacementLoss>> {
    if sweep.failed > sweep.nodes || sweep.nodes < 2 {
        return Err(Error::Config(format!(
            "need 2 <= nodes and failed <= nodes (nodes={}, failed={})",
            sweep.nodes, sweep.failed
        )));
    }
    if sweep.rs.is_empty() || sweep.rs.contains(&0) || sweep.kinds.is_empty() {
        return Err(Error::Config("need at least one kind and replica counts >= 1".into()));
    }
    let space = IdSpace::new(sweep.bits)?;
    if (sweep.nodes as u128) > space.size() {
        return Err(Error::Config("more nodes than identifiers".into()));
    }
    let mut rs = sweep.rs.clone();
    rs.sort_unstable();
    rs.dedup();
    let cells = sweep.kinds.len() * rs.len();

    const CHUNK: u64 = 512;
    let chunks: Vec<u64> = (0..sweep.samples.div_ceil(CHUNK)).collect();
    let partials: Vec<Vec<Acc>> = chunks
        .par_iter()
        .map(|&c| {
            let mut acc = vec![Acc::default(); cells];
            let end = ((c + 1) * CHUNK).min(sweep.samples);
            for i in c * CHUNK..end {
                sample_once(sweep, &space, &rs, i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![Acc::default(); cells];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.failures += p.failures;
            t.sum += p.sum;
            t.sumsq += p.sumsq;
        }
    }

    let mut out = Vec::with_capacity(cells);
    for (ki, &kind) in sweep.kinds.iter().enumerate() {
        for (ri, &r) in rs.iter().enumerate() {
            let a = &total[ki * rs.len() + ri];
            out.push(PlacementLoss {
                kind,
                r,
                loss: Proportion::wilson(a.failures, sweep.samples, Z95),
                lost_fraction: MeanSe::from_moments(a.failures as usize, a.sum, a.sumsq),
            });
        }
    }
    // keep the caller's r order
    if rs != sweep.rs {
        let mut ordered = Vec::with_capacity(cells);
        for &kind in &sweep.kinds {
            for &r in &sweep.rs {
                ordered.push(out.iter().find(|x| x.kind == kind && x.r == r).expect("cell").clone());
            }
        }
        return Ok(ordered);
    }
    Ok(out)
}

fn sample_once(sweep: &PlacementSweep, space: &IdSpace, rs: &[u32], i: u64, acc: &mut [Acc]) {
    let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed);
    rng.set_stream(i);
    let n = sweep.nodes as usize;
    let mut ids: Vec<u64> = Vec::with_capacity(n);
    while ids.len() < n {
        while ids.len() < n {
            ids.push(rng.random::<u64>() & space.mask());
        }
        ids.sort_unstable();
        ids.dedup();
    }
    let mut dead = vec![false; n];
    for j in sample(&mut rng, n, sweep.failed as usize) {
        dead[j] = true;
    }
    let k = space.size();
    let failed = failed_arcs(&ids, &dead, k);
    let total_failed: u128 = measure(&failed);

    for (ki, &kind) in sweep.kinds.iter().enumerate() {
        let row = &mut acc[ki * rs.len()..(ki + 1) * rs.len()];
        let mut record = |ri: usize, lost: u128| {
            if lost > 0 {
                let f = lost as f64 / k as f64;
                row[ri].failures += 1;
                row[ri].sum += f;
                row[ri].sumsq += f * f;
            }
        };
        if total_failed == 0 {
            continue;
        }
        match kind {
            AllocationKind::Block => {
                for (ri, &r) in rs.iter().enumerate() {
                    let cfg = AllocationConfig::unchecked(kind, *space, sweep.nodes as u64, r, r).expect("valid");
                    record(ri, block_loss(&cfg, &failed, r));
                }
            }
            _ => {
                let mut cfg =
                    AllocationConfig::unchecked(kind, *space, sweep.nodes as u64, 1, *rs.last().expect("non-empty"))
                        .expect("valid");
                cfg.random_key = mix64(sweep.seed ^ mix64(i));
                let offset = |m: u32| cfg.allocate(m, Id(0)).0 as u128;
                let mut lost = rotate(&failed, offset(1), k);
                let mut m = 1;
                for (ri, &r) in rs.iter().enumerate() {
                    while m < r && !lost.is_empty() {
                        m += 1;
                        lost = intersect(&lost, &rotate(&failed, offset(m), k));
                    }
                    record(ri, measure(&lost));
                }
            }
        }
    }
}

/// Keyspace owned by dead nodes. Node `j` owns `(ids[j-1], ids[j]]`.
fn failed_arcs(ids: &[u64], dead: &[bool], k: u128) -> Arcs {
    let n = ids.len();
    let mut arcs: Arcs = Vec::new();
    let push = |a: u128, b: u128, arcs: &mut Arcs| {
        if a >= b {
            return;
        }
        match arcs.last_mut() {
            Some(last) if last.1 == a => last.1 = b,
            _ => arcs.push((a, b)),
        }
    };
    for j in 0..n {
        if !dead[j] {
            continue;
        }
        let lo = if j == 0 { 0 } else { ids[j - 1] as u128 + 1 };
        push(lo, ids[j] as u128 + 1, &mut arcs);
    }
    // the wrapped part of the first node's range
    if dead[0] {
        let lo = ids[n - 1] as u128 + 1;
        if lo < k {
            push(lo, k, &mut arcs);
        }
    }
    arcs
}

/// `{x - offset mod k : x in arcs}`.
fn rotate(arcs: &Arcs, offset: u128, k: u128) -> Arcs {
    let offset = offset % k;
    let mut out: Arcs = Vec::with_capacity(arcs.len() + 1);
    for &(a, b) in arcs {
        let na = (a + k - offset) % k;
        let nb = na + (b - a);
        if nb > k {
            out.push((na, k));
            out.push((0, nb - k));
        } else {
            out.push((na, nb));
        }
    }
    out.sort_unstable();
    let mut merged: Arcs = Vec::with_capacity(out.len());
    for (a, b) in out {
        match merged.last_mut() {
            Some(last) if last.1 >= a => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

fn intersect(a: &Arcs, b: &Arcs) -> Arcs {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn measure(a: &Arcs) -> u128 {
    a.iter().map(|(x, y)| y - x).sum()
}

/// Part of `arcs` inside `[x, x + len)` (mod k), relative to `x`.
fn window(arcs: &Arcs, x: u128, len: u128, k: u128) -> Arcs {
    let mut out = Vec::new();
    let take = |lo: u128, hi: u128, shift: u128, out: &mut Arcs| {
        let start = arcs.partition_point(|&(_, b)| b <= lo);
        for &(a, b) in &arcs[start..] {
            if a >= hi {
                break;
            }
            out.push((a.max(lo) - lo + shift, b.min(hi) - lo + shift));
        }
    };
    if x + len <= k {
        take(x, x + len, 0, &mut out);
    } else {
        take(x, k, 0, &mut out);
        take(0, x + len - k, k - x, &mut out);
    }
    out
}

/// `#{d in [lo, hi) : d mod s in [u0, u1)}`.
fn count_residues(lo: u128, hi: u128, s: u128, u0: u128, u1: u128) -> u128 {
    let upto = |x: u128| (x / s) * (u1 - u0) + (x % s).clamp(u0, u1) - u0;
    upto(hi) - upto(lo)
}

/// Keys lost under block allocation with `R_MAX = r`. Within one block the
/// locations depend only on `u = d mod K/N`: `base + u + m·K/N`.
fn block_loss(cfg: &AllocationConfig, failed: &Arcs, r: u32) -> u128 {
    let k = cfg.space.size();
    let s = cfg.spacing() as u128;
    let b = cfg.block_len().max(1);
    let mut lost = 0u128;
    let mut base = 0u128;
    while base < k {
        let block_end = (base + b).min(k);
        let mut u: Arcs = vec![(0, s)];
        for m in 1..=r {
            let w = window(failed, (base + m as u128 * s) % k, s, k);
            u = intersect(&u, &w);
            if u.is_empty() {
                break;
            }
        }
        for (u0, u1) in u {
            lost += count_residues(base, block_end, s, u0, u1);
        }
        base += b;
    }
    lost
}
