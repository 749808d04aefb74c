//! Dynamic replication by replica enumeration.
//!
//! Replica `m` of item `d` lives on the owner of location `h(m, d)`. The
//! owner of `h(1, d)` owns the item. Indices up to `R_MIN` form the core
//! group, which the owner keeps filled; indices above it are peripheral and
//! each one must be backed by a replica at the index below it, or it is
//! marked orphaned and later dropped.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::alloc::AllocationConfig;
use crate::bloom::BloomSummary;
use crate::error::{Error, Result};
use crate::fetch::FetchOutcome;
use crate::id::{Id, IdSpace, KeyRange};
use crate::metrics::{transfer_bytes, Bandwidth, Category, Message, MessageKind, HEADER_BYTES, NODE_REF_BYTES};
use crate::ring::{Ring, RouteEnd, RouteSpec};
use crate::store::DataItem;
use crate::sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// Offer to every location up to `R_MAX`.
    Strict,
    /// Stop after this many consecutive empty peripheral locations.
    Fast { stop_after_empty: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DynamicConfig {
    pub alloc: AllocationConfig,
    /// Try every core index before any peripheral one.
    pub core_first: bool,
    /// On a peripheral miss drop only that index instead of it and all
    /// higher ones.
    pub remove_single: bool,
    pub update_mode: UpdateMode,
    /// Requests a node answers per load window before it starts forwarding
    /// gets for locations it does not own. `None` disables forwarding.
    pub overload_threshold: Option<u64>,
}

impl DynamicConfig {
    pub fn new(alloc: AllocationConfig) -> Self {
        Self {
            alloc,
            core_first: true,
            remove_single: false,
            update_mode: UpdateMode::Fast { stop_after_empty: 2 },
            overload_threshold: None,
        }
    }
}

/// Gets answered per node in the current load window.
#[derive(Clone, Debug, Default)]
pub struct LoadTracker {
    served: HashMap<Id, u64>,
}

impl LoadTracker {
    pub fn served(&self, n: Id) -> u64 {
        self.served.get(&n).copied().unwrap_or(0)
    }

    pub fn record(&mut self, n: Id) {
        *self.served.entry(n).or_default() += 1;
    }

    pub fn reset(&mut self) {
        self.served.clear();
    }
}

/// Owner of `loc` and the arc it is believed to own, as seen from `n`:
/// own range, successor list, maintenance cache, then a cached iterative
/// lookup. References found dead are forgotten and the search repeated.
fn owner_arc(ring: &mut Ring, n: Id, loc: Id, bw: &mut Bandwidth) -> Result<Option<(Id, KeyRange)>> {
    let space = *ring.space();
    for _ in 0..8 {
        let node = ring.node(n).ok_or(Error::DeadNode(n))?;
        if node.owns(&space, loc) {
            let arc = node.range().unwrap_or_else(|| KeyRange::new(space.sub(n, 1), n));
            return Ok(Some((n, arc)));
        }
        let mut found = None;
        let mut prev = n;
        for &s in &node.successors {
            let arc = KeyRange::new(prev, s);
            if arc.contains(&space, loc) {
                found = Some((s, arc));
                break;
            }
            prev = s;
        }
        if found.is_none() {
            found = node.cache.get_arc(&space, loc).map(|(o, p)| (o, KeyRange::new(p, o)));
        }
        let (o, arc) = match found {
            Some(f) => f,
            None => match ring.find_successor(n, loc, bw, Category::MaintenanceOverhead) {
                Ok(r) => {
                    let arc = match r.owner_pred {
                        Some(p) => {
                            ring.node_mut(n).expect("live").cache.insert(r.owner, p);
                            KeyRange::new(p, r.owner)
                        }
                        None => KeyRange::new(space.sub(loc, 1), r.owner),
                    };
                    (r.owner, arc)
                }
                Err(_) => return Ok(None),
            },
        };
        if ring.is_alive(o) {
            return Ok(Some((o, arc)));
        }
        ring.node_mut(n).expect("live").forget(o);
    }
    Ok(None)
}

/// Splits the image of `range` under a shift by `c` into pieces by owner.
/// Pieces are `(lo, hi, owner)` in offsets from `range.start`, covering
/// `(0, len]`; `None` marks a part whose owner could not be found.
fn image_pieces(
    ring: &mut Ring,
    n: Id,
    range: KeyRange,
    len: u128,
    c: u64,
    bw: &mut Bandwidth,
) -> Result<Vec<(u128, u128, Option<Id>)>> {
    let space = *ring.space();
    let start = space.add(range.start, c);
    let limit = 4 * ring.len() + 8;
    let mut out = Vec::new();
    let mut pos = 0u128;
    while pos < len {
        let loc = space.add(start, ((pos + 1) % space.size()) as u64);
        if out.len() > limit {
            out.push((pos, len, None));
            break;
        }
        match owner_arc(ring, n, loc, bw)? {
            None => {
                out.push((pos, len, None));
                break;
            }
            Some((o, arc)) => {
                let hi = if arc.is_full() {
                    len
                } else {
                    (pos + space.distance_cw(loc, o) as u128 + 1).min(len)
                };
                out.push((pos, hi, Some(o)));
                pos = hi;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Segment {
    lo: u128,
    hi: u128,
    holders: Vec<Id>,
}

/// Offset of `loc` inside `range`, in `1..=len`.
fn offset_in(space: &IdSpace, range: &KeyRange, len: u128, loc: Id) -> u128 {
    let d = space.distance_cw(range.start, loc) as u128;
    if d == 0 {
        len
    } else {
        d
    }
}

/// Core holders of `n`'s range, one list per segment of the range. Indices
/// are taken in order and an index whose holder is already in the list is
/// skipped, so a collision pushes the group into the peripheral indices
/// until it has `R_MIN` distinct holders or `R_MAX` is reached.
fn core_segments(
    ring: &mut Ring,
    cfg: &DynamicConfig,
    n: Id,
    range: KeyRange,
    bw: &mut Bandwidth,
) -> Result<Vec<Segment>> {
    let a = cfg.alloc;
    let space = *ring.space();
    let len = range.len(&space);
    let need = a.r_min as usize;
    let mut segs = vec![Segment {
        lo: 0,
        hi: len,
        holders: vec![n],
    }];
    for m in 2..=a.r_max {
        if segs.iter().all(|s| s.holders.len() >= need) {
            break;
        }
        let pieces = image_pieces(ring, n, range, len, a.offset_from_owner(m), bw)?;
        let mut next: Vec<Segment> = Vec::with_capacity(segs.len() + pieces.len());
        for seg in segs {
            if seg.holders.len() >= need {
                next.push(seg);
                continue;
            }
            for &(plo, phi, h) in &pieces {
                let (lo, hi) = (seg.lo.max(plo), seg.hi.min(phi));
                if lo >= hi {
                    continue;
                }
                let mut holders = seg.holders.clone();
                if let Some(h) = h.filter(|h| !holders.contains(h)) {
                    holders.push(h);
                }
                match next.last_mut() {
                    Some(last) if last.hi == lo && last.holders == holders => last.hi = hi,
                    _ => next.push(Segment { lo, hi, holders }),
                }
            }
        }
        segs = next;
    }
    Ok(segs)
}

/// Two-pass synchronization of the items `n` owns with their core holders,
/// including collision overflow into peripheral indices. Returns the number
/// of items moved.
pub fn core_maintenance(ring: &mut Ring, cfg: &DynamicConfig, n: Id, bw: &mut Bandwidth) -> Result<usize> {
    let space = *ring.space();
    let Some(range) = ring.node(n).ok_or(Error::DeadNode(n))?.range() else {
        return Ok(0);
    };
    let len = range.len(&space);
    let segs = core_segments(ring, cfg, n, range, bw)?;
    let mut by_holder: BTreeMap<Id, Vec<(u128, u128)>> = BTreeMap::new();
    for seg in &segs {
        for &h in seg.holders.iter().filter(|h| **h != n) {
            by_holder.entry(h).or_default().push((seg.lo, seg.hi));
        }
    }
    let a = cfg.alloc;
    let scope_for = |arcs: Vec<(u128, u128)>| {
        move |k: Id| {
            let loc = a.allocate(1, k);
            range.contains(&space, loc) && {
                let o = offset_in(&space, &range, len, loc);
                arcs.iter().any(|(lo, hi)| *lo < o && o <= *hi)
            }
        }
    };
    let mut moved = 0;
    for (&h, arcs) in &by_holder {
        moved += sync::gather(ring, n, h, &scope_for(arcs.clone()), bw);
    }
    for (&h, arcs) in &by_holder {
        moved += sync::distribute(ring, n, h, &scope_for(arcs.clone()), bw);
    }
    Ok(moved)
}

/// Lowest index whose location falls in `range`.
fn lowest_index_in(a: &AllocationConfig, space: &IdSpace, range: &KeyRange, key: Id) -> Option<u32> {
    (1..=a.r_max).find(|&m| range.contains(space, a.allocate(m, key)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PeripheralReport {
    pub checked: usize,
    pub newly_orphaned: usize,
    pub cleared: usize,
    pub deleted: usize,
    /// Items whose replica predecessor could not be reached.
    pub deferred: usize,
}

/// Checks every peripheral replica on `n` against a Bloom summary from the
/// holder of the index below it. Missing ones are marked orphaned at `now`;
/// ones still orphaned `interval` ticks after marking are deleted.
pub fn peripheral_maintenance(
    ring: &mut Ring,
    cfg: &DynamicConfig,
    n: Id,
    now: u64,
    interval: u64,
    bw: &mut Bandwidth,
) -> Result<PeripheralReport> {
    let space = *ring.space();
    let a = cfg.alloc;
    let node = ring.node(n).ok_or(Error::DeadNode(n))?;
    let Some(range) = node.range() else {
        return Ok(PeripheralReport::default());
    };
    let items = node.store.items();
    let mut report = PeripheralReport::default();
    let mut backed: Vec<Id> = Vec::new();
    let mut groups: BTreeMap<(Id, u32), Vec<Id>> = BTreeMap::new();
    for item in items {
        let Some(m) = lowest_index_in(&a, &space, &range, item.key) else {
            continue;
        };
        if m <= a.r_min {
            backed.push(item.key);
            continue;
        }
        report.checked += 1;
        match owner_arc(ring, n, a.allocate(m - 1, item.key), bw)? {
            Some((p, _)) if p == n => backed.push(item.key),
            Some((p, _)) => groups.entry((p, m)).or_default().push(item.key),
            None => report.deferred += 1,
        }
    }
    let mut verdicts: Vec<(Id, bool)> = backed.into_iter().map(|k| (k, true)).collect();
    for ((p, m), keys) in groups {
        let Some(pnode) = ring.node(p) else {
            report.deferred += keys.len();
            continue;
        };
        bw.record(&Message::new(
            MessageKind::BloomSummary,
            n,
            p,
            HEADER_BYTES + 2 * NODE_REF_BYTES,
            Category::MaintenanceOverhead,
        ));
        let held: Vec<Id> = pnode
            .store
            .iter()
            .filter(|r| r.orphaned_at.is_none() && range.contains(&space, a.allocate(m, r.item.key)))
            .map(|r| r.item.key)
            .collect();
        let bloom = BloomSummary::from_keys(held.iter().copied(), held.len());
        bw.record(&Message::new(
            MessageKind::BloomSummary,
            p,
            n,
            bloom.byte_size(),
            Category::MaintenanceOverhead,
        ));
        verdicts.extend(keys.into_iter().map(|k| (k, bloom.contains(k))));
    }
    let store = &mut ring.node_mut(n).expect("live").store;
    for (k, ok) in verdicts {
        let Some(r) = store.get_mut(k) else { continue };
        match (ok, r.orphaned_at) {
            (true, Some(_)) => {
                r.orphaned_at = None;
                report.cleared += 1;
            }
            (true, None) => {}
            (false, None) => {
                r.orphaned_at = Some(now);
                report.newly_orphaned += 1;
            }
            (false, Some(t)) if now.saturating_sub(t) >= interval => {
                store.remove(k);
                report.deleted += 1;
            }
            (false, Some(_)) => {}
        }
    }
    Ok(report)
}

/// Offers every stored item none of whose locations `n` owns to the item's
/// owner, then drops it. Items whose owner cannot be found are kept.
/// Returns the number of items dropped.
pub fn global_maintenance_dynamic(ring: &mut Ring, cfg: &DynamicConfig, n: Id, bw: &mut Bandwidth) -> Result<usize> {
    let space = *ring.space();
    let a = cfg.alloc;
    let node = ring.node(n).ok_or(Error::DeadNode(n))?;
    let Some(range) = node.range() else {
        return Ok(0);
    };
    let displaced: Vec<DataItem> = node
        .store
        .items()
        .into_iter()
        .filter(|i| lowest_index_in(&a, &space, &range, i.key).is_none())
        .collect();
    let mut by_owner: BTreeMap<Id, Vec<DataItem>> = BTreeMap::new();
    for item in displaced {
        if let Some((o, _)) = owner_arc(ring, n, a.allocate(1, item.key), bw)? {
            by_owner.entry(o).or_default().push(item);
        }
    }
    let mut dropped = 0;
    for (o, items) in by_owner {
        if !ring.is_alive(o) {
            continue;
        }
        sync::offer(ring, n, o, &items, bw);
        let store = &mut ring.node_mut(n).expect("live").store;
        for item in &items {
            store.remove(item.key);
        }
        dropped += items.len();
    }
    Ok(dropped)
}

/// One maintenance timer firing: cache revalidation, core, peripheral,
/// then global maintenance.
pub fn maintain(
    ring: &mut Ring,
    cfg: &DynamicConfig,
    n: Id,
    now: u64,
    interval: u64,
    bw: &mut Bandwidth,
) -> Result<()> {
    ring.revalidate_cache(n, bw)?;
    core_maintenance(ring, cfg, n, bw)?;
    peripheral_maintenance(ring, cfg, n, now, interval, bw)?;
    global_maintenance_dynamic(ring, cfg, n, bw)?;
    Ok(())
}

/// Stores `item` on the owner of its first location.
pub fn put(ring: &mut Ring, cfg: &DynamicConfig, origin: Id, item: DataItem, bw: &mut Bandwidth) -> Result<Id> {
    let loc = cfg.alloc.allocate(1, item.key);
    let owner = ring.find_successor(origin, loc, bw, Category::Fetch)?.owner;
    if owner != origin {
        bw.record(&Message::new(
            MessageKind::DataTransfer,
            origin,
            owner,
            transfer_bytes(item.size as u64),
            Category::Fetch,
        ));
    }
    ring.node_mut(owner).expect("live").store.offer(item);
    Ok(owner)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GetOutcome {
    pub item: Option<DataItem>,
    /// The owner of the location answered that it has no replica.
    pub authoritative_miss: bool,
    pub timed_out: bool,
    pub hops: u32,
    pub elapsed: u64,
}

/// Forwards a get toward `h(m, key)`. Any node on the path that owns one of
/// the item's locations and holds a servable replica answers at once; the
/// location's owner answers with a miss otherwise.
#[allow(clippy::too_many_arguments)]
pub fn recursive_get(
    ring: &mut Ring,
    cfg: &DynamicConfig,
    origin: Id,
    key: Id,
    m: u32,
    budget: u64,
    load: Option<&mut LoadTracker>,
    bw: &mut Bandwidth,
) -> Result<GetOutcome> {
    let a = cfg.alloc;
    let locs: Vec<Id> = (1..=a.r_max).map(|i| a.allocate(i, key)).collect();
    let target = locs[(m - 1) as usize];
    let spec = RouteSpec {
        target,
        budget,
        kind: MessageKind::RecursiveGet,
        category: Category::Fetch,
        iterative: false,
        stop_before_final: false,
        request_bytes: HEADER_BYTES + 2 * NODE_REF_BYTES,
    };
    let threshold = cfg.overload_threshold;
    let route = {
        let load_ref = load.as_deref();
        ring.route(origin, &spec, bw, |space, node| {
            if node.store.servable(key).is_none() || !locs.iter().any(|l| node.owns(space, *l)) {
                return false;
            }
            match (threshold, load_ref) {
                (Some(t), Some(l)) => l.served(node.id) < t || node.owns(space, target),
                _ => true,
            }
        })?
    };
    let mut out = GetOutcome {
        hops: route.hops,
        elapsed: route.elapsed,
        ..Default::default()
    };
    let (at, item) = match route.end {
        RouteEnd::Stopped(x) => (x, ring.node(x).and_then(|n| n.store.servable(key))),
        // The route settled on the location's owner, whose keyspace holds
        // that location even if its own predecessor pointer is stale.
        RouteEnd::Owner(o) | RouteEnd::PredecessorOf(o) => {
            let item = ring.node(o).and_then(|n| n.store.servable(key));
            out.authoritative_miss = item.is_none();
            (o, item)
        }
        RouteEnd::TimedOut => {
            out.timed_out = true;
            return Ok(out);
        }
    };
    if let (Some(l), Some(_)) = (load, item) {
        l.record(at);
    }
    if at != origin {
        let size = item.map_or(HEADER_BYTES, |i| transfer_bytes(i.size as u64));
        bw.record(&Message::new(
            MessageKind::RecursiveGet,
            at,
            origin,
            size,
            Category::Fetch,
        ));
        out.hops += 1;
        out.elapsed += 1;
    }
    out.item = item;
    Ok(out)
}

fn pop_random<R: Rng>(v: &mut Vec<u32>, rng: &mut R) -> Option<u32> {
    if v.is_empty() {
        None
    } else {
        let i = rng.random_range(0..v.len());
        Some(v.swap_remove(i))
    }
}

/// One pass over the candidate indices: pick an index at random (core
/// indices first when configured) and issue a recursive get. An
/// authoritative miss at a peripheral index prunes that index and every
/// higher one, since the chain of peripheral replicas is contiguous.
#[allow(clippy::too_many_arguments)]
pub fn fetch_dynamic<R: Rng>(
    ring: &mut Ring,
    cfg: &DynamicConfig,
    origin: Id,
    key: Id,
    budget: u64,
    rng: &mut R,
    mut load: Option<&mut LoadTracker>,
    bw: &mut Bandwidth,
) -> Result<FetchOutcome> {
    let a = cfg.alloc;
    let (mut first, mut later): (Vec<u32>, Vec<u32>) = if cfg.core_first {
        ((1..=a.r_min).collect(), (a.r_min + 1..=a.r_max).collect())
    } else {
        ((1..=a.r_max).collect(), Vec::new())
    };
    let mut out = FetchOutcome::default();
    while let Some(m) = pop_random(&mut first, rng).or_else(|| pop_random(&mut later, rng)) {
        let g = recursive_get(ring, cfg, origin, key, m, budget, load.as_deref_mut(), bw)?;
        out.probes += 1;
        out.hops += g.hops;
        out.elapsed += g.elapsed;
        out.timed_out |= g.timed_out;
        if g.item.is_some() {
            out.item = g.item;
            return Ok(out);
        }
        if g.authoritative_miss && m > a.r_min && !cfg.remove_single {
            first.retain(|i| *i < m);
            later.retain(|i| *i < m);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub updated: u32,
    pub probed: u32,
    pub unreachable: u32,
}

/// Offers a new version of an item to the owners of its locations in index
/// order. Owners holding the item take the new version; core owners take it
/// regardless. In fast mode the walk stops after a run of empty peripheral
/// locations.
pub fn update(
    ring: &mut Ring,
    cfg: &DynamicConfig,
    origin: Id,
    item: DataItem,
    bw: &mut Bandwidth,
) -> Result<UpdateReport> {
    let a = cfg.alloc;
    let mut report = UpdateReport::default();
    let mut empty_run = 0;
    for m in 1..=a.r_max {
        report.probed += 1;
        let loc = a.allocate(m, item.key);
        let owner = match ring.find_successor(origin, loc, bw, Category::Fetch) {
            Ok(r) => r.owner,
            Err(_) => {
                report.unreachable += 1;
                continue;
            }
        };
        let store = &mut ring.node_mut(owner).expect("live").store;
        let holds = store.contains(item.key);
        if (holds || m <= a.r_min) && store.offer(item) {
            report.updated += 1;
            bw.record(&Message::new(
                MessageKind::DataTransfer,
                origin,
                owner,
                transfer_bytes(item.size as u64),
                Category::Fetch,
            ));
        }
        if m > a.r_min {
            empty_run = if holds { 0 } else { empty_run + 1 };
            if let UpdateMode::Fast { stop_after_empty } = cfg.update_mode {
                if empty_run >= stop_after_empty {
                    break;
                }
            }
        }
    }
    Ok(report)
}

/// Core group of `key` by global scan: owners of `h(1..)` in index order,
/// skipping repeats, until `R_MIN` distinct nodes or `R_MAX` indices.
pub fn expected_core_group(ring: &Ring, a: &AllocationConfig, key: Id) -> Vec<Id> {
    let mut group = Vec::new();
    for m in 1..=a.r_max {
        if group.len() >= a.r_min as usize {
            break;
        }
        if let Some(o) = ring.oracle_owner(a.allocate(m, key)) {
            if !group.contains(&o) {
                group.push(o);
            }
        }
    }
    group
}

/// Every servable replica sits on a node owning one of its locations.
pub fn served_replicas_addressable(ring: &Ring, a: &AllocationConfig) -> bool {
    ring.nodes().all(|n| {
        n.store
            .iter()
            .filter(|r| r.orphaned_at.is_none())
            .all(|r| (1..=a.r_max).any(|m| ring.oracle_owner(a.allocate(m, r.item.key)) == Some(n.id)))
    })
}
