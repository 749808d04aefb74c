//! Successor replication: every item lives on its owner and the owner's
//! `r` successors.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fetch::FetchOutcome;
use crate::id::{Id, KeyRange};
use crate::metrics::{transfer_bytes, Bandwidth, Category, Message, MessageKind, HEADER_BYTES, NODE_REF_BYTES};
use crate::ring::{Ring, RouteEnd, RouteSpec};
use crate::store::DataItem;
use crate::sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DHashConfig {
    /// Successors holding a copy in addition to the owner.
    pub replicas: u32,
}

impl Default for DHashConfig {
    fn default() -> Self {
        Self { replicas: 6 }
    }
}

/// Stores `item` on the owner of its key. Replicas appear at the next
/// maintenance run.
pub fn put(ring: &mut Ring, origin: Id, item: DataItem, bw: &mut Bandwidth) -> Result<Id> {
    let owner = ring.find_successor(origin, item.key, bw, Category::Fetch)?.owner;
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

/// The first `replicas` live-or-not entries of `n`'s successor list.
fn replica_successors(ring: &Ring, cfg: &DHashConfig, n: Id) -> Vec<Id> {
    ring.node(n)
        .map(|node| node.successors.iter().take(cfg.replicas as usize).copied().collect())
        .unwrap_or_default()
}

/// Two-pass synchronization of `n`'s range with its `r` successors: first
/// gather every replica of the range onto `n`, then push the range out.
/// Dead successors are skipped. Returns the number of items moved.
pub fn local_maintenance(ring: &mut Ring, cfg: &DHashConfig, n: Id, bw: &mut Bandwidth) -> Result<usize> {
    let space = *ring.space();
    let range = ring.node(n).ok_or(Error::DeadNode(n))?.range();
    let Some(range) = range else {
        return Ok(0);
    };
    let scope = move |k: Id| range.contains(&space, k);
    let succs = replica_successors(ring, cfg, n);
    let mut moved = 0;
    for &s in &succs {
        moved += sync::gather(ring, n, s, &scope, bw);
    }
    for &s in &succs {
        moved += sync::distribute(ring, n, s, &scope, bw);
    }
    Ok(moved)
}

/// Looks up the owner of every stored key outside `n`'s own range and,
/// where `n` is not among that owner's first `r` successors, offers the
/// keys to the owner and drops them. Keys are handled one owner arc at a
/// time. Returns the number of keys dropped.
pub fn global_maintenance(ring: &mut Ring, cfg: &DHashConfig, n: Id, bw: &mut Bandwidth) -> Result<usize> {
    let space = *ring.space();
    let node = ring.node(n).ok_or(Error::DeadNode(n))?;
    let own = node.range();
    let mut pending: BTreeSet<Id> = node
        .store
        .keys()
        .filter(|k| !own.is_some_and(|r| r.contains(&space, *k)))
        .collect();
    let mut dropped = 0;
    while let Some(&k) = pending.iter().next() {
        let found = match ring.find_successor(n, k, bw, Category::MaintenanceOverhead) {
            Ok(f) => f,
            Err(_) => {
                pending.remove(&k);
                continue;
            }
        };
        let arc = found.owner_pred.map(|p| KeyRange::new(p, found.owner));
        let group: Vec<Id> = match arc {
            Some(a) => pending.iter().copied().filter(|x| a.contains(&space, *x)).collect(),
            None => vec![k],
        };
        for g in &group {
            pending.remove(g);
        }
        pending.remove(&k);
        let o = found.owner;
        if o == n {
            continue;
        }
        let o_succ = replica_successors(ring, cfg, o);
        bw.record(&Message::control(
            MessageKind::Lookup,
            n,
            o,
            Category::MaintenanceOverhead,
        ));
        bw.record(&Message::new(
            MessageKind::Lookup,
            o,
            n,
            HEADER_BYTES + NODE_REF_BYTES * o_succ.len() as u64,
            Category::MaintenanceOverhead,
        ));
        if o_succ.contains(&n) {
            continue;
        }
        let items: Vec<DataItem> = {
            let store = &ring.node(n).expect("live").store;
            group.iter().filter_map(|g| store.get(*g).map(|r| r.item)).collect()
        };
        sync::offer(ring, n, o, &items, bw);
        let store = &mut ring.node_mut(n).expect("live").store;
        for item in &items {
            store.remove(item.key);
        }
        dropped += items.len();
    }
    Ok(dropped)
}

/// One maintenance timer firing: global, then two-pass local.
pub fn maintain(ring: &mut Ring, cfg: &DHashConfig, n: Id, bw: &mut Bandwidth) -> Result<()> {
    global_maintenance(ring, cfg, n, bw)?;
    local_maintenance(ring, cfg, n, bw)?;
    Ok(())
}

/// Fetch by successor list: route to the key's predecessor, which returns
/// the `r` nodes from the owner onward; then ask them one at a time in
/// random order until one has the item.
///
/// Ticks: one per routing hop, one for the successor-list reply, two per
/// get to a live node and the RTT timeout per get to a dead node.
pub fn fetch_dhash<R: Rng>(
    ring: &mut Ring,
    cfg: &DHashConfig,
    origin: Id,
    key: Id,
    budget: u64,
    rng: &mut R,
    bw: &mut Bandwidth,
) -> Result<FetchOutcome> {
    let spec = RouteSpec {
        target: key,
        budget,
        kind: MessageKind::Lookup,
        category: Category::Fetch,
        iterative: false,
        stop_before_final: true,
        request_bytes: HEADER_BYTES + NODE_REF_BYTES,
    };
    let route = ring.route(origin, &spec, bw, |_, _| false)?;
    let mut out = FetchOutcome {
        hops: route.hops,
        elapsed: route.elapsed,
        ..Default::default()
    };
    let r = cfg.replicas as usize;
    let (answering, mut candidates): (Id, Vec<Id>) = match route.end {
        RouteEnd::PredecessorOf(p) => (
            p,
            ring.node(p).expect("live").successors.iter().take(r).copied().collect(),
        ),
        RouteEnd::Owner(o) | RouteEnd::Stopped(o) => {
            let node = ring.node(o).expect("live");
            let list = std::iter::once(o)
                .chain(node.successors.iter().copied())
                .take(r)
                .collect();
            (o, list)
        }
        RouteEnd::TimedOut => {
            out.timed_out = true;
            return Ok(out);
        }
    };
    if answering != origin {
        bw.record(&Message::new(
            MessageKind::Lookup,
            answering,
            origin,
            HEADER_BYTES + NODE_REF_BYTES * candidates.len() as u64,
            Category::Fetch,
        ));
        out.hops += 1;
        out.elapsed += 1;
    }
    let rtt = ring.config().rtt_timeout;
    while !candidates.is_empty() {
        let pick = *candidates.choose(rng).expect("non-empty");
        candidates.retain(|c| *c != pick);
        out.probes += 1;
        let Some(node) = ring.node(pick) else {
            out.elapsed += rtt;
            out.timed_out = true;
            if let Some(o) = ring.node_mut(origin) {
                o.forget(pick);
            }
            continue;
        };
        let found = node.store.servable(key);
        if pick != origin {
            bw.record(&Message::new(
                MessageKind::Get,
                origin,
                pick,
                HEADER_BYTES + NODE_REF_BYTES,
                Category::Fetch,
            ));
            let reply = found.map_or(HEADER_BYTES, |i| transfer_bytes(i.size as u64));
            bw.record(&Message::new(MessageKind::Get, pick, origin, reply, Category::Fetch));
            out.hops += 2;
            out.elapsed += 2;
        }
        if found.is_some() {
            out.item = found;
            return Ok(out);
        }
    }
    Ok(out)
}

/// True when every stored key sits exactly on its oracle owner and the
/// owner's `r` oracle successors, and nowhere else.
pub fn placement_invariant_holds(ring: &Ring, cfg: &DHashConfig) -> bool {
    let mut keys: BTreeSet<Id> = BTreeSet::new();
    for n in ring.nodes() {
        keys.extend(n.store.keys());
    }
    keys.into_iter().all(|k| {
        let Some(owner) = ring.oracle_owner(k) else {
            return false;
        };
        let mut group = vec![owner];
        group.extend(ring.oracle_successors(owner, cfg.replicas as usize));
        ring.nodes().all(|n| n.store.contains(k) == group.contains(&n.id))
    })
}
