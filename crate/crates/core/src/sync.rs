//! Pairwise store synchronization used by both replication families.
//!
//! A scope is a predicate over item keys that both sides evaluate on their
//! own store. Summaries are explicit `(key, version)` digest lists.

use crate::id::Id;
use crate::metrics::{summary_bytes, transfer_bytes, Bandwidth, Category, Message, MessageKind};
use crate::ring::Ring;
use crate::store::DataItem;

fn scoped(ring: &Ring, node: Id, scope: &dyn Fn(Id) -> bool) -> Vec<DataItem> {
    ring.node(node)
        .map(|n| n.store.iter().filter(|r| scope(r.item.key)).map(|r| r.item).collect())
        .unwrap_or_default()
}

fn payload(items: &[DataItem]) -> u64 {
    items.iter().map(|i| i.size as u64).sum()
}

/// `n` sends a summary of its in-scope items to `peer`, which replies with
/// every in-scope item `n` lacks or holds an older version of. Returns the
/// number of items moved.
pub fn gather(ring: &mut Ring, n: Id, peer: Id, scope: &dyn Fn(Id) -> bool, bw: &mut Bandwidth) -> usize {
    if !ring.is_alive(n) || !ring.is_alive(peer) || n == peer {
        return 0;
    }
    let mine = scoped(ring, n, scope);
    bw.record(&Message::new(
        MessageKind::SyncSummary,
        n,
        peer,
        summary_bytes(mine.len()),
        Category::MaintenanceOverhead,
    ));
    let missing: Vec<DataItem> = {
        let local = &ring.node(n).expect("live").store;
        scoped(ring, peer, scope)
            .into_iter()
            .filter(|i| local.wants(i))
            .collect()
    };
    if missing.is_empty() {
        return 0;
    }
    bw.record(&Message::new(
        MessageKind::DataTransfer,
        peer,
        n,
        transfer_bytes(payload(&missing)),
        Category::DataMovement,
    ));
    let store = &mut ring.node_mut(n).expect("live").store;
    for item in &missing {
        store.offer(*item);
    }
    missing.len()
}

/// `n` sends a summary of its in-scope items to `peer`; `peer` asks for the
/// ones it lacks and `n` sends them. Items named in the summary that `peer`
/// already holds lose any orphan mark. Returns the number of items moved.
pub fn distribute(ring: &mut Ring, n: Id, peer: Id, scope: &dyn Fn(Id) -> bool, bw: &mut Bandwidth) -> usize {
    if !ring.is_alive(n) || !ring.is_alive(peer) || n == peer {
        return 0;
    }
    let mine = scoped(ring, n, scope);
    bw.record(&Message::new(
        MessageKind::SyncSummary,
        n,
        peer,
        summary_bytes(mine.len()),
        Category::MaintenanceOverhead,
    ));
    deliver(ring, n, peer, &mine, bw)
}

/// `n` offers `items` to `peer` with a digest summary, then sends the ones
/// `peer` asks for.
pub fn offer(ring: &mut Ring, n: Id, peer: Id, items: &[DataItem], bw: &mut Bandwidth) -> usize {
    if !ring.is_alive(peer) || n == peer || items.is_empty() {
        return 0;
    }
    bw.record(&Message::new(
        MessageKind::Offer,
        n,
        peer,
        summary_bytes(items.len()),
        Category::MaintenanceOverhead,
    ));
    deliver(ring, n, peer, items, bw)
}

fn deliver(ring: &mut Ring, n: Id, peer: Id, items: &[DataItem], bw: &mut Bandwidth) -> usize {
    let wanted: Vec<DataItem> = {
        let store = &mut ring.node_mut(peer).expect("live").store;
        let mut wanted = Vec::new();
        for item in items {
            if store.wants(item) {
                wanted.push(*item);
            } else if let Some(r) = store.get_mut(item.key) {
                r.orphaned_at = None;
            }
        }
        wanted
    };
    if wanted.is_empty() {
        return 0;
    }
    bw.record(&Message::new(
        MessageKind::SyncSummary,
        peer,
        n,
        summary_bytes(wanted.len()),
        Category::MaintenanceOverhead,
    ));
    bw.record(&Message::new(
        MessageKind::DataTransfer,
        n,
        peer,
        transfer_bytes(payload(&wanted)),
        Category::DataMovement,
    ));
    let store = &mut ring.node_mut(peer).expect("live").store;
    for item in &wanted {
        store.offer(*item);
    }
    wanted.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id::IdSpace;
    use crate::ring::RingConfig;

    fn ring() -> Ring {
        let ids: Vec<Id> = [100u64, 200, 300].map(Id).to_vec();
        Ring::build_repaired(IdSpace::new(10).unwrap(), RingConfig::default(), &ids).unwrap()
    }

    #[test]
    fn gather_pulls_only_missing_in_scope() {
        let mut r = ring();
        let peer = &mut r.node_mut(Id(200)).unwrap().store;
        peer.offer(DataItem::new(Id(50), 10));
        peer.offer(DataItem::new(Id(150), 10));
        r.node_mut(Id(100)).unwrap().store.offer(DataItem::new(Id(60), 10));
        let mut bw = Bandwidth::default();
        let moved = gather(&mut r, Id(100), Id(200), &|k| k.0 < 100, &mut bw);
        assert_eq!(moved, 1);
        assert!(r.node(Id(100)).unwrap().store.contains(Id(50)));
        assert!(!r.node(Id(100)).unwrap().store.contains(Id(150)));
        assert_eq!(bw.bytes(Category::DataMovement), 50);
        assert_eq!(bw.bytes(Category::MaintenanceOverhead), 64);
    }

    #[test]
    fn distribute_is_idempotent() {
        let mut r = ring();
        for k in [10u64, 20, 30] {
            r.node_mut(Id(100)).unwrap().store.offer(DataItem::new(Id(k), 100));
        }
        let mut bw = Bandwidth::default();
        assert_eq!(distribute(&mut r, Id(100), Id(300), &|_| true, &mut bw), 3);
        let mut again = Bandwidth::default();
        assert_eq!(distribute(&mut r, Id(100), Id(300), &|_| true, &mut again), 0);
        assert_eq!(again.bytes(Category::DataMovement), 0);
        assert_eq!(again.messages(Category::MaintenanceOverhead), 1);
    }

    #[test]
    fn newer_version_wins() {
        let mut r = ring();
        let mut newer = DataItem::new(Id(5), 10);
        newer.version = 3;
        r.node_mut(Id(100)).unwrap().store.offer(DataItem::new(Id(5), 10));
        r.node_mut(Id(200)).unwrap().store.offer(newer);
        let mut bw = Bandwidth::default();
        assert_eq!(offer(&mut r, Id(100), Id(200), &[DataItem::new(Id(5), 10)], &mut bw), 0);
        assert_eq!(gather(&mut r, Id(100), Id(200), &|_| true, &mut bw), 1);
        assert_eq!(r.node(Id(100)).unwrap().store.get(Id(5)).unwrap().item.version, 3);
    }
}
