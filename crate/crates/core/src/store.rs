//! Per-node replica storage shared by both replication families.

use std::collections::BTreeMap;

use crate::id::{Id, IdSpace, KeyRange};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DataItem {
    pub key: Id,
    /// Payload size in bytes; fixed for the lifetime of a run.
    pub size: u32,
    pub version: u64,
}

impl DataItem {
    pub fn new(key: Id, size: u32) -> Self {
        Self { key, size, version: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoredReplica {
    pub item: DataItem,
    /// Time at which the replica was found orphaned, if it currently is.
    pub orphaned_at: Option<u64>,
}

/// At most one replica per key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplicaStore {
    entries: BTreeMap<Id, StoredReplica>,
}

impl ReplicaStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: Id) -> bool {
        self.entries.contains_key(&key)
    }

    pub fn get(&self, key: Id) -> Option<&StoredReplica> {
        self.entries.get(&key)
    }

    pub fn get_mut(&mut self, key: Id) -> Option<&mut StoredReplica> {
        self.entries.get_mut(&key)
    }

    /// The item if held and not orphaned.
    pub fn servable(&self, key: Id) -> Option<DataItem> {
        self.entries
            .get(&key)
            .filter(|r| r.orphaned_at.is_none())
            .map(|r| r.item)
    }

    /// Inserts unless an equal-or-newer version is already present.
    /// Returns whether the store changed.
    pub fn offer(&mut self, item: DataItem) -> bool {
        match self.entries.get_mut(&item.key) {
            Some(existing) if existing.item.version >= item.version => false,
            Some(existing) => {
                existing.item = item;
                true
            }
            None => {
                self.entries.insert(
                    item.key,
                    StoredReplica {
                        item,
                        orphaned_at: None,
                    },
                );
                true
            }
        }
    }

    /// True when this store lacks `item` or holds an older version of it.
    pub fn wants(&self, item: &DataItem) -> bool {
        self.entries
            .get(&item.key)
            .is_none_or(|e| e.item.version < item.version)
    }

    pub fn remove(&mut self, key: Id) -> Option<StoredReplica> {
        self.entries.remove(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredReplica> {
        self.entries.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = Id> + '_ {
        self.entries.keys().copied()
    }

    pub fn items(&self) -> Vec<DataItem> {
        self.entries.values().map(|r| r.item).collect()
    }

    /// Items whose key lies in `range`.
    pub fn items_in(&self, space: &IdSpace, range: &KeyRange) -> Vec<DataItem> {
        if range.is_full() {
            return self.items();
        }
        let (s, e) = (range.start.0, range.end.0);
        let mut out = Vec::new();
        if s < e {
            out.extend(self.entries.range(Id(s + 1)..=Id(e)).map(|(_, r)| r.item));
        } else {
            if s < space.mask() {
                out.extend(self.entries.range(Id(s + 1)..).map(|(_, r)| r.item));
            }
            out.extend(self.entries.range(..=Id(e)).map(|(_, r)| r.item));
        }
        out
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.values().map(|r| r.item.size as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newer_version_wins() {
        let mut s = ReplicaStore::new();
        let mut it = DataItem::new(Id(5), 10);
        assert!(s.offer(it));
        assert!(!s.offer(it));
        it.version = 2;
        assert!(s.wants(&it));
        assert!(s.offer(it));
        it.version = 1;
        assert!(!s.offer(it));
        assert_eq!(s.get(Id(5)).unwrap().item.version, 2);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn wrapped_range_query() {
        let space = IdSpace::new(8).unwrap();
        let mut s = ReplicaStore::new();
        for k in [1u64, 100, 200, 250, 255] {
            s.offer(DataItem::new(Id(k), 1));
        }
        let keys: Vec<u64> = s
            .items_in(&space, &KeyRange::new(Id(200), Id(1)))
            .iter()
            .map(|i| i.key.0)
            .collect();
        assert_eq!(keys, vec![250, 255, 1]);
        let keys: Vec<u64> = s
            .items_in(&space, &KeyRange::new(Id(255), Id(100)))
            .iter()
            .map(|i| i.key.0)
            .collect();
        assert_eq!(keys, vec![1, 100]);
    }

    #[test]
    fn orphans_are_not_servable() {
        let mut s = ReplicaStore::new();
        s.offer(DataItem::new(Id(3), 1));
        s.get_mut(Id(3)).unwrap().orphaned_at = Some(0);
        assert!(s.servable(Id(3)).is_none());
        assert!(s.contains(Id(3)));
    }
}
