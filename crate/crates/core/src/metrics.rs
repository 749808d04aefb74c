//! Message taxonomy and per-category bandwidth accounting.

use crate::id::Id;

/// Fixed per-message header.
pub const HEADER_BYTES: u64 = 40;
/// One `(key, version)` digest in a synchronization summary.
pub const DIGEST_BYTES: u64 = 24;
/// One node reference in a successor list or lookup reply.
pub const NODE_REF_BYTES: u64 = 8;
pub const DEFAULT_ITEM_BYTES: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Identifying what should be stored where.
    MaintenanceOverhead,
    /// Item payloads moved by maintenance.
    DataMovement,
    ChordRepair,
    Fetch,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::MaintenanceOverhead,
        Category::DataMovement,
        Category::ChordRepair,
        Category::Fetch,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::MaintenanceOverhead => "maintenance-overhead",
            Category::DataMovement => "data-movement",
            Category::ChordRepair => "chord-repair",
            Category::Fetch => "fetch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Lookup,
    Get,
    RecursiveGet,
    SyncSummary,
    DataTransfer,
    BloomSummary,
    ChordRepair,
    Offer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub src: Id,
    pub dst: Id,
    pub size: u64,
    pub category: Category,
}

impl Message {
    pub fn new(kind: MessageKind, src: Id, dst: Id, size: u64, category: Category) -> Self {
        Self {
            kind,
            src,
            dst,
            size,
            category,
        }
    }

    /// A header-only control message.
    pub fn control(kind: MessageKind, src: Id, dst: Id, category: Category) -> Self {
        Self::new(kind, src, dst, HEADER_BYTES, category)
    }
}

/// Byte and message counters, one slot per [`Category`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bandwidth {
    bytes: [u64; 4],
    messages: [u64; 4],
}

impl Bandwidth {
    pub fn record(&mut self, msg: &Message) {
        let i = msg.category.index();
        self.bytes[i] += msg.size;
        self.messages[i] += 1;
    }

    pub fn bytes(&self, c: Category) -> u64 {
        self.bytes[c.index()]
    }

    pub fn messages(&self, c: Category) -> u64 {
        self.messages[c.index()]
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes.iter().sum()
    }

    pub fn merge(&mut self, other: &Bandwidth) {
        for i in 0..4 {
            self.bytes[i] += other.bytes[i];
            self.messages[i] += other.messages[i];
        }
    }
}

/// Size of a summary carrying `digests` key digests.
pub fn summary_bytes(digests: usize) -> u64 {
    HEADER_BYTES + DIGEST_BYTES * digests as u64
}

/// Size of one batched transfer of `payload` item bytes.
pub fn transfer_bytes(payload: u64) -> u64 {
    HEADER_BYTES + payload
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_message_hits_one_category() {
        let mut bw = Bandwidth::default();
        let m = Message::new(
            MessageKind::SyncSummary,
            Id(1),
            Id(2),
            summary_bytes(3),
            Category::MaintenanceOverhead,
        );
        bw.record(&m);
        assert_eq!(bw.bytes(Category::MaintenanceOverhead), 40 + 72);
        assert_eq!(bw.messages(Category::MaintenanceOverhead), 1);
        for c in [Category::DataMovement, Category::ChordRepair, Category::Fetch] {
            assert_eq!(bw.bytes(c), 0);
        }
        assert_eq!(bw.total_bytes(), 112);
    }
}
