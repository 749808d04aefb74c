//! Result of a single fetch attempt, shared by both replication families.

use crate::store::DataItem;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FetchOutcome {
    pub item: Option<DataItem>,
    /// Get requests issued, including ones sent to dead nodes.
    pub probes: u32,
    /// Messages on the request path.
    pub hops: u32,
    /// Ticks from issue to answer (or to giving up).
    pub elapsed: u64,
    /// At least one request was abandoned on a timeout.
    pub timed_out: bool,
}

impl FetchOutcome {
    pub fn found(&self) -> bool {
        self.item.is_some()
    }
}
