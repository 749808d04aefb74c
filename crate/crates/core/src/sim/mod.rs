//! Discrete-event simulation of a churning ring running one of the
//! replication algorithms.
//!
//! Each event (failure, join, Chord repair, maintenance, fetch attempt,
//! update) executes atomically. Message costs inside an event are charged
//! one tick per hop to the latency of the fetch that caused them.

pub mod config;
pub mod log;
pub mod queue;

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::dhash::{self, DHashConfig};
use crate::dynamic::{self, DynamicConfig, LoadTracker};
use crate::error::{Error, Result};
use crate::id::Id;
use crate::metrics::{Bandwidth, Category};
use crate::ring::{Ring, RingConfig};
use crate::store::DataItem;

pub use config::{timeout_policy, Algorithm, ChurnMode, ScenarioConfig, HOUR, MINUTE, SECOND};
pub use log::{across, FetchRecord, LossEvent, MetricsLog};
pub use queue::EventQueue;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Fail(Id),
    /// Next failure of the system-wide process.
    SystemFail,
    Join,
    Repair(Id),
    Maintain(Id),
    Fetch(usize),
    Update,
    LoadReset,
}

impl Event {
    fn words(&self) -> [u64; 2] {
        match *self {
            Event::Fail(n) => [1, n.0],
            Event::SystemFail => [2, 0],
            Event::Join => [3, 0],
            Event::Repair(n) => [4, n.0],
            Event::Maintain(n) => [5, n.0],
            Event::Fetch(i) => [6, i as u64],
            Event::Update => [7, 0],
            Event::LoadReset => [8, 0],
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Storage {
    DHash(DHashConfig),
    Dynamic(DynamicConfig),
}

#[derive(Clone, Copy, Debug)]
struct PendingFetch {
    key: Id,
    origin: Id,
    launched: u64,
    attempts: u32,
    probes: u32,
    hops: u32,
}

/// What an observer sees after every processed event.
pub struct Observation<'a> {
    pub time: u64,
    pub ring: &'a Ring,
    pub keys: &'a [Id],
    pub item_size: u32,
    pub bandwidth: &'a Bandwidth,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    storage: Storage,
    ring: Ring,
    rng: ChaCha8Rng,
    queue: EventQueue<Event>,
    log: MetricsLog,
    keys: Vec<Id>,
    versions: HashMap<Id, u64>,
    pending: Vec<PendingFetch>,
    records: Vec<Option<FetchRecord>>,
    load: LoadTracker,
    interval: u64,
    recursive_timeout: u64,
    lifetime: Exp<f64>,
    end: u64,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let space = cfg.space()?;
        let (rtt, recursive_timeout) = cfg.timeouts();
        let ring_cfg = RingConfig {
            rtt_timeout: rtt,
            ..RingConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids = BTreeSet::new();
        while ids.len() < cfg.nodes {
            ids.insert(Id(rng.random::<u64>() & space.mask()));
        }
        let ring = Ring::build_repaired(space, ring_cfg, &ids.into_iter().collect::<Vec<_>>())?;
        let storage = match cfg.algorithm {
            Algorithm::DHash => Storage::DHash(cfg.dhash()),
            Algorithm::Dynamic(_) => Storage::Dynamic(cfg.dynamic()?),
        };
        let lifetime = Exp::new(1.0 / cfg.lifetime_mean as f64).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            storage,
            ring,
            rng,
            queue: EventQueue::default(),
            log: MetricsLog::new(seed),
            keys: Vec::new(),
            versions: HashMap::new(),
            pending: Vec::new(),
            records: Vec::new(),
            load: LoadTracker::default(),
            interval: cfg.maintenance_interval(),
            recursive_timeout,
            lifetime,
            end: cfg.half_life(),
        })
    }

    fn random_live(&mut self) -> Id {
        let ids = self.ring.live_ids();
        ids[self.rng.random_range(0..ids.len())]
    }

    fn load_items(&mut self) -> Result<()> {
        let space = *self.ring.space();
        let total = self.cfg.nodes * self.cfg.items_per_node;
        let mut keys = BTreeSet::new();
        while keys.len() < total {
            keys.insert(Id(self.rng.random::<u64>() & space.mask()));
        }
        let mut scratch = Bandwidth::default();
        let mut order: Vec<Id> = keys.into_iter().collect();
        order.shuffle(&mut self.rng);
        for &k in &order {
            let origin = self.random_live();
            let item = DataItem::new(k, self.cfg.item_size);
            match self.storage {
                Storage::DHash(_) => dhash::put(&mut self.ring, origin, item, &mut scratch)?,
                Storage::Dynamic(d) => dynamic::put(&mut self.ring, &d, origin, item, &mut scratch)?,
            };
        }
        self.keys = order;
        Ok(())
    }

    fn maintain(&mut self, n: Id, now: u64, bw: &mut Bandwidth) -> Result<()> {
        match self.storage {
            Storage::DHash(c) => dhash::maintain(&mut self.ring, &c, n, bw),
            Storage::Dynamic(c) => dynamic::maintain(&mut self.ring, &c, n, now, self.interval, bw),
        }
    }

    /// Maintenance rounds over every node until one moves no data.
    fn warm_up(&mut self) -> Result<()> {
        for round in 0..self.cfg.warmup_rounds {
            let mut bw = Bandwidth::default();
            for n in self.ring.live_ids() {
                self.maintain(n, 0, &mut bw)?;
            }
            self.log.warmup_rounds = round + 1;
            if bw.bytes(Category::DataMovement) == 0 {
                break;
            }
        }
        Ok(())
    }

    fn schedule_node(&mut self, n: Id, now: u64) {
        if self.cfg.churn == ChurnMode::Steady {
            let life = self.lifetime.sample(&mut self.rng).ceil() as u64;
            self.queue.push(now + life.max(1), Event::Fail(n));
        }
        let repair = now + self.rng.random_range(0..self.cfg.chord_repair_interval);
        self.queue.push(repair, Event::Repair(n));
        let maint = now + self.rng.random_range(0..self.interval);
        self.queue.push(maint, Event::Maintain(n));
    }

    fn schedule(&mut self) {
        for n in self.ring.live_ids() {
            self.schedule_node(n, 0);
        }
        if self.cfg.churn == ChurnMode::SystemWide {
            let t = self.lifetime.sample(&mut self.rng).ceil() as u64;
            self.queue.push(t.max(1), Event::SystemFail);
        }
        let burst = matches!(self.cfg.churn, ChurnMode::Catastrophe(_));
        let candidates: Vec<Id> = if burst {
            self.keys
                .iter()
                .copied()
                .filter(|k| self.ring.nodes().any(|n| n.store.contains(*k)))
                .collect()
        } else {
            self.keys.clone()
        };
        if candidates.is_empty() {
            return;
        }
        for i in 0..self.cfg.fetches {
            let key = candidates[self.rng.random_range(0..candidates.len())];
            let launched = if burst { 0 } else { self.rng.random_range(0..self.end) };
            let origin = self.random_live();
            self.pending.push(PendingFetch {
                key,
                origin,
                launched,
                attempts: 0,
                probes: 0,
                hops: 0,
            });
            self.records.push(None);
            self.queue.push(launched, Event::Fetch(i));
        }
        if let Storage::Dynamic(_) = self.storage {
            for _ in 0..self.cfg.updates {
                let t = self.rng.random_range(0..self.end);
                self.queue.push(t, Event::Update);
            }
        }
        if self.cfg.overload_threshold.is_some() {
            self.queue.push(self.interval, Event::LoadReset);
        }
    }

    fn fail(&mut self, n: Id, now: u64) -> Result<()> {
        if !self.ring.is_alive(n) || self.ring.len() <= 1 {
            return Ok(());
        }
        let state = self.ring.fail(n)?;
        self.log.failures += 1;
        for k in state.store.keys() {
            if !self.ring.nodes().any(|x| x.store.contains(k)) {
                self.log.losses.push(LossEvent { time: now, key: k });
            }
        }
        Ok(())
    }

    fn join(&mut self, now: u64) {
        let space = *self.ring.space();
        let id = loop {
            let id = Id(self.rng.random::<u64>() & space.mask());
            if !self.ring.was_used(id) {
                break id;
            }
        };
        let boot = self.random_live();
        match self.ring.join(id, Some(boot), &mut self.log.bandwidth) {
            Ok(()) => {
                self.log.joins += 1;
                self.schedule_node(id, now);
            }
            Err(_) => self.queue.push(now + MINUTE, Event::Join),
        }
    }

    fn fetch(&mut self, i: usize, now: u64) -> Result<()> {
        let mut p = self.pending[i];
        if !self.ring.is_alive(p.origin) {
            p.origin = self.random_live();
        }
        let bw = &mut self.log.bandwidth;
        let out = match self.storage {
            Storage::DHash(c) => dhash::fetch_dhash(
                &mut self.ring,
                &c,
                p.origin,
                p.key,
                self.recursive_timeout,
                &mut self.rng,
                bw,
            )?,
            Storage::Dynamic(c) => {
                let load = c.overload_threshold.map(|_| &mut self.load);
                dynamic::fetch_dynamic(
                    &mut self.ring,
                    &c,
                    p.origin,
                    p.key,
                    self.recursive_timeout,
                    &mut self.rng,
                    load,
                    bw,
                )?
            }
        };
        p.attempts += 1;
        p.probes += out.probes;
        p.hops += out.hops;
        let done = now + out.elapsed;
        let retry = self.cfg.max_retries.is_none_or(|m| p.attempts <= m);
        self.pending[i] = p;
        if out.found() || !retry {
            self.records[i] = Some(FetchRecord {
                launched: p.launched,
                latency: done - p.launched,
                probes: p.probes,
                hops: p.hops,
                attempts: p.attempts,
                found: out.found(),
            });
        } else {
            self.queue.push(done + self.recursive_timeout, Event::Fetch(i));
        }
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        let Storage::Dynamic(c) = self.storage else {
            return Ok(());
        };
        let key = self.keys[self.rng.random_range(0..self.keys.len())];
        let version = self.versions.entry(key).or_insert(0);
        *version += 1;
        let mut item = DataItem::new(key, self.cfg.item_size);
        item.version = *version;
        let origin = self.random_live();
        dynamic::update(&mut self.ring, &c, origin, item, &mut self.log.bandwidth)?;
        let owners: BTreeSet<Id> = (1..=c.alloc.r_max)
            .filter_map(|m| self.ring.oracle_owner(c.alloc.allocate(m, key)))
            .collect();
        let stale = owners
            .into_iter()
            .filter(|o| {
                self.ring
                    .node(*o)
                    .and_then(|n| n.store.servable(key))
                    .is_some_and(|i| i.version < item.version)
            })
            .count();
        self.log.stale_after_update.push(stale as u32);
        Ok(())
    }

    fn step(&mut self, now: u64, ev: Event) -> Result<()> {
        match ev {
            Event::Fail(n) => {
                if self.ring.is_alive(n) {
                    self.fail(n, now)?;
                    self.queue.push(now + self.cfg.replacement_delay, Event::Join);
                }
            }
            Event::SystemFail => {
                let n = self.random_live();
                self.fail(n, now)?;
                self.queue.push(now + self.cfg.replacement_delay, Event::Join);
                let t = self.lifetime.sample(&mut self.rng).ceil() as u64;
                self.queue.push(now + t.max(1), Event::SystemFail);
            }
            Event::Join => self.join(now),
            Event::Repair(n) => {
                if self.ring.is_alive(n) {
                    self.ring.stabilize(n, &mut self.log.bandwidth)?;
                    self.queue.push(now + self.cfg.chord_repair_interval, Event::Repair(n));
                }
            }
            Event::Maintain(n) => {
                if self.ring.is_alive(n) {
                    let mut bw = std::mem::take(&mut self.log.bandwidth);
                    let r = self.maintain(n, now, &mut bw);
                    self.log.bandwidth = bw;
                    r?;
                    self.queue.push(now + self.interval, Event::Maintain(n));
                }
            }
            Event::Fetch(i) => self.fetch(i, now)?,
            Event::Update => self.update()?,
            Event::LoadReset => {
                self.load.reset();
                self.queue.push(now + self.interval, Event::LoadReset);
            }
        }
        Ok(())
    }

    fn run(mut self, observer: &mut dyn FnMut(&Observation)) -> Result<MetricsLog> {
        self.load_items()?;
        self.warm_up()?;
        self.log.data_bytes = self.keys.len() as u64 * self.cfg.item_size as u64;
        if let ChurnMode::Catastrophe(f) = self.cfg.churn {
            let mut ids = self.ring.live_ids();
            ids.shuffle(&mut self.rng);
            let count = (f * self.cfg.nodes as f64).floor() as usize;
            for n in ids.into_iter().take(count) {
                self.fail(n, 0)?;
            }
        }
        self.schedule();
        // After the horizon only outstanding fetches keep running, for at
        // most one more horizon.
        while let Some((now, seq, ev)) = self.queue.pop() {
            let draining = now > self.end;
            if draining && (now > 2 * self.end || !matches!(ev, Event::Fetch(_))) {
                continue;
            }
            let [tag, arg] = ev.words();
            self.log.trace(&[now, seq, tag, arg]);
            self.step(now, ev)?;
            observer(&Observation {
                time: now,
                ring: &self.ring,
                keys: &self.keys,
                item_size: self.cfg.item_size,
                bandwidth: &self.log.bandwidth,
            });
        }
        for (i, r) in self.records.iter().enumerate() {
            let p = &self.pending[i];
            self.log.fetches.push(r.unwrap_or(FetchRecord {
                launched: p.launched,
                latency: 2 * self.end - p.launched,
                probes: p.probes,
                hops: p.hops,
                attempts: p.attempts,
                found: false,
            }));
        }
        let stored: BTreeSet<Id> = self.ring.nodes().flat_map(|n| n.store.keys()).collect();
        self.log.lost_at_end = self.keys.iter().filter(|k| !stored.contains(k)).count();
        Ok(self.log)
    }
}

/// One run with the given seed.
pub fn run_once(cfg: &ScenarioConfig, seed: u64) -> Result<MetricsLog> {
    Sim::new(cfg, seed)?.run(&mut |_| {})
}

/// One run, calling `observer` after every event.
pub fn run_observed(cfg: &ScenarioConfig, seed: u64, observer: &mut dyn FnMut(&Observation)) -> Result<MetricsLog> {
    Sim::new(cfg, seed)?.run(observer)
}

/// All repeats of a scenario, run in parallel and returned in seed order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<MetricsLog>> {
    cfg.validate()?;
    cfg.seeds().into_par_iter().map(|s| run_once(cfg, s)).collect()
}

/// Simultaneous failure of `fraction` of the nodes after warm-up, then the
/// fetch workload at once with unlimited retries.
pub fn catastrophe(cfg: &ScenarioConfig, fraction: f64) -> Result<Vec<MetricsLog>> {
    let c = ScenarioConfig {
        churn: ChurnMode::Catastrophe(fraction),
        max_retries: None,
        ..cfg.clone()
    };
    run_scenario(&c)
}

#[cfg(test)]
mod tests;
