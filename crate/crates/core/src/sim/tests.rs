use super::*;
use crate::alloc::AllocationKind;

fn small(algorithm: Algorithm, churn: ChurnMode) -> ScenarioConfig {
    ScenarioConfig {
        nodes: 32,
        algorithm,
        items_per_node: 10,
        churn,
        fetches: 400,
        maintenance_per_half_life: 4,
        repeats: 2,
        ..Default::default()
    }
}

const CLASSES: [ChurnMode; 4] = [
    ChurnMode::None,
    ChurnMode::Steady,
    ChurnMode::SystemWide,
    ChurnMode::Catastrophe(0.25),
];

#[test]
fn identical_seed_gives_identical_log() {
    for churn in CLASSES {
        for algorithm in [Algorithm::DHash, Algorithm::Dynamic(AllocationKind::Block)] {
            let cfg = small(algorithm, churn);
            let a = run_once(&cfg, 7).unwrap();
            let b = run_once(&cfg, 7).unwrap();
            assert_eq!(a, b, "{algorithm} {churn}");
            assert_ne!(a.trace_hash, run_once(&cfg, 8).unwrap().trace_hash);
        }
    }
}

#[test]
fn parallel_repeats_match_sequential_runs() {
    let cfg = small(Algorithm::Dynamic(AllocationKind::Finger), ChurnMode::Steady);
    let logs = run_scenario(&cfg).unwrap();
    for (log, seed) in logs.iter().zip(cfg.seeds()) {
        assert_eq!(*log, run_once(&cfg, seed).unwrap());
    }
}

#[test]
fn no_churn_means_no_loss_and_no_movement() {
    for algorithm in Algorithm::ALL {
        let cfg = ScenarioConfig {
            maintenance_per_half_life: 1,
            ..small(algorithm, ChurnMode::None)
        };
        let log = run_once(&cfg, 3).unwrap();
        assert_eq!(log.failures, 0);
        assert!(log.losses.is_empty());
        assert_eq!(log.lost_at_end, 0);
        assert_eq!(log.bandwidth.bytes(Category::DataMovement), 0, "{algorithm}");
        assert_eq!(log.success_rate(), 1.0);
    }
}

#[test]
fn stored_bytes_are_conserved_without_churn() {
    for algorithm in [Algorithm::DHash, Algorithm::Dynamic(AllocationKind::Predecessor)] {
        let cfg = small(algorithm, ChurnMode::None);
        let mut checked = 0;
        run_observed(&cfg, 5, &mut |o| {
            let stored: BTreeSet<Id> = o.ring.nodes().flat_map(|n| n.store.keys()).collect();
            let inserted = o.keys.len() as u64 * o.item_size as u64;
            assert_eq!(stored.len() as u64 * o.item_size as u64, inserted);
            checked += 1;
        })
        .unwrap();
        assert!(checked > 100);
    }
}

#[test]
fn clock_never_runs_backwards() {
    for churn in CLASSES {
        let cfg = small(Algorithm::Dynamic(AllocationKind::Successor), churn);
        let mut last = 0;
        let mut moved = 0u64;
        run_observed(&cfg, 9, &mut |o| {
            assert!(o.time >= last);
            // Traffic counters only grow: nothing is delivered before it is sent.
            assert!(o.bandwidth.total_bytes() >= moved);
            last = o.time;
            moved = o.bandwidth.total_bytes();
        })
        .unwrap();
    }
}

#[test]
fn warm_up_reaches_every_invariant() {
    for algorithm in Algorithm::ALL {
        let cfg = small(algorithm, ChurnMode::None);
        let mut first = true;
        run_observed(&cfg, 11, &mut |o| {
            if !first {
                return;
            }
            first = false;
            match algorithm {
                Algorithm::DHash => assert!(dhash::placement_invariant_holds(o.ring, &cfg.dhash())),
                Algorithm::Dynamic(_) => {
                    let a = cfg.allocation().unwrap();
                    assert!(dynamic::served_replicas_addressable(o.ring, &a));
                    for &k in o.keys {
                        let group: BTreeSet<Id> = dynamic::expected_core_group(o.ring, &a, k).into_iter().collect();
                        let held: BTreeSet<Id> = o
                            .ring
                            .nodes()
                            .filter(|n| n.store.servable(k).is_some())
                            .map(|n| n.id)
                            .collect();
                        assert_eq!(held, group, "{algorithm}");
                    }
                }
            }
        })
        .unwrap();
    }
}

#[test]
fn one_sample_per_launched_fetch() {
    for churn in CLASSES {
        let cfg = small(Algorithm::DHash, churn);
        let log = run_once(&cfg, 13).unwrap();
        assert_eq!(log.fetches.len(), cfg.fetches);
        assert!(log.fetches.iter().all(|f| f.attempts >= 1 && f.probes >= 1 || !f.found));
    }
}

#[test]
fn half_life_replaces_about_half_the_nodes() {
    let cfg = ScenarioConfig {
        nodes: 200,
        items_per_node: 1,
        fetches: 0,
        maintenance_per_half_life: 1,
        ..Default::default()
    };
    let expected = cfg.nodes as f64 / 2.0;
    let band = 3.0 * expected.sqrt();
    let mut total = 0.0;
    for seed in 0..4 {
        let log = run_once(&cfg, seed).unwrap();
        assert!((log.failures as f64 - expected).abs() <= band, "{}", log.failures);
        assert_eq!(log.joins, log.failures);
        total += log.failures as f64;
    }
    assert!((total / 4.0 - expected).abs() <= band / 2.0);
}

#[test]
fn no_catastrophe_matches_quiet_baseline() {
    let cfg = ScenarioConfig {
        fetches: 2000,
        ..small(Algorithm::DHash, ChurnMode::None)
    };
    let quiet = run_once(&cfg, 15).unwrap();
    let burst = catastrophe(&cfg, 0.0).unwrap().remove(0);
    let (q, b) = (quiet.latency(), burst.latency());
    assert!(
        (q.mean - b.mean).abs() <= 4.0 * (q.std_err + b.std_err),
        "{} vs {}",
        q.mean,
        b.mean
    );
    assert_eq!(burst.failures, 0);
}

#[test]
fn strict_updates_leave_no_stale_location_owner() {
    let base = ScenarioConfig {
        updates: 300,
        ..small(Algorithm::Dynamic(AllocationKind::Successor), ChurnMode::None)
    };
    let strict = ScenarioConfig {
        update_mode: crate::dynamic::UpdateMode::Strict,
        ..base.clone()
    };
    let log = run_once(&strict, 17).unwrap();
    assert_eq!(log.stale_after_update.len(), 300);
    assert!(log.stale_after_update.iter().all(|s| *s == 0));
}
