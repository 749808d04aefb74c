//! Closed forms checked against their independent oracles.

use chordrep::analysis::collision::collision_bound;
use chordrep::analysis::run::{
    combine_intervals, expected_probes, fail_probability, missing_fraction, run_probability, run_probability_enumerate,
    run_probability_oracle,
};
use chordrep::{Exact, RunParams};
use num_bigint::BigInt;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn ps() -> impl Iterator<Item = f64> {
    (1..=19).map(|i| i as f64 * 0.05)
}

fn run_vs_dp() -> Check {
    let mut worst = 0f64;
    for p in ps() {
        for r in 1..=8 {
            for n in 1..=64 {
                let fast = run_probability(&RunParams::new(p, r, n).expect("valid"));
                worst = worst.max((fast - run_probability_oracle(&p, r, n)).abs());
            }
        }
    }
    Check {
        name: "run probability vs dynamic program",
        passed: worst <= 1e-12,
        detail: format!("max error {worst:e}"),
    }
}

fn run_vs_enumeration() -> Check {
    let mut worst = 0f64;
    for p in ps() {
        for r in 1..=8 {
            for n in 1..=16 {
                let fast = run_probability(&RunParams::new(p, r, n).expect("valid"));
                worst = worst.max((fast - run_probability_enumerate(&p, r, n)).abs());
            }
        }
    }
    Check {
        name: "run probability vs enumeration",
        passed: worst <= 1e-12,
        detail: format!("max error {worst:e}"),
    }
}

fn dp_is_exact() -> Check {
    let mut ok = true;
    for (num, den) in [(1, 2), (1, 16), (3, 7)] {
        let p = Exact::new(BigInt::from(num), BigInt::from(den));
        for r in 1..=4 {
            for n in 1..=10 {
                ok &= run_probability_oracle(&p, r, n) == run_probability_enumerate(&p, r, n);
            }
        }
    }
    Check {
        name: "exact dynamic program vs enumeration",
        passed: ok,
        detail: "rational arithmetic".into(),
    }
}

fn fail_identity() -> Check {
    let mut worst = 0f64;
    for &(n, r) in &[(50u32, 4u32), (200, 6), (500, 10)] {
        for s in [1u64, 4, 16, 64] {
            let p = missing_fraction::<f64>(r, s, false);
            let run = run_probability(&RunParams::new(p, r, n).expect("valid"));
            let by_parts = 1.0 - (1.0 - run).powi(s as i32);
            let fail = fail_probability::<f64>(n, r, s, false);
            worst = worst
                .max((fail - by_parts).abs())
                .max((fail - combine_intervals(run, s)).abs());
        }
    }
    Check {
        name: "fail probability from components",
        passed: worst <= 1e-12,
        detail: format!("max error {worst:e}"),
    }
}

fn probes() -> Check {
    let want = [2.0, 4.0 / 3.0, 8.0 / 7.0, 16.0 / 15.0];
    let ok = [1u64, 2, 4, 8]
        .iter()
        .zip(want)
        .all(|(&s, w)| (expected_probes::<f64>(s) - w).abs() < 1e-15);
    Check {
        name: "expected probes",
        passed: ok,
        detail: "S = 1, 2, 4, 8".into(),
    }
}

fn collision() -> Check {
    let k = 2f64.powi(32);
    let b = collision_bound(4, k, 500.0);
    let want = (4.0 + 1.645 * 2.0) * k / 500.0;
    Check {
        name: "collision bound",
        passed: (b - want).abs() <= want * 1e-15,
        detail: format!("r = 4: {b}"),
    }
}

pub fn run() -> Vec<Check> {
    vec![
        run_vs_dp(),
        run_vs_enumeration(),
        dp_is_exact(),
        fail_identity(),
        probes(),
        collision(),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_check_passes() {
        for c in super::run() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
