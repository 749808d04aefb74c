//! The run problem: probability of at least `r` consecutive successes in
//! `N` Bernoulli(`p`) trials, and the maintenance-frequency results built on
//! it.

use num_traits::Num;

use crate::error::{Error, Result};
use crate::scalar::{KahanSum, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunProblemParams<T> {
    pub p: T,
    pub r: u32,
    pub n: u32,
}

impl<T: Real> RunProblemParams<T> {
    pub fn new(p: T, r: u32, n: u32) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::Config(format!("p must lie in [0, 1], got {p:?}")));
        }
        if r == 0 {
            return Err(Error::Config("run length r must be at least 1".into()));
        }
        Ok(Self { p, r, n })
    }
}

/// `RUN(p, r, N)` from the generating function
/// `F(s) = p^r s^r (1 - p s) / (1 - s + (1 - p) p^r s^(r+1))`.
///
/// The coefficient `c_i` is the probability that the first run completes at
/// trial `i`; the denominator gives the recurrence
/// `c_n = c_(n-1) - (1 - p) p^r c_(n-r-1)` for `n >= r + 2`, seeded with
/// `c_r = p^r` and `c_(r+1) = (1 - p) p^r`. The sum `c_r + ... + c_N` is
/// accumulated with Kahan compensation.
pub fn run_probability<T: Real>(params: &RunProblemParams<T>) -> T {
    let RunProblemParams { p, r, n } = *params;
    if n < r || p == T::zero() {
        return T::zero();
    }
    if p == T::one() {
        return T::one();
    }
    let (r, n) = (r as usize, n as usize);
    let q = T::one() - p;
    let pr = p.powi(r as i32);
    let qpr = q * pr;
    // c[j] holds c_(r + j)
    let mut c: Vec<T> = Vec::with_capacity(n - r + 1);
    let mut total = KahanSum::default();
    for i in r..=n {
        let j = i - r;
        let ci = match j {
            0 => pr,
            1 => qpr,
            _ => {
                let back = if j > r { c[j - r - 1] } else { T::zero() };
                let v = c[j - 1] - qpr * back;
                if v < T::zero() {
                    T::zero()
                } else {
                    v
                }
            }
        };
        c.push(ci);
        total.add(ci);
    }
    total.value().min(T::one())
}

/// Independent check of [`run_probability`]: forward dynamic program over
/// the length of the current trailing run. Works for any field-like type,
/// including exact rationals.
pub fn run_probability_oracle<T: Num + Clone>(p: &T, r: u32, n: u32) -> T {
    let r = r as usize;
    let q = T::one() - p.clone();
    // alive[j]: probability of trailing run length j with no completed run
    let mut alive = vec![T::zero(); r.max(1)];
    alive[0] = T::one();
    let mut done = T::zero();
    for _ in 0..n {
        let mut next = vec![T::zero(); r];
        let mut stay = T::zero();
        for a in &alive {
            stay = stay + a.clone();
        }
        next[0] = q.clone() * stay;
        for j in 0..r {
            let extend = p.clone() * alive[j].clone();
            if j + 1 == r {
                done = done + extend;
            } else {
                next[j + 1] = next[j + 1].clone() + extend;
            }
        }
        alive = next;
    }
    done
}

/// Brute force over all `2^N` outcome sequences (N <= 24): counts the
/// sequences containing a run for each number of successes `k`, then sums
/// `count_k · p^k · (1 - p)^(N - k)`.
pub fn run_probability_enumerate<T: Num + Clone>(p: &T, r: u32, n: u32) -> T {
    assert!(n <= 24, "enumeration limited to N <= 24");
    let mut hits = vec![0u64; n as usize + 1];
    for mask in 0u32..(1u32 << n) {
        let mut run = 0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                run += 1;
                if run >= r {
                    hits[mask.count_ones() as usize] += 1;
                    break;
                }
            } else {
                run = 0;
            }
        }
    }
    let q = T::one() - p.clone();
    let pow = |x: &T, e: u32| (0..e).fold(T::one(), |acc, _| acc * x.clone());
    let mut total = T::zero();
    for (k, &c) in hits.iter().enumerate() {
        if c == 0 {
            continue;
        }
        // c < 2^24, built by doubling so any Num type can represent it
        let mut count = T::zero();
        for bit in (0..64).rev() {
            count = count.clone() + count;
            if c >> bit & 1 == 1 {
                count = count + T::one();
            }
        }
        total = total + count * pow(p, k as u32) * pow(&q, n - k as u32);
    }
    total
}

/// Missing-replica fraction used for `S` maintenance runs per half life.
pub fn missing_fraction<T: Real>(r: u32, s: u64, refined: bool) -> T {
    let s = T::from_count(s);
    if refined {
        let r = T::from_count(r as u64);
        (T::lit(2.0) * r + T::one()) / (T::lit(4.0) * r * s)
    } else {
        T::one() / (T::lit(2.0) * s)
    }
}

/// `FAIL(N, r, S) = 1 - (1 - RUN(p, r, N))^S`, with `p = 1/(2S)` or, when
/// `refined`, `p = (2r + 1)/(4rS)`.
pub fn fail_probability<T: Real>(n: u32, r: u32, s: u64, refined: bool) -> T {
    assert!(s >= 1, "S must be at least 1");
    let p = missing_fraction::<T>(r, s, refined).min(T::one());
    let run = run_probability(&RunProblemParams { p, r, n });
    combine_intervals(run, s)
}

/// `1 - (1 - run)^S`, evaluated without cancellation for tiny `run`.
pub fn combine_intervals<T: Real>(run: T, s: u64) -> T {
    if run >= T::one() {
        return T::one();
    }
    -(T::from_count(s) * (-run).ln_1p()).exp_m1()
}

/// Smallest `S` with `FAIL(N, r, S) <= target`, by doubling then binary
/// search. `None` when no `S` up to 2^40 reaches the target.
pub fn min_repairs<T: Real>(n: u32, r: u32, target: T, refined: bool) -> Option<u64> {
    let ok = |s: u64| fail_probability::<T>(n, r, s, refined) <= target;
    if ok(1) {
        return Some(1);
    }
    let mut hi = 2u64;
    while !ok(hi) {
        if hi >= 1 << 40 {
            return None;
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Expected probes per fetch when a fraction `1/(2S)` of replicas is
/// missing: `2S / (2S - 1)`.
pub fn expected_probes<T: Real>(s: u64) -> T {
    assert!(s >= 1, "S must be at least 1");
    let two_s = T::lit(2.0) * T::from_count(s);
    two_s / (two_s - T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Exact = Ratio<BigInt>;

    fn exact(num: i64, den: i64) -> Exact {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }

    fn run(p: f64, r: u32, n: u32) -> f64 {
        run_probability(&RunProblemParams::new(p, r, n).unwrap())
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(run(0.0, 3, 50), 0.0);
        assert_eq!(run(0.7, 5, 4), 0.0);
        assert_eq!(run(1.0, 4, 4), 1.0);
        assert_eq!(run(1.0, 1, 9), 1.0);
    }

    #[test]
    fn half_two_three_is_three_eighths() {
        assert_eq!(run_probability_enumerate(&exact(1, 2), 2, 3), exact(3, 8));
        assert_eq!(run_probability_oracle(&exact(1, 2), 2, 3), exact(3, 8));
        assert!((run(0.5, 2, 3) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn single_run_closed_form() {
        assert_eq!(run_probability_oracle(&exact(1, 2), 1, 2), exact(3, 4));
        let want = 1.0 - 0.7f64.powi(5);
        assert!((run_probability_oracle(&0.3f64, 1, 5) - want).abs() < 1e-15);
        assert!((run(0.3, 1, 5) - want).abs() < 1e-15);
    }

    #[test]
    fn exact_oracle_matches_enumeration() {
        for n in 0..=10 {
            for r in 1..=4 {
                for (a, b) in [(1, 3), (1, 2), (5, 7)] {
                    let p = exact(a, b);
                    assert_eq!(run_probability_oracle(&p, r, n), run_probability_enumerate(&p, r, n));
                }
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(RunProblemParams::new(1.5f64, 2, 3).is_err());
        assert!(RunProblemParams::new(0.5f64, 0, 3).is_err());
        assert!(RunProblemParams::new(f64::NAN, 2, 3).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p32 = run_probability(&RunProblemParams::new(0.5f32, 2, 3).unwrap());
        assert!((p32 - 0.375).abs() < 1e-6);
        let f32_fail: f32 = fail_probability(500, 8, 8, false);
        let f64_fail: f64 = fail_probability(500, 8, 8, false);
        assert!(((f32_fail as f64) - f64_fail).abs() / f64_fail < 1e-3);
    }

    #[test]
    fn fail_with_one_interval_is_run_at_half() {
        for r in [2, 4, 8] {
            let f: f64 = fail_probability(100, r, 1, false);
            assert!((f - run(0.5, r, 100)).abs() < 1e-15);
        }
        let f: f64 = fail_probability(3, 4, 7, false);
        assert_eq!(f, 0.0);
    }

    #[test]
    fn refined_fraction() {
        let p: f64 = missing_fraction(4, 2, true);
        assert!((p - 9.0 / 32.0).abs() < 1e-15);
        let p: f64 = missing_fraction(4, 2, false);
        assert_eq!(p, 0.25);
    }

    #[test]
    fn fail_decreases_as_s_doubles() {
        let mut prev = f64::INFINITY;
        for s in [4u64, 8, 16, 32, 64] {
            let f: f64 = fail_probability(500, 8, s, false);
            assert!(f < prev, "S={s}: {f} !< {prev}");
            prev = f;
        }
    }

    #[test]
    fn fail_matches_components() {
        for (n, r, s) in [(500, 6, 10u64), (50, 12, 3), (200, 4, 40)] {
            let f: f64 = fail_probability(n, r, s, false);
            let run = run(1.0 / (2.0 * s as f64), r, n);
            assert!((f - (1.0 - (1.0 - run).powi(s as i32))).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn min_repairs_examples() {
        assert_eq!(min_repairs(10, 40, 1e-6f64, false), Some(1));
        let mut prev = u64::MAX;
        for r in 4..=20 {
            let s = min_repairs(500, r, 1e-6f64, false).unwrap();
            assert!(s <= prev);
            assert!(fail_probability::<f64>(500, r, s, false) <= 1e-6);
            if s > 1 {
                assert!(fail_probability::<f64>(500, r, s - 1, false) > 1e-6);
            }
            prev = s;
        }
        let mut prev = 0;
        for n in [50, 100, 200, 300, 400, 500] {
            let s = min_repairs(n, 6, 1e-6f64, false).unwrap();
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn probe_expectation() {
        assert_eq!(expected_probes::<f64>(1), 2.0);
        assert!((expected_probes::<f64>(4) - 8.0 / 7.0).abs() < 1e-15);
        assert!((expected_probes::<f64>(1_000_000) - 1.0) < 1e-6);
    }

    proptest! {
        #[test]
        fn matches_dp_oracle(p in 0.0f64..=1.0, r in 1u32..=8, n in 0u32..=64) {
            let a = run(p, r, n);
            let b = run_probability_oracle(&p, r, n);
            prop_assert!((a - b).abs() <= 1e-12, "p={} r={} n={} {} vs {}", p, r, n, a, b);
        }

        #[test]
        fn monotone(p in 0.0f64..0.99, r in 1u32..=8, n in 1u32..=60) {
            let base = run(p, r, n);
            prop_assert!(run(p + 0.01, r, n) >= base - 1e-15);
            prop_assert!(run(p, r, n + 1) >= base - 1e-15);
            prop_assert!(run(p, r + 1, n) <= base + 1e-15);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
