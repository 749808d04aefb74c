//! Small estimators shared by the Monte Carlo routines and the simulator.

use crate::scalar::Real;

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportion<T> {
    pub successes: u64,
    pub trials: u64,
    pub estimate: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Real> Proportion<T> {
    pub fn wilson(successes: u64, trials: u64, z: T) -> Self {
        if trials == 0 {
            return Self {
                successes,
                trials,
                estimate: T::zero(),
                lower: T::zero(),
                upper: T::one(),
            };
        }
        let n = T::from_count(trials);
        let phat = T::from_count(successes) / n;
        let z2 = z * z;
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let denom = T::one() + z2 / n;
        let centre = (phat + z2 / (two * n)) / denom;
        let half = z * (phat * (T::one() - phat) / n + z2 / (four * n * n)).sqrt() / denom;
        Self {
            successes,
            trials,
            estimate: phat,
            lower: if successes == 0 {
                T::zero()
            } else {
                (centre - half).max(T::zero())
            },
            upper: if successes == trials {
                T::one()
            } else {
                (centre + half).min(T::one())
            },
        }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }

    pub fn contains(&self, x: T) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Mean and standard error of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe<T> {
    pub n: usize,
    pub mean: T,
    pub std_err: T,
}

impl<T: Real> MeanSe<T> {
    pub fn of(xs: &[T]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: T::nan(),
                std_err: T::nan(),
            };
        }
        let nn = T::from_count(n as u64);
        let mean = xs.iter().copied().sum::<T>() / nn;
        if n == 1 {
            return Self {
                n,
                mean,
                std_err: T::zero(),
            };
        }
        let var = xs.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / (nn - T::one());
        Self {
            n,
            mean,
            std_err: (var / nn).sqrt(),
        }
    }

    /// From a count, a sum and a sum of squares.
    pub fn from_moments(n: usize, sum: T, sumsq: T) -> Self {
        if n == 0 {
            return Self {
                n,
                mean: T::nan(),
                std_err: T::nan(),
            };
        }
        let nn = T::from_count(n as u64);
        let mean = sum / nn;
        if n == 1 {
            return Self {
                n,
                mean,
                std_err: T::zero(),
            };
        }
        let var = ((sumsq - sum * mean) / (nn - T::one())).max(T::zero());
        Self {
            n,
            mean,
            std_err: (var / nn).sqrt(),
        }
    }
}

/// Least-squares fit `y = a + b x`, returning `(a, b, R^2)`.
pub fn linear_fit<T: Real>(xs: &[T], ys: &[T]) -> (T, T, T) {
    let n = T::from_count(xs.len() as u64);
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxy = xs.iter().zip(ys).map(|(x, y)| (*x - mx) * (*y - my)).sum::<T>();
    let sxx = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum::<T>();
    let syy = ys.iter().map(|y| (*y - my) * (*y - my)).sum::<T>();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == T::zero() {
        T::one()
    } else {
        sxy * sxy / (sxx * syy)
    };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_value() {
        // 40 of 100 at 95%: textbook interval [0.3094, 0.4980]
        let p = Proportion::wilson(40, 100, Z95);
        assert!((p.lower - 0.3094).abs() < 1e-3);
        assert!((p.upper - 0.4980).abs() < 1e-3);
        let z = Proportion::wilson(0, 1000, Z95);
        assert_eq!(z.lower, 0.0);
        assert!(z.upper > 0.0 && z.upper < 0.005);
    }

    #[test]
    fn mean_and_error() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std_err - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perfect_line() {
        let (a, b, r2) = linear_fit(&[1.0f64, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
