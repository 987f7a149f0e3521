//! Running moments and normal-approximation confidence intervals.

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.96;

/// Welford accumulator; `merge` is the pairwise update so partial results can
/// be combined in any grouping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn halfwidth95(&self) -> f64 {
        Z95 * self.std_error()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

/// Compensated summation, used for simulation clocks.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    /// Value after adding `x`, without committing it.
    pub fn peek(&self, x: f64) -> f64 {
        let mut c = *self;
        c.add(x);
        c.sum
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_sample_has_zero_variance() {
        let m: Moments = std::iter::repeat_n(7.0, 10).collect();
        assert_eq!(m.mean, 7.0);
        assert_eq!(m.variance(), 0.0);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::default();
        let mut naive = 0.0;
        for _ in 0..10_000_000 {
            k.add(0.1);
            naive += 0.1;
        }
        assert!((k.value() - 1e6).abs() < 1e-6);
        assert!((naive - 1e6f64).abs() > (k.value() - 1e6).abs());
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in proptest::collection::vec(-100.0f64..100.0, 2..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let all: Moments = xs.iter().copied().collect();
            let mut a: Moments = xs[..split].iter().copied().collect();
            let b: Moments = xs[split..].iter().copied().collect();
            a.merge(&b);
            prop_assert_eq!(a.count, all.count);
            prop_assert!((a.mean - all.mean).abs() < 1e-9);
            prop_assert!((a.variance() - all.variance()).abs() < 1e-7 * (1.0 + all.variance()));
            let naive_mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let naive_var = xs.iter().map(|x| (x - naive_mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            prop_assert!((all.variance() - naive_var).abs() < 1e-7 * (1.0 + naive_var));
        }
    }
}
