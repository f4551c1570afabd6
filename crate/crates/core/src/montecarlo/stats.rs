use serde::Serialize;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathBatchStats {
    pub mean: f64,
    /// Sample standard deviation over √n_effective.
    pub std_error: f64,
    /// Independent samples (antithetic pairs count once).
    pub n_effective: usize,
}

/// Welford accumulator; `merge` combines disjoint batches exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn finish(&self) -> PathBatchStats {
        PathBatchStats {
            mean: self.mean,
            std_error: (self.variance() / self.n.max(1) as f64).sqrt(),
            n_effective: self.n as usize,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn merge_equals_single_pass(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
            let cut = cut.min(xs.len());
            let mut all = RunningStats::default();
            xs.iter().for_each(|x| all.push(*x));
            let (mut a, mut b) = (RunningStats::default(), RunningStats::default());
            xs[..cut].iter().for_each(|x| a.push(*x));
            xs[cut..].iter().for_each(|x| b.push(*x));
            a.merge(&b);
            prop_assert_eq!(a.count(), all.count());
            prop_assert!((a.mean() - all.mean()).abs() < 1e-9 * (1.0 + all.mean().abs()));
            prop_assert!((a.variance() - all.variance()).abs() < 1e-7 * (1.0 + all.variance()));
        }
    }

    #[test]
    fn two_point_sample() {
        let mut s = RunningStats::default();
        s.push(1.0);
        s.push(3.0);
        let f = s.finish();
        assert_eq!(f.mean, 2.0);
        assert!((f.std_error - 1.0).abs() < 1e-15);
        assert_eq!(f.n_effective, 2);
    }
}
