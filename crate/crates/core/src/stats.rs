use rayon::prelude::*;
use libm::erfc;
use std::f64::consts::SQRT_2;

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    // beyond 8.3 the tail is below half an ulp of 1
    if x > 8.3 {
        return 1.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Running mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Welford) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = (self.n + o.n) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n;
        self.n += o.n;
    }

    /// Unbiased sample variance.
    pub fn var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.var().sqrt()
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.var() / self.n as f64).sqrt()
    }
}

/// Fixed chunk size for parallel loops. Chunk boundaries depend only on the
/// problem size, never on the thread count.
pub const CHUNK: usize = 256;

/// Runs `f` over `0..n` in fixed chunks and returns per-chunk results in index order.
pub fn par_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let nchunks = n.div_ceil(CHUNK);
    (0..nchunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}

/// Merges a list of accumulator arrays in order.
pub fn merge_all<const K: usize>(parts: &[[Welford; K]]) -> [Welford; K] {
    let mut out = [Welford::new(); K];
    for p in parts {
        for (o, w) in out.iter_mut().zip(p.iter()) {
            o.merge(w);
        }
    }
    out
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 2e-16);
        assert!((norm_cdf(-1.0) - 0.15865525393145707).abs() < 1e-16);
        assert!(norm_cdf(-40.0) >= 0.0 && norm_cdf(40.0) == 1.0);
    }

    #[test]
    fn quantiles() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 0.9), 3.6);
        assert_eq!(quantile_sorted(&v, 0.0), 0.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn welford_small() {
        let mut w = Welford::new();
        w.push(0.0);
        w.push(1.0);
        assert_eq!(w.mean, 0.5);
        assert!((w.var() - 0.5).abs() < 1e-15);
        let mut c = Welford::new();
        for _ in 0..10 {
            c.push(3.0);
        }
        assert_eq!(c.std(), 0.0);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
            let cut = cut.min(xs.len());
            let mut all = Welford::new();
            xs.iter().for_each(|&x| all.push(x));
            let (mut a, mut b) = (Welford::new(), Welford::new());
            xs[..cut].iter().for_each(|&x| a.push(x));
            xs[cut..].iter().for_each(|&x| b.push(x));
            a.merge(&b);
            prop_assert_eq!(a.n, all.n);
            prop_assert!((a.mean - all.mean).abs() < 1e-9);
            prop_assert!((a.var() - all.var()).abs() < 1e-7 * (1.0 + all.var()));
        }
    }
}
