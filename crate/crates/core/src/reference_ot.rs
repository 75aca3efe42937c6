//! Monotone 1D optimal-transport map `G⁻¹ ∘ F` between two empirical
//! distributions, with linear interpolation between order statistics.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Empirical distribution stored as sorted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf<T> {
    sorted: Vec<T>,
}

impl<T: Real> EmpiricalCdf<T> {
    pub fn new(samples: &[T]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::arg("empirical distribution needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::arg("samples contain NaN"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[T] {
        &self.sorted
    }

    /// Fractional rank of `u` in `[0, n − 1]`: `i` at the `i`-th order
    /// statistic, linear in between, the mid-rank on ties, clamped outside.
    pub fn rank(&self, u: T) -> T {
        let s = &self.sorted;
        let n = s.len();
        if u <= s[0] {
            return if u == s[0] {
                mid_rank(0, s.partition_point(|&x| x <= u))
            } else {
                T::zero()
            };
        }
        if u >= s[n - 1] {
            return if u == s[n - 1] {
                mid_rank(s.partition_point(|&x| x < u), n)
            } else {
                T::from_usize_lossy(n - 1)
            };
        }
        let first_ge = s.partition_point(|&x| x < u);
        if s[first_ge] == u {
            return mid_rank(first_ge, s.partition_point(|&x| x <= u));
        }
        let i = first_ge - 1;
        T::from_usize_lossy(i) + (u - s[i]) / (s[i + 1] - s[i])
    }

    /// `F(u)` in `[0, 1]`. A single sample is a step at that sample.
    pub fn cdf(&self, u: T) -> T {
        let n = self.sorted.len();
        if n == 1 {
            return if u < self.sorted[0] { T::zero() } else { T::one() };
        }
        self.rank(u) / T::from_usize_lossy(n - 1)
    }

    /// Order statistic at fractional position `pos` in `[0, n − 1]`.
    fn at_position(&self, pos: T) -> T {
        let s = &self.sorted;
        let last = s.len() - 1;
        if !(pos > T::zero()) {
            return s[0];
        }
        if pos >= T::from_usize_lossy(last) {
            return s[last];
        }
        let i = pos.floor().to_usize().unwrap();
        let frac = pos - T::from_usize_lossy(i);
        if frac == T::zero() {
            s[i]
        } else {
            s[i] + frac * (s[i + 1] - s[i])
        }
    }

    /// `G⁻¹(p)` for `p` in `[0, 1]`.
    pub fn quantile(&self, p: T) -> T {
        self.at_position(p * T::from_usize_lossy(self.sorted.len() - 1))
    }
}

fn mid_rank<T: Real>(first: usize, end: usize) -> T {
    T::from_usize_lossy(first + end - 1) / T::lit(2.0)
}

/// `φ(u) = G⁻¹(F(u))` for a fixed pair of sample sets.
#[derive(Debug, Clone)]
pub struct OtMap1d<T> {
    source: EmpiricalCdf<T>,
    target: EmpiricalCdf<T>,
}

impl<T: Real> OtMap1d<T> {
    pub fn new(source: &[T], target: &[T]) -> Result<Self> {
        Ok(Self {
            source: EmpiricalCdf::new(source)?,
            target: EmpiricalCdf::new(target)?,
        })
    }

    pub fn apply(&self, u: T) -> T {
        let (n, m) = (self.source.len(), self.target.len());
        if n == 1 {
            return self.target.quantile(self.source.cdf(u));
        }
        // Multiply before dividing so integer ranks land on integer positions.
        let pos = self.source.rank(u) * T::from_usize_lossy(m - 1) / T::from_usize_lossy(n - 1);
        self.target.at_position(pos)
    }
}

pub fn ot_map_1d<T: Real>(source: &[T], target: &[T], u: T) -> Result<T> {
    Ok(OtMap1d::new(source, target)?.apply(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_map_is_identity_on_samples() {
        let s = [0.3, -1.0, 2.5, 0.0, 0.7];
        let map = OtMap1d::new(&s, &s).unwrap();
        for &u in &s {
            assert_eq!(map.apply(u), u);
        }
    }

    #[test]
    fn two_point_rank_matching() {
        assert_eq!(ot_map_1d(&[0.0, 1.0], &[10.0, 20.0], 0.0).unwrap(), 10.0);
        assert_eq!(ot_map_1d(&[0.0, 1.0], &[10.0, 20.0], 1.0).unwrap(), 20.0);
        assert_eq!(ot_map_1d(&[0.0, 1.0], &[10.0, 20.0], 0.5).unwrap(), 15.0);
    }

    #[test]
    fn order_statistics_map_to_order_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src: Vec<f64> = (0..37).map(|_| rng.random()).collect();
        let tgt: Vec<f64> = (0..37).map(|_| rng.random_range(5.0..9.0)).collect();
        let map = OtMap1d::new(&src, &tgt).unwrap();
        let (mut a, mut b) = (src.clone(), tgt.clone());
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (u, v) in a.iter().zip(b.iter()) {
            assert_eq!(map.apply(*u), *v);
        }
    }

    #[test]
    fn clamps_outside_the_support() {
        let map = OtMap1d::new(&[0.0, 1.0, 2.0], &[5.0, 6.0]).unwrap();
        assert_eq!(map.apply(-10.0), 5.0);
        assert_eq!(map.apply(10.0), 6.0);
    }

    #[test]
    fn singletons() {
        assert_eq!(ot_map_1d(&[3.0], &[1.0, 2.0, 9.0], 3.0).unwrap(), 9.0);
        assert_eq!(ot_map_1d(&[0.0, 1.0], &[4.0], 0.4).unwrap(), 4.0);
        assert!(ot_map_1d::<f64>(&[], &[1.0], 0.0).is_err());
    }

    #[test]
    fn cdf_is_bounded_and_monotone() {
        let cdf = EmpiricalCdf::new(&[1.0, 1.0, 2.0, 4.0]).unwrap();
        let mut prev = -1.0;
        for i in 0..=60 {
            let v = cdf.cdf(i as f64 * 0.1 - 0.5);
            assert!((0.0..=1.0).contains(&v) && v >= prev);
            prev = v;
        }
        assert_eq!(cdf.rank(1.0), 0.5);
    }

    proptest! {
        #[test]
        fn map_is_monotone(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..30);
            let m = rng.random_range(1..30);
            // Coarse grid so ties occur.
            let src: Vec<f64> = (0..n).map(|_| (rng.random_range(-1.5..1.5f64) * 4.0).round() / 4.0).collect();
            let tgt: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
            let map = OtMap1d::new(&src, &tgt).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(map.apply(lo) <= map.apply(hi));
        }
    }
}
