//! Parametric 1D non-rigid transform
//! `φ(u) = c0 + c1·u + Σ_l w_l·|u − u_l|` over fixed control points `u_l`.
//!
//! The map is linear in its parameters `θ = (c0, c1, w_1..w_r)`, so evaluating
//! it on a sample set is a product with the design matrix whose row for `u`
//! is `[1, u, |u − u_1|, …, |u − u_r|]`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_CONTROL_POINTS: usize = 125;

#[derive(Debug, Clone, PartialEq)]
pub struct Transform1D<T> {
    pub c0: T,
    pub c1: T,
    pub weights: Vec<T>,
    pub control_points: Vec<T>,
}

impl<T: Real> Transform1D<T> {
    /// `φ(u) = u` over the given controls.
    pub fn identity(control_points: Vec<T>) -> Self {
        Self {
            c0: T::zero(),
            c1: T::one(),
            weights: vec![T::zero(); control_points.len()],
            control_points,
        }
    }

    /// Builds a transform from a packed parameter vector `[c0, c1, w_1..w_r]`.
    pub fn from_params(params: ArrayView1<T>, control_points: Vec<T>) -> Result<Self> {
        if params.len() != control_points.len() + 2 {
            return Err(Error::dim(format!(
                "{} parameters for {} control points",
                params.len(),
                control_points.len()
            )));
        }
        Ok(Self {
            c0: params[0],
            c1: params[1],
            weights: params.iter().skip(2).copied().collect(),
            control_points,
        })
    }

    pub fn params(&self) -> Array1<T> {
        let mut p = Vec::with_capacity(self.param_count());
        p.push(self.c0);
        p.push(self.c1);
        p.extend_from_slice(&self.weights);
        Array1::from(p)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + 2
    }

    pub fn is_identity(&self) -> bool {
        self.c0 == T::zero() && self.c1 == T::one() && self.weights.iter().all(|w| *w == T::zero())
    }

    pub fn apply(&self, u: T) -> T {
        let mut acc = self.c0 + self.c1 * u;
        for (&w, &ul) in self.weights.iter().zip(self.control_points.iter()) {
            acc += w * (u - ul).abs();
        }
        acc
    }

    pub fn apply_all(&self, values: &[T]) -> Vec<T> {
        values.iter().map(|&u| self.apply(u)).collect()
    }

    /// `(1 − λ)·self + λ·other`, parameter-wise.
    pub fn interpolate(&self, other: &Self, lambda: T) -> Result<Self> {
        check_lambda(lambda)?;
        if self.control_points != other.control_points {
            return Err(Error::ControlPointMismatch);
        }
        let a = T::one() - lambda;
        Ok(Self {
            c0: a * self.c0 + lambda * other.c0,
            c1: a * self.c1 + lambda * other.c1,
            weights: self
                .weights
                .iter()
                .zip(other.weights.iter())
                .map(|(&x, &y)| a * x + lambda * y)
                .collect(),
            control_points: self.control_points.clone(),
        })
    }
}

pub(crate) fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::arg(format!("interpolation weight {lambda} is outside [0, 1]")));
    }
    Ok(())
}

/// `r` equally spaced points from `min(values)` to `max(values)`; a single
/// point sits at the midpoint.
pub fn place_control_points<T: Real>(values: &[T], r: usize) -> Result<Vec<T>> {
    if values.len() < 2 {
        return Err(Error::arg(format!("need at least 2 values, got {}", values.len())));
    }
    if r == 0 {
        return Err(Error::arg("need at least one control point"));
    }
    let (lo, hi) = values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        return Err(Error::DegenerateRange);
    }
    if r == 1 {
        return Ok(vec![lo + (hi - lo) / T::lit(2.0)]);
    }
    let step = (hi - lo) / T::from_usize_lossy(r - 1);
    let mut pts: Vec<T> = (0..r).map(|l| lo + step * T::from_usize_lossy(l)).collect();
    pts[r - 1] = hi;
    Ok(pts)
}

pub fn design_matrix<T: Real>(values: &[T], control_points: &[T]) -> Array2<T> {
    let r = control_points.len();
    let mut m = Array2::zeros((values.len(), r + 2));
    for (mut row, &u) in m.rows_mut().into_iter().zip(values.iter()) {
        row[0] = T::one();
        row[1] = u;
        for (slot, &ul) in row.iter_mut().skip(2).zip(control_points.iter()) {
            *slot = (u - ul).abs();
        }
    }
    m
}

/// Per-axis map used by the transfer loop: either a single fitted transform,
/// or a pointwise blend of two transforms whose control grids differ.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisMap<T> {
    Single(Transform1D<T>),
    Blend {
        corr: Transform1D<T>,
        nocorr: Transform1D<T>,
        lambda: T,
    },
}

impl<T: Real> AxisMap<T> {
    /// `(1 − λ)·corr + λ·nocorr`. The endpoints return the corresponding
    /// transform unchanged.
    pub fn blend(corr: Transform1D<T>, nocorr: Transform1D<T>, lambda: T) -> Result<Self> {
        check_lambda(lambda)?;
        if lambda == T::zero() {
            return Ok(AxisMap::Single(corr));
        }
        if lambda == T::one() {
            return Ok(AxisMap::Single(nocorr));
        }
        match corr.interpolate(&nocorr, lambda) {
            Ok(t) => Ok(AxisMap::Single(t)),
            Err(Error::ControlPointMismatch) => Ok(AxisMap::Blend { corr, nocorr, lambda }),
            Err(e) => Err(e),
        }
    }

    pub fn apply(&self, u: T) -> T {
        match self {
            AxisMap::Single(t) => t.apply(u),
            AxisMap::Blend { corr, nocorr, lambda } => (T::one() - *lambda) * corr.apply(u) + *lambda * nocorr.apply(u),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, AxisMap::Single(t) if t.is_identity())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_transform(rng: &mut ChaCha8Rng, r: usize) -> Transform1D<f64> {
        let controls = place_control_points(&[-1.0, 2.0], r).unwrap();
        Transform1D {
            c0: rng.random_range(-1.0..1.0),
            c1: rng.random_range(-2.0..2.0),
            weights: (0..r).map(|_| rng.random_range(-1.0..1.0)).collect(),
            control_points: controls,
        }
    }

    #[test]
    fn regular_grid() {
        let pts = place_control_points(&[0.3, 0.0, 1.0, 0.7], 5).unwrap();
        assert_eq!(pts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(place_control_points(&[2.0, 4.0], 1).unwrap(), vec![3.0]);
    }

    #[test]
    fn default_grid_has_125_points() {
        let values = [-0.4f64, 1.84, 0.3];
        let pts = place_control_points(&values, DEFAULT_CONTROL_POINTS).unwrap();
        assert_eq!(pts.len(), 125);
        let step = (1.84 - -0.4) / 124.0;
        for w in pts.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
        assert_eq!(Transform1D::identity(pts).param_count(), 127);
    }

    #[test]
    fn degenerate_range_is_rejected() {
        assert!(matches!(
            place_control_points(&[1.0, 1.0, 1.0], 5),
            Err(Error::DegenerateRange)
        ));
        assert!(place_control_points(&[1.0], 5).is_err());
        assert!(place_control_points(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn identity_parameters_are_a_no_op() {
        let t = Transform1D::identity(vec![0.0, 0.5, 1.0]);
        for u in [-3.0, 0.0, 0.2, 0.5, 7.0] {
            assert_eq!(t.apply(u), u);
        }
        assert!(t.is_identity());
    }

    #[test]
    fn single_kernel_evaluation() {
        let t = Transform1D {
            c0: 0.0,
            c1: 0.0f64,
            weights: vec![2.0],
            control_points: vec![0.5],
        };
        assert!((t.apply(0.7) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn kinks_only_at_control_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_transform(&mut rng, 6);
        let h = 1e-3;
        let second = |u: f64| t.apply(u + h) - 2.0 * t.apply(u) + t.apply(u - h);
        for &c in &t.control_points {
            // Midway between controls, and beyond both ends, the map is affine.
            assert!(second(c + 0.3).abs() < 1e-12);
        }
        assert!(second(-5.0).abs() < 1e-12);
        let bend = second(t.control_points[2]);
        assert!((bend - 2.0 * h * t.weights[2]).abs() < 1e-12);
    }

    #[test]
    fn design_row_example() {
        let m = design_matrix(&[0.0], &[-1.0, 1.0]);
        assert_eq!(m.row(0).to_vec(), vec![1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn design_matrix_times_identity_is_values() {
        let values = [0.1, -2.0, 3.5];
        let controls = vec![0.0, 1.0];
        let m = design_matrix(&values, &controls);
        let out = m.dot(&Transform1D::identity(controls).params());
        assert_eq!(out.to_vec(), values.to_vec());
    }

    #[test]
    fn design_matrix_agrees_with_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_transform(&mut rng, 125);
        let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-3.0..4.0)).collect();
        let via_matrix = design_matrix(&values, &t.control_points).dot(&t.params());
        for (a, &u) in via_matrix.iter().zip(values.iter()) {
            assert!((a - t.apply(u)).abs() <= 1e-12);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_transform(&mut rng, 4);
        let back = Transform1D::from_params(t.params().view(), t.control_points.clone()).unwrap();
        assert_eq!(back, t);
        assert!(Transform1D::from_params(t.params().view(), vec![0.0]).is_err());
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_transform(&mut rng, 5);
        let b = random_transform(&mut rng, 5);
        assert_eq!(a.interpolate(&b, 0.0).unwrap(), a);
        assert_eq!(a.interpolate(&b, 1.0).unwrap(), b);
        let mid = a.interpolate(&b, 0.5).unwrap();
        for u in [-2.0, 0.0, 0.33, 1.9] {
            assert!((mid.apply(u) - 0.5 * (a.apply(u) + b.apply(u))).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_errors() {
        let a = Transform1D::<f64>::identity(vec![0.0, 1.0]);
        let b = Transform1D::<f64>::identity(vec![0.0, 2.0]);
        assert!(matches!(a.interpolate(&b, 0.5), Err(Error::ControlPointMismatch)));
        assert!(matches!(a.interpolate(&a, 1.5), Err(Error::Argument(_))));
        assert!(matches!(a.interpolate(&a, -0.1), Err(Error::Argument(_))));
    }

    #[test]
    fn axis_map_falls_back_to_output_blend() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_transform(&mut rng, 5);
        let mut b = random_transform(&mut rng, 3);
        b.control_points = vec![-0.5, 0.0, 0.5];
        let map = AxisMap::blend(a.clone(), b.clone(), 0.25).unwrap();
        assert!(matches!(map, AxisMap::Blend { .. }));
        let u = 0.8;
        assert!((map.apply(u) - (0.75 * a.apply(u) + 0.25 * b.apply(u))).abs() < 1e-12);
        assert_eq!(
            AxisMap::blend(a.clone(), b.clone(), 0.0).unwrap(),
            AxisMap::Single(a.clone())
        );
        assert_eq!(AxisMap::blend(a, b.clone(), 1.0).unwrap(), AxisMap::Single(b));
    }

    #[test]
    fn single_precision_apply() {
        let t = Transform1D::<f32> {
            c0: 0.0,
            c1: 0.0,
            weights: vec![2.0],
            control_points: vec![0.5],
        };
        assert!((t.apply(0.7) - 0.4).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn interpolate_commutes_with_apply(seed in any::<u64>(), lambda in 0.0f64..=1.0, u in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_transform(&mut rng, 7);
            let b = random_transform(&mut rng, 7);
            let blended = a.interpolate(&b, lambda).unwrap().apply(u);
            let pointwise = (1.0 - lambda) * a.apply(u) + lambda * b.apply(u);
            prop_assert!((blended - pointwise).abs() <= 1e-12 * (1.0 + pointwise.abs()));
        }
    }
}
