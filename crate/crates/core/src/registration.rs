//! Per-axis 1D registration: fit a [`Transform1D`] so that the mixture
//! centred on the transformed source values matches the target mixture in
//! L2, with or without binned correspondences.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::gmm::{l2_1d_with_gradient, self_term, IsotropicGmm};
use crate::optim::{quasi_newton_minimize, LbfgsConfig, Termination};
use crate::scalar::Real;
use crate::transform1d::{design_matrix, place_control_points, Transform1D, DEFAULT_CONTROL_POINTS};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Number of control points `r`; the transform has `r + 2` parameters.
    pub control_points: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: T,
    /// Limited-memory history length.
    pub memory: usize,
    /// Weight of the `‖w‖²` conditioning term.
    pub ridge: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            control_points: DEFAULT_CONTROL_POINTS,
            max_iterations: 200,
            gradient_tolerance: T::lit(1e-8),
            memory: 10,
            ridge: T::lit(1e-8),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.control_points == 0 {
            return Err(Error::arg("control point count must be at least 1"));
        }
        if !(self.gradient_tolerance > T::zero()) || !(self.ridge >= T::zero()) || self.memory == 0 {
            return Err(Error::arg("solver tolerances must be positive"));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsConfig<T> {
        LbfgsConfig {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            memory: self.memory,
            ..LbfgsConfig::default()
        }
    }
}

/// Outcome of one axis solve.
#[derive(Debug, Clone)]
pub struct AxisFit<T> {
    pub transform: Transform1D<T>,
    /// Set when the source values span no range and the identity was returned.
    pub skipped: bool,
    /// L2 distance (without the conditioning term) at the identity start.
    pub initial_objective: T,
    pub final_objective: T,
    pub iterations: usize,
    pub termination: Option<Termination>,
}

impl<T: Real> AxisFit<T> {
    pub(crate) fn skipped() -> Self {
        Self {
            transform: Transform1D::identity(Vec::new()),
            skipped: true,
            initial_objective: T::zero(),
            final_objective: T::zero(),
            iterations: 0,
            termination: None,
        }
    }
}

/// Projected source/target pairs and their per-bin means.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet<T> {
    pub pairs: Vec<(T, T)>,
    pub binned: Vec<(T, T)>,
}

impl<T: Real> CorrespondenceSet<T> {
    pub fn new(pairs: Vec<(T, T)>, bins: usize) -> Result<Self> {
        let binned = bin_correspondences(&pairs, bins)?;
        Ok(Self { pairs, binned })
    }
}

/// Splits `[min u, max u]` into `bins` equal-width bins (the last one closed)
/// and returns `(mean u, mean v)` for every non-empty bin, in bin order.
pub fn bin_correspondences<T: Real>(pairs: &[(T, T)], bins: usize) -> Result<Vec<(T, T)>> {
    if pairs.is_empty() {
        return Err(Error::arg("no correspondences to bin"));
    }
    if bins == 0 {
        return Err(Error::arg("bin count must be at least 1"));
    }
    let (lo, hi) = pairs
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &(u, _)| {
            (lo.min(u), hi.max(u))
        });
    let width = (hi - lo) / T::from_usize_lossy(bins);
    let edge = |b: usize| lo + width * T::from_usize_lossy(b);

    let mut sums = vec![(T::zero(), T::zero(), 0usize); bins];
    for &(u, v) in pairs {
        let mut b = if width > T::zero() {
            ((u - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1)
        } else {
            0
        };
        // Settle rounding at the edges against the explicit edge values.
        while b > 0 && u < edge(b) {
            b -= 1;
        }
        while b + 1 < bins && u >= edge(b + 1) {
            b += 1;
        }
        let s = &mut sums[b];
        s.0 += u;
        s.1 += v;
        s.2 += 1;
    }

    Ok(sums
        .into_iter()
        .filter(|s| s.2 > 0)
        .map(|(su, sv, c)| {
            let c = T::from_usize_lossy(c);
            (su / c, sv / c)
        })
        .collect())
}

/// L2 objective of one axis as a function of the transform parameters.
///
/// The transformed source means are `A·θ` with `A` the design matrix, so the
/// gradient is `Aᵀ·∂L/∂m` plus the conditioning term.
pub struct AxisObjective<T> {
    design: Array2<T>,
    target: Vec<T>,
    bandwidth: T,
    target_self: T,
    ridge: T,
    means: Vec<T>,
    mean_grad: Vec<T>,
}

impl<T: Real> AxisObjective<T> {
    pub fn new(source: &[T], target: &[T], control_points: &[T], bandwidth: T, ridge: T) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::arg("axis objective needs source and target values"));
        }
        let g = IsotropicGmm::from_1d(target, bandwidth)?;
        Ok(Self {
            design: design_matrix(source, control_points),
            target: target.to_vec(),
            bandwidth,
            target_self: self_term(&g),
            ridge,
            means: vec![T::zero(); source.len()],
            mean_grad: vec![T::zero(); source.len()],
        })
    }

    /// L2 distance only.
    pub fn distance(&mut self, params: &Array1<T>) -> T {
        let mut scratch = Array1::zeros(params.len());
        let total = self.evaluate(params, &mut scratch);
        total - self.penalty(params)
    }

    fn penalty(&self, params: &Array1<T>) -> T {
        self.ridge * params.iter().skip(2).map(|&w| w * w).sum::<T>()
    }

    /// Value including the conditioning term; gradient written to `grad`.
    pub fn evaluate(&mut self, params: &Array1<T>, grad: &mut Array1<T>) -> T {
        for (m, row) in self.means.iter_mut().zip(self.design.rows()) {
            *m = row.dot(params);
        }
        let l2 = l2_1d_with_gradient(
            &self.means,
            &self.target,
            self.bandwidth,
            self.target_self,
            &mut self.mean_grad,
        );
        grad.fill(T::zero());
        for (row, &dm) in self.design.rows().into_iter().zip(self.mean_grad.iter()) {
            grad.scaled_add(dm, &row);
        }
        let two_ridge = self.ridge + self.ridge;
        for (g, &w) in grad.iter_mut().zip(params.iter()).skip(2) {
            *g += two_ridge * w;
        }
        l2 + self.penalty(params)
    }
}

/// Where the full solve starts from.
enum Start<T> {
    /// Minimize the objective over `c0, c1` alone first.
    AffineL2,
    /// Use the given `c0, c1`.
    Affine(T, T),
}

fn solve<T: Real>(
    source: &[T],
    target: &[T],
    control_points: Vec<T>,
    bandwidth: T,
    cfg: &SolverConfig<T>,
    start_at: Start<T>,
) -> Result<AxisFit<T>> {
    cfg.validate()?;
    let mut objective = AxisObjective::new(source, target, &control_points, bandwidth, cfg.ridge)?;
    let mut start = Transform1D::identity(control_points.clone()).params();
    let initial = objective.distance(&start);

    // Started from the identity, the full solve tends to spend a shift on
    // the |u − u_l| columns and settle on a scrambled, non-monotone match, so
    // the affine part is placed first.
    let lbfgs = cfg.lbfgs();
    let mut warm_iterations = 0;
    match start_at {
        Start::AffineL2 => {
            let full_len = start.len();
            let mut scratch = Array1::zeros(full_len);
            let affine = quasi_newton_minimize(
                |p: &Array1<T>, g: &mut Array1<T>| {
                    let mut full = Array1::zeros(full_len);
                    full[0] = p[0];
                    full[1] = p[1];
                    let value = objective.evaluate(&full, &mut scratch);
                    g[0] = scratch[0];
                    g[1] = scratch[1];
                    value
                },
                start.slice(s![..2]).to_owned(),
                &lbfgs,
            )?;
            start[0] = affine.params[0];
            start[1] = affine.params[1];
            warm_iterations = affine.iterations;
        }
        Start::Affine(c0, c1) => {
            let mut candidate = start.clone();
            candidate[0] = c0;
            candidate[1] = c1;
            // Keep the identity if the line is no better.
            if objective.distance(&candidate) <= initial {
                start = candidate;
            }
        }
    }

    let min = quasi_newton_minimize(|p, g| objective.evaluate(p, g), start, &lbfgs)?;
    let final_objective = objective.distance(&min.params);
    Ok(AxisFit {
        transform: Transform1D::from_params(min.params.view(), control_points)?,
        skipped: false,
        initial_objective: initial,
        final_objective,
        iterations: warm_iterations + min.iterations,
        termination: Some(min.termination),
    })
}

/// Registers projected source centres onto projected target centres without
/// correspondences, with controls spanning the source values.
pub fn estimate_nocorr<T: Real>(source: &[T], target: &[T], bandwidth: T, cfg: &SolverConfig<T>) -> Result<AxisFit<T>> {
    estimate_nocorr_over(source, target, source, bandwidth, cfg)
}

/// As [`estimate_nocorr`], with the control grid spanning `span` instead
/// (typically every projected source point rather than only the centres).
pub fn estimate_nocorr_over<T: Real>(
    source: &[T],
    target: &[T],
    span: &[T],
    bandwidth: T,
    cfg: &SolverConfig<T>,
) -> Result<AxisFit<T>> {
    cfg.validate()?;
    let controls = match place_control_points(span, cfg.control_points) {
        Ok(c) => c,
        Err(Error::DegenerateRange) => return Ok(AxisFit::skipped()),
        Err(e) => return Err(e),
    };
    solve(source, target, controls, bandwidth, cfg, Start::AffineL2)
}

/// Registers binned correspondences: source means `φ(ū_k)` against target
/// means `v̄_k`, with controls spanning the `ū` range.
pub fn estimate_corr<T: Real>(binned: &[(T, T)], bandwidth: T, cfg: &SolverConfig<T>) -> Result<AxisFit<T>> {
    if binned.len() < 2 {
        return Err(Error::InsufficientCorrespondences(binned.len()));
    }
    cfg.validate()?;
    let (source, target): (Vec<T>, Vec<T>) = binned.iter().copied().unzip();
    let controls = match place_control_points(&source, cfg.control_points) {
        Ok(c) => c,
        Err(Error::DegenerateRange) => return Ok(AxisFit::skipped()),
        Err(e) => return Err(e),
    };
    let (c0, c1) = least_squares_line(&source, &target);
    solve(&source, &target, controls, bandwidth, cfg, Start::Affine(c0, c1))
}

/// Ordinary least-squares `v ≈ c0 + c1·u`; the pairing enters the
/// correspondence fit through this starting point.
fn least_squares_line<T: Real>(u: &[T], v: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(u.len());
    let mu = u.iter().copied().sum::<T>() / n;
    let mv = v.iter().copied().sum::<T>() / n;
    let (mut suu, mut suv) = (T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v.iter()) {
        suu += (a - mu) * (a - mu);
        suv += (a - mu) * (b - mv);
    }
    let c1 = suv / suu;
    (mv - c1 * mu, c1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurespace::kmeans_reduce;
    use crate::gmm::select_bandwidth;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Tests every pair against explicit bin edges, bins outer.
    fn brute_force_bins(pairs: &[(f64, f64)], bins: usize) -> Vec<(f64, f64)> {
        let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let mut out = Vec::new();
        for b in 0..bins {
            let left = lo + width * b as f64;
            let right = lo + width * (b + 1) as f64;
            let last = b + 1 == bins;
            let (mut su, mut sv, mut c) = (0.0, 0.0, 0usize);
            for &(u, v) in pairs {
                let inside = (b == 0 || u >= left) && (last || u < right);
                if inside {
                    su += u;
                    sv += v;
                    c += 1;
                }
            }
            if c > 0 {
                out.push((su / c as f64, sv / c as f64));
            }
        }
        out
    }

    fn centres_1d(values: &[f64], k: usize, seed: u64) -> Vec<f64> {
        let pts = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        kmeans_reduce(pts.view(), k, seed)
            .unwrap()
            .centres
            .iter()
            .copied()
            .collect()
    }

    fn bandwidth_of(values: &[f64]) -> f64 {
        select_bandwidth(
            Array2::from_shape_vec((values.len(), 1), values.to_vec())
                .unwrap()
                .view(),
        )
        .unwrap()
    }

    #[test]
    fn binning_example() {
        let out = bin_correspondences(&[(0.1f64, 0.3), (0.2, 0.5), (0.9, 0.8)], 2).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].0 - 0.15).abs() < 1e-15 && (out[0].1 - 0.4).abs() < 1e-15);
        assert_eq!(out[1], (0.9, 0.8));
    }

    #[test]
    fn single_bin_is_the_mean() {
        let pairs = [(1.0, 2.0), (3.0, 5.0), (2.0, 2.0)];
        assert_eq!(bin_correspondences(&pairs, 1).unwrap(), vec![(2.0, 3.0)]);
    }

    #[test]
    fn binning_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q = rng.random_range(1..200);
            let bins = rng.random_range(1..60);
            let pairs: Vec<(f64, f64)> = (0..q)
                .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)))
                .collect();
            assert_eq!(
                bin_correspondences(&pairs, bins).unwrap(),
                brute_force_bins(&pairs, bins)
            );
        }
    }

    #[test]
    fn binned_sources_strictly_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs: Vec<(f64, f64)> = (0..500).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let out = bin_correspondences(&pairs, 50).unwrap();
        assert!(out.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn identical_sources_fall_in_one_bin() {
        let out = bin_correspondences(&[(1.0, 0.0), (1.0, 2.0)], 5).unwrap();
        assert_eq!(out, vec![(1.0, 1.0)]);
        assert!(bin_correspondences::<f64>(&[], 3).is_err());
    }

    proptest! {
        #[test]
        fn binning_is_permutation_invariant(seed in any::<u64>(), bins in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs: Vec<(f64, f64)> = (0..60).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
            let a = bin_correspondences(&pairs, bins).unwrap();
            pairs.reverse();
            pairs.swap(3, 17);
            let b = bin_correspondences(&pairs, bins).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
            }
        }
    }

    fn central_difference(obj: &mut AxisObjective<f64>, params: &Array1<f64>) -> Array1<f64> {
        let mut scratch = Array1::zeros(params.len());
        let mut out = Array1::zeros(params.len());
        for i in 0..params.len() {
            let step = 1e-6 * (1.0 + params[i].abs());
            let mut p = params.clone();
            p[i] += step;
            let up = obj.evaluate(&p, &mut scratch);
            p[i] -= 2.0 * step;
            let down = obj.evaluate(&p, &mut scratch);
            out[i] = (up - down) / (2.0 * step);
        }
        out
    }

    #[test]
    fn composed_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let source: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        let target: Vec<f64> = (0..50)
            .map(|_| 0.5 + 1.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let controls = place_control_points(&source, 125).unwrap();
        let h = bandwidth_of(&target);
        let mut obj = AxisObjective::new(&source, &target, &controls, h, 1e-8).unwrap();
        for _ in 0..5 {
            let mut params = Transform1D::identity(controls.clone()).params();
            params.mapv_inplace(|v| v + 0.01 * rng.sample::<f64, _>(StandardNormal));
            let mut grad = Array1::zeros(127);
            obj.evaluate(&params, &mut grad);
            let fd = central_difference(&mut obj, &params);
            let err = (&grad - &fd).mapv(|v| v * v).sum().sqrt() / fd.mapv(|v| v * v).sum().sqrt();
            assert!(err <= 1e-5, "relative error {err}");
        }
    }

    #[test]
    fn equal_sets_return_identity() {
        let values = [0.1f64, 0.5, 0.2, 0.9, -0.3];
        let fit = estimate_nocorr(&values, &values, 0.2, &SolverConfig::default()).unwrap();
        assert!(fit.transform.is_identity());
        assert_eq!(fit.iterations, 0);
        assert!(fit.initial_objective.abs() < 1e-12);
    }

    #[test]
    fn degenerate_source_is_skipped() {
        let fit = estimate_nocorr(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0], 0.3, &SolverConfig::default()).unwrap();
        assert!(fit.skipped);
        assert_eq!(fit.transform.apply(4.5), 4.5);
    }

    #[test]
    fn recovers_a_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let source = centres_1d(&draws, 50, 0);
        let target: Vec<f64> = source.iter().map(|u| u + 3.0).collect();
        let h = bandwidth_of(&target);
        let fit = estimate_nocorr(&source, &target, h, &SolverConfig::default()).unwrap();
        assert!(
            fit.final_objective <= 1e-3 * fit.initial_objective,
            "{} vs {}",
            fit.final_objective,
            fit.initial_objective
        );
        let lo = source.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = source.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut errs: Vec<f64> = (0..=200)
            .map(|i| lo + (hi - lo) * i as f64 / 200.0)
            .map(|u| (fit.transform.apply(u) - (u + 3.0)).abs())
            .collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(errs[100] <= 0.1, "median error {}", errs[100]);
    }

    #[test]
    fn recovers_a_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let source = centres_1d(&draws, 50, 0);
        let target: Vec<f64> = source.iter().map(|u| 2.0 * u).collect();
        let h = bandwidth_of(&target);
        let fit = estimate_nocorr(&source, &target, h, &SolverConfig::default()).unwrap();
        assert!(fit.final_objective <= 1e-2 * fit.initial_objective);
    }

    #[test]
    fn exact_correspondences_return_identity() {
        let binned: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, i as f64 * 0.1)).collect();
        let fit = estimate_corr(&binned, 0.1, &SolverConfig::default()).unwrap();
        assert!(fit.transform.is_identity());
    }

    #[test]
    fn affine_correspondences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pairs: Vec<(f64, f64)> = (0..2000)
            .map(|_| {
                let u: f64 = rng.sample(StandardNormal);
                (u, 2.0 * u + 1.0)
            })
            .collect();
        let binned = bin_correspondences(&pairs, 50).unwrap();
        let targets: Vec<f64> = binned.iter().map(|p| p.1).collect();
        let h = bandwidth_of(&targets);
        let fit = estimate_corr(&binned, h, &SolverConfig::default()).unwrap();
        let range = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - targets.iter().copied().fold(f64::INFINITY, f64::min);
        let mean_err = binned
            .iter()
            .map(|&(u, v)| (fit.transform.apply(u) - v).abs())
            .sum::<f64>()
            / binned.len() as f64;
        assert!(mean_err <= 0.05 * range, "mean error {mean_err}, range {range}");
        assert!(fit.final_objective < 1e-6 * fit.initial_objective);
    }

    #[test]
    fn two_pair_anchor() {
        let fit = estimate_corr(&[(0.0f64, 0.0), (1.0, 1.0)], 0.5, &SolverConfig::default()).unwrap();
        assert!(fit.transform.apply(0.0).abs() < 1e-6);
        assert!((fit.transform.apply(1.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_correspondences() {
        let err = estimate_corr(&[(0.0, 1.0)], 0.5, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientCorrespondences(1)));
    }

    #[test]
    fn solves_never_increase_the_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let source: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..0.0f64).powi(2)).collect();
            let h = bandwidth_of(&target);
            let fit = estimate_nocorr(&source, &target, h, &SolverConfig::default()).unwrap();
            assert!(fit.final_objective <= fit.initial_objective);
        }
    }

    #[test]
    fn single_precision_corr_solve() {
        let binned: Vec<(f32, f32)> = (0..20).map(|i| (i as f32 * 0.1, i as f32 * 0.2 + 0.5)).collect();
        let cfg = SolverConfig::<f32> {
            gradient_tolerance: 1e-4,
            ..Default::default()
        };
        let fit = estimate_corr(&binned, 0.3, &cfg).unwrap();
        assert!(fit.final_objective <= fit.initial_objective);
    }
}
