use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const KMEANS_MAX_SWEEPS: usize = 100;

const ASSIGN_CHUNK: usize = 1024;

/// K-means reduction of a point cloud.
#[derive(Debug, Clone)]
pub struct CentreSet<T> {
    /// `K × N`; row `k` is the mean of the points assigned to cluster `k`.
    pub centres: Array2<T>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub inertia_history: Vec<T>,
}

impl<T: Real> CentreSet<T> {
    pub fn k(&self) -> usize {
        self.centres.nrows()
    }
}

#[inline]
fn sq_dist<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Runs until assignments stop changing or [`KMEANS_MAX_SWEEPS`] is reached.
/// Clusters that lose all their points are re-seeded at the point farthest
/// from its current centre. Output depends only on `points`, `k` and `seed`.
pub fn kmeans_reduce<T: Real>(points: ArrayView2<T>, k: usize, seed: u64) -> Result<CentreSet<T>> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::arg("cluster count must be at least 1"));
    }
    if k > n {
        return Err(Error::arg(format!("cluster count {k} exceeds point count {n}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres = plus_plus_seed(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut dists = vec![T::zero(); n];
    let mut inertia_history = Vec::new();

    for _ in 0..KMEANS_MAX_SWEEPS {
        let changed = assign(points, centres.view(), &mut assignments, &mut dists);
        inertia_history.push(dists.iter().copied().sum());
        if !changed {
            break;
        }
        update_means(points, &mut centres, &assignments, &dists);
    }

    Ok(CentreSet {
        centres,
        assignments,
        inertia_history,
    })
}

fn plus_plus_seed<T: Real>(points: ArrayView2<T>, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<T> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();

    while chosen.len() < k {
        let total: T = d2.iter().copied().sum();
        let next = if total > T::zero() {
            let target = T::lit(rng.random::<f64>()) * total;
            let mut acc = T::zero();
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > T::zero() && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > T::zero()).unwrap())
        } else {
            // Every remaining point coincides with a centre.
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        let c = points.row(next);
        for (i, p) in points.rows().into_iter().enumerate() {
            let d = sq_dist(p, c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    points.select(Axis(0), &chosen)
}

/// Nearest-centre assignment; ties go to the lowest index. Returns whether
/// any assignment changed.
///
/// Candidates are ranked by `‖c‖² − 2·x·c` from one matrix product per chunk;
/// the stored distance is recomputed exactly for the winner.
fn assign<T: Real>(points: ArrayView2<T>, centres: ArrayView2<T>, assignments: &mut [usize], dists: &mut [T]) -> bool {
    let chunk_rows = ASSIGN_CHUNK;
    let centre_sq: Vec<T> = centres.rows().into_iter().map(|c| c.dot(&c)).collect();
    let two = T::lit(2.0);
    assignments
        .par_chunks_mut(chunk_rows)
        .zip(dists.par_chunks_mut(chunk_rows))
        .enumerate()
        .map(|(chunk, (labels, ds))| {
            let start = chunk * chunk_rows;
            let block = points.slice(s![start..start + labels.len(), ..]);
            let cross = block.dot(&centres.t());
            let mut changed = false;
            for (j, (label, dist)) in labels.iter_mut().zip(ds.iter_mut()).enumerate() {
                let mut best = (0, T::infinity());
                for (c, (&x, &cc)) in cross.row(j).iter().zip(centre_sq.iter()).enumerate() {
                    let score = cc - two * x;
                    if score < best.1 {
                        best = (c, score);
                    }
                }
                if *label != best.0 {
                    *label = best.0;
                    changed = true;
                }
                *dist = sq_dist(block.row(j), centres.row(best.0));
            }
            changed
        })
        .reduce(|| false, |a, b| a || b)
}

fn update_means<T: Real>(points: ArrayView2<T>, centres: &mut Array2<T>, assignments: &[usize], dists: &[T]) {
    let k = centres.nrows();
    let mut counts = vec![0usize; k];
    centres.fill(T::zero());
    for (p, &a) in points.rows().into_iter().zip(assignments.iter()) {
        counts[a] += 1;
        let mut row = centres.row_mut(a);
        row += &p;
    }
    for (mut row, &c) in centres.rows_mut().into_iter().zip(counts.iter()) {
        if c > 0 {
            row /= T::from_usize_lossy(c);
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..points.nrows()).collect();
    order.sort_by(|&a, &b| dists[b].partial_cmp(&dists[a]).unwrap().then(a.cmp(&b)));
    for (c, &i) in empty.iter().zip(order.iter()) {
        centres.row_mut(*c).assign(&points.row(i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_cloud(n: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = gaussian_cloud(40, 3, 1);
        let cs = kmeans_reduce(pts.view(), 1, 0).unwrap();
        let mean = pts.mean_axis(Axis(0)).unwrap();
        for (a, b) in cs.centres.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn k_equals_n_recovers_the_points() {
        let pts = array![[0.0, 0.0], [1.0, 5.0], [-3.0, 2.0], [4.0, 4.0], [0.5, -1.0]];
        let cs = kmeans_reduce(pts.view(), 5, 3).unwrap();
        let mut got: Vec<(f64, f64)> = cs.centres.rows().into_iter().map(|r| (r[0], r[1])).collect();
        let mut want: Vec<(f64, f64)> = pts.rows().into_iter().map(|r| (r[0], r[1])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn duplicate_points_with_k_equal_n() {
        let pts = array![[1.0], [1.0], [2.0]];
        let cs = kmeans_reduce(pts.view(), 3, 0).unwrap();
        assert_eq!(cs.k(), 3);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let pts = gaussian_cloud(3, 2, 0);
        assert!(matches!(kmeans_reduce(pts.view(), 4, 0), Err(Error::Argument(_))));
        assert!(matches!(kmeans_reduce(pts.view(), 0, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = gaussian_cloud(500, 4, 2);
        let a = kmeans_reduce(pts.view(), 7, 11).unwrap();
        let b = kmeans_reduce(pts.view(), 7, 11).unwrap();
        assert_eq!(a.centres, b.centres);
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn inertia_never_increases() {
        let pts = gaussian_cloud(3000, 5, 3);
        let cs = kmeans_reduce(pts.view(), 20, 5).unwrap();
        assert!(cs.inertia_history.len() > 1);
        for w in cs.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", w);
        }
    }

    #[test]
    fn centres_are_means_of_their_points() {
        let pts = gaussian_cloud(800, 3, 4);
        let cs = kmeans_reduce(pts.view(), 6, 1).unwrap();
        for c in 0..6 {
            let members: Vec<usize> = (0..800).filter(|&i| cs.assignments[i] == c).collect();
            assert!(!members.is_empty());
            let mean = pts.select(Axis(0), &members).mean_axis(Axis(0)).unwrap();
            for (a, b) in cs.centres.row(c).iter().zip(mean.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// Exhaustive search over every 2-partition of a small point set.
    fn best_two_partition(pts: &Array2<f64>) -> [Vec<f64>; 2] {
        let n = pts.nrows();
        let mut best = (f64::INFINITY, [Vec::new(), Vec::new()]);
        for mask in 1u32..(1 << (n - 1)) {
            let mut groups = [Vec::new(), Vec::new()];
            for i in 0..n {
                groups[((mask >> i) & 1) as usize].push(i);
            }
            let mut cost = 0.0;
            let mut means = [Vec::new(), Vec::new()];
            for g in 0..2 {
                let m = pts.select(Axis(0), &groups[g]).mean_axis(Axis(0)).unwrap();
                for &i in &groups[g] {
                    cost += sq_dist(pts.row(i), m.view());
                }
                means[g] = m.to_vec();
            }
            if cost < best.0 {
                best = (cost, means);
            }
        }
        best.1
    }

    #[test]
    fn well_separated_pair_matches_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..5 {
            let spread = 0.5;
            let mut pts = Array2::<f64>::zeros((14, 2));
            for (i, mut row) in pts.rows_mut().into_iter().enumerate() {
                let offset = if i < 6 { 0.0 } else { 100.0 * spread };
                row[0] = offset + spread * rng.sample::<f64, _>(StandardNormal);
                row[1] = -offset + spread * rng.sample::<f64, _>(StandardNormal);
            }
            let oracle = best_two_partition(&pts);
            let cs = kmeans_reduce(pts.view(), 2, trial).unwrap();
            for want in &oracle {
                let hit = cs
                    .centres
                    .rows()
                    .into_iter()
                    .any(|c| c.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() <= 1e-9));
                assert!(hit, "trial {trial}: {want:?} not among {:?}", cs.centres);
            }
        }
    }
}
