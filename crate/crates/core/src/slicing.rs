//! Random rotations of R^N and per-axis projection of point clouds.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Orthonormal `N × N` matrix; column `j` is the direction of axis `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationBasis<T> {
    pub matrix: Array2<T>,
    pub seed: u64,
}

impl<T: Real> RotationBasis<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: Array2::eye(n),
            seed: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Q factor of a Householder QR of an `N × N` standard normal matrix,
/// with column signs chosen so that R has a positive diagonal.
pub fn random_orthonormal_basis<T: Real>(n: usize, seed: u64) -> Result<RotationBasis<T>> {
    if n == 0 {
        return Err(Error::arg("basis dimension must be at least 1"));
    }
    if n == 1 {
        // The sign fix would return sign(draw); a 1-D rotation is +1.
        return Ok(RotationBasis {
            matrix: Array2::eye(1),
            seed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let draws = Array2::from_shape_fn((n, n), |_| T::lit(StandardNormal.sample(&mut rng)));
        if let Some(matrix) = householder_q(draws) {
            return Ok(RotationBasis { matrix, seed });
        }
    }
}

/// Returns `None` if the input is numerically rank deficient.
fn householder_q<T: Real>(mut r: Array2<T>) -> Option<Array2<T>> {
    let n = r.nrows();
    let mut q = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    let scale = r.iter().fold(T::zero(), |m, &v| m.max(v.abs()));

    for j in 0..n.saturating_sub(1) {
        let x = r.slice(s![j.., j]).to_owned();
        let norm = x.dot(&x).sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if x[0] >= T::zero() { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.dot(&v).sqrt();
        if vnorm == T::zero() {
            continue;
        }
        v /= vnorm;

        let mut block = r.slice_mut(s![j.., j..]);
        let proj: Array1<T> = v.dot(&block);
        for (mut row, &vi) in block.rows_mut().into_iter().zip(v.iter()) {
            row.scaled_add(-two * vi, &proj);
        }

        let mut qblock = q.slice_mut(s![.., j..]);
        let qv: Array1<T> = qblock.dot(&v);
        for (mut row, &qvi) in qblock.rows_mut().into_iter().zip(qv.iter()) {
            row.scaled_add(-two * qvi, &v);
        }
    }

    let tol = T::epsilon() * T::from_usize_lossy(n) * scale;
    for j in 0..n {
        let d = r[[j, j]];
        if d.abs() <= tol {
            return None;
        }
        if d < T::zero() {
            q.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    Some(q)
}

/// Rotates `points` (`n × N`) into the basis. Row `j` of the result holds
/// the `n` coordinates along axis `j`.
pub fn project<T: Real>(points: ArrayView2<T>, basis: &RotationBasis<T>) -> Result<Array2<T>> {
    if points.ncols() != basis.dimension() {
        return Err(Error::dim(format!(
            "points have dimension {}, basis has {}",
            points.ncols(),
            basis.dimension()
        )));
    }
    Ok(basis.matrix.t().dot(&points.t()))
}

/// Inverse of [`project`]: takes `N × n` axis values back to `n × N` points.
pub fn unproject<T: Real>(axis_values: ArrayView2<T>, basis: &RotationBasis<T>) -> Result<Array2<T>> {
    if axis_values.nrows() != basis.dimension() {
        return Err(Error::dim(format!(
            "{} axes given, basis has {}",
            axis_values.nrows(),
            basis.dimension()
        )));
    }
    Ok(axis_values.t().dot(&basis.matrix.t()))
}
