//! Equal-weight isotropic Gaussian mixtures and the closed-form L2 distance
//! between two of them.
//!
//! For mixtures `f` (means `μ_i`, bandwidth `h_f`, `K_f` components) and `g`
//! (means `ν_j`, `h_g`, `K_g`), the integral of `(f - g)^2` reduces to sums of
//! Gaussian densities evaluated at mean differences, with variance equal to the
//! sum of the two component variances:
//!
//! ```text
//! ‖f − g‖² = Σ_ii' N(μ_i − μ_i'; 2h_f²) / K_f²
//!          − 2 Σ_ij N(μ_i − ν_j; h_f² + h_g²) / (K_f K_g)
//!          + Σ_jj' N(ν_j − ν_j'; 2h_g²) / K_g²
//! ```

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Equal-weight mixture of `K` isotropic Gaussians in `d` dimensions sharing
/// a single standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicGmm<T> {
    /// `K × d`.
    pub means: Array2<T>,
    pub bandwidth: T,
}

impl<T: Real> IsotropicGmm<T> {
    pub fn new(means: Array2<T>, bandwidth: T) -> Result<Self> {
        if means.nrows() == 0 {
            return Err(Error::arg("mixture needs at least one component"));
        }
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(Error::arg(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { means, bandwidth })
    }

    /// One-dimensional mixture from a list of means.
    pub fn from_1d(means: &[T], bandwidth: T) -> Result<Self> {
        Self::new(
            Array2::from_shape_vec((means.len(), 1), means.to_vec()).unwrap(),
            bandwidth,
        )
    }

    pub fn components(&self) -> usize {
        self.means.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.means.ncols()
    }

    pub fn density(&self, x: ArrayView1<T>) -> T {
        let var = self.bandwidth * self.bandwidth;
        let norm = gaussian_norm(var, self.dimension());
        let sum: T = self
            .means
            .rows()
            .into_iter()
            .map(|m| (-sq_dist(x, m) / (var + var)).exp())
            .sum();
        norm * sum / T::from_usize_lossy(self.components())
    }
}

/// Rule-of-thumb bandwidth `1.06 · σ̂ · K^(-1/5)`, where `σ̂` is the mean
/// per-dimension sample standard deviation of the `K × d` values.
///
/// The result is floored at `1e-4` times the largest per-dimension range (or
/// at `1e-4` when every value coincides).
pub fn select_bandwidth<T: Real>(values: ArrayView2<T>) -> Result<T> {
    let k = values.nrows();
    if k < 2 {
        return Err(Error::arg(format!("bandwidth needs at least 2 values, got {k}")));
    }
    let d = values.ncols();
    if d == 0 {
        return Err(Error::arg("bandwidth needs at least one dimension"));
    }
    let kf = T::from_usize_lossy(k);
    let mut sigma_sum = T::zero();
    let mut range = T::zero();
    for col in values.columns() {
        let mean = col.sum() / kf;
        let ss: T = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
        sigma_sum += (ss / (kf - T::one())).sqrt();
        let (lo, hi) = col.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        range = range.max(hi - lo);
    }
    let sigma = sigma_sum / T::from_usize_lossy(d);
    let h = T::lit(1.06) * sigma * kf.powf(T::lit(-0.2));
    let floor = if range > T::zero() {
        T::lit(1e-4) * range
    } else {
        T::lit(1e-4)
    };
    Ok(h.max(floor))
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

/// `(2π var)^(-d/2)`.
#[inline]
fn gaussian_norm<T: Real>(var: T, d: usize) -> T {
    (T::lit(2.0 * std::f64::consts::PI) * var).powf(-T::from_usize_lossy(d) / T::lit(2.0))
}

/// `Σ_ij N(a_i − b_j; var·I)`.
fn cross_sum<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>, var: T) -> T {
    let norm = gaussian_norm(var, a.ncols());
    let two_var = var + var;
    let mut total = T::zero();
    for ai in a.rows() {
        let mut row = T::zero();
        for bj in b.rows() {
            row += (-sq_dist(ai, bj) / two_var).exp();
        }
        total += row;
    }
    norm * total
}

fn check_pair<T: Real>(f: &IsotropicGmm<T>, g: &IsotropicGmm<T>) -> Result<()> {
    if f.dimension() != g.dimension() {
        return Err(Error::dim(format!(
            "mixtures live in {} and {} dimensions",
            f.dimension(),
            g.dimension()
        )));
    }
    Ok(())
}

/// Normalized self-interaction `Σ_jj' N(ν_j − ν_j'; 2h²) / K²`; the constant
/// term of the distance when `g` is fixed.
pub fn self_term<T: Real>(g: &IsotropicGmm<T>) -> T {
    let var = g.bandwidth * g.bandwidth;
    let k = T::from_usize_lossy(g.components());
    cross_sum(g.means.view(), g.means.view(), var + var) / (k * k)
}

pub fn l2_distance<T: Real>(f: &IsotropicGmm<T>, g: &IsotropicGmm<T>) -> Result<T> {
    check_pair(f, g)?;
    let (vf, vg) = (f.bandwidth * f.bandwidth, g.bandwidth * g.bandwidth);
    let (kf, kg) = (T::from_usize_lossy(f.components()), T::from_usize_lossy(g.components()));
    let ff = cross_sum(f.means.view(), f.means.view(), vf + vf) / (kf * kf);
    let fg = cross_sum(f.means.view(), g.means.view(), vf + vg) / (kf * kg);
    let gg = cross_sum(g.means.view(), g.means.view(), vg + vg) / (kg * kg);
    Ok(ff - (fg + fg) + gg)
}

/// Derivative of [`l2_distance`] with respect to each mean of `f`.
pub fn l2_gradient_wrt_means<T: Real>(f: &IsotropicGmm<T>, g: &IsotropicGmm<T>) -> Result<Array2<T>> {
    check_pair(f, g)?;
    let d = f.dimension();
    let (vf, vg) = (f.bandwidth * f.bandwidth, g.bandwidth * g.bandwidth);
    let (kf, kg) = (T::from_usize_lossy(f.components()), T::from_usize_lossy(g.components()));
    let (var_ff, var_fg) = (vf + vf, vf + vg);
    let self_scale = T::lit(2.0) * gaussian_norm(var_ff, d) / (kf * kf * var_ff);
    let cross_scale = T::lit(2.0) * gaussian_norm(var_fg, d) / (kf * kg * var_fg);

    // d/dx N(x; var) = -x / var · N(x; var)
    let mut grad = Array2::zeros(f.means.raw_dim());
    for (mut out, mi) in grad.rows_mut().into_iter().zip(f.means.rows()) {
        for mk in f.means.rows() {
            let w = self_scale * (-sq_dist(mi, mk) / (var_ff + var_ff)).exp();
            for ((o, &a), &b) in out.iter_mut().zip(mi.iter()).zip(mk.iter()) {
                *o -= w * (a - b);
            }
        }
        for nj in g.means.rows() {
            let w = cross_scale * (-sq_dist(mi, nj) / (var_fg + var_fg)).exp();
            for ((o, &a), &b) in out.iter_mut().zip(mi.iter()).zip(nj.iter()) {
                *o += w * (a - b);
            }
        }
    }
    Ok(grad)
}

/// Shared-bandwidth 1D distance and its gradient with respect to `f_means`,
/// given the precomputed [`self_term`] of the target. Writes into `grad`.
pub(crate) fn l2_1d_with_gradient<T: Real>(f_means: &[T], g_means: &[T], bandwidth: T, g_self: T, grad: &mut [T]) -> T {
    let var = bandwidth * bandwidth;
    let two_var = var + var;
    let four_var = two_var + two_var;
    let norm = gaussian_norm(two_var, 1);
    let (kf, kg) = (T::from_usize_lossy(f_means.len()), T::from_usize_lossy(g_means.len()));
    let self_w = norm / (kf * kf);
    let cross_w = norm / (kf * kg);
    let two = T::lit(2.0);

    grad.iter_mut().for_each(|v| *v = T::zero());
    let mut ff = T::zero();
    for i in 0..f_means.len() {
        for k in (i + 1)..f_means.len() {
            let diff = f_means[i] - f_means[k];
            let e = (-diff * diff / four_var).exp();
            ff += e;
            // Each unordered pair appears twice in the double sum.
            let gk = two * self_w * e * diff / two_var;
            grad[i] -= gk;
            grad[k] += gk;
        }
    }
    let ff = self_w * (two * ff + kf);

    let mut fg = T::zero();
    for (i, &m) in f_means.iter().enumerate() {
        for &v in g_means {
            let diff = m - v;
            let e = (-diff * diff / four_var).exp();
            fg += e;
            grad[i] += two * cross_w * e * diff / two_var;
        }
    }
    let fg = cross_w * fg;
    ff - (fg + fg) + g_self
}
