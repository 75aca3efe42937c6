//! Patch feature spaces built from images, and their inverse.
//!
//! Every valid `p × p` patch (stride 1, no padding) becomes one point. Each
//! pixel of the patch contributes its RGB triplet, followed by its
//! `(row, col)` position when positions are enabled, so a point has
//! `3·p²` or `5·p²` coordinates.

mod kmeans;

pub use kmeans::{kmeans_reduce, CentreSet, KMEANS_MAX_SWEEPS};

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::image_io::ColourImage;
use crate::scalar::Real;

pub const DEFAULT_PATCH_SIZE: usize = 3;
pub const DEFAULT_CLUSTERS: usize = 50;

/// What is needed to turn a feature matrix back into an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<T> {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub use_position: bool,
    /// Multiplier applied to normalized positions.
    pub pos_weight: T,
    /// Positions are divided by this (`max(height, width)`).
    pub pos_norm: T,
}

impl<T: Real> Layout<T> {
    pub fn values_per_pixel(&self) -> usize {
        if self.use_position {
            5
        } else {
            3
        }
    }

    pub fn dimension(&self) -> usize {
        self.values_per_pixel() * self.patch_size * self.patch_size
    }

    pub fn patches_x(&self) -> usize {
        self.width + 1 - self.patch_size
    }

    pub fn patches_y(&self) -> usize {
        self.height + 1 - self.patch_size
    }

    pub fn patch_count(&self) -> usize {
        self.patches_x() * self.patches_y()
    }
}

/// `n × N` point cloud; row `i` is the patch whose top-left pixel is
/// `(i / patches_x, i % patches_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    pub points: Array2<T>,
    pub layout: Option<Layout<T>>,
}

impl<T: Real> FeatureSet<T> {
    /// A bare point cloud with no image behind it.
    pub fn from_points(points: Array2<T>) -> Self {
        Self { points, layout: None }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }
}

pub fn extract_patches<T: Real>(
    image: &ColourImage<T>,
    patch_size: usize,
    use_position: bool,
    pos_weight: T,
) -> Result<FeatureSet<T>> {
    let (height, width) = (image.height(), image.width());
    if patch_size == 0 || patch_size.is_multiple_of(2) {
        return Err(Error::arg(format!("patch size must be odd, got {patch_size}")));
    }
    if !(pos_weight > T::zero()) {
        return Err(Error::arg("position weight must be positive"));
    }
    if height < patch_size || width < patch_size {
        return Err(Error::dim(format!(
            "{width}x{height} image is smaller than a {patch_size}x{patch_size} patch"
        )));
    }

    let layout = Layout {
        width,
        height,
        patch_size,
        use_position,
        pos_weight,
        pos_norm: T::from_usize_lossy(height.max(width)),
    };
    let per_pixel = layout.values_per_pixel();
    let px = layout.patches_x();
    let mut points = Array2::zeros((layout.patch_count(), layout.dimension()));

    for (i, mut row) in points.rows_mut().into_iter().enumerate() {
        let (y0, x0) = (i / px, i % px);
        let mut k = 0;
        for dy in 0..patch_size {
            for dx in 0..patch_size {
                let (y, x) = (y0 + dy, x0 + dx);
                for c in 0..3 {
                    row[k + c] = image.pixels[[y, x, c]];
                }
                if use_position {
                    row[k + 3] = T::from_usize_lossy(y) / layout.pos_norm * pos_weight;
                    row[k + 4] = T::from_usize_lossy(x) / layout.pos_norm * pos_weight;
                }
                k += per_pixel;
            }
        }
    }

    Ok(FeatureSet {
        points,
        layout: Some(layout),
    })
}

/// Averages the colour entries of every patch covering a pixel. Position
/// features are ignored; the result is clamped to `[0, 1]`.
pub fn reconstruct_image<T: Real>(features: &FeatureSet<T>) -> Result<ColourImage<T>> {
    let layout = features
        .layout
        .as_ref()
        .ok_or_else(|| Error::dim("feature set carries no image layout"))?;
    if features.dimension() != layout.dimension() || features.len() != layout.patch_count() {
        return Err(Error::dim(format!(
            "features are {}x{}, layout expects {}x{}",
            features.len(),
            features.dimension(),
            layout.patch_count(),
            layout.dimension()
        )));
    }

    let p = layout.patch_size;
    let per_pixel = layout.values_per_pixel();
    let px = layout.patches_x();
    let mut sums = Array3::<T>::zeros((layout.height, layout.width, 3));
    let mut counts = vec![0usize; layout.height * layout.width];

    for (i, row) in features.points.rows().into_iter().enumerate() {
        let (y0, x0) = (i / px, i % px);
        let mut k = 0;
        for dy in 0..p {
            for dx in 0..p {
                let (y, x) = (y0 + dy, x0 + dx);
                for c in 0..3 {
                    sums[[y, x, c]] += row[k + c];
                }
                counts[y * layout.width + x] += 1;
                k += per_pixel;
            }
        }
    }

    for ((y, x, _), v) in sums.indexed_iter_mut() {
        let n = T::from_usize_lossy(counts[y * layout.width + x]);
        *v = (*v / n).max(T::zero()).min(T::one());
    }
    ColourImage::new(sums)
}
