//! # sl2d
//!
//! Sliced L2 distribution transfer. An N-dimensional source point cloud is
//! pushed towards a target cloud by repeatedly rotating both with a random
//! orthonormal basis and, on every axis, fitting a parametric 1D transform
//! that minimizes the L2 distance between Gaussian mixtures placed on the
//! projected K-means centres. When the clouds are paired, binned projected
//! correspondences give a second fit, and the two can be blended.
//!
//! Applied to images, each point is a `p × p` colour patch (optionally with
//! pixel positions), which gives colour transfer between photographs.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`featurespace`] | patch extraction, image reconstruction, K-means |
//! | [`slicing`] | random rotations, projection |
//! | [`gmm`] | isotropic mixtures, closed-form L2 and its gradient |
//! | [`transform1d`] | `c0 + c1·u + Σ w_l·|u − u_l|` and its blends |
//! | [`optim`] | L-BFGS with strong-Wolfe line search |
//! | [`registration`] | per-axis fits, with and without correspondences |
//! | [`transfer`] | the iterative loop, convergence trace, colour transfer |
//! | [`reference_ot`] | monotone 1D optimal-transport map |
//! | [`metrics`] | PSNR and SSIM |
//!
//! The numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod featurespace;
pub mod gmm;
pub mod image_io;
pub mod metrics;
pub mod optim;
pub mod reference_ot;
pub mod registration;
pub mod scalar;
pub mod slicing;
pub mod transfer;
pub mod transform1d;

pub use error::{Error, Result};
pub use featurespace::{extract_patches, kmeans_reduce, reconstruct_image, CentreSet, FeatureSet, Layout};
pub use gmm::{l2_distance, l2_gradient_wrt_means, select_bandwidth, IsotropicGmm};
pub use image_io::ColourImage;
pub use metrics::{psnr, ssim, MetricReport};
pub use optim::{quasi_newton_minimize, LbfgsConfig, Minimum, Termination};
pub use reference_ot::{ot_map_1d, EmpiricalCdf, OtMap1d};
pub use registration::{bin_correspondences, estimate_corr, estimate_nocorr, AxisFit, CorrespondenceSet, SolverConfig};
pub use scalar::Real;
pub use slicing::{project, random_orthonormal_basis, unproject, RotationBasis};
pub use transfer::{
    colour_transfer, nd_l2, sliced_transfer, sliced_transfer_observed, ColourTransferConfig, ConvergenceTrace,
    TraceRecord, TransferConfig, TransferOutcome, Variant,
};
pub use transform1d::{design_matrix, place_control_points, AxisMap, Transform1D};

pub type FeatureSet64 = FeatureSet<f64>;
pub type FeatureSet32 = FeatureSet<f32>;
pub type ColourImage64 = ColourImage<f64>;
pub type ColourImage32 = ColourImage<f32>;
pub type Transform1D64 = Transform1D<f64>;
pub type Transform1D32 = Transform1D<f32>;
pub type IsotropicGmm64 = IsotropicGmm<f64>;
pub type IsotropicGmm32 = IsotropicGmm<f32>;
pub type TransferConfig64 = TransferConfig<f64>;
pub type TransferConfig32 = TransferConfig<f32>;
pub type ConvergenceTrace64 = ConvergenceTrace<f64>;
pub type RotationBasis64 = RotationBasis<f64>;
