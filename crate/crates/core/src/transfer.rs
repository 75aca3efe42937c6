//! The sliced transfer loop.
//!
//! Each iteration draws a random orthonormal basis, projects source and target
//! onto its axes, fits one [`AxisMap`] per axis against the K-means centres
//! (and, when the clouds are paired, against binned correspondences), moves
//! every source point along the axes, and records the N-D mixture L2 distance
//! between the current source and the target.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featurespace::{extract_patches, kmeans_reduce, reconstruct_image, FeatureSet, DEFAULT_CLUSTERS};
use crate::gmm::{l2_distance, select_bandwidth, IsotropicGmm};
use crate::image_io::ColourImage;
use crate::registration::{bin_correspondences, estimate_corr, estimate_nocorr, AxisFit, SolverConfig};
use crate::scalar::Real;
use crate::slicing::{project, random_orthonormal_basis, unproject};
use crate::transform1d::{check_lambda, AxisMap};

pub const DEFAULT_ITERATIONS: usize = 30;
pub const DEFAULT_ITERATIONS_WITH_CORRESPONDENCES: usize = 10;
pub const DEFAULT_STOP_THRESHOLD: f64 = 1e-3;
/// Consecutive small-change iterations required before stopping early.
pub const STOP_PATIENCE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig<T> {
    pub max_iterations: usize,
    /// K-means cluster count, also used as the correspondence bin count.
    pub clusters: usize,
    /// Blend weight between the correspondence (0) and marginal (1) fits.
    /// Ignored when the clouds are not paired.
    pub lambda: T,
    /// Relative trace decrease below which an iteration counts as stalled;
    /// `None` always runs `max_iterations`.
    pub stop_threshold: Option<T>,
    pub seed: u64,
    pub solver: SolverConfig<T>,
}

impl<T: Real> TransferConfig<T> {
    /// Defaults for the marginal-only mode.
    pub fn without_correspondences() -> Self {
        Self {
            max_iterations: DEFAULT_ITERATIONS,
            clusters: DEFAULT_CLUSTERS,
            lambda: T::one(),
            stop_threshold: Some(T::lit(DEFAULT_STOP_THRESHOLD)),
            seed: 0,
            solver: SolverConfig::default(),
        }
    }

    /// Defaults for paired clouds.
    pub fn with_correspondences() -> Self {
        Self {
            max_iterations: DEFAULT_ITERATIONS_WITH_CORRESPONDENCES,
            lambda: T::zero(),
            ..Self::without_correspondences()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::arg("at least one iteration is required"));
        }
        if self.clusters < 2 {
            return Err(Error::arg("at least 2 clusters are required"));
        }
        check_lambda(self.lambda)?;
        self.solver.validate()
    }
}

impl<T: Real> Default for TransferConfig<T> {
    fn default() -> Self {
        Self::without_correspondences()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub iteration: usize,
    pub l2: T,
    /// Wall-clock time since the transfer started.
    pub millis: u128,
}

/// N-D L2 distance per iteration; record 0 is taken before any update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Real> ConvergenceTrace<T> {
    pub fn values(&self) -> Vec<T> {
        self.records.iter().map(|r| r.l2).collect()
    }

    /// Value recorded at `iteration`, or the last one before it if the run
    /// stopped early.
    pub fn at(&self, iteration: usize) -> Option<T> {
        self.records
            .iter()
            .take_while(|r| r.iteration <= iteration)
            .last()
            .map(|r| r.l2)
    }

    /// CSV with header `iteration,l2,millis`. With `timing` off the millis
    /// column is written as 0, which makes reruns byte-comparable.
    pub fn write_csv<W: std::io::Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "l2", "millis"])?;
        for r in &self.records {
            let millis = if timing { r.millis } else { 0 };
            w.write_record([r.iteration.to_string(), r.l2.to_string(), millis.to_string()])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<trace>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, timing: bool) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file), timing)
    }
}

#[derive(Debug, Clone)]
pub struct TransferOutcome<T> {
    pub features: FeatureSet<T>,
    pub trace: ConvergenceTrace<T>,
    /// Axes per iteration whose source projection had no spread.
    pub skipped_axes: Vec<usize>,
}

fn centres<T: Real>(points: ArrayView2<T>, k: usize, seed: u64) -> Result<Array2<T>> {
    Ok(kmeans_reduce(points, k, seed)?.centres)
}

/// Reduces both clouds to `k` K-means centres (same seed), fits isotropic
/// mixtures with a bandwidth chosen from the `g` centres, and returns their
/// closed-form L2 distance.
pub fn nd_l2<T: Real>(points_f: ArrayView2<T>, points_g: ArrayView2<T>, k: usize, seed: u64) -> Result<T> {
    if points_f.ncols() != points_g.ncols() {
        return Err(Error::dim(format!(
            "clouds have dimensions {} and {}",
            points_f.ncols(),
            points_g.ncols()
        )));
    }
    let cf = centres(points_f, k, seed)?;
    let cg = centres(points_g, k, seed)?;
    centre_l2(cf, cg)
}

fn centre_l2<T: Real>(source_centres: Array2<T>, target_centres: Array2<T>) -> Result<T> {
    let h = select_bandwidth(target_centres.view())?;
    let f = IsotropicGmm::new(source_centres, h)?;
    let g = IsotropicGmm::new(target_centres, h)?;
    l2_distance(&f, &g)
}

pub fn sliced_transfer<T: Real>(
    source: &FeatureSet<T>,
    target: &FeatureSet<T>,
    paired: bool,
    cfg: &TransferConfig<T>,
) -> Result<TransferOutcome<T>> {
    sliced_transfer_observed(source, target, paired, cfg, |_, _| {})
}

/// As [`sliced_transfer`], calling `observer(iteration, points)` with the
/// source cloud before the first update and after every iteration.
///
/// With `paired` set, source point `i` corresponds to target point `i`.
pub fn sliced_transfer_observed<T, F>(
    source: &FeatureSet<T>,
    target: &FeatureSet<T>,
    paired: bool,
    cfg: &TransferConfig<T>,
    mut observer: F,
) -> Result<TransferOutcome<T>>
where
    T: Real,
    F: FnMut(usize, ArrayView2<T>),
{
    cfg.validate()?;
    let dim = source.dimension();
    if target.dimension() != dim {
        return Err(Error::dim(format!(
            "source has dimension {dim}, target has {}",
            target.dimension()
        )));
    }
    if paired && source.len() != target.len() {
        return Err(Error::dim(format!(
            "paired clouds need equal sizes, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let k = cfg.clusters.min(source.len()).min(target.len());
    if k < 2 {
        return Err(Error::arg("both clouds need at least 2 points"));
    }

    let started = Instant::now();
    let target_centres = centres(target.points.view(), k, cfg.seed)?;
    let mut points = source.points.clone();
    let mut source_centres = centres(points.view(), k, cfg.seed)?;

    let mut trace = ConvergenceTrace::default();
    trace.records.push(TraceRecord {
        iteration: 0,
        l2: centre_l2(source_centres.clone(), target_centres.clone())?,
        millis: started.elapsed().as_millis(),
    });
    observer(0, points.view());

    let mut skipped_axes = Vec::new();
    let mut stalled = 0;
    for iteration in 1..=cfg.max_iterations {
        let basis = random_orthonormal_basis::<T>(dim, cfg.seed.wrapping_add(iteration as u64))?;
        let axes = project(points.view(), &basis)?;
        let src_c = project(source_centres.view(), &basis)?;
        let tgt_c = project(target_centres.view(), &basis)?;
        let tgt_points = if paired {
            Some(project(target.points.view(), &basis)?)
        } else {
            None
        };

        let inputs = AxisInputs {
            axes: axes.view(),
            source_centres: src_c.view(),
            target_centres: tgt_c.view(),
            target_points: tgt_points.as_ref().map(|t| t.view()),
            bins: k,
            cfg,
        };
        let maps: Vec<(AxisMap<T>, bool)> = (0..dim)
            .into_par_iter()
            .map(|j| inputs.solve(j))
            .collect::<Result<_>>()?;
        skipped_axes.push(maps.iter().filter(|m| m.1).count());

        if maps.iter().any(|(m, _)| !m.is_identity()) {
            let mut delta = Array2::<T>::zeros(axes.raw_dim());
            for ((mut out, values), (map, _)) in delta
                .axis_iter_mut(Axis(0))
                .zip(axes.axis_iter(Axis(0)))
                .zip(maps.iter())
            {
                for (o, &u) in out.iter_mut().zip(values.iter()) {
                    *o = map.apply(u) - u;
                }
            }
            // Moving by the rotated-back displacement leaves points on
            // identity axes untouched.
            points += &unproject(delta.view(), &basis)?;
        }

        source_centres = centres(points.view(), k, cfg.seed)?;
        let l2 = centre_l2(source_centres.clone(), target_centres.clone())?;
        let prev = trace.records.last().unwrap().l2;
        trace.records.push(TraceRecord {
            iteration,
            l2,
            millis: started.elapsed().as_millis(),
        });
        observer(iteration, points.view());

        if let Some(threshold) = cfg.stop_threshold {
            let decrease = if prev > T::zero() {
                (prev - l2) / prev
            } else {
                T::zero()
            };
            stalled = if decrease < threshold { stalled + 1 } else { 0 };
            if stalled >= STOP_PATIENCE {
                log::debug!("stopping after iteration {iteration}: trace change below {threshold}");
                break;
            }
        }
    }

    Ok(TransferOutcome {
        features: FeatureSet {
            points,
            layout: source.layout.clone(),
        },
        trace,
        skipped_axes,
    })
}

/// Read-only per-iteration snapshot shared by the axis solves.
struct AxisInputs<'a, T> {
    axes: ArrayView2<'a, T>,
    source_centres: ArrayView2<'a, T>,
    target_centres: ArrayView2<'a, T>,
    target_points: Option<ArrayView2<'a, T>>,
    bins: usize,
    cfg: &'a TransferConfig<T>,
}

impl<T: Real> AxisInputs<'_, T> {
    /// Returns the axis map and whether the axis was degenerate.
    fn solve(&self, j: usize) -> Result<(AxisMap<T>, bool)> {
        let values = self.axes.row(j).to_vec();
        let src_c = self.source_centres.row(j).to_vec();
        let tgt_c = self.target_centres.row(j).to_vec();
        let h = select_bandwidth(self.target_centres.row(j).insert_axis(Axis(1)))?;
        let lambda = self.cfg.lambda;
        let solver = &self.cfg.solver;

        let Some(target_points) = self.target_points else {
            let fit = estimate_nocorr(&src_c, &tgt_c, h, solver)?;
            return Ok((AxisMap::Single(fit.transform), fit.skipped));
        };

        let nocorr = if lambda > T::zero() {
            Some(estimate_nocorr(&src_c, &tgt_c, h, solver)?)
        } else {
            None
        };
        let corr = if lambda < T::one() {
            let pairs: Vec<(T, T)> = values
                .iter()
                .copied()
                .zip(target_points.row(j).iter().copied())
                .collect();
            let binned = bin_correspondences(&pairs, self.bins)?;
            Some(match estimate_corr(&binned, h, solver) {
                Err(Error::InsufficientCorrespondences(_)) => AxisFit::skipped(),
                other => other?,
            })
        } else {
            None
        };

        let skipped = corr.as_ref().is_some_and(|f| f.skipped) || nocorr.as_ref().is_some_and(|f| f.skipped);
        let map = match (corr, nocorr) {
            (Some(c), Some(n)) => AxisMap::blend(c.transform, n.transform, lambda)?,
            (Some(c), None) => AxisMap::Single(c.transform),
            (None, Some(n)) => AxisMap::Single(n.transform),
            (None, None) => unreachable!("lambda lies in [0, 1]"),
        };
        Ok((map, skipped))
    }
}

/// The four colour-transfer feature configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Colour patches, no correspondences.
    C,
    /// Colour patches with pixel positions, no correspondences.
    Cp,
    /// Colour patches, co-located patches as correspondences.
    CorrC,
    /// Colour patches with positions, co-located correspondences.
    CorrCp,
}

impl Variant {
    pub fn uses_position(self) -> bool {
        matches!(self, Variant::Cp | Variant::CorrCp)
    }

    pub fn uses_correspondences(self) -> bool {
        matches!(self, Variant::CorrC | Variant::CorrCp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::C => "c",
            Variant::Cp => "cp",
            Variant::CorrC => "corr-c",
            Variant::CorrCp => "corr-cp",
        }
    }

    pub fn default_config<T: Real>(self) -> TransferConfig<T> {
        if self.uses_correspondences() {
            TransferConfig::with_correspondences()
        } else {
            TransferConfig::without_correspondences()
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(Variant::C),
            "cp" => Ok(Variant::Cp),
            "corr-c" | "corr_c" => Ok(Variant::CorrC),
            "corr-cp" | "corr_cp" => Ok(Variant::CorrCp),
            other => Err(Error::arg(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColourTransferConfig<T> {
    pub patch_size: usize,
    pub pos_weight: T,
    pub transfer: TransferConfig<T>,
}

impl<T: Real> ColourTransferConfig<T> {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            patch_size: crate::featurespace::DEFAULT_PATCH_SIZE,
            pos_weight: T::one(),
            transfer: variant.default_config(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ColourTransferOutcome<T> {
    pub image: ColourImage<T>,
    pub trace: ConvergenceTrace<T>,
    pub feature_dimension: usize,
}

/// Recolours `source` towards `target`. Correspondence variants require the
/// two images to be registered (same size); patch `i` of one then pairs with
/// patch `i` of the other.
pub fn colour_transfer<T: Real>(
    source: &ColourImage<T>,
    target: &ColourImage<T>,
    variant: Variant,
    cfg: &ColourTransferConfig<T>,
) -> Result<ColourTransferOutcome<T>> {
    let paired = variant.uses_correspondences();
    if paired && (source.width(), source.height()) != (target.width(), target.height()) {
        return Err(Error::dim(format!(
            "variant {variant} needs registered images, got {}x{} and {}x{}",
            source.width(),
            source.height(),
            target.width(),
            target.height()
        )));
    }
    let pos = variant.uses_position();
    let src = extract_patches(source, cfg.patch_size, pos, cfg.pos_weight)?;
    let tgt = extract_patches(target, cfg.patch_size, pos, cfg.pos_weight)?;
    log::info!(
        "variant {variant}: {} source points, {} target points, feature dimension {}",
        src.len(),
        tgt.len(),
        src.dimension()
    );
    let outcome = sliced_transfer(&src, &tgt, paired, &cfg.transfer)?;
    Ok(ColourTransferOutcome {
        image: reconstruct_image(&outcome.features)?,
        trace: outcome.trace,
        feature_dimension: src.dimension(),
    })
}
