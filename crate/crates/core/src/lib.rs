//! Thick-slice CT simulation from thin-slice volumes.
//!
//! The core operation is [`simulate_weighted_thick`]: each thick slice is a
//! triangular-profile weighted mean of the thin slices within one slice
//! thickness of its location. Three index-based baselines (window average,
//! Gaussian smoothing, decimation), image-quality metrics, a paired Wilcoxon
//! test and a MetaImage reader/writer complete the toolkit.
//!
//! ```
//! use ndarray::Array3;
//! use slicesim_core::{simulate_weighted_thick, IntensityDomain, SliceGrid, SliceProfile, Volume};
//!
//! let thin = Volume::with_uniform_spacing(
//!     Array3::from_shape_fn((5, 1, 1), |(z, _, _)| 10.0 * z as f32),
//!     (1.0, 1.0),
//!     0.0,
//!     1.0,
//!     IntensityDomain::Hu,
//! )
//! .unwrap();
//! let grid = SliceGrid::new(2.0, 2.0, 1.0).unwrap();
//! let thick = simulate_weighted_thick(&thin, &grid, SliceProfile::new(2.0).unwrap()).unwrap();
//! assert_eq!(thick.voxels()[[0, 0, 0]], 20.0);
//! ```

pub mod compare;
pub mod degrade;
pub mod evaluate;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod report;
pub mod serde_inf;
pub mod stats;
pub mod volume;

pub use compare::{compare_methods, ComparisonConfig, ComparisonInput, Method, ThickGeometry};
pub use degrade::{
    degrade, simulate_direct_downsample, simulate_gaussian_average, simulate_simple_average,
    simulate_weighted_thick, DegradationSpec, DegradeError, Degraded, Provenance,
};
pub use evaluate::{evaluate_aligned, PairEvaluation};
pub use geometry::{slice_locations, triangular_weight, GeometryError, SliceGrid, SliceProfile};
pub use io::{align_volumes, read_volume, write_volume, ElementType, HuWindow, SlicePair};
pub use metrics::{mse, psnr, rmse, MetricError, MetricSample, SliceSample};
pub use report::{ComparisonReport, PairManifest};
pub use stats::{summarize, wilcoxon_signed_rank, MetricSummary, WilcoxonResult};
pub use volume::{IntensityDomain, Volume, VolumeError};
