//! Volume files, intensity normalization and slice alignment.

mod align;
mod metaimage;
mod normalize;

pub use align::{align_volumes, match_locations, AlignError, SlicePair, DEFAULT_TOL_MM};
pub use metaimage::{
    read_volume, write_volume, ElementType, MetaImageError, VolumeHeader, DOMAIN_KEY, LOCAL_DATA,
};
pub use normalize::{ensure_normalized, normalize_hu, HuWindow, WindowError};
