//! Volumes on disk and on the way into the network: file IO, HU
//! normalization, foreground-centred cropping and augmentation.

mod augment;
mod crop;
mod file;
mod graph_file;
mod volume;

pub use augment::{augment, flip_w, rotate_about_s, Interpolation, MAX_ROTATION_DEG};
pub use crop::{foreground_bounds, CenterCropSampler, Crop, CropSpec};
pub use file::{read_volume, write_volume, VOLUME_MAGIC};
pub use graph_file::{read_graph, write_graph, GRAPH_MAGIC, GRAPH_VERSION};
pub use volume::{normalize_hu, ElementKind, Volume, VoxelData, HU_MAX, HU_MIN};
