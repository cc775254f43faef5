//! Procedural airway-tree phantoms: a recursively bifurcating centerline
//! tree, its tapered tubular mask and a CT-like intensity volume.

mod generate;
mod graph;
mod raster;
mod spec;

pub use generate::generate_tree;
pub use graph::{Branch, CenterlineGraph, Edge, Voxel};
pub use raster::{rasterize, Phantom, TAPER};
pub use spec::TreeSpec;

use crate::error::Result;

/// Generates the tree and rasterizes it in one go.
pub fn make_phantom(spec: &TreeSpec) -> Result<Phantom> {
    let graph = generate_tree(spec)?;
    let (intensity, mask) = rasterize(&graph, spec)?;
    Ok(Phantom { spec: spec.clone(), graph, intensity, mask })
}
