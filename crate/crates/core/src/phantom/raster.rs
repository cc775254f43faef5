use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::graph::CenterlineGraph;
use super::spec::TreeSpec;
use crate::error::{CoreError, Result};
use crate::volio::Volume;

/// Fractional radius lost from the proximal to the distal end of a segment.
pub const TAPER: f64 = 0.1;

/// Wall thickness in voxels.
const WALL: f32 = 1.0;

/// A generated case: spec, ground-truth graph, raw HU intensity and mask.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub spec: TreeSpec,
    pub graph: CenterlineGraph,
    pub intensity: Volume,
    pub mask: Volume,
}

/// Sweeps a tapered tube along every edge chain. Voxels within the tube
/// form the mask and get lumen intensity; a one-voxel shell around them gets
/// wall intensity; everything else is parenchyma. Gaussian noise is added
/// everywhere.
pub fn rasterize(graph: &CenterlineGraph, spec: &TreeSpec) -> Result<(Volume, Volume)> {
    let [ns, nh, nw] = spec.volume_extent;
    let total = ns * nh * nw;
    if let Some(v) = graph.centerline().find(|v| v[0] >= ns || v[1] >= nh || v[2] >= nw) {
        return Err(CoreError::Shape(format!("centerline voxel {v:?} outside volume {:?}", spec.volume_extent)));
    }
    // Signed distance to the nearest tube surface, clipped at the wall.
    let mut excess = vec![f32::INFINITY; total];
    for (edge, generation) in graph.edges().iter().zip(graph.edge_generations()) {
        let r0 = spec.radius(generation);
        let last = (edge.chain.len() - 1).max(1) as f64;
        let radius = |k: usize| r0 * (1.0 - TAPER * k as f64 / last);
        for (k, pair) in edge.chain.windows(2).enumerate() {
            let p = pair[0].map(|x| x as f64);
            let q = pair[1].map(|x| x as f64);
            let (ra, rb) = (radius(k), radius(k + 1));
            let reach = ra.max(rb) + WALL as f64 + 1.0;
            let lo: [usize; 3] = std::array::from_fn(|i| (p[i].min(q[i]) - reach).floor().max(0.0) as usize);
            let hi: [usize; 3] = std::array::from_fn(|i| {
                ((p[i].max(q[i]) + reach).ceil() as usize).min(spec.volume_extent[i] - 1)
            });
            let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
            let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            for s in lo[0]..=hi[0] {
                for h in lo[1]..=hi[1] {
                    for w in lo[2]..=hi[2] {
                        let x = [s as f64 - p[0], h as f64 - p[1], w as f64 - p[2]];
                        let t = ((x[0] * d[0] + x[1] * d[1] + x[2] * d[2]) / dd).clamp(0.0, 1.0);
                        let r = [x[0] - t * d[0], x[1] - t * d[1], x[2] - t * d[2]];
                        let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                        let e = (dist - (ra + t * (rb - ra))) as f32;
                        let slot = &mut excess[(s * nh + h) * nw + w];
                        if e < *slot {
                            *slot = e;
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, spec.noise_sigma_hu).map_err(|e| CoreError::Config(e.to_string()))?;
    let mut labels = vec![0u8; total];
    let mut hu = vec![0f32; total];
    for i in 0..total {
        let base = if excess[i] <= 0.0 {
            labels[i] = 1;
            spec.lumen_hu
        } else if excess[i] <= WALL {
            spec.wall_hu
        } else {
            spec.parenchyma_hu
        };
        hu[i] = (base + noise.sample(&mut rng)) as f32;
    }
    let spacing = [spec.spacing_mm; 3];
    Ok((
        Volume::scalar(spec.volume_extent, spacing, hu)?,
        Volume::labels(spec.volume_extent, spacing, labels)?,
    ))
}
