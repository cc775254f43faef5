use ltsp_tensor::Real;

use crate::error::{CoreError, Result};
use crate::model::LtspNet;
use crate::volio::Volume;

/// Foreground probability above which a voxel is labelled airway; matches
/// the two-class argmax with ties to background.
pub const THRESHOLD: f32 = 0.5;

/// Cube positions covering a volume. Windows start every `stride` voxels
/// along each axis; the last window is clamped to the far border.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlidingWindowPlan {
    extent: [usize; 3],
    cube: [usize; 3],
    stride: [usize; 3],
    starts: [Vec<usize>; 3],
}

impl SlidingWindowPlan {
    pub fn new(extent: [usize; 3], cube: [usize; 3], stride: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if cube[a] > extent[a] {
                return Err(CoreError::Shape(format!("volume {extent:?} is smaller than the cube {cube:?}")));
            }
            if stride[a] == 0 || stride[a] > cube[a] {
                return Err(CoreError::Config(format!("stride {stride:?} must lie in 1..=cube {cube:?}")));
            }
        }
        let starts = std::array::from_fn(|a| {
            let last = extent[a] - cube[a];
            let mut s: Vec<usize> = (0..=last).step_by(stride[a]).collect();
            if *s.last().expect("at least one start") != last {
                s.push(last);
            }
            s
        });
        Ok(Self { extent, cube, stride, starts })
    }

    pub fn extent(&self) -> [usize; 3] {
        self.extent
    }

    pub fn cube(&self) -> [usize; 3] {
        self.cube
    }

    pub fn stride(&self) -> [usize; 3] {
        self.stride
    }

    /// Window origins in canonical (row-major) order.
    pub fn windows(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for &s in &self.starts[0] {
            for &h in &self.starts[1] {
                for &w in &self.starts[2] {
                    out.push([s, h, w]);
                }
            }
        }
        out
    }

    /// Number of windows covering each voxel.
    pub fn visit_counts(&self) -> Vec<u32> {
        let [_, nh, nw] = self.extent;
        let mut counts = vec![0u32; self.extent.iter().product()];
        for o in self.windows() {
            for s in o[0]..o[0] + self.cube[0] {
                for h in o[1]..o[1] + self.cube[1] {
                    let row = (s * nh + h) * nw;
                    counts[row + o[2]..row + o[2] + self.cube[2]].iter_mut().for_each(|c| *c += 1);
                }
            }
        }
        counts
    }

    /// Copies a window out of a row-major volume.
    pub fn extract<E: Copy>(&self, data: &[E], origin: [usize; 3]) -> Vec<E> {
        let [_, nh, nw] = self.extent;
        let [cs, ch, cw] = self.cube;
        let mut out = Vec::with_capacity(cs * ch * cw);
        for s in origin[0]..origin[0] + cs {
            for h in origin[1]..origin[1] + ch {
                let row = (s * nh + h) * nw + origin[2];
                out.extend_from_slice(&data[row..row + cw]);
            }
        }
        out
    }
}

/// Runs the network over every window and averages the foreground
/// probability wherever windows overlap.
pub fn sliding_window_infer(net: &mut LtspNet<f32>, intensity: &Volume, plan: &SlidingWindowPlan) -> Result<(Volume, Volume)> {
    let order: Vec<usize> = (0..plan.windows().len()).collect();
    sliding_window_infer_ordered(net, intensity, plan, &order)
}

/// As [`sliding_window_infer`], evaluating windows in the given order. The
/// result does not depend on the order: window outputs are fused in
/// canonical order.
pub fn sliding_window_infer_ordered(
    net: &mut LtspNet<f32>,
    intensity: &Volume,
    plan: &SlidingWindowPlan,
    order: &[usize],
) -> Result<(Volume, Volume)> {
    if !intensity.is_normalized() {
        return Err(CoreError::Config("sliding-window inference needs a normalized volume".into()));
    }
    if intensity.extents() != plan.extent() {
        return Err(CoreError::Shape(format!(
            "volume {:?} does not match plan {:?}",
            intensity.extents(),
            plan.extent()
        )));
    }
    let windows = plan.windows();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..windows.len()).collect::<Vec<_>>() {
        return Err(CoreError::Config("window order must be a permutation".into()));
    }
    let data = intensity.as_scalar()?;
    let cube = plan.cube();
    let per_window = cube.iter().product::<usize>();
    let training = net.norms().first().map(|(_, n)| n.training).unwrap_or(false);
    net.set_training(false);
    let mut outputs: Vec<Option<Vec<f32>>> = vec![None; windows.len()];
    for &i in order {
        let prob = net.infer(&plan.extract(data, windows[i]), cube);
        let prob = match prob {
            Ok(p) => p,
            Err(e) => {
                net.set_training(training);
                return Err(e);
            }
        };
        outputs[i] = Some(prob.data()[per_window..].to_vec());
    }
    net.set_training(training);

    let [_, nh, nw] = plan.extent();
    let mut sum = vec![0f32; data.len()];
    for (o, fg) in windows.iter().zip(outputs) {
        let fg = fg.expect("every window evaluated");
        let mut k = 0;
        for s in o[0]..o[0] + cube[0] {
            for h in o[1]..o[1] + cube[1] {
                let row = (s * nh + h) * nw + o[2];
                for (acc, &p) in sum[row..row + cube[2]].iter_mut().zip(&fg[k..k + cube[2]]) {
                    *acc += p;
                }
                k += cube[2];
            }
        }
    }
    let counts = plan.visit_counts();
    let prob: Vec<f32> = sum.iter().zip(&counts).map(|(s, &c)| s / c as f32).collect();
    if !prob.iter().all(|p| p.is_finite()) {
        return Err(CoreError::Numeric("non-finite probability in sliding-window output".into()));
    }
    let labels = prob.iter().map(|&p| u8::from(p > THRESHOLD)).collect();
    let spacing = intensity.spacing();
    Ok((Volume::scalar(plan.extent(), spacing, prob)?, Volume::labels(plan.extent(), spacing, labels)?))
}

/// Foreground probabilities from one eval-mode pass over the whole volume.
pub fn direct_infer<T: Real>(net: &mut LtspNet<T>, intensity: &Volume) -> Result<Vec<T>> {
    let data: Vec<T> = intensity.as_scalar()?.iter().map(|&v| T::from_f64_lossy(v as f64)).collect();
    net.set_training(false);
    let prob = net.infer(&data, intensity.extents())?;
    let n = data.len();
    Ok(prob.data()[n..].to_vec())
}
