//! Segmentation quality against a ground-truth mask and centerline graph:
//! Dice overlap, tree length detected and branches detected. Lengths are
//! centerline voxel counts.

use std::fmt;

use crate::error::{CoreError, Result};
use crate::phantom::{CenterlineGraph, Voxel};
use crate::volio::Volume;

pub const DEFAULT_BRANCH_THRESHOLD: f64 = 0.8;

/// Version of the text layout written by `MetricsReport`'s `Display`.
pub const REPORT_VERSION: u32 = 1;

/// A percentage together with the counts it was computed from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    pub fn percent(&self) -> f64 {
        100.0 * self.numerator as f64 / self.denominator as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// Twice the overlap over the summed mask sizes.
    pub dsc: Ratio,
    /// Branches whose centerline coverage reaches `threshold`.
    pub bd: Ratio,
    /// Covered over total centerline voxels.
    pub td: Ratio,
    pub threshold: f64,
}

impl MetricsReport {
    pub fn dsc(&self) -> f64 {
        dice_percent(self.dsc)
    }

    pub fn bd(&self) -> f64 {
        self.bd.percent()
    }

    pub fn td(&self) -> f64 {
        self.td.percent()
    }

    /// Parses the text produced by `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut found: [Option<(Ratio, f64)>; 3] = [None; 3];
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || CoreError::Config(format!("bad report line {line:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            let slot = match f[0] {
                "DSC" => 0,
                "BD" => 1,
                "TD" => 2,
                _ => return Err(bad()),
            };
            let ratio = Ratio {
                numerator: f[2].parse().map_err(|_| bad())?,
                denominator: f[3].parse().map_err(|_| bad())?,
            };
            let threshold = if f[4] == "-" { 0.0 } else { f[4].parse().map_err(|_| bad())? };
            found[slot] = Some((ratio, threshold));
        }
        match found {
            [Some(dsc), Some(bd), Some(td)] => Ok(Self { dsc: dsc.0, bd: bd.0, td: td.0, threshold: bd.1 }),
            _ => Err(CoreError::Config("report needs DSC, BD and TD lines".into())),
        }
    }
}

/// One line per metric: `name value numerator denominator threshold`.
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# metric value numerator denominator threshold")?;
        writeln!(f, "DSC {:.4} {} {} -", self.dsc(), self.dsc.numerator, self.dsc.denominator)?;
        writeln!(f, "BD {:.4} {} {} {}", self.bd(), self.bd.numerator, self.bd.denominator, self.threshold)?;
        writeln!(f, "TD {:.4} {} {} -", self.td(), self.td.numerator, self.td.denominator)
    }
}

fn dice_percent(r: Ratio) -> f64 {
    if r.denominator == 0 {
        100.0
    } else {
        r.percent()
    }
}

fn labels<'a>(v: &'a Volume, what: &str) -> Result<&'a [u8]> {
    let l = v.as_labels()?;
    if l.iter().any(|&x| x > 1) {
        return Err(CoreError::Shape(format!("{what} mask is not binary")));
    }
    Ok(l)
}

fn dice_counts(pred: &Volume, gt: &Volume) -> Result<Ratio> {
    if pred.extents() != gt.extents() {
        return Err(CoreError::Shape(format!(
            "prediction extents {:?} differ from ground truth {:?}",
            pred.extents(),
            gt.extents()
        )));
    }
    let (p, g) = (labels(pred, "predicted")?, labels(gt, "ground-truth")?);
    let mut both = 0;
    let mut total = 0;
    for (&a, &b) in p.iter().zip(g) {
        both += usize::from(a & b);
        total += usize::from(a) + usize::from(b);
    }
    Ok(Ratio { numerator: 2 * both, denominator: total })
}

/// Dice coefficient as a percentage; two empty masks score 100.
pub fn dice(pred: &Volume, gt: &Volume) -> Result<f64> {
    dice_counts(pred, gt).map(dice_percent)
}

fn covered(pred: &[u8], mask: &Volume, voxels: &[Voxel]) -> Result<usize> {
    voxels.iter().try_fold(0, |n, &v| {
        if !mask.contains(v) {
            return Err(CoreError::Shape(format!("centerline voxel {v:?} outside {:?}", mask.extents())));
        }
        Ok(n + usize::from(pred[mask.index(v[0], v[1], v[2])]))
    })
}

fn nonempty(graph: &CenterlineGraph) -> Result<()> {
    if graph.branches().is_empty() || graph.centerline_len() == 0 {
        return Err(CoreError::Shape("centerline graph has no branches".into()));
    }
    Ok(())
}

fn td_counts(pred: &Volume, graph: &CenterlineGraph) -> Result<Ratio> {
    nonempty(graph)?;
    let p = labels(pred, "predicted")?;
    let numerator = graph
        .branches()
        .iter()
        .map(|b| covered(p, pred, &b.voxels))
        .sum::<Result<usize>>()?;
    Ok(Ratio { numerator, denominator: graph.centerline_len() })
}

fn bd_counts(pred: &Volume, graph: &CenterlineGraph, threshold: f64) -> Result<Ratio> {
    nonempty(graph)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CoreError::Config(format!("branch threshold {threshold} outside [0, 1]")));
    }
    let p = labels(pred, "predicted")?;
    let mut detected = 0;
    for b in graph.branches() {
        let hit = covered(p, pred, &b.voxels)?;
        if hit as f64 >= threshold * b.voxels.len() as f64 {
            detected += 1;
        }
    }
    Ok(Ratio { numerator: detected, denominator: graph.branches().len() })
}

/// Percentage of centerline voxels inside the prediction.
pub fn tree_length_detected(pred: &Volume, graph: &CenterlineGraph) -> Result<f64> {
    td_counts(pred, graph).map(|r| r.percent())
}

/// Percentage of branches with at least `threshold` of their centerline
/// voxels inside the prediction.
pub fn branches_detected(pred: &Volume, graph: &CenterlineGraph, threshold: f64) -> Result<f64> {
    bd_counts(pred, graph, threshold).map(|r| r.percent())
}

pub fn evaluate(pred: &Volume, gt: &Volume, graph: &CenterlineGraph) -> Result<MetricsReport> {
    evaluate_with(pred, gt, graph, DEFAULT_BRANCH_THRESHOLD)
}

pub fn evaluate_with(pred: &Volume, gt: &Volume, graph: &CenterlineGraph, threshold: f64) -> Result<MetricsReport> {
    Ok(MetricsReport {
        dsc: dice_counts(pred, gt)?,
        bd: bd_counts(pred, graph, threshold)?,
        td: td_counts(pred, graph)?,
        threshold,
    })
}
