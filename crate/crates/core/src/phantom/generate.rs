use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{CenterlineGraph, Edge, Voxel};
use super::spec::TreeSpec;
use crate::error::{CoreError, Result};

const SAMPLE_STEP: f64 = 0.25;

type Point = [f64; 3];

/// Grows a binary tree from a root segment pointing down the S axis. Each
/// child is rotated away from its parent's direction by an angle drawn from
/// the spec's range, the two children on opposite sides of a random plane.
pub fn generate_tree(spec: &TreeSpec) -> Result<CenterlineGraph> {
    spec.validate()?;
    let ext = spec.volume_extent;
    let margin = spec.radius(0).ceil() + 1.0;
    let start = [margin, (ext[1] / 2) as f64, (ext[2] / 2) as f64];
    let mut grower = Grower {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        nodes: vec![round(start)],
        edges: Vec::new(),
        clipped: 0,
    };
    if !grower.inside(start, 0) || !grower.inside(add(start, scale([1.0, 0.0, 0.0], spec.length(0))), 0) {
        return Err(CoreError::Config(format!(
            "volume {ext:?} cannot hold a root segment of length {} and radius {}",
            spec.length(0),
            spec.root_radius
        )));
    }
    grower.grow(0, start, [1.0, 0.0, 0.0], 0);
    CenterlineGraph::new(grower.nodes, grower.edges, grower.clipped)
}

struct Grower<'a> {
    spec: &'a TreeSpec,
    rng: ChaCha8Rng,
    nodes: Vec<Voxel>,
    edges: Vec<Edge>,
    clipped: usize,
}

impl Grower<'_> {
    fn inside(&self, p: Point, generation: usize) -> bool {
        let margin = self.spec.radius(generation).ceil();
        (0..3).all(|i| p[i] >= margin && p[i] <= self.spec.volume_extent[i] as f64 - 1.0 - margin)
    }

    fn grow(&mut self, parent: usize, start: Point, dir: Point, generation: usize) {
        let length = self.spec.length(generation);
        let samples = (length / SAMPLE_STEP).ceil() as usize;
        let mut chain = vec![self.nodes[parent]];
        let mut end = start;
        let mut truncated = false;
        for k in 1..=samples {
            let p = add(start, scale(dir, length * k as f64 / samples as f64));
            if !self.inside(p, generation) {
                truncated = true;
                break;
            }
            end = p;
            let v = round(p);
            if chain.last() != Some(&v) {
                chain.push(v);
            }
        }
        if chain.len() < 2 {
            self.clipped += 1;
            return;
        }
        let node = self.nodes.len();
        self.nodes.push(*chain.last().expect("chain is nonempty"));
        self.edges.push(Edge { a: parent, b: node, chain });
        if truncated {
            self.clipped += 1;
            return;
        }
        if generation + 1 >= self.spec.depth {
            return;
        }
        let perp = self.random_perpendicular(dir);
        let (lo, hi) = self.spec.branch_angle_range;
        for side in [1.0, -1.0] {
            let theta = self.rng.gen_range(lo..=hi).to_radians();
            let child = add(scale(dir, theta.cos()), scale(perp, side * theta.sin()));
            self.grow(node, end, normalize(child), generation + 1);
        }
    }

    fn random_perpendicular(&mut self, dir: Point) -> Point {
        let helper = if dir[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let u = normalize(cross(dir, helper));
        let v = cross(dir, u);
        let phi = self.rng.gen_range(0.0..std::f64::consts::TAU);
        add(scale(u, phi.cos()), scale(v, phi.sin()))
    }
}

fn round(p: Point) -> Voxel {
    p.map(|x| x.round() as usize)
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Point, k: f64) -> Point {
    a.map(|x| x * k)
}

fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: Point) -> Point {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    scale(a, 1.0 / n)
}
