use std::collections::HashSet;

use crate::error::{CoreError, Result};

/// Integer voxel coordinate `[s, h, w]`.
pub type Voxel = [usize; 3];

/// A straight generated segment: node indices plus the voxel chain from
/// `a` to `b`, both endpoints included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub chain: Vec<Voxel>,
}

/// A maximal chain between nodes of degree other than two. `voxels` are
/// the centerline voxels this branch owns, in order from its proximal end;
/// a voxel shared with an earlier branch belongs to that branch only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub id: usize,
    pub voxels: Vec<Voxel>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CenterlineGraph {
    nodes: Vec<Voxel>,
    edges: Vec<Edge>,
    branches: Vec<Branch>,
    clipped: usize,
}

impl CenterlineGraph {
    /// Validates the tree and derives its branch decomposition. Node 0 is
    /// the root.
    pub fn new(nodes: Vec<Voxel>, edges: Vec<Edge>, clipped: usize) -> Result<Self> {
        let mut graph = Self { nodes, edges, branches: Vec::new(), clipped };
        graph.validate()?;
        graph.branches = graph.decompose();
        Ok(graph)
    }

    /// Uses a branch list supplied from outside instead of deriving one.
    pub fn with_branches(nodes: Vec<Voxel>, edges: Vec<Edge>, clipped: usize, branches: Vec<Branch>) -> Result<Self> {
        let graph = Self { nodes, edges, branches, clipped };
        graph.validate()?;
        for (i, b) in graph.branches.iter().enumerate() {
            if b.id != i || b.voxels.is_empty() {
                return Err(CoreError::Shape(format!("branch {i} has id {} and {} voxels", b.id, b.voxels.len())));
            }
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Voxel] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Segments truncated or dropped at the volume border during generation.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.a == node || e.b == node).count()
    }

    /// All owned centerline voxels, each exactly once.
    pub fn centerline(&self) -> impl Iterator<Item = &Voxel> {
        self.branches.iter().flat_map(|b| b.voxels.iter())
    }

    pub fn centerline_len(&self) -> usize {
        self.branches.iter().map(|b| b.voxels.len()).sum()
    }

    /// Number of edges between the root and each edge's proximal node.
    pub fn edge_generations(&self) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.nodes.len()];
        let mut generation = vec![0; self.edges.len()];
        depth[0] = 0;
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for (i, e) in self.edges.iter().enumerate() {
                let v = if e.a == u { e.b } else if e.b == u { e.a } else { continue };
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    generation[i] = depth[u];
                    queue.push_back(v);
                }
            }
        }
        generation
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Shape(m));
        if self.nodes.is_empty() {
            return bad("centerline graph has no nodes".into());
        }
        if self.edges.len() + 1 != self.nodes.len() {
            return bad(format!("{} nodes and {} edges do not form a tree", self.nodes.len(), self.edges.len()));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.a >= self.nodes.len() || e.b >= self.nodes.len() || e.a == e.b {
                return bad(format!("edge {i} joins invalid nodes {} and {}", e.a, e.b));
            }
            if e.chain.first() != Some(&self.nodes[e.a]) || e.chain.last() != Some(&self.nodes[e.b]) {
                return bad(format!("edge {i} chain does not run between its nodes"));
            }
            if e.chain.windows(2).any(|w| !adjacent(w[0], w[1])) {
                return bad(format!("edge {i} chain is not connected"));
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for e in &self.edges {
                let v = if e.a == u { e.b } else if e.b == u { e.a } else { continue };
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("centerline graph is not connected".into());
        }
        Ok(())
    }

    fn decompose(&self) -> Vec<Branch> {
        let n = self.nodes.len();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            incident[e.a].push(i);
            incident[e.b].push(i);
        }
        let mut used = vec![false; self.edges.len()];
        let mut chains: Vec<Vec<Voxel>> = Vec::new();
        let mut stack = vec![0usize];
        while let Some(start) = stack.pop() {
            let mut ends = Vec::new();
            for &first in &incident[start] {
                if used[first] {
                    continue;
                }
                let mut voxels = vec![self.nodes[start]];
                let (mut cur, mut edge) = (start, first);
                loop {
                    used[edge] = true;
                    let e = &self.edges[edge];
                    let (next, forward) = if e.a == cur { (e.b, true) } else { (e.a, false) };
                    if forward {
                        voxels.extend(e.chain.iter().skip(1));
                    } else {
                        voxels.extend(e.chain.iter().rev().skip(1));
                    }
                    cur = next;
                    if incident[cur].len() != 2 {
                        break;
                    }
                    match incident[cur].iter().find(|&&i| !used[i]) {
                        Some(&i) => edge = i,
                        None => break,
                    }
                }
                chains.push(voxels);
                ends.push(cur);
            }
            stack.extend(ends.into_iter().rev());
        }

        let mut claimed = HashSet::new();
        let mut branches = Vec::new();
        for chain in chains {
            let owned: Vec<Voxel> = chain.into_iter().filter(|v| claimed.insert(*v)).collect();
            if !owned.is_empty() {
                branches.push(Branch { id: branches.len(), voxels: owned });
            }
        }
        branches
    }
}

fn adjacent(a: Voxel, b: Voxel) -> bool {
    (0..3).all(|i| a[i].abs_diff(b[i]) <= 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(from: Voxel, steps: usize, d: [isize; 3]) -> Vec<Voxel> {
        (0..=steps)
            .map(|k| std::array::from_fn(|i| (from[i] as isize + d[i] * k as isize) as usize))
            .collect()
    }

    #[test]
    fn y_shape_has_three_branches_with_exclusive_voxels() {
        let trunk = line([0, 5, 5], 4, [1, 0, 0]);
        let left = line([4, 5, 5], 3, [1, -1, 0]);
        let right = line([4, 5, 5], 3, [1, 1, 0]);
        let nodes = vec![[0, 5, 5], [4, 5, 5], [7, 2, 5], [7, 8, 5]];
        let edges = vec![
            Edge { a: 0, b: 1, chain: trunk },
            Edge { a: 1, b: 2, chain: left },
            Edge { a: 1, b: 3, chain: right },
        ];
        let g = CenterlineGraph::new(nodes, edges, 0).unwrap();
        let sizes: Vec<usize> = g.branches().iter().map(|b| b.voxels.len()).collect();
        assert_eq!(sizes, vec![5, 3, 3]);
        assert_eq!(g.centerline_len(), 11);
        assert_eq!(g.edge_generations(), vec![0, 1, 1]);
    }

    #[test]
    fn degree_two_nodes_merge_into_one_branch() {
        let nodes = vec![[0, 0, 0], [3, 0, 0], [6, 0, 0]];
        let edges = vec![
            Edge { a: 0, b: 1, chain: line([0, 0, 0], 3, [1, 0, 0]) },
            Edge { a: 2, b: 1, chain: line([6, 0, 0], 3, [-1, 0, 0]) },
        ];
        let g = CenterlineGraph::new(nodes, edges, 0).unwrap();
        assert_eq!(g.branches().len(), 1);
        assert_eq!(g.branches()[0].voxels, line([0, 0, 0], 6, [1, 0, 0]));
    }

    #[test]
    fn rejects_non_trees() {
        let nodes = vec![[0, 0, 0], [1, 0, 0], [5, 5, 5]];
        let edges = vec![Edge { a: 0, b: 1, chain: vec![[0, 0, 0], [1, 0, 0]] }];
        assert!(CenterlineGraph::new(nodes.clone(), edges.clone(), 0).is_err());
        let gap = vec![Edge { a: 0, b: 1, chain: vec![[0, 0, 0], [2, 0, 0]] }];
        assert!(CenterlineGraph::new(vec![[0, 0, 0], [2, 0, 0]], gap, 0).is_err());
        assert!(CenterlineGraph::new(Vec::new(), Vec::new(), 0).is_err());
    }
}
