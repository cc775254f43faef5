//! Centerline graphs as plain text with integer voxel coordinates:
//!
//! ```text
//! LTSPGRAPH 1
//! clipped 0
//! node 0 5 48 48
//! edge 0 1 <n> s h w s h w ...
//! branch 0 <n> s h w ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CoreError, FormatError, Result};
use crate::phantom::{Branch, CenterlineGraph, Edge, Voxel};

pub const GRAPH_MAGIC: &str = "LTSPGRAPH";
pub const GRAPH_VERSION: u32 = 1;

pub fn write_graph(graph: &CenterlineGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(graph)).map_err(|e| CoreError::io(path, e))
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<CenterlineGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let (nodes, edges, clipped, branches) = decode(&text).map_err(|e| CoreError::format(path, e))?;
    CenterlineGraph::with_branches(nodes, edges, clipped, branches)
}

fn push_chain(out: &mut String, chain: &[Voxel]) {
    let _ = write!(out, " {}", chain.len());
    for [s, h, w] in chain {
        let _ = write!(out, " {s} {h} {w}");
    }
    out.push('\n');
}

pub(crate) fn encode(graph: &CenterlineGraph) -> String {
    let mut out = format!("{GRAPH_MAGIC} {GRAPH_VERSION}\nclipped {}\n", graph.clipped());
    for (i, [s, h, w]) in graph.nodes().iter().enumerate() {
        let _ = writeln!(out, "node {i} {s} {h} {w}");
    }
    for e in graph.edges() {
        let _ = write!(out, "edge {} {}", e.a, e.b);
        push_chain(&mut out, &e.chain);
    }
    for b in graph.branches() {
        let _ = write!(out, "branch {}", b.id);
        push_chain(&mut out, &b.voxels);
    }
    out
}

type Parts = (Vec<Voxel>, Vec<Edge>, usize, Vec<Branch>);

fn decode(text: &str) -> std::result::Result<Parts, FormatError> {
    let mut lines = text.lines();
    let mut head = lines.next().unwrap_or_default().split_whitespace();
    if head.next() != Some(GRAPH_MAGIC) {
        return Err(FormatError::BadMagic { expected: GRAPH_MAGIC });
    }
    let version: u32 = number(head.next())?;
    if version != GRAPH_VERSION {
        return Err(FormatError::Version(version));
    }
    let (mut nodes, mut edges, mut branches) = (Vec::new(), Vec::new(), Vec::new());
    let mut clipped = 0;
    for (lineno, line) in lines.enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            None => continue,
            Some("clipped") => clipped = number(it.next())?,
            Some("node") => {
                let id: usize = number(it.next())?;
                if id != nodes.len() {
                    return Err(FormatError::Header(format!("node {id} out of order")));
                }
                nodes.push(voxel(&mut it)?);
            }
            Some("edge") => {
                let a = number(it.next())?;
                let b = number(it.next())?;
                edges.push(Edge { a, b, chain: chain(&mut it)? });
            }
            Some("branch") => {
                let id = number(it.next())?;
                branches.push(Branch { id, voxels: chain(&mut it)? });
            }
            Some(other) => {
                return Err(FormatError::Header(format!("line {}: unknown record {other:?}", lineno + 2)));
            }
        }
        if it.next().is_some() {
            return Err(FormatError::Header(format!("line {}: trailing fields", lineno + 2)));
        }
    }
    Ok((nodes, edges, clipped, branches))
}

fn number<T: std::str::FromStr>(field: Option<&str>) -> std::result::Result<T, FormatError> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| FormatError::Header(format!("expected a number, found {field:?}")))
}

fn voxel<'a>(it: &mut impl Iterator<Item = &'a str>) -> std::result::Result<Voxel, FormatError> {
    Ok([number(it.next())?, number(it.next())?, number(it.next())?])
}

fn chain<'a>(it: &mut impl Iterator<Item = &'a str>) -> std::result::Result<Vec<Voxel>, FormatError> {
    let n: usize = number(it.next())?;
    (0..n).map(|_| voxel(it)).collect()
}
