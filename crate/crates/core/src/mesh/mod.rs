//! Indexed triangle mesh with precomputed topology.
//!
//! A [`TriMesh`] is built once from positions and faces; the flow never
//! changes connectivity, so every topology table (edge list, vertex stars,
//! boundary loops) is immutable after construction. Vertex positions evolve
//! outside the mesh — solvers carry their own position buffers and use
//! [`TriMesh::with_positions`] when writing results.

mod obj;

pub use obj::{load_obj, save_obj};

use crate::{Error, Point3, Result, Vec3};

/// An undirected mesh edge with its adjacent faces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    /// Endpoint vertex indices, `a < b`.
    pub a: usize,
    pub b: usize,
    /// Adjacent face indices: one for boundary edges, two for interior.
    pub faces: Vec<usize>,
}

impl Edge {
    /// True when exactly one face is incident.
    pub fn is_boundary(&self) -> bool {
        self.faces.len() == 1
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// One entry of a vertex star: a neighbor reached through an incident edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StarEntry {
    pub neighbor: usize,
    pub edge: usize,
}

/// Indexed triangle mesh.
///
/// Faces are stored counter-clockwise as seen from the outward side.
/// Construction rejects non-manifold input (an edge with more than two
/// adjacent faces); orientation consistency is detected and recorded but not
/// enforced, so locally consistent strips (a Möbius band, say) still load.
#[derive(Debug, Clone)]
pub struct TriMesh {
    positions: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    stars: Vec<Vec<StarEntry>>,
    vertex_boundary: Vec<bool>,
    boundary_loops: Vec<Vec<usize>>,
    consistently_oriented: bool,
}

impl TriMesh {
    /// Build a mesh and all topology tables from raw positions and faces.
    pub fn new(positions: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = positions.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::InvalidVertexIndex {
                        face: fi,
                        index: v,
                        count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex index"
                )));
            }
        }

        // Edge table keyed by the sorted endpoint pair.
        let mut edge_ids: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        // Directed edge usage per undirected edge, for the orientation check:
        // +1 for (a -> b), -1 for (b -> a).
        let mut winding: Vec<i32> = Vec::new();

        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (f[k], f[(k + 1) % 3]);
                let key = (u.min(v), u.max(v));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        a: key.0,
                        b: key.1,
                        faces: Vec::with_capacity(2),
                    });
                    winding.push(0);
                    edges.len() - 1
                });
                if edges[id].faces.len() == 2 {
                    return Err(Error::NonManifoldEdge { a: key.0, b: key.1 });
                }
                edges[id].faces.push(fi);
                winding[id] += if u < v { 1 } else { -1 };
            }
        }

        // Interior edges traversed twice in the same direction mean the two
        // faces disagree on orientation.
        let consistently_oriented = edges
            .iter()
            .zip(&winding)
            .all(|(e, &w)| if e.faces.len() == 2 { w == 0 } else { true });

        let mut stars: Vec<Vec<StarEntry>> = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            stars[e.a].push(StarEntry {
                neighbor: e.b,
                edge: id,
            });
            stars[e.b].push(StarEntry {
                neighbor: e.a,
                edge: id,
            });
        }
        for star in &mut stars {
            star.sort_by_key(|s| s.neighbor);
        }

        let mut vertex_boundary = vec![false; n];
        for e in &edges {
            if e.is_boundary() {
                vertex_boundary[e.a] = true;
                vertex_boundary[e.b] = true;
            }
        }

        let boundary_loops = trace_boundary_loops(&faces, &edges, &edge_ids);

        Ok(TriMesh {
            positions,
            faces,
            edges,
            stars,
            vertex_boundary,
            boundary_loops,
            consistently_oriented,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Whether all interior edges are shared with opposite winding.
    pub fn is_consistently_oriented(&self) -> bool {
        self.consistently_oriented
    }

    /// True when vertex `v` lies on a boundary edge.
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_boundary[v]
    }

    /// All edges incident to `v`, each with its neighbor vertex and the
    /// adjacent faces of the edge.
    pub fn vertex_star(&self, v: usize) -> Result<Vec<(usize, usize, &[usize])>> {
        if v >= self.positions.len() {
            return Err(Error::VertexOutOfRange {
                index: v,
                count: self.positions.len(),
            });
        }
        Ok(self.stars[v]
            .iter()
            .map(|s| (s.neighbor, s.edge, self.edges[s.edge].faces.as_slice()))
            .collect())
    }

    /// Star entries of `v` without face lookups (hot path for assembly).
    pub fn star(&self, v: usize) -> &[StarEntry] {
        &self.stars[v]
    }

    /// Ordered boundary cycles; empty for closed meshes.
    ///
    /// Loops follow the orientation induced by the faces, so the surface is
    /// on the left when walking a loop of a CCW mesh.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    /// Same connectivity with new vertex positions.
    pub fn with_positions(&self, positions: Vec<Point3>) -> Result<TriMesh> {
        if positions.len() != self.positions.len() {
            return Err(Error::InvalidMesh(format!(
                "position count {} does not match vertex count {}",
                positions.len(),
                self.positions.len()
            )));
        }
        let mut out = self.clone();
        out.positions = positions;
        Ok(out)
    }

    /// Face corner positions.
    pub fn face_points(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [
            self.positions[f[0]],
            self.positions[f[1]],
            self.positions[f[2]],
        ]
    }

    /// Unnormalized face normal (CCW winding); magnitude is twice the area.
    pub fn face_normal_raw(positions: &[Point3], face: &[usize; 3]) -> Vec3 {
        let e1 = positions[face[1]] - positions[face[0]];
        let e2 = positions[face[2]] - positions[face[0]];
        e1.cross(&e2)
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.positions)
    }
}

pub(crate) fn bbox_diagonal(positions: &[Point3]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let mut lo = positions[0];
    let mut hi = positions[0];
    for p in positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi - lo).norm()
}

/// Chain directed boundary half-edges into loops (or open chains when a
/// boundary vertex is shared by several loops).
fn trace_boundary_loops(
    faces: &[[usize; 3]],
    edges: &[Edge],
    edge_ids: &std::collections::HashMap<(usize, usize), usize>,
) -> Vec<Vec<usize>> {
    // A boundary edge is used by exactly one face; traverse it the way that
    // face does, which puts the surface on the left for CCW faces.
    let mut next_of: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    let mut directed: Vec<(usize, usize)> = Vec::new();
    for f in faces {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            let id = edge_ids[&(u.min(v), u.max(v))];
            if edges[id].is_boundary() {
                next_of.entry(u).or_default().push(v);
                directed.push((u, v));
            }
        }
    }
    for outs in next_of.values_mut() {
        outs.sort_unstable();
    }
    directed.sort_unstable();

    let mut used: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for &(start, first) in &directed {
        if used.contains(&(start, first)) {
            continue;
        }
        let mut cycle = vec![start];
        let (mut u, mut v) = (start, first);
        loop {
            used.insert((u, v));
            if v == start {
                break;
            }
            cycle.push(v);
            let Some(outs) = next_of.get(&v) else { break };
            let Some(&w) = outs.iter().find(|&&w| !used.contains(&(v, w))) else {
                break;
            };
            u = v;
            v = w;
        }
        loops.push(cycle);
    }
    loops
}
