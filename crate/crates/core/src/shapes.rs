//! Procedural meshes for tests, benches and examples.
//!
//! Nothing here is part of the flow itself; the solvers only ever consume an
//! existing mesh. These constructors keep fixtures out of the repository.

use crate::{Point3, TriMesh};

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron() -> TriMesh {
    let s = 1.0 / 3.0_f64.sqrt();
    let positions = vec![
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ];
    // Outward CCW winding.
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh::new(positions, faces).expect("tetrahedron is manifold")
}

/// Icosphere on the unit sphere; `subdivisions = 0` is the icosahedron.
///
/// Vertex count is `10 * 4^subdivisions + 2`; every face is wound CCW seen
/// from outside.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut positions: Vec<Point3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| {
        let v = nalgebra::Vector3::new(x, y, z).normalize();
        Point3::from(v)
    })
    .collect();

    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mids = [0usize; 3];
            for k in 0..3 {
                let (u, v) = (f[k], f[(k + 1) % 3]);
                let key = (u.min(v), u.max(v));
                mids[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (positions[u].coords + positions[v].coords).normalize();
                    positions.push(Point3::from(m));
                    positions.len() - 1
                });
            }
            next_faces.push([f[0], mids[0], mids[2]]);
            next_faces.push([f[1], mids[1], mids[0]]);
            next_faces.push([f[2], mids[2], mids[1]]);
            next_faces.push([mids[0], mids[1], mids[2]]);
        }
        faces = next_faces;
    }

    TriMesh::new(positions, faces).expect("icosphere is manifold")
}

/// Regular grid of `nx x ny` vertices over the rectangle `[origin, origin +
/// size]` in the z = 0 plane, split into CCW triangles (normal +z).
pub fn plane_grid(nx: usize, ny: usize, origin: [f64; 2], size: [f64; 2]) -> TriMesh {
    assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 vertices");
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = origin[0] + size[0] * i as f64 / (nx - 1) as f64;
            let y = origin[1] + size[1] * j as f64 / (ny - 1) as f64;
            positions.push(Point3::new(x, y, 0.0));
        }
    }
    let at = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriMesh::new(positions, faces).expect("grid is manifold")
}

/// Möbius band: a strip of `2n` vertices with a half twist. Manifold but not
/// orientable; used to exercise locally consistent normal handling.
pub fn mobius_strip(n: usize, half_width: f64) -> TriMesh {
    assert!(n >= 3);
    let mut positions = Vec::with_capacity(2 * n);
    for k in 0..n {
        let u = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        for &s in &[-half_width, half_width] {
            let x = (1.0 + s * (u / 2.0).cos()) * u.cos();
            let y = (1.0 + s * (u / 2.0).cos()) * u.sin();
            let z = s * (u / 2.0).sin();
            positions.push(Point3::new(x, y, z));
        }
    }
    let mut faces = Vec::with_capacity(2 * n);
    for k in 0..n {
        let a = 2 * k;
        let b = 2 * k + 1;
        let (c, d) = if k + 1 < n {
            (2 * (k + 1), 2 * (k + 1) + 1)
        } else {
            // Seam: the half twist swaps the rail vertices.
            (1, 0)
        };
        faces.push([a, c, b]);
        faces.push([b, c, d]);
    }
    TriMesh::new(positions, faces).expect("mobius strip is manifold")
}

/// Closed polyline (vertex positions plus wrap-around edges) sampling the
/// ellipse `x^2/a^2 + y^2/b^2 = 1` in the z = 0 plane at uneven parameter
/// spacing. Returns `(positions, edges)` for the graph-level spring solver.
pub fn ellipse_polyline(n: usize, a: f64, b: f64, skew: f64) -> (Vec<Point3>, Vec<[usize; 2]>) {
    assert!(n >= 3);
    let positions = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            // skew in (-1, 1) modulates the sample spacing (third harmonic,
            // which the spring flow damps quickly).
            let t = t + skew * (6.0 * std::f64::consts::PI * t).sin() / (6.0 * std::f64::consts::PI);
            let theta = 2.0 * std::f64::consts::PI * t;
            Point3::new(a * theta.cos(), b * theta.sin(), 0.0)
        })
        .collect();
    let edges = (0..n).map(|k| [k, (k + 1) % n]).collect();
    (positions, edges)
}
