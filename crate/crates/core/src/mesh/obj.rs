//! Wavefront OBJ reader/writer and the PLY sidecar for per-face scalars.
//!
//! Only `v` and `f` records matter here; faces must be triangles and indices
//! are 1-based. Floats are written with Rust's shortest round-trip formatting
//! so save/load reproduces positions exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::{Error, Point3, Result, TriMesh};

/// Load a triangle mesh from an OBJ file.
///
/// Accepts `f v`, `f v/vt`, `f v//vn` and `f v/vt/vn` corner syntax; any
/// texture/normal references are ignored. Non-triangle faces, indices out of
/// range and non-manifold connectivity are errors.
pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&path_str, e))?;
    let reader = BufReader::new(file);

    let mut positions: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens.next().ok_or_else(|| Error::ObjParse {
                        path: path_str.clone(),
                        line: lineno,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::ObjParse {
                        path: path_str.clone(),
                        line: lineno,
                        msg: format!("bad coordinate '{tok}'"),
                    })?;
                }
                positions.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let corners: Vec<&str> = tokens.collect();
                if corners.len() != 3 {
                    return Err(Error::NonTriangleFace {
                        path: path_str.clone(),
                        line: lineno,
                        arity: corners.len(),
                    });
                }
                let mut face = [0usize; 3];
                for (k, corner) in corners.iter().enumerate() {
                    let vert_tok = corner.split('/').next().unwrap_or("");
                    let idx: i64 = vert_tok.parse().map_err(|_| Error::ObjParse {
                        path: path_str.clone(),
                        line: lineno,
                        msg: format!("bad face corner '{corner}'"),
                    })?;
                    if idx < 1 || idx as usize > positions.len() {
                        return Err(Error::ObjParse {
                            path: path_str.clone(),
                            line: lineno,
                            msg: format!(
                                "vertex index {idx} out of range (vertices so far: {})",
                                positions.len()
                            ),
                        });
                    }
                    face[k] = (idx - 1) as usize;
                }
                faces.push(face);
            }
            // vn/vt/usemtl/g/o/s/mtllib are valid OBJ but irrelevant here.
            _ => {}
        }
    }

    TriMesh::new(positions, faces)
}

/// Save a mesh as OBJ; optionally emit a PLY sidecar carrying one scalar per
/// face (OBJ has no face-attribute convention).
///
/// The sidecar is written next to `path` with the extension replaced by
/// `.ply`; faces carry a `double quality` property.
pub fn save_obj(
    mesh: &TriMesh,
    path: impl AsRef<Path>,
    face_scalars: Option<&[f64]>,
) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.display().to_string();

    let mut out = String::new();
    for p in mesh.positions() {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    write_atomic(path, out.as_bytes()).map_err(|e| Error::io(&path_str, e))?;

    if let Some(scalars) = face_scalars {
        if scalars.len() != mesh.face_count() {
            return Err(Error::InvalidMesh(format!(
                "face scalar count {} does not match face count {}",
                scalars.len(),
                mesh.face_count()
            )));
        }
        let sidecar = path.with_extension("ply");
        let sidecar_str = sidecar.display().to_string();
        let ply = render_face_scalar_ply(mesh, scalars);
        write_atomic(&sidecar, ply.as_bytes()).map_err(|e| Error::io(&sidecar_str, e))?;
    }
    Ok(())
}

fn render_face_scalar_ply(mesh: &TriMesh, scalars: &[f64]) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", mesh.vertex_count()).unwrap();
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    writeln!(out, "element face {}", mesh.face_count()).unwrap();
    out.push_str("property list uchar int vertex_indices\nproperty double quality\nend_header\n");
    for p in mesh.positions() {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    for (f, s) in mesh.faces().iter().zip(scalars) {
        writeln!(out, "3 {} {} {} {}", f[0], f[1], f[2], s).unwrap();
    }
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    file.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn load_single_triangle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let m = load_obj(&path).unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.edge_count(), 3);
        assert!(m.edges().iter().all(|e| e.is_boundary()));
    }

    #[test]
    fn load_accepts_slash_corners() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n",
        )
        .unwrap();
        assert_eq!(load_obj(&path).unwrap().face_count(), 1);
    }

    #[test]
    fn quad_face_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
        )
        .unwrap();
        let err = load_obj(&path).unwrap_err();
        assert!(matches!(err, Error::NonTriangleFace { arity: 4, line: 5, .. }));
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 zz\n").unwrap();
        match load_obj(&path).unwrap_err() {
            Error::ObjParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tetrahedron_round_trip_is_exact() {
        let m = shapes::tetrahedron();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tet.obj");
        save_obj(&m, &path, None).unwrap();
        let m2 = load_obj(&path).unwrap();
        assert_eq!(m.faces(), m2.faces());
        for (p, q) in m.positions().iter().zip(m2.positions()) {
            assert_eq!(p, q, "shortest round-trip formatting should be exact");
        }
    }

    #[test]
    fn sidecar_ply_written_for_face_scalars() {
        let m = shapes::tetrahedron();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tet.obj");
        let scalars = vec![0.0; m.face_count()];
        save_obj(&m, &path, Some(&scalars)).unwrap();
        let ply = std::fs::read_to_string(dir.path().join("tet.ply")).unwrap();
        assert!(ply.contains("property double quality"));
        assert!(ply.contains("element face 4"));
        // Zero property for every face.
        let zero_rows = ply.lines().filter(|l| l.starts_with("3 ") && l.ends_with(" 0")).count();
        assert_eq!(zero_rows, 4);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let m = shapes::tetrahedron();
        let err = save_obj(&m, "/nonexistent-dir/evermore/tet.obj", None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
