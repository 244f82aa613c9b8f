//! The monitor function: per-face shape operators, per-edge curvatures and
//! boundary frames.
//!
//! Each face gets a symmetric positive-definite tensor `|S|^alpha` measuring
//! how fast the target's normal turns across the face; each edge gets the
//! scalar analog `|dn| / |dphi|`. Boundary edges additionally carry the
//! turning rate of a Darboux frame so boundary vertices can bunch at corners.
//!
//! Isotropic (heightfield) mode measures every length in the xy projection
//! and replaces unit normals with Gauss-map images `(f_x, f_y,
//! (f_x^2+f_y^2)/2)`; the per-face operator of a quadratic height function
//! is then exactly its Hessian.

use nalgebra::{Matrix2, Matrix3x2};
use rayon::prelude::*;

use crate::targets::Mode;
use crate::{Error, Mat3, Point3, Result, SurfaceTarget, TriMesh, Vec2, Vec3};

/// Symmetric 2x2 matrix `[[a, b], [b, c]]` with closed-form spectral
/// calculus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Sym2 { a, b, c }
    }

    pub fn identity() -> Self {
        Sym2::new(1.0, 0.0, 1.0)
    }

    pub fn zero() -> Self {
        Sym2::new(0.0, 0.0, 0.0)
    }

    pub fn diag(l0: f64, l1: f64) -> Self {
        Sym2::new(l0, 0.0, l1)
    }

    /// Symmetrized conversion; callers pass matrices that are symmetric up
    /// to roundoff (Gram matrices, conjugations).
    pub fn from_mat2(m: Matrix2<f64>) -> Self {
        Sym2::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)])
    }

    pub fn to_mat2(self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.b, self.c)
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.b * v.x + self.c * v.y)
    }

    /// Eigenvalues (descending) and the corresponding orthonormal
    /// eigenvectors. Deterministic: near-diagonal and near-isotropic inputs
    /// return the standard basis.
    pub fn eigen(self) -> ([f64; 2], [Vec2; 2]) {
        let mean = 0.5 * (self.a + self.c);
        let d = 0.5 * (self.a - self.c);
        let r = d.hypot(self.b);
        let vals = [mean + r, mean - r];

        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs());
        if self.b.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || r <= 1e-14 * scale {
            // Diagonal (or a multiple of the identity): standard basis,
            // ordered so the first vector carries the larger diagonal entry.
            return if self.a >= self.c {
                (vals, [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)])
            } else {
                (vals, [Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)])
            };
        }

        // Pick the numerically larger representation of the leading
        // eigenvector.
        let v0 = if d >= 0.0 {
            Vec2::new(r + d, self.b)
        } else {
            Vec2::new(self.b, r - d)
        };
        let v0 = v0 / v0.norm();
        let v1 = Vec2::new(-v0.y, v0.x);
        (vals, [v0, v1])
    }

    fn map_eigenvalues(self, f: impl Fn(f64) -> f64) -> Sym2 {
        let (vals, vecs) = self.eigen();
        let (f0, f1) = (f(vals[0]), f(vals[1]));
        Sym2::new(
            f0 * vecs[0].x * vecs[0].x + f1 * vecs[1].x * vecs[1].x,
            f0 * vecs[0].x * vecs[0].y + f1 * vecs[1].x * vecs[1].y,
            f0 * vecs[0].y * vecs[0].y + f1 * vecs[1].y * vecs[1].y,
        )
    }

    /// Spectral absolute value: same eigenvectors, eigenvalues replaced by
    /// their magnitudes.
    pub fn abs(self) -> Sym2 {
        self.map_eigenvalues(f64::abs)
    }

    /// Spectral power for positive-semidefinite input. `alpha = 0` returns
    /// the identity. Eigenvalues below `-1e-12` are an error; tiny negative
    /// roundoff is clamped to zero.
    pub fn power(self, alpha: f64) -> Result<Sym2> {
        if alpha == 0.0 {
            return Ok(Sym2::identity());
        }
        let (vals, _) = self.eigen();
        if vals[1] < -1e-12 {
            return Err(Error::NegativeEigenvalue {
                eigenvalue: vals[1],
            });
        }
        Ok(self.map_eigenvalues(|l| l.max(0.0).powf(alpha)))
    }

    /// Spectral square root; equivalent to `power(0.5)`.
    pub fn sqrt(self) -> Result<Sym2> {
        self.power(0.5)
    }

    pub fn add_scaled_identity(self, delta: f64) -> Sym2 {
        Sym2::new(self.a + delta, self.b, self.c + delta)
    }

    pub fn max_abs_eigenvalue(self) -> f64 {
        let (vals, _) = self.eigen();
        vals[0].abs().max(vals[1].abs())
    }

    pub fn det(self) -> f64 {
        self.a * self.c - self.b * self.b
    }
}

/// Per-face monitor tensor with its tangent frame.
#[derive(Debug, Clone)]
pub struct FaceMetric {
    /// Orthonormal tangent basis; fixed `(e_x, e_y)` in isotropic mode.
    pub tangent: [Vec3; 2],
    /// Tangent-space shape operator before regularization and power.
    pub raw: Sym2,
    /// `(raw + delta I)^alpha`.
    pub powered: Sym2,
    /// The 3x3 form `T^t powered T`; annihilates the face normal in
    /// euclidean mode and the z axis in isotropic mode.
    pub ambient: Mat3,
    /// Set when the face's tangent map was singular and the metric is the
    /// regularization fallback.
    pub degenerate: bool,
}

impl FaceMetric {
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.ambient * v
    }

    /// Components of an ambient vector in the tangent basis.
    pub fn tangent_components(&self, v: &Vec3) -> Vec2 {
        Vec2::new(self.tangent[0].dot(v), self.tangent[1].dot(v))
    }

    fn fallback(tangent: [Vec3; 2], alpha: f64, delta: f64) -> FaceMetric {
        let powered = Sym2::diag(delta, delta)
            .power(alpha)
            .expect("nonnegative by construction");
        FaceMetric {
            tangent,
            raw: Sym2::zero(),
            powered,
            ambient: sandwich(powered, &tangent),
            degenerate: true,
        }
    }
}

fn sandwich(m: Sym2, tangent: &[Vec3; 2]) -> Mat3 {
    let x1 = tangent[0];
    let x2 = tangent[1];
    m.a * x1 * x1.transpose()
        + m.b * (x1 * x2.transpose() + x2 * x1.transpose())
        + m.c * x2 * x2.transpose()
}

/// Per-vertex normals in the target's convention: unit outward surface
/// normals in euclidean mode, Gauss-map images (non-unit) in isotropic mode.
pub fn vertex_normals(
    mesh: &TriMesh,
    positions: &[Point3],
    target: &SurfaceTarget,
) -> Result<Vec<Vec3>> {
    debug_assert_eq!(positions.len(), mesh.vertex_count());
    match target.mode() {
        Mode::Euclidean => positions
            .iter()
            .map(|p| target.surface_normal(*p))
            .collect(),
        Mode::Isotropic => positions
            .iter()
            .map(|p| target.gauss_map(crate::Point2::new(p.x, p.y)))
            .collect(),
    }
}

/// Raw tangent-space shape operator of one face from its vertex normals,
/// plus the tangent basis. Errors when the tangent map is singular.
fn face_raw_operator(
    positions: &[Point3],
    normals: &[Vec3],
    face: &[usize; 3],
    face_index: usize,
    mode: Mode,
    area_floor: f64,
) -> Result<(Sym2, [Vec3; 2])> {
    let [i, j, k] = *face;
    let e1 = positions[j] - positions[i];
    let e2 = positions[k] - positions[i];

    match mode {
        Mode::Euclidean => {
            let n_raw = e1.cross(&e2);
            let area = 0.5 * n_raw.norm();
            if area <= area_floor {
                return Err(Error::DegenerateFace { face: face_index });
            }
            let n_face = n_raw / n_raw.norm();

            // Deterministic tangent frame: longest edge, then its in-plane
            // perpendicular.
            let e3 = positions[k] - positions[j];
            let longest = [e1, e2, e3]
                .into_iter()
                .max_by(|u, v| u.norm_squared().partial_cmp(&v.norm_squared()).unwrap())
                .unwrap();
            let x1 = (longest - n_face * longest.dot(&n_face)).normalize();
            let x2 = n_face.cross(&x1);
            let tangent = [x1, x2];

            let u = Matrix2::new(x1.dot(&e1), x1.dot(&e2), x2.dot(&e1), x2.dot(&e2));
            let Some(u_inv) = u.try_inverse() else {
                return Err(Error::DegenerateFace { face: face_index });
            };

            // Normals chosen locally consistent: flip against the first
            // corner's normal if needed (non-orientable inputs).
            let ni = normals[i];
            let nj = if normals[j].dot(&ni) < 0.0 { -normals[j] } else { normals[j] };
            let nk = if normals[k].dot(&ni) < 0.0 { -normals[k] } else { normals[k] };
            let dn1 = nj - ni;
            let dn2 = nk - ni;

            let n_mat = Matrix3x2::from_columns(&[dn1, dn2]);
            let s32 = n_mat * u_inv;
            let gram = Sym2::from_mat2(s32.transpose() * s32);
            Ok((gram.sqrt()?, tangent))
        }
        Mode::Isotropic => {
            let tangent = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
            let u = Matrix2::new(e1.x, e2.x, e1.y, e2.y);
            let det = u.determinant();
            // Projected area in the i-metric.
            if det.abs() <= 2.0 * area_floor {
                return Err(Error::DegenerateFace { face: face_index });
            }
            let u_inv = u.try_inverse().ok_or(Error::DegenerateFace { face: face_index })?;

            // The i-metric sees only the xy components of Gauss-image
            // differences, which is what makes quadratic heightfields exact.
            let dn1 = normals[j] - normals[i];
            let dn2 = normals[k] - normals[i];
            let n_mat = Matrix2::new(dn1.x, dn2.x, dn1.y, dn2.y);
            let s22 = n_mat * u_inv;
            let gram = Sym2::from_mat2(s22.transpose() * s22);
            Ok((gram.sqrt()?, tangent))
        }
    }
}

/// Shape-operator metric of a single face: `T^t (S + delta I)^alpha T`.
///
/// `delta` is the regularization magnitude resolved by the caller (see
/// [`compute_face_metrics`] for the flow's scale rule).
pub fn face_shape_operator(
    mesh: &TriMesh,
    positions: &[Point3],
    normals: &[Vec3],
    face: usize,
    mode: Mode,
    alpha: f64,
    delta: f64,
) -> Result<FaceMetric> {
    let area_floor = 1e-12 * mean_face_area(mesh, positions, mode);
    let (raw, tangent) = face_raw_operator(
        positions,
        normals,
        &mesh.faces()[face],
        face,
        mode,
        area_floor,
    )?;
    let powered = raw.add_scaled_identity(delta).power(alpha)?;
    Ok(FaceMetric {
        tangent,
        raw,
        powered,
        ambient: sandwich(powered, &tangent),
        degenerate: false,
    })
}

fn mean_face_area(mesh: &TriMesh, positions: &[Point3], mode: Mode) -> f64 {
    let sum: f64 = mesh
        .faces()
        .iter()
        .map(|f| {
            let e1 = positions[f[1]] - positions[f[0]];
            let e2 = positions[f[2]] - positions[f[0]];
            match mode {
                Mode::Euclidean => 0.5 * e1.cross(&e2).norm(),
                Mode::Isotropic => 0.5 * (e1.x * e2.y - e1.y * e2.x).abs(),
            }
        })
        .sum();
    sum / mesh.face_count().max(1) as f64
}

/// All face metrics plus the resolved regularization `delta`.
///
/// Two passes: raw operators first, then `delta = delta_scale * mean of the
/// largest eigenvalue magnitude` and the powered sandwich. Degenerate faces
/// fall back to `delta^alpha` times the tangent projector, reusing the
/// previous iteration's frame when one is supplied.
pub fn compute_face_metrics(
    mesh: &TriMesh,
    positions: &[Point3],
    normals: &[Vec3],
    mode: Mode,
    alpha: f64,
    delta_scale: f64,
    previous: Option<&[FaceMetric]>,
) -> (Vec<FaceMetric>, f64, usize) {
    let area_floor = 1e-12 * mean_face_area(mesh, positions, mode);
    let raws: Vec<Result<(Sym2, [Vec3; 2])>> = mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(fi, f)| face_raw_operator(positions, normals, f, fi, mode, area_floor))
        .collect();

    let mut sum = 0.0;
    let mut count = 0usize;
    for raw in raws.iter().flatten() {
        sum += raw.0.max_abs_eigenvalue();
        count += 1;
    }
    let delta = if count > 0 {
        delta_scale * sum / count as f64
    } else {
        delta_scale
    };

    let default_tangent = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
    let mut degenerate_count = 0usize;
    let metrics: Vec<FaceMetric> = raws
        .into_iter()
        .enumerate()
        .map(|(fi, raw)| match raw {
            Ok((raw, tangent)) => {
                let powered = raw
                    .add_scaled_identity(delta)
                    .power(alpha)
                    .unwrap_or_else(|_| Sym2::diag(delta, delta).power(alpha).unwrap());
                FaceMetric {
                    tangent,
                    raw,
                    powered,
                    ambient: sandwich(powered, &tangent),
                    degenerate: false,
                }
            }
            Err(_) => {
                degenerate_count += 1;
                let tangent = previous
                    .map(|prev| prev[fi].tangent)
                    .unwrap_or(default_tangent);
                FaceMetric::fallback(tangent, alpha, delta)
            }
        })
        .collect();

    (metrics, delta, degenerate_count)
}

/// Scalar curvature of a single edge from its endpoint data: the norm of the
/// normal difference over the edge length, with both norms taken in the xy
/// projection in isotropic mode. Normals are sign-aligned first so locally
/// consistent orientations suffice.
pub fn edge_curvature_between(
    p_i: Point3,
    p_j: Point3,
    n_i: Vec3,
    n_j: Vec3,
    mode: Mode,
) -> Option<f64> {
    match mode {
        Mode::Euclidean => {
            let len = (p_j - p_i).norm();
            if len <= 0.0 {
                return None;
            }
            let n_j = if n_j.dot(&n_i) < 0.0 { -n_j } else { n_j };
            Some((n_j - n_i).norm() / len)
        }
        Mode::Isotropic => {
            let d = p_j - p_i;
            let len = d.x.hypot(d.y);
            if len <= 0.0 {
                return None;
            }
            let dn = n_j - n_i;
            Some(dn.x.hypot(dn.y) / len)
        }
    }
}

/// Curvature of one mesh edge; zero-length edges are an error.
pub fn edge_curvature(
    mesh: &TriMesh,
    positions: &[Point3],
    normals: &[Vec3],
    edge: usize,
    mode: Mode,
) -> Result<f64> {
    let e = &mesh.edges()[edge];
    edge_curvature_between(positions[e.a], positions[e.b], normals[e.a], normals[e.b], mode)
        .ok_or(Error::ZeroLengthEdge { a: e.a, b: e.b })
}

/// Per-edge curvatures for a whole mesh: the scalar `interior` value for
/// every edge, plus the Darboux `boundary` value on boundary edges.
#[derive(Debug, Clone)]
pub struct EdgeCurvatures {
    pub interior: Vec<f64>,
    pub boundary: Vec<Option<f64>>,
}

impl EdgeCurvatures {
    /// Curvatures for every edge. Zero-length edges contribute zero (the
    /// solver floor keeps systems definite); boundary edges whose frame is
    /// degenerate fall back to their interior value.
    pub fn compute(
        mesh: &TriMesh,
        positions: &[Point3],
        normals: &[Vec3],
        target: &SurfaceTarget,
    ) -> EdgeCurvatures {
        let mode = target.mode();
        let interior: Vec<f64> = mesh
            .edges()
            .par_iter()
            .map(|e| {
                edge_curvature_between(
                    positions[e.a],
                    positions[e.b],
                    normals[e.a],
                    normals[e.b],
                    mode,
                )
                .unwrap_or(0.0)
            })
            .collect();

        let boundary: Vec<Option<f64>> = (0..mesh.edge_count())
            .into_par_iter()
            .map(|ei| {
                if !mesh.edges()[ei].is_boundary() {
                    return None;
                }
                Some(
                    boundary_edge_curvature(mesh, positions, target, ei)
                        .unwrap_or(interior[ei]),
                )
            })
            .collect();

        EdgeCurvatures { interior, boundary }
    }
}

/// Averaged unit boundary direction at a boundary vertex, oriented along the
/// boundary loops (surface on the left).
fn boundary_direction(mesh: &TriMesh, positions: &[Point3], v: usize) -> Result<Vec3> {
    let mut dir = Vec3::zeros();
    let mut found = false;
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for (idx, &w) in lp.iter().enumerate() {
            if w != v {
                continue;
            }
            found = true;
            let prev = lp[(idx + n - 1) % n];
            let next = lp[(idx + 1) % n];
            let incoming = positions[v] - positions[prev];
            let outgoing = positions[next] - positions[v];
            if incoming.norm() > 0.0 {
                dir += incoming.normalize();
            }
            if outgoing.norm() > 0.0 {
                dir += outgoing.normalize();
            }
        }
    }
    if !found {
        return Err(Error::InvalidMesh(format!(
            "vertex {v} is not on the boundary"
        )));
    }
    let n = dir.norm();
    if n <= 1e-12 {
        return Err(Error::DegenerateFrame { vertex: v });
    }
    Ok(dir / n)
}

/// The mode-appropriate unit normal for a boundary Darboux frame.
fn frame_normal(target: &SurfaceTarget, p: Point3) -> Result<Vec3> {
    match target.mode() {
        Mode::Euclidean => target.surface_normal(p),
        Mode::Isotropic => target.isotropic_boundary_normal(crate::Point2::new(p.x, p.y)),
    }
}

/// Unit tangent-normal at a boundary vertex: orthogonal to the averaged
/// boundary direction, orthogonal to the frame normal, pointing away from
/// the surface.
pub fn tangent_normal(
    mesh: &TriMesh,
    positions: &[Point3],
    target: &SurfaceTarget,
    v: usize,
) -> Result<Vec3> {
    let d = boundary_direction(mesh, positions, v)?;
    let n = frame_normal(target, positions[v])?;
    let t = d.cross(&n);
    let norm = t.norm();
    if norm <= 1e-12 {
        return Err(Error::DegenerateFrame { vertex: v });
    }
    Ok(t / norm)
}

/// Unit Darboux tangent `T = n x t` at a boundary vertex.
pub fn boundary_darboux_tangent(
    mesh: &TriMesh,
    positions: &[Point3],
    target: &SurfaceTarget,
    v: usize,
) -> Result<Vec3> {
    let t = tangent_normal(mesh, positions, target, v)?;
    let n = frame_normal(target, positions[v])?;
    let big_t = n.cross(&t);
    let norm = big_t.norm();
    if norm <= 1e-12 {
        return Err(Error::DegenerateFrame { vertex: v });
    }
    Ok(big_t / norm)
}

/// Frenet curvature of a boundary edge: the angle between the endpoint
/// Darboux tangents over the edge length (xy-projected in isotropic mode).
pub fn boundary_edge_curvature(
    mesh: &TriMesh,
    positions: &[Point3],
    target: &SurfaceTarget,
    edge: usize,
) -> Result<f64> {
    let e = &mesh.edges()[edge];
    if !e.is_boundary() {
        return Err(Error::InvalidMesh(format!(
            "edge ({}, {}) is not a boundary edge",
            e.a, e.b
        )));
    }
    let t_a = boundary_darboux_tangent(mesh, positions, target, e.a)?;
    let t_b = boundary_darboux_tangent(mesh, positions, target, e.b)?;
    let d = positions[e.b] - positions[e.a];
    let len = match target.mode() {
        Mode::Euclidean => d.norm(),
        Mode::Isotropic => d.x.hypot(d.y),
    };
    if len <= 0.0 {
        return Err(Error::ZeroLengthEdge { a: e.a, b: e.b });
    }
    Ok(t_a.dot(&t_b).clamp(-1.0, 1.0).acos() / len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::targets::{AnalyticHeight, AnalyticSdf, Heightfield, Rect};
    use crate::Point2;
    use approx::{assert_relative_eq, relative_eq};

    fn sphere_target(r: f64) -> SurfaceTarget {
        SurfaceTarget::Analytic(AnalyticSdf::Sphere {
            center: Point3::origin(),
            radius: r,
        })
    }

    fn heightfield(h: AnalyticHeight, half: f64) -> SurfaceTarget {
        SurfaceTarget::Heightfield(Heightfield::analytic(
            h,
            Rect::new(Point2::new(-half, -half), Point2::new(half, half)),
        ))
    }

    #[test]
    fn sym2_abs_examples() {
        assert_eq!(Sym2::diag(2.0, -3.0).abs(), Sym2::diag(2.0, 3.0));
        assert_eq!(Sym2::identity().abs(), Sym2::identity());
        // [[0,1],[1,0]] has eigenvalues +-1, so |m| is the identity.
        let m = Sym2::new(0.0, 1.0, 0.0).abs();
        assert_relative_eq!(m.a, 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.b, 0.0, epsilon = 1e-14);
        assert_relative_eq!(m.c, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sym2_power_examples() {
        let m = Sym2::new(3.0, 0.7, 1.4);
        assert_eq!(m.power(0.0).unwrap(), Sym2::identity());
        let half = Sym2::diag(4.0, 1.0).power(0.5).unwrap();
        assert_relative_eq!(half.a, 2.0, epsilon = 1e-14);
        assert_relative_eq!(half.c, 1.0, epsilon = 1e-14);

        // Rotated diagonal: R diag(9,1) R^t at 30 degrees.
        let th = 30.0_f64.to_radians();
        let (s, co) = th.sin_cos();
        let rot = Matrix2::new(co, -s, s, co);
        let m = Sym2::from_mat2(rot * Matrix2::new(9.0, 0.0, 0.0, 1.0) * rot.transpose());
        let root = m.power(0.5).unwrap();
        let expect = Sym2::from_mat2(rot * Matrix2::new(3.0, 0.0, 0.0, 1.0) * rot.transpose());
        assert_relative_eq!(root.a, expect.a, epsilon = 1e-12);
        assert_relative_eq!(root.b, expect.b, epsilon = 1e-12);
        assert_relative_eq!(root.c, expect.c, epsilon = 1e-12);
    }

    #[test]
    fn sym2_power_rejects_indefinite() {
        let err = Sym2::diag(1.0, -0.5).power(0.5).unwrap_err();
        assert!(matches!(err, Error::NegativeEigenvalue { .. }));
        // Tiny negative roundoff is clamped instead.
        assert!(Sym2::diag(1.0, -1e-13).power(0.5).is_ok());
    }

    #[test]
    fn vertex_normals_on_sphere_equal_positions() {
        let m = shapes::icosphere(1);
        let t = sphere_target(1.0);
        let normals = vertex_normals(&m, m.positions(), &t).unwrap();
        for (n, p) in normals.iter().zip(m.positions()) {
            assert_relative_eq!(*n, p.coords, epsilon = 1e-12);
        }
    }

    #[test]
    fn vertex_normals_isotropic_are_gauss_images() {
        let m = shapes::plane_grid(5, 5, [-1.0, -1.0], [2.0, 2.0]);
        let flat = heightfield(AnalyticHeight::Flat, 2.0);
        for n in vertex_normals(&m, m.positions(), &flat).unwrap() {
            assert_eq!(n, Vec3::zeros());
        }

        let par = heightfield(AnalyticHeight::Paraboloid { ax: 1.0, by: 1.0 }, 2.0);
        // Vertices must lie on the graph for the stencil to make sense.
        let lifted: Vec<Point3> = m
            .positions()
            .iter()
            .map(|p| Point3::new(p.x, p.y, 0.5 * (p.x * p.x + p.y * p.y)))
            .collect();
        let normals = vertex_normals(&m, &lifted, &par).unwrap();
        for (n, p) in normals.iter().zip(&lifted) {
            let expect = Vec3::new(p.x, p.y, 0.5 * (p.x * p.x + p.y * p.y));
            assert_relative_eq!(*n, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_face_operator_eigenvalues_near_inverse_radius() {
        let r = 2.0;
        let m = shapes::icosphere(3);
        let positions: Vec<Point3> = m.positions().iter().map(|p| Point3::from(p.coords * r)).collect();
        let t = sphere_target(r);
        let normals = vertex_normals(&m, &positions, &t).unwrap();
        for f in 0..m.face_count() {
            let fm =
                face_shape_operator(&m, &positions, &normals, f, Mode::Euclidean, 1.0, 0.0)
                    .unwrap();
            let (vals, _) = fm.powered.eigen();
            for v in vals {
                assert_relative_eq!(v, 1.0 / r, max_relative = 0.05);
            }
        }
    }

    #[test]
    fn planar_face_operator_is_delta_projector() {
        let m = shapes::plane_grid(3, 3, [0.0, 0.0], [1.0, 1.0]);
        let normals = vec![Vec3::new(0.0, 0.0, 1.0); m.vertex_count()];
        let delta = 0.25;
        let fm = face_shape_operator(
            &m,
            m.positions(),
            &normals,
            0,
            Mode::Euclidean,
            1.0,
            delta,
        )
        .unwrap();
        // N = 0 so the metric is delta times the tangent projector.
        let projector = Mat3::identity() - Vec3::z() * Vec3::z().transpose();
        assert_relative_eq!(fm.ambient, projector * delta, epsilon = 1e-12);
    }

    #[test]
    fn isotropic_quadratic_heightfield_recovers_hessian_exactly() {
        let (a, b) = (3.0, 1.0);
        let m = shapes::plane_grid(4, 4, [-1.0, -1.0], [2.0, 2.0]);
        let target = heightfield(AnalyticHeight::Paraboloid { ax: a, by: b }, 2.0);
        let lifted: Vec<Point3> = m
            .positions()
            .iter()
            .map(|p| Point3::new(p.x, p.y, 0.5 * (a * p.x * p.x + b * p.y * p.y)))
            .collect();
        let normals = vertex_normals(&m, &lifted, &target).unwrap();
        for f in 0..m.face_count() {
            let fm =
                face_shape_operator(&m, &lifted, &normals, f, Mode::Isotropic, 1.0, 0.0).unwrap();
            let (vals, _) = fm.powered.eigen();
            assert_relative_eq!(vals[0], a, epsilon = 1e-10);
            assert_relative_eq!(vals[1], b, epsilon = 1e-10);
        }
    }

    #[test]
    fn face_operator_invariant_under_relabeling() {
        let r = 1.0;
        let m = shapes::icosphere(1);
        let t = sphere_target(r);
        let normals = vertex_normals(&m, m.positions(), &t).unwrap();
        let face = m.faces()[7];
        let orders: Vec<[usize; 3]> = vec![
            [face[0], face[1], face[2]],
            [face[1], face[2], face[0]],
            [face[2], face[0], face[1]],
            [face[2], face[1], face[0]],
            [face[1], face[0], face[2]],
            [face[0], face[2], face[1]],
        ];
        let reference = face_raw_operator(m.positions(), &normals, &orders[0], 0, Mode::Euclidean, 0.0)
            .map(|(raw, tangent)| sandwich(raw, &tangent))
            .unwrap();
        for ord in &orders[1..] {
            let got = face_raw_operator(m.positions(), &normals, ord, 0, Mode::Euclidean, 0.0)
                .map(|(raw, tangent)| sandwich(raw, &tangent))
                .unwrap();
            assert_relative_eq!(got, reference, epsilon = 1e-10);
        }
    }

    #[test]
    fn euclidean_metric_annihilates_face_normal() {
        let m = shapes::icosphere(2);
        let t = sphere_target(1.0);
        let normals = vertex_normals(&m, m.positions(), &t).unwrap();
        let (metrics, _, _) = compute_face_metrics(
            &m,
            m.positions(),
            &normals,
            Mode::Euclidean,
            0.7,
            1e-3,
            None,
        );
        for (f, fm) in metrics.iter().enumerate() {
            let n = TriMesh::face_normal_raw(m.positions(), &m.faces()[f]).normalize();
            let norm = fm.ambient.norm();
            assert!((fm.ambient * n).norm() <= 1e-10 * norm.max(1.0));
            // Symmetric and PSD on the tangent plane.
            assert_relative_eq!(fm.ambient, fm.ambient.transpose(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_edge_curvature_is_exactly_inverse_radius() {
        let r = 3.0;
        let m = shapes::icosphere(2);
        let positions: Vec<Point3> = m.positions().iter().map(|p| Point3::from(p.coords * r)).collect();
        let t = sphere_target(r);
        let normals = vertex_normals(&m, &positions, &t).unwrap();
        for e in 0..m.edge_count() {
            let k = edge_curvature(&m, &positions, &normals, e, Mode::Euclidean).unwrap();
            assert_relative_eq!(k, 1.0 / r, epsilon = 1e-12);
        }
    }

    #[test]
    fn planar_edge_curvature_is_zero() {
        let m = shapes::plane_grid(4, 4, [0.0, 0.0], [1.0, 1.0]);
        let normals = vec![Vec3::z(); m.vertex_count()];
        for e in 0..m.edge_count() {
            assert_eq!(
                edge_curvature(&m, m.positions(), &normals, e, Mode::Euclidean).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn isotropic_edge_curvature_hand_value() {
        // f = x^2/2 along an x edge of length h: |dn|_xy / |dphi|_xy = h/h.
        let h = 0.125;
        let p_i = Point3::new(0.0, 0.0, 0.0);
        let p_j = Point3::new(h, 0.0, 0.5 * h * h);
        let n_i = Vec3::new(0.0, 0.0, 0.0);
        let n_j = Vec3::new(h, 0.0, 0.5 * h * h);
        let k = edge_curvature_between(p_i, p_j, n_i, n_j, Mode::Isotropic).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normal_alignment_makes_flipped_normals_agree() {
        let p_i = Point3::origin();
        let p_j = Point3::new(1.0, 0.0, 0.0);
        let n = Vec3::new(0.0, 0.0, 1.0);
        let aligned = edge_curvature_between(p_i, p_j, n, n, Mode::Euclidean).unwrap();
        let flipped = edge_curvature_between(p_i, p_j, n, -n, Mode::Euclidean).unwrap();
        assert_eq!(aligned, flipped);
    }

    #[test]
    fn square_boundary_curvature_spans_the_corner_turn() {
        // Unit square from two triangles: every boundary vertex is a corner,
        // so each boundary edge spans a quarter turn.
        let l = 1.0;
        let m = shapes::plane_grid(2, 2, [0.0, 0.0], [l, l]);
        let flat = heightfield(AnalyticHeight::Flat, 1.0);
        for e in 0..m.edge_count() {
            if !m.edges()[e].is_boundary() {
                continue;
            }
            let kb = boundary_edge_curvature(&m, m.positions(), &flat, e).unwrap();
            assert_relative_eq!(kb, std::f64::consts::FRAC_PI_2 / l, epsilon = 1e-12);
        }
    }

    #[test]
    fn straight_boundary_curvature_is_zero() {
        let m = shapes::plane_grid(5, 5, [0.0, 0.0], [1.0, 1.0]);
        let flat = heightfield(AnalyticHeight::Flat, 1.0);
        // Mid-side boundary edge: vertices 1 and 2 on the bottom row.
        let edge = m
            .edges()
            .iter()
            .position(|e| e.a == 1 && e.b == 2)
            .unwrap();
        let kb = boundary_edge_curvature(&m, m.positions(), &flat, edge).unwrap();
        assert_relative_eq!(kb, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ngon_boundary_curvature_approaches_circle_curvature() {
        // Fan disk: regular n-gon boundary around a center vertex.
        let n = 64;
        let r = 2.0;
        let mut positions = vec![Point3::origin()];
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            positions.push(Point3::new(r * th.cos(), r * th.sin(), 0.0));
        }
        let faces: Vec<[usize; 3]> = (0..n)
            .map(|k| [0, 1 + k, 1 + (k + 1) % n])
            .collect();
        let m = TriMesh::new(positions, faces).unwrap();
        let flat = heightfield(AnalyticHeight::Flat, 3.0);
        for e in 0..m.edge_count() {
            if !m.edges()[e].is_boundary() {
                continue;
            }
            let kb = boundary_edge_curvature(&m, m.positions(), &flat, e).unwrap();
            assert_relative_eq!(kb, 1.0 / r, max_relative = 0.05);
        }
    }

    #[test]
    fn tangent_normal_points_outward_on_square() {
        let m = shapes::plane_grid(5, 5, [0.0, 0.0], [1.0, 1.0]);
        let flat = heightfield(AnalyticHeight::Flat, 1.0);
        // Vertex 2 is mid-edge on the bottom (x-aligned) side.
        let t = tangent_normal(&m, m.positions(), &flat, 2).unwrap();
        assert_relative_eq!(t, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn tangent_normal_is_radial_on_disk() {
        let n = 16;
        let mut positions = vec![Point3::origin()];
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            positions.push(Point3::new(th.cos(), th.sin(), 0.0));
        }
        let faces: Vec<[usize; 3]> = (0..n)
            .map(|k| [0, 1 + k, 1 + (k + 1) % n])
            .collect();
        let m = TriMesh::new(positions, faces).unwrap();
        let flat = heightfield(AnalyticHeight::Flat, 2.0);
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let t = tangent_normal(&m, m.positions(), &flat, 1 + k).unwrap();
            // Outward radial within the chord-angle error of the polygon.
            let radial = Vec3::new(th.cos(), th.sin(), 0.0);
            assert!(t.dot(&radial) > 0.99, "vertex {k}: {t:?}");
        }
    }

    #[test]
    fn tangent_normal_on_ramp_boundary() {
        // f = x with the boundary along the y axis: the frame normal is
        // (1,0,1)/sqrt(2) and t must be orthogonal to both it and (0,1,0).
        let m = shapes::plane_grid(3, 3, [0.0, 0.0], [1.0, 1.0]);
        let ramp = heightfield(AnalyticHeight::Ramp { gx: 1.0, gy: 0.0 }, 2.0);
        let lifted: Vec<Point3> = m
            .positions()
            .iter()
            .map(|p| Point3::new(p.x, p.y, p.x))
            .collect();
        // Vertex 3 = (0, 0.5): mid-edge on the x = 0 side.
        let v = 3;
        assert_eq!(lifted[v].x, 0.0);
        let t = tangent_normal(&m, &lifted, &ramp, v).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_relative_eq!(t, Vec3::new(-s, 0.0, s), epsilon = 1e-12);
        assert!(t.dot(&Vec3::new(0.0, 1.0, 0.0)).abs() < 1e-12);
        assert!(t.dot(&Vec3::new(s, 0.0, s)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_face_reported() {
        let m = shapes::plane_grid(2, 2, [0.0, 0.0], [1.0, 1.0]);
        // Collapse one diagonal vertex onto the other: both faces share the
        // diagonal, so both degenerate.
        let mut positions = m.positions().to_vec();
        positions[3] = positions[0];
        let normals = vec![Vec3::z(); 4];
        let collapsed = (0..m.face_count()).any(|f| {
            matches!(
                face_shape_operator(&m, &positions, &normals, f, Mode::Euclidean, 1.0, 1e-3),
                Err(Error::DegenerateFace { .. })
            )
        });
        assert!(collapsed);
        // The driver substitutes the fallback and counts them.
        let (metrics, _, degenerate) = compute_face_metrics(
            &m,
            &positions,
            &normals,
            Mode::Euclidean,
            1.0,
            1e-3,
            None,
        );
        assert_eq!(degenerate, 2);
        assert!(metrics.iter().all(|fm| fm.degenerate));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn sym2_strategy() -> impl Strategy<Value = Sym2> {
            (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)
                .prop_map(|(a, b, c)| Sym2::new(a, b, c))
        }

        proptest! {
            #[test]
            fn abs_and_power_commute_with_rotation(m in sym2_strategy(), th in 0.0..std::f64::consts::TAU) {
                let (s, c) = th.sin_cos();
                let rot = Matrix2::new(c, -s, s, c);
                let rotated = Sym2::from_mat2(rot * m.to_mat2() * rot.transpose());

                let lhs = rotated.abs().to_mat2();
                let rhs = rot * m.abs().to_mat2() * rot.transpose();
                prop_assert!(relative_eq!(lhs, rhs, epsilon = 1e-10));

                let psd = m.abs();
                let psd_rot = Sym2::from_mat2(rot * psd.to_mat2() * rot.transpose());
                let lhs = psd_rot.power(0.3).unwrap().to_mat2();
                let rhs = rot * psd.power(0.3).unwrap().to_mat2() * rot.transpose();
                prop_assert!(relative_eq!(lhs, rhs, epsilon = 1e-10));
            }

            #[test]
            fn sqrt_squares_back(m in sym2_strategy()) {
                let psd = m.abs();
                let root = psd.sqrt().unwrap().to_mat2();
                prop_assert!(relative_eq!(root * root, psd.to_mat2(), epsilon = 1e-10));
            }

            #[test]
            fn abs_is_psd(m in sym2_strategy()) {
                let (vals, _) = m.abs().eigen();
                prop_assert!(vals[1] >= -1e-12);
            }
        }
    }
}
