//! Quantitative mesh-quality diagnostics.
//!
//! These reproduce the quantities used to judge a flow: the per-face density
//! of the metric-transformed mesh (uniform at convergence), per-face aspect
//! ratios measured under the metric, flipped-element detection against the
//! target's orientation, and plain histograms for reporting. Everything is a
//! pure function; CSV renderers live here so the command-line tool and tests
//! share one format.

use crate::metric::{FaceMetric, Sym2};
use crate::targets::Mode;
use crate::{Error, Point3, Result, SurfaceTarget, TriMesh, Vec2};

/// Area of a unit-edge equilateral triangle, doubled; normalizes densities
/// so the identity metric on a unit equilateral face reads 1.
const REFERENCE_DET: f64 = 0.866025403784438646763; // sqrt(3)/2

/// Reference equilateral edge matrix (unit edges), inverted.
fn reference_inverse() -> nalgebra::Matrix2<f64> {
    // Columns (1, 0) and (1/2, sqrt(3)/2).
    nalgebra::Matrix2::new(1.0, 0.5, 0.0, REFERENCE_DET)
        .try_inverse()
        .expect("reference triangle is nondegenerate")
}

fn metric_edge_components(
    positions: &[Point3],
    metrics: &[FaceMetric],
    face_verts: &[usize; 3],
    face: usize,
) -> (Vec2, Vec2) {
    let fm = &metrics[face];
    let e1 = positions[face_verts[1]] - positions[face_verts[0]];
    let e2 = positions[face_verts[2]] - positions[face_verts[0]];
    let v1 = fm.apply(&e1);
    let v2 = fm.apply(&e2);
    (fm.tangent_components(&v1), fm.tangent_components(&v2))
}

/// Density of one face: determinant of the metric-transformed edge pair in
/// the face tangent basis, normalized so a unit metric on a unit equilateral
/// face gives 1. Degenerate faces report 0.
pub fn face_density(
    mesh: &TriMesh,
    positions: &[Point3],
    metrics: &[FaceMetric],
    face: usize,
) -> f64 {
    if metrics[face].degenerate {
        return 0.0;
    }
    let (a1, a2) = metric_edge_components(positions, metrics, &mesh.faces()[face], face);
    (a1.x * a2.y - a1.y * a2.x) / REFERENCE_DET
}

/// All face densities.
pub fn face_densities(mesh: &TriMesh, positions: &[Point3], metrics: &[FaceMetric]) -> Vec<f64> {
    (0..mesh.face_count())
        .map(|f| face_density(mesh, positions, metrics, f))
        .collect()
}

/// Coefficient of variation (std/mean) of the face densities; the flow
/// drives this toward zero.
pub fn density_cv(mesh: &TriMesh, positions: &[Point3], metrics: &[FaceMetric]) -> f64 {
    let values: Vec<f64> = face_densities(mesh, positions, metrics)
        .into_iter()
        .filter(|v| v.is_finite())
        .collect();
    if values.is_empty() {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt() / mean.abs().max(f64::MIN_POSITIVE)
}

/// Aspect ratio of one face under the metric: the singular-value ratio of
/// the linear map taking a unit equilateral triangle's edges to the face's
/// metric-transformed edges.
pub fn aspect_ratio_under_sigma(
    mesh: &TriMesh,
    positions: &[Point3],
    metrics: &[FaceMetric],
    face: usize,
) -> Result<f64> {
    if metrics[face].degenerate {
        return Err(Error::DegenerateFace { face });
    }
    let (a1, a2) = metric_edge_components(positions, metrics, &mesh.faces()[face], face);
    let map = nalgebra::Matrix2::new(a1.x, a2.x, a1.y, a2.y) * reference_inverse();
    let gram = Sym2::from_mat2(map.transpose() * map);
    let (vals, _) = gram.eigen();
    let lo = vals[1].max(0.0);
    if lo <= f64::MIN_POSITIVE * vals[0].max(1.0) {
        return Err(Error::DegenerateFace { face });
    }
    Ok((vals[0] / lo).sqrt())
}

/// Aspect ratios for every face; degenerate faces report infinity.
pub fn aspect_ratios(mesh: &TriMesh, positions: &[Point3], metrics: &[FaceMetric]) -> Vec<f64> {
    (0..mesh.face_count())
        .map(|f| aspect_ratio_under_sigma(mesh, positions, metrics, f).unwrap_or(f64::INFINITY))
        .collect()
}

/// Faces whose geometric orientation opposes the target: outward-normal dot
/// product below zero in euclidean mode, downward normals in isotropic mode.
/// Returns the count and the offending face indices.
pub fn flipped_faces(
    mesh: &TriMesh,
    positions: &[Point3],
    target: &SurfaceTarget,
) -> (usize, Vec<usize>) {
    let mut flipped = Vec::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let n = TriMesh::face_normal_raw(positions, f);
        let is_flipped = match target.mode() {
            Mode::Euclidean => {
                let centroid = Point3::from(
                    (positions[f[0]].coords + positions[f[1]].coords + positions[f[2]].coords)
                        / 3.0,
                );
                match target.surface_normal(centroid) {
                    Ok(target_n) => n.dot(&target_n) < 0.0,
                    Err(_) => false,
                }
            }
            Mode::Isotropic => n.z < 0.0,
        };
        if is_flipped {
            flipped.push(fi);
        }
    }
    (flipped.len(), flipped)
}

/// Fixed-width histogram. In-range values land in `counts`; outliers go to
/// the overflow bins so totals always reconcile.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

/// Default range and bin count used for aspect-ratio reports.
pub const DEFAULT_HISTOGRAM_RANGE: (f64, f64) = (0.0, 4.0);
pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

pub fn histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Histogram {
    assert!(bins >= 1, "histogram needs at least one bin");
    let (lo, hi) = range;
    assert!(hi > lo, "histogram range must be nonempty");
    let width = (hi - lo) / bins as f64;
    let mut h = Histogram {
        lo,
        hi,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
    };
    for &v in values {
        if v < lo {
            h.underflow += 1;
        } else if v > hi {
            h.overflow += 1;
        } else {
            let bin = (((v - lo) / width) as usize).min(bins - 1);
            h.counts[bin] += 1;
        }
    }
    h
}

impl Histogram {
    /// `bin_low,bin_high,count` rows; overflow bins appear with infinite
    /// bounds when occupied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        if self.underflow > 0 {
            out.push_str(&format!("-inf,{},{}\n", self.lo, self.underflow));
        }
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        for (i, c) in self.counts.iter().enumerate() {
            let lo = self.lo + width * i as f64;
            let hi = self.lo + width * (i + 1) as f64;
            out.push_str(&format!("{lo},{hi},{c}\n"));
        }
        if self.overflow > 0 {
            out.push_str(&format!("{},inf,{}\n", self.hi, self.overflow));
        }
        out
    }
}

/// Per-face diagnostics table: `face,density,aspect_ratio,flipped`.
pub fn face_table_csv(
    mesh: &TriMesh,
    positions: &[Point3],
    metrics: &[FaceMetric],
    target: &SurfaceTarget,
) -> String {
    let densities = face_densities(mesh, positions, metrics);
    let ratios = aspect_ratios(mesh, positions, metrics);
    let flipped: std::collections::HashSet<usize> =
        flipped_faces(mesh, positions, target).1.into_iter().collect();
    let mut out = String::from("face,density,aspect_ratio,flipped\n");
    for f in 0..mesh.face_count() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            f,
            densities[f],
            ratios[f],
            u8::from(flipped.contains(&f))
        ));
    }
    out
}
