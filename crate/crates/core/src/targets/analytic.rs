//! Closed-form signed distance fields.
//!
//! Every kind here evaluates the exact signed distance (not an algebraic
//! proxy), so gradients have unit length away from the medial axis. Smooth
//! unions are the one exception: blending trades the distance property for
//! smoothness near the seam, which the iterated projection tolerates.

use crate::{Point3, Vec3};

/// Analytic signed distance field.
#[derive(Debug, Clone)]
pub enum AnalyticSdf {
    Sphere {
        center: Point3,
        radius: f64,
    },
    Ellipsoid {
        center: Point3,
        radii: Vec3,
    },
    /// Torus around the z axis through `center`.
    Torus {
        center: Point3,
        major: f64,
        minor: f64,
    },
    Cuboid {
        center: Point3,
        half_extents: Vec3,
    },
    /// Half-space boundary `normal . p = offset` with unit `normal`.
    Plane {
        normal: Vec3,
        offset: f64,
    },
    /// Polynomial smooth union with blend radius `k`.
    SmoothUnion {
        a: Box<AnalyticSdf>,
        b: Box<AnalyticSdf>,
        k: f64,
    },
}

impl AnalyticSdf {
    pub fn eval(&self, p: Point3) -> f64 {
        match self {
            AnalyticSdf::Sphere { center, radius } => (p - center).norm() - radius,
            AnalyticSdf::Ellipsoid { center, radii } => {
                let local = p - center;
                let closest = ellipsoid_closest_point(*radii, local);
                let dist = (local - closest).norm();
                let inside = (local.x / radii.x).powi(2)
                    + (local.y / radii.y).powi(2)
                    + (local.z / radii.z).powi(2)
                    < 1.0;
                if inside {
                    -dist
                } else {
                    dist
                }
            }
            AnalyticSdf::Torus {
                center,
                major,
                minor,
            } => {
                let local = p - center;
                let ring = (local.x * local.x + local.y * local.y).sqrt() - major;
                (ring * ring + local.z * local.z).sqrt() - minor
            }
            AnalyticSdf::Cuboid {
                center,
                half_extents,
            } => {
                let q = (p - center).abs() - half_extents;
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
                outside.norm() + q.x.max(q.y).max(q.z).min(0.0)
            }
            AnalyticSdf::Plane { normal, offset } => normal.dot(&p.coords) - offset,
            AnalyticSdf::SmoothUnion { a, b, k } => {
                let da = a.eval(p);
                let db = b.eval(p);
                let h = (0.5 + 0.5 * (db - da) / k).clamp(0.0, 1.0);
                db * (1.0 - h) + da * h - k * h * (1.0 - h)
            }
        }
    }

    /// Closed-form gradient; `None` on the medial axis where the distance
    /// direction is undefined.
    pub fn grad(&self, p: Point3) -> Option<Vec3> {
        match self {
            AnalyticSdf::Sphere { center, radius: _ } => {
                let d = p - center;
                let n = d.norm();
                (n > 1e-12).then(|| d / n)
            }
            AnalyticSdf::Ellipsoid { center, radii } => {
                let local = p - center;
                let closest = ellipsoid_closest_point(*radii, local);
                let delta = local - closest;
                let dist = delta.norm();
                if dist > 1e-12 * radii.amax() {
                    let sdf = self.eval(p);
                    Some(delta / sdf)
                } else {
                    // On the surface: use the implicit-function normal.
                    let g = Vec3::new(
                        local.x / (radii.x * radii.x),
                        local.y / (radii.y * radii.y),
                        local.z / (radii.z * radii.z),
                    );
                    let n = g.norm();
                    (n > 1e-15).then(|| g / n)
                }
            }
            AnalyticSdf::Torus {
                center,
                major,
                minor: _,
            } => {
                let local = p - center;
                let rho = (local.x * local.x + local.y * local.y).sqrt();
                if rho < 1e-12 {
                    return None; // axis of the torus is medial
                }
                let ring = rho - major;
                let qn = (ring * ring + local.z * local.z).sqrt();
                if qn < 1e-12 {
                    return None; // core circle
                }
                Some(Vec3::new(
                    local.x / rho * ring / qn,
                    local.y / rho * ring / qn,
                    local.z / qn,
                ))
            }
            AnalyticSdf::Cuboid {
                center,
                half_extents,
            } => {
                let local = p - center;
                let q = local.abs() - half_extents;
                let sign = Vec3::new(
                    if local.x >= 0.0 { 1.0 } else { -1.0 },
                    if local.y >= 0.0 { 1.0 } else { -1.0 },
                    if local.z >= 0.0 { 1.0 } else { -1.0 },
                );
                if q.x > 0.0 || q.y > 0.0 || q.z > 0.0 {
                    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
                    let n = outside.norm();
                    (n > 1e-15).then(|| outside.component_mul(&sign) / n)
                } else {
                    // Inside: toward the nearest slab face.
                    let mut g = Vec3::zeros();
                    if q.x >= q.y && q.x >= q.z {
                        g.x = sign.x;
                    } else if q.y >= q.z {
                        g.y = sign.y;
                    } else {
                        g.z = sign.z;
                    }
                    Some(g)
                }
            }
            AnalyticSdf::Plane { normal, offset: _ } => Some(*normal),
            AnalyticSdf::SmoothUnion { a, b, k } => {
                let da = a.eval(p);
                let db = b.eval(p);
                let h = (0.5 + 0.5 * (db - da) / k).clamp(0.0, 1.0);
                let ga = a.grad(p)?;
                let gb = b.grad(p)?;
                Some(gb * (1.0 - h) + ga * h)
            }
        }
    }

    /// Axis-aligned bounds of the zero level set; `None` for unbounded kinds.
    pub fn bbox(&self) -> Option<(Point3, Point3)> {
        match self {
            AnalyticSdf::Sphere { center, radius } => {
                let r = Vec3::repeat(*radius);
                Some((center - r, center + r))
            }
            AnalyticSdf::Ellipsoid { center, radii } => Some((center - radii, center + radii)),
            AnalyticSdf::Torus {
                center,
                major,
                minor,
            } => {
                let r = Vec3::new(major + minor, major + minor, *minor);
                Some((center - r, center + r))
            }
            AnalyticSdf::Cuboid {
                center,
                half_extents,
            } => Some((center - half_extents, center + half_extents)),
            AnalyticSdf::Plane { .. } => None,
            AnalyticSdf::SmoothUnion { a, b, k } => {
                let (alo, ahi) = a.bbox()?;
                let (blo, bhi) = b.bbox()?;
                let pad = Vec3::repeat(k * 0.25);
                Some((
                    Point3::new(
                        alo.x.min(blo.x) - pad.x,
                        alo.y.min(blo.y) - pad.y,
                        alo.z.min(blo.z) - pad.z,
                    ),
                    Point3::new(
                        ahi.x.max(bhi.x) + pad.x,
                        ahi.y.max(bhi.y) + pad.y,
                        ahi.z.max(bhi.z) + pad.z,
                    ),
                ))
            }
        }
    }
}

/// Closest point on the ellipsoid `(x/rx)^2 + (y/ry)^2 + (z/rz)^2 = 1` to a
/// point `p`, both in the ellipsoid's local frame.
///
/// Bisection on the standard one-parameter KKT equation; zero components are
/// handled by dimension reduction, including the off-plane branch for
/// queries inside the evolute. Robust for any positive radii.
pub fn ellipsoid_closest_point(radii: Vec3, p: Vec3) -> Vec3 {
    // Sort axes descending and fold the query into the first octant.
    let mut order = [0usize, 1, 2];
    let r = [radii.x, radii.y, radii.z];
    order.sort_by(|&i, &j| r[j].partial_cmp(&r[i]).unwrap());
    let e = [r[order[0]], r[order[1]], r[order[2]]];
    let q = [p[order[0]].abs(), p[order[1]].abs(), p[order[2]].abs()];
    let sign = [
        if p[order[0]] < 0.0 { -1.0 } else { 1.0 },
        if p[order[1]] < 0.0 { -1.0 } else { 1.0 },
        if p[order[2]] < 0.0 { -1.0 } else { 1.0 },
    ];

    let x = closest_sorted(e, q);

    let mut out = Vec3::zeros();
    for k in 0..3 {
        out[order[k]] = sign[k] * x[k];
    }
    out
}

fn closest_sorted(e: [f64; 3], q: [f64; 3]) -> [f64; 3] {
    if q[2] > 0.0 {
        if q[1] > 0.0 {
            if q[0] > 0.0 {
                let t = root_3d(e, q);
                [
                    e[0] * e[0] * q[0] / (t + e[0] * e[0]),
                    e[1] * e[1] * q[1] / (t + e[1] * e[1]),
                    e[2] * e[2] * q[2] / (t + e[2] * e[2]),
                ]
            } else {
                let (x1, x2) = closest_on_ellipse(e[1], e[2], q[1], q[2]);
                [0.0, x1, x2]
            }
        } else if q[0] > 0.0 {
            let (x0, x2) = closest_on_ellipse(e[0], e[2], q[0], q[2]);
            [x0, 0.0, x2]
        } else {
            [0.0, 0.0, e[2]]
        }
    } else {
        // q[2] == 0: the closest point may still leave the plane when the
        // query sits inside the evolute of the cross-section.
        if q[1] > 0.0 && q[0] > 0.0 {
            let denom0 = e[0] * e[0] - e[2] * e[2];
            let denom1 = e[1] * e[1] - e[2] * e[2];
            if denom0 > 0.0 && denom1 > 0.0 {
                let xde0 = e[0] * q[0] / denom0;
                let xde1 = e[1] * q[1] / denom1;
                let discr = 1.0 - xde0 * xde0 - xde1 * xde1;
                if xde0 < 1.0 && xde1 < 1.0 && discr > 0.0 {
                    return [e[0] * xde0, e[1] * xde1, e[2] * discr.sqrt()];
                }
            }
            let (x0, x1) = closest_on_ellipse(e[0], e[1], q[0], q[1]);
            [x0, x1, 0.0]
        } else if q[1] > 0.0 {
            let (x1, x2) = closest_on_ellipse(e[1], e[2], q[1], 0.0);
            [0.0, x1, x2]
        } else if q[0] > 0.0 {
            let (x0, x2) = closest_on_ellipse(e[0], e[2], q[0], 0.0);
            [x0, 0.0, x2]
        } else {
            // Center: nearest surface point is along the shortest axis.
            [0.0, 0.0, e[2]]
        }
    }
}

/// Closest point on the ellipse `(x0/e0)^2 + (x1/e1)^2 = 1`, `e0 >= e1`,
/// queried in the first quadrant (the second query component may be zero).
fn closest_on_ellipse(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let t = root_2d([e0, e1], [y0, y1]);
            (
                e0 * e0 * y0 / (t + e0 * e0),
                e1 * e1 * y1 / (t + e1 * e1),
            )
        } else {
            (0.0, e1)
        }
    } else {
        let denom0 = e0 * e0 - e1 * e1;
        let numer0 = e0 * y0;
        if denom0 > 0.0 && numer0 < denom0 {
            let xde0 = numer0 / denom0;
            (e0 * xde0, e1 * (1.0 - xde0 * xde0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Root of `sum_i (e_i q_i / (t + e_i^2))^2 = 1` for `t > -e_min^2`, all
/// `q_i > 0`. Bisection on the shifted variable `s = t + e_min^2 > 0`.
fn root_3d(e: [f64; 3], q: [f64; 3]) -> f64 {
    let emin2 = e[2] * e[2];
    let g = |s: f64| -> f64 {
        let mut sum = 0.0;
        for k in 0..3 {
            let d = s + (e[k] * e[k] - emin2);
            let term = e[k] * q[k] / d;
            sum += term * term;
        }
        sum - 1.0
    };
    bisect(g, (e[0] * q[0]).hypot(e[1] * q[1]).hypot(e[2] * q[2])) - emin2
}

fn root_2d(e: [f64; 2], q: [f64; 2]) -> f64 {
    let emin2 = e[1] * e[1];
    let g = |s: f64| -> f64 {
        let d0 = s + (e[0] * e[0] - emin2);
        let d1 = s;
        let t0 = e[0] * q[0] / d0;
        let t1 = e[1] * q[1] / d1;
        t0 * t0 + t1 * t1 - 1.0
    };
    bisect(g, (e[0] * q[0]).hypot(e[1] * q[1])) - emin2
}

/// Bisection over `(0, hi]` for a function strictly decreasing from
/// `+inf`, with `g(hi) <= 0` by construction of `hi`.
fn bisect(g: impl Fn(f64) -> f64, hi0: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = hi0.max(f64::MIN_POSITIVE);
    // hi0 bounds the root mathematically; expand if rounding says otherwise
    // (hi0 is the exact root for a sphere).
    let mut guard = 0;
    while g(hi) > 0.0 && guard < 64 {
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..150 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
