//! Surface targets and their queries.
//!
//! A [`SurfaceTarget`] is what the flow approximates: either the zero level
//! set of a signed distance field (analytic or grid-sampled; "euclidean"
//! mode) or the graph of a height function over a rectangle ("isotropic"
//! mode, where lengths are measured in the xy projection). The mode is a
//! property of the kind — heightfields are always isotropic, distance fields
//! always euclidean — and each query checks it.

mod analytic;
mod grid;

pub use analytic::{ellipsoid_closest_point, AnalyticSdf};
pub use grid::{AnalyticHeight, GridSdf, Heightfield, Rect};

use crate::{Error, Point2, Point3, Result, Vec3};

/// Ambient geometry of a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Euclidean,
    Isotropic,
}

/// Outcome of an iterated surface projection.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionReport {
    pub iterations_used: usize,
    pub final_abs_distance: f64,
}

/// A surface the flow can target.
#[derive(Debug, Clone)]
pub enum SurfaceTarget {
    Analytic(AnalyticSdf),
    Grid(GridSdf),
    Heightfield(Heightfield),
}

impl SurfaceTarget {
    pub fn mode(&self) -> Mode {
        match self {
            SurfaceTarget::Analytic(_) | SurfaceTarget::Grid(_) => Mode::Euclidean,
            SurfaceTarget::Heightfield(_) => Mode::Isotropic,
        }
    }

    fn require(&self, expected: Mode) -> Result<()> {
        if self.mode() == expected {
            Ok(())
        } else {
            Err(Error::WrongMode {
                expected,
                actual: self.mode(),
            })
        }
    }

    /// Signed distance to the surface (euclidean mode).
    pub fn sdf(&self, p: Point3) -> Result<f64> {
        self.require(Mode::Euclidean)?;
        Ok(match self {
            SurfaceTarget::Analytic(a) => a.eval(p),
            SurfaceTarget::Grid(g) => g.value(p),
            SurfaceTarget::Heightfield(_) => unreachable!(),
        })
    }

    /// Gradient of the signed distance (euclidean mode). Near-unit length
    /// for true distance fields.
    pub fn sdf_grad(&self, p: Point3) -> Result<Vec3> {
        self.require(Mode::Euclidean)?;
        let g = match self {
            SurfaceTarget::Analytic(a) => a.grad(p),
            SurfaceTarget::Grid(g) => Some(g.gradient(p)),
            SurfaceTarget::Heightfield(_) => unreachable!(),
        };
        match g {
            Some(g) if g.norm() > 1e-8 => Ok(g),
            _ => Err(Error::VanishingGradient {
                x: p.x,
                y: p.y,
                z: p.z,
            }),
        }
    }

    /// Unit outward surface normal at (or near) the surface.
    pub fn surface_normal(&self, p: Point3) -> Result<Vec3> {
        let g = self.sdf_grad(p)?;
        Ok(g / g.norm())
    }

    /// Project `p` onto the zero level set by damped Newton steps
    /// `p <- p - sdf * grad / |grad|^2`, stopping when `|sdf| < tol`.
    ///
    /// Hitting `max_iter` is not an error (the report shows the residual);
    /// a vanishing gradient is.
    pub fn project_to_surface(
        &self,
        p: Point3,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Point3, ProjectionReport)> {
        self.require(Mode::Euclidean)?;
        let mut q = p;
        let mut dist = self.sdf(q)?;
        let mut iterations_used = 0;
        while dist.abs() >= tol && iterations_used < max_iter {
            let g = self.sdf_grad(q)?;
            let step = g * (dist / g.norm_squared());
            let mut next = q - step;
            let mut next_dist = self.sdf(next)?;
            // Grid fields are only piecewise smooth; back off if the full
            // step made things worse.
            let mut damping = 0;
            while next_dist.abs() > dist.abs() && damping < 4 {
                damping += 1;
                next = q - step * 0.5_f64.powi(damping);
                next_dist = self.sdf(next)?;
            }
            q = next;
            dist = next_dist;
            iterations_used += 1;
        }
        Ok((
            q,
            ProjectionReport {
                iterations_used,
                final_abs_distance: dist.abs(),
            },
        ))
    }

    /// Default projection tolerance: 1e-6 of the target's characteristic
    /// size (bounding box diagonal where one exists).
    pub fn default_projection_tol(&self) -> f64 {
        1e-6 * self.characteristic_size()
    }

    pub fn characteristic_size(&self) -> f64 {
        match self {
            SurfaceTarget::Analytic(a) => a
                .bbox()
                .map(|(lo, hi)| (hi - lo).norm())
                .unwrap_or(1.0)
                .max(f64::MIN_POSITIVE),
            SurfaceTarget::Grid(g) => {
                let (lo, hi) = g.bbox();
                (hi - lo).norm()
            }
            SurfaceTarget::Heightfield(h) => h.domain().diagonal(),
        }
    }

    /// Height function value (isotropic mode), clamped into the domain.
    pub fn height(&self, xy: Point2) -> Result<f64> {
        self.require(Mode::Isotropic)?;
        let SurfaceTarget::Heightfield(h) = self else {
            unreachable!()
        };
        Ok(h.value(xy))
    }

    /// Height partials `(f_x, f_y)` (isotropic mode).
    pub fn height_partials(&self, xy: Point2) -> Result<nalgebra::Vector2<f64>> {
        self.require(Mode::Isotropic)?;
        let SurfaceTarget::Heightfield(h) = self else {
            unreachable!()
        };
        self.check_domain(h, xy)?;
        Ok(h.partials(xy))
    }

    /// Isotropic Gauss map image `(f_x, f_y, (f_x^2 + f_y^2)/2)`.
    pub fn gauss_map(&self, xy: Point2) -> Result<Vec3> {
        self.require(Mode::Isotropic)?;
        let SurfaceTarget::Heightfield(h) = self else {
            unreachable!()
        };
        self.check_domain(h, xy)?;
        let g = h.partials(xy);
        Ok(Vec3::new(g.x, g.y, 0.5 * (g.x * g.x + g.y * g.y)))
    }

    /// Isotropic unit normal `(f_x, f_y, 1) / sqrt(f_x^2 + f_y^2 + 1)` used
    /// by boundary frames.
    pub fn isotropic_boundary_normal(&self, xy: Point2) -> Result<Vec3> {
        self.require(Mode::Isotropic)?;
        let SurfaceTarget::Heightfield(h) = self else {
            unreachable!()
        };
        self.check_domain(h, xy)?;
        let g = h.partials(xy);
        let n = Vec3::new(g.x, g.y, 1.0);
        Ok(n / n.norm())
    }

    fn check_domain(&self, h: &Heightfield, xy: Point2) -> Result<()> {
        let slack = 1e-9 * h.domain().diagonal().max(1.0);
        if h.domain().contains(xy, slack) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x: xy.x, y: xy.y })
        }
    }

    /// Constrain a point to the graph of the height function: xy is clamped
    /// into the domain rectangle and z is reset to `f(x, y)`.
    pub fn project_isotropic(&self, p: Point3) -> Result<Point3> {
        self.require(Mode::Isotropic)?;
        let SurfaceTarget::Heightfield(h) = self else {
            unreachable!()
        };
        let xy = h.domain().clamp(Point2::new(p.x, p.y));
        Ok(Point3::new(xy.x, xy.y, h.value(xy)))
    }

    /// Constrain a boundary vertex to the domain rectangle's frame (nearest
    /// side), then to the graph.
    pub fn project_isotropic_boundary(&self, p: Point3) -> Result<Point3> {
        self.require(Mode::Isotropic)?;
        let SurfaceTarget::Heightfield(h) = self else {
            unreachable!()
        };
        let xy = h.domain().clamp_to_boundary(Point2::new(p.x, p.y));
        Ok(Point3::new(xy.x, xy.y, h.value(xy)))
    }

    /// Distance-like residual used by traces: `|sdf|` in euclidean mode,
    /// `|z - f(x, y)|` in isotropic mode.
    pub fn residual(&self, p: Point3) -> f64 {
        match self {
            SurfaceTarget::Analytic(_) | SurfaceTarget::Grid(_) => {
                self.sdf(p).map(f64::abs).unwrap_or(f64::NAN)
            }
            SurfaceTarget::Heightfield(h) => {
                let xy = h.domain().clamp(Point2::new(p.x, p.y));
                (p.z - h.value(xy)).abs()
            }
        }
    }

    /// Domain rectangle for isotropic targets.
    pub fn domain(&self) -> Option<Rect> {
        match self {
            SurfaceTarget::Heightfield(h) => Some(h.domain()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Point2, Vec2};
    use approx::assert_relative_eq;

    fn unit_sphere() -> SurfaceTarget {
        SurfaceTarget::Analytic(AnalyticSdf::Sphere {
            center: Point3::origin(),
            radius: 1.0,
        })
    }

    fn paraboloid(ax: f64, by: f64) -> SurfaceTarget {
        SurfaceTarget::Heightfield(Heightfield::analytic(
            AnalyticHeight::Paraboloid { ax, by },
            Rect::new(Point2::new(-3.0, -3.0), Point2::new(3.0, 3.0)),
        ))
    }

    #[test]
    fn wrong_mode_errors() {
        let hf = paraboloid(1.0, 1.0);
        assert!(matches!(
            hf.sdf(Point3::origin()),
            Err(Error::WrongMode { .. })
        ));
        let sph = unit_sphere();
        assert!(matches!(
            sph.gauss_map(Point2::origin()),
            Err(Error::WrongMode { .. })
        ));
    }

    #[test]
    fn sphere_projection_one_newton_step() {
        let sph = unit_sphere();
        let (q, report) = sph
            .project_to_surface(Point3::new(2.0, 0.0, 0.0), 1e-8, 20)
            .unwrap();
        assert_relative_eq!(q, Point3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_eq!(report.iterations_used, 1);
    }

    #[test]
    fn projection_of_surface_point_is_identity() {
        let sph = unit_sphere();
        let p = Point3::new(0.0, 1.0, 0.0);
        let (q, report) = sph.project_to_surface(p, 1e-8, 20).unwrap();
        assert_eq!(q, p);
        assert_eq!(report.iterations_used, 0);
    }

    #[test]
    fn projection_is_idempotent_within_tol() {
        let torus = SurfaceTarget::Analytic(AnalyticSdf::Torus {
            center: Point3::origin(),
            major: 2.0,
            minor: 0.5,
        });
        let tol = 1e-10;
        let (q, _) = torus
            .project_to_surface(Point3::new(1.2, 0.7, 0.4), tol, 30)
            .unwrap();
        let (q2, _) = torus.project_to_surface(q, tol, 30).unwrap();
        assert!((q - q2).norm() < tol);
    }

    #[test]
    fn projection_errors_at_medial_point() {
        let sph = unit_sphere();
        let err = sph.project_to_surface(Point3::origin(), 1e-8, 20);
        assert!(matches!(err, Err(Error::VanishingGradient { .. })));
    }

    #[test]
    fn grid_torus_gradient_close_to_analytic() {
        let torus = AnalyticSdf::Torus {
            center: Point3::origin(),
            major: 2.0,
            minor: 0.5,
        };
        let n = 96;
        let half = 3.0;
        let spacing = 2.0 * half / (n - 1) as f64;
        let grid = SurfaceTarget::Grid(GridSdf::from_fn(
            [n, n, n],
            Point3::new(-half, -half, -half),
            Vec3::repeat(spacing),
            |p| torus.eval(p),
        ));
        let mut rng = 0u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let theta = 2.0 * std::f64::consts::PI * next();
            let phi = 2.0 * std::f64::consts::PI * next();
            let p = Point3::new(
                (2.0 + 0.5 * phi.cos()) * theta.cos(),
                (2.0 + 0.5 * phi.cos()) * theta.sin(),
                0.5 * phi.sin(),
            ) + Vec3::new(next() - 0.5, next() - 0.5, next() - 0.5) * 0.1;
            let g_grid = grid.sdf_grad(p).unwrap().normalize();
            let g_true = torus.grad(p).unwrap();
            let angle = g_grid.dot(&g_true).clamp(-1.0, 1.0).acos();
            assert!(angle < 0.05, "angle {angle} at {p}");
        }
    }

    #[test]
    fn grid_projection_reaches_tolerance() {
        let sphere = AnalyticSdf::Sphere {
            center: Point3::origin(),
            radius: 1.0,
        };
        let n = 64;
        let spacing = 3.0 / (n - 1) as f64;
        let grid = SurfaceTarget::Grid(GridSdf::from_fn(
            [n, n, n],
            Point3::new(-1.5, -1.5, -1.5),
            Vec3::repeat(spacing),
            |p| sphere.eval(p),
        ));
        let tol = grid.default_projection_tol();
        let (q, report) = grid
            .project_to_surface(Point3::new(1.3, 0.2, -0.1), tol, 20)
            .unwrap();
        assert!(report.final_abs_distance < tol, "{report:?}");
        assert!(grid.sdf(q).unwrap().abs() < tol);
    }

    #[test]
    fn surface_normal_parallel_to_gradient() {
        let ell = SurfaceTarget::Analytic(AnalyticSdf::Ellipsoid {
            center: Point3::origin(),
            radii: Vec3::new(2.0, 1.0, 1.0),
        });
        let p = Point3::new(2.0, 0.0, 0.0);
        let n = ell.surface_normal(p).unwrap();
        assert_relative_eq!(n, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-10);
        assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-10);
        let g = ell.sdf_grad(p).unwrap();
        assert!(n.cross(&g).norm() < 1e-10);
    }

    #[test]
    fn gauss_map_values() {
        let flat = SurfaceTarget::Heightfield(Heightfield::analytic(
            AnalyticHeight::Flat,
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        ));
        assert_relative_eq!(
            flat.gauss_map(Point2::new(0.3, -0.2)).unwrap(),
            Vec3::zeros()
        );

        let par = paraboloid(1.0, 1.0);
        assert_relative_eq!(
            par.gauss_map(Point2::new(1.0, 2.0)).unwrap(),
            Vec3::new(1.0, 2.0, 2.5),
            epsilon = 1e-12
        );

        // Grid-sampled product surface against analytic partials.
        let hf = SurfaceTarget::Heightfield(Heightfield::grid_from_fn(
            [65, 65],
            Point2::origin(),
            Vec2::repeat(1.0 / 64.0),
            |xy| xy.x * xy.y,
        ));
        let g = hf.gauss_map(Point2::new(0.5, 0.25)).unwrap();
        assert_relative_eq!(g, Vec3::new(0.25, 0.5, 0.15625), epsilon = 1e-4);
    }

    #[test]
    fn gauss_map_rejects_out_of_domain() {
        let par = paraboloid(1.0, 1.0);
        assert!(matches!(
            par.gauss_map(Point2::new(10.0, 0.0)),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn isotropic_boundary_normal_values() {
        let flat = SurfaceTarget::Heightfield(Heightfield::analytic(
            AnalyticHeight::Flat,
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        ));
        assert_relative_eq!(
            flat.isotropic_boundary_normal(Point2::origin()).unwrap(),
            Vec3::new(0.0, 0.0, 1.0)
        );

        let ramp = SurfaceTarget::Heightfield(Heightfield::analytic(
            AnalyticHeight::Ramp { gx: 1.0, gy: 0.0 },
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        ));
        let n = ramp.isotropic_boundary_normal(Point2::new(0.2, 0.3)).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_relative_eq!(n, Vec3::new(s, 0.0, s), epsilon = 1e-12);

        // Grid-sampled half-parabola at x = 1: f_x = 1.
        let hf = SurfaceTarget::Heightfield(Heightfield::grid_from_fn(
            [257, 9],
            Point2::new(-2.0, -2.0),
            Vec2::new(4.0 / 256.0, 0.5),
            |xy| 0.5 * xy.x * xy.x,
        ));
        let n = hf.isotropic_boundary_normal(Point2::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(n, Vec3::new(s, 0.0, s), epsilon = 1e-3);
        assert!(n.z > 0.0);
        assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn project_isotropic_clamps_and_resets_height() {
        let flat = SurfaceTarget::Heightfield(Heightfield::analytic(
            AnalyticHeight::Flat,
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        ));
        assert_eq!(
            flat.project_isotropic(Point3::new(1.0, 2.0, 5.0)).unwrap(),
            Point3::new(1.0, 1.0, 0.0)
        );
        let par = paraboloid(1.0, 1.0);
        let on = Point3::new(1.0, 1.0, 1.0);
        assert_eq!(par.project_isotropic(on).unwrap(), on);
        // Out-of-domain: clamp xy, then evaluate.
        let q = par.project_isotropic(Point3::new(5.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, Point3::new(3.0, 0.0, 4.5));
    }

    #[test]
    fn analytic_unit_gradient_property() {
        let targets = vec![
            unit_sphere(),
            SurfaceTarget::Analytic(AnalyticSdf::Ellipsoid {
                center: Point3::origin(),
                radii: Vec3::new(2.0, 1.0, 1.0),
            }),
            SurfaceTarget::Analytic(AnalyticSdf::Torus {
                center: Point3::origin(),
                major: 2.0,
                minor: 0.5,
            }),
        ];
        let queries = [
            Point3::new(1.4, 0.9, 0.6),
            Point3::new(-2.4, 0.3, 0.2),
            Point3::new(0.4, 2.2, -1.0),
        ];
        for t in &targets {
            for &p in &queries {
                assert_relative_eq!(t.sdf_grad(p).unwrap().norm(), 1.0, epsilon = 1e-8);
            }
        }
    }
}
