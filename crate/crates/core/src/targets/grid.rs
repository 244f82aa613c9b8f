//! Grid-sampled targets: 3D signed distance grids and 2D heightfields.
//!
//! Grid files use a one-line ASCII header followed by raw little-endian f32
//! samples in x-fastest order:
//!
//! ```text
//! GRIDSDF nx ny nz ox oy oz sx sy sz
//! HFIELD  nx ny ox oy sx sy
//! ```
//!
//! Queries outside a grid clamp to the boundary samples: mid-flow vertices
//! may briefly exit the stored region and must still evaluate.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Point2, Point3, Result, Vec2, Vec3};

/// Regularly sampled signed distance field.
#[derive(Debug, Clone)]
pub struct GridSdf {
    nx: usize,
    ny: usize,
    nz: usize,
    origin: Point3,
    spacing: Vec3,
    values: Vec<f32>,
}

impl GridSdf {
    pub fn new(
        dims: [usize; 3],
        origin: Point3,
        spacing: Vec3,
        values: Vec<f32>,
    ) -> Result<Self> {
        let [nx, ny, nz] = dims;
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(Error::InvalidTarget(format!(
                "grid dimensions must be >= 2 per axis, got {nx}x{ny}x{nz}"
            )));
        }
        if !(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0) {
            return Err(Error::InvalidTarget("grid spacing must be positive".into()));
        }
        if values.len() != nx * ny * nz {
            return Err(Error::InvalidTarget(format!(
                "expected {} samples, got {}",
                nx * ny * nz,
                values.len()
            )));
        }
        Ok(GridSdf {
            nx,
            ny,
            nz,
            origin,
            spacing,
            values,
        })
    }

    /// Sample an arbitrary field over a regular grid.
    pub fn from_fn(
        dims: [usize; 3],
        origin: Point3,
        spacing: Vec3,
        f: impl Fn(Point3) -> f64,
    ) -> Self {
        let [nx, ny, nz] = dims;
        let mut values = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = origin
                        + Vec3::new(
                            spacing.x * i as f64,
                            spacing.y * j as f64,
                            spacing.z * k as f64,
                        );
                    values.push(f(p) as f32);
                }
            }
        }
        GridSdf::new(dims, origin, spacing, values).expect("valid by construction")
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn bbox(&self) -> (Point3, Point3) {
        (
            self.origin,
            self.origin
                + Vec3::new(
                    self.spacing.x * (self.nx - 1) as f64,
                    self.spacing.y * (self.ny - 1) as f64,
                    self.spacing.z * (self.nz - 1) as f64,
                ),
        )
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.ny + j) * self.nx + i] as f64
    }

    /// Trilinear interpolation, clamped to boundary values outside the grid.
    pub fn value(&self, p: Point3) -> f64 {
        let g = Vec3::new(
            ((p.x - self.origin.x) / self.spacing.x).clamp(0.0, (self.nx - 1) as f64),
            ((p.y - self.origin.y) / self.spacing.y).clamp(0.0, (self.ny - 1) as f64),
            ((p.z - self.origin.z) / self.spacing.z).clamp(0.0, (self.nz - 1) as f64),
        );
        let i0 = (g.x.floor() as usize).min(self.nx - 2);
        let j0 = (g.y.floor() as usize).min(self.ny - 2);
        let k0 = (g.z.floor() as usize).min(self.nz - 2);
        let fx = g.x - i0 as f64;
        let fy = g.y - j0 as f64;
        let fz = g.z - k0 as f64;

        let c00 = self.at(i0, j0, k0) * (1.0 - fx) + self.at(i0 + 1, j0, k0) * fx;
        let c10 = self.at(i0, j0 + 1, k0) * (1.0 - fx) + self.at(i0 + 1, j0 + 1, k0) * fx;
        let c01 = self.at(i0, j0, k0 + 1) * (1.0 - fx) + self.at(i0 + 1, j0, k0 + 1) * fx;
        let c11 = self.at(i0, j0 + 1, k0 + 1) * (1.0 - fx) + self.at(i0 + 1, j0 + 1, k0 + 1) * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        c0 * (1.0 - fz) + c1 * fz
    }

    /// Central differences of the interpolated field with one grid spacing
    /// as the step.
    pub fn gradient(&self, p: Point3) -> Vec3 {
        let mut g = Vec3::zeros();
        for axis in 0..3 {
            let mut hi = p;
            let mut lo = p;
            let h = self.spacing[axis];
            hi[axis] += h;
            lo[axis] -= h;
            g[axis] = (self.value(hi) - self.value(lo)) / (2.0 * h);
        }
        g
    }

    /// Read a `GRIDSDF` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(&path_str, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(&path_str, e))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 10 || tokens[0] != "GRIDSDF" {
            return Err(Error::InvalidTarget(format!(
                "{path_str}: expected 'GRIDSDF nx ny nz ox oy oz sx sy sz' header"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidTarget(format!("{path_str}: bad header token '{s}'")))
        };
        let nx = parse(tokens[1])? as usize;
        let ny = parse(tokens[2])? as usize;
        let nz = parse(tokens[3])? as usize;
        let origin = Point3::new(parse(tokens[4])?, parse(tokens[5])?, parse(tokens[6])?);
        let spacing = Vec3::new(parse(tokens[7])?, parse(tokens[8])?, parse(tokens[9])?);
        let values = read_f32_le(&mut reader, nx * ny * nz, &path_str)?;
        GridSdf::new([nx, ny, nz], origin, spacing, values)
    }

    /// Write a `GRIDSDF` file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(&path_str, e))?;
        writeln!(
            file,
            "GRIDSDF {} {} {} {} {} {} {} {} {}",
            self.nx,
            self.ny,
            self.nz,
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.spacing.x,
            self.spacing.y,
            self.spacing.z
        )
        .map_err(|e| Error::io(&path_str, e))?;
        write_f32_le(&mut file, &self.values, &path_str)
    }
}

/// Axis-aligned domain rectangle of a heightfield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Rect { min, max }
    }

    pub fn contains(&self, xy: Point2, slack: f64) -> bool {
        xy.x >= self.min.x - slack
            && xy.x <= self.max.x + slack
            && xy.y >= self.min.y - slack
            && xy.y <= self.max.y + slack
    }

    pub fn clamp(&self, xy: Point2) -> Point2 {
        Point2::new(
            xy.x.clamp(self.min.x, self.max.x),
            xy.y.clamp(self.min.y, self.max.y),
        )
    }

    /// Nearest point on the rectangle's boundary (its four sides).
    pub fn clamp_to_boundary(&self, xy: Point2) -> Point2 {
        let c = self.clamp(xy);
        let d_left = c.x - self.min.x;
        let d_right = self.max.x - c.x;
        let d_bottom = c.y - self.min.y;
        let d_top = self.max.y - c.y;
        let m = d_left.min(d_right).min(d_bottom).min(d_top);
        if m == d_left {
            Point2::new(self.min.x, c.y)
        } else if m == d_right {
            Point2::new(self.max.x, c.y)
        } else if m == d_bottom {
            Point2::new(c.x, self.min.y)
        } else {
            Point2::new(c.x, self.max.y)
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

/// Closed-form height functions selectable by name.
#[derive(Debug, Clone)]
pub enum AnalyticHeight {
    Flat,
    /// `f = gx*x + gy*y`
    Ramp { gx: f64, gy: f64 },
    /// `f = (ax*x^2 + by*y^2) / 2`
    Paraboloid { ax: f64, by: f64 },
    /// `f = amplitude * exp(-((x-cx)^2 + (y-cy)^2) / (2 sigma^2))`
    Gaussian {
        amplitude: f64,
        sigma: f64,
        center: Point2,
    },
    /// `f = amplitude * sin(kx*x) * sin(ky*y)`
    Waves { amplitude: f64, kx: f64, ky: f64 },
}

impl AnalyticHeight {
    pub fn value(&self, xy: Point2) -> f64 {
        match self {
            AnalyticHeight::Flat => 0.0,
            AnalyticHeight::Ramp { gx, gy } => gx * xy.x + gy * xy.y,
            AnalyticHeight::Paraboloid { ax, by } => 0.5 * (ax * xy.x * xy.x + by * xy.y * xy.y),
            AnalyticHeight::Gaussian {
                amplitude,
                sigma,
                center,
            } => {
                let d2 = (xy - center).norm_squared();
                amplitude * (-d2 / (2.0 * sigma * sigma)).exp()
            }
            AnalyticHeight::Waves { amplitude, kx, ky } => {
                amplitude * (kx * xy.x).sin() * (ky * xy.y).sin()
            }
        }
    }

    pub fn partials(&self, xy: Point2) -> Vec2 {
        match self {
            AnalyticHeight::Flat => Vec2::zeros(),
            AnalyticHeight::Ramp { gx, gy } => Vec2::new(*gx, *gy),
            AnalyticHeight::Paraboloid { ax, by } => Vec2::new(ax * xy.x, by * xy.y),
            AnalyticHeight::Gaussian { sigma, center, .. } => {
                let v = self.value(xy);
                let s2 = sigma * sigma;
                Vec2::new(
                    -v * (xy.x - center.x) / s2,
                    -v * (xy.y - center.y) / s2,
                )
            }
            AnalyticHeight::Waves { amplitude, kx, ky } => Vec2::new(
                amplitude * kx * (kx * xy.x).cos() * (ky * xy.y).sin(),
                amplitude * ky * (kx * xy.x).sin() * (ky * xy.y).cos(),
            ),
        }
    }
}

#[derive(Debug, Clone)]
enum HeightData {
    Grid {
        nx: usize,
        ny: usize,
        origin: Point2,
        spacing: Vec2,
        values: Vec<f32>,
    },
    Analytic(AnalyticHeight),
}

/// Scalar height function over a rectangular domain.
#[derive(Debug, Clone)]
pub struct Heightfield {
    data: HeightData,
    domain: Rect,
}

impl Heightfield {
    pub fn analytic(height: AnalyticHeight, domain: Rect) -> Self {
        Heightfield {
            data: HeightData::Analytic(height),
            domain,
        }
    }

    pub fn from_grid(
        dims: [usize; 2],
        origin: Point2,
        spacing: Vec2,
        values: Vec<f32>,
    ) -> Result<Self> {
        let [nx, ny] = dims;
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidTarget(format!(
                "heightfield dimensions must be >= 2 per axis, got {nx}x{ny}"
            )));
        }
        if !(spacing.x > 0.0 && spacing.y > 0.0) {
            return Err(Error::InvalidTarget(
                "heightfield spacing must be positive".into(),
            ));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidTarget(format!(
                "expected {} samples, got {}",
                nx * ny,
                values.len()
            )));
        }
        let domain = Rect::new(
            origin,
            Point2::new(
                origin.x + spacing.x * (nx - 1) as f64,
                origin.y + spacing.y * (ny - 1) as f64,
            ),
        );
        Ok(Heightfield {
            data: HeightData::Grid {
                nx,
                ny,
                origin,
                spacing,
                values,
            },
            domain,
        })
    }

    /// Sample a height function over a regular grid.
    pub fn grid_from_fn(
        dims: [usize; 2],
        origin: Point2,
        spacing: Vec2,
        f: impl Fn(Point2) -> f64,
    ) -> Self {
        let [nx, ny] = dims;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let xy = Point2::new(
                    origin.x + spacing.x * i as f64,
                    origin.y + spacing.y * j as f64,
                );
                values.push(f(xy) as f32);
            }
        }
        Heightfield::from_grid(dims, origin, spacing, values).expect("valid by construction")
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Height at `xy` (bilinear for grids), clamped into the domain.
    pub fn value(&self, xy: Point2) -> f64 {
        let xy = self.domain.clamp(xy);
        match &self.data {
            HeightData::Analytic(a) => a.value(xy),
            HeightData::Grid {
                nx,
                ny,
                origin,
                spacing,
                values,
            } => {
                let gx = ((xy.x - origin.x) / spacing.x).clamp(0.0, (*nx - 1) as f64);
                let gy = ((xy.y - origin.y) / spacing.y).clamp(0.0, (*ny - 1) as f64);
                let i0 = (gx.floor() as usize).min(nx - 2);
                let j0 = (gy.floor() as usize).min(ny - 2);
                let fx = gx - i0 as f64;
                let fy = gy - j0 as f64;
                let at = |i: usize, j: usize| values[j * nx + i] as f64;
                let c0 = at(i0, j0) * (1.0 - fx) + at(i0 + 1, j0) * fx;
                let c1 = at(i0, j0 + 1) * (1.0 - fx) + at(i0 + 1, j0 + 1) * fx;
                c0 * (1.0 - fy) + c1 * fy
            }
        }
    }

    /// Partial derivatives `(f_x, f_y)`. Grid fields use central differences
    /// of the interpolated surface with the grid spacing as the step,
    /// falling back to one-sided stencils at the domain boundary.
    pub fn partials(&self, xy: Point2) -> Vec2 {
        let xy = self.domain.clamp(xy);
        match &self.data {
            HeightData::Analytic(a) => a.partials(xy),
            HeightData::Grid { spacing, .. } => {
                let mut g = Vec2::zeros();
                for axis in 0..2 {
                    let h = spacing[axis];
                    let lo_ok = xy[axis] - h >= self.domain.min[axis] - 1e-12 * h;
                    let hi_ok = xy[axis] + h <= self.domain.max[axis] + 1e-12 * h;
                    let (mut a, mut b) = (xy, xy);
                    let denom = match (lo_ok, hi_ok) {
                        (true, true) => {
                            a[axis] -= h;
                            b[axis] += h;
                            2.0 * h
                        }
                        (false, true) => {
                            b[axis] += h;
                            h
                        }
                        (true, false) => {
                            a[axis] -= h;
                            h
                        }
                        (false, false) => {
                            g[axis] = 0.0;
                            continue;
                        }
                    };
                    g[axis] = (self.value(b) - self.value(a)) / denom;
                }
                g
            }
        }
    }

    /// Read an `HFIELD` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(&path_str, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(&path_str, e))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 7 || tokens[0] != "HFIELD" {
            return Err(Error::InvalidTarget(format!(
                "{path_str}: expected 'HFIELD nx ny ox oy sx sy' header"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidTarget(format!("{path_str}: bad header token '{s}'")))
        };
        let nx = parse(tokens[1])? as usize;
        let ny = parse(tokens[2])? as usize;
        let origin = Point2::new(parse(tokens[3])?, parse(tokens[4])?);
        let spacing = Vec2::new(parse(tokens[5])?, parse(tokens[6])?);
        let values = read_f32_le(&mut reader, nx * ny, &path_str)?;
        Heightfield::from_grid([nx, ny], origin, spacing, values)
    }

    /// Write an `HFIELD` file (grid-backed heightfields only).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let HeightData::Grid {
            nx,
            ny,
            origin,
            spacing,
            values,
        } = &self.data
        else {
            return Err(Error::InvalidTarget(
                "only grid heightfields can be saved".into(),
            ));
        };
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(&path_str, e))?;
        writeln!(
            file,
            "HFIELD {} {} {} {} {} {}",
            nx, ny, origin.x, origin.y, spacing.x, spacing.y
        )
        .map_err(|e| Error::io(&path_str, e))?;
        write_f32_le(&mut file, values, &path_str)
    }
}

fn read_f32_le(reader: &mut impl Read, count: usize, path: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32_le(writer: &mut impl Write, values: &[f32], path: &str) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_sdf_matches_analytic_sphere() {
        let n = 64;
        let spacing = 3.0 / (n - 1) as f64;
        let grid = GridSdf::from_fn(
            [n, n, n],
            Point3::new(-1.5, -1.5, -1.5),
            Vec3::repeat(spacing),
            |p| p.coords.norm() - 1.0,
        );
        let v = grid.value(Point3::new(0.5, 0.0, 0.0));
        assert!((v + 0.5).abs() < 2.0 * spacing, "got {v}");
    }

    #[test]
    fn grid_sdf_clamps_outside() {
        let grid = GridSdf::from_fn(
            [4, 4, 4],
            Point3::origin(),
            Vec3::repeat(1.0),
            |p| p.x,
        );
        assert_relative_eq!(grid.value(Point3::new(10.0, 1.0, 1.0)), 3.0);
        assert_relative_eq!(grid.value(Point3::new(-10.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn grid_sdf_round_trip() {
        let grid = GridSdf::from_fn(
            [8, 6, 5],
            Point3::new(-1.0, 0.0, 2.0),
            Vec3::new(0.25, 0.5, 0.125),
            |p| p.coords.norm() - 1.0,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.sdf");
        grid.save(&path).unwrap();
        let grid2 = GridSdf::load(&path).unwrap();
        assert_eq!(grid.dims(), grid2.dims());
        assert_eq!(grid.values, grid2.values);
        assert_eq!(grid.origin, grid2.origin);
    }

    #[test]
    fn bilinear_heightfield_reproduces_product_exactly() {
        // x*y is bilinear, so interpolation and its difference quotients are
        // exact; analytic partials are the oracle.
        let hf = Heightfield::grid_from_fn(
            [9, 9],
            Point2::origin(),
            Vec2::repeat(0.125),
            |xy| xy.x * xy.y,
        );
        let xy = Point2::new(0.5, 0.25);
        assert_relative_eq!(hf.value(xy), 0.125, epsilon = 1e-7);
        let g = hf.partials(xy);
        assert_relative_eq!(g.x, 0.25, epsilon = 1e-6);
        assert_relative_eq!(g.y, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn heightfield_round_trip() {
        let hf = Heightfield::grid_from_fn(
            [7, 5],
            Point2::new(-1.0, -1.0),
            Vec2::new(0.25, 0.5),
            |xy| (xy.x + xy.y).sin(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.hf");
        hf.save(&path).unwrap();
        let hf2 = Heightfield::load(&path).unwrap();
        assert_eq!(hf.domain(), hf2.domain());
        let xy = Point2::new(0.3, -0.4);
        assert_relative_eq!(hf.value(xy), hf2.value(xy));
    }

    #[test]
    fn rect_boundary_clamp() {
        let r = Rect::new(Point2::origin(), Point2::new(2.0, 1.0));
        // Interior points snap to the nearest side.
        assert_eq!(r.clamp_to_boundary(Point2::new(1.0, 0.1)), Point2::new(1.0, 0.0));
        assert_eq!(r.clamp_to_boundary(Point2::new(0.05, 0.5)), Point2::new(0.0, 0.5));
        // Exterior points clamp onto the frame.
        assert_eq!(r.clamp_to_boundary(Point2::new(3.0, 0.5)), Point2::new(2.0, 0.5));
        assert_eq!(r.clamp_to_boundary(Point2::new(-1.0, -1.0)), Point2::new(0.0, 0.0));
    }
}
