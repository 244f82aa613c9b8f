//! The two vertex-relocation solvers and their shared iteration loop.
//!
//! Per outer iteration both solvers follow the same recipe: freeze the
//! curvature data computed from the current positions, take one backward
//! Euler step of the associated diffusion (a sparse SPD solve), project
//! every vertex back onto the target, then refresh curvatures and record
//! diagnostics. The diffusion solver weights edges with summed per-face
//! tensors `|S|^alpha`; the spring solver uses scalar per-edge curvatures
//! `kappa^alpha` and a lumped mass matrix, trading anisotropy for
//! robustness.

mod sparse;

pub use sparse::{
    diffusion_system, laplacian_blocks_csr, laplacian_scalar_csr, mass_diffusion_system, solve_cg,
    spring_system, CsrMatrix, SparseSystem,
};

use rayon::prelude::*;

use crate::diagnostics;
use crate::metric::{self, EdgeCurvatures, FaceMetric};
use crate::targets::Mode;
use crate::{Error, Mat3, Point3, Result, SurfaceTarget, TriMesh, Vec3};

/// Which solver drives the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Diffusion,
    Spring,
}

/// Flow parameters.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub solver: SolverKind,
    /// Anisotropy exponent in `[0, 1]`: 0 meshes uniformly, 1 follows the
    /// normal field.
    pub alpha: f64,
    /// Diffusion time step. The spring solver always steps with 1.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Early stop when the relative energy change stays below this over a
    /// 5-iteration window; 0 disables.
    pub energy_rel_tol: f64,
    /// Scale on boundary-edge stiffness.
    pub boundary_weight: f64,
    /// Projection tolerance; default is 1e-6 of the target size.
    pub projection_tol: Option<f64>,
    pub projection_max_iter: usize,
    /// Regularization multiplier for the metric module.
    pub delta_scale: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            solver: SolverKind::Spring,
            alpha: 1.0,
            epsilon: 0.01,
            max_iterations: 500,
            energy_rel_tol: 0.0,
            boundary_weight: 1.0,
            projection_tol: None,
            projection_max_iter: 20,
            delta_scale: 1e-3,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.boundary_weight >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "boundary weight must be nonnegative, got {}",
                self.boundary_weight
            )));
        }
        Ok(())
    }

    fn resolved_projection_tol(&self, target: &SurfaceTarget) -> f64 {
        self.projection_tol
            .unwrap_or_else(|| target.default_projection_tol())
    }
}

/// One trace row per iteration (including the initial state).
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub flipped_faces: usize,
    pub density_cv: f64,
    pub max_abs_sdf: f64,
}

/// Per-iteration diagnostics of a flow run.
#[derive(Debug, Clone, Default)]
pub struct EnergyTrace {
    pub entries: Vec<TraceEntry>,
}

impl EnergyTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,energy,flipped_faces,density_cv,max_abs_sdf\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.iteration, e.energy, e.flipped_faces, e.density_cv, e.max_abs_sdf
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Mutable state of one flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub positions: Vec<Point3>,
    pub iteration: usize,
    pub metrics: Vec<FaceMetric>,
    pub curvatures: EdgeCurvatures,
    pub normals: Vec<Vec3>,
    pub delta: f64,
    pub trace: EnergyTrace,
    pub projection_failures: usize,
    pub degenerate_faces: usize,
}

impl FlowState {
    /// Project the mesh onto the target and compute the initial curvature
    /// caches and trace entry.
    pub fn init(mesh: &TriMesh, target: &SurfaceTarget, cfg: &FlowConfig) -> Result<FlowState> {
        cfg.validate()?;
        let mut state = FlowState {
            positions: mesh.positions().to_vec(),
            iteration: 0,
            metrics: Vec::new(),
            curvatures: EdgeCurvatures {
                interior: Vec::new(),
                boundary: Vec::new(),
            },
            normals: Vec::new(),
            delta: 0.0,
            trace: EnergyTrace::default(),
            projection_failures: 0,
            degenerate_faces: 0,
        };
        project_all(mesh, target, cfg, &mut state.positions, &mut state.projection_failures)?;
        state.refresh(mesh, target, cfg)?;
        state.record(mesh, target);
        Ok(state)
    }

    /// Recompute normals, face metrics and edge curvatures from the current
    /// positions (the per-iteration freeze point).
    fn refresh(&mut self, mesh: &TriMesh, target: &SurfaceTarget, cfg: &FlowConfig) -> Result<()> {
        self.normals = tolerant_vertex_normals(mesh, &self.positions, target, &self.normals)?;
        let previous = if self.metrics.is_empty() {
            None
        } else {
            Some(self.metrics.as_slice())
        };
        let (metrics, delta, degenerate) = metric::compute_face_metrics(
            mesh,
            &self.positions,
            &self.normals,
            target.mode(),
            cfg.alpha,
            cfg.delta_scale,
            previous,
        );
        self.metrics = metrics;
        self.delta = delta;
        self.degenerate_faces += degenerate;
        self.curvatures = EdgeCurvatures::compute(mesh, &self.positions, &self.normals, target);
        Ok(())
    }

    fn record(&mut self, mesh: &TriMesh, target: &SurfaceTarget) {
        let energy = discrete_energy(mesh, &self.positions, &self.metrics);
        let flipped = diagnostics::flipped_faces(mesh, &self.positions, target).0;
        let density_cv = diagnostics::density_cv(mesh, &self.positions, &self.metrics);
        let max_abs_sdf = self
            .positions
            .iter()
            .map(|p| target.residual(*p))
            .fold(0.0, f64::max);
        self.trace.entries.push(TraceEntry {
            iteration: self.iteration,
            energy,
            flipped_faces: flipped,
            density_cv,
            max_abs_sdf,
        });
    }
}

/// Discrete flow energy: the squared metric-weighted edge differences,
/// each edge counted once with the average of its adjacent face tensors.
pub fn discrete_energy(mesh: &TriMesh, positions: &[Point3], metrics: &[FaceMetric]) -> f64 {
    mesh.edges()
        .iter()
        .map(|e| {
            let w = average_face_tensor(e.faces.as_slice(), metrics);
            let d = positions[e.b] - positions[e.a];
            (w * d).norm_squared()
        })
        .sum()
}

fn average_face_tensor(faces: &[usize], metrics: &[FaceMetric]) -> Mat3 {
    let mut w = Mat3::zeros();
    for &f in faces {
        w += metrics[f].ambient;
    }
    w / faces.len().max(1) as f64
}

/// Gradient of [`discrete_energy`] with the metrics frozen: `2 L phi` for
/// the graph Laplacian whose edge weights are the squared averaged tensors.
pub fn energy_gradient(mesh: &TriMesh, positions: &[Point3], metrics: &[FaceMetric]) -> Vec<Vec3> {
    let edges: Vec<[usize; 2]> = mesh.edges().iter().map(|e| [e.a, e.b]).collect();
    let weights: Vec<Mat3> = mesh
        .edges()
        .iter()
        .map(|e| {
            let w = average_face_tensor(e.faces.as_slice(), metrics);
            w * w
        })
        .collect();
    let lap = laplacian_blocks_csr(mesh.vertex_count(), &edges, &weights);
    let mut phi = vec![0.0; 3 * mesh.vertex_count()];
    for (i, p) in positions.iter().enumerate() {
        phi[3 * i] = p.x;
        phi[3 * i + 1] = p.y;
        phi[3 * i + 2] = p.z;
    }
    let mut out = vec![0.0; phi.len()];
    lap.mul_vec(&phi, &mut out);
    (0..mesh.vertex_count())
        .map(|i| 2.0 * Vec3::new(out[3 * i], out[3 * i + 1], out[3 * i + 2]))
        .collect()
}

/// Diffusion edge weights: summed adjacent face tensors on interior edges,
/// `boundary_weight * kappa_b^alpha * I` on boundary edges.
fn diffusion_weights(
    mesh: &TriMesh,
    metrics: &[FaceMetric],
    curvatures: &EdgeCurvatures,
    cfg: &FlowConfig,
) -> Vec<Mat3> {
    mesh.edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            if e.is_boundary() {
                let kb = curvatures.boundary[ei].unwrap_or(curvatures.interior[ei]);
                Mat3::identity() * (cfg.boundary_weight * kb.max(0.0).powf(cfg.alpha))
            } else {
                let mut w = Mat3::zeros();
                for &f in &e.faces {
                    w += metrics[f].ambient;
                }
                w
            }
        })
        .collect()
}

/// Barycentric dual areas: one third of each incident face area.
fn vertex_dual_areas(mesh: &TriMesh, positions: &[Point3]) -> Vec<f64> {
    let mut areas = vec![0.0; mesh.vertex_count()];
    for f in mesh.faces() {
        let third = TriMesh::face_normal_raw(positions, f).norm() / 6.0;
        for &v in f {
            areas[v] += third;
        }
    }
    // Isolated or fully collapsed stars keep the system definite.
    let floor = 1e-12 * areas.iter().cloned().fold(0.0, f64::max).max(1e-300);
    for a in areas.iter_mut() {
        *a = a.max(floor);
    }
    areas
}

/// Assemble the diffusion system `(M + eps L) phi_next = M phi`, with the
/// dual-area mass matrix carrying the Hodge star the bare stencil omits.
pub fn assemble_diffusion(
    mesh: &TriMesh,
    positions: &[Point3],
    metrics: &[FaceMetric],
    curvatures: &EdgeCurvatures,
    cfg: &FlowConfig,
) -> SparseSystem {
    let edges: Vec<[usize; 2]> = mesh.edges().iter().map(|e| [e.a, e.b]).collect();
    let weights = diffusion_weights(mesh, metrics, curvatures, cfg);
    let masses = vertex_dual_areas(mesh, positions);
    sparse::mass_diffusion_system(
        mesh.vertex_count(),
        &edges,
        &weights,
        cfg.epsilon,
        &masses,
        positions,
    )
}

/// Spring constants per edge: curvatures floored by the regularization
/// scale, raised to `alpha`, boundary edges swapped for their weighted
/// Darboux curvature.
fn spring_constants(
    mesh: &TriMesh,
    curvatures: &EdgeCurvatures,
    delta: f64,
    cfg: &FlowConfig,
) -> Vec<f64> {
    // An absolute fallback keeps the mass matrix definite on exactly flat
    // targets where delta evaluates to zero.
    let kappa_floor = delta.max(1e-12);
    let stiffness_floor = kappa_floor.powf(cfg.alpha) * 1e-9;
    (0..mesh.edge_count())
        .map(|ei| {
            let e = &mesh.edges()[ei];
            let k = if e.is_boundary() {
                let kb = curvatures.boundary[ei].unwrap_or(curvatures.interior[ei]);
                cfg.boundary_weight * kb.max(kappa_floor).powf(cfg.alpha)
            } else {
                curvatures.interior[ei].max(kappa_floor).powf(cfg.alpha)
            };
            k.max(stiffness_floor)
        })
        .collect()
}

/// Assemble the spring system `(M + L_k) phi_next = M phi` (unit step).
pub fn assemble_spring(
    mesh: &TriMesh,
    positions: &[Point3],
    curvatures: &EdgeCurvatures,
    delta: f64,
    cfg: &FlowConfig,
) -> SparseSystem {
    let edges: Vec<[usize; 2]> = mesh.edges().iter().map(|e| [e.a, e.b]).collect();
    let constants = spring_constants(mesh, curvatures, delta, cfg);
    spring_system(mesh.vertex_count(), &edges, &constants, 1.0, positions)
}

/// Per-vertex normals that survive medial-axis strays: a vertex whose query
/// fails keeps its previous normal. Errors only when there is no fallback.
fn tolerant_vertex_normals(
    mesh: &TriMesh,
    positions: &[Point3],
    target: &SurfaceTarget,
    previous: &[Vec3],
) -> Result<Vec<Vec3>> {
    match target.mode() {
        Mode::Isotropic => metric::vertex_normals(mesh, positions, target),
        Mode::Euclidean => positions
            .iter()
            .enumerate()
            .map(|(i, p)| match target.surface_normal(*p) {
                Ok(n) => Ok(n),
                Err(e) => previous.get(i).copied().ok_or(e),
            })
            .collect(),
    }
}

fn project_all(
    mesh: &TriMesh,
    target: &SurfaceTarget,
    cfg: &FlowConfig,
    positions: &mut [Point3],
    failures: &mut usize,
) -> Result<()> {
    let tol = cfg.resolved_projection_tol(target);
    match target.mode() {
        Mode::Euclidean => {
            // A vertex sitting exactly on the medial axis has no distance
            // gradient; a deterministic nudge breaks the tie.
            let nudge = Vec3::new(1.0, 1.3, 1.7) * (1e-7 * target.characteristic_size());
            let results: Vec<(Point3, bool)> = positions
                .par_iter()
                .map(|p| match target.project_to_surface(*p, tol, cfg.projection_max_iter) {
                    Ok((q, report)) => (q, report.final_abs_distance >= tol),
                    Err(_) => {
                        match target.project_to_surface(*p + nudge, tol, cfg.projection_max_iter)
                        {
                            Ok((q, report)) => (q, report.final_abs_distance >= tol),
                            Err(_) => (*p, true),
                        }
                    }
                })
                .collect();
            for (i, (q, failed)) in results.into_iter().enumerate() {
                positions[i] = q;
                if failed {
                    *failures += 1;
                }
            }
        }
        Mode::Isotropic => {
            for i in 0..positions.len() {
                positions[i] = if mesh.is_boundary_vertex(i) {
                    target.project_isotropic_boundary(positions[i])?
                } else {
                    target.project_isotropic(positions[i])?
                };
            }
        }
    }
    Ok(())
}

fn unpack_diffusion(solution: &[f64], n: usize) -> Vec<Point3> {
    (0..n)
        .map(|i| Point3::new(solution[3 * i], solution[3 * i + 1], solution[3 * i + 2]))
        .collect()
}

fn unpack_spring(solution: &[Vec<f64>], n: usize) -> Vec<Point3> {
    (0..n)
        .map(|i| Point3::new(solution[0][i], solution[1][i], solution[2][i]))
        .collect()
}

/// One diffusion iteration: implicit step with frozen metrics, projection,
/// cache refresh, trace row.
pub fn diffusion_step(
    state: &mut FlowState,
    mesh: &TriMesh,
    target: &SurfaceTarget,
    cfg: &FlowConfig,
) -> Result<()> {
    let system = assemble_diffusion(mesh, &state.positions, &state.metrics, &state.curvatures, cfg);
    let solution = system.solve()?;
    state.positions = unpack_diffusion(&solution[0], mesh.vertex_count());
    project_all(mesh, target, cfg, &mut state.positions, &mut state.projection_failures)?;
    state.iteration += 1;
    state.refresh(mesh, target, cfg)?;
    state.record(mesh, target);
    Ok(())
}

/// One spring iteration (unit time step).
pub fn spring_step(
    state: &mut FlowState,
    mesh: &TriMesh,
    target: &SurfaceTarget,
    cfg: &FlowConfig,
) -> Result<()> {
    let system = assemble_spring(mesh, &state.positions, &state.curvatures, state.delta, cfg);
    let solution = system.solve()?;
    state.positions = unpack_spring(&solution, mesh.vertex_count());
    project_all(mesh, target, cfg, &mut state.positions, &mut state.projection_failures)?;
    state.iteration += 1;
    state.refresh(mesh, target, cfg)?;
    state.record(mesh, target);
    Ok(())
}

fn energy_converged(trace: &EnergyTrace, rel_tol: f64) -> bool {
    if rel_tol <= 0.0 {
        return false;
    }
    let e = &trace.entries;
    if e.len() < 6 {
        return false;
    }
    e.windows(2).rev().take(5).all(|w| {
        let prev = w[0].energy;
        let next = w[1].energy;
        (next - prev).abs() / prev.abs().max(f64::MIN_POSITIVE) < rel_tol
    })
}

/// Run the configured flow to completion, invoking `observer` after the
/// initial projection and after every iteration.
pub fn run_flow_with(
    mesh: &TriMesh,
    target: &SurfaceTarget,
    cfg: &FlowConfig,
    mut observer: impl FnMut(&FlowState),
) -> Result<(Vec<Point3>, EnergyTrace)> {
    let mut state = FlowState::init(mesh, target, cfg)?;
    observer(&state);
    while state.iteration < cfg.max_iterations {
        match cfg.solver {
            SolverKind::Diffusion => diffusion_step(&mut state, mesh, target, cfg)?,
            SolverKind::Spring => spring_step(&mut state, mesh, target, cfg)?,
        }
        observer(&state);
        if energy_converged(&state.trace, cfg.energy_rel_tol) {
            break;
        }
    }
    Ok((state.positions, state.trace))
}

/// Run the configured flow to completion.
pub fn run_flow(
    mesh: &TriMesh,
    target: &SurfaceTarget,
    cfg: &FlowConfig,
) -> Result<(Vec<Point3>, EnergyTrace)> {
    run_flow_with(mesh, target, cfg, |_| {})
}

/// Spring flow over a bare edge graph (e.g. a closed polyline on a curve
/// target). Vertices project to the target every iteration; curvatures come
/// from the target's normals at the endpoints.
pub fn spring_flow_polyline(
    mut positions: Vec<Point3>,
    edges: &[[usize; 2]],
    target: &SurfaceTarget,
    cfg: &FlowConfig,
) -> Result<Vec<Point3>> {
    cfg.validate()?;
    let tol = cfg.resolved_projection_tol(target);
    let n = positions.len();
    let mode = target.mode();

    let project_one = |p: Point3| -> Result<Point3> {
        match mode {
            Mode::Euclidean => Ok(target.project_to_surface(p, tol, cfg.projection_max_iter)?.0),
            Mode::Isotropic => target.project_isotropic(p),
        }
    };
    for p in positions.iter_mut() {
        *p = project_one(*p)?;
    }

    for _ in 0..cfg.max_iterations {
        let normals: Vec<Vec3> = match mode {
            Mode::Euclidean => positions
                .iter()
                .map(|p| target.surface_normal(*p))
                .collect::<Result<_>>()?,
            Mode::Isotropic => positions
                .iter()
                .map(|p| target.gauss_map(crate::Point2::new(p.x, p.y)))
                .collect::<Result<_>>()?,
        };
        let kappas: Vec<f64> = edges
            .iter()
            .map(|&[i, j]| {
                metric::edge_curvature_between(positions[i], positions[j], normals[i], normals[j], mode)
                    .unwrap_or(0.0)
            })
            .collect();
        let mean_kappa = kappas.iter().sum::<f64>() / kappas.len().max(1) as f64;
        let floor = (cfg.delta_scale * mean_kappa).max(1e-12);
        let constants: Vec<f64> = kappas
            .iter()
            .map(|k| k.max(floor).powf(cfg.alpha))
            .collect();

        let system = spring_system(n, edges, &constants, 1.0, &positions);
        let solution = system.solve()?;
        positions = unpack_spring(&solution, n);
        for p in positions.iter_mut() {
            *p = project_one(*p)?;
        }
    }
    Ok(positions)
}
