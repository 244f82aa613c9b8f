use hrflow::targets::{AnalyticSdf, SurfaceTarget};
use hrflow::{diagnostics, flow, metric, shapes, FlowConfig, Point3, SolverKind, Vec3};

fn ellipse_experiment(iters: usize) {
    // 200-vertex polyline on the ellipse (2, 1) via the elliptic cylinder's
    // equator (the (2,1,1) ellipsoid equator at z = 0).
    let (positions, edges) = shapes::ellipse_polyline(200, 2.0, 1.0, 0.0);
    let target = SurfaceTarget::Analytic(AnalyticSdf::Ellipsoid {
        center: Point3::origin(),
        radii: Vec3::new(2.0, 1.0, 1.0),
    });
    let cfg = FlowConfig {
        alpha: 1.0,
        max_iterations: iters,
        ..FlowConfig::default()
    };
    let t0 = std::time::Instant::now();
    let out = flow::spring_flow_polyline(positions, &edges, &target, &cfg).unwrap();
    let dt = t0.elapsed().as_secs_f64();

    // Oracle: analytic plane-ellipse curvature at each edge midpoint.
    let kappa = |p: &Point3| -> f64 {
        // point on ellipse x=2cos t, y=sin t; curvature = ab/(a^2 sin^2 + b^2 cos^2)^{3/2}
        let t = (p.y).atan2(p.x / 2.0);
        let (s, c) = t.sin_cos();
        2.0 / (4.0 * s * s + c * c).powf(1.5)
    };
    let mut products = Vec::new();
    for &[i, j] in &edges {
        let mid = Point3::from((out[i].coords + out[j].coords) / 2.0);
        let spacing = (out[j] - out[i]).norm();
        products.push(spacing * kappa(&mid));
    }
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let var = products.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / products.len() as f64;
    println!(
        "ellipse iters={iters}: cv={:.4} time={:.2}s",
        var.sqrt() / mean,
        dt
    );
}

fn aspect_experiment(kind: &str, alpha: f64, iters: usize, scale: f64) {
    let m = shapes::icosphere(3);
    let target = match kind {
        "ellipsoid" => SurfaceTarget::Analytic(AnalyticSdf::Ellipsoid {
            center: Point3::origin(),
            radii: Vec3::new(2.0, 1.0, 1.0),
        }),
        _ => SurfaceTarget::Analytic(AnalyticSdf::Torus {
            center: Point3::origin(),
            major: 2.0,
            minor: 0.8,
        }),
    };
    let scaled: Vec<Point3> = m
        .positions()
        .iter()
        .map(|p| Point3::from(p.coords * scale))
        .collect();
    let m = m.with_positions(scaled).unwrap();
    let cfg = FlowConfig {
        solver: SolverKind::Spring,
        alpha,
        max_iterations: iters,
        ..FlowConfig::default()
    };
    let median_ratio = |positions: &[Point3]| -> f64 {
        let normals = metric::vertex_normals(&m, positions, &target).unwrap();
        let (metrics, _, _) = metric::compute_face_metrics(
            &m,
            positions,
            &normals,
            target.mode(),
            alpha,
            1e-3,
            None,
        );
        let mut ratios = diagnostics::aspect_ratios(&m, positions, &metrics);
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ratios[ratios.len() / 2]
    };
    let state0 = flow::FlowState::init(&m, &target, &cfg).unwrap();
    let med0 = median_ratio(&state0.positions);
    let t0 = std::time::Instant::now();
    let (out, trace) = flow::run_flow(&m, &target, &cfg).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let med = median_ratio(&out);
    let last = trace.entries.last().unwrap();
    println!(
        "aspect {kind} scale={scale} alpha={alpha} iters={iters}: med0={med0:.3} med={med:.3} flipped={} time={:.1}s",
        last.flipped_faces, dt
    );
}

fn main() {
    for iters in [1000, 1500] {
        ellipse_experiment(iters);
    }
    aspect_experiment("ellipsoid", 0.5, 500, 1.0);
    aspect_experiment("ellipsoid", 0.5, 500, 2.5);
    aspect_experiment("torus", 0.5, 500, 1.0);
    aspect_experiment("torus", 0.5, 500, 3.0);
}
