//! End-to-end runs of the `hrflow` binary.

use std::path::Path;
use std::process::Command;

use hrflow::{mesh, shapes};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrflow"))
}

fn write_icosphere(dir: &Path, subdivisions: u32) -> std::path::PathBuf {
    let m = shapes::icosphere(subdivisions);
    let path = dir.join("input.obj");
    mesh::save_obj(&m, &path, None).unwrap();
    path
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "--input",
            "/no/such/mesh.obj",
            "--output",
            dir.path().join("o.obj").to_str().unwrap(),
            "--target",
            "sphere:1.0",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/no/such/mesh.obj"), "stderr: {stderr}");
}

#[test]
fn bad_alpha_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_icosphere(dir.path(), 0);
    let out = bin()
        .args([
            "--input",
            input.to_str().unwrap(),
            "--output",
            dir.path().join("o.obj").to_str().unwrap(),
            "--target",
            "sphere:1.0",
            "--alpha",
            "1.5",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn ellipsoid_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_icosphere(dir.path(), 2);
    let output = dir.path().join("out.obj");
    let trace = dir.path().join("trace.csv");
    let diag = dir.path().join("diag.csv");
    let status = bin()
        .args([
            "--input",
            input.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
            "--target",
            "ellipsoid:2,1,1",
            "--solver",
            "diffusion",
            "--alpha",
            "1.0",
            "--epsilon",
            "0.03",
            "--iterations",
            "5",
            "--trace",
            trace.to_str().unwrap(),
            "--diagnostics",
            diag.to_str().unwrap(),
            "--snapshot-every",
            "2",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // Trace: header + 6 rows (initial + 5 iterations).
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(trace_text.lines().count(), 7);
    assert!(trace_text.starts_with("iteration,energy,flipped_faces,density_cv,max_abs_sdf"));

    // Mesh + density sidecar + diagnostics + histogram + snapshots 0/2/4.
    assert!(output.exists());
    assert!(dir.path().join("out.ply").exists());
    assert!(diag.exists());
    assert!(dir.path().join("diag_aspect_hist.csv").exists());
    for k in [0, 2, 4] {
        assert!(dir.path().join(format!("out_iter{k}.obj")).exists(), "missing snapshot {k}");
    }

    // Topology is preserved in every artifact.
    let src = mesh::load_obj(&input).unwrap();
    for path in [
        output.clone(),
        dir.path().join("out_iter0.obj"),
        dir.path().join("out_iter4.obj"),
    ] {
        let m = mesh::load_obj(&path).unwrap();
        assert_eq!(m.faces(), src.faces(), "{}", path.display());
    }
}

#[test]
fn identical_configs_give_bit_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_icosphere(dir.path(), 1);
    let run = |tag: &str| {
        let output = dir.path().join(format!("out_{tag}.obj"));
        let trace = dir.path().join(format!("trace_{tag}.csv"));
        let status = bin()
            .env("HR_THREADS", "2")
            .args([
                "--input",
                input.to_str().unwrap(),
                "--output",
                output.to_str().unwrap(),
                "--target",
                "sphere:1.0",
                "--solver",
                "spring",
                "--iterations",
                "10",
                "--trace",
                trace.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(&output).unwrap(),
            std::fs::read(&trace).unwrap(),
        )
    };
    let (mesh_a, trace_a) = run("a");
    let (mesh_b, trace_b) = run("b");
    assert_eq!(mesh_a, mesh_b);
    assert_eq!(trace_a, trace_b);
}

#[test]
fn config_file_drives_a_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_icosphere(dir.path(), 1);
    let output = dir.path().join("out.obj");
    let trace = dir.path().join("trace.csv");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "input={}\noutput={}\ntarget=sphere:1.0\niterations=9\nalpha=0.25\ntrace={}\n",
            input.display(),
            output.display(),
            trace.display()
        ),
    )
    .unwrap();
    // Flag overrides the file's iteration count.
    let status = bin()
        .args(["--config", cfg.to_str().unwrap(), "--iterations", "3"])
        .status()
        .unwrap();
    assert!(status.success());
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(trace_text.lines().count(), 5, "3 iterations -> 4 rows + header");
}

#[test]
fn heightfield_run_keeps_boundary_on_domain() {
    let dir = tempfile::tempdir().unwrap();
    let m = shapes::plane_grid(9, 9, [0.0, 0.0], [1.0, 1.0]);
    let input = dir.path().join("grid.obj");
    mesh::save_obj(&m, &input, None).unwrap();
    let output = dir.path().join("out.obj");
    let status = bin()
        .args([
            "--input",
            input.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
            "--target",
            "hf-analytic:gaussian,0.4,0.15,0.5,0.5,0,0,1,1",
            "--alpha",
            "0.5",
            "--iterations",
            "25",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let out = mesh::load_obj(&output).unwrap();
    let eps = 1e-9;
    for (v, p) in out.positions().iter().enumerate() {
        assert!(p.x >= -eps && p.x <= 1.0 + eps && p.y >= -eps && p.y <= 1.0 + eps);
        if m.is_boundary_vertex(v) {
            let on_frame = p.x.abs() < eps
                || (p.x - 1.0).abs() < eps
                || p.y.abs() < eps
                || (p.y - 1.0).abs() < eps;
            assert!(on_frame, "boundary vertex {v} left the frame: {p}");
        }
    }
}
