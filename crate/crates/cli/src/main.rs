//! Command-line driver: load mesh -> run flow -> save mesh + reports.

mod config;

use anyhow::{Context, Result};
use clap::Parser;
use hrflow::{diagnostics, flow, mesh, metric};

use config::{Cli, RunConfig};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    let rc = RunConfig::resolve(cli)?;

    let input_mesh = mesh::load_obj(&rc.input)
        .with_context(|| format!("loading {}", rc.input.display()))?;

    let snapshot_stem = rc.output.with_extension("");
    let snapshot_every = rc.snapshot_every;
    let mut snapshot_error: Option<hrflow::Error> = None;
    let (positions, trace) = flow::run_flow_with(&input_mesh, &rc.target, &rc.flow, |state| {
        if snapshot_every > 0 && state.iteration % snapshot_every == 0 && snapshot_error.is_none() {
            let path = snapshot_stem.with_file_name(format!(
                "{}_iter{}.obj",
                snapshot_stem.file_name().unwrap_or_default().to_string_lossy(),
                state.iteration
            ));
            let snap = input_mesh
                .with_positions(state.positions.clone())
                .and_then(|m| mesh::save_obj(&m, &path, None));
            if let Err(e) = snap {
                snapshot_error = Some(e);
            }
        }
    })
    .context("flow failed")?;
    if let Some(e) = snapshot_error {
        return Err(e).context("writing snapshot");
    }

    // Final diagnostics are recomputed at the final positions.
    let final_mesh = input_mesh.with_positions(positions.clone())?;
    let normals = metric::vertex_normals(&final_mesh, &positions, &rc.target)?;
    let (metrics, _, _) = metric::compute_face_metrics(
        &final_mesh,
        &positions,
        &normals,
        rc.target.mode(),
        rc.flow.alpha,
        rc.flow.delta_scale,
        None,
    );
    let densities = diagnostics::face_densities(&final_mesh, &positions, &metrics);
    mesh::save_obj(&final_mesh, &rc.output, Some(&densities))
        .with_context(|| format!("writing {}", rc.output.display()))?;

    if let Some(path) = &rc.trace {
        trace
            .write_csv(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &rc.diagnostics {
        let table = diagnostics::face_table_csv(&final_mesh, &positions, &metrics, &rc.target);
        std::fs::write(path, table).with_context(|| format!("writing {}", path.display()))?;

        let ratios = diagnostics::aspect_ratios(&final_mesh, &positions, &metrics);
        let hist = diagnostics::histogram(
            &ratios,
            diagnostics::DEFAULT_HISTOGRAM_BINS,
            diagnostics::DEFAULT_HISTOGRAM_RANGE,
        );
        let hist_path = path.with_file_name(format!(
            "{}_aspect_hist.csv",
            path.file_stem().unwrap_or_default().to_string_lossy()
        ));
        std::fs::write(&hist_path, hist.to_csv())
            .with_context(|| format!("writing {}", hist_path.display()))?;
    }

    let last = trace.entries.last().expect("trace always has an entry");
    println!(
        "done: iterations={} energy={:.6e} flipped_faces={} density_cv={:.4} max_abs_sdf={:.3e}",
        last.iteration, last.energy, last.flipped_faces, last.density_cv, last.max_abs_sdf
    );
    Ok(())
}

/// `HR_THREADS` caps worker parallelism; unset uses all cores.
fn init_thread_pool() -> Result<()> {
    if let Ok(v) = std::env::var("HR_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("HR_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            anyhow::bail!("HR_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing thread pool")?;
    }
    Ok(())
}
