//! Run configuration: flag parsing, config-file merging, target grammar.
//!
//! Every config-file key mirrors a flag (`alpha=0.5` and `--alpha 0.5` are
//! interchangeable); explicit flags win over file values, which win over
//! defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use hrflow::targets::{AnalyticHeight, AnalyticSdf, GridSdf, Heightfield, Rect};
use hrflow::{FlowConfig, Mode, SolverKind, SurfaceTarget};

/// Optimize a triangle mesh to adaptively approximate a surface target.
#[derive(Debug, Parser, Default, Clone)]
#[command(name = "hrflow", version, about)]
pub struct Cli {
    /// Input mesh (Wavefront OBJ, triangles only).
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Output mesh path.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Target spec: sphere:R | ellipsoid:A,B,C | torus:R,r | gridsdf:PATH |
    /// heightfield:PATH | hf-analytic:NAME,PARAMS[,X0,Y0,X1,Y1]
    #[arg(long)]
    pub target: Option<String>,

    /// Ambient geometry; inferred from the target when omitted.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,

    /// Solver: diffusion | spring.
    #[arg(long, value_parser = parse_solver)]
    pub solver: Option<SolverKind>,

    /// Anisotropy exponent in [0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Diffusion time step (the spring solver always steps with 1).
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Iteration budget.
    #[arg(long)]
    pub iterations: Option<usize>,

    /// Scale on boundary-edge stiffness.
    #[arg(long = "boundary-weight")]
    pub boundary_weight: Option<f64>,

    /// Write `<output-stem>_iter<K>.obj` snapshots every K iterations.
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<usize>,

    /// Per-iteration trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Per-face diagnostics CSV path.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,

    /// key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "euclidean" => Ok(Mode::Euclidean),
        "isotropic" => Ok(Mode::Isotropic),
        other => Err(format!("unknown mode '{other}' (euclidean|isotropic)")),
    }
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    match s {
        "diffusion" => Ok(SolverKind::Diffusion),
        "spring" => Ok(SolverKind::Spring),
        other => Err(format!("unknown solver '{other}' (diffusion|spring)")),
    }
}

/// Fully resolved run parameters.
#[derive(Debug)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub target: SurfaceTarget,
    pub flow: FlowConfig,
    pub trace: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
    pub snapshot_every: usize,
}

impl RunConfig {
    /// Merge config-file values under the flags and validate everything.
    pub fn resolve(mut cli: Cli) -> Result<RunConfig> {
        if let Some(path) = &cli.config {
            let file = parse_config_file(path)
                .with_context(|| format!("config file {}", path.display()))?;
            merge_under(&mut cli, file)?;
        }

        let input = cli.input.ok_or_else(|| anyhow!("missing required --input"))?;
        let output = cli
            .output
            .ok_or_else(|| anyhow!("missing required --output"))?;
        let target_spec = cli
            .target
            .ok_or_else(|| anyhow!("missing required --target"))?;
        let target = parse_target(&target_spec)?;

        if let Some(mode) = cli.mode {
            if mode != target.mode() {
                bail!(
                    "--mode {:?} conflicts with target '{}' which is {:?}",
                    mode,
                    target_spec,
                    target.mode()
                );
            }
        }

        let alpha = cli.alpha.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&alpha) {
            bail!("alpha must be in [0, 1], got {alpha}");
        }
        let epsilon = cli.epsilon.unwrap_or(0.01);
        if epsilon <= 0.0 {
            bail!("epsilon must be positive, got {epsilon}");
        }
        let boundary_weight = cli.boundary_weight.unwrap_or(1.0);
        if boundary_weight < 0.0 {
            bail!("boundary weight must be nonnegative, got {boundary_weight}");
        }

        let flow = FlowConfig {
            solver: cli.solver.unwrap_or(SolverKind::Spring),
            alpha,
            epsilon,
            max_iterations: cli.iterations.unwrap_or(500),
            boundary_weight,
            ..FlowConfig::default()
        };
        Ok(RunConfig {
            input,
            output,
            target,
            flow,
            trace: cli.trace,
            diagnostics: cli.diagnostics,
            snapshot_every: cli.snapshot_every.unwrap_or(0),
        })
    }
}

/// Key/value pairs from a flat config file.
fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value, got '{line}'", lineno + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Apply file pairs wherever the flag was not given on the command line.
fn merge_under(cli: &mut Cli, pairs: Vec<(String, String)>) -> Result<()> {
    for (key, value) in pairs {
        match key.as_str() {
            "input" => set_if_unset(&mut cli.input, PathBuf::from(&value)),
            "output" => set_if_unset(&mut cli.output, PathBuf::from(&value)),
            "target" => set_if_unset(&mut cli.target, value.clone()),
            "mode" => {
                let v = parse_mode(&value).map_err(|e| anyhow!(e))?;
                set_if_unset(&mut cli.mode, v);
            }
            "solver" => {
                let v = parse_solver(&value).map_err(|e| anyhow!(e))?;
                set_if_unset(&mut cli.solver, v);
            }
            "alpha" => set_num(&mut cli.alpha, &key, &value)?,
            "epsilon" => set_num(&mut cli.epsilon, &key, &value)?,
            "iterations" => set_num(&mut cli.iterations, &key, &value)?,
            "boundary-weight" => set_num(&mut cli.boundary_weight, &key, &value)?,
            "snapshot-every" => set_num(&mut cli.snapshot_every, &key, &value)?,
            "trace" => set_if_unset(&mut cli.trace, PathBuf::from(&value)),
            "diagnostics" => set_if_unset(&mut cli.diagnostics, PathBuf::from(&value)),
            other => bail!("unknown config key '{other}'"),
        }
    }
    Ok(())
}

fn set_if_unset<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn set_num<T: std::str::FromStr>(slot: &mut Option<T>, key: &str, value: &str) -> Result<()> {
    if slot.is_none() {
        let v = value
            .parse()
            .map_err(|_| anyhow!("bad value '{value}' for key '{key}'"))?;
        *slot = Some(v);
    }
    Ok(())
}

/// Parse the target mini-grammar.
pub fn parse_target(spec: &str) -> Result<SurfaceTarget> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("bad number '{t}' in target '{spec}'"))
            })
            .collect()
    };
    match kind {
        "sphere" => {
            let p = nums(rest)?;
            if p.len() != 1 || p[0] <= 0.0 {
                bail!("sphere:R needs one positive radius, got '{spec}'");
            }
            Ok(SurfaceTarget::Analytic(AnalyticSdf::Sphere {
                center: hrflow::Point3::origin(),
                radius: p[0],
            }))
        }
        "ellipsoid" => {
            let p = nums(rest)?;
            if p.len() != 3 || p.iter().any(|&v| v <= 0.0) {
                bail!("ellipsoid:A,B,C needs three positive radii, got '{spec}'");
            }
            Ok(SurfaceTarget::Analytic(AnalyticSdf::Ellipsoid {
                center: hrflow::Point3::origin(),
                radii: hrflow::Vec3::new(p[0], p[1], p[2]),
            }))
        }
        "torus" => {
            let p = nums(rest)?;
            if p.len() != 2 || p.iter().any(|&v| v <= 0.0) {
                bail!("torus:R,r needs two positive radii, got '{spec}'");
            }
            Ok(SurfaceTarget::Analytic(AnalyticSdf::Torus {
                center: hrflow::Point3::origin(),
                major: p[0],
                minor: p[1],
            }))
        }
        "gridsdf" => {
            if rest.is_empty() {
                bail!("gridsdf:PATH needs a file path");
            }
            Ok(SurfaceTarget::Grid(GridSdf::load(rest)?))
        }
        "heightfield" => {
            if rest.is_empty() {
                bail!("heightfield:PATH needs a file path");
            }
            Ok(SurfaceTarget::Heightfield(Heightfield::load(rest)?))
        }
        "hf-analytic" => parse_analytic_heightfield(spec, rest),
        other => bail!("unknown target kind '{other}' in '{spec}'"),
    }
}

/// `NAME[,params][,x0,y0,x1,y1]`; the domain defaults to [-1,1]^2.
fn parse_analytic_heightfield(spec: &str, rest: &str) -> Result<SurfaceTarget> {
    let mut parts = rest.split(',');
    let name = parts.next().unwrap_or("");
    let params: Vec<f64> = parts
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad number '{t}' in target '{spec}'"))
        })
        .collect::<Result<_>>()?;

    let arity = match name {
        "flat" => 0,
        "ramp" => 2,
        "paraboloid" => 2,
        "gaussian" => 4,
        "waves" => 3,
        other => bail!("unknown analytic heightfield '{other}' in '{spec}'"),
    };
    let domain = match params.len() {
        n if n == arity => Rect::new(hrflow::Point2::new(-1.0, -1.0), hrflow::Point2::new(1.0, 1.0)),
        n if n == arity + 4 => {
            let d = &params[arity..];
            if d[2] <= d[0] || d[3] <= d[1] {
                bail!("empty domain rectangle in '{spec}'");
            }
            Rect::new(hrflow::Point2::new(d[0], d[1]), hrflow::Point2::new(d[2], d[3]))
        }
        _ => bail!(
            "'{name}' takes {arity} parameters plus an optional x0,y0,x1,y1 domain, got '{spec}'"
        ),
    };
    let height = match name {
        "flat" => AnalyticHeight::Flat,
        "ramp" => AnalyticHeight::Ramp {
            gx: params[0],
            gy: params[1],
        },
        "paraboloid" => AnalyticHeight::Paraboloid {
            ax: params[0],
            by: params[1],
        },
        "gaussian" => AnalyticHeight::Gaussian {
            amplitude: params[0],
            sigma: params[1],
            center: hrflow::Point2::new(params[2], params[3]),
        },
        "waves" => AnalyticHeight::Waves {
            amplitude: params[0],
            kx: params[1],
            ky: params[2],
        },
        _ => unreachable!(),
    };
    Ok(SurfaceTarget::Heightfield(Heightfield::analytic(
        height, domain,
    )))
}
