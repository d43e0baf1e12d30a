//! Command-line front end: each subcommand runs one experiment family and
//! exits 0 exactly when every verdict passes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curvlab::ambient::AmbientSpace;
use curvlab::chart::{CatalogSurface, PerturbMode, ShapeKind};
use curvlab::convex::RandomBodyParams;
use curvlab::error::{Error, Result};
use curvlab::experiments::{
    run_conjecture, run_convergence, run_monotonicity, run_parallel_sweep, run_theorem2,
    run_verify_form, AmbientSpec, Scenario, SequenceSpec, SurfaceSpec, Tolerances,
};
use curvlab::hypersurface::Hypersurface;
use curvlab::measures::curvature_profile;
use curvlab::report::{emit_report, Report, ReportFormat};

/// Numerical laboratory for total mean curvatures of closed hypersurfaces in
/// euclidean and hyperbolic model spaces.
#[derive(Parser)]
#[command(name = "curvlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (JSON) replacing the subcommand's built-in default.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for report files; overrides the scenario's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report file format: csv, json, or svg.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    /// Override the seed of seeded surfaces, perturbations, and batches.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the quadrature order.
    #[arg(long, global = true)]
    quadrature_order: Option<usize>,
    /// Override the subcommand's primary tolerance: the final relative error
    /// for converge and theorem2, the allowed decrease for monotonic, the
    /// relative mismatch for verify-form.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Ambient space when no scenario file is given: euclidean or hyperbolic.
    #[arg(long, global = true, default_value = "euclidean")]
    ambient: String,
    /// Ambient dimension (2 or 3) when no scenario file is given.
    #[arg(long, global = true, default_value_t = 3)]
    dim: usize,
    /// Hyperbolic curvature scale when no scenario file is given.
    #[arg(long, global = true, default_value_t = 1.0)]
    curvature: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Print the curvature profile of one catalog surface, e.g.
    /// "ball:1.0", "ellipsoid:2,1,1", "superellipsoid:1,1,1,2", with an
    /// optional "+bumps:<amplitude>,<seed>" suffix.
    Measure { spec: String },
    /// Total curvatures along an offset grid, reported without verdicts.
    ParallelSweep,
    /// Convergence of total curvatures under mesh refinement or shrinking
    /// perturbations of a catalog surface.
    Converge,
    /// Monotonicity of total curvatures along an offset grid.
    Monotonic,
    /// Convergence of convex-hull curvature totals to the totals of the
    /// smooth surface the hull points sample.
    Theorem2,
    /// Top-order curvature totals of seeded random convex bodies against
    /// the unit-sphere total.
    Conjecture {
        /// Number of seeded bodies.
        #[arg(long, default_value_t = 3)]
        bodies: usize,
    },
    /// Pulled-back sphere-volume form against the top-order total on a
    /// standard battery of catalog surfaces.
    VerifyForm,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn ambient_from_flags(cli: &Cli) -> Result<AmbientSpec> {
    match cli.ambient.as_str() {
        "euclidean" => Ok(AmbientSpec::Euclidean { dim: cli.dim }),
        "hyperbolic" => Ok(AmbientSpec::Hyperbolic { dim: cli.dim, curvature: cli.curvature }),
        other => Err(Error::Config(format!(
            "unknown ambient {other:?}; expected euclidean or hyperbolic"
        ))),
    }
}

/// Load the scenario file or fall back to the built-in default, then apply
/// the global flag overrides.
fn load_scenario(cli: &Cli, default: Scenario) -> Result<Scenario> {
    let mut sc = match &cli.scenario {
        Some(path) => Scenario::from_path(path)?,
        None => default,
    };
    if let Some(order) = cli.quadrature_order {
        sc.quadrature_order = order;
    }
    if let Some(seed) = cli.seed {
        if let SurfaceSpec::Random { seed: s, .. } = &mut sc.surface {
            *s = seed;
        }
        if let SequenceSpec::Perturbation { seed: s, .. } = &mut sc.sequence {
            *s = seed;
        }
    }
    Ok(sc)
}

fn finish(cli: &Cli, report: &Report, out_dir: Option<&PathBuf>) -> Result<bool> {
    print!("{}", report.to_csv());
    if !report.verdicts.is_empty() {
        print!("{}", report.verdict_lines());
    }
    let dir = cli.out.as_ref().or(out_dir);
    if let Some(dir) = dir {
        let format: ReportFormat = cli.format.parse()?;
        for path in emit_report(report, format, dir)? {
            println!("wrote {}", path.display());
        }
    }
    let passed = report.passed();
    println!("result: {}", if passed { "PASS" } else { "FAIL" });
    Ok(passed)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Measure { spec } => {
            let space = ambient_from_flags(cli)?.build()?;
            let surface = parse_surface_spec(&space, spec)?;
            let order = cli.quadrature_order.unwrap_or(10);
            let profile = curvature_profile(&surface, order)?;
            println!("surface {}", surface.id);
            println!("r,value,error_estimate");
            for e in &profile.entries {
                println!("{},{},{}", e.r, e.value, e.error_estimate);
            }
            Ok(true)
        }
        Command::ParallelSweep => {
            let sc = load_scenario(cli, sweep_default(cli, "parallel-sweep")?)?;
            let report = run_parallel_sweep(&sc)?;
            finish(cli, &report, sc.out_dir.as_ref())
        }
        Command::Monotonic => {
            let mut sc = load_scenario(cli, sweep_default(cli, "monotonic")?)?;
            if let Some(tol) = cli.tol {
                sc.tolerances.monotone = tol;
            }
            let report = run_monotonicity(&sc)?;
            finish(cli, &report, sc.out_dir.as_ref())
        }
        Command::Converge => {
            let mut sc = load_scenario(cli, converge_default(cli)?)?;
            if let Some(tol) = cli.tol {
                sc.tolerances.final_rel = tol;
            }
            let report = run_convergence(&sc)?;
            finish(cli, &report, sc.out_dir.as_ref())
        }
        Command::Theorem2 => {
            let mut sc = load_scenario(cli, theorem2_default(cli)?)?;
            if let Some(tol) = cli.tol {
                sc.tolerances.final_rel = tol;
            }
            let report = run_theorem2(&sc)?;
            finish(cli, &report, sc.out_dir.as_ref())
        }
        Command::Conjecture { bodies } => {
            let space = ambient_from_flags(cli)?.build()?;
            let order = cli.quadrature_order.unwrap_or(10);
            let report = run_conjecture(
                &space,
                cli.seed.unwrap_or(1),
                *bodies,
                &RandomBodyParams::default(),
                order,
            )?;
            finish(cli, &report, None)
        }
        Command::VerifyForm => {
            let space = ambient_from_flags(cli)?.build()?;
            let order = cli.quadrature_order.unwrap_or(10);
            let report = run_verify_form(&space, order, cli.tol.unwrap_or(1e-4))?;
            finish(cli, &report, None)
        }
    }
}

fn sweep_default(cli: &Cli, id: &str) -> Result<Scenario> {
    Ok(Scenario {
        id: id.into(),
        ambient: ambient_from_flags(cli)?,
        surface: SurfaceSpec::Ball { radius: 1.0 },
        sequence: SequenceSpec::EpsGrid { start: 0.0, stop: 0.5, points: 11 },
        r_values: vec![],
        quadrature_order: 8,
        tolerances: Tolerances::default(),
        out_dir: None,
    })
}

fn converge_default(cli: &Cli) -> Result<Scenario> {
    let ambient = ambient_from_flags(cli)?;
    let euclidean3 = matches!(ambient, AmbientSpec::Euclidean { dim: 3 });
    Ok(Scenario {
        id: "converge".into(),
        ambient,
        surface: if euclidean3 {
            SurfaceSpec::Ellipsoid { semi: [2.0, 1.0, 1.0] }
        } else {
            SurfaceSpec::Ball { radius: 1.0 }
        },
        sequence: SequenceSpec::MeshRefinement { resolutions: vec![8, 16, 32, 64] },
        r_values: vec![],
        quadrature_order: 8,
        tolerances: Tolerances {
            reach_bound: if euclidean3 { Some(0.4) } else { None },
            ..Tolerances::default()
        },
        out_dir: None,
    })
}

fn theorem2_default(cli: &Cli) -> Result<Scenario> {
    let ambient = ambient_from_flags(cli)?;
    let counts = if cli.dim == 2 {
        vec![8, 16, 32, 64, 128, 256]
    } else {
        vec![12, 24, 48, 96]
    };
    Ok(Scenario {
        id: "theorem2".into(),
        ambient,
        surface: SurfaceSpec::Ball { radius: 1.0 },
        sequence: SequenceSpec::HullSamples { counts },
        r_values: vec![],
        quadrature_order: 8,
        tolerances: Tolerances::default(),
        out_dir: None,
    })
}

/// Parse "kind:params" with an optional "+bumps:amplitude,seed" suffix.
fn parse_surface_spec(space: &AmbientSpace, text: &str) -> Result<Hypersurface> {
    let (body, bumps) = match text.split_once("+bumps:") {
        Some((b, rest)) => (b, Some(rest)),
        None => (text, None),
    };
    let (kind_name, params) = body
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("surface spec {text:?} is missing ':'")))?;
    let nums: Vec<f64> = params
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {p:?} in surface spec")))
        })
        .collect::<Result<_>>()?;
    let (kind, label) = match (kind_name, nums.as_slice()) {
        ("ball", [r]) => (ShapeKind::Ball { radius: *r }, format!("ball(r={r})")),
        ("ellipsoid", [a, b, c]) => (
            ShapeKind::Ellipsoid { semi: [*a, *b, *c] },
            format!("ellipsoid({a},{b},{c})"),
        ),
        ("superellipsoid", [a, b, c, m]) => (
            ShapeKind::Superellipsoid { semi: [*a, *b, *c], m: *m as u32 },
            format!("superellipsoid({a},{b},{c};m={m})"),
        ),
        _ => {
            return Err(Error::Parse(format!(
                "unknown surface spec {text:?}; expected ball:<r>, ellipsoid:<a,b,c>, \
                 or superellipsoid:<a,b,c,m>"
            )))
        }
    };
    let surface =
        Hypersurface::catalog(CatalogSurface::new(*space, kind, space.origin(), &label)?);
    match bumps {
        None => Ok(surface),
        Some(rest) => {
            let (amp, seed) = rest
                .split_once(',')
                .ok_or_else(|| Error::Parse("bumps suffix needs amplitude,seed".into()))?;
            let amp: f64 =
                amp.parse().map_err(|_| Error::Parse(format!("bad amplitude {amp:?}")))?;
            let seed: u64 =
                seed.parse().map_err(|_| Error::Parse(format!("bad seed {seed:?}")))?;
            surface.perturb(amp, &PerturbMode::default(), seed)
        }
    }
}
