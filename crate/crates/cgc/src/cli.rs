//! Command-line pipeline: build a frame cache, project surfaces out of
//! it, verify them against the numerical oracles, sweep over mu.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage or config error,
//! 3 runtime or construction failure.

use crate::dalembert::{self, GridSpec};
use crate::error::Error;
use crate::export::{self, FrameCache};
use crate::geometry;
use crate::loop_algebra::TruncationPolicy;
use crate::potentials::{self, PotentialPair};
use crate::projections::{self, ProjectionParams, SurfaceGrid};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser)]
#[command(name = "cgc", about = "Constant Gaussian curvature surfaces from loop group potentials", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the potentials and factorize the frame over the grid.
    Build(BuildArgs),
    /// Project surfaces out of a built frame cache.
    Project(ProjectArgs),
    /// Run the finite-difference oracles and check tolerances.
    Verify(ProjectArgs),
    /// Project and summarize curvature for a list of mu values.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Builtin potential name (revolution, amsler).
    #[arg(long)]
    potential: Option<String>,
    /// Potential config JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid size as NxM.
    #[arg(long, default_value = "101x101")]
    grid: String,
    /// Domain as a,b,c,d for [a,b] x [c,d]; defaults to the potential's.
    #[arg(long)]
    domain: Option<String>,
    /// Laurent truncation order.
    #[arg(long, default_value_t = 24)]
    max_degree: i32,
    /// Output directory (frame cache goes to <out>/frame.json).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Obj,
    Ply,
    Csv,
}

#[derive(Args)]
struct ProjectArgs {
    /// Directory holding frame.json; outputs land next to it.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Projection parameter(s); may repeat or be comma-separated.
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    /// Sym formula surface in E3.
    #[arg(long)]
    sym: bool,
    /// Scaled projection parameter(s).
    #[arg(long, value_delimiter = ',')]
    scaled: Vec<f64>,
    /// Flat-limit surface.
    #[arg(long)]
    flat: bool,
    /// Parallel surface at distance r of each --mu surface.
    #[arg(long)]
    parallel: Option<f64>,
    /// Mesh format.
    #[arg(long, value_enum, default_value_t = Format::Obj)]
    format: Format,
    /// Also write raw R4 positions as CSV.
    #[arg(long)]
    raw_r4: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// mu list; must be nonempty.
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Obj)]
    format: Format,
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::Schema { .. }
            | Error::TwistingViolation { .. }
            | Error::DegreeViolation { .. }
            | Error::UnknownBuiltin(_)
            | Error::DegenerateMu(_)
    )
}

fn exit_code(e: &Error) -> i32 {
    if usage_error(e) {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    if let Ok(threads) = std::env::var("CGC_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(args) => cmd_build(&args),
        Command::Project(args) => cmd_project(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_grid(text: &str) -> crate::error::Result<(usize, usize)> {
    let parts: Vec<&str> = text.split('x').collect();
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Config(format!("bad grid size {text:?}, expected NxM")))
    };
    if parts.len() != 2 {
        return Err(Error::Config(format!("bad grid size {text:?}, expected NxM")));
    }
    let (n_u, n_v) = (parse(parts[0])?, parse(parts[1])?);
    if n_u < 2 || n_v < 2 {
        return Err(Error::Config("grid: need at least 2 points per axis".into()));
    }
    if n_u > 2048 || n_v > 2048 {
        return Err(Error::Config("grid: at most 2048 points per axis".into()));
    }
    Ok((n_u, n_v))
}

fn parse_domain(text: &str) -> crate::error::Result<((f64, f64), (f64, f64))> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad domain {text:?}, expected a,b,c,d")))?;
    if vals.len() != 4 {
        return Err(Error::Config(format!("bad domain {text:?}, expected a,b,c,d")));
    }
    Ok(((vals[0], vals[1]), (vals[2], vals[3])))
}

fn load_potential(
    builtin: &Option<String>,
    config: &Option<PathBuf>,
) -> crate::error::Result<(PotentialPair, serde_json::Value)> {
    match (builtin, config) {
        (Some(name), None) => {
            let pair = potentials::builtin(name)?;
            let doc = potentials::to_config_json(&pair);
            Ok((pair, doc))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let parsed = potentials::parse_config(&text)?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            let doc = potentials::to_config_json(&parsed.pair);
            Ok((parsed.pair, doc))
        }
        _ => Err(Error::Config(
            "potential: give exactly one of --potential or --config".into(),
        )),
    }
}

fn cmd_build(args: &BuildArgs) -> crate::error::Result<i32> {
    let (pair, doc) = load_potential(&args.potential, &args.config)?;
    let (n_u, n_v) = parse_grid(&args.grid)?;
    let (u_range, v_range) = match &args.domain {
        Some(d) => parse_domain(d)?,
        None => (pair.domain.u, pair.domain.v),
    };
    if args.max_degree < 1 || args.max_degree > 128 {
        return Err(Error::Config("max-degree: expected 1..=128".into()));
    }
    let grid = GridSpec::new(u_range, v_range, n_u, n_v)?;
    let policy = TruncationPolicy::new(args.max_degree, 1e-10);
    let frame = dalembert::extended_frame(&pair, &grid, &policy)?;
    std::fs::create_dir_all(&args.out)?;
    FrameCache::new(&frame, doc).save(&args.out.join("frame.json"))?;
    println!(
        "built frame: grid {}x{}, max Birkhoff residual {:.3e}, off-big-cell points {}",
        n_u,
        n_v,
        frame.max_residual,
        frame.off_big_cell.len()
    );
    Ok(EXIT_OK)
}

fn load_cache(out: &Path) -> crate::error::Result<(dalembert::ExtendedFrame, PotentialPair)> {
    let path = out.join("frame.json");
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no frame cache at {}; run build first", path.display()),
        )));
    }
    let (frame, doc) = FrameCache::load(&path)?.into_frame()?;
    let parsed = potentials::parse_config(&doc.to_string())?;
    Ok((frame, parsed.pair))
}

struct Projection {
    name: String,
    surface: SurfaceGrid,
    /// rho for the diagnostics and the formula curvature, when defined.
    rho: f64,
    k_formula: Option<f64>,
}

fn collect_projections(
    args: &ProjectArgs,
    frame: &dalembert::ExtendedFrame,
    pair: &PotentialPair,
) -> crate::error::Result<Vec<Projection>> {
    let mut out = Vec::new();
    for &mu in &args.mu {
        if mu == 1.0 {
            return Err(Error::Config("mu=1 degenerates; use --sym".into()));
        }
        let params = ProjectionParams::new(mu)?;
        let surface = projections::project_mu(frame, &params)?;
        if let Some(r) = args.parallel {
            let forms = geometry::fundamental_forms(&surface);
            let mut par = projections::parallel_surface(&surface, r)?;
            projections::mask_parallel_validity(&mut par, &forms.first, &forms.second, r);
            out.push(Projection {
                name: format!("parallel_{r}_mu_{mu}"),
                surface: par,
                rho: params.rho,
                k_formula: None,
            });
        }
        out.push(Projection {
            name: format!("mu_{mu}"),
            surface,
            rho: params.rho,
            k_formula: Some(params.curvature),
        });
    }
    if args.sym {
        out.push(Projection {
            name: "sym".into(),
            surface: projections::sym(frame)?,
            rho: 1.0,
            k_formula: Some(-1.0),
        });
    }
    for &mu in &args.scaled {
        out.push(Projection {
            name: format!("scaled_{mu}"),
            surface: projections::scaled_projection(frame, mu)?,
            rho: (mu + 1.0) / (mu - 1.0),
            k_formula: None,
        });
    }
    if args.flat {
        out.push(Projection {
            name: "flat".into(),
            surface: projections::flat_limit(pair, &frame.grid, &frame.policy)?,
            rho: 1.0,
            k_formula: Some(0.0),
        });
    }
    if out.is_empty() {
        return Err(Error::Config(
            "no projection requested; give --mu, --sym, --scaled or --flat".into(),
        ));
    }
    Ok(out)
}

fn write_mesh(dir: &Path, p: &Projection, format: Format, raw_r4: bool) -> crate::error::Result<PathBuf> {
    let ext = match format {
        Format::Obj => "obj",
        Format::Ply => "ply",
        Format::Csv => "csv",
    };
    let path = dir.join(format!("{}.{ext}", p.name));
    let mut w = BufWriter::new(File::create(&path)?);
    match format {
        Format::Obj => export::write_obj(&mut w, &p.surface)?,
        Format::Ply => export::write_ply(&mut w, &p.surface)?,
        Format::Csv => export::write_r4_csv(&mut w, &p.surface)?,
    }
    w.flush()?;
    if raw_r4 && format != Format::Csv {
        let mut w = BufWriter::new(File::create(dir.join(format!("{}.r4.csv", p.name)))?);
        export::write_r4_csv(&mut w, &p.surface)?;
        w.flush()?;
    }
    Ok(path)
}

fn cmd_project(args: &ProjectArgs) -> crate::error::Result<i32> {
    let (frame, pair) = load_cache(&args.out)?;
    let projections = collect_projections(args, &frame, &pair)?;
    for p in &projections {
        let path = write_mesh(&args.out, p, args.format, args.raw_r4)?;
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.threshold
    }
}

fn cmd_verify(args: &ProjectArgs) -> crate::error::Result<i32> {
    let (frame, pair) = load_cache(&args.out)?;
    let projections = collect_projections(args, &frame, &pair)?;
    let mut checks = vec![Check {
        name: "birkhoff residual".into(),
        value: frame.max_residual,
        threshold: 1e-10,
    }];
    let margin = 3;
    for p in &projections {
        let report = geometry::diagnostics(&p.surface, p.rho);
        let mask = geometry::regular_interior_mask(&report, margin);
        let sel = |vals: &[f64]| {
            geometry::median(
                vals.iter()
                    .zip(&mask)
                    .filter(|(_, m)| **m)
                    .map(|(v, _)| *v),
            )
        };
        if let Some(k) = p.k_formula {
            let median_k = sel(&report.k_est);
            let scale = k.abs().max(1.0);
            checks.push(Check {
                name: format!("{}: median curvature vs {k}", p.name),
                value: (median_k - k).abs() / scale,
                threshold: if k == 0.0 { 1e-3 } else { 0.01 },
            });
        }
        checks.push(Check {
            name: format!("{}: harmonicity residual", p.name),
            value: sel(&report.res_harmonic),
            threshold: 1e-2,
        });
        checks.push(Check {
            name: format!("{}: Codazzi residual", p.name),
            value: sel(&report.res_codazzi_u).max(sel(&report.res_codazzi_v)),
            threshold: 1e-2,
        });
        let csv_path = args.out.join(format!("{}.diagnostics.csv", p.name));
        let mut w = BufWriter::new(File::create(&csv_path)?);
        report.write_csv(&mut w)?;
        w.flush()?;
        println!("wrote {}", csv_path.display());
    }
    let mut failed = false;
    for c in &checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        println!("{status}  {}  ({:.3e} <= {:.1e})", c.name, c.value, c.threshold);
        failed |= !c.passed();
    }
    Ok(if failed { EXIT_VERIFY } else { EXIT_OK })
}

fn cmd_sweep(args: &SweepArgs) -> crate::error::Result<i32> {
    if args.mu.is_empty() {
        return Err(Error::Config("sweep: --mu list must be nonempty".into()));
    }
    let (frame, _pair) = load_cache(&args.out)?;
    println!("mu,K_formula,K_est_median");
    for &mu in &args.mu {
        if mu == 1.0 {
            return Err(Error::Config("mu=1 degenerates; use --sym".into()));
        }
        let params = ProjectionParams::new(mu)?;
        let surface = projections::project_mu(&frame, &params)?;
        let p = Projection {
            name: format!("mu_{mu}"),
            surface,
            rho: params.rho,
            k_formula: Some(params.curvature),
        };
        write_mesh(&args.out, &p, args.format, false)?;
        let report = geometry::diagnostics(&p.surface, p.rho);
        let mask = geometry::regular_interior_mask(&report, 3);
        let median_k = geometry::median(
            report
                .k_est
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| *v),
        );
        println!("{mu},{},{median_k}", params.curvature);
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_domain_parsing() {
        assert_eq!(parse_grid("101x51").unwrap(), (101, 51));
        assert!(parse_grid("1x5").is_err());
        assert!(parse_grid("4000x4000").is_err());
        assert!(parse_grid("10").is_err());
        let ((a, b), (c, d)) = parse_domain("0,2,-1,1").unwrap();
        assert_eq!((a, b, c, d), (0.0, 2.0, -1.0, 1.0));
        assert!(parse_domain("0,2").is_err());
    }

    #[test]
    fn usage_errors_map_to_exit_2() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::UnknownBuiltin("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::DegenerateMu(1.0)), EXIT_USAGE);
        assert_eq!(
            exit_code(&Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "x"))),
            EXIT_RUNTIME
        );
    }
}
