//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::constructor::{
    alpha_ode_residual, build_nonflat_target, integrate_alpha, interior_nodes, riccati_cross_check,
    verify_construction, ConstructionSpec,
};
use crate::frames::{frame_identity_report, random_frame_case, SubmersionFamily};
use crate::geometry::ProductMetric3;
use crate::hypersurface::{
    biharmonic_residuals_surface, cmc_classify, hopf_cylinder_residuals, vertical_cylinder,
    HopfCylinderSpec, SurfaceImmersion,
};
use crate::numkernel::{sample_grid, ChartPoint, DerivativeMode};
use crate::report::{grid_csv, reduce, sweep, write_atomic, Channel, ReportFile, ResidualReport};
use crate::submersion::{
    base_curvature, catalog_examples, hyperbolic_scan_residual, hyperbolic_uniqueness_scan,
    verify_submersion, SubmersionSpec,
};

#[derive(Debug, Parser)]
#[command(name = "biharm", about = "Biharmonic maps and surfaces in M^2 x R")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Catalog residuals and the frame identity suite.
    Verify(VerifyArgs),
    /// Dump curvature grids of the catalog.
    Curvature(CurvatureArgs),
    /// Integrate the angle equation and verify the warped submersion.
    Construct(ConstructArgs),
    /// Slope scan of the hyperbolic family.
    Scan(ScanArgs),
    /// Vertical cylinder over a geodesic circle, with the Hopf system.
    Surface(SurfaceArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Residual tolerance [default: 1e-6 analytic, 1e-3 fd]
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "analytic")]
    mode: DerivativeMode,
    /// Per-axis grid counts, `N` or `NxM`
    #[arg(long, default_value = "21")]
    grid: GridCounts,
    /// Report file (written atomically); stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Restrict to these case labels (`frames` selects the identity suite)
    #[arg(long = "case")]
    cases: Vec<String>,
    /// Random frame cases per family
    #[arg(long, default_value_t = 2)]
    frame_cases: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Directory for `axis1,axis2,r1,r2` grid dumps
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvatureArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "case")]
    cases: Vec<String>,
    /// Directory for the grid tables
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConstructArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4, allow_hyphen_values = true)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    alpha1: f64,
    /// Initial `alpha''/alpha'^2`
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    u0: f64,
    #[arg(long, default_value = "0:1", allow_hyphen_values = true)]
    yspan: Span,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Write the profile in columnar text form
    #[arg(long)]
    profile_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, default_value = "0.1:3", allow_hyphen_values = true)]
    range: Span,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[arg(long, allow_hyphen_values = true)]
    kg: f64,
    #[arg(long = "K", allow_hyphen_values = true)]
    k: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy)]
struct GridCounts([usize; 2]);

impl FromStr for GridCounts {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split('x').collect();
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad grid count {t:?}: {e}"))
        };
        let counts = match parts.as_slice() {
            [n] => [parse(n)?, parse(n)?],
            [n, m] => [parse(n)?, parse(m)?],
            _ => return Err(format!("grid must be N or NxM, got {s:?}")),
        };
        if counts.iter().any(|&c| c < 2) {
            return Err("grid counts must be at least 2".into());
        }
        Ok(Self(counts))
    }
}

#[derive(Debug, Clone, Copy)]
struct Span(f64, f64);

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected a:b, got {s:?}"))?;
        let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        if !(a < b) {
            return Err(format!("empty range {a}:{b}"));
        }
        Ok(Self(a, b))
    }
}

/// Validated run settings shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tolerance: f64,
    pub grid: [usize; 2],
    pub derivative_mode: DerivativeMode,
    pub output_path: Option<PathBuf>,
    pub cases: Vec<String>,
}

impl RunConfig {
    fn from_common(c: &Common, cases: Vec<String>) -> anyhow::Result<Self> {
        let tolerance = c.tol.unwrap_or(match c.mode {
            DerivativeMode::Analytic => 1e-6,
            DerivativeMode::Fd => 1e-3,
        });
        if !(tolerance > 0.0) {
            bail!("tolerance must be positive, got {tolerance}");
        }
        Ok(Self {
            tolerance,
            grid: c.grid.0,
            derivative_mode: c.mode,
            output_path: c.out.clone(),
            cases,
        })
    }

    fn selected(&self, label: &str) -> bool {
        self.cases.is_empty() || self.cases.iter().any(|c| c == label)
    }
}

/// Runs a command line and returns the process exit code: 0 when every verdict
/// passes, 1 on a failing verdict, 2 on argument or input errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<bool> {
    let (file, out) = match cmd {
        Command::Verify(a) => verify(a)?,
        Command::Curvature(a) => curvature(a)?,
        Command::Construct(a) => construct(a)?,
        Command::Scan(a) => scan(a)?,
        Command::Surface(a) => surface(a)?,
    };
    emit(&file, out.as_deref())?;
    Ok(file.all_passed())
}

fn emit(file: &ReportFile, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => file
            .write_atomic(p)
            .with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{}", file.to_json());
            Ok(())
        }
    }
}

fn detail(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("report details serialize")
}

fn selected_catalog(cfg: &RunConfig) -> anyhow::Result<Vec<SubmersionSpec>> {
    catalog_examples()
        .into_iter()
        .filter(|s| cfg.selected(&s.label))
        .map(|s| s.in_mode(cfg.derivative_mode).map_err(Into::into))
        .collect()
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn verify(a: VerifyArgs) -> anyhow::Result<(ReportFile, Option<PathBuf>)> {
    let cfg = RunConfig::from_common(&a.common, a.cases)?;
    let known = ["cosh4", "y4", "hyperbolic(-1)", "hyperbolic(-2)", "frames"];
    if let Some(bad) = cfg.cases.iter().find(|c| !known.contains(&c.as_str())) {
        bail!("unknown case {bad:?}; expected one of {known:?}");
    }
    let mut file = ReportFile::new("verify");
    let specs = selected_catalog(&cfg)?;
    let results = specs
        .par_iter()
        .map(|s| verify_submersion(s, cfg.grid, cfg.tolerance))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut classes = serde_json::Map::new();
    for (s, v) in specs.iter().zip(results) {
        if let Some(dir) = &a.csv_dir {
            let path = dir.join(format!("{}.csv", file_stem(&s.label)));
            write_atomic(&path, grid_csv(&v.rows)?.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        classes.insert(s.label.clone(), detail(v.class));
        // the catalog members are proper, so a harmonic verdict is a failure too
        let mut report = v.report;
        report.absorb(proper_channel(&s.label, v.max_kappa, cfg.tolerance));
        file.cases.push(report);
    }
    file.details.insert("classes".into(), classes.into());
    if cfg.selected("frames") {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let cases: Vec<_> = SubmersionFamily::ALL
            .iter()
            .flat_map(|&f| (0..a.frame_cases).map(move |i| (f, i)))
            .map(|(f, i)| random_frame_case(f, i, &mut rng))
            .collect();
        let reports = cases
            .par_iter()
            .map(|c| {
                let af = c.adapted(cfg.derivative_mode)?;
                frame_identity_report(&c.label, &af.frame, &af.data, &c.grid(3)?, cfg.tolerance)
            })
            .collect::<crate::Result<Vec<_>>>()?;
        file.cases.extend(reports);
    }
    Ok((file, cfg.output_path))
}

/// Channel that fails unless `kappa` exceeds `100 tol` somewhere.
fn proper_channel(label: &str, max_kappa: f64, tol: f64) -> ResidualReport {
    scalar_report(
        label,
        &[("properness deficit", (100.0 * tol - max_kappa).max(0.0))],
        tol,
    )
}

fn scalar_report(label: &str, values: &[(&str, f64)], tol: f64) -> ResidualReport {
    let channels = values
        .iter()
        .map(|(n, v)| Channel {
            name: (*n).to_string(),
            max_abs: v.abs(),
            at: None,
        })
        .collect();
    ResidualReport::from_channels(label, 1, channels, tol)
}

#[derive(Debug, Serialize)]
struct CurvatureRow {
    axis1: f64,
    axis2: f64,
    k_domain: f64,
    k_target: f64,
}

fn curvature(a: CurvatureArgs) -> anyhow::Result<(ReportFile, Option<PathBuf>)> {
    let cfg = RunConfig::from_common(&a.common, a.cases)?;
    let mut file = ReportFile::new("curvature");
    for s in selected_catalog(&cfg)? {
        let points = s.grid(cfg.grid)?;
        let k_dom = s
            .frame()
            .base_curvature()
            .cloned()
            .context("catalog frame without base curvature")?;
        let target = s
            .target_gauss
            .clone()
            .context("catalog spec without target curvature")?;
        let rows = points
            .par_iter()
            .map(|p| {
                Ok(CurvatureRow {
                    axis1: p.coord(0),
                    axis2: p.coord(1),
                    k_domain: k_dom.value(p)?,
                    k_target: base_curvature(s.data(), s.frame(), p)?,
                })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let report = sweep(&s.label, &points, cfg.tolerance, &["K^N - target"], |p| {
            Ok(vec![
                base_curvature(s.data(), s.frame(), p)? - target.value(p)?,
            ])
        })?;
        if let Some(dir) = &a.csv_dir {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            let path = dir.join(format!("{}-curvature.csv", file_stem(&s.label)));
            write_atomic(&path, &w.into_inner()?)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        file.cases.push(report);
    }
    Ok((file, cfg.output_path))
}

fn construct(a: ConstructArgs) -> anyhow::Result<(ReportFile, Option<PathBuf>)> {
    let cfg = RunConfig::from_common(&a.common, Vec::new())?;
    let alpha2 = a.u0 * a.alpha1 * a.alpha1;
    let profile = integrate_alpha(a.alpha0, a.alpha1, alpha2, (a.yspan.0, a.yspan.1), a.step)?;
    if let Some(p) = &a.profile_out {
        write_atomic(p, profile.to_text().as_bytes())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let nodes: Vec<f64> = interior_nodes(&profile).to_vec();
    let ode = nodes
        .iter()
        .map(|&y| alpha_ode_residual(&profile, y))
        .collect::<crate::Result<Vec<_>>>()?;
    let node_points: Vec<_> = nodes.iter().map(|&y| ChartPoint::new(&[y])).collect();
    let mut profile_report = reduce(
        "profile",
        &node_points,
        1e-5,
        &["alpha ode"],
        ode.into_iter().map(|r| vec![r]).collect(),
    )?;
    let riccati = riccati_cross_check(&profile, 4)?;
    profile_report.absorb(scalar_report(
        "profile",
        &[("riccati deviation", riccati)],
        1e-5,
    ));
    let built = build_nonflat_target(ConstructionSpec::canonical(profile.clone()))?;
    let spec = built.canonical.in_mode(cfg.derivative_mode)?;
    let v = verify_construction(&spec, cfg.grid, cfg.tolerance)?;
    let mut file = ReportFile::new("construct");
    file.cases.push(profile_report);
    file.cases.push(v.report);
    file.details.insert(
        "profile".into(),
        json!({
            "nodes": profile.len(),
            "y_range": [profile.range().0, profile.range().1],
            "truncated": profile.truncated,
            "error_estimate": profile.error_estimate,
        }),
    );
    file.details.insert("class".into(), detail(v.class));
    Ok((file, cfg.output_path))
}

fn scan(a: ScanArgs) -> anyhow::Result<(ReportFile, Option<PathBuf>)> {
    if !(a.tol > 0.0) {
        bail!("tolerance must be positive, got {}", a.tol);
    }
    let roots = hyperbolic_uniqueness_scan(a.c, (a.range.0, a.range.1), a.samples)?;
    let points: Vec<_> = roots.iter().map(|r| ChartPoint::new(&[r.slope])).collect();
    let residuals = roots
        .iter()
        .map(|r| vec![hyperbolic_scan_residual(a.c, r.slope)])
        .collect();
    let report = reduce(
        &format!("hyperbolic({})", a.c),
        &points,
        a.tol,
        &["r1 at root"],
        residuals,
    )?;
    let mut file = ReportFile::new("scan");
    file.cases.push(report);
    file.details.insert("roots".into(), detail(&roots));
    Ok((file, a.out))
}

fn surface(a: SurfaceArgs) -> anyhow::Result<(ReportFile, Option<PathBuf>)> {
    let cfg = RunConfig::from_common(&a.common, Vec::new())?;
    let mut file = ReportFile::new("surface");
    let hopf = HopfCylinderSpec::constant(a.kg, a.k);
    let (h1, h2) = hopf_cylinder_residuals(&hopf, 0.0)?;
    file.cases.push(scalar_report(
        "hopf",
        &[("r1", h1), ("r2", h2)],
        cfg.tolerance,
    ));
    file.details
        .insert("hopf_residuals".into(), json!([h1, h2]));
    let cyl = vertical_cylinder(a.kg, a.k)?;
    let cyl = SurfaceImmersion::new(
        cyl.map.clone().map(|f| f.in_mode(cfg.derivative_mode)),
        std::sync::Arc::new(ProductMetric3::product3(
            cyl.ambient.exponent().clone().in_mode(cfg.derivative_mode),
        )),
        cyl.uv_box,
    )?;
    let points = sample_grid(&cyl.uv_box, &cfg.grid)?;
    let residuals = sweep(
        "cylinder",
        &points,
        cfg.tolerance,
        &["scalar", "tangent"],
        |p| {
            let (s, t) = biharmonic_residuals_surface(&cyl, p)?;
            Ok(vec![s, t[0].abs().max(t[1].abs())])
        },
    )?;
    file.cases.push(residuals);
    let class = cmc_classify(&cyl, &points, cfg.tolerance)?;
    file.details
        .insert("classification".into(), detail(class.class));
    file.details
        .insert("mean_curvature".into(), json!(class.mean_curvature));
    file.details.insert(
        "radii".into(),
        json!([class.sphere_radius, class.circle_radius]),
    );
    Ok((file, cfg.output_path))
}
