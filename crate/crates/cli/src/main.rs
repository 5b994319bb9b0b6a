//! `warpgeo`: trace, classify, probe and coercivity runs from a metric file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use warpgeo::coercivity::{find_base_point, CoercivityOptions, Overall};
use warpgeo::continuation::Evidence;
use warpgeo::{
    classify_singularity, classify_system, coercivity_check_at, continue_along_with, parse_complex, parse_complex_list,
    parse_metric, parse_path, parse_synthetic, probe_completeness, CompletenessVerdict, GeodesicState,
    IntegratorConfig, ProbeOptions, SingularityKind, SingularityVerdict, WarpedMetric,
};

#[derive(Parser)]
#[command(name = "warpgeo", version, about = "Complex geodesics of meromorphic warped-product metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continue a geodesic along a path; exit 0 completed, 2 obstructed.
    Trace(TraceArgs),
    /// Classify a singularity of a geodesic or of a synthetic system.
    Classify(ClassifyArgs),
    /// Probe geodesic completeness on a target grid; exit 0/2/3 for
    /// complete/incomplete/inconclusive.
    Probe(ProbeArgs),
    /// Check coercivity; exit 0/2/3 for coercive/not coercive/undetermined.
    Coercivity(CoercivityArgs),
}

#[derive(Args)]
struct Output {
    /// JSON report destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Initial {
    /// Metric JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Initial position, comma-separated complex numbers.
    #[arg(long)]
    start: String,
    /// Initial velocity du/dz.
    #[arg(long)]
    velocity: String,
    /// Initial parameter value.
    #[arg(long, default_value = "0")]
    z0: String,
    /// Integration tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    init: Initial,
    /// `;`-separated vertices and `arc:center:radius:from:to` legs.
    #[arg(long)]
    path: String,
    #[command(flatten)]
    out: Output,
    /// Also write the samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Metric JSON file (omit with --synthetic).
    #[arg(long, required_unless_present = "synthetic")]
    config: Option<PathBuf>,
    /// Initial position, comma-separated complex numbers.
    #[arg(long, requires = "config")]
    start: Option<String>,
    /// Initial velocity du/dz.
    #[arg(long, requires = "config")]
    velocity: Option<String>,
    /// Initial parameter value.
    #[arg(long, default_value = "0")]
    z0: String,
    /// Synthetic system: preset name or JSON.
    #[arg(long, conflicts_with = "config")]
    synthetic: Option<String>,
    /// Singular parameter value; otherwise found by tracing --path.
    #[arg(long)]
    at: Option<String>,
    /// Path to trace towards the obstruction.
    #[arg(long)]
    path: Option<String>,
    /// Integration tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    init: Initial,
    /// Comma-separated ring radii.
    #[arg(long)]
    grid_rings: Option<String>,
    /// Targets per ring.
    #[arg(long)]
    angles: Option<usize>,
    /// Detour retries per target.
    #[arg(long)]
    budget: Option<usize>,
    /// Skip classification of blocked targets.
    #[arg(long)]
    no_classify: bool,
    #[command(flatten)]
    out: Output,
    /// Also write the target statuses as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the grid as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CoercivityArgs {
    /// Metric JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Random first-integral tuples to sample.
    #[arg(long, default_value_t = 32)]
    tuples: usize,
    /// Seed for the tuple generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base point (default: searched).
    #[arg(long)]
    at: Option<String>,
    #[command(flatten)]
    out: Output,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let run = match cli.command {
        Command::Trace(a) => cmd_trace(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Probe(a) => cmd_probe(&a),
        Command::Coercivity(a) => cmd_coercivity(&a),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_metric(path: &Path) -> Result<WarpedMetric> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_metric(&text).with_context(|| format!("parsing {}", path.display()))
}

fn state(m: &WarpedMetric, z0: &str, start: &str, velocity: &str) -> Result<GeodesicState> {
    let z = parse_complex(z0).context("--z0")?;
    let u = parse_complex_list(start).context("--start")?;
    let v = parse_complex_list(velocity).context("--velocity")?;
    if u.len() != m.dim() || v.len() != m.dim() {
        bail!("--start and --velocity need {} components each", m.dim());
    }
    if !m.is_metrically_ordinary(&u) {
        bail!("start point is not metrically ordinary");
    }
    Ok(GeodesicState::new(z, u, v))
}

fn write(target: Option<&Path>, text: &str) -> Result<()> {
    match target {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<T: serde::Serialize>(out: &Output, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(out.out.as_deref(), &text)
}

fn cmd_trace(a: &TraceArgs) -> Result<u8> {
    let m = load_metric(&a.init.config)?;
    let s = state(&m, &a.init.z0, &a.init.start, &a.init.velocity)?;
    let path = parse_path(&a.path, s.z).context("--path")?;
    let rec = continue_along_with(&m, &s, &path, &IntegratorConfig::with_tol(a.init.tol))?;
    write_json(&a.out, &rec)?;
    if let Some(csv) = &a.csv {
        write(Some(csv), &rec.to_csv())?;
    }
    Ok(if rec.status.is_success() { 0 } else { 2 })
}

fn no_obstruction(location: C64) -> SingularityVerdict {
    SingularityVerdict {
        kind: SingularityKind::Regular,
        location,
        evidence: Evidence {
            note: Some("no obstruction found along the path".into()),
            ..Default::default()
        },
    }
}

fn cmd_classify(a: &ClassifyArgs) -> Result<u8> {
    let at = a.at.as_deref().map(parse_complex).transpose().context("--at")?;
    let cfg = IntegratorConfig::with_tol(a.tol);
    let verdict = if let Some(syn) = &a.synthetic {
        let p = parse_synthetic(syn).context("--synthetic")?;
        warpgeo::geodesic::check_tol(a.tol)?;
        let start = p.start();
        match (at, &a.path) {
            (Some(z), _) => classify_system(&p.system, &start, z, &cfg),
            (None, Some(text)) => {
                let path = parse_path(text, p.z0).context("--path")?;
                let tr = warpgeo::continuation::continue_system(&p.system, &start, &path, &cfg);
                match tr.status.location() {
                    Some(z) => classify_system(&p.system, &start, z, &cfg),
                    None => no_obstruction(path.end()),
                }
            }
            (None, None) => classify_system(&p.system, &start, p.z_star, &cfg),
        }
    } else {
        let config = a.config.as_deref().expect("clap requires --config");
        let (Some(start), Some(velocity)) = (&a.start, &a.velocity) else {
            bail!("--start and --velocity are required with --config");
        };
        let m = load_metric(config)?;
        let s = state(&m, &a.z0, start, velocity)?;
        match (at, &a.path) {
            (Some(z), _) => classify_singularity(&m, &s, z, a.tol)?,
            (None, Some(text)) => {
                let path = parse_path(text, s.z).context("--path")?;
                let rec = continue_along_with(&m, &s, &path, &cfg)?;
                match rec.status.location() {
                    Some(z) => classify_singularity(&m, &s, z, a.tol)?,
                    None => no_obstruction(path.end()),
                }
            }
            (None, None) => bail!("give --at or --path to locate the singularity"),
        }
    };
    write_json(&a.out, &verdict)?;
    Ok(0)
}

fn cmd_probe(a: &ProbeArgs) -> Result<u8> {
    let m = load_metric(&a.init.config)?;
    let s = state(&m, &a.init.z0, &a.init.start, &a.init.velocity)?;
    let mut opts = ProbeOptions {
        tol: a.init.tol,
        classify: !a.no_classify,
        ..Default::default()
    };
    if let Some(r) = &a.grid_rings {
        opts.rings = r
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .context("--grid-rings")?;
        if opts.rings.is_empty() || opts.rings.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            bail!("--grid-rings needs positive radii");
        }
    }
    if let Some(n) = a.angles {
        if n == 0 {
            bail!("--angles must be positive");
        }
        opts.angles = n;
    }
    if let Some(b) = a.budget {
        opts.budget = b;
    }
    let report = probe_completeness(&m, &s, &opts)?;
    write_json(&a.out, &report)?;
    if let Some(csv) = &a.csv {
        write(Some(csv), &report.to_csv())?;
    }
    if let Some(svg) = &a.svg {
        write(Some(svg), &report.to_svg())?;
    }
    Ok(match report.summary.verdict {
        CompletenessVerdict::LooksComplete => 0,
        CompletenessVerdict::LooksIncomplete => 2,
        CompletenessVerdict::Inconclusive => 3,
    })
}

fn cmd_coercivity(a: &CoercivityArgs) -> Result<u8> {
    let m = load_metric(&a.config)?;
    let base = match &a.at {
        Some(t) => parse_complex_list(t).context("--at")?,
        None => find_base_point(&m)?,
    };
    if base.len() != m.dim() {
        bail!("--at needs {} components", m.dim());
    }
    let opts = CoercivityOptions {
        tuples: a.tuples,
        seed: a.seed,
        ..Default::default()
    };
    let v = coercivity_check_at(&m, &base, &opts)?;
    write_json(&a.out, &v)?;
    Ok(match v.overall {
        Overall::Coercive => 0,
        Overall::NotCoercive => 2,
        Overall::Undetermined => 3,
    })
}
