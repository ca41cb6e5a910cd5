use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bitrack::analysis::{render, theory_report, Prepared};
use bitrack::engine::{run_with_model, RateFit};
use bitrack::{prepare, Error, RunConfig};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod export;
mod svg;

#[derive(Parser)]
#[command(name = "bitrack", version, about = "One-bit leader-follower consensus tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the topology and print its Laplacian and spectrum.
    CheckTopology(Source),
    /// Print the theory report (constants, conditions, rate class) as JSON.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and write metrics.csv, trajectories.csv, report.json and plots.svg.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Simulate and fit log-log slopes of the error metrics.
    Rates {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        k_min: Option<u64>,
        #[arg(long)]
        k_max: Option<u64>,
    },
    /// Run a built-in experiment (paper-crs, paper-brs).
    Reproduce {
        preset: String,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Use a built-in configuration instead of a file.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Clone)]
struct RunOpts {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_svg: bool,
}

enum Failure {
    Invalid(String),
    Diverged(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. }
            | Error::NoRootedSpanningTree
            | Error::Defective { .. }
            | Error::NotHurwitz(_)
            | Error::Dimension(_) => Failure::Invalid(e.to_string()),
            Error::Diverged { .. } | Error::StateBound { .. } => Failure::Diverged(e.to_string()),
            Error::IllConditioned(_) | Error::Numerical(_) => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load(source: &Source) -> Result<(RunConfig, Option<String>), Failure> {
    match (&source.config, &source.preset) {
        (Some(path), _) => Ok((RunConfig::from_path(path)?, None)),
        (None, Some(name)) => Ok((bitrack::preset(name)?, Some(name.clone()))),
        (None, None) => Err(Failure::Invalid("give --config PATH or --preset NAME".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::CheckTopology(source) => check_topology(&source),
        Command::Analyze { source, out } => analyze(&source, out.as_deref()),
        Command::Run { source, opts } => load(&source).and_then(|(cfg, preset)| simulate(cfg, preset, &opts, None)),
        Command::Rates { source, opts, k_min, k_max } => {
            load(&source).and_then(|(cfg, preset)| simulate(cfg, preset, &opts, Some((k_min, k_max))))
        }
        Command::Reproduce { preset, opts } => bitrack::preset(&preset)
            .map_err(Failure::from)
            .and_then(|cfg| simulate(cfg, Some(preset), &opts, None)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: invalid configuration: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged(m)) => {
            eprintln!("error: run diverged: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn check_topology(source: &Source) -> Result<(), Failure> {
    let t = match &source.config {
        Some(path) => RunConfig::topology_from_path(path)?,
        None => load(source)?.0.topology()?,
    };
    println!("followers: {}", t.n_followers());
    println!("edges: {}", t.edge_index().len());
    println!("degrees: {:?}", (0..t.n_followers()).map(|i| t.degree(i)).collect::<Vec<_>>());
    println!("laplacian:");
    for row in t.laplacian_int() {
        println!("  {}", row.iter().map(|v| format!("{v:>3}")).collect::<Vec<_>>().join(" "));
    }
    if !t.has_spanning_tree_rooted_at_leader() {
        return Err(Error::NoRootedSpanningTree.into());
    }
    println!("spanning tree rooted at leader: yes");
    let sr = bitrack::reduce(&t.laplacian())?;
    for z in &sr.eigenvalues {
        println!("  eigenvalue {:.6} {:+.6}i", z.re, z.im);
    }
    Ok(())
}

fn print_table(p: &Prepared, report: &bitrack::TheoryReport) {
    let c = &p.constants;
    let rows: Vec<(&str, String)> = vec![
        ("lambda_H", format!("{:.6}", c.lambda_h)),
        ("h", format!("{:.6}", c.h)),
        ("lambda_phi", format!("{:.6}", c.lambda_phi)),
        ("lambda_W", format!("{:.6}", c.lambda_w)),
        ("lambda_L", format!("{:.6}", c.lambda_l)),
        ("lambda_M", c.lambda_m.map_or("-".into(), |v| format!("{v:.6}"))),
        ("d*", c.d_star.to_string()),
        ("f_B", format!("{:.6e}", c.f_b)),
        ("l1", format!("{:.6}", c.l1)),
        ("l1 (alternate)", format!("{:.6}", report.crs.l1_alternate)),
        ("beta threshold", format!("{:.6e}", report.crs.condition.threshold)),
        ("beta > threshold", report.crs.condition.satisfied.to_string()),
    ];
    for (k, v) in rows {
        eprintln!("{k:>18}  {v}");
    }
    if let Some(rate) = &report.crs.rate {
        eprintln!("{:>18}  {:.6}", "lambda_min(Q)", rate.lambda_min_q);
        eprintln!("{:>18}  {:?}", "rate class", rate.rate_class);
    }
    if let Some(b) = &report.brs {
        eprintln!("{:>18}  {:.6}", "||Q||", b.norm_q);
        eprintln!("{:>18}  {}", "feasible", b.feasible);
        if let Some(r) = &b.reason {
            eprintln!("{:>18}  {r}", "reason");
        }
    }
}

fn analyze(source: &Source, out: Option<&Path>) -> Result<(), Failure> {
    let (cfg, _) = load(source)?;
    let p = prepare(&cfg)?;
    let report = theory_report(&cfg, &p)?;
    let text = render(&report);
    print_table(&p, &report);
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("theory.json"), format!("{text}\n"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Fits {
    k_min: u64,
    k_max: u64,
    tracking_mse: Option<RateFit>,
    max_tracking_mse: Option<RateFit>,
    l1: Option<RateFit>,
    l2: Option<RateFit>,
    predicted_exponent: Option<f64>,
}

fn fits(m: &bitrack::MetricSeries, report: &bitrack::TheoryReport, window: (Option<u64>, Option<u64>)) -> Option<Fits> {
    let horizon = *m.k.last()?;
    let k_max = window.1.unwrap_or(horizon);
    let k_min = window.0.unwrap_or((k_max / 100).max(1));
    let fit = |v: &[f64]| bitrack::fit_rate(&m.k, v, k_min, k_max).ok();
    let mean_mse = export::mean_mse(m);
    Some(Fits {
        k_min,
        k_max,
        tracking_mse: fit(&mean_mse),
        max_tracking_mse: fit(&m.max_mse()),
        l1: fit(&m.l1),
        l2: fit(&m.l2),
        predicted_exponent: report.crs.rate.and_then(|r| r.rate_class.exponent()),
    })
}

fn simulate(
    cfg: RunConfig,
    preset: Option<String>,
    opts: &RunOpts,
    rate_window: Option<(Option<u64>, Option<u64>)>,
) -> Result<(), Failure> {
    let cfg = cfg.with_overrides(opts.seed, opts.replicas, opts.horizon);
    let p = prepare(&cfg)?;
    let report = theory_report(&cfg, &p)?;
    let theory = render(&report);
    let out = run_with_model(&p.experiment, &p.model)?;
    let fit = fits(&out.metrics, &report, rate_window.unwrap_or((None, None)));

    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)?;
        export::write_metrics(&dir.join("metrics.csv"), &out.metrics)?;
        export::write_trajectories(&dir.join("trajectories.csv"), &p.experiment, &out.trajectories)?;
        let run_report = export::RunReport {
            tool: "bitrack",
            version: env!("CARGO_PKG_VERSION"),
            seed: p.experiment.seed,
            config_hash: cfg.hash(),
            preset: preset.clone(),
            config: &cfg,
            theory: &serde_json::value::RawValue::from_string(theory.clone()).expect("rendered JSON is valid"),
            summary: &out.summary,
            logged_steps: out.metrics.k.len(),
            fits: fit.as_ref().map(|f| serde_json::to_value(f).expect("fits serialize")),
        };
        std::fs::write(dir.join("report.json"), format!("{}\n", serde_json::to_string_pretty(&run_report).expect("report serializes")))?;
        if !opts.no_svg {
            if let Some(traj) = out.trajectories.replicas.first() {
                std::fs::write(dir.join("plots.svg"), svg::four_panel(&p.experiment, traj))?;
            }
        }
    }

    let m = &out.metrics;
    let last = m.k.len() - 1;
    eprintln!(
        "{} replicas, horizon {}: L1 {:.6e} -> {:.6e}, L2 {:.6e} -> {:.6e}, max tracking MSE {:.6e} -> {:.6e}",
        m.replicas,
        m.k[last],
        m.l1[0],
        m.l1[last],
        m.l2[0],
        m.l2[last],
        m.max_mse()[0],
        m.max_mse()[last]
    );
    if rate_window.is_some() {
        match fit {
            Some(f) => println!("{}", serde_json::to_string_pretty(&f).expect("fits serialize")),
            None => return Err(Failure::Invalid("no logged steps to fit".into())),
        }
    }
    Ok(())
}
