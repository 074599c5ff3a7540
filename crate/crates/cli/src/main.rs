//! Batch driver: `ripa --problem dam-break --N 200 --mesh moving --out run/`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::info;
use ripa::{Error, MeshMode, ProblemConfig, ProblemId};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeshArg {
    Fixed,
    Moving,
}

#[derive(Debug, Parser)]
#[command(name = "ripa", version, about = "Moving-mesh DG solver for the Ripa model")]
struct Args {
    /// Config file of `key = value` lines; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name (see --list).
    #[arg(long)]
    problem: Option<String>,
    /// Number of elements.
    #[arg(long = "N", short = 'N')]
    n: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    tfinal: Option<f64>,
    #[arg(long, value_enum)]
    mesh: Option<MeshArg>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    mtvb: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot every this many steps.
    #[arg(long)]
    output_every: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
    /// List problem names and exit.
    #[arg(long)]
    list: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 2,
        "io" => 3,
        "mesh" | "basis" => 4,
        _ => 5,
    }
}

fn resolve(args: &Args) -> Result<ProblemConfig, Error> {
    let mut cfg = match (&args.config, &args.problem) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            ProblemConfig::from_text(&text)?
        }
        (None, Some(_)) => ProblemConfig::new(ProblemId::LakeStep),
        (None, None) => return Err(Error::Config("either --problem or --config is required".into())),
    };
    if let Some(p) = &args.problem {
        if ProblemId::parse(p) != Some(cfg.problem) || args.config.is_none() {
            cfg.set("problem", p)?;
        }
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(k) = args.degree {
        cfg.degree = k;
    }
    if let Some(t) = args.tfinal {
        cfg.t_final = t;
    }
    if let Some(m) = args.mesh {
        cfg.mesh = match m {
            MeshArg::Fixed => MeshMode::Fixed,
            MeshArg::Moving => MeshMode::Moving,
        };
    }
    if let Some(c) = args.cfl {
        cfg.cfl = c;
    }
    if let Some(m) = args.mtvb {
        cfg.m_tvb = m;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(e) = args.output_every {
        cfg.output_every = e;
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    if args.list {
        for id in ProblemId::ALL {
            println!("{}", id.name());
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match resolve(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            return ExitCode::from(exit_code(&e));
        }
    };
    if args.dry_run {
        print!("{}", cfg.to_text());
        return ExitCode::SUCCESS;
    }
    info!("running {} with N = {} ({} mesh)", cfg.problem.name(), cfg.n, cfg.mesh.name());
    match ripa::run::<f64>(cfg) {
        Ok(outcome) => {
            let sim = &outcome.sim;
            println!("t = {:.6e} steps = {} min_measure = {:.3e}", sim.t, sim.steps, sim.diag.min_measure);
            if let Some(errs) = &outcome.errors {
                print!("{}", errs.to_csv());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
