use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use dyndepth::balance::WeightMode;
use dyndepth::grid::PixelMask;
use dyndepth::harness::{self, io, RunConfig};
use dyndepth::optimizer::LossMode;

#[derive(Parser)]
#[command(
    version,
    about = "Self-supervised depth losses for dynamic scenes on synthetic triplets"
)]
struct Cli {
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    loss_mode: Option<LossArg>,
    #[arg(long, global = true, value_enum)]
    weight_mode: Option<WeightArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Baseline,
    Temporal,
    Distill,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    SumUp,
    Mlra,
}

#[derive(Subcommand)]
enum Command {
    /// Render scene triplets with ground truth.
    Simulate,
    /// Evaluate every loss term at a depth map (ground truth by default).
    Loss {
        #[arg(long)]
        depth: Option<PathBuf>,
    },
    /// Optimize the student depth and write metrics, traces and depth maps.
    Optimize,
    /// Metrics of a predicted depth file against a reference.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// PGM whose nonzero samples mark the evaluated pixels.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference loss gradients.
    Gradcheck {
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Run the six-variant ablation matrix.
    Ablate,
    /// Print the effective configuration.
    Config,
}

fn run_config(cli: &Cli) -> dyndepth::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(m) = cli.loss_mode {
        cfg.optim.loss_mode = match m {
            LossArg::Baseline => LossMode::Baseline,
            LossArg::Temporal => LossMode::Temporal,
            LossArg::Distill => LossMode::Distill,
            LossArg::Full => LossMode::Full,
        };
    }
    if let Some(w) = cli.weight_mode {
        cfg.optim.weight_mode = match w {
            WeightArg::SumUp => WeightMode::SumUp,
            WeightArg::Mlra => WeightMode::Mlra,
        };
    }
    cfg.check(cli.config.as_deref().unwrap_or(Path::new("<flags>")))?;
    Ok(cfg)
}

fn read_depth(path: &Path) -> dyndepth::Result<dyndepth::grid::DepthMap> {
    Ok(io::read_depth_pgm(path)?.0)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = run_config(cli)?;
    let stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Simulate => {
            for dir in harness::simulate(&cfg)? {
                println!("{}", dir.display());
            }
        }
        Command::Loss { depth } => {
            let d = depth.as_deref().map(read_depth).transpose()?;
            let row = harness::loss_report(&cfg, 0, d.as_ref())?;
            harness::write_rows(&[row], stdout)?;
        }
        Command::Optimize => {
            let rows = harness::run_scenario(&cfg)?;
            harness::write_rows(&rows, stdout)?;
        }
        Command::Eval { pred, gt, mask } => {
            let p = read_depth(pred)?;
            let g = read_depth(gt)?;
            let valid = match mask {
                Some(m) => {
                    let bytes = std::fs::read(m).with_context(|| format!("reading {}", m.display()))?;
                    io::decode_pgm16(&bytes, m)?.map(|v| *v != 0)
                }
                None => PixelMask::from_fn(g.width(), g.height(), |x, y| *g.get(x, y) > 0.0),
            };
            let report = harness::depth_metrics(&p, &g, &valid)?;
            harness::write_rows(&[report], stdout)?;
        }
        Command::Gradcheck { depth, samples, h } => {
            let d = depth.as_deref().map(read_depth).transpose()?;
            let check = harness::gradcheck_report(&cfg, 0, d.as_ref(), *samples, *h)?;
            println!(
                "checked {} skipped {} within 1e-3: {:.3}",
                check.checks.len(),
                check.skipped,
                check.fraction_within(1e-3)
            );
        }
        Command::Ablate => {
            let rows = harness::ablate(&cfg)?;
            harness::write_rows(&rows, stdout)?;
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<dyndepth::Error>().map_or(3, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
