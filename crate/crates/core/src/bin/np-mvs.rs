use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use np_mvs::evaluation::FusionParams;
use np_mvs::pipeline::{Mode, PipelineConfig};
use np_mvs::synth::{Preset, SynthOptions};
use np_mvs::workflow;
use np_mvs::{MvsError, Result};

#[derive(Parser)]
#[command(name = "np-mvs", version, about = "Multi-view stereo with non-parametric depth distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer a depth map for every view of a scene directory.
    Infer {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Flat JSON config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        levels: Option<usize>,
        /// Samples per level, finest first.
        #[arg(long, value_delimiter = ',')]
        hyps: Option<Vec<usize>>,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Print the five region errors of estimated against ground-truth depths.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Band threshold in percent of the depth range.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
    },
    /// Fuse the depth maps of a directory into an ASCII PLY cloud.
    Fuse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FusionParams::default().tau_depth)]
        tau: f64,
        #[arg(long, default_value_t = FusionParams::default().n_min)]
        nmin: usize,
    },
    /// Render a synthetic scene with ground truth.
    Synth {
        #[arg(long, default_value = "two-plane")]
        preset: Preset,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 5)]
        views: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Report the supervision terms of stored distributions per level.
    Losses {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

fn configure(
    config: Option<PathBuf>,
    levels: Option<usize>,
    hyps: Option<Vec<usize>>,
    views: Option<usize>,
    groups: Option<usize>,
    mode: Option<Mode>,
) -> Result<PipelineConfig> {
    let mut cfg = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(l) = levels {
        if l != cfg.levels && hyps.is_none() {
            return Err(MvsError::InvalidArgument("--levels needs a matching --hyps list".into()));
        }
        cfg.levels = l;
        cfg.loss_weights = vec![1.0; l];
    }
    if let Some(h) = hyps {
        cfg.levels = h.len();
        if cfg.loss_weights.len() != h.len() {
            cfg.loss_weights = vec![1.0; h.len()];
        }
        cfg.hyps = h;
    }
    cfg.views = views.unwrap_or(cfg.views);
    cfg.groups = groups.unwrap_or(cfg.groups);
    cfg.mode = mode.unwrap_or(cfg.mode);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Infer {
            scene,
            out,
            config,
            levels,
            hyps,
            views,
            groups,
            mode,
        } => {
            let cfg = configure(config, levels, hyps, views, groups, mode)?;
            let outputs = workflow::infer_dir(&scene, &out, &cfg)?;
            let valid: usize = outputs.iter().map(|o| o.depth.valid_count()).sum();
            println!(
                "{}",
                serde_json::json!({ "views": outputs.len(), "valid_pixels": valid, "out": out })
            );
        }
        Command::Eval { est, gt, theta } => {
            println!("{}", workflow::format_regions(&workflow::eval_dirs(&est, &gt, theta)?));
        }
        Command::Fuse { input, out, tau, nmin } => {
            let params = FusionParams {
                tau_depth: tau,
                n_min: nmin,
                ..FusionParams::default()
            };
            let n = workflow::fuse_dir(&input, &out, params)?;
            println!("{}", serde_json::json!({ "points": n, "out": out }));
        }
        Command::Synth {
            preset,
            size,
            views,
            out,
            seed,
            noise,
        } => {
            let opts = SynthOptions {
                preset,
                size,
                views,
                noise,
                seed,
            };
            workflow::synth_to_dir(&opts, &out)?;
            println!("{}", serde_json::json!({ "views": views, "size": size, "out": out }));
        }
        Command::Losses { est, gt } => {
            for view in workflow::losses_dirs(&est, &gt)? {
                println!("{}", serde_json::to_string(&view)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("NP_MVS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool that is already built keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
