use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lucenet::app::{cmd_crossval, cmd_filters, cmd_pretrain, cmd_saliency, cmd_synth, AppError, RunConfig};
use lucenet::data::Label;

/// Implant loosening detection on synthetic radiographs with a miniature DenseNet.
#[derive(Parser)]
#[command(name = "lucenet", version)]
struct Cli {
    /// key = value run configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides paths.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seed (overrides seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for cross-validation folds (overrides jobs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its manifest.
    Synth,
    /// Train the pretext backbone checkpoint.
    Pretrain,
    /// Run k-fold cross-validation for the configured regime(s).
    Crossval,
    /// Render a saliency heatmap for one image.
    Saliency {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Render activation-maximization panels for a conv layer.
    Filters {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `first`, `last` or a conv layer name.
        #[arg(long, default_value = "first")]
        layer: String,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    Ok(cfg)
}

fn init_log(cfg: &RunConfig) -> Result<(), AppError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| AppError::Runtime(format!("{}: {e}", cfg.out.display())))?;
    let path = cfg.out.join("run.log");
    let file = File::create(&path).map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(file)))
        .init();
    Ok(())
}

fn run(cli: &Cli) -> Result<(), AppError> {
    let cfg = resolve(cli)?;
    init_log(&cfg)?;
    log::info!("lucenet {} seed {}", env!("CARGO_PKG_VERSION"), cfg.seed);
    match &cli.command {
        Command::Synth => {
            let (manifest, images) = cmd_synth(&cfg)?;
            for label in [Label::Loose, Label::WellFixed] {
                println!("{} {}", label.as_str(), images.iter().filter(|i| i.label == label).count());
            }
            println!("manifest {}", manifest.display());
        }
        Command::Pretrain => {
            let (path, acc) = cmd_pretrain(&cfg)?;
            println!("backbone {} (pretext held-out accuracy {acc:.3})", path.display());
        }
        Command::Crossval => {
            let summary = cmd_crossval(&cfg)?;
            for (regime, auc) in &summary.mean_auc {
                println!("{regime} mean AUC {auc:.4}");
            }
            if let Some(line) = &summary.comparison {
                println!("{line}");
            }
        }
        Command::Saliency { checkpoint, image } => {
            let (path, overlap) = cmd_saliency(&cfg, checkpoint, image)?;
            println!("heatmap {}", path.display());
            if let Some(o) = overlap {
                println!("top-1% overlap with mask {o:.3}");
            }
        }
        Command::Filters { checkpoint, layer } => {
            let (path, panel) = cmd_filters(&cfg, checkpoint, layer)?;
            println!("panel {} ({} filters of {})", path.display(), panel.filters.len(), panel.layer);
        }
    }
    Ok(())
}

fn kind(e: &AppError) -> &'static str {
    match e {
        AppError::UnknownKey { .. } | AppError::Config(_) => "config",
        AppError::MissingInput { .. } => "missing_input",
        AppError::Fold { .. } => "fold",
        AppError::Runtime(_) => "runtime",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            let reason = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {reason}", kind(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
