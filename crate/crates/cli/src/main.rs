use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use stemfit::cloud::ply::{write_ply, PlyFormat};
use stemfit::cloud::{cloud_stats, CropReport};
use stemfit::metrics::{diameter_error, load_image, RenderQualityReport};
use stemfit_cli::config::{PipelineConfig, Source, DEFAULT_CONFIG};
use stemfit_cli::pipeline::{self, ensure_dir};
use stemfit_cli::{HarnessError, ReportFormat};

fn after_help() -> String {
    format!(
        "Exit status: 0 success, 2 configuration error, 3 I/O error, 4 fit or metrics failure.\n\n\
         Default configuration (pass a TOML file with --config; every key is optional):\n\n{DEFAULT_CONFIG}"
    )
}

#[derive(Debug, Parser)]
#[command(name = "stemfit", version, about = "Cylinder diameter estimation on synthetic and scanned point clouds")]
#[command(after_help = after_help())]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, env = "STEMFIT_OUT_DIR")]
    out: Option<PathBuf>,
    /// Report format. Metrics subcommands print plain text without it.
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the configured synthetic cloud and write it as PLY.
    Simulate {
        /// Write ASCII instead of binary little-endian PLY.
        #[arg(long)]
        ascii: bool,
    },
    /// Crop, fit and evaluate an existing PLY cloud.
    Fit { cloud: PathBuf },
    /// Stand-alone metric computations.
    Metrics {
        #[command(subcommand)]
        which: MetricsCommand,
    },
    /// Generate, crop, fit and evaluate as configured.
    Pipeline,
    /// Fit a PLY cloud and draw one slice with its circle and ellipse as SVG.
    Plot {
        cloud: PathBuf,
        /// Slice index; defaults to the middle (or diameter band) slice.
        #[arg(long)]
        slice: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum MetricsCommand {
    /// PSNR and SSIM of a rendering against a reference (PNG, PGM or PPM).
    Image { reference: PathBuf, test: PathBuf },
    /// Point-count reduction of a crop.
    Crop { before: usize, after: usize },
    /// Diameter error against ground truth (meters).
    Diameter { estimated: f64, ground_truth: f64 },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn print_value<T: serde::Serialize + std::fmt::Display>(value: &T, format: Option<ReportFormat>) {
    match format {
        None => println!("{value}"),
        Some(ReportFormat::Json) => println!("{}", serde_json::to_string_pretty(value).expect("serializable")),
        Some(ReportFormat::Csv) => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(value).expect("flat record");
            w.flush().expect("stdout");
        }
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Metrics { which } => {
            match which {
                MetricsCommand::Crop { before, after } => {
                    if after > before {
                        return Err(HarnessError::Config(format!("after ({after}) exceeds before ({before})")));
                    }
                    print_value(&CropReport::new(*before, *after), cli.format);
                }
                MetricsCommand::Diameter { estimated, ground_truth } => {
                    print_value(&diameter_error(*estimated, *ground_truth)?, cli.format);
                }
                MetricsCommand::Image { reference, test } => {
                    let report = RenderQualityReport::compute(&load_image(reference)?, &load_image(test)?)?;
                    print_value(&report, cli.format);
                }
            }
            Ok(())
        }
        Command::Simulate { ascii } => {
            let cfg = load_config(cli)?;
            if matches!(cfg.source, Source::External { .. }) {
                return Err(HarnessError::Config("simulate needs a surface or multi_scan source".into()));
            }
            cfg.validate()?;
            let cloud = pipeline::generate(&cfg)?;
            ensure_dir(&cfg.output.dir)?;
            let path = cfg.output.dir.join("cloud.ply");
            let mode = if *ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
            write_ply(&cloud, &path, mode).map_err(|e| HarnessError::io(&path, e))?;
            log::info!("wrote {} points to {}", cloud.len(), path.display());
            println!("{}", serde_json::to_string_pretty(&cloud_stats(&cloud)).expect("serializable"));
            Ok(())
        }
        Command::Pipeline => {
            let cfg = load_config(cli)?;
            let run = pipeline::run_detailed(&cfg)?;
            finish(&cfg, &run, cli.format)
        }
        Command::Fit { cloud } => {
            let mut cfg = load_config(cli)?;
            cfg.source = Source::External { path: cloud.clone() };
            let run = pipeline::run_detailed(&cfg)?;
            finish(&cfg, &run, cli.format)
        }
        Command::Plot { cloud, slice } => {
            let mut cfg = load_config(cli)?;
            cfg.source = Source::External { path: cloud.clone() };
            cfg.validate()?;
            let loaded = pipeline::load_cloud(cloud)?;
            let run = pipeline::evaluate(&cfg, loaded, Instant::now())?;
            let k = slice.unwrap_or_else(|| pipeline::overlay_slice(&run.fit, cfg.fit.diameter_band));
            ensure_dir(&cfg.output.dir)?;
            let path = cfg.output.dir.join("overlay.svg");
            pipeline::write_overlay(&run.fit, k, &path)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn finish(cfg: &PipelineConfig, run: &pipeline::PipelineRun, format: Option<ReportFormat>) -> Result<(), HarnessError> {
    let format = format.unwrap_or(ReportFormat::Json);
    let path = pipeline::write_outputs(cfg, run, format)?;
    log::info!("report written to {}", path.display());
    let d = &run.report.diameter;
    eprintln!(
        "diameter {:.4} m (ground truth {:.4} m, error {:.4} m, {:.2}%); {}",
        d.estimated, d.ground_truth, d.abs_error, d.pct_error, run.report.crop
    );
    if format == ReportFormat::Json {
        println!("{}", run.report.to_json());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
