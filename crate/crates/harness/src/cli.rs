//! The `wsg` command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use wsg_core::channel::{draw_random_scene, read_scene, synthesize_channel, write_scene, ChannelRealization};
use wsg_core::denoise::save_weights;
use wsg_core::estimate::{estimate_from_channel, evaluate, EstimateOptions, PipelineOutput};
use wsg_core::link::{apply_channel_awgn, generate_preamble, ls_estimate};
use wsg_core::matrix_io::{load_matrix, save_matrix};
use wsg_core::rng;
use wsg_core::transform::Dft2;
use wsg_core::CMatrix;

use crate::config::{resolve, DenoiserKind, ExperimentConfig, Overrides};
use crate::error::{HarnessError, Result};
use crate::montecarlo::{primary_denoiser, run_montecarlo, trial_seed, Sections};
use crate::{cnn, output};

#[derive(Debug, Parser)]
#[command(name = "wsg", version, about = "Channel signature estimation experiments")]
pub struct Cli {
    /// TOML experiment file (replaces the preset).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    pub preset: String,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one frame and write the scene, H and the LS estimate.
    Simulate {
        /// Trial index whose scene and noise streams are used.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Train the denoiser and save its weights.
    DenoiseTrain {
        /// Destination (default: <out>/denoiser.wdn).
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Image-equivalent SNR before and after each denoiser.
    DenoiseEval,
    /// Cluster-count error and compactness for ET/PT x k-means/LGC.
    ClusterEval,
    /// Run the estimation pipeline on one frame.
    Estimate {
        /// LS channel estimate to process instead of a simulated frame.
        #[arg(long, requires = "sigma2")]
        h_hat: Option<PathBuf>,
        /// Per-entry noise variance of the LS estimate.
        #[arg(long)]
        sigma2: Option<f64>,
        /// Scene file to score the estimate against.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Full sweep: denoising, clustering and estimation tables.
    Montecarlo,
    /// Print the resolved configuration as TOML.
    PresetDump,
}

/// Parse arguments and run; the return value is the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wsg: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli.config.as_deref(), &cli.preset, &cli.overrides)?;
    match &cli.command {
        Command::PresetDump => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Simulate { trial } => simulate(&cfg, *trial),
        Command::DenoiseTrain { save } => {
            let report = cnn::train(&cfg)?;
            let path = save.clone().unwrap_or_else(|| cfg.run.output_dir.join("denoiser.wdn"));
            ensure_parent(&path)?;
            save_weights(&path, &report.weights)?;
            println!("initial loss {:e}, final loss {:e}", report.initial_loss, report.final_loss);
            for (e, l) in report.epoch_losses.iter().enumerate() {
                println!("epoch {} loss {l:e}", e + 1);
            }
            println!("weights written to {}", path.display());
            Ok(())
        }
        Command::DenoiseEval => {
            sweep(&cfg, Sections { denoising: true, clustering: false, estimation: false }, cnn_if_any(&cfg)?)
        }
        Command::ClusterEval => {
            sweep(&cfg, Sections { denoising: false, clustering: true, estimation: false }, cnn_if_needed(&cfg)?)
        }
        Command::Montecarlo => sweep(&cfg, Sections::ALL, cnn_if_needed(&cfg)?),
        Command::Estimate { h_hat, sigma2, truth, trial } => {
            estimate(&cfg, h_hat.as_deref(), *sigma2, truth.as_deref(), *trial)
        }
    }
}

/// Weights for the denoising comparison: always when a file is configured
/// or the pipeline uses the CNN.
fn cnn_if_any(cfg: &ExperimentConfig) -> Result<Option<Arc<wsg_core::denoise::DenoiserWeights>>> {
    if cfg.cnn.weights.is_some() || cfg.pipeline.denoiser == DenoiserKind::Cnn {
        cnn::obtain(cfg).map(Some)
    } else {
        Ok(None)
    }
}

fn cnn_if_needed(cfg: &ExperimentConfig) -> Result<Option<Arc<wsg_core::denoise::DenoiserWeights>>> {
    if cfg.pipeline.denoiser == DenoiserKind::Cnn {
        cnn::obtain(cfg).map(Some)
    } else {
        Ok(None)
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
    }
    Ok(())
}

fn sweep(
    cfg: &ExperimentConfig,
    sections: Sections,
    weights: Option<Arc<wsg_core::denoise::DenoiserWeights>>,
) -> Result<()> {
    let result = run_montecarlo(cfg, weights, sections)?;
    for path in output::write_all(&result, &cfg.run.output_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// Scene, preamble and noisy frame of trial `trial` at the first SNR.
fn simulated_frame(cfg: &ExperimentConfig, trial: u64) -> Result<(ChannelRealization, CMatrix, CMatrix, f64)> {
    let sys = cfg.system_config();
    let seed = trial_seed(cfg.run.seed, trial);
    let mut scene_rng = rng::stream(seed, 0);
    let truth = draw_random_scene(&mut scene_rng, &sys, &cfg.scene_params());
    let h = synthesize_channel(&truth, &sys)?;
    let preamble = generate_preamble(&mut scene_rng, sys.subcarriers);
    let frame = apply_channel_awgn(&h, &preamble, cfg.run.snr_db[0], &mut rng::stream(seed, 1))?;
    let h_hat = ls_estimate(&frame, &preamble)?;
    Ok((truth, h, h_hat, frame.sigma2))
}

fn simulate(cfg: &ExperimentConfig, trial: u64) -> Result<()> {
    let dir = &cfg.run.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
    let (truth, h, h_hat, sigma2) = simulated_frame(cfg, trial)?;
    write_scene(&dir.join("scene.txt"), &truth)?;
    save_matrix(&dir.join("h.cmat"), &h)?;
    save_matrix(&dir.join("h_hat.cmat"), &h_hat)?;
    println!("paths {} snr_db {} sigma2 {sigma2:e}", truth.len(), cfg.run.snr_db[0]);
    println!("wrote scene.txt, h.cmat and h_hat.cmat to {}", dir.display());
    Ok(())
}

fn estimate(
    cfg: &ExperimentConfig,
    h_hat_path: Option<&Path>,
    sigma2: Option<f64>,
    truth_path: Option<&Path>,
    trial: u64,
) -> Result<()> {
    let sys = cfg.system_config();
    let (h_hat, sigma2, truth) = match h_hat_path {
        Some(p) => {
            let h_hat = load_matrix(p)?;
            if h_hat.dim() != sys.shape() {
                return Err(HarnessError::Config(format!(
                    "{} is {:?}, config expects {:?}",
                    p.display(),
                    h_hat.dim(),
                    sys.shape()
                )));
            }
            (h_hat, sigma2.unwrap_or(0.0), truth_path.map(read_scene).transpose()?)
        }
        None => {
            let (truth, _, h_hat, sigma2) = simulated_frame(cfg, trial)?;
            (h_hat, sigma2, Some(truth))
        }
    };
    let weights = cnn_if_needed(cfg)?;
    let opts = EstimateOptions {
        denoiser: primary_denoiser(cfg, weights.as_ref())?,
        threshold: cfg.threshold(cfg.pipeline.threshold),
        clusterer: cfg.clusterer(cfg.pipeline.clusterer),
        r_m: cfg.pipeline.r_m,
        r_n: cfg.pipeline.r_n,
        compensate: true,
        sic: cfg.pipeline.sic,
    };
    let dft = Dft2::new(sys.antennas, sys.subcarriers);
    let out: PipelineOutput = estimate_from_channel(h_hat, sigma2.sqrt(), &sys, &dft, &opts)?;
    let dir = &cfg.run.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
    };
    write("signatures.csv", out.signature_csv())?;
    write("dataset.csv", out.dataset.to_csv(Some(&out.clustering)))?;
    print!("{}", out.signature_csv());
    if let Some(truth) = truth {
        let report = evaluate(&truth, &out, cfg.pipeline.gate_bins, &sys);
        let c = report.counts;
        println!(
            "L {} L_hat {} N_F {} N_miss {} nmse {} gain_nmse {}",
            c.l,
            c.l_hat,
            c.n_false,
            c.n_miss,
            report.nmse.map_or("-".into(), |v| format!("{v:e}")),
            report.gain_nmse.map_or("-".into(), |v| format!("{v:e}"))
        );
    }
    Ok(())
}
