//! Experiment configuration: TOML files, named presets and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wsg_core::channel::SceneParams;
use wsg_core::cluster::{Clusterer, KMeansParams, LgcParams, Threshold};
use wsg_core::denoise::{Architecture, DatasetParams, TrainConfig};
use wsg_core::SystemConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub antennas: usize,
    pub subcarriers: usize,
    /// Omitted means half a carrier wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_spacing_m: Option<f64>,
    pub delay_spread_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub min_paths: usize,
    pub max_paths: usize,
    /// Non-positive disables the separation requirement.
    pub min_separation_bins: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserKind {
    None,
    Mean,
    Median,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Et,
    Pt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClustererKind {
    Lgc,
    Kmeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub denoiser: DenoiserKind,
    /// Window side of the mean and median filters.
    pub filter_kernel: usize,
    pub threshold: ThresholdKind,
    pub percentile: f64,
    pub clusterer: ClustererKind,
    pub lgc_k: usize,
    pub k_max: usize,
    pub r_m: usize,
    pub r_n: usize,
    pub sic: bool,
    /// Matching gate in DFT bins per dimension.
    pub gate_bins: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnSection {
    pub depth: usize,
    pub channels: usize,
    pub batch_norm: bool,
    pub noise_channel: bool,
    /// Pre-trained weights; when absent the network is trained first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    pub train_frames: usize,
    pub patches_per_frame: usize,
    pub patch: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub train_snr_min_db: f64,
    pub train_snr_max_db: f64,
    pub train_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub scene: SceneSection,
    pub run: RunSection,
    pub pipeline: PipelineSection,
    pub cnn: CnnSection,
}

pub const PRESETS: [&str; 3] = ["full", "desk", "smoke"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let desk = Self::desk();
        match name {
            "desk" => Ok(desk),
            "full" => {
                let full = SystemConfig::full_scale();
                Ok(Self {
                    system: SystemSection {
                        carrier_hz: full.carrier_hz,
                        bandwidth_hz: full.bandwidth_hz,
                        antennas: full.antennas,
                        subcarriers: full.subcarriers,
                        element_spacing_m: None,
                        delay_spread_s: full.delay_spread_s,
                    },
                    run: RunSection { trials: 1000, ..desk.run },
                    cnn: CnnSection { depth: 17, channels: 64, train_frames: 2000, epochs: 20, ..desk.cnn },
                    ..desk
                })
            }
            "smoke" => Ok(Self {
                system: SystemSection { antennas: 32, subcarriers: 32, delay_spread_s: 4e-9, ..desk.system },
                run: RunSection { trials: 5, ..desk.run },
                cnn: CnnSection {
                    depth: 4,
                    channels: 8,
                    train_frames: 20,
                    patches_per_frame: 2,
                    patch: 24,
                    epochs: 2,
                    ..desk.cnn
                },
                ..desk
            }),
            other => Err(HarnessError::Config(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    fn desk() -> Self {
        Self {
            system: SystemSection {
                carrier_hz: 58e9,
                bandwidth_hz: 0.1 * 58e9,
                antennas: 64,
                subcarriers: 64,
                element_spacing_m: None,
                delay_spread_s: 7.5e-9,
            },
            scene: SceneSection { min_paths: 2, max_paths: 4, min_separation_bins: 2.0 },
            run: RunSection {
                seed: 1,
                trials: 100,
                snr_db: vec![-25.0, -20.0, -15.0, -10.0, -5.0, 0.0],
                output_dir: PathBuf::from("wsg-out"),
                workers: 0,
            },
            pipeline: PipelineSection {
                denoiser: DenoiserKind::Cnn,
                filter_kernel: 3,
                threshold: ThresholdKind::Pt,
                percentile: 95.0,
                clusterer: ClustererKind::Lgc,
                lgc_k: 8,
                k_max: 8,
                r_m: 15,
                r_n: 15,
                sic: false,
                gate_bins: 3.0,
            },
            cnn: CnnSection {
                depth: 7,
                channels: 32,
                batch_norm: true,
                noise_channel: false,
                weights: None,
                train_frames: 600,
                patches_per_frame: 4,
                patch: 40,
                epochs: 8,
                batch_size: 8,
                learning_rate: 1e-3,
                lr_decay: 0.85,
                train_snr_min_db: -25.0,
                train_snr_max_db: 0.0,
                train_seed: 7,
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.system_config().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let s = &self.scene;
        if s.min_paths == 0 || s.min_paths > s.max_paths {
            return bad(format!("scene path range {}..={} is empty or starts at 0", s.min_paths, s.max_paths));
        }
        if self.run.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.run.snr_db.is_empty() || self.run.snr_db.iter().any(|v| !v.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        let p = &self.pipeline;
        if !(p.percentile > 0.0 && p.percentile < 100.0) {
            return bad(format!("percentile must lie in (0, 100), got {}", p.percentile));
        }
        if p.filter_kernel == 0 || p.filter_kernel.is_multiple_of(2) {
            return bad(format!("filter_kernel must be odd, got {}", p.filter_kernel));
        }
        if p.lgc_k < 3 {
            return bad(format!("lgc_k must be >= 3, got {}", p.lgc_k));
        }
        if p.k_max < 2 {
            return bad(format!("k_max must be >= 2, got {}", p.k_max));
        }
        if p.r_m < 2 || p.r_n < 2 {
            return bad("r_m and r_n must be >= 2".into());
        }
        if p.gate_bins.is_nan() || p.gate_bins <= 0.0 {
            return bad("gate_bins must be positive".into());
        }
        let c = &self.cnn;
        self.architecture().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if c.train_frames == 0 || c.epochs == 0 || c.batch_size == 0 || c.patches_per_frame == 0 {
            return bad("cnn training sizes must be >= 1".into());
        }
        if c.patch < 3 {
            return bad(format!("cnn patch must be >= 3, got {}", c.patch));
        }
        if [c.learning_rate, c.lr_decay].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return bad("cnn learning_rate and lr_decay must be positive".into());
        }
        if c.train_snr_min_db > c.train_snr_max_db {
            return bad("cnn training SNR range is reversed".into());
        }
        Ok(())
    }

    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        SystemConfig {
            carrier_hz: s.carrier_hz,
            bandwidth_hz: s.bandwidth_hz,
            antennas: s.antennas,
            subcarriers: s.subcarriers,
            element_spacing_m: s.element_spacing_m,
            delay_spread_s: s.delay_spread_s,
        }
    }

    pub fn scene_params(&self) -> SceneParams {
        let s = &self.scene;
        SceneParams {
            min_paths: s.min_paths,
            max_paths: s.max_paths,
            min_separation_bins: (s.min_separation_bins > 0.0).then_some(s.min_separation_bins),
        }
    }

    pub fn threshold(&self, kind: ThresholdKind) -> Threshold {
        match kind {
            ThresholdKind::Et => Threshold::Energy,
            ThresholdKind::Pt => Threshold::Percentile(self.pipeline.percentile),
        }
    }

    pub fn clusterer(&self, kind: ClustererKind) -> Clusterer {
        match kind {
            ClustererKind::Lgc => Clusterer::Lgc(LgcParams { k: self.pipeline.lgc_k, ..Default::default() }),
            ClustererKind::Kmeans => Clusterer::KMeans(KMeansParams {
                k_max: self.pipeline.k_max,
                seed: self.run.seed,
                ..Default::default()
            }),
        }
    }

    pub fn architecture(&self) -> Architecture {
        let c = &self.cnn;
        Architecture { depth: c.depth, channels: c.channels, batch_norm: c.batch_norm, noise_channel: c.noise_channel }
    }

    pub fn train_config(&self) -> TrainConfig {
        let c = &self.cnn;
        TrainConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            lr_decay: c.lr_decay,
            seed: c.train_seed,
            ..Default::default()
        }
    }

    pub fn dataset_params(&self) -> DatasetParams {
        DatasetParams {
            patch: Some(self.cnn.patch),
            patches_per_frame: self.cnn.patches_per_frame,
            scene: self.scene_params(),
        }
    }
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Master seed (defaults to $WSG_SEED, then the config value).
    #[arg(long, global = true, env = "WSG_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Comma-separated receive SNRs in dB.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub antennas: Option<usize>,
    #[arg(long, global = true)]
    pub subcarriers: Option<usize>,
    #[arg(long, global = true)]
    pub bandwidth_hz: Option<f64>,
    #[arg(long, global = true)]
    pub delay_spread_s: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub denoiser: Option<DenoiserKind>,
    #[arg(long, global = true, value_enum)]
    pub threshold: Option<ThresholdKind>,
    #[arg(long, global = true)]
    pub percentile: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub clusterer: Option<ClustererKind>,
    #[arg(long, global = true)]
    pub lgc_k: Option<usize>,
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    #[arg(long, global = true)]
    pub r_m: Option<usize>,
    #[arg(long, global = true)]
    pub r_n: Option<usize>,
    #[arg(long, global = true)]
    pub sic: Option<bool>,
    /// Pre-trained denoiser weights (WDN1 file).
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub train_frames: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = &self.$src {
                    $($dst)+ = v.clone();
                }
            };
        }
        set!(seed => cfg.run.seed);
        set!(trials => cfg.run.trials);
        set!(snr => cfg.run.snr_db);
        set!(out => cfg.run.output_dir);
        set!(workers => cfg.run.workers);
        set!(antennas => cfg.system.antennas);
        set!(subcarriers => cfg.system.subcarriers);
        set!(bandwidth_hz => cfg.system.bandwidth_hz);
        set!(delay_spread_s => cfg.system.delay_spread_s);
        set!(denoiser => cfg.pipeline.denoiser);
        set!(threshold => cfg.pipeline.threshold);
        set!(percentile => cfg.pipeline.percentile);
        set!(clusterer => cfg.pipeline.clusterer);
        set!(lgc_k => cfg.pipeline.lgc_k);
        set!(k_max => cfg.pipeline.k_max);
        set!(r_m => cfg.pipeline.r_m);
        set!(r_n => cfg.pipeline.r_n);
        set!(sic => cfg.pipeline.sic);
        if let Some(w) = &self.weights {
            cfg.cnn.weights = Some(w.clone());
        }
        set!(epochs => cfg.cnn.epochs);
        set!(train_frames => cfg.cnn.train_frames);
    }
}

/// Preset or file, then overrides, then validation.
pub fn resolve(config: Option<&Path>, preset: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(preset)?,
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
