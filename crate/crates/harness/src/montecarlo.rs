//! Seeded Monte Carlo sweeps over receive SNR.
//!
//! Trial `t` owns a ChaCha stream family keyed by a seed derived from the
//! master seed and `t`. Stream 0 draws the scene and the preamble; stream
//! `s + 1` draws the noise at the `s`-th SNR, so every SNR point and every
//! method sees the same scenes. Trials run on a rayon pool and are folded
//! in trial order, which makes the output independent of the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use wsg_core::channel::{draw_random_scene, synthesize_channel};
use wsg_core::cluster::{cluster_count_error, clustering_metric, ecm, Clusterer, Threshold};
use wsg_core::denoise::{image_equivalent_snr, relative_snr_gain, Denoiser, DenoiserWeights};
use wsg_core::estimate::{
    dmse, estimate_from_magnitudes, evaluate, path_error_proportions, EstimateOptions, PathCounts,
};
use wsg_core::link::{apply_channel_awgn, generate_preamble, ls_estimate};
use wsg_core::rng;
use wsg_core::transform::{magnitude, Dft2};

use crate::config::{ClustererKind, DenoiserKind, ExperimentConfig, ThresholdKind};
use crate::error::{HarnessError, Result};

/// Which parts of the sweep to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sections {
    pub denoising: bool,
    pub clustering: bool,
    pub estimation: bool,
}

impl Sections {
    pub const ALL: Self = Self { denoising: true, clustering: true, estimation: true };
}

/// The three estimation pipelines compared per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Configured denoiser with beam-squint compensation.
    Proposed,
    /// Same pipeline without denoising.
    NoDenoise,
    /// Configured denoiser, compensation skipped.
    SingleWideband,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Proposed, Variant::NoDenoise, Variant::SingleWideband];

    pub fn name(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::NoDenoise => "no-denoise",
            Self::SingleWideband => "single-wideband",
        }
    }
}

/// Threshold/clusterer combinations scored in the clustering section.
pub const CLUSTER_METHODS: [(ClustererKind, ThresholdKind); 4] = [
    (ClustererKind::Kmeans, ThresholdKind::Et),
    (ClustererKind::Kmeans, ThresholdKind::Pt),
    (ClustererKind::Lgc, ThresholdKind::Et),
    (ClustererKind::Lgc, ThresholdKind::Pt),
];

pub fn cluster_method_name(method: (ClustererKind, ThresholdKind)) -> &'static str {
    match method {
        (ClustererKind::Kmeans, ThresholdKind::Et) => "kmeans_et",
        (ClustererKind::Kmeans, ThresholdKind::Pt) => "kmeans_pt",
        (ClustererKind::Lgc, ThresholdKind::Et) => "lgc_et",
        (ClustererKind::Lgc, ThresholdKind::Pt) => "lgc_pt",
    }
}

/// One estimation run on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub snr_db: f64,
    pub denoiser: &'static str,
    pub threshold: String,
    pub clusterer: &'static str,
    pub counts: PathCounts,
    pub nmse: Option<f64>,
    pub dmse_term: Option<f64>,
    pub gain_nmse: Option<f64>,
}

pub const TRIAL_CSV_HEADER: &str = "seed,snr_db,denoiser,threshold,clusterer,L,L_hat,N_F,N_miss,nmse,dmse_term,gain_nmse";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        let c = &self.counts;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.snr_db,
            self.denoiser,
            self.threshold,
            self.clusterer,
            c.l,
            c.l_hat,
            c.n_false,
            c.n_miss,
            opt(self.nmse),
            opt(self.dmse_term),
            opt(self.gain_nmse)
        )
    }
}

/// Per-frame results at one SNR.
#[derive(Debug, Clone, Default)]
struct FrameOutcome {
    gamma_bd: f64,
    /// Aligned with [`MonteCarloResult::denoisers`].
    gamma_ad: Vec<f64>,
    /// `(AE, CM)` aligned with [`CLUSTER_METHODS`].
    clusters: Vec<(usize, f64)>,
    /// Aligned with [`Variant::ALL`].
    records: Vec<TrialRecord>,
}

/// Mean image-equivalent SNRs of one denoiser at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisingRow {
    pub snr_db: f64,
    pub denoiser: &'static str,
    pub gamma_bd: f64,
    pub gamma_ad: f64,
    pub relative_gain_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub snr_db: f64,
    pub method: &'static str,
    pub mae: f64,
    pub cm_mean: f64,
    pub cm_median: f64,
    pub ecm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRow {
    pub snr_db: f64,
    pub variant: Variant,
    pub dmse: f64,
    /// Trials without a single matched path (left out of the DMSE).
    pub dmse_skipped: usize,
    pub gain_nmse: f64,
    pub false_rate: f64,
    pub miss_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MonteCarloResult {
    pub snr_db: Vec<f64>,
    /// Denoisers compared in the denoising section.
    pub denoisers: Vec<&'static str>,
    pub denoising: Vec<DenoisingRow>,
    pub clustering: Vec<ClusterRow>,
    pub estimation: Vec<EstimationRow>,
    /// Trial records per variant, aligned with [`Variant::ALL`].
    pub trials: Vec<Vec<TrialRecord>>,
}

impl MonteCarloResult {
    pub fn cluster_row(&self, snr_db: f64, method: &str) -> Option<&ClusterRow> {
        self.clustering.iter().find(|r| r.snr_db == snr_db && r.method == method)
    }

    pub fn estimation_row(&self, snr_db: f64, variant: Variant) -> Option<&EstimationRow> {
        self.estimation.iter().find(|r| r.snr_db == snr_db && r.variant == variant)
    }

    pub fn denoising_row(&self, snr_db: f64, denoiser: &str) -> Option<&DenoisingRow> {
        self.denoising.iter().find(|r| r.snr_db == snr_db && r.denoiser == denoiser)
    }
}

/// Seed of trial `t` under `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The configured denoiser. A CNN needs `cnn` weights.
pub fn primary_denoiser(cfg: &ExperimentConfig, cnn: Option<&Arc<DenoiserWeights>>) -> Result<Denoiser> {
    let k = cfg.pipeline.filter_kernel;
    Ok(match cfg.pipeline.denoiser {
        DenoiserKind::None => Denoiser::None,
        DenoiserKind::Mean => Denoiser::Mean { kernel: k },
        DenoiserKind::Median => Denoiser::Median { kernel: k },
        DenoiserKind::Cnn => Denoiser::Cnn(
            cnn.cloned().ok_or_else(|| HarnessError::Config("denoiser = cnn needs trained weights".into()))?,
        ),
    })
}

struct Plan {
    sys: wsg_core::SystemConfig,
    scene: wsg_core::channel::SceneParams,
    dft: Dft2,
    primary: Denoiser,
    compared: Vec<Denoiser>,
    threshold: Threshold,
    clusterer: Clusterer,
    cluster_methods: Vec<(Threshold, Clusterer)>,
    sections: Sections,
}

/// Run the sweep. `cnn` supplies the network whenever the configured
/// denoiser is `cnn`; it is also added to the denoising comparison.
pub fn run_montecarlo(
    cfg: &ExperimentConfig,
    cnn: Option<Arc<DenoiserWeights>>,
    sections: Sections,
) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let k = cfg.pipeline.filter_kernel;
    let mut compared = Vec::new();
    if let Some(w) = &cnn {
        compared.push(Denoiser::Cnn(w.clone()));
    }
    compared.push(Denoiser::Median { kernel: k });
    compared.push(Denoiser::Mean { kernel: k });
    let plan = Plan {
        sys: cfg.system_config(),
        scene: cfg.scene_params(),
        dft: Dft2::new(cfg.system.antennas, cfg.system.subcarriers),
        primary: primary_denoiser(cfg, cnn.as_ref())?,
        compared,
        threshold: cfg.threshold(cfg.pipeline.threshold),
        clusterer: cfg.clusterer(cfg.pipeline.clusterer),
        cluster_methods: CLUSTER_METHODS.iter().map(|&(c, t)| (cfg.threshold(t), cfg.clusterer(c))).collect(),
        sections,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let trials: Vec<Vec<FrameOutcome>> = pool.install(|| {
        (0..cfg.run.trials as u64).into_par_iter().map(|t| run_trial(cfg, &plan, t)).collect::<Result<Vec<_>>>()
    })?;

    Ok(aggregate(cfg, &plan, &trials))
}

fn run_trial(cfg: &ExperimentConfig, plan: &Plan, trial: u64) -> Result<Vec<FrameOutcome>> {
    let seed = trial_seed(cfg.run.seed, trial);
    let sys = &plan.sys;
    let mut scene_rng = rng::stream(seed, 0);
    let truth = draw_random_scene(&mut scene_rng, sys, &plan.scene);
    let h = synthesize_channel(&truth, sys)?;
    let preamble = generate_preamble(&mut scene_rng, sys.subcarriers);
    let clean = magnitude(&plan.dft.to_delay_angle(&h)?);

    let mut out = Vec::with_capacity(cfg.run.snr_db.len());
    for (s, &snr) in cfg.run.snr_db.iter().enumerate() {
        let mut noise_rng = rng::stream(seed, s as u64 + 1);
        let frame = apply_channel_awgn(&h, &preamble, snr, &mut noise_rng)?;
        let h_hat = ls_estimate(&frame, &preamble)?;
        let sigma = frame.sigma2.sqrt();
        let g = plan.dft.to_delay_angle(&h_hat)?;
        let mut outcome = FrameOutcome::default();

        let need_primary = plan.sections.clustering || plan.sections.estimation;
        let g_primary = if need_primary { Some(plan.primary.denoise_magnitudes(&g, sigma)?) } else { None };

        if plan.sections.denoising {
            outcome.gamma_bd = image_equivalent_snr(&clean, &magnitude(&g));
            for d in &plan.compared {
                let den = match (&g_primary, d.name() == plan.primary.name()) {
                    (Some(gp), true) => gp.clone(),
                    _ => d.denoise_magnitudes(&g, sigma)?,
                };
                outcome.gamma_ad.push(image_equivalent_snr(&clean, &den));
            }
        }

        if plan.sections.clustering {
            let gp = g_primary.as_ref().expect("primary magnitudes");
            for (threshold, clusterer) in &plan.cluster_methods {
                let dataset = threshold.apply(gp)?;
                let coords = dataset.coords();
                let clustering = clusterer.run(&dataset);
                let cm = clustering_metric(&coords, dataset.geometry(), &clustering);
                outcome.clusters.push((cluster_count_error(clustering.l_hat, truth.len()), cm));
            }
        }

        if plan.sections.estimation {
            let gp = g_primary.as_ref().expect("primary magnitudes");
            for variant in Variant::ALL {
                let (magnitudes, denoiser, compensate) = match variant {
                    Variant::Proposed => (gp.clone(), &plan.primary, true),
                    Variant::NoDenoise => (magnitude(&g), &Denoiser::None, true),
                    Variant::SingleWideband => (gp.clone(), &plan.primary, false),
                };
                let opts = EstimateOptions {
                    denoiser: denoiser.clone(),
                    threshold: plan.threshold,
                    clusterer: plan.clusterer,
                    r_m: cfg.pipeline.r_m,
                    r_n: cfg.pipeline.r_n,
                    compensate,
                    sic: cfg.pipeline.sic,
                };
                let est = estimate_from_magnitudes(h_hat.clone(), magnitudes, sys, &plan.dft, &opts)?;
                let report = evaluate(&truth, &est, cfg.pipeline.gate_bins, sys);
                outcome.records.push(TrialRecord {
                    seed,
                    snr_db: snr,
                    denoiser: denoiser.name(),
                    threshold: plan.threshold.name(),
                    clusterer: plan.clusterer.name(),
                    counts: report.counts,
                    nmse: report.nmse,
                    dmse_term: report.dmse_term,
                    gain_nmse: report.gain_nmse,
                });
            }
        }
        out.push(outcome);
    }
    Ok(out)
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn aggregate(cfg: &ExperimentConfig, plan: &Plan, trials: &[Vec<FrameOutcome>]) -> MonteCarloResult {
    let mut res = MonteCarloResult {
        snr_db: cfg.run.snr_db.clone(),
        denoisers: plan.compared.iter().map(Denoiser::name).collect(),
        trials: vec![Vec::new(); Variant::ALL.len()],
        ..Default::default()
    };
    for (s, &snr) in cfg.run.snr_db.iter().enumerate() {
        fn at(t: &[FrameOutcome], s: usize) -> &FrameOutcome {
            &t[s]
        }
        if plan.sections.denoising {
            let bd = mean(trials.iter().map(|t| at(t, s).gamma_bd));
            for (d, name) in res.denoisers.iter().enumerate() {
                let ad = mean(trials.iter().map(|t| at(t, s).gamma_ad[d]));
                res.denoising.push(DenoisingRow {
                    snr_db: snr,
                    denoiser: name,
                    gamma_bd: bd,
                    gamma_ad: ad,
                    relative_gain_pct: relative_snr_gain(bd, ad),
                });
            }
        }
        if plan.sections.clustering {
            for (m, &method) in CLUSTER_METHODS.iter().enumerate() {
                let pairs: Vec<(usize, f64)> = trials.iter().map(|t| at(t, s).clusters[m]).collect();
                let cms: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                res.clustering.push(ClusterRow {
                    snr_db: snr,
                    method: cluster_method_name(method),
                    mae: mean(pairs.iter().map(|p| p.0 as f64)),
                    cm_mean: mean(cms.iter().copied()),
                    cm_median: median(&cms),
                    ecm: ecm(&pairs),
                });
            }
        }
        if plan.sections.estimation {
            for (v, &variant) in Variant::ALL.iter().enumerate() {
                let records: Vec<&TrialRecord> = trials.iter().map(|t| &at(t, s).records[v]).collect();
                let terms: Vec<Option<f64>> = records.iter().map(|r| r.dmse_term).collect();
                let (dmse_value, skipped) = dmse(&terms);
                let counts: Vec<PathCounts> = records.iter().map(|r| r.counts).collect();
                let (false_rate, miss_rate) = path_error_proportions(&counts);
                res.estimation.push(EstimationRow {
                    snr_db: snr,
                    variant,
                    dmse: dmse_value,
                    dmse_skipped: skipped,
                    gain_nmse: mean(records.iter().filter_map(|r| r.gain_nmse)),
                    false_rate,
                    miss_rate,
                });
                res.trials[v].extend(records.into_iter().cloned());
            }
        }
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("smoke").unwrap();
        cfg.system.antennas = 16;
        cfg.system.subcarriers = 16;
        cfg.system.delay_spread_s = 2e-9;
        cfg.run.trials = 3;
        cfg.run.snr_db = vec![-10.0, 10.0];
        cfg.pipeline.denoiser = DenoiserKind::Median;
        cfg
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
        assert_eq!(trial_seed(5, 9), trial_seed(5, 9));
    }

    #[test]
    fn result_shapes() {
        let cfg = tiny();
        let r = run_montecarlo(&cfg, None, Sections::ALL).unwrap();
        assert_eq!(r.denoisers, vec!["median", "mean"]);
        assert_eq!(r.denoising.len(), 2 * 2);
        assert_eq!(r.clustering.len(), 2 * 4);
        assert_eq!(r.estimation.len(), 2 * 3);
        assert!(r.trials.iter().all(|t| t.len() == 2 * 3));
        assert_eq!(r.trials[1][0].denoiser, "none");
        let row = r.trials[0][0].csv_row();
        assert_eq!(row.split(',').count(), TRIAL_CSV_HEADER.split(',').count());
    }

    #[test]
    fn cnn_without_weights_is_a_config_error() {
        let mut cfg = tiny();
        cfg.pipeline.denoiser = DenoiserKind::Cnn;
        assert!(matches!(run_montecarlo(&cfg, None, Sections::ALL), Err(HarnessError::Config(_))));
    }

    #[test]
    fn sections_can_be_skipped() {
        let cfg = tiny();
        let only = Sections { denoising: true, clustering: false, estimation: false };
        let r = run_montecarlo(&cfg, None, only).unwrap();
        assert!(r.clustering.is_empty() && r.estimation.is_empty());
        assert_eq!(r.denoising.len(), 4);
    }
}
