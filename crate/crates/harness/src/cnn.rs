//! Obtaining the denoising network: load a weights file or train one.

use std::sync::Arc;
use std::time::Instant;

use wsg_core::denoise::{cnn_train, load_weights, make_training_set, DenoiserWeights, TrainReport};
use wsg_core::rng;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Train the configured architecture on freshly simulated frames.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let c = &cfg.cnn;
    let sys = cfg.system_config();
    let mut data_rng = rng::stream(c.train_seed, 0);
    let data = make_training_set(
        &mut data_rng,
        &sys,
        c.train_frames,
        (c.train_snr_min_db, c.train_snr_max_db),
        &cfg.dataset_params(),
    )?;
    let init = DenoiserWeights::init(cfg.architecture(), &mut rng::stream(c.train_seed, 1))?;
    log::info!(
        "training {}-layer, {}-channel denoiser on {} patches for {} epochs",
        c.depth,
        c.channels,
        data.len(),
        c.epochs
    );
    let start = Instant::now();
    let report = cnn_train(init, &data, &cfg.train_config())?;
    log::info!("training finished in {:.1?}, epoch losses {:?}", start.elapsed(), report.epoch_losses);
    Ok(report)
}

/// Weights from `cnn.weights` if set (the architecture must match the
/// config), otherwise a fresh training run.
pub fn obtain(cfg: &ExperimentConfig) -> Result<Arc<DenoiserWeights>> {
    match &cfg.cnn.weights {
        Some(path) => {
            let w = load_weights(path)?;
            if w.arch != cfg.architecture() {
                return Err(HarnessError::Config(format!(
                    "weights in {} have architecture {:?}, config asks for {:?}",
                    path.display(),
                    w.arch,
                    cfg.architecture()
                )));
            }
            Ok(Arc::new(w))
        }
        None => Ok(Arc::new(train(cfg)?.weights)),
    }
}
