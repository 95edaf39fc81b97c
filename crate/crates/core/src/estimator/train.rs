use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    adam_step, backward, featurize, forward, EstimatorConfig, EstimatorParams, FeatureStats,
};
use crate::dsp::{magnitude, stft, Waveform};
use crate::error::{Error, Result};
use crate::evalkit::Mixture;
use crate::masks::{compute_irm, compute_tbm, Mask, MaskKind, DEFAULT_IRM_BETA};
use crate::objectives::{combined_loss, LossWeights, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    /// Frames per minibatch.
    pub batch_frames: usize,
    /// Weight on the binary-mask loss.
    pub alpha: f64,
    /// Seeds the per-epoch utterance shuffle.
    pub seed: u64,
    /// Keep an epoch's parameters only when they improve the dev loss.
    pub select_on_dev: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 20,
            batch_frames: 256,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            select_on_dev: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.eps];
        if positive.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("learning rate and eps must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_frames == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        LossWeights::new(self.alpha, 0.0)?;
        Ok(())
    }
}

/// Network inputs and oracle targets for one utterance.
#[derive(Debug, Clone)]
pub struct PreparedUtterance {
    pub features: Array2<f64>,
    pub irm: Array2<f64>,
    pub tbm: Array2<f64>,
}

impl PreparedUtterance {
    pub fn frames(&self) -> usize {
        self.features.nrows()
    }
}

pub fn prepare_utterance(
    mix: &Mixture,
    stats: &FeatureStats,
    context: usize,
) -> Result<PreparedUtterance> {
    let noisy = magnitude(&stft(&mix.noisy)?);
    let clean = magnitude(&stft(&mix.clean)?);
    let noise = magnitude(&stft(&mix.noise)?);
    Ok(PreparedUtterance {
        features: featurize(&noisy, stats, context)?,
        irm: compute_irm(&clean, &noise, DEFAULT_IRM_BETA)?.into_data(),
        tbm: compute_tbm(&clean)?.into_data(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-frame loss over the epoch's minibatches.
    pub train_loss: f64,
    /// Per-frame loss on the dev set after the epoch.
    pub dev_loss: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Per-frame training-set loss of the initial parameters.
    pub initial_train_loss: f64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// Dev loss of the parameters that were finally returned.
    pub fn retained_dev_loss(&self) -> Option<f64> {
        self.epochs
            .iter()
            .rev()
            .find(|e| e.retained)
            .map(|e| e.dev_loss)
    }

    /// One line per epoch, preceded by a `#` comment with the initial loss.
    pub fn to_text(&self) -> String {
        let mut out = format!("# initial_train_loss={:.9}\n", self.initial_train_loss);
        for e in &self.epochs {
            out.push_str(&format!(
                "epoch={} train_loss={:.9} dev_loss={:.9} retained={}\n",
                e.epoch, e.train_loss, e.dev_loss, e.retained
            ));
        }
        out
    }
}

/// Parameters with the feature statistics they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: EstimatorParams,
    pub stats: FeatureStats,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: TrainLog,
}

fn weights(t: &TrainConfig) -> Result<LossWeights> {
    LossWeights::new(t.alpha, 0.0)
}

/// Per-frame combined loss of `params` over whole utterances.
fn evaluate(params: &EstimatorParams, data: &[PreparedUtterance], w: LossWeights) -> Result<f64> {
    let mut total = 0.0;
    let mut frames = 0;
    for utt in data {
        let out = forward(params, utt.features.view())?;
        let report = combined_loss(
            out.irm.view(),
            out.tbm.view(),
            utt.irm.view(),
            utt.tbm.view(),
            w,
        )?;
        total += report.total;
        frames += utt.frames();
    }
    let loss = total / frames as f64;
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged(format!(
            "evaluation loss is {loss}"
        )));
    }
    Ok(loss)
}

fn gather(
    data: &[PreparedUtterance],
    rows: &[(usize, usize)],
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let pick = |f: fn(&PreparedUtterance) -> &Array2<f64>| {
        let width = f(&data[0]).ncols();
        let mut out = Array2::zeros((rows.len(), width));
        for (mut dst, &(u, t)) in out.axis_iter_mut(Axis(0)).zip(rows) {
            dst.assign(&f(&data[u]).row(t));
        }
        out
    };
    (pick(|u| &u.features), pick(|u| &u.irm), pick(|u| &u.tbm))
}

/// Trains from fresh parameters. Utterance order is reshuffled every epoch and
/// frames are cut into contiguous minibatches. After each epoch the dev loss
/// decides whether the new parameters replace the retained ones.
pub fn train(
    train_set: &[Mixture],
    dev_set: &[Mixture],
    cfg: &EstimatorConfig,
    t: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    t.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if t.select_on_dev && dev_set.is_empty() {
        return Err(Error::invalid(
            "dev-set selection requested but dev set is empty",
        ));
    }
    let w = weights(t)?;

    let noisy_mags = train_set
        .iter()
        .map(|m| Ok(magnitude(&stft(&m.noisy)?)))
        .collect::<Result<Vec<_>>>()?;
    let stats = FeatureStats::from_spectrograms(&noisy_mags)?;
    if stats.bins() != cfg.input_bins {
        return Err(Error::invalid(format!(
            "spectrograms have {} bins, network expects {}",
            stats.bins(),
            cfg.input_bins
        )));
    }
    let prep = |set: &[Mixture]| {
        set.iter()
            .map(|m| prepare_utterance(m, &stats, cfg.context))
            .collect::<Result<Vec<_>>>()
    };
    let train_data = prep(train_set)?;
    let dev_data = prep(dev_set)?;

    let mut params = EstimatorParams::init(*cfg)?;
    let initial_train_loss = evaluate(&params, &train_data, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut best: Option<(f64, EstimatorParams)> = None;
    let mut epochs = Vec::with_capacity(t.epochs);

    for epoch in 1..=t.epochs {
        order.shuffle(&mut rng);
        let rows: Vec<(usize, usize)> = order
            .iter()
            .flat_map(|&u| (0..train_data[u].frames()).map(move |f| (u, f)))
            .collect();
        let mut epoch_total = 0.0;
        for chunk in rows.chunks(t.batch_frames) {
            let (x, irm, tbm) = gather(&train_data, chunk);
            let out = forward(&params, x.view())?;
            let report = combined_loss(out.irm.view(), out.tbm.view(), irm.view(), tbm.view(), w)?;
            if !report.total.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "loss became {} in epoch {epoch}",
                    report.total
                )));
            }
            epoch_total += report.total;
            let scale = 1.0 / chunk.len() as f64;
            let grads = backward(
                &params,
                &out.cache,
                (report.grad_irm * scale).view(),
                (report.grad_tbm * scale).view(),
            )?;
            adam_step(&mut params, &grads, t)?;
        }
        let train_loss = epoch_total / rows.len() as f64;
        let dev_loss = if dev_data.is_empty() {
            f64::NAN
        } else {
            evaluate(&params, &dev_data, w)?
        };
        let retained = if t.select_on_dev {
            best.as_ref().is_none_or(|(b, _)| dev_loss < *b)
        } else {
            true
        };
        if retained {
            best = Some((dev_loss, params.clone()));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_loss,
            retained,
        });
    }

    let (_, params) = best.expect("at least one epoch retains parameters");
    Ok(TrainOutcome {
        model: TrainedModel { params, stats },
        log: TrainLog {
            initial_train_loss,
            epochs,
        },
    })
}

/// Estimated ratio mask and binary-mask probabilities for one utterance.
pub fn predict_masks(
    params: &EstimatorParams,
    noisy: &Waveform,
    stats: &FeatureStats,
) -> Result<(Mask, Mask)> {
    let mag = magnitude(&stft(noisy)?);
    let features = featurize(&mag, stats, params.config().context)?;
    let out = forward(params, features.view())?;
    Ok((
        Mask::new(out.irm, MaskKind::Soft)?,
        Mask::new(out.tbm, MaskKind::Soft)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{synth_corpus, Corpus, SynthConfig};

    fn corpus() -> Corpus {
        synth_corpus(&SynthConfig {
            seed: 5,
            n_train: 6,
            n_dev: 2,
            n_test: 1,
            duration_s: 0.5,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn small() -> EstimatorConfig {
        EstimatorConfig {
            context: 3,
            hidden1: 16,
            hidden2: 12,
            ..EstimatorConfig::default()
        }
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_frames: 32,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_epoch_returns_its_parameters() {
        let c = corpus();
        let out = train(&c.train, &c.dev, &small(), &quick(1)).unwrap();
        assert_eq!(out.log.epochs.len(), 1);
        assert!(out.log.epochs[0].retained);
        assert_ne!(
            out.model.params.values(),
            EstimatorParams::init(small()).unwrap().values()
        );
    }

    #[test]
    fn retained_dev_loss_never_exceeds_first_epoch() {
        let c = corpus();
        let out = train(&c.train, &c.dev, &small(), &quick(6)).unwrap();
        let log = &out.log;
        let first = log.epochs[0].dev_loss;
        assert!(log.retained_dev_loss().unwrap() <= first);
        let mut best = f64::INFINITY;
        for e in &log.epochs {
            assert_eq!(e.retained, e.dev_loss < best, "epoch {}", e.epoch);
            best = best.min(e.dev_loss);
        }
        // the returned parameters score the retained dev loss
        let stats = &out.model.stats;
        let dev: Vec<_> = c
            .dev
            .iter()
            .map(|m| prepare_utterance(m, stats, 3).unwrap())
            .collect();
        let w = LossWeights::new(DEFAULT_ALPHA, 0.0).unwrap();
        let again = evaluate(&out.model.params, &dev, w).unwrap();
        assert_eq!(again, log.retained_dev_loss().unwrap());
        assert_eq!(log.to_text().lines().count(), 1 + 6);
    }

    #[test]
    fn deterministic_for_fixed_seeds() {
        let c = corpus();
        let a = train(&c.train, &c.dev, &small(), &quick(2)).unwrap();
        let b = train(&c.train, &c.dev, &small(), &quick(2)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
        let other = train(
            &c.train,
            &c.dev,
            &small(),
            &TrainConfig {
                seed: 1,
                ..quick(2)
            },
        )
        .unwrap();
        assert_ne!(a.model.params.values(), other.model.params.values());
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = corpus();
        assert!(train(&[], &c.dev, &small(), &quick(1)).is_err());
        assert!(train(&c.train, &[], &small(), &quick(1)).is_err());
        assert!(train(
            &c.train,
            &[],
            &small(),
            &TrainConfig {
                select_on_dev: false,
                ..quick(1)
            }
        )
        .is_ok());
        assert!(train(&c.train, &c.dev, &small(), &quick(0)).is_err());
        let wide = EstimatorConfig {
            input_bins: 129,
            ..small()
        };
        assert!(train(&c.train, &c.dev, &wide, &quick(1)).is_err());
    }

    #[test]
    fn predicted_masks_match_spectrogram() {
        let c = corpus();
        let out = train(&c.train, &c.dev, &small(), &quick(1)).unwrap();
        let m = &c.test[0];
        let (irm, tbm) = predict_masks(&out.model.params, &m.noisy, &out.model.stats).unwrap();
        assert_eq!(irm.dim(), stft(&m.noisy).unwrap().dim());
        assert!(irm
            .data()
            .iter()
            .chain(tbm.data())
            .all(|v| (0.0..=1.0).contains(v)));
    }
}
