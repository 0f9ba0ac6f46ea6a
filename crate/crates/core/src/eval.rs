//! Scoring a generator against its dataset.
//!
//! Mode histograms use the dataset's exact oracle. Mode score and Fréchet
//! distance go through a classifier trained on the same dataset.

use crate::data::{Dataset, LabeledBatch};
use crate::error::Result;
use crate::metrics::{self, EvalReport, ModeHistogram, KL_SMOOTHING};
use crate::models::{ClassifierConfig, ClassifierNet, GeneratorNet};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub samples: usize,
    pub min_count: u64,
    pub smoothing: f64,
    pub classifier_train: usize,
    pub classifier_held_out: usize,
    pub classifier: ClassifierConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            min_count: 1,
            smoothing: KL_SMOOTHING,
            classifier_train: 20_000,
            classifier_held_out: 2_000,
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Oracle labeler plus a trained surrogate classifier for one dataset.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub dataset: Dataset,
    pub config: EvalConfig,
    pub classifier: ClassifierNet,
    pub classifier_accuracy: f64,
}

impl Evaluator {
    /// Trains the surrogate classifier; `seed` fixes its data and init.
    pub fn new(dataset: Dataset, config: EvalConfig, seed: u64) -> Result<Self> {
        let mut data_rng = rng::stream(seed, "classifier-data");
        let train = dataset.sample_with(config.classifier_train, &mut data_rng);
        let held_out = dataset.sample_with(config.classifier_held_out, &mut data_rng);
        let (classifier, classifier_accuracy) = ClassifierNet::train(&train, &held_out, &config.classifier, seed)?;
        Ok(Self {
            dataset,
            config,
            classifier,
            classifier_accuracy,
        })
    }

    /// Wraps an already trained classifier.
    pub fn with_classifier(dataset: Dataset, config: EvalConfig, classifier: ClassifierNet, accuracy: f64) -> Self {
        Self {
            dataset,
            config,
            classifier,
            classifier_accuracy: accuracy,
        }
    }

    pub fn histogram(&self, samples: &Tensor) -> Result<ModeHistogram> {
        metrics::histogram_of(samples, self.dataset.mode_count(), |p| self.dataset.mode_of(p))
    }

    /// Fresh ground-truth draw of `n` samples for `seed`.
    pub fn reference(&self, n: usize, seed: u64) -> LabeledBatch {
        self.dataset.sample_with(n, &mut rng::stream(seed, "eval-truth"))
    }

    /// Scores `generated` against a fresh ground-truth set of equal size.
    pub fn evaluate_samples(&self, generated: &Tensor, seed: u64) -> Result<EvalReport> {
        let n = generated.rows();
        let truth = self.reference(n, seed);
        let gen_hist = self.histogram(generated)?;
        let truth_hist = ModeHistogram::new(truth.label_counts());
        let probs = self.classifier.probabilities(generated)?;
        let real_feats = self.classifier.features(&truth.samples)?;
        let fake_feats = self.classifier.features(generated)?;
        Ok(EvalReport {
            kl_divergence: metrics::kl_divergence(&gen_hist, &truth_hist, self.config.smoothing)?,
            chi_square: metrics::chi_square(&gen_hist, &truth_hist)?,
            modes_covered: metrics::modes_covered(&gen_hist, self.config.min_count),
            surrogate_mode_score: metrics::mode_score(&probs)?,
            surrogate_frechet: metrics::frechet_distance(&real_feats, &fake_feats)?,
            sample_count: n,
            classifier_accuracy: self.classifier_accuracy,
        })
    }

    /// Draws `config.samples` points from `generator` and scores them.
    pub fn evaluate(&self, generator: &GeneratorNet, seed: u64) -> Result<EvalReport> {
        let samples = generator_samples(generator, self.config.samples, seed)?;
        self.evaluate_samples(&samples, seed)
    }
}

/// The first `n` draws of the evaluation latent stream for `seed`.
pub fn generator_samples(generator: &GeneratorNet, n: usize, seed: u64) -> Result<Tensor> {
    generator.sample(n, &mut rng::stream(seed, "eval-latent"))
}
