//! Adversarial training: the hybrid objective and its two ablations.
//!
//! Each hybrid step runs, in order:
//!
//! 1. `x_ξ = p_ξ(x)`, the teacher-forced autoregressive prediction;
//! 2. `z ~ N(0, 1)^dz`;
//! 3. `x̂ = G(z)`;
//! 4. scores `s_r1 = D(x_ξ)`, `s_f1 = D(x̂)`, `s_r2 = D(x)`, `s_f2 = D(x̂)`;
//! 5. a discriminator update on the four-term loss;
//! 6. fresh scores and a generator update;
//! 7. an autoregressive update on its reconstruction loss.
//!
//! Losses are written in descent form: the discriminator minimizes
//! `-mean[log s_r1 + log s_r2 + log(1 - s_f1) + log(1 - s_f2)]` and the
//! generator minimizes the non-saturating `-mean[log s_f1 + log s_f2]`.

use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, DatasetConfig};
use crate::error::{Diagnostic, Error, Result};
use crate::models::{ArHead, AutoregressiveNet, BoundMlp, DiscriminatorNet, GeneratorNet, ModelConfig};
use crate::optim::{adam_update, AdamConfig, AdamState};
use crate::rng::{self, Rng};
use crate::tensor::{self, Tape, Tensor, Var};

/// Floor applied to every argument of `log` in the adversarial losses.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Discriminator sees real data and autoregressive output as real.
    Hgan,
    /// Plain GAN on real data only.
    Gan,
    /// Discriminator sees only the autoregressive output as real.
    AutoGan,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Hgan, Variant::Gan, Variant::AutoGan];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Hgan => "hgan",
            Variant::Gan => "gan",
            Variant::AutoGan => "autogan",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Variant::Hgan => 0,
            Variant::Gan => 1,
            Variant::AutoGan => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == code)
    }

    fn uses_data(self) -> bool {
        matches!(self, Variant::Hgan | Variant::Gan)
    }

    fn uses_ar(self) -> bool {
        matches!(self, Variant::Hgan | Variant::AutoGan)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected hgan, gan or autogan)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArLoss {
    /// Mean absolute teacher-forced error.
    L1,
    /// Negative mean log-likelihood.
    Nll,
}

impl ArLoss {
    pub fn as_str(self) -> &'static str {
        match self {
            ArLoss::L1 => "l1",
            ArLoss::Nll => "nll",
        }
    }
}

impl FromStr for ArLoss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l1" => Ok(ArLoss::L1),
            "nll" => Ok(ArLoss::Nll),
            _ => Err(format!("unknown ar_loss `{s}` (expected l1 or nll)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub steps: u64,
    pub batch: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub ar_loss: ArLoss,
    /// One latent draw per step for both fake heads.
    pub shared_z: bool,
    pub metrics_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Hgan,
            steps: 20_000,
            batch: 64,
            optimizer: AdamConfig::default(),
            seed: 0,
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            ar_loss: ArLoss::L1,
            shared_z: true,
            metrics_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidSpec("steps must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidSpec("batch must be at least 1".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::InvalidSpec("learning rate must be positive".into()));
        }
        if self.metrics_every == 0 {
            return Err(Error::InvalidSpec("metrics_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Losses and mean scores of one step. Heads a variant does not use are NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    pub loss_ar: f64,
    pub sr1: f64,
    pub sr2: f64,
    pub sf1: f64,
    pub sf2: f64,
}

pub const METRICS_HEADER: &str = "step,loss_d,loss_g,loss_ar,sr1,sr2,sf1,sf2";

impl StepMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.step, self.loss_d, self.loss_g, self.loss_ar, self.sr1, self.sr2, self.sf1, self.sf2
        )
    }
}

pub fn metrics_csv(rows: &[StepMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// `-Σ_real mean log s - Σ_fake mean log(1 - s)`, with clamped logs.
pub fn discriminator_loss<'t>(real: &[Var<'t>], fake: &[Var<'t>]) -> Var<'t> {
    let mut terms = Vec::with_capacity(real.len() + fake.len());
    terms.extend(real.iter().map(|s| s.clamped_log(LOG_FLOOR).mean()));
    terms.extend(fake.iter().map(|s| s.one_minus().clamped_log(LOG_FLOOR).mean()));
    sum_vars(&terms).neg()
}

/// The four-head discriminator loss of the hybrid objective.
pub fn hgan_discriminator_loss<'t>(sr1: Var<'t>, sr2: Var<'t>, sf1: Var<'t>, sf2: Var<'t>) -> Var<'t> {
    discriminator_loss(&[sr1, sr2], &[sf1, sf2])
}

/// Non-saturating generator loss `-Σ mean log s_f`.
pub fn generator_loss<'t>(fake: &[Var<'t>]) -> Var<'t> {
    let terms: Vec<_> = fake.iter().map(|s| s.clamped_log(LOG_FLOOR).mean()).collect();
    sum_vars(&terms).neg()
}

fn sum_vars<'t>(terms: &[Var<'t>]) -> Var<'t> {
    let mut acc = terms[0];
    for t in &terms[1..] {
        acc = acc.add(*t).expect("scalar terms");
    }
    acc
}

/// Teacher-forced autoregressive loss; returns the loss and the prediction
/// `x_ξ = p_ξ(x)`.
pub fn ar_loss<'t>(
    ar: &AutoregressiveNet,
    bound: &BoundMlp<'t>,
    x: Var<'t>,
    mode: ArLoss,
) -> tensor::Result<(Var<'t>, Var<'t>)> {
    let pred = ar.predict(bound, x)?;
    let loss = match mode {
        ArLoss::L1 => x.sub(pred)?.abs().mean(),
        ArLoss::Nll => ar.log_likelihood_var(bound, x)?.mean().neg(),
    };
    Ok((loss, pred))
}

/// Generator, discriminator and autoregressive model of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub autoregressive: AutoregressiveNet,
}

impl Networks {
    pub fn new(dataset: &Dataset, model: &ModelConfig, seed: u64) -> Result<Self> {
        let d = dataset.dim();
        let binary = dataset.is_binary();
        let head = if binary {
            ArHead::Bernoulli
        } else {
            ArHead::Gaussian { sigma: model.ar_sigma }
        };
        Ok(Self {
            generator: GeneratorNet::new(
                model.latent_dim,
                &model.gen_hidden,
                d,
                binary,
                model.init_std,
                &mut rng::stream(seed, "init-generator"),
            )?,
            discriminator: DiscriminatorNet::new(
                d,
                &model.disc_hidden,
                model.init_std,
                &mut rng::stream(seed, "init-discriminator"),
            )?,
            autoregressive: AutoregressiveNet::new(
                d,
                &model.ar_hidden,
                head,
                model.init_std,
                &mut rng::stream(seed, "init-autoregressive"),
            )?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub generator: AdamState,
    pub discriminator: AdamState,
    pub autoregressive: AdamState,
}

impl Optimizers {
    pub fn new(nets: &Networks) -> Self {
        Self {
            generator: AdamState::for_params(nets.generator.net.params()),
            discriminator: AdamState::for_params(nets.discriminator.net.params()),
            autoregressive: AdamState::for_params(nets.autoregressive.net.params()),
        }
    }
}

fn mean_of(v: Var<'_>) -> f64 {
    let t = v.value();
    t.data().iter().sum::<f64>() / t.len() as f64
}

/// One step of the selected variant on the real batch `x`.
pub fn train_step(
    variant: Variant,
    nets: &mut Networks,
    opts: &mut Optimizers,
    x: &Tensor,
    cfg: &TrainConfig,
    rng: &mut Rng,
    step: u64,
) -> Result<StepMetrics> {
    let batch = x.rows();
    let dz = nets.generator.latent_dim();

    // (1) x_ξ = p_ξ(x) and the autoregressive gradient. The autoregressive
    // parameters are untouched by (5) and (6), so taking the gradient here is
    // the same as taking it at (7).
    let (x_xi, loss_ar, ar_grads) = if variant.uses_ar() {
        let tape = Tape::new();
        let bound = nets.autoregressive.net.bind(&tape, true);
        let (loss, pred) = ar_loss(&nets.autoregressive, &bound, tape.constant(x.clone()), cfg.ar_loss)?;
        loss.backward()?;
        (Some(pred.value()), loss.item()?, Some(bound.grads()))
    } else {
        (None, f64::NAN, None)
    };

    // (2) latent draws.
    let heads = usize::from(variant.uses_data()) + usize::from(variant.uses_ar());
    let z1 = rng::standard_normal(rng, &[batch, dz]);
    let z2 = if heads == 2 && !cfg.shared_z {
        Some(rng::standard_normal(rng, &[batch, dz]))
    } else {
        None
    };

    // (3)-(5) discriminator update.
    let (loss_d, scores) = {
        let tape = Tape::new();
        let g = nets.generator.net.bind(&tape, false);
        let d = nets.discriminator.net.bind(&tape, true);
        let fake1 = d.forward(g.forward(tape.constant(z1.clone()))?)?;
        let fake2 = match &z2 {
            Some(z) => d.forward(g.forward(tape.constant(z.clone()))?)?,
            None => fake1,
        };
        let mut real = Vec::new();
        let mut fake = Vec::new();
        let (mut sr1, mut sf1, mut sr2, mut sf2) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
        if let Some(x_xi) = &x_xi {
            let s = d.forward(tape.constant(x_xi.clone()))?;
            sr1 = mean_of(s);
            sf1 = mean_of(fake1);
            real.push(s);
            fake.push(fake1);
        }
        if variant.uses_data() {
            let s = d.forward(tape.constant(x.clone()))?;
            let f = if variant.uses_ar() { fake2 } else { fake1 };
            sr2 = mean_of(s);
            sf2 = mean_of(f);
            real.push(s);
            fake.push(f);
        }
        let loss = discriminator_loss(&real, &fake);
        loss.backward()?;
        let grads = d.grads();
        adam_update(
            &mut nets.discriminator.net.params_mut(),
            &grads,
            &mut opts.discriminator,
            &cfg.optimizer,
        );
        (loss.item()?, [sr1, sr2, sf1, sf2])
    };

    // (6) generator update against the refreshed discriminator.
    let loss_g = {
        let tape = Tape::new();
        let g = nets.generator.net.bind(&tape, true);
        let d = nets.discriminator.net.bind(&tape, false);
        let f1 = d.forward(g.forward(tape.constant(z1))?)?;
        let fakes = match (heads, z2) {
            (1, _) => vec![f1],
            (_, Some(z)) => vec![f1, d.forward(g.forward(tape.constant(z))?)?],
            (_, None) => vec![f1, f1],
        };
        let loss = generator_loss(&fakes);
        loss.backward()?;
        let grads = g.grads();
        adam_update(&mut nets.generator.net.params_mut(), &grads, &mut opts.generator, &cfg.optimizer);
        loss.item()?
    };

    // (7) autoregressive update.
    if let Some(grads) = ar_grads {
        adam_update(
            &mut nets.autoregressive.net.params_mut(),
            &grads,
            &mut opts.autoregressive,
            &cfg.optimizer,
        );
    }

    let m = StepMetrics {
        step,
        loss_d,
        loss_g,
        loss_ar,
        sr1: scores[0],
        sr2: scores[1],
        sf1: scores[2],
        sf2: scores[3],
    };
    let mut used = vec![loss_d, loss_g];
    if variant.uses_ar() {
        used.extend([loss_ar, m.sr1, m.sf1]);
    }
    if variant.uses_data() {
        used.extend([m.sr2, m.sf2]);
    }
    if used.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(Box::new(Diagnostic {
            step,
            loss_d,
            loss_g,
            loss_ar,
            scores,
        })));
    }
    Ok(m)
}

/// Hybrid step: both real heads.
pub fn hgan_step(nets: &mut Networks, opts: &mut Optimizers, x: &Tensor, cfg: &TrainConfig, rng: &mut Rng, step: u64) -> Result<StepMetrics> {
    train_step(Variant::Hgan, nets, opts, x, cfg, rng, step)
}

/// Baseline step: real data against `G(z)` only; no autoregressive update.
pub fn gan_step(nets: &mut Networks, opts: &mut Optimizers, x: &Tensor, cfg: &TrainConfig, rng: &mut Rng, step: u64) -> Result<StepMetrics> {
    train_step(Variant::Gan, nets, opts, x, cfg, rng, step)
}

/// Ablation step: the autoregressive output is the only real input.
pub fn autogan_step(nets: &mut Networks, opts: &mut Optimizers, x: &Tensor, cfg: &TrainConfig, rng: &mut Rng, step: u64) -> Result<StepMetrics> {
    train_step(Variant::AutoGan, nets, opts, x, cfg, rng, step)
}

/// A run in progress.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub dataset: Dataset,
    pub nets: Networks,
    pub opts: Optimizers,
    data_rng: Rng,
    latent_rng: Rng,
    step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let dataset = config.dataset.build()?;
        let nets = Networks::new(&dataset, &config.model, config.seed)?;
        let opts = Optimizers::new(&nets);
        Ok(Self {
            data_rng: rng::stream(config.seed, "train-data"),
            latent_rng: rng::stream(config.seed, "train-latent"),
            config,
            dataset,
            nets,
            opts,
            step: 0,
        })
    }

    /// Rebuilds a trainer from saved state.
    pub fn resume(
        config: TrainConfig,
        nets: Networks,
        opts: Optimizers,
        step: u64,
        data_rng: Rng,
        latent_rng: Rng,
    ) -> Result<Self> {
        let dataset = config.dataset.build()?;
        Ok(Self {
            config,
            dataset,
            nets,
            opts,
            data_rng,
            latent_rng,
            step,
        })
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn data_rng(&self) -> &Rng {
        &self.data_rng
    }

    pub fn latent_rng(&self) -> &Rng {
        &self.latent_rng
    }

    /// Draws a fresh real batch and performs one step.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let batch = self.dataset.sample_with(self.config.batch, &mut self.data_rng);
        self.step += 1;
        train_step(
            self.config.variant,
            &mut self.nets,
            &mut self.opts,
            &batch.samples,
            &self.config,
            &mut self.latent_rng,
            self.step,
        )
    }

    /// Runs to `config.steps`, logging the first step, every
    /// `metrics_every`-th step and the last one.
    pub fn run(&mut self) -> Result<Vec<StepMetrics>> {
        self.run_with(|_, _| {})
    }

    /// As [`Trainer::run`], calling `observe` after every step.
    pub fn run_with(&mut self, mut observe: impl FnMut(&Trainer, &StepMetrics)) -> Result<Vec<StepMetrics>> {
        let mut log = Vec::new();
        while self.step < self.config.steps {
            let m = self.step()?;
            observe(self, &m);
            if m.step == 1 || m.step % self.config.metrics_every == 0 || m.step == self.config.steps {
                log.push(m);
            }
        }
        Ok(log)
    }
}

/// Trains from scratch and returns the finished trainer and its metric log.
pub fn train(config: &TrainConfig) -> Result<(Trainer, Vec<StepMetrics>)> {
    let mut trainer = Trainer::new(config.clone())?;
    let log = trainer.run()?;
    Ok((trainer, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradient_check_many;

    fn small_config(variant: Variant) -> TrainConfig {
        TrainConfig {
            variant,
            steps: 3,
            batch: 16,
            model: ModelConfig {
                latent_dim: 4,
                gen_hidden: vec![16, 16],
                disc_hidden: vec![16, 16],
                ar_hidden: vec![16],
                clf_hidden: vec![16],
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn scores(tape: &Tape, v: [f64; 4]) -> [Var<'_>; 4] {
        v.map(|s| tape.constant(Tensor::full(&[3, 1], s)))
    }

    #[test]
    fn discriminator_loss_at_half() {
        let tape = Tape::new();
        let [a, b, c, d] = scores(&tape, [0.5; 4]);
        let l = hgan_discriminator_loss(a, b, c, d).item().unwrap();
        assert!((l - 2.772588722239781).abs() < 1e-12);
        let gan = discriminator_loss(&[b], &[d]).item().unwrap();
        assert!((gan - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn discriminator_loss_saturates_to_zero() {
        let tape = Tape::new();
        let [a, b, c, d] = scores(&tape, [1.0 - 1e-12, 1.0 - 1e-12, 1e-12, 1e-12]);
        assert!(hgan_discriminator_loss(a, b, c, d).item().unwrap() < 1e-10);
    }

    #[test]
    fn discriminator_loss_symmetry_and_decomposition() {
        let tape = Tape::new();
        let [a, b, c, d] = scores(&tape, [0.7, 0.4, 0.2, 0.65]);
        let l = hgan_discriminator_loss(a, b, c, d).item().unwrap();
        let swapped = hgan_discriminator_loss(b, a, d, c).item().unwrap();
        assert!((l - swapped).abs() < 1e-15);
        let gan = discriminator_loss(&[b], &[d]).item().unwrap();
        let auto = discriminator_loss(&[a], &[c]).item().unwrap();
        assert!((l - (gan + auto)).abs() < 1e-12);
    }

    #[test]
    fn generator_loss_values() {
        let tape = Tape::new();
        let [_, _, c, d] = scores(&tape, [0.5; 4]);
        assert!((generator_loss(&[c, d]).item().unwrap() - 1.386294361119890).abs() < 1e-12);
        let one = tape.constant(Tensor::full(&[3, 1], 1.0));
        assert_eq!(generator_loss(&[one, one]).item().unwrap(), 0.0);
    }

    #[test]
    fn ar_l1_loss_values() {
        let mut rng = rng::stream(0, "t");
        let mut ar = AutoregressiveNet::new(3, &[4], ArHead::Gaussian { sigma: 0.05 }, 0.1, &mut rng).unwrap();
        for p in ar.net.params_mut() {
            p.data_mut().fill(0.0);
        }
        // Output biases set the prediction to 0.75 everywhere.
        let last = ar.net.layers.len() - 1;
        ar.net.layers[last].bias.data_mut().fill(0.75);
        let tape = Tape::new();
        let bound = ar.net.bind(&tape, false);
        let x = tape.constant(Tensor::ones(&[2, 3]));
        let (loss, _) = ar_loss(&ar, &bound, x, ArLoss::L1).unwrap();
        assert!((loss.item().unwrap() - 0.25).abs() < 1e-15);
        let x = tape.constant(Tensor::full(&[2, 3], 0.75));
        let (loss, _) = ar_loss(&ar, &bound, x, ArLoss::L1).unwrap();
        assert_eq!(loss.item().unwrap(), 0.0);
    }

    #[test]
    fn generator_loss_gradient_matches_differences() {
        let cfg = small_config(Variant::Hgan);
        let ds = cfg.dataset.build().unwrap();
        let nets = Networks::new(&ds, &cfg.model, 1).unwrap();
        let z = rng::standard_normal(&mut rng::stream(1, "z"), &[8, 4]);
        let params: Vec<Tensor> = nets.generator.net.params().into_iter().cloned().collect();
        let err = gradient_check_many(
            |tape, vars| {
                let g = nets.generator.net.bind_with(tape, vars.to_vec());
                let d = nets.discriminator.net.bind(tape, false);
                let s = d.forward(g.forward(tape.constant(z.clone()))?)?;
                Ok(generator_loss(&[s, s]))
            },
            &params,
            1e-5,
        );
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn step_updates_every_network() {
        let cfg = small_config(Variant::Hgan);
        let mut t = Trainer::new(cfg).unwrap();
        let before = t.nets.clone();
        let m = t.step().unwrap();
        assert!((m.sr1 - 0.5).abs() < 0.1 && (m.sf2 - 0.5).abs() < 0.1);
        let moved = |a: &crate::models::Mlp, b: &crate::models::Mlp| {
            a.params()
                .iter()
                .zip(b.params())
                .flat_map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| (p - q).abs()))
                .fold(0.0, f64::max)
        };
        assert!(moved(&before.generator.net, &t.nets.generator.net) > 0.0);
        assert!(moved(&before.discriminator.net, &t.nets.discriminator.net) > 0.0);
        assert!(moved(&before.autoregressive.net, &t.nets.autoregressive.net) > 0.0);
    }

    #[test]
    fn gan_step_skips_autoregressive_model() {
        let mut t = Trainer::new(small_config(Variant::Gan)).unwrap();
        let before = t.nets.autoregressive.clone();
        let m = t.step().unwrap();
        assert_eq!(t.nets.autoregressive, before);
        assert!(m.sr1.is_nan() && m.sf1.is_nan() && m.loss_ar.is_nan());
        assert!(m.sr2.is_finite() && m.sf2.is_finite());
    }

    #[test]
    fn autogan_step_trains_autoregressive_model() {
        let mut t = Trainer::new(small_config(Variant::AutoGan)).unwrap();
        let before = t.nets.autoregressive.clone();
        let m = t.step().unwrap();
        assert_ne!(t.nets.autoregressive, before);
        assert!(m.sr2.is_nan() && m.sf2.is_nan());
        assert!(m.sr1.is_finite() && m.loss_ar.is_finite());
    }

    #[test]
    fn unshared_latents_run() {
        let mut cfg = small_config(Variant::Hgan);
        cfg.shared_z = false;
        let (_, log) = train(&cfg).unwrap();
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn single_step_logs_one_row_and_is_deterministic() {
        let mut cfg = small_config(Variant::Hgan);
        cfg.steps = 1;
        let (_, a) = train(&cfg).unwrap();
        let (_, b) = train(&cfg).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(metrics_csv(&a), metrics_csv(&b));
    }

    #[test]
    fn variant_parsing() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            assert_eq!(Variant::from_code(v.code()), Some(v));
        }
        assert!("wgan".parse::<Variant>().is_err());
    }
}
