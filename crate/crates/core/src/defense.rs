//! White-box attacks on a classifier and latent-projection purification
//! through a trained generator.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Uniform};

use crate::data::LabeledBatch;
use crate::error::{Error, Result};
use crate::models::{argmax, ClassifierNet, GeneratorNet};
use crate::rng;
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    Fgsm,
    Pgd,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgsm" => Ok(AttackKind::Fgsm),
            "pgd" => Ok(AttackKind::Pgd),
            other => Err(Error::InvalidSpec(format!("unknown attack {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub epsilon: f64,
    pub pgd_steps: usize,
    pub pgd_step_size: f64,
    pub random_start: bool,
    /// Valid input range, `None` for unbounded data.
    pub clip: Option<(f64, f64)>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::Fgsm,
            epsilon: 0.3,
            pgd_steps: 10,
            pgd_step_size: 0.075,
            random_start: true,
            clip: Some((0.0, 1.0)),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidSpec(format!("attack epsilon {} is negative", self.epsilon)));
        }
        if self.pgd_steps < 1 || !(self.pgd_step_size > 0.0) {
            return Err(Error::InvalidSpec("pgd needs at least one step and a positive step size".into()));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return Err(Error::InvalidSpec(format!("clip range [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefenseConfig {
    pub iterations: usize,
    pub restarts: usize,
    pub learning_rate: f64,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            restarts: 10,
            learning_rate: 0.05,
        }
    }
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 || self.restarts < 1 {
            return Err(Error::InvalidSpec("projection needs L >= 1 and R >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec("projection learning rate must be positive".into()));
        }
        Ok(())
    }
}

// Zero maps to zero, unlike f64::signum.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn clip_to(v: f64, clip: Option<(f64, f64)>) -> f64 {
    match clip {
        Some((lo, hi)) => v.clamp(lo, hi),
        None => v,
    }
}

/// Gradient of the summed cross-entropy with respect to the input.
pub fn input_gradient(classifier: &ClassifierNet, x: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let tape = Tape::new();
    let input = tape.leaf(x.clone());
    let logp = classifier.net.bind(&tape, false).forward(input)?.log_softmax()?;
    logp.pick(labels)?.sum().neg().backward()?;
    Ok(input.grad().unwrap_or_else(|| Tensor::zeros(x.shape())))
}

// Pulls `v` toward `x0` until `|v - x0| <= eps` holds in floating point.
fn fit_ball(mut v: f64, x0: f64, eps: f64) -> f64 {
    v = v.clamp(x0 - eps, x0 + eps);
    while v - x0 > eps {
        v = v.next_down();
    }
    while x0 - v > eps {
        v = v.next_up();
    }
    v
}

fn ascend(x: &Tensor, grad: &Tensor, alpha: f64, clip: Option<(f64, f64)>) -> Tensor {
    let mut out = x.clone();
    for (o, g) in out.data_mut().iter_mut().zip(grad.data()) {
        *o = clip_to(*o + alpha * sign(*g), clip);
    }
    out
}

/// `clip(x + ε·sign(∇_x CE))`.
pub fn fgsm(classifier: &ClassifierNet, x: &Tensor, labels: &[usize], epsilon: f64, clip: Option<(f64, f64)>) -> Result<Tensor> {
    let grad = input_gradient(classifier, x, labels)?;
    let mut adv = ascend(x, &grad, epsilon, clip);
    for (a, x0) in adv.data_mut().iter_mut().zip(x.data()) {
        *a = fit_ball(*a, *x0, epsilon);
    }
    Ok(adv)
}

/// Iterated sign-gradient ascent, projected onto the ε-ball around `x`
/// after every step.
pub fn pgd(classifier: &ClassifierNet, x: &Tensor, labels: &[usize], cfg: &AttackConfig, seed: u64) -> Result<Tensor> {
    cfg.validate()?;
    let eps = cfg.epsilon;
    let mut cur = x.clone();
    if cfg.random_start && eps > 0.0 {
        let mut r = rng::stream(seed, "pgd-start");
        let u = Uniform::new_inclusive(-eps, eps).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        for v in cur.data_mut() {
            *v = clip_to(*v + u.sample(&mut r), cfg.clip);
        }
        for (c, x0) in cur.data_mut().iter_mut().zip(x.data()) {
            *c = fit_ball(*c, *x0, eps);
        }
    }
    for _ in 0..cfg.pgd_steps {
        let grad = input_gradient(classifier, &cur, labels)?;
        cur = ascend(&cur, &grad, cfg.pgd_step_size, cfg.clip);
        for (c, x0) in cur.data_mut().iter_mut().zip(x.data()) {
            *c = fit_ball(*c, *x0, eps);
        }
    }
    Ok(cur)
}

/// Runs the configured attack.
pub fn attack(classifier: &ClassifierNet, x: &Tensor, labels: &[usize], cfg: &AttackConfig, seed: u64) -> Result<Tensor> {
    cfg.validate()?;
    match cfg.kind {
        AttackKind::Fgsm => fgsm(classifier, x, labels, cfg.epsilon, cfg.clip),
        AttackKind::Pgd => pgd(classifier, x, labels, cfg, seed),
    }
}

/// Best restart per input row.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub latent: Tensor,
    pub reconstruction: Tensor,
    /// `‖G(z*) - x‖²` per row.
    pub residuals: Vec<f64>,
    /// Final residual of every restart, `[restart][row]`, NaN when discarded.
    pub restart_residuals: Vec<Vec<f64>>,
}

fn row_residuals(recon: &Tensor, x: &Tensor) -> Vec<f64> {
    (0..recon.rows())
        .map(|r| recon.row(r).iter().zip(x.row(r)).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect()
}

/// Plain gradient descent on `Σ_rows ‖G(z) - x‖²` from `z`; rows do not
/// interact, so this descends every row's residual independently.
pub fn descend_latent(generator: &GeneratorNet, x: &Tensor, mut z: Tensor, iterations: usize, lr: f64) -> Result<Tensor> {
    for _ in 0..iterations {
        let tape = Tape::new();
        let zv = tape.leaf(z.clone());
        let diff = generator.net.bind(&tape, false).forward(zv)?.sub(tape.constant(x.clone()))?;
        diff.square().sum().backward()?;
        let g = zv.grad().unwrap_or_else(|| Tensor::zeros(z.shape()));
        for (v, g) in z.data_mut().iter_mut().zip(g.data()) {
            *v -= lr * g;
        }
    }
    Ok(z)
}

/// Projects every row of `x` onto the generator's range from the given
/// starting latents, keeping the best finite restart per row.
pub fn latent_project_from(generator: &GeneratorNet, x: &Tensor, starts: &[Tensor], cfg: &DefenseConfig) -> Result<Projection> {
    cfg.validate()?;
    if x.cols() != generator.data_dim() {
        return Err(Error::InvalidSpec(format!(
            "input width {} but generator emits {}",
            x.cols(),
            generator.data_dim()
        )));
    }
    let n = x.rows();
    // All restarts run as one stacked batch.
    let stacked_x = Tensor::concat_rows(&vec![x; starts.len()])?;
    let stacked_z = Tensor::concat_rows(&starts.iter().collect::<Vec<_>>())?;
    let z = descend_latent(generator, &stacked_x, stacked_z, cfg.iterations, cfg.learning_rate)?;
    let recon = generator.net.eval(&z)?;
    let all = row_residuals(&recon, &stacked_x);

    let mut best: Vec<Option<usize>> = vec![None; n];
    let mut restart_residuals = Vec::with_capacity(starts.len());
    for r in 0..starts.len() {
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let k = r * n + i;
            let finite = all[k].is_finite() && z.row(k).iter().all(|v| v.is_finite());
            row.push(if finite { all[k] } else { f64::NAN });
            if finite && best[i].is_none_or(|b| all[k] < all[b]) {
                best[i] = Some(k);
            }
        }
        restart_residuals.push(row);
    }
    let mut picks = Vec::with_capacity(n);
    for (i, b) in best.iter().enumerate() {
        picks.push(b.ok_or_else(|| Error::Projection(format!("every restart diverged for row {i}")))?);
    }
    Ok(Projection {
        latent: z.gather_rows(&picks)?,
        reconstruction: recon.gather_rows(&picks)?,
        residuals: picks.iter().map(|&k| all[k]).collect(),
        restart_residuals,
    })
}

/// `R` restarts from `N(0, I)` latents, each drawn from its own stream.
pub fn latent_project(generator: &GeneratorNet, x: &Tensor, cfg: &DefenseConfig, seed: u64) -> Result<Projection> {
    cfg.validate()?;
    let starts: Vec<Tensor> = (0..cfg.restarts)
        .map(|r| rng::standard_normal(&mut rng::stream(seed, &format!("projection-{r}")), &[x.rows(), generator.latent_dim()]))
        .collect();
    latent_project_from(generator, x, &starts, cfg)
}

/// Classifies the projections of `x` instead of `x` itself.
pub fn defended_classify(
    classifier: &ClassifierNet,
    generator: &GeneratorNet,
    x: &Tensor,
    cfg: &DefenseConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    let proj = latent_project(generator, x, cfg, seed)?;
    let p = classifier.probabilities(&proj.reconstruction)?;
    Ok((0..p.rows()).map(|r| argmax(p.row(r))).collect())
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub clean_accuracy: f64,
    pub attacked_accuracy: f64,
    pub defended_accuracy: f64,
    pub attack: AttackKind,
    pub epsilon: f64,
}

pub const SWEEP_HEADER: &str = "L,R,seed,clean_acc,attacked_acc,defended_acc,attack,epsilon";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:?},{:?},{:?},{},{:?}",
            self.iterations,
            self.restarts,
            self.seed,
            self.clean_accuracy,
            self.attacked_accuracy,
            self.defended_accuracy,
            self.attack,
            self.epsilon
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Defended accuracy on attacked inputs over the `L × R × seed` grid.
/// The attack for a seed is computed once and shared by its grid points.
#[allow(clippy::too_many_arguments)]
pub fn defense_sweep(
    classifier: &ClassifierNet,
    generator: &GeneratorNet,
    test: &LabeledBatch,
    iterations: &[usize],
    restarts: &[usize],
    attack_cfg: &AttackConfig,
    seeds: &[u64],
    learning_rate: f64,
) -> Result<Vec<SweepRow>> {
    if iterations.is_empty() || restarts.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidSpec("defense sweep grid is empty".into()));
    }
    let clean_accuracy = classifier.accuracy(test)?;
    let mut attacked = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let adv = attack(classifier, &test.samples, &test.labels, attack_cfg, seed)?;
        let acc = accuracy(&classifier.predict(&adv)?, &test.labels);
        attacked.push((adv, acc));
    }
    let mut rows = Vec::new();
    for &l in iterations {
        for &r in restarts {
            let cfg = DefenseConfig {
                iterations: l,
                restarts: r,
                learning_rate,
            };
            for (&seed, (adv, attacked_accuracy)) in seeds.iter().zip(&attacked) {
                let pred = defended_classify(classifier, generator, adv, &cfg, seed)?;
                rows.push(SweepRow {
                    iterations: l,
                    restarts: r,
                    seed,
                    clean_accuracy,
                    attacked_accuracy: *attacked_accuracy,
                    defended_accuracy: accuracy(&pred, &test.labels),
                    attack: attack_cfg.kind,
                    epsilon: attack_cfg.epsilon,
                });
            }
        }
    }
    Ok(rows)
}
