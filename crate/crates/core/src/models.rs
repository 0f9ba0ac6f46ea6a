//! The four networks: generator, discriminator, masked autoregressive
//! density model, and the mode classifier used for evaluation.
//!
//! Every network is a stack of dense layers `y = x·W + b` with `W` stored
//! `[in, out]`. Parameters live in plain [`Tensor`]s between steps; a forward
//! pass binds them onto a fresh [`Tape`], either as trainable leaves or as
//! constants.

use std::f64::consts::PI;

use crate::data::LabeledBatch;
use crate::error::{Error, Result};
use crate::optim::{adam_update, AdamConfig, AdamState};
use crate::rng::{self, Rng};
use crate::tensor::{self, Tape, Tensor, Var};

type TapeResult<T> = tensor::Result<T>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    fn apply<'t>(self, x: Var<'t>) -> Var<'t> {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.relu(),
            Activation::LeakyRelu(s) => x.leaky_relu(s),
            Activation::Sigmoid => x.sigmoid(),
        }
    }
}

/// Slope of the discriminator's hidden activation.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Default standard deviation of initial weights (variance 0.01).
pub const INIT_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Draws weights i.i.d. `N(0, std²)` and sets every bias to zero. `widths`
/// lists layer sizes from input to output.
pub fn init_params(widths: &[usize], std: f64, rng: &mut Rng) -> Result<Vec<Dense>> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::InvalidSpec(format!("bad layer widths {widths:?}")));
    }
    Ok(widths
        .windows(2)
        .map(|w| {
            let weight = rng::standard_normal(rng, &[w[0], w[1]]).map(|v| v * std);
            Dense {
                weight,
                bias: Tensor::zeros(&[w[1]]),
            }
        })
        .collect())
}

/// Feed-forward stack with one hidden activation and one output activation.
/// Optional per-layer binary masks multiply the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: Activation,
    pub output: Activation,
    masks: Option<Vec<Tensor>>,
}

impl Mlp {
    pub fn new(widths: &[usize], hidden: Activation, output: Activation, std: f64, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            layers: init_params(widths, std, rng)?,
            hidden,
            output,
            masks: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.shape()[1]
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.weight.shape()[1]));
        w
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// `l{i}.w` / `l{i}.b` names in the order of [`Mlp::params`].
    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{prefix}.l{i}.w"), format!("{prefix}.l{i}.b")])
            .collect()
    }

    pub fn masks(&self) -> Option<&[Tensor]> {
        self.masks.as_deref()
    }

    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> BoundMlp<'t> {
        let params = self
            .params()
            .into_iter()
            .map(|t| {
                if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        self.bind_with(tape, params)
    }

    /// Binds using caller-supplied parameter nodes, in [`Mlp::params`] order.
    pub fn bind_with<'t>(&self, tape: &'t Tape, params: Vec<Var<'t>>) -> BoundMlp<'t> {
        assert_eq!(params.len(), 2 * self.layers.len(), "one node per parameter");
        let weights = match &self.masks {
            None => params.iter().step_by(2).copied().collect(),
            Some(masks) => params
                .iter()
                .step_by(2)
                .zip(masks)
                .map(|(w, m)| w.mul(tape.constant(m.clone())).expect("mask shape matches weight"))
                .collect(),
        };
        BoundMlp {
            params,
            weights,
            hidden: self.hidden,
            output: self.output,
        }
    }

    /// Tape-free inference.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let out = self.bind(&tape, false).forward(tape.constant(x.clone()))?;
        Ok(out.value())
    }
}

/// An [`Mlp`] registered on a tape.
pub struct BoundMlp<'t> {
    params: Vec<Var<'t>>,
    weights: Vec<Var<'t>>,
    hidden: Activation,
    output: Activation,
}

impl<'t> BoundMlp<'t> {
    /// Returns the output pre-activation along with the last hidden layer.
    pub fn forward_parts(&self, x: Var<'t>) -> TapeResult<(Var<'t>, Var<'t>)> {
        let rows = x.shape()[0];
        let mut h = x;
        let mut features = x;
        let n = self.weights.len();
        for (i, w) in self.weights.iter().enumerate() {
            let b = self.params[2 * i + 1].tile_rows(rows)?;
            let pre = h.matmul(*w)?.add(b)?;
            if i + 1 == n {
                return Ok((pre, features));
            }
            h = self.hidden.apply(pre);
            features = h;
        }
        unreachable!("an Mlp has at least one layer")
    }

    pub fn forward(&self, x: Var<'t>) -> TapeResult<Var<'t>> {
        let (pre, _) = self.forward_parts(x)?;
        Ok(self.output.apply(pre))
    }

    pub fn params(&self) -> &[Var<'t>] {
        &self.params
    }

    /// Gradients in parameter order; zeros for parameters the loss did not
    /// reach.
    pub fn grads(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|p| p.grad().unwrap_or_else(|| Tensor::zeros(&p.shape())))
            .collect()
    }
}

/// Maps latent codes to data space.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    pub net: Mlp,
}

impl GeneratorNet {
    /// ReLU hidden layers; sigmoid output for binary data, identity otherwise.
    pub fn new(latent_dim: usize, hidden: &[usize], data_dim: usize, binary: bool, std: f64, rng: &mut Rng) -> Result<Self> {
        let widths = [&[latent_dim][..], hidden, &[data_dim]].concat();
        let output = if binary {
            Activation::Sigmoid
        } else {
            Activation::Identity
        };
        Ok(Self {
            net: Mlp::new(&widths, Activation::Relu, output, std, rng)?,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Tensor> {
        let z = rng::standard_normal(rng, &[n, self.latent_dim()]);
        self.net.eval(&z)
    }
}

/// Scores inputs in (0, 1). One parameter set serves every real/fake head.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorNet {
    pub net: Mlp,
}

impl DiscriminatorNet {
    pub fn new(data_dim: usize, hidden: &[usize], std: f64, rng: &mut Rng) -> Result<Self> {
        let widths = [&[data_dim][..], hidden, &[1]].concat();
        Ok(Self {
            net: Mlp::new(&widths, Activation::LeakyRelu(LEAKY_SLOPE), Activation::Sigmoid, std, rng)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArHead {
    /// Conditional `N(mean, sigma²)` with a fixed `sigma`.
    Gaussian { sigma: f64 },
    /// Conditional Bernoulli parameterised by a logit.
    Bernoulli,
}

/// Masked network over `d` inputs in raster order: output `i` sees only
/// inputs `0..i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoregressiveNet {
    pub net: Mlp,
    pub head: ArHead,
}

/// Connectivity degrees: inputs get `1..=d`, hidden units cycle through
/// `1..=d-1`.
fn made_masks(widths: &[usize]) -> Vec<Tensor> {
    let d = widths[0];
    let hidden_degree = |k: usize| if d > 1 { k % (d - 1) + 1 } else { 1 };
    let mut prev: Vec<usize> = (1..=d).collect();
    let mut masks = Vec::with_capacity(widths.len() - 1);
    for (li, &out) in widths[1..].iter().enumerate() {
        let last = li + 2 == widths.len();
        let degrees: Vec<usize> = if last {
            (1..=d).collect()
        } else {
            (0..out).map(hidden_degree).collect()
        };
        let mut m = Tensor::zeros(&[prev.len(), out]);
        for (i, &din) in prev.iter().enumerate() {
            for (j, &dout) in degrees.iter().enumerate() {
                let connected = if last { dout > din } else { dout >= din };
                if connected {
                    m.data_mut()[i * out + j] = 1.0;
                }
            }
        }
        masks.push(m);
        prev = degrees;
    }
    masks
}

impl AutoregressiveNet {
    pub fn new(data_dim: usize, hidden: &[usize], head: ArHead, std: f64, rng: &mut Rng) -> Result<Self> {
        let widths = [&[data_dim][..], hidden, &[data_dim]].concat();
        let mut net = Mlp::new(&widths, Activation::Relu, Activation::Identity, std, rng)?;
        net.masks = Some(made_masks(&widths));
        Ok(Self { net, head })
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Conditional parameters before the head link: means for the Gaussian
    /// head, logits for the Bernoulli head.
    pub fn conditionals<'t>(&self, bound: &BoundMlp<'t>, x: Var<'t>) -> TapeResult<Var<'t>> {
        Ok(bound.forward_parts(x)?.0)
    }

    /// Teacher-forced prediction of every dimension: means, or Bernoulli
    /// probabilities.
    pub fn predict<'t>(&self, bound: &BoundMlp<'t>, x: Var<'t>) -> TapeResult<Var<'t>> {
        let c = self.conditionals(bound, x)?;
        Ok(match self.head {
            ArHead::Gaussian { .. } => c,
            ArHead::Bernoulli => c.sigmoid(),
        })
    }

    /// Per-sample `log p(x) = Σ_i log p(x_i | x_<i)`, differentiable.
    pub fn log_likelihood_var<'t>(&self, bound: &BoundMlp<'t>, x: Var<'t>) -> TapeResult<Var<'t>> {
        let c = self.conditionals(bound, x)?;
        let per_dim = match self.head {
            ArHead::Gaussian { sigma } => {
                let z = x.sub(c)?.scale(1.0 / sigma);
                z.square()
                    .scale(-0.5)
                    .add_scalar(-0.5 * (2.0 * PI * sigma * sigma).ln())
            }
            // x·l - softplus(l)
            ArHead::Bernoulli => x.mul(c)?.sub(c.softplus())?,
        };
        per_dim.reduce(tensor::Reduce::Sum, Some(1))
    }

    pub fn log_likelihood(&self, x: &Tensor) -> Result<Vec<f64>> {
        if matches!(self.head, ArHead::Gaussian { .. }) {
            if let Some(&bad) = x.data().iter().find(|v| !v.is_finite()) {
                return Err(crate::TensorError::Domain {
                    op: "gaussian log-likelihood",
                    value: bad,
                }
                .into());
            }
        }
        let tape = Tape::new();
        let bound = self.net.bind(&tape, false);
        let ll = self.log_likelihood_var(&bound, tape.constant(x.clone()))?;
        Ok(ll.value().into_data())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let bound = self.net.bind(&tape, false);
        Ok(self.predict(&bound, tape.constant(x.clone()))?.value())
    }

    /// Ancestral sampling, one dimension at a time in raster order.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Tensor> {
        use rand::Rng as _;
        use rand_distr::{Distribution, StandardNormal};
        let d = self.dim();
        let mut x = Tensor::zeros(&[n, d]);
        for i in 0..d {
            let cond = {
                let tape = Tape::new();
                let bound = self.net.bind(&tape, false);
                self.conditionals(&bound, tape.constant(x.clone()))?.value()
            };
            for r in 0..n {
                let c = cond.data()[r * d + i];
                x.data_mut()[r * d + i] = match self.head {
                    ArHead::Gaussian { sigma } => {
                        let e: f64 = StandardNormal.sample(rng);
                        c + sigma * e
                    }
                    ArHead::Bernoulli => f64::from(u8::from(rng.random::<f64>() < tensor::sigmoid(c))),
                };
            }
        }
        Ok(x)
    }
}

/// Layer sizes and initialization shared by every network of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub ar_hidden: Vec<usize>,
    pub clf_hidden: Vec<usize>,
    /// Fixed std of the Gaussian conditionals.
    pub ar_sigma: f64,
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            gen_hidden: vec![128; 3],
            disc_hidden: vec![128; 3],
            ar_hidden: vec![128; 2],
            clf_hidden: vec![64; 3],
            ar_sigma: 0.05,
            init_std: INIT_STD,
        }
    }
}

/// Softmax classifier over mode labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierNet {
    pub net: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: AdamConfig,
    pub init_std: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64],
            epochs: 5,
            batch: 64,
            optimizer: AdamConfig {
                learning_rate: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            init_std: INIT_STD,
        }
    }
}

impl ClassifierNet {
    pub fn new(data_dim: usize, hidden: &[usize], classes: usize, std: f64, rng: &mut Rng) -> Result<Self> {
        let widths = [&[data_dim][..], hidden, &[classes]].concat();
        Ok(Self {
            net: Mlp::new(&widths, Activation::Relu, Activation::Identity, std, rng)?,
        })
    }

    pub fn classes(&self) -> usize {
        self.net.output_dim()
    }

    /// Mean cross-entropy of `x` against `labels`.
    pub fn loss<'t>(&self, bound: &BoundMlp<'t>, x: Var<'t>, labels: &[usize]) -> TapeResult<Var<'t>> {
        let logp = bound.forward(x)?.log_softmax()?;
        Ok(logp.pick(labels)?.mean().neg())
    }

    /// Class probabilities, one row per sample.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let logits = self.net.bind(&tape, false).forward(tape.constant(x.clone()))?;
        Ok(logits.log_softmax()?.value().map(f64::exp))
    }

    /// Activations of the last hidden layer.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let (_, feats) = self.net.bind(&tape, false).forward_parts(tape.constant(x.clone()))?;
        Ok(feats.value())
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let p = self.probabilities(x)?;
        Ok((0..p.rows()).map(|r| argmax(p.row(r))).collect())
    }

    pub fn accuracy(&self, data: &LabeledBatch) -> Result<f64> {
        let pred = self.predict(&data.samples)?;
        let hits = pred.iter().zip(&data.labels).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / data.len() as f64)
    }

    /// Minibatch cross-entropy training with Adam; returns the model and its
    /// accuracy on `held_out`.
    pub fn train(train: &LabeledBatch, held_out: &LabeledBatch, cfg: &ClassifierConfig, seed: u64) -> Result<(Self, f64)> {
        use rand::seq::SliceRandom;
        if let Some(&bad) = train.labels.iter().find(|&&l| l >= train.mode_count) {
            return Err(Error::InvalidSpec(format!("label {bad} outside {} classes", train.mode_count)));
        }
        let mut init = rng::stream(seed, "classifier-init");
        let mut clf = Self::new(train.dim(), &cfg.hidden, train.mode_count, cfg.init_std, &mut init)?;
        let mut state = AdamState::for_params(clf.net.params());
        let mut order_rng = rng::stream(seed, "classifier-order");
        let mut order: Vec<usize> = (0..train.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut order_rng);
            for chunk in order.chunks(cfg.batch.max(1)) {
                let x = train.samples.gather_rows(chunk)?;
                let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
                let tape = Tape::new();
                let bound = clf.net.bind(&tape, true);
                clf.loss(&bound, tape.constant(x), &labels)?.backward()?;
                let grads = bound.grads();
                adam_update(&mut clf.net.params_mut(), &grads, &mut state, &cfg.optimizer);
            }
        }
        let acc = clf.accuracy(held_out)?;
        Ok((clf, acc))
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_ring, MixtureSpec};
    use crate::tensor::gradient_check_many;

    fn zeroed(mut net: Mlp) -> Mlp {
        for p in net.params_mut() {
            p.data_mut().fill(0.0);
        }
        net
    }

    #[test]
    fn init_zero_bias_and_small_mean() {
        let mut rng = rng::stream(1, "init");
        let layers = init_params(&[100, 100, 3], INIT_STD, &mut rng).unwrap();
        assert!(layers.iter().all(|l| l.bias.data().iter().all(|&b| b == 0.0)));
        let w = &layers[0].weight;
        assert_eq!(w.len(), 10_000);
        let mean = w.data().iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 4.0 * INIT_STD / 100.0, "{mean}");
        let var = w.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        assert!((var - 0.01).abs() < 0.001, "{var}");
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&[4, 8, 2], 0.1, &mut rng::stream(5, "init")).unwrap();
        let b = init_params(&[4, 8, 2], 0.1, &mut rng::stream(5, "init")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_generator_outputs_zero() {
        let mut rng = rng::stream(0, "t");
        let g = GeneratorNet {
            net: zeroed(GeneratorNet::new(4, &[8, 8], 2, false, 0.1, &mut rng).unwrap().net),
        };
        assert!(g.sample(5, &mut rng).unwrap().data().iter().all(|&v| v == 0.0));
        let gs = GeneratorNet::new(4, &[8], 3, true, 1.0, &mut rng).unwrap();
        let x = gs.sample(50, &mut rng).unwrap();
        assert!(x.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_discriminator_scores_half() {
        let mut rng = rng::stream(0, "t");
        let d = zeroed(DiscriminatorNet::new(2, &[8], 0.1, &mut rng).unwrap().net);
        let s = d.eval(&Tensor::matrix(2, 2, vec![5.0, -3.0, 0.1, 100.0]).unwrap()).unwrap();
        assert_eq!(s.shape(), &[2, 1]);
        assert!(s.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn generator_jacobian_matches_differences() {
        let mut rng = rng::stream(2, "t");
        let g = GeneratorNet::new(3, &[6, 6], 2, false, 0.5, &mut rng).unwrap();
        let z = rng::standard_normal(&mut rng, &[4, 3]);
        // Random projection of the output turns the Jacobian into a gradient.
        let proj = rng::standard_normal(&mut rng, &[4, 2]);
        let err = gradient_check_many(
            |tape, v| {
                let out = g.net.bind(tape, false).forward(v[0])?;
                Ok(out.mul(tape.constant(proj.clone()))?.sum())
            },
            &[z],
            1e-5,
        );
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn masks_are_autoregressive() {
        let mut rng = rng::stream(3, "t");
        let ar = AutoregressiveNet::new(6, &[16, 16], ArHead::Gaussian { sigma: 0.05 }, 0.5, &mut rng).unwrap();
        let x = rng::standard_normal(&mut rng, &[3, 6]);
        let base = ar.forward(&x).unwrap();
        for j in 0..6 {
            let mut y = x.clone();
            for r in 0..3 {
                y.data_mut()[r * 6 + j] += 1.7;
            }
            let out = ar.forward(&y).unwrap();
            for r in 0..3 {
                for i in 0..=j {
                    assert_eq!(out.data()[r * 6 + i], base.data()[r * 6 + i], "col {i} saw input {j}");
                }
            }
        }
    }

    #[test]
    fn zero_bernoulli_model_is_fair_coin() {
        let mut rng = rng::stream(4, "t");
        let mut ar = AutoregressiveNet::new(5, &[8], ArHead::Bernoulli, 0.1, &mut rng).unwrap();
        ar.net = zeroed(ar.net);
        let x = Tensor::matrix(2, 5, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(ar.forward(&x).unwrap().data().iter().all(|&p| p == 0.5));
        for ll in ar.log_likelihood(&x).unwrap() {
            assert!((ll - 5.0 * 0.5f64.ln()).abs() < 1e-12);
        }
        let n = 4000;
        let s = ar.sample(n, &mut rng).unwrap();
        for i in 0..5 {
            let mean = (0..n).map(|r| s.data()[r * 5 + i]).sum::<f64>() / n as f64;
            assert!((mean - 0.5).abs() < 4.0 / (2.0 * (n as f64).sqrt()));
        }
    }

    #[test]
    fn gaussian_loglik_at_means() {
        let mut rng = rng::stream(6, "t");
        let sigma = 0.05;
        let ar = AutoregressiveNet::new(3, &[8], ArHead::Gaussian { sigma }, 0.5, &mut rng).unwrap();
        // The first mean is constant; fill later columns with their means
        // dimension by dimension so x equals the prediction everywhere.
        let mut x = Tensor::zeros(&[1, 3]);
        for i in 0..3 {
            let m = ar.forward(&x).unwrap();
            x.data_mut()[i] = m.data()[i];
        }
        assert_eq!(ar.forward(&x).unwrap(), x);
        let expected = -1.5 * (2.0 * PI * sigma * sigma).ln();
        assert!((ar.log_likelihood(&x).unwrap()[0] - expected).abs() < 1e-10);
        let bad = Tensor::matrix(1, 3, vec![0.0, f64::NAN, 0.0]).unwrap();
        assert!(ar.log_likelihood(&bad).is_err());
    }

    #[test]
    fn ancestral_sampling_is_seeded() {
        let mut rng = rng::stream(7, "t");
        let ar = AutoregressiveNet::new(4, &[8], ArHead::Bernoulli, 1.0, &mut rng).unwrap();
        let a = ar.sample(10, &mut rng::stream(1, "s")).unwrap();
        let b = ar.sample(10, &mut rng::stream(1, "s")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classifier_probabilities_sum_to_one() {
        let mut rng = rng::stream(8, "t");
        let c = ClassifierNet::new(2, &[8, 8, 8], 5, 1.0, &mut rng).unwrap();
        let x = rng::standard_normal(&mut rng, &[7, 2]);
        let p = c.probabilities(&x).unwrap();
        for r in 0..7 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(c.features(&x).unwrap().shape(), &[7, 8]);
    }

    #[test]
    fn classifier_separates_two_modes() {
        let spec = MixtureSpec::uniform(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.3).unwrap();
        let train = spec.sample(2000, 1);
        let test = spec.sample(1000, 2);
        let (_, acc) = ClassifierNet::train(&train, &test, &ClassifierConfig::default(), 0).unwrap();
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn classifier_matches_ring_oracle() {
        let spec = MixtureSpec::ring(8, 2.0, 0.02).unwrap();
        let train = spec.sample(8000, 1);
        let test = sample_ring(8, 2.0, 0.02, 2000, 2).unwrap();
        let (_, acc) = ClassifierNet::train(&train, &test, &ClassifierConfig::default(), 0).unwrap();
        assert!(acc >= 0.999, "{acc}");
    }
}
