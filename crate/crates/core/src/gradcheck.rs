//! Finite-difference checks of every tape primitive and every training loss.

use crate::data::LabeledBatch;
use crate::models::{ArHead, AutoregressiveNet, ClassifierNet, DiscriminatorNet, GeneratorNet, Mlp};
use crate::rng::{self, Rng};
use crate::tensor::{gradient_check_many, Tensor, Var};
use crate::training::{ar_loss, discriminator_loss, generator_loss, hgan_discriminator_loss, ArLoss};

pub const THRESHOLD: f64 = 1e-4;
pub const STATES: u64 = 10;
const STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Worst relative error over all states.
    pub max_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error < THRESHOLD
    }
}

fn normal(rng: &mut Rng, shape: &[usize]) -> Tensor {
    rng::standard_normal(rng, shape)
}

// Keeps points at least 0.2 from the kink at zero.
fn off_zero(t: Tensor) -> Tensor {
    t.map(|v| if v >= 0.0 { v + 0.2 } else { v - 0.2 })
}

// Keeps points 0.1 away from the clip bounds at ±1.
fn off_clip_bounds(t: Tensor) -> Tensor {
    t.map(|v| if (v.abs() - 1.0).abs() < 0.1 { v * 0.8 } else { v })
}

fn worst(name: &str, mut state: impl FnMut(u64) -> f64) -> CheckResult {
    let max_error = (0..STATES).map(&mut state).fold(0.0, |a: f64, e| if e.is_nan() { f64::INFINITY } else { a.max(e) });
    CheckResult {
        name: name.to_string(),
        max_error,
    }
}

type UnaryFn = for<'t> fn(Var<'t>) -> crate::tensor::Result<Var<'t>>;

fn unary_checks() -> Vec<CheckResult> {
    let table: [(&str, UnaryFn, fn(Tensor) -> Tensor); 11] = [
        ("neg", |x| Ok(x.neg()), |t| t),
        ("log", |x| x.log(), |t| t.map(|v| v.abs() + 0.5)),
        ("exp", |x| Ok(x.exp()), |t| t),
        ("sigmoid", |x| Ok(x.sigmoid()), |t| t),
        ("tanh", |x| Ok(x.tanh()), |t| t),
        ("relu", |x| Ok(x.relu()), off_zero),
        ("leaky_relu", |x| Ok(x.leaky_relu(0.2)), off_zero),
        ("abs", |x| Ok(x.abs()), off_zero),
        ("clip", |x| Ok(x.clip(-1.0, 1.0)), off_clip_bounds),
        ("softplus", |x| Ok(x.softplus()), |t| t),
        ("square", |x| Ok(x.square()), |t| t),
    ];
    table
        .iter()
        .map(|&(name, f, prep)| {
            worst(name, |s| {
                let mut r = rng::stream(s, name);
                let x = prep(normal(&mut r, &[3, 4]));
                let w = normal(&mut r, &[3, 4]);
                gradient_check_many(
                    |tape, v| f(v[0])?.mul(tape.constant(w.clone())).map(|y| y.sum()),
                    &[x],
                    STEP,
                )
            })
        })
        .collect()
}

fn structural_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, op) in [("add", 0), ("sub", 1), ("mul", 2), ("scalar_mul", 3)] {
        out.push(worst(name, |s| {
            let mut r = rng::stream(s, name);
            let a = normal(&mut r, &[2, 3]);
            let b = if op == 3 { normal(&mut r, &[1]) } else { normal(&mut r, &[2, 3]) };
            let w = normal(&mut r, &[2, 3]);
            gradient_check_many(
                |tape, v| {
                    let y = match op {
                        0 => v[0].add(v[1])?,
                        1 => v[0].sub(v[1])?,
                        _ => v[0].mul(v[1])?,
                    };
                    Ok(y.mul(tape.constant(w.clone()))?.sum())
                },
                &[a, b],
                STEP,
            )
        }));
    }
    out.push(worst("matmul", |s| {
        let mut r = rng::stream(s, "matmul");
        let a = normal(&mut r, &[3, 4]);
        let b = normal(&mut r, &[4, 2]);
        let w = normal(&mut r, &[3, 2]);
        gradient_check_many(|tape, v| Ok(v[0].matmul(v[1])?.mul(tape.constant(w.clone()))?.sum()), &[a, b], STEP)
    }));
    for (name, axis) in [("sum_axis0", Some(0)), ("mean_axis1", Some(1)), ("mean_all", None)] {
        out.push(worst(name, |s| {
            let mut r = rng::stream(s, name);
            let x = normal(&mut r, &[3, 4]);
            let wshape: Vec<usize> = match axis {
                Some(0) => vec![4],
                Some(_) => vec![3],
                None => vec![1],
            };
            let w = normal(&mut r, &wshape);
            let kind = if name.starts_with("sum") { crate::tensor::Reduce::Sum } else { crate::tensor::Reduce::Mean };
            gradient_check_many(
                |tape, v| {
                    let red = v[0].reduce(kind, axis)?;
                    let w = tape.constant(w.clone().reshape(red.shape())?);
                    Ok(red.mul(w)?.sum())
                },
                &[x],
                STEP,
            )
        }));
    }
    out.push(worst("tile_rows", |s| {
        let mut r = rng::stream(s, "tile_rows");
        let b = normal(&mut r, &[3]);
        let w = normal(&mut r, &[4, 3]);
        gradient_check_many(|tape, v| Ok(v[0].tile_rows(4)?.mul(tape.constant(w.clone()))?.sum()), &[b], STEP)
    }));
    out.push(worst("log_softmax_pick", |s| {
        let mut r = rng::stream(s, "log_softmax");
        let x = normal(&mut r, &[4, 5]).map(|v| 2.0 * v);
        let labels = [0usize, 3, 4, 1];
        gradient_check_many(|_, v| Ok(v[0].log_softmax()?.pick(&labels)?.sum()), &[x], STEP)
    }));
    out.push(worst("clamped_log", |s| {
        let mut r = rng::stream(s, "clamped_log");
        let x = normal(&mut r, &[2, 3]).map(|v| v.abs() + 0.1);
        gradient_check_many(|_, v| Ok(v[0].clamped_log(1e-12).sum()), &[x], STEP)
    }));
    out
}

struct SmallNets {
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    gaussian: AutoregressiveNet,
    bernoulli: AutoregressiveNet,
    classifier: ClassifierNet,
}

const DZ: usize = 3;
const DIM: usize = 4;
const BATCH: usize = 5;

fn small_nets(seed: u64) -> SmallNets {
    let mut r = rng::stream(seed, "gradcheck-nets");
    // Wider init than training uses, so the checks see non-trivial curvature.
    let std = 0.5;
    let mut nets = SmallNets {
        generator: GeneratorNet::new(DZ, &[6, 6], DIM, false, std, &mut r).expect("valid sizes"),
        discriminator: DiscriminatorNet::new(DIM, &[6, 6], std, &mut r).expect("valid sizes"),
        gaussian: AutoregressiveNet::new(DIM, &[8], ArHead::Gaussian { sigma: 0.5 }, std, &mut r).expect("valid sizes"),
        bernoulli: AutoregressiveNet::new(DIM, &[8], ArHead::Bernoulli, std, &mut r).expect("valid sizes"),
        classifier: ClassifierNet::new(DIM, &[6, 6], 3, std, &mut r).expect("valid sizes"),
    };
    // Zero biases let a dead layer feed exact zeros into the next
    // activation's kink; random biases keep every state off the kinks.
    for net in [
        &mut nets.generator.net,
        &mut nets.discriminator.net,
        &mut nets.gaussian.net,
        &mut nets.bernoulli.net,
        &mut nets.classifier.net,
    ] {
        for layer in &mut net.layers {
            let shape = layer.bias.shape().to_vec();
            layer.bias = normal(&mut r, &shape).map(|v| 0.3 * v);
        }
    }
    nets
}

fn params_of(net: &Mlp) -> Vec<Tensor> {
    net.params().into_iter().cloned().collect()
}

fn loss_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(worst("discriminator_loss/phi_D", |s| {
        let nets = small_nets(s);
        let mut r = rng::stream(s, "gradcheck-d");
        let x = normal(&mut r, &[BATCH, DIM]);
        let x_xi = normal(&mut r, &[BATCH, DIM]);
        let fake = nets.generator.net.eval(&normal(&mut r, &[BATCH, DZ])).expect("shapes");
        gradient_check_many(
            |tape, v| {
                let d = nets.discriminator.net.bind_with(tape, v.to_vec());
                let sr1 = d.forward(tape.constant(x_xi.clone()))?;
                let sr2 = d.forward(tape.constant(x.clone()))?;
                let sf = d.forward(tape.constant(fake.clone()))?;
                Ok(hgan_discriminator_loss(sr1, sr2, sf, sf))
            },
            &params_of(&nets.discriminator.net),
            STEP,
        )
    }));
    out.push(worst("gan_discriminator_loss/phi_D", |s| {
        let nets = small_nets(s);
        let mut r = rng::stream(s, "gradcheck-d2");
        let x = normal(&mut r, &[BATCH, DIM]);
        let fake = nets.generator.net.eval(&normal(&mut r, &[BATCH, DZ])).expect("shapes");
        gradient_check_many(
            |tape, v| {
                let d = nets.discriminator.net.bind_with(tape, v.to_vec());
                let sr = d.forward(tape.constant(x.clone()))?;
                let sf = d.forward(tape.constant(fake.clone()))?;
                Ok(discriminator_loss(&[sr], &[sf]))
            },
            &params_of(&nets.discriminator.net),
            STEP,
        )
    }));
    out.push(worst("generator_loss/theta_G", |s| {
        let nets = small_nets(s);
        let mut r = rng::stream(s, "gradcheck-g");
        let z1 = normal(&mut r, &[BATCH, DZ]);
        let z2 = normal(&mut r, &[BATCH, DZ]);
        gradient_check_many(
            |tape, v| {
                let g = nets.generator.net.bind_with(tape, v.to_vec());
                let d = nets.discriminator.net.bind(tape, false);
                let f1 = d.forward(g.forward(tape.constant(z1.clone()))?)?;
                let f2 = d.forward(g.forward(tape.constant(z2.clone()))?)?;
                Ok(generator_loss(&[f1, f2]))
            },
            &params_of(&nets.generator.net),
            STEP,
        )
    }));
    for (name, binary, mode) in [
        ("ar_loss_l1/theta_xi", false, ArLoss::L1),
        ("ar_loss_nll_gaussian/theta_xi", false, ArLoss::Nll),
        ("ar_loss_nll_bernoulli/theta_xi", true, ArLoss::Nll),
    ] {
        out.push(worst(name, |s| {
            let nets = small_nets(s);
            let ar = if binary { &nets.bernoulli } else { &nets.gaussian };
            let mut r = rng::stream(s, name);
            let x = if binary {
                normal(&mut r, &[BATCH, DIM]).map(|v| f64::from(u8::from(v > 0.0)))
            } else {
                normal(&mut r, &[BATCH, DIM])
            };
            gradient_check_many(
                |tape, v| {
                    let bound = ar.net.bind_with(tape, v.to_vec());
                    Ok(ar_loss(ar, &bound, tape.constant(x.clone()), mode)?.0)
                },
                &params_of(&ar.net),
                STEP,
            )
        }));
    }
    out.push(worst("projection_residual/z", |s| {
        let nets = small_nets(s);
        let mut r = rng::stream(s, "gradcheck-proj");
        let z = normal(&mut r, &[BATCH, DZ]);
        let x = normal(&mut r, &[BATCH, DIM]);
        gradient_check_many(
            |tape, v| {
                let g = nets.generator.net.bind(tape, false);
                Ok(g.forward(v[0])?.sub(tape.constant(x.clone()))?.square().sum())
            },
            &[z],
            STEP,
        )
    }));
    out.push(worst("classifier_loss/params", |s| {
        let nets = small_nets(s);
        let mut r = rng::stream(s, "gradcheck-clf");
        let x = normal(&mut r, &[BATCH, DIM]);
        let labels = LabeledBatch {
            samples: x.clone(),
            labels: vec![0, 1, 2, 1, 0],
            mode_count: 3,
        };
        gradient_check_many(
            |tape, v| {
                let bound = nets.classifier.net.bind_with(tape, v.to_vec());
                nets.classifier.loss(&bound, tape.constant(labels.samples.clone()), &labels.labels)
            },
            &params_of(&nets.classifier.net),
            STEP,
        )
    }));
    out.push(worst("classifier_loss/input", |s| {
        let nets = small_nets(s);
        let mut r = rng::stream(s, "gradcheck-clf-x");
        let x = normal(&mut r, &[BATCH, DIM]);
        gradient_check_many(
            |tape, v| {
                let bound = nets.classifier.net.bind(tape, false);
                nets.classifier.loss(&bound, v[0], &[2, 1, 0, 0, 1])
            },
            &[x],
            STEP,
        )
    }));
    out
}

/// Every check, primitives first.
pub fn run_all() -> Vec<CheckResult> {
    let mut out = unary_checks();
    out.extend(structural_checks());
    out.extend(loss_checks());
    out
}

/// One `name error PASS|FAIL` line per check.
pub fn report(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "{:<34} {:>10.3e} {}\n",
            r.name,
            r.max_error,
            if r.passed() { "PASS" } else { "FAIL" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let results = run_all();
        assert!(results.len() >= 25);
        let failed: Vec<_> = results.iter().filter(|r| !r.passed()).collect();
        assert!(failed.is_empty(), "{}", report(&results));
    }

    #[test]
    fn broken_gradient_is_caught() {
        // At its kink relu's one-sided derivative disagrees with the
        // central difference of 0.5.
        let err = gradient_check_many(|_, v| Ok(v[0].relu().sum()), &[Tensor::vector(vec![0.0])], STEP);
        assert!(err >= THRESHOLD);
    }
}
