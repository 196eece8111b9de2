//! Minimal seeded SGD trainer for test and benchmark fixtures.
//!
//! This is not a serious trainer: per-sample SGD on softmax cross-entropy with
//! He-normal initialisation, nothing else. It exists so the rest of the crate
//! can be exercised on reproducible desk-scale models.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Hidden layer widths, e.g. `[8, 8]` for a 2x8 network.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(hidden: Vec<usize>, epochs: usize, seed: u64) -> Self {
        Self {
            hidden,
            epochs,
            learning_rate: 0.05,
            seed,
        }
    }
}

/// Seeded He-normal initialisation with zero biases.
pub fn init_network<T: Scalar>(
    input_dim: usize,
    hidden: &[usize],
    classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Network<T>> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(classes);
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(k, d)| {
            let (fan_in, fan_out) = (d[0], d[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| Error::Config(e.to_string()))?;
            let weights = (0..fan_in * fan_out)
                .map(|_| T::of(normal.sample(rng)))
                .collect();
            let act = if k == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::new(fan_out, fan_in, weights, vec![T::zero(); fan_out], act)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

/// Trains a classifier on `samples`. Deterministic for a given seed.
pub fn train_fixture<T: Scalar>(
    samples: &[LabeledSample<T>],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<Network<T>> {
    let input_dim = samples
        .first()
        .map(|s| s.input.len())
        .ok_or_else(|| Error::Data("cannot train on an empty sample set".into()))?;
    if samples.iter().any(|s| s.input.len() != input_dim || s.label >= classes) {
        return Err(Error::Data("samples inconsistent with architecture".into()));
    }
    if cfg.hidden.contains(&0) {
        return Err(Error::Config("hidden widths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = init_network::<T>(input_dim, &cfg.hidden, classes, &mut rng)?;

    let mut weights: Vec<Vec<T>> = net.layers().iter().map(|l| l.weights().to_vec()).collect();
    let mut biases: Vec<Vec<T>> = net.layers().iter().map(|l| l.biases().to_vec()).collect();
    let dims: Vec<(usize, usize)> = net.layers().iter().map(|l| (l.out_dim(), l.in_dim())).collect();
    let n_layers = dims.len();
    let lr = T::of(cfg.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();

    // train on mean-centred inputs, fold the shift into the first bias at the end
    let count = T::of(samples.len() as f64);
    let mean: Vec<T> = (0..input_dim)
        .map(|d| samples.iter().map(|s| s.input[d]).sum::<T>() / count)
        .collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = T::zero();
        for &idx in &order {
            let sample = &samples[idx];
            // forward
            let centred: Vec<T> = sample.input.iter().zip(&mean).map(|(&v, &m)| v - m).collect();
            let mut acts: Vec<Vec<T>> = vec![centred];
            for k in 0..n_layers {
                let (out, inp) = dims[k];
                let x = &acts[k];
                let z: Vec<T> = (0..out)
                    .map(|i| {
                        let row = &weights[k][i * inp..(i + 1) * inp];
                        row.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>() + biases[k][i]
                    })
                    .collect();
                let a = if k + 1 == n_layers {
                    z
                } else {
                    z.into_iter().map(|v| v.max(T::zero())).collect()
                };
                acts.push(a);
            }
            let logits = &acts[n_layers];
            let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
            let sum: T = exps.iter().copied().sum();
            total_loss += sum.ln() - (logits[sample.label] - max);

            // backward
            let mut delta: Vec<T> = exps.iter().map(|&e| e / sum).collect();
            delta[sample.label] -= T::one();
            for k in (0..n_layers).rev() {
                let (out, inp) = dims[k];
                let x = &acts[k];
                let mut prev = vec![T::zero(); inp];
                if k > 0 {
                    for i in 0..out {
                        let row = &weights[k][i * inp..(i + 1) * inp];
                        for j in 0..inp {
                            prev[j] += row[j] * delta[i];
                        }
                    }
                    for (p, &a) in prev.iter_mut().zip(x) {
                        if a <= T::zero() {
                            *p = T::zero();
                        }
                    }
                }
                for i in 0..out {
                    let g = lr * delta[i];
                    let row = &mut weights[k][i * inp..(i + 1) * inp];
                    for j in 0..inp {
                        row[j] -= g * x[j];
                    }
                    biases[k][i] -= g;
                }
                delta = prev;
            }
        }
        if !total_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
    }

    let (out0, in0) = dims[0];
    for i in 0..out0 {
        let shift: T = weights[0][i * in0..(i + 1) * in0]
            .iter()
            .zip(&mean)
            .map(|(&w, &m)| w * m)
            .sum();
        biases[0][i] -= shift;
    }

    let layers = net
        .layers()
        .iter()
        .zip(weights.into_iter().zip(biases))
        .map(|(l, (w, b))| {
            l.with_params(w, b)
                .map_err(|_| Error::TrainingDiverged { epoch: cfg.epochs })
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

/// Fraction of samples classified correctly.
pub fn accuracy<T: Scalar>(net: &Network<T>, samples: &[LabeledSample<T>]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in samples {
        if net.predict(&s.input)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}
