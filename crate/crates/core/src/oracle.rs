//! Exact robustness decisions for tiny networks, plus a sampling falsifier.
//!
//! The exact search walks the linear regions of the network inside the
//! input box. Neurons whose sign is fixed over the whole box are settled
//! without branching; the rest are split into an active and an inactive
//! half, and halves with an empty region are discarded by a feasibility LP.
//! On every complete region the network is affine, so one LP per rival class
//! decides whether that class can overtake the label there.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Relation};
use crate::network::Network;
use crate::scalar::{argmax, Scalar};
use crate::verify::{Bounds, RobustnessProperty};

/// A rival class counts as winning when it beats the label by at least this much.
pub const WIN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    /// Largest number of hidden neurons accepted.
    pub max_neurons: usize,
    /// Largest number of complete regions examined before giving up.
    pub max_patterns: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_neurons: 24,
            max_patterns: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict<T: Scalar = f64> {
    Robust,
    /// A point in the box whose forward pass does not pick the label.
    NotRobust(Vec<T>),
    ResourceExceeded,
}

impl<T: Scalar> OracleVerdict<T> {
    pub fn kind(&self) -> OracleKind {
        match self {
            OracleVerdict::Robust => OracleKind::Robust,
            OracleVerdict::NotRobust(_) => OracleKind::NotRobust,
            OracleVerdict::ResourceExceeded => OracleKind::ResourceExceeded,
        }
    }
}

/// Verdict without the counterexample payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OracleKind {
    Robust,
    NotRobust,
    ResourceExceeded,
}

impl OracleKind {
    pub const ALL: [OracleKind; 3] = [OracleKind::Robust, OracleKind::NotRobust, OracleKind::ResourceExceeded];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Robust => "robust",
            OracleKind::NotRobust => "not robust",
            OracleKind::ResourceExceeded => "resource exceeded",
        })
    }
}

/// Decides whether any point of the box changes the predicted class.
pub fn exact_verify<T: Scalar>(
    net: &Network<T>,
    prop: &RobustnessProperty<T>,
    limits: &OracleLimits,
) -> Result<OracleVerdict<T>> {
    prop.validate(net)?;
    let rivals: Vec<usize> = (0..net.output_dim()).filter(|&i| i != prop.label).collect();
    if net.predict(&prop.center)? != prop.label {
        return Ok(OracleVerdict::NotRobust(prop.center.clone()));
    }
    Search::new(net, prop, rivals, limits).run()
}

/// Decides whether class `rival` can beat the label anywhere in the box.
pub fn exact_verify_against<T: Scalar>(
    net: &Network<T>,
    prop: &RobustnessProperty<T>,
    rival: usize,
    limits: &OracleLimits,
) -> Result<OracleVerdict<T>> {
    prop.validate(net)?;
    if rival >= net.output_dim() || rival == prop.label {
        return Err(Error::Config(format!("class {rival} is not a rival of label {}", prop.label)));
    }
    if net.predict(&prop.center)? == rival {
        return Ok(OracleVerdict::NotRobust(prop.center.clone()));
    }
    Search::new(net, prop, vec![rival], limits).run()
}

/// Affine map `x -> A x + c` over the input, one row per neuron.
struct Affine<T> {
    rows: Vec<Vec<T>>,
    constants: Vec<T>,
}

struct Search<'a, T: Scalar> {
    net: &'a Network<T>,
    prop: &'a RobustnessProperty<T>,
    rivals: Vec<usize>,
    limits: OracleLimits,
    bounds: Bounds<T>,
    leaves: usize,
    tol: T,
}

enum Found<T> {
    Nothing,
    Counterexample(Vec<T>),
    OutOfBudget,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn new(net: &'a Network<T>, prop: &'a RobustnessProperty<T>, rivals: Vec<usize>, limits: &OracleLimits) -> Self {
        Self {
            net,
            prop,
            rivals,
            limits: *limits,
            bounds: prop.input_box(),
            leaves: 0,
            tol: T::of(1e-9).max(T::epsilon().sqrt() * T::of(1e-2)),
        }
    }

    fn run(mut self) -> Result<OracleVerdict<T>> {
        if self.net.hidden_neurons() > self.limits.max_neurons {
            return Ok(OracleVerdict::ResourceExceeded);
        }
        let d = self.net.input_dim();
        let identity = Affine {
            rows: (0..d)
                .map(|i| {
                    let mut r = vec![T::zero(); d];
                    r[i] = T::one();
                    r
                })
                .collect(),
            constants: vec![T::zero(); d],
        };
        let mut region = Vec::new();
        Ok(match self.layer(0, &identity, &mut region)? {
            Found::Nothing => OracleVerdict::Robust,
            Found::Counterexample(x) => OracleVerdict::NotRobust(x),
            Found::OutOfBudget => OracleVerdict::ResourceExceeded,
        })
    }

    /// `feed` gives the outputs of layer `k - 1` as affine functions of the input.
    fn layer(&mut self, k: usize, feed: &Affine<T>, region: &mut Vec<(Vec<T>, T, Relation)>) -> Result<Found<T>> {
        let layer = self.net.layer(k);
        let d = self.net.input_dim();
        let mut pre = Affine {
            rows: vec![vec![T::zero(); d]; layer.out_dim()],
            constants: layer.biases().to_vec(),
        };
        for i in 0..layer.out_dim() {
            let w = layer.row(i);
            for &j in layer.row_nonzeros(i) {
                pre.constants[i] += w[j] * feed.constants[j];
                for (acc, &a) in pre.rows[i].iter_mut().zip(&feed.rows[j]) {
                    *acc += w[j] * a;
                }
            }
        }
        if k + 1 == self.net.num_layers() {
            return self.leaf(&pre, region);
        }
        // sign fixed over the whole box: settle without branching
        let mut state: Vec<Option<bool>> = Vec::with_capacity(layer.out_dim());
        for i in 0..layer.out_dim() {
            let lo = crate::verify::affine_lower(&pre.rows[i], pre.constants[i], &self.bounds);
            let neg: Vec<T> = pre.rows[i].iter().map(|&v| -v).collect();
            let hi = -crate::verify::affine_lower(&neg, -pre.constants[i], &self.bounds);
            state.push(if lo >= T::zero() {
                Some(true)
            } else if hi <= T::zero() {
                Some(false)
            } else {
                None
            });
        }
        self.branch(k, &pre, &mut state, 0, region)
    }

    fn branch(
        &mut self,
        k: usize,
        pre: &Affine<T>,
        state: &mut Vec<Option<bool>>,
        from: usize,
        region: &mut Vec<(Vec<T>, T, Relation)>,
    ) -> Result<Found<T>> {
        let Some(i) = (from..state.len()).find(|&i| state[i].is_none()) else {
            let post = Affine {
                rows: pre
                    .rows
                    .iter()
                    .zip(state.iter())
                    .map(|(r, s)| if *s == Some(true) { r.clone() } else { vec![T::zero(); r.len()] })
                    .collect(),
                constants: pre
                    .constants
                    .iter()
                    .zip(state.iter())
                    .map(|(&c, s)| if *s == Some(true) { c } else { T::zero() })
                    .collect(),
            };
            return self.layer(k + 1, &post, region);
        };
        for active in [true, false] {
            let relation = if active { Relation::Ge } else { Relation::Le };
            region.push((pre.rows[i].clone(), pre.constants[i], relation));
            if self.feasible(region, None)?.is_some() {
                state[i] = Some(active);
                let found = self.branch(k, pre, state, i + 1, region)?;
                state[i] = None;
                if !matches!(found, Found::Nothing) {
                    region.pop();
                    return Ok(found);
                }
            }
            region.pop();
        }
        Ok(Found::Nothing)
    }

    fn leaf(&mut self, logits: &Affine<T>, region: &[(Vec<T>, T, Relation)]) -> Result<Found<T>> {
        self.leaves += 1;
        if self.leaves > self.limits.max_patterns {
            return Ok(Found::OutOfBudget);
        }
        let label = self.prop.label;
        for &rival in &self.rivals.clone() {
            let diff: Vec<T> = logits.rows[rival]
                .iter()
                .zip(&logits.rows[label])
                .map(|(&a, &b)| a - b)
                .collect();
            let offset = logits.constants[rival] - logits.constants[label];
            let Some(x) = self.feasible(region, Some((&diff, offset)))? else {
                continue;
            };
            let gap = offset + diff.iter().zip(&x).map(|(&a, &v)| a * v).sum::<T>();
            if gap < T::of(WIN_GAP) {
                continue;
            }
            let out = self.net.logits(&x)?;
            if out[rival] > out[label] {
                return Ok(Found::Counterexample(x));
            }
            if gap > T::of(1e-6) {
                return Err(Error::Internal(format!(
                    "region LP reports a gap of {gap} that the forward pass does not reproduce"
                )));
            }
        }
        Ok(Found::Nothing)
    }

    /// A point of the box satisfying every region row; with `objective`, one
    /// that maximizes `coeffs . x + offset`.
    fn feasible(&self, region: &[(Vec<T>, T, Relation)], objective: Option<(&[T], T)>) -> Result<Option<Vec<T>>> {
        let d = self.net.input_dim();
        let mut program = LinearProgram::new();
        for i in 0..d {
            let cost = objective.map_or(T::zero(), |(c, _)| -c[i]);
            program.add_var(self.bounds.lower[i], self.bounds.upper[i], cost);
        }
        for (row, constant, relation) in region {
            let coeffs: Vec<(usize, T)> = row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(|(j, &v)| (j, v))
                .collect();
            program.add_constraint(coeffs, *relation, -*constant);
        }
        let sol = lp::solve(&program, self.tol)?;
        Ok(sol.is_optimal().then_some(sol.values))
    }
}

/// Looks for a misclassified point by sampling: the center, `n_samples`
/// uniform points, then every corner when the input has at most 20 dimensions.
pub fn attack<T: Scalar>(
    net: &Network<T>,
    prop: &RobustnessProperty<T>,
    n_samples: usize,
    seed: u64,
) -> Result<Option<Vec<T>>> {
    prop.validate(net)?;
    if net.predict(&prop.center)? != prop.label {
        return Ok(Some(prop.center.clone()));
    }
    let b = prop.input_box();
    let d = b.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![T::zero(); d];
    for _ in 0..n_samples {
        for i in 0..d {
            let u = T::of(rng.random::<f64>());
            x[i] = b.lower[i] + u * (b.upper[i] - b.lower[i]);
        }
        if argmax(&net.logits(&x)?) != prop.label {
            return Ok(Some(x));
        }
    }
    if d <= 20 {
        for mask in 0u32..(1u32 << d) {
            for i in 0..d {
                x[i] = if mask >> i & 1 == 1 { b.upper[i] } else { b.lower[i] };
            }
            if argmax(&net.logits(&x)?) != prop.label {
                return Ok(Some(x));
            }
        }
    }
    Ok(None)
}
