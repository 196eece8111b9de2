//! The per-layer program: minimum-L1 parameters that keep every retained
//! validation sample inside its original activation region and class.
//!
//! Columns, in order:
//! * `2p` / `2p + 1`: positive and negative part of parameter `p`, where the
//!   parameters are the weights of the layer in row-major order followed by
//!   its biases. Both parts cost 1, so the objective is the L1 mass.
//! * one column per (retained sample, neuron) holding the new neuron value.
//!   Inactive neurons are pinned to 0; active ones carry the deviation box
//!   (and, for hidden layers, a small positive floor) as variable bounds.
//!
//! Rows, per retained sample:
//! * active neuron: `w_i . a + b_i - x~_i = 0`; inactive: `w_i . a + b_i <= 0`
//! * every downstream hidden neuron keeps its sign, and the label logit beats
//!   the others by the margin. Downstream layers are linear once their
//!   activation states are frozen, so these rows are written directly over the
//!   new neuron values instead of introducing columns for deeper layers.

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, RangedRow, Relation};
use crate::network::{ActivationPattern, Network};
use crate::scalar::Scalar;

use super::config::{EpsilonMode, SparsifyConfig};

/// Floor used to keep active neurons strictly positive and wins strict.
pub(crate) const STRICT_MARGIN: f64 = 1e-5;

/// Tolerance for re-checking a candidate against the program.
pub(crate) fn check_tol<T: Scalar>() -> T {
    T::of(1e-6).max(solve_tol::<T>() * T::of(10.0))
}

pub(crate) fn solve_tol<T: Scalar>() -> T {
    T::of(1e-9).max(T::epsilon().sqrt() * T::of(1e-2))
}

/// Validation samples the original network classifies correctly with the
/// requested margin, plus their original activation patterns.
#[derive(Debug, Clone)]
pub struct RetainedSamples<T: Scalar = f64> {
    pub samples: Vec<LabeledSample<T>>,
    /// Positions of `samples` in the validation set.
    pub indices: Vec<usize>,
    /// Validation positions dropped because the original network
    /// misclassifies them or misses the margin.
    pub excluded: Vec<usize>,
    pub patterns: Vec<ActivationPattern>,
}

impl<T: Scalar> RetainedSamples<T> {
    pub fn select(original: &Network<T>, val: &[LabeledSample<T>], margin: T) -> Result<Self> {
        if val.is_empty() {
            return Err(Error::Config("validation set is empty".into()));
        }
        let classes = original.output_dim();
        let mut out = Self {
            samples: Vec::new(),
            indices: Vec::new(),
            excluded: Vec::new(),
            patterns: Vec::new(),
        };
        for (idx, s) in val.iter().enumerate() {
            if s.label >= classes {
                return Err(Error::Data(format!(
                    "validation sample {idx} has label {} but the network has {classes} classes",
                    s.label
                )));
            }
            let trace = original.trace(&s.input)?;
            let logits = trace.logits();
            let ok = crate::scalar::argmax(logits) == s.label
                && crate::scalar::label_margin(logits, s.label) >= margin;
            if ok {
                out.samples.push(s.clone());
                out.indices.push(idx);
                out.patterns.push(crate::network::pattern_of(&trace));
            } else {
                out.excluded.push(idx);
            }
        }
        if out.samples.is_empty() {
            return Err(Error::Config(
                "no validation sample is classified correctly with the requested margin".into(),
            ));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How strictly sign and class conditions are encoded.
///
/// `Exact` uses the weakest rows that still imply the guarantees in exact
/// arithmetic (inactive means `<= 0`, ties resolve to the lower class).
/// `Padded` additionally keeps inactive neurons and every rival logit a small
/// distance away from the boundary, which survives floating-point round-off
/// at the cost of a slightly larger L1 mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Exact,
    Padded,
}

/// A built program plus what is needed to map between it and layer parameters.
#[derive(Debug, Clone)]
pub struct LayerLp<T: Scalar = f64> {
    pub lp: LinearProgram<T>,
    /// The same feasible set over the layer parameters alone, with the
    /// neuron values substituted out. Parameters are ordered as the weights
    /// (row-major) followed by the biases.
    pub ranged: Vec<RangedRow<T>>,
    /// 0-based index of the optimized layer.
    pub layer: usize,
    pub out_dim: usize,
    pub in_dim: usize,
    /// First column of the neuron values; sample `s`, neuron `i` is at
    /// `value_start + s * out_dim + i`.
    pub value_start: usize,
    inputs: Vec<Vec<T>>,
    active: Vec<Vec<bool>>,
}

impl<T: Scalar> LayerLp<T> {
    pub fn num_params(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }

    pub fn num_samples(&self) -> usize {
        self.inputs.len()
    }

    /// Number of weight and bias columns, counting both signed parts.
    pub fn num_param_columns(&self) -> usize {
        2 * self.num_params()
    }

    /// Parameters `(weights row-major, biases)` encoded by an LP point.
    pub fn params_from(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let p = self.num_params();
        let vals: Vec<T> = (0..p).map(|q| x[2 * q] - x[2 * q + 1]).collect();
        let nw = self.out_dim * self.in_dim;
        (vals[..nw].to_vec(), vals[nw..].to_vec())
    }

    /// The LP point realised by concrete parameters.
    pub fn point_for(&self, weights: &[T], biases: &[T]) -> Vec<T> {
        let mut x = Vec::with_capacity(self.lp.num_vars());
        for &v in weights.iter().chain(biases) {
            x.push(v.max(T::zero()));
            x.push((-v).max(T::zero()));
        }
        for (s, a) in self.inputs.iter().enumerate() {
            for i in 0..self.out_dim {
                let v = if self.active[s][i] {
                    let row = &weights[i * self.in_dim..(i + 1) * self.in_dim];
                    row.iter().zip(a).map(|(&w, &v)| w * v).sum::<T>() + biases[i]
                } else {
                    T::zero()
                };
                x.push(v);
            }
        }
        x
    }

    /// Largest violation of any row or bound by the given parameters.
    pub fn violation(&self, weights: &[T], biases: &[T]) -> T {
        self.lp.max_violation(&self.point_for(weights, biases))
    }
}

/// Builds the program for layer `k` of `current`, whose layers before `k`
/// are already committed and whose layers from `k` on are original.
pub fn build_layer_lp<T: Scalar>(
    current: &Network<T>,
    k: usize,
    retained: &RetainedSamples<T>,
    cfg: &SparsifyConfig<T>,
) -> Result<LayerLp<T>> {
    build_layer_lp_with(current, k, retained, cfg, Strictness::Exact)
}

/// Collects one row in both encodings.
struct RowSink<'a, T: Scalar> {
    lp: &'a mut LinearProgram<T>,
    ranged: &'a mut Vec<RangedRow<T>>,
    num_params: usize,
}

impl<T: Scalar> RowSink<'_, T> {
    /// Adds `sum_i coef_i * value_i  (rel)  rhs` for one sample, where
    /// `value_i` is the new value of neuron `i` (active neurons only).
    fn push(&mut self, sample: &SampleRows<T>, coef: &[T], relation: Relation, rhs: T) {
        let mut cols = Vec::new();
        let (mut min_act, mut max_act) = (T::zero(), T::zero());
        for (i, &c) in coef.iter().enumerate() {
            if c == T::zero() || !sample.active[i] {
                continue;
            }
            cols.push((sample.base + i, c));
            let (p, q) = (c * sample.lower[i], c * sample.upper[i]);
            min_act += p.min(q);
            max_act += p.max(q);
        }
        self.lp.add_constraint(cols, relation, rhs);
        // rows implied by the value boxes never bind; the solver does not need them
        let implied = match relation {
            Relation::Ge => min_act >= rhs,
            Relation::Le => max_act <= rhs,
            Relation::Eq => min_act == rhs && max_act == rhs,
        };
        if implied {
            return;
        }
        let mut params = vec![T::zero(); self.num_params];
        for (i, &c) in coef.iter().enumerate() {
            if c == T::zero() || !sample.active[i] {
                continue;
            }
            for &(p, g) in &sample.exprs[i] {
                params[p] += c * g;
            }
        }
        let coeffs: Vec<(usize, T)> = params
            .into_iter()
            .enumerate()
            .filter(|(_, g)| *g != T::zero())
            .collect();
        let (lower, upper) = match relation {
            Relation::Ge => (rhs, T::infinity()),
            Relation::Le => (T::neg_infinity(), rhs),
            Relation::Eq => (rhs, rhs),
        };
        self.ranged.push(RangedRow { coeffs, lower, upper });
    }
}

/// Per-sample data needed while emitting downstream rows.
struct SampleRows<T> {
    base: usize,
    active: Vec<bool>,
    /// Bounds of each neuron's new value.
    lower: Vec<T>,
    upper: Vec<T>,
    /// Each neuron's pre-activation as a sparse function of the parameters.
    exprs: Vec<Vec<(usize, T)>>,
}

pub(crate) fn build_layer_lp_with<T: Scalar>(
    current: &Network<T>,
    k: usize,
    retained: &RetainedSamples<T>,
    cfg: &SparsifyConfig<T>,
    strictness: Strictness,
) -> Result<LayerLp<T>> {
    cfg.validate()?;
    if retained.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    if k >= current.num_layers() {
        return Err(Error::Config(format!("layer {} does not exist", k + 1)));
    }
    let n_layers = current.num_layers();
    let is_output = k + 1 == n_layers;
    let layer = current.layer(k);
    let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
    let num_params = out_dim * (in_dim + 1);
    let nw = out_dim * in_dim;
    let strict = T::of(STRICT_MARGIN);
    let two = T::of(2.0);
    let padded = strictness == Strictness::Padded;
    // distance kept from zero by a value that must stay on one side of it
    let floor = |v: T| strict.min(v.abs() / two);

    let mut lp = LinearProgram::new();
    for _ in 0..num_params {
        lp.add_var(T::zero(), T::infinity(), T::one());
        lp.add_var(T::zero(), T::infinity(), T::one());
    }
    let value_start = lp.num_vars();
    let mut ranged = Vec::new();

    let mut inputs = Vec::with_capacity(retained.len());
    let mut active_all = Vec::with_capacity(retained.len());

    for (s, sample) in retained.samples.iter().enumerate() {
        let trace = current.trace(&sample.input)?;
        let pattern = &retained.patterns[s];
        let a = &trace.post[k];
        let z = &trace.pre[k];
        let active: Vec<bool> = if is_output {
            vec![true; out_dim]
        } else {
            pattern.layer(k).to_vec()
        };
        let exprs: Vec<Vec<(usize, T)>> = (0..out_dim)
            .map(|i| {
                let mut e: Vec<(usize, T)> = a
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != T::zero())
                    .map(|(j, &v)| (i * in_dim + j, v))
                    .collect();
                e.push((nw + i, T::one()));
                e
            })
            .collect();

        let base = lp.num_vars();
        let mut lower = vec![T::zero(); out_dim];
        let mut upper = vec![T::zero(); out_dim];
        for i in 0..out_dim {
            let mut coeffs: Vec<(usize, T)> = Vec::with_capacity(2 * exprs[i].len() + 1);
            for &(p, g) in &exprs[i] {
                coeffs.push((2 * p, g));
                coeffs.push((2 * p + 1, -g));
            }
            if active[i] {
                let c = z[i];
                let (mut lo, hi) = match cfg.epsilon_mode {
                    EpsilonMode::Additive => (c - cfg.epsilon, c + cfg.epsilon),
                    EpsilonMode::Multiplicative => {
                        let (p, q) = ((T::one() - cfg.epsilon) * c, (T::one() + cfg.epsilon) * c);
                        (p.min(q), p.max(q))
                    }
                };
                if !is_output {
                    lo = lo.max(floor(c.max(T::zero())));
                }
                if lo > hi || (!is_output && c <= T::zero()) {
                    return Err(Error::Internal(format!(
                        "sample {} left its original activation region before layer {}",
                        retained.indices[s],
                        k + 1
                    )));
                }
                lp.add_var(lo, hi, T::zero());
                lower[i] = lo;
                upper[i] = hi;
                coeffs.push((base + i, -T::one()));
                lp.add_constraint(coeffs, Relation::Eq, T::zero());
                ranged.push(RangedRow {
                    coeffs: exprs[i].clone(),
                    lower: lo,
                    upper: hi,
                });
            } else {
                let top = if padded { -floor(z[i]) } else { T::zero() };
                lp.add_var(T::zero(), T::zero(), T::zero());
                lp.add_constraint(coeffs, Relation::Le, top);
                ranged.push(RangedRow {
                    coeffs: exprs[i].clone(),
                    lower: T::neg_infinity(),
                    upper: top,
                });
            }
        }

        let rows = SampleRows {
            base,
            active,
            lower,
            upper,
            exprs,
        };
        let mut sink = RowSink {
            lp: &mut lp,
            ranged: &mut ranged,
            num_params,
        };
        let logits = trace.logits();
        let label = sample.label;
        // rows (label - rival) . A v >= gap - (c_label - c_rival)
        let class_rows = |sink: &mut RowSink<'_, T>, amat: &[Vec<T>], cvec: &[T]| {
            for i in 0..amat.len() {
                if i == label {
                    continue;
                }
                let gap = if i > label && !padded {
                    cfg.margin
                } else {
                    cfg.margin.max(floor((logits[label] - logits[i]).max(T::zero())))
                };
                let diff: Vec<T> = amat[label].iter().zip(&amat[i]).map(|(&p, &q)| p - q).collect();
                sink.push(&rows, &diff, Relation::Ge, gap - (cvec[label] - cvec[i]));
            }
        };

        if is_output {
            let eye: Vec<Vec<T>> = (0..out_dim)
                .map(|i| (0..out_dim).map(|j| if i == j { T::one() } else { T::zero() }).collect())
                .collect();
            class_rows(&mut sink, &eye, &vec![T::zero(); out_dim]);
        } else {
            // affine map from the new values of layer k to the pre-activations
            // of layer m, with downstream ReLUs frozen to the original pattern
            let next = current.layer(k + 1);
            let mut amat: Vec<Vec<T>> = (0..next.out_dim()).map(|r| next.row(r).to_vec()).collect();
            let mut cvec: Vec<T> = next.biases().to_vec();
            for m in k + 1..n_layers {
                if m + 1 == n_layers {
                    class_rows(&mut sink, &amat, &cvec);
                    break;
                }
                let zm = &trace.pre[m];
                let pm = pattern.layer(m);
                for j in 0..amat.len() {
                    if pm[j] {
                        sink.push(&rows, &amat[j], Relation::Ge, floor(zm[j].max(T::zero())) - cvec[j]);
                    } else {
                        let top = if padded { -floor(zm[j]) } else { T::zero() };
                        sink.push(&rows, &amat[j], Relation::Le, top - cvec[j]);
                    }
                }
                let nl = current.layer(m + 1);
                let mut next_a = vec![vec![T::zero(); out_dim]; nl.out_dim()];
                let mut next_c = nl.biases().to_vec();
                for r in 0..nl.out_dim() {
                    let w = nl.row(r);
                    for &j in nl.row_nonzeros(r) {
                        if !pm[j] {
                            continue;
                        }
                        let wj = w[j];
                        next_c[r] += wj * cvec[j];
                        for (dst, &src) in next_a[r].iter_mut().zip(&amat[j]) {
                            *dst += wj * src;
                        }
                    }
                }
                amat = next_a;
                cvec = next_c;
            }
        }

        inputs.push(a.clone());
        active_all.push(rows.active);
    }

    Ok(LayerLp {
        lp,
        ranged,
        layer: k,
        out_dim,
        in_dim,
        value_start,
        inputs,
        active: active_all,
    })
}
