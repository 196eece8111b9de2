//! Layer-by-layer sparsification into a verification-friendly network.
//!
//! Each selected layer is replaced by the minimum-L1 parameters that keep
//! every retained validation sample in its original activation region, within
//! the deviation box on the layer's neuron values, and classified with the
//! requested margin. Layers are processed in ascending order and each result
//! is committed before the next program is built.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::lp;
use crate::network::{Layer, Network};
use crate::scalar::{argmax, label_margin, Scalar};

mod config;
mod layer;

pub use config::{EpsilonMode, LayerSelection, SparsifyConfig};
pub use layer::{build_layer_lp, LayerLp, RetainedSamples, Strictness};

/// Result of optimizing one layer.
#[derive(Debug, Clone)]
pub struct LayerSolution<T: Scalar = f64> {
    /// 0-based layer index.
    pub layer: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    /// L1 mass of the returned parameters.
    pub objective: T,
    /// New neuron values of the layer, one vector per retained sample.
    pub values: Vec<Vec<T>>,
    /// Set when the original layer was kept; explains why.
    pub warning: Option<String>,
    pub lp_vars: usize,
    pub lp_constraints: usize,
    /// Parameters snapped to zero and kept at zero.
    pub snapped: usize,
    /// Snaps undone to restore feasibility.
    pub restored: usize,
}

impl<T: Scalar> LayerSolution<T> {
    pub fn changed(&self) -> bool {
        self.warning.is_none()
    }
}

/// Optimizes layer `k` of `current` (layers before `k` already committed).
pub fn sparsify_layer<T: Scalar>(
    current: &Network<T>,
    k: usize,
    retained: &RetainedSamples<T>,
    cfg: &SparsifyConfig<T>,
) -> Result<LayerSolution<T>> {
    let layer = current.layer(k);
    let tol = layer::check_tol::<T>();
    let opts = lp::SolverOptions {
        tol: layer::solve_tol::<T>(),
        max_iterations: None,
    };
    let nnz_now = layer.nnz(T::zero());
    let exact = layer::build_layer_lp_with(current, k, retained, cfg, Strictness::Exact)?;
    let mut reason = String::new();

    for strictness in [Strictness::Exact, Strictness::Padded] {
        let built = match strictness {
            Strictness::Exact => exact.clone(),
            Strictness::Padded => layer::build_layer_lp_with(current, k, retained, cfg, strictness)?,
        };
        let Some(params) = lp::solve_min_l1(built.num_params(), &built.ranged, &opts)? else {
            reason = "program is infeasible".into();
            break;
        };
        let nw = layer.out_dim() * layer.in_dim();
        let (w, b) = (params[..nw].to_vec(), params[nw..].to_vec());
        let (sw, sb, snapped, restored) = snap(&built, &w, &b, cfg.zero_threshold, tol);
        for (cw, cb, sn, rs) in [(sw, sb, snapped, restored), (w, b, 0, 0)] {
            let candidate = layer.with_params(cw.clone(), cb.clone())?;
            if candidate.nnz(T::zero()) > nnz_now {
                reason = "solution is denser than the current layer".into();
                continue;
            }
            let net = current.with_layer(k, candidate)?;
            match semantic_check(current, &net, k, retained, cfg, tol) {
                Ok(()) => return Ok(finish(current, k, retained, &built, cw, cb, None, sn, rs)),
                Err(e) => reason = e,
            }
        }
    }

    let (orig_w, orig_b) = (layer.weights().to_vec(), layer.biases().to_vec());
    if exact.violation(&orig_w, &orig_b) > tol {
        return Err(Error::Internal(format!(
            "layer {}: the unmodified layer violates its own program",
            k + 1
        )));
    }
    let warning = format!("layer {}: {reason}; keeping the original layer", k + 1);
    Ok(finish(current, k, retained, &exact, orig_w, orig_b, Some(warning), 0, 0))
}

/// Zeroes parameters below `threshold`, then undoes snaps in increasing
/// magnitude order until the program is satisfied again.
fn snap<T: Scalar>(
    built: &LayerLp<T>,
    w: &[T],
    b: &[T],
    threshold: T,
    tol: T,
) -> (Vec<T>, Vec<T>, usize, usize) {
    let nw = w.len();
    let all: Vec<T> = w.iter().chain(b).copied().collect();
    let mut small: Vec<usize> = (0..all.len())
        .filter(|&p| all[p] != T::zero() && all[p].abs() < threshold)
        .collect();
    if small.is_empty() {
        return (w.to_vec(), b.to_vec(), 0, 0);
    }
    small.sort_by(|&p, &q| all[p].abs().partial_cmp(&all[q].abs()).expect("finite").then(p.cmp(&q)));
    let mut cur = all.clone();
    for &p in &small {
        cur[p] = T::zero();
    }
    let mut restored = 0;
    while built.violation(&cur[..nw], &cur[nw..]) > tol && restored < small.len() {
        let p = small[restored];
        cur[p] = all[p];
        restored += 1;
    }
    (cur[..nw].to_vec(), cur[nw..].to_vec(), small.len() - restored, restored)
}

/// Exact forward re-check of the guarantees on every retained sample.
fn semantic_check<T: Scalar>(
    current: &Network<T>,
    candidate: &Network<T>,
    k: usize,
    retained: &RetainedSamples<T>,
    cfg: &SparsifyConfig<T>,
    tol: T,
) -> std::result::Result<(), String> {
    let is_output = k + 1 == candidate.num_layers();
    for (s, sample) in retained.samples.iter().enumerate() {
        let before = current.trace(&sample.input).map_err(|e| e.to_string())?;
        let after = candidate.trace(&sample.input).map_err(|e| e.to_string())?;
        let id = retained.indices[s];
        if crate::network::pattern_of(&after) != retained.patterns[s] {
            return Err(format!("validation sample {id} changes its activation pattern"));
        }
        let logits = after.logits();
        if argmax(logits) != sample.label {
            return Err(format!("validation sample {id} changes class"));
        }
        if label_margin(logits, sample.label) < cfg.margin - tol {
            return Err(format!("validation sample {id} misses the margin"));
        }
        for (i, (&old, &new)) in before.pre[k].iter().zip(&after.pre[k]).enumerate() {
            let active = is_output || retained.patterns[s].layer(k)[i];
            if !active {
                continue;
            }
            let (lo, hi) = match cfg.epsilon_mode {
                EpsilonMode::Additive => (old - cfg.epsilon, old + cfg.epsilon),
                EpsilonMode::Multiplicative => {
                    let (p, q) = ((T::one() - cfg.epsilon) * old, (T::one() + cfg.epsilon) * old);
                    (p.min(q), p.max(q))
                }
            };
            if new < lo - tol || new > hi + tol {
                return Err(format!("validation sample {id} leaves the deviation box"));
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Scalar>(
    current: &Network<T>,
    k: usize,
    retained: &RetainedSamples<T>,
    built: &LayerLp<T>,
    weights: Vec<T>,
    biases: Vec<T>,
    warning: Option<String>,
    snapped: usize,
    restored: usize,
) -> LayerSolution<T> {
    let layer = current
        .layer(k)
        .with_params(weights.clone(), biases.clone())
        .expect("solver output is finite and correctly shaped");
    let net = current.with_layer(k, layer.clone()).expect("same shape");
    let values = retained
        .samples
        .iter()
        .map(|s| net.forward(&s.input).expect("validated input")[k + 1].clone())
        .collect();
    LayerSolution {
        layer: k,
        objective: layer.l1_mass(),
        weights,
        biases,
        values,
        warning,
        lp_vars: built.lp.num_vars(),
        lp_constraints: built.lp.num_constraints(),
        snapped,
        restored,
    }
}

/// One row of the sparsification report.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    /// 0-based layer index.
    pub layer: usize,
    pub l1_before: f64,
    pub l1_after: f64,
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub lp_vars: usize,
    pub lp_constraints: usize,
    pub seconds: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparsifyReport {
    pub layers: Vec<LayerReport>,
    /// Validation positions excluded up front.
    pub excluded: Vec<usize>,
    pub retained: usize,
}

impl SparsifyReport {
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.layers.iter().filter_map(|l| l.warning.as_deref())
    }

    /// CSV with a 1-based `layer` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,l1_before,l1_after,nnz_before,nnz_after,lp_vars,lp_constraints,seconds\n");
        for l in &self.layers {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6}",
                l.layer + 1,
                l.l1_before,
                l.l1_after,
                l.nnz_before,
                l.nnz_after,
                l.lp_vars,
                l.lp_constraints,
                l.seconds
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::util::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Runs the whole pipeline and returns the sparsified network.
pub fn sparsify_network<T: Scalar>(
    original: &Network<T>,
    val: &[LabeledSample<T>],
    cfg: &SparsifyConfig<T>,
) -> Result<(Network<T>, SparsifyReport)> {
    cfg.validate()?;
    let layers = cfg.layers.resolve(original.num_layers())?;
    let mut report = SparsifyReport::default();
    if layers.is_empty() {
        return Ok((original.clone(), report));
    }
    let retained = RetainedSamples::select(original, val, cfg.margin)?;
    report.excluded = retained.excluded.clone();
    report.retained = retained.len();

    let mut current = original.clone();
    for k in layers {
        let started = Instant::now();
        let before = current.layer(k).clone();
        let sol = sparsify_layer(&current, k, &retained, cfg)?;
        let after: Layer<T> = before.with_params(sol.weights.clone(), sol.biases.clone())?;
        report.layers.push(LayerReport {
            layer: k,
            l1_before: before.l1_mass().to_f64_lossy(),
            l1_after: after.l1_mass().to_f64_lossy(),
            nnz_before: before.nnz(T::zero()),
            nnz_after: after.nnz(T::zero()),
            lp_vars: sol.lp_vars,
            lp_constraints: sol.lp_constraints,
            seconds: started.elapsed().as_secs_f64(),
            warning: sol.warning.clone(),
        });
        current = current.with_layer(k, after)?;
    }
    Ok((current, report))
}
