//! Magnitude-based pruning, the comparison baseline.
//!
//! Weights and biases share one pool. Entries are ranked by absolute value;
//! equal magnitudes are ordered by (layer, row, column) with a row's bias
//! treated as the column after its last weight.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PruneScope {
    /// One ranking over every layer.
    #[default]
    Global,
    /// Each layer pruned at the same rate on its own.
    PerLayer,
}

impl FromStr for PruneScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(PruneScope::Global),
            "per-layer" | "per_layer" | "layer" => Ok(PruneScope::PerLayer),
            other => Err(Error::Config(format!("unknown pruning scope `{other}`"))),
        }
    }
}

impl fmt::Display for PruneScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneScope::Global => "global",
            PruneScope::PerLayer => "per-layer",
        })
    }
}

/// Position of one parameter: layer, row, column (`in_dim` for the bias).
type Slot = (usize, usize, usize);

fn slots<T: Scalar>(net: &Network<T>, layer: Option<usize>) -> Vec<(T, Slot)> {
    let mut out = Vec::new();
    for (k, l) in net.layers().iter().enumerate() {
        if layer.is_some_and(|only| only != k) {
            continue;
        }
        for i in 0..l.out_dim() {
            for (j, &w) in l.row(i).iter().enumerate() {
                out.push((w.abs(), (k, i, j)));
            }
            out.push((l.biases()[i].abs(), (k, i, l.in_dim())));
        }
    }
    // stable sort keeps the (layer, row, column) order among equal magnitudes
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite parameters"));
    out
}

fn zero_slots<T: Scalar>(net: &Network<T>, chosen: &[Slot]) -> Network<T> {
    let mut weights: Vec<Vec<T>> = net.layers().iter().map(|l| l.weights().to_vec()).collect();
    let mut biases: Vec<Vec<T>> = net.layers().iter().map(|l| l.biases().to_vec()).collect();
    for &(k, i, j) in chosen {
        let in_dim = net.layer(k).in_dim();
        if j == in_dim {
            biases[k][i] = T::zero();
        } else {
            weights[k][i * in_dim + j] = T::zero();
        }
    }
    let layers = net
        .layers()
        .iter()
        .zip(weights.into_iter().zip(biases))
        .map(|(l, (w, b))| l.with_params(w, b).expect("same shape"))
        .collect();
    Network::new(layers).expect("same architecture")
}

/// Number of entries removed from a pool of `n` at `rate`.
fn quota(rate: f64, n: usize) -> usize {
    ((rate * n as f64).floor() as usize).min(n)
}

/// Zeroes the `floor(rate * n)` smallest-magnitude parameters of each pool.
pub fn mbp_prune<T: Scalar>(net: &Network<T>, rate: f64, scope: PruneScope) -> Result<Network<T>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("pruning rate must lie in [0, 1], got {rate}")));
    }
    let mut chosen = Vec::new();
    match scope {
        PruneScope::Global => {
            let pool = slots(net, None);
            chosen.extend(pool[..quota(rate, pool.len())].iter().map(|&(_, s)| s));
        }
        PruneScope::PerLayer => {
            for k in 0..net.num_layers() {
                let pool = slots(net, Some(k));
                chosen.extend(pool[..quota(rate, pool.len())].iter().map(|&(_, s)| s));
            }
        }
    }
    Ok(zero_slots(net, &chosen))
}

/// Global magnitude pruning down to at most `target_nnz` non-zero parameters.
pub fn mbp_prune_to_sparsity<T: Scalar>(net: &Network<T>, target_nnz: usize) -> Result<Network<T>> {
    let nnz = net.count_nonzeros(T::zero()).total;
    if target_nnz > nnz {
        return Err(Error::Config(format!(
            "target of {target_nnz} non-zeros exceeds the network's {nnz}"
        )));
    }
    let chosen: Vec<Slot> = slots(net, None)
        .into_iter()
        .filter(|&(v, _)| v != T::zero())
        .take(nnz - target_nnz)
        .map(|(_, s)| s)
        .collect();
    Ok(zero_slots(net, &chosen))
}
