mod common;

use common::nets::random_net;
use proptest::prelude::*;
use vnn_core::baselines::{mbp_prune, mbp_prune_to_sparsity, PruneScope};
use vnn_core::{Activation, Layer, Network};

fn one_row(weights: Vec<f64>, bias: f64) -> Network<f64> {
    let n = weights.len();
    Network::new(vec![
        Layer::new(1, n, weights, vec![bias], Activation::Relu).unwrap(),
        Layer::from_rows(&[vec![1.0]], vec![0.0], Activation::Identity).unwrap(),
    ])
    .unwrap()
}

fn params(net: &Network<f64>) -> Vec<f64> {
    net.layers().iter().flat_map(|l| l.weights().iter().chain(l.biases()).copied()).collect()
}

#[test]
fn per_layer_half() {
    // pool of five: four weights and a bias of 5
    let net = one_row(vec![1.0, -0.1, 0.2, -2.0], 5.0);
    let pruned = mbp_prune(&net, 0.5, PruneScope::PerLayer).unwrap();
    assert_eq!(pruned.layer(0).weights(), &[1.0, 0.0, 0.0, -2.0]);
    assert_eq!(pruned.layer(0).biases(), &[5.0]);
}

#[test]
fn extreme_rates() {
    let net = random_net(&[3, 5, 2], 1);
    for scope in [PruneScope::Global, PruneScope::PerLayer] {
        assert_eq!(mbp_prune(&net, 0.0, scope).unwrap(), net);
        assert!(params(&mbp_prune(&net, 1.0, scope).unwrap()).iter().all(|&v| v == 0.0));
    }
    assert!(mbp_prune(&net, 1.5, PruneScope::Global).is_err());
}

#[test]
fn ties_follow_position() {
    // equal magnitudes: earlier positions go first
    let net = one_row(vec![0.5, -0.5, 0.5], 0.5);
    let pruned = mbp_prune(&net, 0.5, PruneScope::Global).unwrap();
    // pool of 6 (3 weights, 1 bias, 1 output weight, 1 output bias); 3 removed
    let p = params(&pruned);
    assert_eq!(p, vec![0.0, 0.0, 0.5, 0.5, 1.0, 0.0]);
}

#[test]
fn matched_sparsity_limits() {
    let net = random_net(&[3, 5, 2], 2);
    let nnz = net.count_nonzeros(0.0).total;
    assert_eq!(mbp_prune_to_sparsity(&net, nnz).unwrap(), net);
    assert_eq!(mbp_prune_to_sparsity(&net, 0).unwrap().count_nonzeros(0.0).total, 0);
    assert!(mbp_prune_to_sparsity(&net, nnz + 1).is_err());
}

proptest! {
    #[test]
    fn pruning_zeroes_exactly_the_smallest(seed in 0u64..10_000, rate in 0.0f64..=1.0, target_frac in 0.0f64..=1.0) {
        let net = random_net(&[3, 4, 3], seed);
        let before = params(&net);
        for pruned in [
            mbp_prune(&net, rate, PruneScope::Global).unwrap(),
            mbp_prune_to_sparsity(&net, (target_frac * before.len() as f64) as usize).unwrap(),
        ] {
            let after = params(&pruned);
            let zeroed: Vec<usize> = (0..before.len()).filter(|&i| after[i] == 0.0 && before[i] != 0.0).collect();
            let kept: Vec<usize> = (0..before.len()).filter(|&i| after[i] != 0.0).collect();
            for &i in &kept {
                prop_assert_eq!(after[i], before[i]);
            }
            let max_zeroed = zeroed.iter().map(|&i| before[i].abs()).fold(0.0, f64::max);
            let min_kept = kept.iter().map(|&i| before[i].abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(max_zeroed <= min_kept);
        }
        let target = (target_frac * before.len() as f64) as usize;
        let matched = mbp_prune_to_sparsity(&net, target.min(net.count_nonzeros(0.0).total)).unwrap();
        prop_assert!(matched.count_nonzeros(0.0).total <= target);
        let global = mbp_prune(&net, rate, PruneScope::Global).unwrap();
        let removed = before.len() - params(&global).iter().filter(|&&v| v != 0.0).count();
        prop_assert_eq!(removed, (rate * before.len() as f64).floor() as usize);
    }
}
