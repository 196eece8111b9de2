mod common;

use common::nets::{net_a, random_net, self_labelled};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnn_core::verify::{
    interval_bounds, polyhedral_bounds, relu_relaxation, verify_robustness, LayerBounds, Method, RobustnessProperty,
    Verdict,
};
use vnn_core::{Activation, Layer, Network};

fn two_input_net() -> Network<f64> {
    Network::new(vec![
        Layer::from_rows(&[vec![1.0, -1.0]], vec![0.0], Activation::Relu).unwrap(),
        Layer::from_rows(&[vec![1.0]], vec![0.0], Activation::Identity).unwrap(),
    ])
    .unwrap()
}

#[test]
fn interval_example() {
    let prop = RobustnessProperty::new(vec![0.5, 0.5], 0.5, 0);
    let b = interval_bounds(&two_input_net(), &prop).unwrap();
    assert_eq!((b.pre[0].lower[0], b.pre[0].upper[0]), (-1.0, 1.0));
    assert_eq!((b.post[0].lower[0], b.post[0].upper[0]), (0.0, 1.0));
}

#[test]
fn zero_layer_bounds_are_its_biases() {
    let net = Network::new(vec![
        Layer::new(2, 2, vec![0.0; 4], vec![0.3, -0.2], Activation::Relu).unwrap(),
        Layer::from_rows(&[vec![1.0, 1.0]], vec![0.0], Activation::Identity).unwrap(),
    ])
    .unwrap();
    let prop = RobustnessProperty::new(vec![0.5, 0.5], 0.4, 0);
    for b in [interval_bounds(&net, &prop).unwrap(), polyhedral_bounds(&net, &prop).unwrap()] {
        assert_eq!(b.pre[0].lower, vec![0.3, -0.2]);
        assert_eq!(b.pre[0].upper, vec![0.3, -0.2]);
    }
}

#[test]
fn relaxation_rules() {
    let r = relu_relaxation(-1.0, 1.0);
    assert_eq!(r.upper_slope, 0.5);
    assert_eq!(r.upper_offset, 0.5);
    assert_eq!(r.lower_slope, 0.0);
    assert_eq!(relu_relaxation(-1.0, 3.0).lower_slope, 1.0);
    let active = relu_relaxation(0.5, 2.0);
    assert_eq!((active.lower_slope, active.upper_slope, active.upper_offset), (1.0, 1.0, 0.0));
    let dead = relu_relaxation(-2.0, -0.5);
    assert_eq!((dead.lower_slope, dead.upper_slope, dead.upper_offset), (0.0, 0.0, 0.0));
}

#[test]
fn stable_active_neuron_keeps_interval() {
    // pre-activation x1 + 1 over [0,1]^2 stays in [1, 2]
    let net = Network::new(vec![
        Layer::from_rows(&[vec![1.0, 0.0]], vec![1.0], Activation::Relu).unwrap(),
        Layer::from_rows(&[vec![1.0]], vec![0.0], Activation::Identity).unwrap(),
    ])
    .unwrap();
    let prop = RobustnessProperty::new(vec![0.5, 0.5], 0.5, 0);
    let p = polyhedral_bounds(&net, &prop).unwrap();
    assert_eq!((p.post[0].lower[0], p.post[0].upper[0]), (1.0, 2.0));
    assert_eq!((p.post[1].lower[0], p.post[1].upper[0]), (1.0, 2.0));
}

#[test]
fn net_a_is_verified_by_both() {
    let prop = RobustnessProperty::new(vec![1.0, 2.0], 0.05, 1);
    for method in Method::ALL {
        let r = verify_robustness(&net_a(), &prop, method).unwrap();
        assert_eq!(r.verdict, Verdict::Verified, "{method}");
        assert!(r.min_margin_lower() > 2.0);
    }
}

#[test]
fn point_properties_follow_the_classifier() {
    let net = net_a();
    let right = RobustnessProperty::new(vec![1.0, 2.0], 0.0, 1);
    let wrong = RobustnessProperty::new(vec![1.0, 2.0], 0.0, 0);
    for method in Method::ALL {
        assert_eq!(verify_robustness(&net, &right, method).unwrap().verdict, Verdict::Verified);
        assert_eq!(verify_robustness(&net, &wrong, method).unwrap().verdict, Verdict::Unknown);
    }
}

#[test]
fn clipping_limits_the_box() {
    let prop = RobustnessProperty::<f64>::new(vec![0.05, 0.95], 0.1, 0).clipped(true);
    let b = prop.input_box();
    assert_eq!(b.lower, vec![0.0, 0.85]);
    assert!((b.upper[0] - 0.15).abs() < 1e-15);
    assert_eq!(b.upper[1], 1.0);
}

#[test]
fn invalid_properties_are_rejected() {
    let net = net_a();
    assert!(verify_robustness(&net, &RobustnessProperty::new(vec![1.0, 2.0], -0.1, 0), Method::Interval).is_err());
    assert!(verify_robustness(&net, &RobustnessProperty::new(vec![1.0, 2.0], 0.1, 5), Method::Interval).is_err());
    assert!(verify_robustness(&net, &RobustnessProperty::new(vec![1.0], 0.1, 0), Method::Interval).is_err());
}

fn contains(b: &LayerBounds<f64>, net: &Network<f64>, x: &[f64]) -> bool {
    let t = net.trace(x).unwrap();
    (0..net.num_layers()).all(|k| {
        (0..t.pre[k].len()).all(|i| {
            let (z, a) = (t.pre[k][i], t.post[k + 1][i]);
            z >= b.pre[k].lower[i] - 1e-9
                && z <= b.pre[k].upper[i] + 1e-9
                && a >= b.post[k].lower[i] - 1e-9
                && a <= b.post[k].upper[i] + 1e-9
        })
    })
}

fn random_case(seed: u64) -> (Network<f64>, RobustnessProperty<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..5);
    let width = rng.random_range(2..8);
    let depth = rng.random_range(1..4);
    let mut dims = vec![dim];
    dims.extend(std::iter::repeat_n(width, depth));
    dims.push(rng.random_range(2..4));
    let net = random_net(&dims, seed);
    let sample = self_labelled(&net, 1, seed).remove(0);
    let delta = rng.random_range(0.0..0.15);
    (net, RobustnessProperty::new(sample.input, delta, sample.label))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn bounds_contain_sampled_values(seed in 0u64..100_000) {
        let (net, prop) = random_case(seed);
        let ib = interval_bounds(&net, &prop).unwrap();
        let pb = polyhedral_bounds(&net, &prop).unwrap();
        let b = prop.input_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..300 {
            let x: Vec<f64> = (0..b.len()).map(|i| rng.random_range(b.lower[i]..=b.upper[i])).collect();
            prop_assert!(contains(&ib, &net, &x));
            prop_assert!(contains(&pb, &net, &x));
        }
    }

    #[test]
    fn polyhedral_within_interval(seed in 0u64..100_000) {
        let (net, prop) = random_case(seed);
        let ib = interval_bounds(&net, &prop).unwrap();
        let pb = polyhedral_bounds(&net, &prop).unwrap();
        for k in 0..net.num_layers() {
            prop_assert!(pb.pre[k].within(&ib.pre[k], 1e-9));
            prop_assert!(pb.post[k].within(&ib.post[k], 1e-9));
        }
    }

    #[test]
    fn verified_means_no_sampled_flip(seed in 0u64..100_000) {
        let (net, prop) = random_case(seed);
        for method in Method::ALL {
            if verify_robustness(&net, &prop, method).unwrap().verdict != Verdict::Verified {
                continue;
            }
            let b = prop.input_box();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..b.len()).map(|i| rng.random_range(b.lower[i]..=b.upper[i])).collect();
                prop_assert_eq!(net.predict(&x).unwrap(), prop.label);
            }
            for mask in 0..(1u32 << b.len()) {
                let x: Vec<f64> = (0..b.len())
                    .map(|i| if mask >> i & 1 == 1 { b.upper[i] } else { b.lower[i] })
                    .collect();
                prop_assert_eq!(net.predict(&x).unwrap(), prop.label);
            }
        }
    }

    #[test]
    fn verdicts_shrink_with_delta(seed in 0u64..100_000) {
        let (net, prop) = random_case(seed);
        for method in Method::ALL {
            // walking the grid downwards, a verified radius is never followed by an unknown one
            let mut verified_above = false;
            for delta in [0.2, 0.1, 0.05, 0.02, 0.01, 0.0] {
                let p = RobustnessProperty { delta, ..prop.clone() };
                let v = verify_robustness(&net, &p, method).unwrap().verdict;
                if verified_above {
                    prop_assert_eq!(v, Verdict::Verified, "{} at delta {}", method, delta);
                }
                verified_above |= v == Verdict::Verified;
            }
        }
    }

    #[test]
    fn zero_radius_is_forward_evaluation(seed in 0u64..100_000) {
        let (net, prop) = random_case(seed);
        let p = RobustnessProperty { delta: 0.0, ..prop };
        let t = net.trace(&p.center).unwrap();
        for b in [interval_bounds(&net, &p).unwrap(), polyhedral_bounds(&net, &p).unwrap()] {
            for k in 0..net.num_layers() {
                for i in 0..t.pre[k].len() {
                    prop_assert!((b.pre[k].lower[i] - t.pre[k][i]).abs() <= 1e-12);
                    prop_assert!((b.pre[k].upper[i] - t.pre[k][i]).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn back_substitution_cancels_shared_terms() {
    // both hidden neurons equal x + 1, so their difference is exactly zero
    let net: Network<f64> = Network::new(vec![
        Layer::from_rows(&[vec![1.0], vec![1.0]], vec![1.0, 1.0], Activation::Relu).unwrap(),
        Layer::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]], vec![0.5, 0.0], Activation::Identity).unwrap(),
    ])
    .unwrap();
    let prop = RobustnessProperty::new(vec![0.5], 0.5, 0);
    let poly = verify_robustness(&net, &prop, Method::Polyhedral).unwrap();
    let interval = verify_robustness(&net, &prop, Method::Interval).unwrap();
    assert!((poly.margin_lower[1] - 0.5).abs() < 1e-12);
    assert_eq!(poly.verdict, Verdict::Verified);
    assert!((interval.margin_lower[1] + 0.5).abs() < 1e-12);
    assert_eq!(interval.verdict, Verdict::Unknown);
}
