use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnn_core::data::LabeledSample;
use vnn_core::{Activation, Layer, Network};

/// Two inputs, one ReLU layer `[[1,-1],[0,2]]`, `b = (0,-1)`, identity logits.
pub fn net_a() -> Network<f64> {
    Network::new(vec![
        Layer::from_rows(&[vec![1.0, -1.0], vec![0.0, 2.0]], vec![0.0, -1.0], Activation::Relu).unwrap(),
        Layer::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], Activation::Identity).unwrap(),
    ])
    .unwrap()
}

/// Network with uniform random parameters; `dims` lists input, hidden and output widths.
pub fn random_net(dims: &[usize], seed: u64) -> Network<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    for (k, pair) in dims.windows(2).enumerate() {
        let (i, o) = (pair[0], pair[1]);
        let act = if k + 2 == dims.len() { Activation::Identity } else { Activation::Relu };
        let scale = (2.0 / i as f64).sqrt();
        let w = (0..i * o).map(|_| rng.random_range(-scale..scale)).collect();
        let b = (0..o).map(|_| rng.random_range(-0.2..0.2)).collect();
        layers.push(Layer::new(o, i, w, b, act).unwrap());
    }
    Network::new(layers).unwrap()
}

/// Uniform points in `[0,1]^dim`, labelled by the network itself.
pub fn self_labelled(net: &Network<f64>, n: usize, seed: u64) -> Vec<LabeledSample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let input: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            let label = net.predict(&input).unwrap();
            LabeledSample { input, label }
        })
        .collect()
}
