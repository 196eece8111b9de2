use crate::network::{Activation, Layer, Network};

/// Two inputs, one ReLU layer `[[1,-1],[0,2]]`, `b = (0,-1)`, identity logits.
pub fn net_a() -> Network<f64> {
    Network::new(vec![
        Layer::from_rows(
            &[vec![1.0, -1.0], vec![0.0, 2.0]],
            vec![0.0, -1.0],
            Activation::Relu,
        )
        .unwrap(),
        Layer::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Activation::Identity,
        )
        .unwrap(),
    ])
    .unwrap()
}
