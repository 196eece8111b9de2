use super::{affine_lower, Bounds, LayerBounds, RobustnessProperty};
use crate::error::Result;
use crate::network::{Activation, Layer, Network};
use crate::scalar::Scalar;

/// Interval image of `W x + b` over the box `b`.
pub(crate) fn affine_image<T: Scalar>(layer: &Layer<T>, input: &Bounds<T>) -> Bounds<T> {
    let mut lower = Vec::with_capacity(layer.out_dim());
    let mut upper = Vec::with_capacity(layer.out_dim());
    for i in 0..layer.out_dim() {
        let row = layer.row(i);
        let (mut lo, mut hi) = (layer.biases()[i], layer.biases()[i]);
        for &j in layer.row_nonzeros(i) {
            let w = row[j];
            if w > T::zero() {
                lo += w * input.lower[j];
                hi += w * input.upper[j];
            } else {
                lo += w * input.upper[j];
                hi += w * input.lower[j];
            }
        }
        lower.push(lo);
        upper.push(hi);
    }
    Bounds { lower, upper }
}

pub(crate) fn activation_image<T: Scalar>(act: Activation, pre: &Bounds<T>) -> Bounds<T> {
    Bounds {
        lower: pre.lower.iter().map(|&v| act.apply(v)).collect(),
        upper: pre.upper.iter().map(|&v| act.apply(v)).collect(),
    }
}

/// Pushes the input box through every layer with interval arithmetic.
pub fn interval_bounds<T: Scalar>(net: &Network<T>, prop: &RobustnessProperty<T>) -> Result<LayerBounds<T>> {
    prop.validate(net)?;
    let input = prop.input_box();
    let mut pre = Vec::with_capacity(net.num_layers());
    let mut post: Vec<Bounds<T>> = Vec::with_capacity(net.num_layers());
    for layer in net.layers() {
        let z = affine_image(layer, post.last().unwrap_or(&input));
        post.push(activation_image(layer.activation(), &z));
        pre.push(z);
    }
    Ok(LayerBounds { input, pre, post })
}

/// Lower bounds of `logit[label] - logit[i]`, written as one affine row over
/// the last hidden layer's box.
pub(crate) fn margin_rows<T: Scalar>(net: &Network<T>, bounds: &LayerBounds<T>, label: usize) -> Vec<T> {
    let n = net.num_layers();
    let last = net.layer(n - 1);
    let feed = if n >= 2 { &bounds.post[n - 2] } else { &bounds.input };
    let own = last.row(label);
    (0..last.out_dim())
        .map(|i| {
            if i == label {
                return T::infinity();
            }
            let coeffs: Vec<T> = own.iter().zip(last.row(i)).map(|(&a, &b)| a - b).collect();
            affine_lower(&coeffs, last.biases()[label] - last.biases()[i], feed)
        })
        .collect()
}
