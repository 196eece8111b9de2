use super::interval::{activation_image, affine_image};
use super::{affine_lower, Bounds, LayerBounds, RobustnessProperty};
use crate::error::Result;
use crate::network::{Activation, Network};
use crate::scalar::Scalar;

/// Linear bounds `lower_slope * z <= a <= upper_slope * z + upper_offset`
/// on a neuron's output `a` given its pre-activation `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluRelaxation<T: Scalar = f64> {
    pub lower_slope: T,
    pub upper_slope: T,
    pub upper_offset: T,
}

impl<T: Scalar> ReluRelaxation<T> {
    fn identity() -> Self {
        Self {
            lower_slope: T::one(),
            upper_slope: T::one(),
            upper_offset: T::zero(),
        }
    }
}

/// Tightest single-line relaxation of ReLU on `[l, u]`.
///
/// Unstable neurons use the chord as the upper line and whichever of
/// `a >= 0` and `a >= z` encloses less area as the lower line; a tie picks `a >= 0`.
pub fn relu_relaxation<T: Scalar>(l: T, u: T) -> ReluRelaxation<T> {
    if l >= T::zero() {
        return ReluRelaxation::identity();
    }
    if u <= T::zero() {
        return ReluRelaxation {
            lower_slope: T::zero(),
            upper_slope: T::zero(),
            upper_offset: T::zero(),
        };
    }
    let slope = u / (u - l);
    ReluRelaxation {
        lower_slope: if u > -l { T::one() } else { T::zero() },
        upper_slope: slope,
        upper_offset: -slope * l,
    }
}

/// Concrete bounds plus the per-neuron linear relaxations they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractElement<T: Scalar = f64> {
    pub bounds: LayerBounds<T>,
    /// One relaxation per neuron of layers `1..=N`.
    pub relaxations: Vec<Vec<ReluRelaxation<T>>>,
}

impl<T: Scalar> AbstractElement<T> {
    /// Lower bounds of `coeffs . a + constant` for rows over the outputs of
    /// layer `top` (`0` is the input), resolved down to the input box.
    pub fn lower_bounds(&self, net: &Network<T>, top: usize, rows: Vec<Vec<T>>, constants: Vec<T>) -> Vec<T> {
        let mut rows = rows;
        let mut constants = constants;
        for j in (1..=top).rev() {
            let layer = net.layer(j - 1);
            let relax = &self.relaxations[j - 1];
            let mut next = vec![vec![T::zero(); layer.in_dim()]; rows.len()];
            for (r, row) in rows.iter().enumerate() {
                let out = &mut next[r];
                for (i, &c) in row.iter().enumerate() {
                    if c == T::zero() {
                        continue;
                    }
                    let rx = relax[i];
                    let slope = if c > T::zero() {
                        rx.lower_slope
                    } else {
                        constants[r] += c * rx.upper_offset;
                        rx.upper_slope
                    };
                    let coef = c * slope;
                    if coef == T::zero() {
                        continue;
                    }
                    constants[r] += coef * layer.biases()[i];
                    let w = layer.row(i);
                    for &k in layer.row_nonzeros(i) {
                        out[k] += coef * w[k];
                    }
                }
            }
            rows = next;
        }
        rows.iter()
            .zip(&constants)
            .map(|(row, &c)| affine_lower(row, c, &self.bounds.input))
            .collect()
    }

    /// Lower bounds of `logit[label] - logit[i]` per class, `+inf` at the label.
    pub(crate) fn margin_rows(&self, net: &Network<T>, label: usize) -> Vec<T> {
        let n = net.num_layers();
        let last = net.layer(n - 1);
        let own = last.row(label);
        let mut rows = Vec::new();
        let mut constants = Vec::new();
        for i in 0..last.out_dim() {
            rows.push(own.iter().zip(last.row(i)).map(|(&a, &b)| a - b).collect::<Vec<T>>());
            constants.push(last.biases()[label] - last.biases()[i]);
        }
        let feed = if n >= 2 { &self.bounds.post[n - 2] } else { &self.bounds.input };
        let direct: Vec<T> = rows.iter().zip(&constants).map(|(r, &c)| affine_lower(r, c, feed)).collect();
        let resolved = self.lower_bounds(net, n - 1, rows, constants);
        (0..last.out_dim())
            .map(|i| if i == label { T::infinity() } else { resolved[i].max(direct[i]) })
            .collect()
    }
}

pub(crate) fn analyze<T: Scalar>(net: &Network<T>, prop: &RobustnessProperty<T>) -> Result<AbstractElement<T>> {
    prop.validate(net)?;
    let mut element = AbstractElement {
        bounds: LayerBounds {
            input: prop.input_box(),
            pre: Vec::with_capacity(net.num_layers()),
            post: Vec::with_capacity(net.num_layers()),
        },
        relaxations: Vec::with_capacity(net.num_layers()),
    };
    for (j, layer) in net.layers().iter().enumerate() {
        let rows: Vec<Vec<T>> = (0..layer.out_dim()).map(|i| layer.row(i).to_vec()).collect();
        let neg: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&v| -v).collect()).collect();
        let b = layer.biases().to_vec();
        let nb: Vec<T> = b.iter().map(|&v| -v).collect();
        let lower = element.lower_bounds(net, j, rows, b);
        let upper: Vec<T> = element.lower_bounds(net, j, neg, nb).into_iter().map(|v| -v).collect();
        let mut pre = Bounds { lower, upper };
        // never looser than interval arithmetic on the previous layer's box
        let feed = element.bounds.post.last().unwrap_or(&element.bounds.input);
        pre.intersect(&affine_image(layer, feed));
        let relax = match layer.activation() {
            Activation::Relu => (0..pre.len()).map(|i| relu_relaxation(pre.lower[i], pre.upper[i])).collect(),
            Activation::Identity => vec![ReluRelaxation::identity(); pre.len()],
        };
        element.bounds.post.push(activation_image(layer.activation(), &pre));
        element.bounds.pre.push(pre);
        element.relaxations.push(relax);
    }
    Ok(element)
}

/// Bounds of every layer in the polyhedral domain.
pub fn polyhedral_bounds<T: Scalar>(net: &Network<T>, prop: &RobustnessProperty<T>) -> Result<LayerBounds<T>> {
    Ok(analyze(net, prop)?.bounds)
}

/// The full abstract element, relaxations included.
pub fn polyhedral_element<T: Scalar>(net: &Network<T>, prop: &RobustnessProperty<T>) -> Result<AbstractElement<T>> {
    analyze(net, prop)
}
