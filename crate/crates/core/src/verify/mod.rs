//! Sound but incomplete robustness certification over an L-infinity input box.
//!
//! Two domains are provided: plain interval propagation and a polyhedral
//! domain that keeps one linear lower and one linear upper bound per neuron
//! and resolves them against the input box by back-substitution.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Scalar;

mod interval;
mod poly;

pub use interval::interval_bounds;
pub use poly::{polyhedral_bounds, polyhedral_element, relu_relaxation, AbstractElement, ReluRelaxation};

/// Every point within `delta` of `center` in each coordinate keeps class `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessProperty<T: Scalar = f64> {
    pub center: Vec<T>,
    pub delta: T,
    pub label: usize,
    /// Clamp the input box to `[0, 1]`.
    pub clip: bool,
}

impl<T: Scalar> RobustnessProperty<T> {
    pub fn new(center: Vec<T>, delta: T, label: usize) -> Self {
        Self {
            center,
            delta,
            label,
            clip: false,
        }
    }

    pub fn clipped(mut self, clip: bool) -> Self {
        self.clip = clip;
        self
    }

    pub fn validate(&self, net: &Network<T>) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= T::zero()) {
            return Err(Error::Config(format!("delta must be a finite value >= 0, got {}", self.delta)));
        }
        if self.label >= net.output_dim() {
            return Err(Error::Data(format!(
                "label {} out of range for {} classes",
                self.label,
                net.output_dim()
            )));
        }
        if self.center.len() != net.input_dim() {
            return Err(Error::InputShape {
                expected: net.input_dim(),
                got: self.center.len(),
            });
        }
        Ok(())
    }

    /// The input region as per-coordinate bounds.
    pub fn input_box(&self) -> Bounds<T> {
        let (mut lower, mut upper): (Vec<T>, Vec<T>) =
            self.center.iter().map(|&c| (c - self.delta, c + self.delta)).unzip();
        if self.clip {
            for (l, u) in lower.iter_mut().zip(upper.iter_mut()) {
                *l = l.max(T::zero()).min(T::one());
                *u = u.max(T::zero()).min(T::one());
            }
        }
        Bounds { lower, upper }
    }
}

/// Per-coordinate lower and upper bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T: Scalar = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn point(x: &[T]) -> Self {
        Self {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// `true` when every interval of `self` lies inside the matching one of `other`, up to `slack`.
    pub fn within(&self, other: &Bounds<T>, slack: T) -> bool {
        self.len() == other.len()
            && (0..self.len())
                .all(|i| self.lower[i] >= other.lower[i] - slack && self.upper[i] <= other.upper[i] + slack)
    }

    fn intersect(&mut self, other: &Bounds<T>) {
        for i in 0..self.len() {
            self.lower[i] = self.lower[i].max(other.lower[i]);
            self.upper[i] = self.upper[i].min(other.upper[i]);
            // round-off can cross the bounds of a neuron whose value is pinned
            if self.lower[i] > self.upper[i] {
                let mid = (self.lower[i] + self.upper[i]) / T::of(2.0);
                self.lower[i] = mid;
                self.upper[i] = mid;
            }
        }
    }
}

/// Concrete bounds of every layer for one input region.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds<T: Scalar = f64> {
    pub input: Bounds<T>,
    /// Pre-activation bounds of layers `1..=N`.
    pub pre: Vec<Bounds<T>>,
    /// Post-activation bounds of layers `1..=N`; the last entry bounds the logits.
    pub post: Vec<Bounds<T>>,
}

/// Lower bound of `coeffs . x + constant` over the box.
pub(crate) fn affine_lower<T: Scalar>(coeffs: &[T], constant: T, b: &Bounds<T>) -> T {
    let mut acc = constant;
    for (i, &c) in coeffs.iter().enumerate() {
        if c > T::zero() {
            acc += c * b.lower[i];
        } else if c < T::zero() {
            acc += c * b.upper[i];
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Interval,
    Polyhedral,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Interval, Method::Polyhedral];
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interval" | "ibp" => Ok(Method::Interval),
            "polyhedral" | "deeppoly" | "poly" => Ok(Method::Polyhedral),
            other => Err(Error::Config(format!("unknown verification method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Interval => "interval",
            Method::Polyhedral => "polyhedral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Verified,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Verified => "verified",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult<T: Scalar = f64> {
    pub verdict: Verdict,
    /// Bounds on every logit.
    pub output: Bounds<T>,
    /// Lower bound of `logit[label] - logit[i]` per class; `+inf` at the label.
    pub margin_lower: Vec<T>,
    pub seconds: f64,
}

impl<T: Scalar> VerificationResult<T> {
    /// Smallest margin lower bound over the rival classes.
    pub fn min_margin_lower(&self) -> T {
        self.margin_lower.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Certifies `prop` with the chosen domain.
///
/// The margins against each rival class are bounded as one affine row each
/// inside the domain, which is tighter than subtracting logit bounds.
pub fn verify_robustness<T: Scalar>(
    net: &Network<T>,
    prop: &RobustnessProperty<T>,
    method: Method,
) -> Result<VerificationResult<T>> {
    let started = Instant::now();
    prop.validate(net)?;
    let (output, margin_lower) = match method {
        Method::Interval => {
            let bounds = interval_bounds(net, prop)?;
            let margins = interval::margin_rows(net, &bounds, prop.label);
            (bounds.post.last().expect("non-empty").clone(), margins)
        }
        Method::Polyhedral => {
            let element = poly::analyze(net, prop)?;
            let margins = element.margin_rows(net, prop.label);
            (element.bounds.post.last().expect("non-empty").clone(), margins)
        }
    };
    let verified = margin_lower
        .iter()
        .enumerate()
        .all(|(i, &m)| i == prop.label || m > T::zero());
    Ok(VerificationResult {
        verdict: if verified { Verdict::Verified } else { Verdict::Unknown },
        output,
        margin_lower,
        seconds: started.elapsed().as_secs_f64(),
    })
}
