//! Text model format.
//!
//! ```text
//! vnn-model v1
//! layers <count>
//! layer <k> <relu|identity> <out_dim> <in_dim>
//! w <in_dim reals>          (one line per output row)
//! b <out_dim reals>
//! ```
//!
//! Reals are written with the shortest representation that parses back to the
//! same value, so a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Activation, Layer, Network};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_HEADER: &str = "vnn-model v1";

impl<T: Scalar> Network<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "layers {}", self.num_layers());
        for (k, layer) in self.layers().iter().enumerate() {
            let _ = writeln!(
                out,
                "layer {} {} {} {}",
                k + 1,
                layer.activation(),
                layer.out_dim(),
                layer.in_dim()
            );
            for i in 0..layer.out_dim() {
                out.push('w');
                for v in layer.row(i) {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
            out.push('b');
            for v in layer.biases() {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);

        let (n, header) = lines.next_required("model header")?;
        if header.trim() != MODEL_HEADER {
            return Err(parse_err(n, format!("expected header `{MODEL_HEADER}`, found `{header}`")));
        }
        let (n, line) = lines.next_required("layer count")?;
        let count = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["layers", c] => parse_usize(n, c, "layer count")?,
            _ => return Err(parse_err(n, "expected `layers <count>`")),
        };

        let mut layers = Vec::with_capacity(count);
        for k in 1..=count {
            let (n, line) = lines.next_required("layer declaration")?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (act, out_dim, in_dim) = match fields.as_slice() {
                ["layer", idx, act, out_dim, in_dim] => {
                    if parse_usize(n, idx, "layer index")? != k {
                        return Err(parse_err(n, format!("expected layer {k}")));
                    }
                    let act = Activation::from_tag(act)
                        .ok_or_else(|| parse_err(n, format!("unknown activation `{act}`")))?;
                    (
                        act,
                        parse_usize(n, out_dim, "out_dim")?,
                        parse_usize(n, in_dim, "in_dim")?,
                    )
                }
                _ => return Err(parse_err(n, "expected `layer <k> <activation> <out> <in>`")),
            };
            let mut weights = Vec::with_capacity(out_dim * in_dim);
            for row in 0..out_dim {
                let (n, line) = lines.next_required("weight row")?;
                let values = parse_row::<T>(n, line, "w", in_dim)
                    .map_err(|e| annotate(e, format!("layer {k}, weight row {}", row + 1)))?;
                weights.extend(values);
            }
            let (n, line) = lines.next_required("bias row")?;
            let biases = parse_row::<T>(n, line, "b", out_dim)
                .map_err(|e| annotate(e, format!("layer {k}, biases")))?;
            layers.push(Layer::new(out_dim, in_dim, weights, biases, act)?);
        }
        if let Some((n, extra)) = lines.next() {
            return Err(parse_err(n, format!("unexpected trailing content `{extra}`")));
        }
        Network::new(layers)
    }
}

/// Writes a model file atomically.
pub fn save<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    crate::util::write_atomic(path.as_ref(), net.to_text().as_bytes())
}

/// Reads and validates a model file.
pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_text(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l))
            .find(|(_, l)| !l.trim().is_empty())
    }

    fn next_required(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn annotate(err: Error, context: String) -> Error {
    match err {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{context}: {message}"),
        },
        other => other,
    }
}

fn parse_usize(line: usize, token: &str, field: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("{field}: `{token}` is not a non-negative integer")))
}

fn parse_row<T: Scalar>(line_no: usize, line: &str, tag: &str, expected: usize) -> Result<Vec<T>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(tag) {
        return Err(parse_err(line_no, format!("expected line starting with `{tag}`")));
    }
    let values = tokens
        .enumerate()
        .map(|(i, tok)| {
            let v: T = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("field {}: `{tok}` is not a number", i + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("field {}: non-finite value `{tok}`", i + 1)));
            }
            Ok(v)
        })
        .collect::<Result<Vec<T>>>()?;
    if values.len() != expected {
        return Err(parse_err(
            line_no,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}
