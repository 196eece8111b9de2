use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the deviation bound on a neuron value is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EpsilonMode {
    /// `|x~ - x| <= epsilon`
    #[default]
    Additive,
    /// `x~` between `(1 - epsilon) x` and `(1 + epsilon) x`
    Multiplicative,
}

impl FromStr for EpsilonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additive" | "add" => Ok(EpsilonMode::Additive),
            "multiplicative" | "mul" | "mult" => Ok(EpsilonMode::Multiplicative),
            other => Err(Error::Config(format!("unknown epsilon mode `{other}`"))),
        }
    }
}

impl fmt::Display for EpsilonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpsilonMode::Additive => "additive",
            EpsilonMode::Multiplicative => "multiplicative",
        })
    }
}

/// Which layers to optimize. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LayerSelection {
    #[default]
    All,
    Only(Vec<usize>),
}

impl LayerSelection {
    /// Sorted, de-duplicated 0-based indices for a network with `num_layers` layers.
    pub fn resolve(&self, num_layers: usize) -> Result<Vec<usize>> {
        match self {
            LayerSelection::All => Ok((0..num_layers).collect()),
            LayerSelection::Only(list) => {
                let mut v = list.clone();
                v.sort_unstable();
                v.dedup();
                if let Some(&bad) = v.iter().find(|&&k| k >= num_layers) {
                    return Err(Error::Config(format!(
                        "layer {} does not exist (network has {num_layers})",
                        bad + 1
                    )));
                }
                Ok(v)
            }
        }
    }

    /// Parses a 1-based list such as `all`, `none`, `2`, `1,3` or `1-3`.
    pub fn parse_one_based(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "all" => return Ok(LayerSelection::All),
            "" | "none" => return Ok(LayerSelection::Only(Vec::new())),
            _ => {}
        }
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let parse = |t: &str| -> Result<usize> {
                match t.trim().parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(Error::Config(format!("bad layer index `{t}` (layers are numbered from 1)"))),
                }
            };
            if let Some((a, b)) = part.split_once('-') {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(Error::Config(format!("empty layer range `{part}`")));
                }
                out.extend(a..=b);
            } else {
                out.push(parse(part)?);
            }
        }
        Ok(LayerSelection::Only(out))
    }
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelection::All => f.write_str("all"),
            LayerSelection::Only(v) if v.is_empty() => f.write_str("none"),
            LayerSelection::Only(v) => {
                let parts: Vec<String> = v.iter().map(|k| (k + 1).to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyConfig<T: Scalar = f64> {
    /// Allowed deviation of every optimized neuron value.
    pub epsilon: T,
    pub epsilon_mode: EpsilonMode,
    /// Required gap between the label logit and every other logit.
    pub margin: T,
    /// Solved parameters with smaller magnitude are snapped to exactly zero.
    pub zero_threshold: T,
    pub layers: LayerSelection,
}

impl<T: Scalar> Default for SparsifyConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::zero(),
            epsilon_mode: EpsilonMode::Additive,
            margin: T::zero(),
            zero_threshold: T::of(1e-6),
            layers: LayerSelection::All,
        }
    }
}

impl<T: Scalar> SparsifyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")))
            }
        };
        check("epsilon", self.epsilon)?;
        check("margin", self.margin)?;
        check("zero_threshold", self.zero_threshold)?;
        if self.epsilon_mode == EpsilonMode::Multiplicative && self.epsilon > T::one() {
            return Err(Error::Config("multiplicative epsilon must not exceed 1".into()));
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_kv(mut self, text: &str) -> Result<Self> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let value = value.trim();
            let real = |v: &str| -> Result<T> {
                v.parse::<T>().map_err(|_| Error::Parse {
                    line: n + 1,
                    message: format!("`{v}` is not a number"),
                })
            };
            match key.trim() {
                "epsilon" => self.epsilon = real(value)?,
                "epsilon_mode" => self.epsilon_mode = value.parse()?,
                "margin" => self.margin = real(value)?,
                "zero_threshold" => self.zero_threshold = real(value)?,
                "layers" => self.layers = LayerSelection::parse_one_based(value)?,
                other => {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::default().apply_kv(&text)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "epsilon = {}\nepsilon_mode = {}\nmargin = {}\nzero_threshold = {}\nlayers = {}\n",
            self.epsilon, self.epsilon_mode, self.margin, self.zero_threshold, self.layers
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = SparsifyConfig::<f64> {
            epsilon: 0.1,
            epsilon_mode: EpsilonMode::Multiplicative,
            margin: 0.25,
            zero_threshold: 1e-7,
            layers: LayerSelection::Only(vec![0, 2]),
        };
        let back = SparsifyConfig::default().apply_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn layer_lists() {
        assert_eq!(
            LayerSelection::parse_one_based("1-3, 5").unwrap(),
            LayerSelection::Only(vec![0, 1, 2, 4])
        );
        assert_eq!(LayerSelection::parse_one_based("none").unwrap(), LayerSelection::Only(vec![]));
        assert!(LayerSelection::parse_one_based("0").is_err());
        assert!(LayerSelection::Only(vec![3]).resolve(3).is_err());
        assert_eq!(LayerSelection::Only(vec![2, 0, 2]).resolve(3).unwrap(), vec![0, 2]);
    }

    #[test]
    fn negative_values_rejected() {
        let err = SparsifyConfig::<f64>::default().apply_kv("epsilon = -0.1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = SparsifyConfig::<f64>::default().apply_kv("margin = x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = SparsifyConfig::<f64>::default().apply_kv("speed = 3").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }
}
