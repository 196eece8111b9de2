//! Datasets: MNIST IDX ingestion, seeded synthetic blobs, CSV export.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T: Scalar = f64> {
    pub input: Vec<T>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar = f64> {
    samples: Vec<LabeledSample<T>>,
    splits: Vec<Split>,
    num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(samples: Vec<LabeledSample<T>>, splits: Vec<Split>, num_classes: usize) -> Result<Self> {
        if samples.len() != splits.len() {
            return Err(Error::Data(format!(
                "{} samples but {} split tags",
                samples.len(),
                splits.len()
            )));
        }
        if let Some(first) = samples.first() {
            let dim = first.input.len();
            for (i, s) in samples.iter().enumerate() {
                if s.input.len() != dim {
                    return Err(Error::Data(format!(
                        "sample {i} has {} features, expected {dim}",
                        s.input.len()
                    )));
                }
                if s.label >= num_classes {
                    return Err(Error::Data(format!(
                        "sample {i} has label {} but only {num_classes} classes",
                        s.label
                    )));
                }
                if s.input.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("sample {i} has a non-finite feature")));
                }
            }
        }
        Ok(Self {
            samples,
            splits,
            num_classes,
        })
    }

    /// Every sample tagged with one split.
    pub fn uniform(samples: Vec<LabeledSample<T>>, split: Split, num_classes: usize) -> Result<Self> {
        let splits = vec![split; samples.len()];
        Self::new(samples, splits, num_classes)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.input.len())
    }

    pub fn samples(&self) -> &[LabeledSample<T>] {
        &self.samples
    }

    pub fn split_tags(&self) -> &[Split] {
        &self.splits
    }

    /// Samples tagged `split`, in dataset order.
    pub fn split(&self, split: Split) -> Vec<LabeledSample<T>> {
        self.samples
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| **s == split)
            .map(|(x, _)| x.clone())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.iter().filter(|s| **s == split).count()
    }

    /// `label,v0,v1,...` rows for the given split (all samples when `None`).
    pub fn write_csv(&self, path: impl AsRef<Path>, split: Option<Split>) -> Result<()> {
        crate::util::write_atomic(path.as_ref(), self.to_csv(split)?.as_bytes())
    }

    pub fn to_csv(&self, split: Option<Split>) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for (s, tag) in self.samples.iter().zip(&self.splits) {
            if split.is_some_and(|want| want != *tag) {
                continue;
            }
            let mut record = Vec::with_capacity(s.input.len() + 1);
            record.push(s.label.to_string());
            record.extend(s.input.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    /// Reads `label,v0,v1,...` rows; every sample is tagged `split`.
    /// `num_classes` defaults to `max label + 1`.
    pub fn read_csv(path: impl AsRef<Path>, split: Split, num_classes: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut samples = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let mut fields = record.iter();
            let label: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: row + 1,
                    message: "first field must be a class label".into(),
                })?;
            let input = fields
                .enumerate()
                .map(|(i, f)| {
                    f.parse::<T>().map_err(|_| Error::Parse {
                        line: row + 1,
                        message: format!("feature {i}: `{f}` is not a number"),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            samples.push(LabeledSample { input, label });
        }
        let classes = num_classes.unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(0));
        Self::uniform(samples, split, classes)
    }
}

/// How MNIST items are tagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistProtocol {
    /// Keep every item, all tagged with the given split.
    AsIs(Split),
    /// Keep the first 400 items: 0..200 validation, 200..400 test.
    PaperSplit,
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset,
            message: "truncated header".into(),
        })
}

/// Parses an IDX3 image file into rows of pixels scaled into `[0, 1]`.
pub fn parse_idx_images<T: Scalar>(bytes: &[u8]) -> Result<Vec<Vec<T>>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let needed = 16 + count * pixels;
    if bytes.len() < needed {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated payload: {count} images of {rows}x{cols} need {needed} bytes"),
        });
    }
    let scale = T::of(255.0);
    Ok(bytes[16..needed]
        .chunks_exact(pixels.max(1))
        .take(count)
        .map(|img| img.iter().map(|&p| T::of(f64::from(p)) / scale).collect())
        .collect())
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let payload = bytes.get(8..8 + count).ok_or_else(|| Error::Format {
        offset: bytes.len(),
        message: format!("truncated payload: {count} labels need {} bytes", 8 + count),
    })?;
    Ok(payload.iter().map(|&b| usize::from(b)).collect())
}

/// Builds a dataset from raw IDX buffers.
pub fn mnist_from_bytes<T: Scalar>(
    images: &[u8],
    labels: &[u8],
    protocol: MnistProtocol,
) -> Result<Dataset<T>> {
    let pixels = parse_idx_images::<T>(images)?;
    let labels = parse_idx_labels(labels)?;
    if pixels.len() != labels.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!(
                "count mismatch: {} images but {} labels",
                pixels.len(),
                labels.len()
            ),
        });
    }
    let classes = labels.iter().map(|l| l + 1).max().unwrap_or(0).max(10);
    let mut samples: Vec<LabeledSample<T>> = pixels
        .into_iter()
        .zip(labels)
        .map(|(input, label)| LabeledSample { input, label })
        .collect();
    match protocol {
        MnistProtocol::AsIs(split) => Dataset::uniform(samples, split, classes),
        MnistProtocol::PaperSplit => {
            samples.truncate(400);
            let splits = (0..samples.len())
                .map(|i| if i < 200 { Split::Validation } else { Split::Test })
                .collect();
            Dataset::new(samples, splits, classes)
        }
    }
}

pub fn load_mnist<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    protocol: MnistProtocol,
) -> Result<Dataset<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let labels = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    mnist_from_bytes(&images, &labels, protocol)
}

/// Cluster spread used by [`synth_blobs`].
pub const DEFAULT_BLOB_SPREAD: f64 = 0.08;

/// Gaussian clusters clipped to `[0,1]^dim`, split 60/20/20.
pub fn synth_blobs<T: Scalar>(n: usize, dim: usize, classes: usize, seed: u64) -> Result<Dataset<T>> {
    synth_blobs_with_spread(n, dim, classes, DEFAULT_BLOB_SPREAD, seed)
}

pub fn synth_blobs_with_spread<T: Scalar>(
    n: usize,
    dim: usize,
    classes: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if classes == 0 || n < classes {
        return Err(Error::Data(format!("need n >= classes >= 1, got n={n}, classes={classes}")));
    }
    if dim == 0 {
        return Err(Error::Data("dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.random_range(0.2..0.8)).collect())
        .collect();
    let noise = Normal::new(0.0, spread).map_err(|e| Error::Data(e.to_string()))?;
    let mut samples: Vec<LabeledSample<T>> = (0..n)
        .map(|i| {
            let label = i % classes;
            let input = centers[label]
                .iter()
                .map(|&c| T::of((c + noise.sample(&mut rng)).clamp(0.0, 1.0)))
                .collect();
            LabeledSample { input, label }
        })
        .collect();
    samples.shuffle(&mut rng);
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let splits = (0..n)
        .map(|i| {
            if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            }
        })
        .collect();
    Dataset::new(samples, splits, classes)
}
