//! Experiment plumbing: fixtures, dataset-wide verification, model comparison.

use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{mbp_prune, mbp_prune_to_sparsity, PruneScope};
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::oracle::{exact_verify_against, OracleKind, OracleLimits};
use crate::scalar::{label_margin, Scalar};
use crate::train::accuracy;
use crate::verify::{verify_robustness, Method, RobustnessProperty, Verdict};

mod fixtures;

pub use fixtures::{fixture_spec, standard_fixtures, Fixture, FixtureSpec};

/// Checks a radius list: at least one entry, all finite and non-negative.
pub fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::Config("at least one delta is required".into()));
    }
    if let Some(bad) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::Config(format!("delta must be a finite value >= 0, got {bad}")));
    }
    Ok(())
}

/// Parses a comma-separated radius list.
pub fn parse_deltas(text: &str) -> Result<Vec<f64>> {
    let deltas = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("`{t}` is not a number"))))
        .collect::<Result<Vec<f64>>>()?;
    validate_deltas(&deltas)?;
    Ok(deltas)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub method: Method,
    /// Clamp input boxes to `[0, 1]`.
    pub clip: bool,
    /// Worker threads; `0` uses every core.
    pub jobs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            method: Method::Polyhedral,
            clip: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Verified,
    Unknown,
    /// Wrong at the center already; counts as not verified.
    Misclassified,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Verified => "verified",
            Outcome::Unknown => "unknown",
            Outcome::Misclassified => "misclassified",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRecord {
    pub sample_id: usize,
    pub delta: f64,
    pub method: Method,
    pub outcome: Outcome,
    pub seconds: f64,
    /// Smallest lower bound on `logit[label] - logit[i]`; the exact margin
    /// at the center for misclassified samples.
    pub min_margin_lb: f64,
}

pub const VERIFY_CSV_HEADER: &str = "sample_id,delta,method,verdict,time_ms,min_margin_lb";

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Verifies every sample at every radius. Records come back ordered by sample, then radius.
pub fn verify_dataset<T: Scalar>(
    net: &Network<T>,
    samples: &[LabeledSample<T>],
    deltas: &[f64],
    opts: &VerifyOptions,
) -> Result<Vec<VerifyRecord>> {
    validate_deltas(deltas)?;
    for (i, s) in samples.iter().enumerate() {
        RobustnessProperty::new(s.input.clone(), T::zero(), s.label)
            .validate(net)
            .map_err(|e| Error::Data(format!("sample {i}: {e}")))?;
    }
    let per_sample = |(id, s): (usize, &LabeledSample<T>)| -> Result<Vec<VerifyRecord>> {
        let logits = net.logits(&s.input)?;
        let center_margin = label_margin(&logits, s.label);
        let correct = crate::scalar::argmax(&logits) == s.label;
        deltas
            .iter()
            .map(|&delta| {
                if !correct {
                    return Ok(VerifyRecord {
                        sample_id: id,
                        delta,
                        method: opts.method,
                        outcome: Outcome::Misclassified,
                        seconds: 0.0,
                        min_margin_lb: center_margin.to_f64_lossy(),
                    });
                }
                let prop = RobustnessProperty::new(s.input.clone(), T::of(delta), s.label).clipped(opts.clip);
                let started = Instant::now();
                let r = verify_robustness(net, &prop, opts.method)?;
                let seconds = started.elapsed().as_secs_f64();
                Ok(VerifyRecord {
                    sample_id: id,
                    delta,
                    method: opts.method,
                    outcome: match r.verdict {
                        Verdict::Verified => Outcome::Verified,
                        Verdict::Unknown => Outcome::Unknown,
                    },
                    seconds,
                    min_margin_lb: r.min_margin_lower().to_f64_lossy(),
                })
            })
            .collect()
    };
    let nested: Vec<Vec<VerifyRecord>> = if opts.jobs == 1 {
        samples.iter().enumerate().map(per_sample).collect::<Result<_>>()?
    } else {
        pool(opts.jobs)?.install(|| samples.par_iter().enumerate().map(per_sample).collect::<Result<_>>())?
    };
    Ok(nested.into_iter().flatten().collect())
}

pub fn records_to_csv(records: &[VerifyRecord]) -> String {
    let mut out = String::from(VERIFY_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{}",
            r.sample_id,
            r.delta,
            r.method,
            r.outcome,
            r.seconds * 1e3,
            r.min_margin_lb
        );
    }
    out
}

/// Aggregate over all samples at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSummary {
    pub delta: f64,
    pub verified: usize,
    pub total: usize,
    /// Mean wall time per verified-or-unknown sample, in seconds.
    pub mean_seconds: f64,
}

impl DeltaSummary {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.verified as f64 / self.total as f64
        }
    }
}

pub fn summarize(records: &[VerifyRecord], deltas: &[f64]) -> Vec<DeltaSummary> {
    deltas
        .iter()
        .map(|&delta| {
            let at: Vec<&VerifyRecord> = records.iter().filter(|r| r.delta == delta).collect();
            let timed: Vec<f64> = at
                .iter()
                .filter(|r| r.outcome != Outcome::Misclassified)
                .map(|r| r.seconds)
                .collect();
            DeltaSummary {
                delta,
                verified: at.iter().filter(|r| r.outcome == Outcome::Verified).count(),
                total: at.len(),
                mean_seconds: if timed.is_empty() {
                    0.0
                } else {
                    timed.iter().sum::<f64>() / timed.len() as f64
                },
            }
        })
        .collect()
}

/// Counts of (original verdict, other verdict) pairs over (sample, rival class) questions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleMatrix {
    /// `counts[row][col]`, indexed by [`OracleKind::index`].
    pub counts: [[usize; 3]; 3],
}

impl OracleMatrix {
    pub fn get(&self, original: OracleKind, other: OracleKind) -> usize {
        self.counts[original.index()][other.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn to_markdown(&self, left: &str, right: &str) -> String {
        let mut out = format!("| {left} \\ {right} |");
        for k in OracleKind::ALL {
            let _ = write!(out, " {k} |");
        }
        out.push_str("\n|---|---|---|---|\n");
        for row in OracleKind::ALL {
            let _ = write!(out, "| {row} |");
            for col in OracleKind::ALL {
                let _ = write!(out, " {} |", self.get(row, col));
            }
            out.push('\n');
        }
        out
    }
}

/// Exact verdicts of two networks side by side, one question per sample and rival class.
pub fn oracle_matrix<T: Scalar>(
    original: &Network<T>,
    other: &Network<T>,
    samples: &[LabeledSample<T>],
    delta: f64,
    clip: bool,
    limits: &OracleLimits,
) -> Result<OracleMatrix> {
    let mut m = OracleMatrix::default();
    for s in samples {
        let prop = RobustnessProperty::new(s.input.clone(), T::of(delta), s.label).clipped(clip);
        for rival in (0..original.output_dim()).filter(|&c| c != s.label) {
            let a = exact_verify_against(original, &prop, rival, limits)?.kind();
            let b = exact_verify_against(other, &prop, rival, limits)?.kind();
            m.counts[a.index()][b.index()] += 1;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub delta: f64,
    pub limits: OracleLimits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub verify: VerifyOptions,
    /// Global pruning rate of the plain magnitude-pruning model.
    pub rate: f64,
    pub oracle: Option<OracleOptions>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub name: String,
    pub nnz: usize,
    pub params: usize,
    pub accuracy: f64,
    pub curve: Vec<DeltaSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSection {
    Matrix { delta: f64, matrix: OracleMatrix },
    /// The models are too large for the exact search.
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub method: Method,
    pub models: Vec<ModelRow>,
    pub oracle: Option<OracleSection>,
}

pub const CURVE_CSV_HEADER: &str = "model,method,delta,verified,total,percent,mean_time_ms";

impl CompareReport {
    pub fn model(&self, name: &str) -> Option<&ModelRow> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from(CURVE_CSV_HEADER);
        out.push('\n');
        for m in &self.models {
            for c in &m.curve {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.2},{:.6}",
                    m.name,
                    self.method,
                    c.delta,
                    c.verified,
                    c.total,
                    c.percent(),
                    c.mean_seconds * 1e3
                );
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("## Verified robustness ({})\n\n| model | nnz | params | accuracy |", self.method);
        let deltas: Vec<f64> = self.models.first().map(|m| m.curve.iter().map(|c| c.delta).collect()).unwrap_or_default();
        for d in &deltas {
            let _ = write!(out, " delta={d} |");
        }
        out.push_str(" mean time (ms) |\n|---|---|---|---|");
        for _ in &deltas {
            out.push_str("---|");
        }
        out.push_str("---|\n");
        for m in &self.models {
            let _ = write!(out, "| {} | {} | {} | {:.2}% |", m.name, m.nnz, m.params, 100.0 * m.accuracy);
            for c in &m.curve {
                let _ = write!(out, " {:.2}% |", c.percent());
            }
            let mean = m.curve.iter().map(|c| c.mean_seconds).sum::<f64>() / m.curve.len().max(1) as f64;
            let _ = writeln!(out, " {:.3} |", mean * 1e3);
        }
        match &self.oracle {
            Some(OracleSection::Matrix { delta, matrix }) => {
                let _ = write!(
                    out,
                    "\n## Exact verdicts at delta={delta}\n\nRows: original network. Columns: sparsified network.\n\n{}",
                    matrix.to_markdown("original", "sparsified")
                );
            }
            Some(OracleSection::Skipped { reason }) => {
                let _ = writeln!(out, "\n## Exact verdicts\n\nresource exceeded: {reason}");
            }
            None => {}
        }
        out
    }
}

/// Verifies the original, the sparsified model, a magnitude-pruned model at
/// `opts.rate` and one pruned to the sparsified model's non-zero count.
pub fn compare<T: Scalar>(
    original: &Network<T>,
    vnn: &Network<T>,
    samples: &[LabeledSample<T>],
    deltas: &[f64],
    opts: &CompareOptions,
) -> Result<CompareReport> {
    validate_deltas(deltas)?;
    if original.layers().len() != vnn.layers().len()
        || original.layers().iter().zip(vnn.layers()).any(|(a, b)| (a.out_dim(), a.in_dim()) != (b.out_dim(), b.in_dim()))
    {
        return Err(Error::Validation("original and sparsified networks differ in shape".into()));
    }
    let target = vnn.count_nonzeros(T::zero()).total.min(original.count_nonzeros(T::zero()).total);
    let models = [
        ("original".to_string(), original.clone()),
        ("vnn".to_string(), vnn.clone()),
        (format!("mbp-{}", opts.rate), mbp_prune(original, opts.rate, PruneScope::Global)?),
        ("mbp-matched".to_string(), mbp_prune_to_sparsity(original, target)?),
    ];
    let mut rows = Vec::new();
    for (name, net) in &models {
        let records = verify_dataset(net, samples, deltas, &opts.verify)?;
        rows.push(ModelRow {
            name: name.clone(),
            nnz: net.count_nonzeros(T::zero()).total,
            params: net.num_params(),
            accuracy: accuracy(net, samples)?,
            curve: summarize(&records, deltas),
        });
    }
    let oracle = match &opts.oracle {
        None => None,
        Some(o) => {
            let biggest = original.hidden_neurons().max(vnn.hidden_neurons());
            Some(if biggest > o.limits.max_neurons {
                OracleSection::Skipped {
                    reason: format!(
                        "{biggest} hidden neurons exceed the limit of {}",
                        o.limits.max_neurons
                    ),
                }
            } else {
                OracleSection::Matrix {
                    delta: o.delta,
                    matrix: oracle_matrix(original, vnn, samples, o.delta, opts.verify.clip, &o.limits)?,
                }
            })
        }
    };
    Ok(CompareReport {
        method: opts.verify.method,
        models: rows,
        oracle,
    })
}
