use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vnn_core::baselines::{mbp_prune, mbp_prune_to_sparsity, PruneScope};
use vnn_core::data::{load_mnist, Dataset, LabeledSample, MnistProtocol, Split};
use vnn_core::harness::{
    compare, fixture_spec, parse_deltas, records_to_csv, standard_fixtures, summarize, verify_dataset,
    CompareOptions, OracleOptions, VerifyOptions,
};
use vnn_core::network::{load, save};
use vnn_core::oracle::OracleLimits;
use vnn_core::sparsify::{sparsify_network, EpsilonMode, LayerSelection, SparsifyConfig};
use vnn_core::util::write_atomic;
use vnn_core::verify::Method;
use vnn_core::Network;

const MNIST_IMAGES: &str = "t10k-images-idx3-ubyte";
const MNIST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Parser)]
#[command(name = "vnn", version, about = "Sparsify ReLU classifiers and check their robustness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a model into a sparse one that keeps its validation behaviour.
    Sparsify(SparsifyArgs),
    /// Verify local robustness of every sample over a radius grid.
    Verify(VerifyArgs),
    /// Magnitude-prune a model.
    Prune(PruneArgs),
    /// Compare original, sparsified and magnitude-pruned models.
    Compare(CompareArgs),
    /// Write the seeded synthetic models and their data splits.
    GenFixtures(GenArgs),
}

/// Where samples come from: a CSV file or an MNIST IDX directory.
#[derive(Args)]
struct DataArgs {
    /// CSV with `label,x0,x1,...` rows.
    #[arg(long, conflicts_with = "mnist")]
    data: Option<PathBuf>,
    /// Directory holding the t10k IDX image and label files.
    #[arg(long)]
    mnist: Option<PathBuf>,
    /// Use only the first 400 MNIST items: 200 for validation, 200 for testing.
    #[arg(long, requires = "mnist")]
    paper_split: bool,
}

impl DataArgs {
    /// Loads the samples for `split`; CSV files are used whole.
    fn load(&self, net: &Network, split: Split) -> Result<Vec<LabeledSample>> {
        let data = match (&self.data, &self.mnist) {
            (Some(path), _) => {
                ensure_exists(path, "data file")?;
                Dataset::read_csv(path, split, Some(net.output_dim()))?
            }
            (None, Some(dir)) => {
                let protocol = if self.paper_split {
                    MnistProtocol::PaperSplit
                } else {
                    MnistProtocol::AsIs(split)
                };
                let (images, labels) = (dir.join(MNIST_IMAGES), dir.join(MNIST_LABELS));
                ensure_exists(&images, "MNIST images")?;
                ensure_exists(&labels, "MNIST labels")?;
                load_mnist(images, labels, protocol)?
            }
            (None, None) => bail!(vnn_core::Error::Config("one of --data or --mnist is required".into())),
        };
        if data.num_classes() > net.output_dim() || data.input_dim() != net.input_dim() {
            bail!(vnn_core::Error::Data(format!(
                "data has {} inputs and {} classes but the model expects {} inputs and {} classes",
                data.input_dim(),
                data.num_classes(),
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(data.split(split))
    }
}

#[derive(Args)]
struct SparsifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// `key = value` file with epsilon, epsilon_mode, margin, zero_threshold, layers.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// additive or multiplicative
    #[arg(long)]
    epsilon_mode: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    margin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zero_threshold: Option<f64>,
    /// 1-based layers to optimize: `all`, `2`, `1,3` or `1-3`.
    #[arg(long)]
    layers: Option<String>,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
    /// Per-layer CSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated L-infinity radii.
    #[arg(long, allow_hyphen_values = true)]
    delta: String,
    /// interval or polyhedral
    #[arg(long, default_value = "polyhedral")]
    method: String,
    /// Clamp perturbation boxes to [0, 1].
    #[arg(long)]
    clip: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-sample results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    model: PathBuf,
    /// Fraction of parameters to zero.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["target_nnz", "match_model"])]
    rate: Option<f64>,
    /// global or per-layer
    #[arg(long, default_value = "global")]
    scope: String,
    /// Prune down to this many non-zero parameters.
    #[arg(long, conflicts_with = "match_model")]
    target_nnz: Option<usize>,
    /// Prune down to the non-zero count of this model.
    #[arg(long = "match")]
    match_model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    vnn: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, allow_hyphen_values = true)]
    delta: String,
    #[arg(long, default_value = "polyhedral")]
    method: String,
    /// Global rate of the plain magnitude-pruning model.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    rate: f64,
    /// Also run the exact oracle at this radius.
    #[arg(long)]
    oracle_delta: Option<f64>,
    /// Largest hidden-neuron count the oracle accepts.
    #[arg(long, default_value_t = OracleLimits::default().max_neurons)]
    oracle_max_neurons: usize,
    #[arg(long)]
    clip: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for `curves.csv` and `report.md`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated fixture names; all by default.
    #[arg(long)]
    only: Option<String>,
    /// Training seed used for every fixture.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input, 1 for failures during the computation itself.
fn exit_code(e: &anyhow::Error) -> u8 {
    use vnn_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Internal(_) | E::SolverStalled { .. } | E::TrainingDiverged { .. }) => 1,
        Some(E::Io { path, .. }) if !path.exists() => 2,
        Some(E::Io { .. }) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Sparsify(a) => cmd_sparsify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GenFixtures(a) => cmd_gen(a),
    }
}

fn ensure_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!(vnn_core::Error::Config(format!("{what} not found: {}", path.display())));
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Network> {
    ensure_exists(path, "model")?;
    load(path).with_context(|| format!("loading {}", path.display()))
}

fn sparsify_config(a: &SparsifyArgs) -> Result<SparsifyConfig> {
    let mut cfg = SparsifyConfig::default();
    if let Some(path) = &a.config {
        ensure_exists(path, "config")?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg = cfg.apply_kv(&text)?;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = &a.epsilon_mode {
        cfg.epsilon_mode = v.parse::<EpsilonMode>()?;
    }
    if let Some(v) = a.margin {
        cfg.margin = v;
    }
    if let Some(v) = a.zero_threshold {
        cfg.zero_threshold = v;
    }
    if let Some(v) = &a.layers {
        cfg.layers = LayerSelection::parse_one_based(v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_sparsify(a: SparsifyArgs) -> Result<()> {
    let cfg = sparsify_config(&a)?;
    let net = load_model(&a.model)?;
    let val = a.data.load(&net, Split::Validation)?;
    let (vnn, report) = sparsify_network(&net, &val, &cfg)?;
    save(&vnn, &a.out)?;
    if let Some(path) = &a.report {
        report.write_csv(path)?;
    }
    for w in report.warnings() {
        eprintln!("warning: {w}");
    }
    let (before, after) = (net.count_nonzeros(0.0).total, vnn.count_nonzeros(0.0).total);
    println!(
        "retained {} of {} validation samples; non-zeros {before} -> {after}",
        report.retained,
        val.len()
    );
    print!("{}", report.to_csv());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let deltas = parse_deltas(&a.delta)?;
    let method: Method = a.method.parse()?;
    let net = load_model(&a.model)?;
    let samples = a.data.load(&net, Split::Test)?;
    let opts = VerifyOptions {
        method,
        clip: a.clip,
        jobs: a.jobs,
    };
    let records = verify_dataset(&net, &samples, &deltas, &opts)?;
    if let Some(path) = &a.out {
        write_atomic(path, records_to_csv(&records).as_bytes())?;
    }
    println!("delta,verified,total,percent,mean_time_ms");
    for s in summarize(&records, &deltas) {
        println!(
            "{},{},{},{:.2},{:.6}",
            s.delta,
            s.verified,
            s.total,
            s.percent(),
            s.mean_seconds * 1e3
        );
    }
    Ok(())
}

fn cmd_prune(a: PruneArgs) -> Result<()> {
    let scope: PruneScope = a.scope.parse()?;
    let net = load_model(&a.model)?;
    let pruned = match (a.rate, a.target_nnz, &a.match_model) {
        (Some(rate), None, None) => mbp_prune(&net, rate, scope)?,
        (None, Some(n), None) => mbp_prune_to_sparsity(&net, n)?,
        (None, None, Some(path)) => {
            let target = load_model(path)?.count_nonzeros(0.0).total;
            mbp_prune_to_sparsity(&net, target.min(net.count_nonzeros(0.0).total))?
        }
        _ => bail!(vnn_core::Error::Config(
            "give exactly one of --rate, --target-nnz or --match".into()
        )),
    };
    save(&pruned, &a.out)?;
    println!(
        "non-zeros {} -> {}",
        net.count_nonzeros(0.0).total,
        pruned.count_nonzeros(0.0).total
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let deltas = parse_deltas(&a.delta)?;
    let method: Method = a.method.parse()?;
    let original = load_model(&a.original)?;
    let vnn = load_model(&a.vnn)?;
    let samples = a.data.load(&original, Split::Test)?;
    let opts = CompareOptions {
        verify: VerifyOptions {
            method,
            clip: a.clip,
            jobs: a.jobs,
        },
        rate: a.rate,
        oracle: a.oracle_delta.map(|delta| OracleOptions {
            delta,
            limits: OracleLimits {
                max_neurons: a.oracle_max_neurons,
                ..OracleLimits::default()
            },
        }),
    };
    let report = compare(&original, &vnn, &samples, &deltas, &opts)?;
    let markdown = report.to_markdown();
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_atomic(&dir.join("curves.csv"), report.curve_csv().as_bytes())?;
        write_atomic(&dir.join("report.md"), markdown.as_bytes())?;
    }
    print!("{markdown}");
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut specs = match &a.only {
        None => standard_fixtures(),
        Some(list) => list
            .split(',')
            .map(|n| fixture_spec(n.trim()))
            .collect::<vnn_core::Result<Vec<_>>>()?,
    };
    for spec in &mut specs {
        if let Some(seed) = a.seed {
            spec.train_seed = seed;
        }
        let fixture = spec.build::<f64>()?;
        fixture.write(&a.out_dir)?;
        println!(
            "{}: {} non-zeros, {} validation / {} test samples",
            spec.name,
            fixture.network.count_nonzeros(0.0).total,
            fixture.data.count(Split::Validation),
            fixture.data.count(Split::Test)
        );
    }
    Ok(())
}
