//! The `dsh` command line: dataset generation, training, encoding, ground
//! truth, querying, and the full benchmark pipeline.
//!
//! Every output file is written to a temporary file in the destination
//! directory and renamed into place, so a failed command never leaves a
//! partial artifact. All randomized stages are seed-deterministic: rerunning
//! a command with the same inputs and seed reproduces model and code files
//! byte for byte and every non-timing report field exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::baselines;
use crate::codes;
use crate::data::{self, Dataset, MixtureSpec};
use crate::dsh::{self, DshParams, HashMethod, HashModel};
use crate::error::{Error, Result};
use crate::eval;

#[derive(Debug, Parser)]
#[command(
    name = "dsh",
    version,
    about = "Density-sensitive hashing: train binary codes, rank by Hamming distance, benchmark against LSH and PCA hashing"
)]
pub struct Cli {
    /// Cap the number of worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gaussian-mixture dataset and write it as fvecs.
    Gen(GenArgs),
    /// Train a hashing model on a dataset.
    Train(TrainArgs),
    /// Encode a dataset into packed binary codes with a trained model.
    Encode(EncodeArgs),
    /// Compute exact Euclidean ground truth for a query set.
    Groundtruth(GroundtruthArgs),
    /// Rank stored codes by Hamming distance for each query.
    Query(QueryArgs),
    /// Run the full benchmark: split, train, encode, rank, report.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of mixture clusters.
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    /// Points per cluster.
    #[arg(long, default_value_t = 1000)]
    pub per_cluster: usize,
    /// Vector dimension.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Per-coordinate standard deviation of each cluster.
    #[arg(long, default_value_t = 1.0)]
    pub std: f64,
    /// Cluster centers are uniform in [-half-width, half-width]^dim.
    #[arg(long, default_value_t = 10.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output fvecs path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Input dataset (.fvecs, or .bvecs by extension).
    #[arg(long)]
    pub data: PathBuf,
    /// Hashing method: dsh, lsh, or pcah.
    #[arg(long)]
    pub method: HashMethod,
    /// Code length in bits.
    #[arg(long)]
    pub bits: usize,
    /// k-means iteration cap p (dsh only).
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
    /// Group oversampling factor (dsh only).
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// Adjacency radius r (dsh only).
    #[arg(long, default_value_t = 3)]
    pub radius: usize,
    /// Training seed (dsh and lsh; pcah is deterministic).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output model path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset to encode (.fvecs or .bvecs).
    #[arg(long)]
    pub data: PathBuf,
    /// Output codes path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroundtruthArgs {
    /// Database dataset (.fvecs or .bvecs).
    #[arg(long)]
    pub data: PathBuf,
    /// Query dataset (.fvecs or .bvecs).
    #[arg(long)]
    pub queries: PathBuf,
    /// True-neighbor fraction of the database per query.
    #[arg(long, default_value_t = 0.02)]
    pub percentile: f64,
    /// Output CSV path (columns: query,neighbor).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Encoded database codes file.
    #[arg(long)]
    pub codes: PathBuf,
    /// Query dataset (.fvecs or .bvecs).
    #[arg(long)]
    pub queries: PathBuf,
    /// Ranks to report per query (capped at the database size).
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Output CSV path (columns: query,rank,db_index,hamming); stdout when
    /// omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Key-value config file; flags below override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Database source as an fvecs/bvecs path (overrides the config's data
    /// source, including a mixture).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of query points held out of the database.
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub percentile: Option<f64>,
    /// Comma-separated list of methods, e.g. dsh,lsh,pcah.
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated list of code lengths, e.g. 8,16,32.
    #[arg(long)]
    pub bits: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for report.csv and pr_curves.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the benchmark takes its vectors from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Fvecs(PathBuf),
    Bvecs(PathBuf),
    Mixture(MixtureSpec),
}

/// A fully resolved benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub num_queries: usize,
    pub percentile: f64,
    pub methods: Vec<HashMethod>,
    pub bits: Vec<usize>,
    pub params: DshParams,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::Mixture(MixtureSpec {
                num_clusters: 50,
                points_per_cluster: 200,
                dim: 64,
                cluster_std: 1.0,
                center_box_half_width: 10.0,
                seed: 42,
            }),
            num_queries: 1000,
            percentile: 0.02,
            methods: vec![HashMethod::Dsh, HashMethod::Lsh, HashMethod::Pcah],
            bits: vec![16, 32],
            params: DshParams::default(),
            seed: 42,
            out_dir: PathBuf::from("bench_out"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value {value:?} for {key}: {e}")))
}

fn parse_methods(s: &str) -> Result<Vec<HashMethod>> {
    let methods: Vec<HashMethod> = s
        .split(',')
        .map(|m| m.trim().parse())
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    Ok(methods)
}

fn parse_bits_list(s: &str) -> Result<Vec<usize>> {
    let bits: Vec<usize> = s
        .split(',')
        .map(|b| parse_value("bits", b.trim()))
        .collect::<Result<_>>()?;
    if bits.is_empty() || bits.contains(&0) {
        return Err(Error::Config("bit lengths must be positive".into()));
    }
    Ok(bits)
}

/// Parses the key-value config format: one `key = value` per line, `#`
/// comments, and an optional `[mixture]` section whose keys describe a
/// synthetic source (clusters, per_cluster, dim, std, half_width, seed).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut mixture = match &cfg.source {
        DataSource::Mixture(m) => m.clone(),
        _ => unreachable!("default source is a mixture"),
    };
    let mut saw_mixture_section = false;
    let mut saw_path_source = false;
    let mut in_mixture = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[mixture]" {
            in_mixture = true;
            saw_mixture_section = true;
            continue;
        }
        if line.starts_with('[') {
            return Err(Error::Config(format!("line {}: unknown section {line}", lineno + 1)));
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if in_mixture {
            match key {
                "clusters" => mixture.num_clusters = parse_value(key, value)?,
                "per_cluster" => mixture.points_per_cluster = parse_value(key, value)?,
                "dim" => mixture.dim = parse_value(key, value)?,
                "std" => mixture.cluster_std = parse_value(key, value)?,
                "half_width" => mixture.center_box_half_width = parse_value(key, value)?,
                "seed" => mixture.seed = parse_value(key, value)?,
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown mixture key {key:?}",
                        lineno + 1
                    )))
                }
            }
        } else {
            match key {
                "data" => {
                    cfg.source = DataSource::Fvecs(PathBuf::from(value));
                    saw_path_source = true;
                }
                "data_bvecs" => {
                    cfg.source = DataSource::Bvecs(PathBuf::from(value));
                    saw_path_source = true;
                }
                "queries" => cfg.num_queries = parse_value(key, value)?,
                "percentile" => cfg.percentile = parse_value(key, value)?,
                "methods" => cfg.methods = parse_methods(value)?,
                "bits" => cfg.bits = parse_bits_list(value)?,
                "iters" => cfg.params.iterations = parse_value(key, value)?,
                "alpha" => cfg.params.alpha = parse_value(key, value)?,
                "radius" => cfg.params.radius = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "out" => cfg.out_dir = PathBuf::from(value),
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {key:?}",
                        lineno + 1
                    )))
                }
            }
        }
    }
    if saw_mixture_section && saw_path_source {
        return Err(Error::Config(
            "config declares both a data path and a [mixture] section".into(),
        ));
    }
    if saw_mixture_section || !saw_path_source {
        cfg.source = DataSource::Mixture(mixture);
    }
    Ok(cfg)
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a file atomically: the content goes to a temporary file in the
/// destination directory, which is renamed over `path` only after a
/// successful write.
fn write_atomic<F>(path: &Path, write_fn: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".dsh-tmp-")
        .tempfile_in(dir)
        .map_err(|e| io_err(path, e))?;
    {
        let mut writer = io::BufWriter::new(tmp.as_file_mut());
        write_fn(&mut writer).map_err(|e| io_err(path, e))?;
        writer.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Loads a dataset, picking the record format from the file extension
/// (`.bvecs` for byte vectors, fvecs otherwise).
fn load_dataset(path: &Path) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bvecs") => data::load_bvecs(path),
        _ => data::load_fvecs(path),
    }
}

/// Seed-deterministic query/database split: `num_queries` distinct indices
/// are drawn by partial Fisher-Yates, and both halves keep ascending
/// original order.
fn split_queries(all: &Dataset, num_queries: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = all.n();
    if num_queries < 1 || num_queries >= n {
        return Err(Error::Config(format!(
            "query count {num_queries} must be in 1..{n} (database must be non-empty)"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    for i in 0..num_queries {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut is_query = vec![false; n];
    for &i in &idx[..num_queries] {
        is_query[i as usize] = true;
    }
    let d = all.dim();
    let mut q_values = Vec::with_capacity(num_queries * d);
    let mut db_values = Vec::with_capacity((n - num_queries) * d);
    for i in 0..n {
        if is_query[i] {
            q_values.extend_from_slice(all.row(i));
        } else {
            db_values.extend_from_slice(all.row(i));
        }
    }
    Ok((Dataset::from_vec(d, db_values)?, Dataset::from_vec(d, q_values)?))
}

/// Trains one model and reports its wall time, excluding all I/O.
fn train_timed(
    db: &Dataset,
    method: HashMethod,
    bits: usize,
    params: &DshParams,
    seed: u64,
) -> Result<(HashModel, f64)> {
    let started = Instant::now();
    let model = match method {
        HashMethod::Dsh => dsh::train_dsh(db, bits, params, seed)?,
        HashMethod::Lsh => baselines::train_lsh(db.dim(), bits, seed)?
            .with_training_mean(data::column_means(db))?,
        HashMethod::Pcah => baselines::train_pcah(db, bits)?,
    };
    Ok((model, started.elapsed().as_secs_f64()))
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let spec = MixtureSpec {
        num_clusters: args.clusters,
        points_per_cluster: args.per_cluster,
        dim: args.dim,
        cluster_std: args.std,
        center_box_half_width: args.half_width,
        seed: args.seed,
    };
    let (ds, _) = data::generate_gaussian_mixture(&spec)?;
    write_atomic(&args.out, |w| data::write_fvecs_to(&ds, w))?;
    println!(
        "generated {} points of dimension {} -> {}",
        ds.n(),
        ds.dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let params = DshParams {
        iterations: args.iters,
        alpha: args.alpha,
        radius: args.radius,
    };
    let (model, seconds) = train_timed(&ds, args.method, args.bits, &params, args.seed)?;
    write_atomic(&args.out, |w| dsh::save_model_to(&model, w))?;
    println!(
        "trained {} L={} d={} on {} points in {seconds:.3} s -> {}",
        model.method.name(),
        model.bits(),
        model.dim,
        ds.n(),
        args.out.display()
    );
    Ok(())
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let model = dsh::load_model(&args.model)?;
    let ds = load_dataset(&args.data)?;
    let started = Instant::now();
    let store = codes::encode(&model, &ds)?;
    let seconds = started.elapsed().as_secs_f64();
    write_atomic(&args.out, |w| codes::save_codes_to(&store, w))?;
    println!(
        "encoded {} vectors at {} bits in {seconds:.3} s -> {}",
        store.n(),
        store.bits(),
        args.out.display()
    );
    Ok(())
}

fn cmd_groundtruth(args: &GroundtruthArgs) -> Result<()> {
    let db = load_dataset(&args.data)?;
    let queries = load_dataset(&args.queries)?;
    let gt = eval::ground_truth(&db, &queries, args.percentile)?;
    write_atomic(&args.out, |w| {
        writeln!(w, "query,neighbor")?;
        for (qi, truth) in gt.per_query.iter().enumerate() {
            for &t in truth {
                writeln!(w, "{qi},{t}")?;
            }
        }
        Ok(())
    })?;
    println!(
        "ground truth for {} queries ({} neighbors each) -> {}",
        queries.n(),
        gt.truth_size(),
        args.out.display()
    );
    Ok(())
}

fn cmd_query(args: &QueryArgs) -> Result<()> {
    let model = dsh::load_model(&args.model)?;
    let store = codes::load_codes(&args.codes)?;
    if store.bits() != model.bits() {
        return Err(Error::Data(format!(
            "codes were produced at {} bits but the model has {}",
            store.bits(),
            model.bits()
        )));
    }
    let queries = load_dataset(&args.queries)?;
    if args.top < 1 {
        return Err(Error::Config("--top must be at least 1".into()));
    }
    let top = args.top.min(store.n());

    let write_rows = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "query,rank,db_index,hamming")?;
        for qi in 0..queries.n() {
            let code = codes::encode_query(&model, queries.row(qi))
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            let ranking = codes::rank_all(&code, &store);
            for (rank, &(idx, dist)) in ranking[..top].iter().enumerate() {
                writeln!(w, "{qi},{},{idx},{dist}", rank + 1)?;
            }
        }
        Ok(())
    };
    match &args.out {
        Some(path) => write_atomic(path, write_rows)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_rows(&mut lock).map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    Ok(())
}

/// Applies flag overrides on top of a parsed (or default) config.
fn resolve_bench_config(args: &BenchArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &args.data {
        cfg.source = match path.extension().and_then(|e| e.to_str()) {
            Some("bvecs") => DataSource::Bvecs(path.clone()),
            _ => DataSource::Fvecs(path.clone()),
        };
    }
    if let Some(q) = args.queries {
        cfg.num_queries = q;
    }
    if let Some(p) = args.percentile {
        cfg.percentile = p;
    }
    if let Some(m) = &args.method {
        cfg.methods = parse_methods(m)?;
    }
    if let Some(b) = &args.bits {
        cfg.bits = parse_bits_list(b)?;
    }
    if let Some(i) = args.iters {
        cfg.params.iterations = i;
    }
    if let Some(a) = args.alpha {
        cfg.params.alpha = a;
    }
    if let Some(r) = args.radius {
        cfg.params.radius = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

/// Runs the whole benchmark for a resolved config and returns the report.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<eval::BenchReport> {
    let all = match &cfg.source {
        DataSource::Fvecs(path) => data::load_fvecs(path)?,
        DataSource::Bvecs(path) => data::load_bvecs(path)?,
        DataSource::Mixture(spec) => data::generate_gaussian_mixture(spec)?.0,
    };
    let (db, queries) = split_queries(&all, cfg.num_queries, cfg.seed)?;
    info!(
        "benchmark: {} database points, {} queries, dimension {}",
        db.n(),
        queries.n(),
        db.dim()
    );
    let truth = eval::ground_truth(&db, &queries, cfg.percentile)?;

    let mut models = Vec::new();
    for &method in &cfg.methods {
        for &bits in &cfg.bits {
            let (model, seconds) = train_timed(&db, method, bits, &cfg.params, cfg.seed)?;
            info!("trained {} L={bits} in {seconds:.3} s", method.name());
            models.push((model, seconds));
        }
    }
    eval::benchmark(&db, &queries, &models, &truth)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = resolve_bench_config(args)?;
    let report = run_bench(&cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let report_path = cfg.out_dir.join("report.csv");
    write_atomic(&report_path, |w| eval::write_report_csv(&report, w))?;
    let pr_path = cfg.out_dir.join("pr_curves.csv");
    write_atomic(&pr_path, |w| eval::write_pr_csv(&report, w))?;
    print!("{}", eval::format_report_table(&report));
    println!("report: {}", report_path.display());
    println!("pr curves: {}", pr_path.display());
    Ok(())
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {} threads: {e}", cli.threads)))?;
    }
    match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Groundtruth(args) => cmd_groundtruth(args),
        Command::Query(args) => cmd_query(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_cover_the_standard_protocol() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.num_queries, 1000);
        assert_eq!(cfg.percentile, 0.02);
        assert_eq!(
            cfg.methods,
            vec![HashMethod::Dsh, HashMethod::Lsh, HashMethod::Pcah]
        );
        assert_eq!(cfg.bits, vec![16, 32]);
        assert_eq!(cfg.params, DshParams::default());
        assert!(matches!(cfg.source, DataSource::Mixture(_)));
    }

    #[test]
    fn config_parses_keys_comments_and_mixture_section() {
        let text = "
# benchmark setup
queries = 100
percentile = 0.05
methods = lsh, dsh
bits = 4,8
iters = 5
alpha = 2.0
radius = 2
seed = 7
out = results

[mixture]
clusters = 6
per_cluster = 300
dim = 16
std = 0.5
half_width = 4.0
seed = 9
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.num_queries, 100);
        assert_eq!(cfg.percentile, 0.05);
        assert_eq!(cfg.methods, vec![HashMethod::Lsh, HashMethod::Dsh]);
        assert_eq!(cfg.bits, vec![4, 8]);
        assert_eq!(
            cfg.params,
            DshParams {
                iterations: 5,
                alpha: 2.0,
                radius: 2
            }
        );
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.out_dir, PathBuf::from("results"));
        match cfg.source {
            DataSource::Mixture(m) => {
                assert_eq!(m.num_clusters, 6);
                assert_eq!(m.points_per_cluster, 300);
                assert_eq!(m.dim, 16);
                assert_eq!(m.cluster_std, 0.5);
                assert_eq!(m.center_box_half_width, 4.0);
                assert_eq!(m.seed, 9);
            }
            other => panic!("expected mixture source, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_malformed_input() {
        assert!(matches!(parse_config("queries"), Err(Error::Config(_))));
        assert!(matches!(parse_config("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(parse_config("queries = ten"), Err(Error::Config(_))));
        assert!(matches!(parse_config("[weird]"), Err(Error::Config(_))));
        assert!(matches!(
            parse_config("methods = dsh,magic"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("data = a.fvecs\n[mixture]\nclusters = 2"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_data_key_selects_file_source() {
        let cfg = parse_config("data = db.fvecs").unwrap();
        assert_eq!(cfg.source, DataSource::Fvecs(PathBuf::from("db.fvecs")));
        let cfg = parse_config("data_bvecs = db.bvecs").unwrap();
        assert_eq!(cfg.source, DataSource::Bvecs(PathBuf::from("db.bvecs")));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let spec = MixtureSpec {
            num_clusters: 3,
            points_per_cluster: 40,
            dim: 2,
            cluster_std: 0.5,
            center_box_half_width: 5.0,
            seed: 1,
        };
        let (all, _) = data::generate_gaussian_mixture(&spec).unwrap();
        let (db, q) = split_queries(&all, 20, 9).unwrap();
        assert_eq!(db.n(), 100);
        assert_eq!(q.n(), 20);
        let (db2, q2) = split_queries(&all, 20, 9).unwrap();
        assert_eq!(db, db2);
        assert_eq!(q, q2);
        let (_, q3) = split_queries(&all, 20, 10).unwrap();
        assert_ne!(q, q3);

        // Row multiset is preserved: every original row lands in exactly one
        // half. Count by exact bytes of each row.
        use std::collections::HashMap;
        let mut counts: HashMap<Vec<u32>, i64> = HashMap::new();
        for i in 0..all.n() {
            *counts
                .entry(all.row(i).iter().map(|v| v.to_bits()).collect())
                .or_default() += 1;
        }
        for ds in [&db, &q] {
            for i in 0..ds.n() {
                *counts
                    .entry(ds.row(i).iter().map(|v| v.to_bits()).collect())
                    .or_default() -= 1;
            }
        }
        assert!(counts.values().all(|&c| c == 0));

        assert!(split_queries(&all, 0, 1).is_err());
        assert!(split_queries(&all, 120, 1).is_err());
    }
}
