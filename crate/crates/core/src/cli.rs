//! The `graphtax` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{gen_feature_only, gen_sbm_cluster, gen_structure_only, load_dir, write_tu, RunConfig, SbmSpec};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, RunRecord, TrainConfig};
use crate::graph::Dataset;
use crate::models::{ModelConfig, ModelKind};
use crate::perturb::{apply, PerturbationKind, SeedPolicy};
use crate::profiler::{
    cluster_profiles, profile_with_runs, read_profiles_csv, write_heatmap_svg, write_profiles_csv,
    write_taxonomy_json, SensitivityProfile, DEFAULT_CHANCE_MARGIN, DEFAULT_CLUSTERS,
};

#[derive(Debug, Parser)]
#[command(name = "graphtax", version, about = "Perturbation-sensitivity profiling of graph datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset in TU text format.
    Gen(GenArgs),
    /// Apply one perturbation to a dataset and write the result.
    Perturb(PerturbArgs),
    /// Evaluate one dataset, model and perturbation; prints the result as JSON.
    Run(RunArgs),
    /// Evaluate the perturbation suite and write a profiles CSV.
    Profile(ProfileArgs),
    /// Cluster a profiles CSV into taxonomy JSON and a heatmap SVG.
    Taxonomy(TaxonomyArgs),
    /// End-to-end pipeline driven by a JSON run configuration.
    All(AllArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Generator {
    FeatureOnly,
    StructureOnly,
    SbmCluster,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Generator,
    #[arg(long, default_value_t = 100)]
    graphs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// SBM: number of blocks.
    #[arg(long)]
    blocks: Option<usize>,
    /// SBM: intra-block edge probability.
    #[arg(long)]
    p: Option<f64>,
    /// SBM: inter-block edge probability.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    min_block_size: Option<usize>,
    #[arg(long)]
    max_block_size: Option<usize>,
    #[arg(long)]
    labeled_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Perturbation name, e.g. `no-edges` or `fragmented`.
    #[arg(long)]
    kind: String,
    /// Fragmentation parameter when `--kind fragmented`.
    #[arg(long)]
    k: Option<usize>,
    /// `lowest-id` or `max-degree`.
    #[arg(long, default_value = "lowest-id")]
    seed_policy: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    gat_heads: Option<usize>,
    #[arg(long)]
    cheb_order: Option<usize>,
    #[arg(long)]
    gin_eps: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, mut m: ModelConfig) -> ModelConfig {
        m.hidden_dim = self.hidden_dim.unwrap_or(m.hidden_dim);
        m.num_conv_layers = self.layers.unwrap_or(m.num_conv_layers);
        m.gat_heads = self.gat_heads.unwrap_or(m.gat_heads);
        m.cheb_order = self.cheb_order.unwrap_or(m.cheb_order);
        m.gin_eps = self.gin_eps.unwrap_or(m.gin_eps);
        m.dropout = self.dropout.unwrap_or(m.dropout);
        m
    }
}

#[derive(Debug, Args, Default)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl TrainArgs {
    fn apply(&self, mut t: TrainConfig) -> TrainConfig {
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.patience = self.patience.unwrap_or(t.patience);
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.lr = self.lr.unwrap_or(t.lr);
        t.folds = self.folds.unwrap_or(t.folds);
        t.repetitions = self.repetitions.unwrap_or(t.repetitions);
        t.seed = self.seed.unwrap_or(t.seed);
        t.workers = self.workers.or(t.workers);
        t
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Dataset directory in TU text format.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "gcn")]
    model: ModelKind,
    #[arg(long, default_value = "identity")]
    perturbation: PerturbationKind,
    #[command(flatten)]
    model_args: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Dataset directories; repeat for several.
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    /// Model kinds; repeat for several.
    #[arg(long, default_value = "gcn")]
    model: Vec<ModelKind>,
    /// Comma-separated perturbations; defaults to the full suite.
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<PerturbationKind>>,
    #[arg(long)]
    out: PathBuf,
    /// Append per-run JSON lines here.
    #[arg(long)]
    run_log: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CHANCE_MARGIN)]
    chance_margin: f64,
    #[command(flatten)]
    model_args: ModelArgs,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Debug, Args)]
struct TaxonomyArgs {
    #[arg(long)]
    profiles: PathBuf,
    /// Number of flat clusters; clamped to the number of profiles.
    #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
    clusters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AllArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<usize>,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("graphtax: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Perturb(a) => perturb(a),
        Command::Run(a) => run(a),
        Command::Profile(a) => profile(a),
        Command::Taxonomy(a) => taxonomy(a),
        Command::All(a) => all(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let ds = match a.kind {
        Generator::FeatureOnly => gen_feature_only(a.graphs, a.seed)?,
        Generator::StructureOnly => gen_structure_only(a.graphs, a.seed)?,
        Generator::SbmCluster => {
            let d = SbmSpec::default();
            let spec = SbmSpec {
                blocks: a.blocks.unwrap_or(d.blocks),
                min_block_size: a.min_block_size.unwrap_or(d.min_block_size),
                max_block_size: a.max_block_size.unwrap_or(d.max_block_size),
                p: a.p.unwrap_or(d.p),
                q: a.q.unwrap_or(d.q),
                labeled_fraction: a.labeled_fraction.unwrap_or(d.labeled_fraction),
                graphs: a.graphs,
                seed: a.seed,
            };
            spec.validate()?;
            gen_sbm_cluster(&spec)?
        }
    };
    let stem = ds.name.clone();
    write_tu(&ds, &a.out, &stem)
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let ds = load_dir(&a.input)?;
    let kind: PerturbationKind = match (a.kind.as_str(), a.k) {
        ("fragmented", Some(k)) => {
            if k == 0 {
                return Err(Error::Input("fragmentation needs k >= 1".into()));
            }
            PerturbationKind::Fragmented {
                k,
                seed_policy: a.seed_policy.parse::<SeedPolicy>()?,
            }
        }
        ("fragmented", None) => return Err(Error::Input("--kind fragmented needs --k".into())),
        (other, None) => other.parse()?,
        (_, Some(_)) => return Err(Error::Input("--k only applies to --kind fragmented".into())),
    };
    let out = apply(kind, &ds)?;
    let stem = ds.name.clone();
    write_tu(&out, &a.out, &stem)
}

fn run(a: RunArgs) -> Result<()> {
    let ds = load_dir(&a.dataset)?;
    let model = a.model_args.apply(ModelConfig::new(a.model));
    let train = a.train.apply(TrainConfig::default());
    let perturbed = apply(a.perturbation, &ds)?;
    let mut result = run_protocol(&perturbed, &model, &train)?;
    result.set_perturbation(&a.perturbation.to_string());
    let json = serde_json::to_string_pretty(&result).expect("result serializes");
    println!("{json}");
    Ok(())
}

fn profile(a: ProfileArgs) -> Result<()> {
    let train = a.train.apply(TrainConfig::default());
    let suite = a.suite.unwrap_or_else(PerturbationKind::canonical_suite);
    let datasets: Vec<Dataset> = a.dataset.iter().map(|d| load_dir(d)).collect::<Result<_>>()?;
    let models: Vec<ModelConfig> = a
        .model
        .iter()
        .map(|&k| a.model_args.apply(ModelConfig::new(k)))
        .collect();
    let (profiles, records) = profile_all(&datasets, &models, &train, &suite, a.chance_margin)?;
    write_profiles_csv(&profiles, &a.out)?;
    if let Some(log) = &a.run_log {
        write_run_log(&records, log)?;
    }
    Ok(())
}

fn taxonomy(a: TaxonomyArgs) -> Result<()> {
    let profiles = read_profiles_csv(&a.profiles)?;
    write_taxonomies(&profiles, a.clusters, &a.out)?;
    Ok(())
}

fn all(a: AllArgs) -> Result<()> {
    let mut cfg = RunConfig::from_file(&a.config)?;
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.resolve_paths(&base);
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(w) = a.workers {
        cfg.workers = Some(w);
    }
    if let Some(c) = a.clusters {
        cfg.clusters = c;
    }
    match a.out {
        Some(out) => cfg.output_dir = out,
        None if cfg.output_dir.is_relative() => cfg.output_dir = base.join(&cfg.output_dir),
        None => {}
    }
    let out = run_pipeline(&cfg)?;
    for p in &out.files {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

/// Files written by [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub profiles: Vec<SensitivityProfile>,
    pub files: Vec<PathBuf>,
}

/// The `all` pipeline: profiles every (dataset, model) pair of `cfg`, then
/// writes `profiles.csv`, `runs.jsonl` and the taxonomy files into
/// `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let train = cfg.effective_train();
    let datasets: Vec<Dataset> = cfg.datasets.iter().map(|d| d.load()).collect::<Result<_>>()?;
    let (profiles, records) = profile_all(&datasets, &cfg.models, &train, &cfg.suite, cfg.chance_margin)?;
    let dir = &cfg.output_dir;
    let csv = dir.join("profiles.csv");
    write_profiles_csv(&profiles, &csv)?;
    let log = dir.join("runs.jsonl");
    write_run_log(&records, &log)?;
    let mut files = vec![csv, log];
    files.extend(write_taxonomies(&profiles, cfg.clusters, dir)?);
    Ok(PipelineOutput { profiles, files })
}

fn profile_all(
    datasets: &[Dataset],
    models: &[ModelConfig],
    train: &TrainConfig,
    suite: &[PerturbationKind],
    chance_margin: f64,
) -> Result<(Vec<SensitivityProfile>, Vec<RunRecord>)> {
    let mut names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Input("dataset names must be unique".into()));
    }
    let mut profiles = Vec::new();
    let mut records = Vec::new();
    for model in models {
        for ds in datasets {
            let r = profile_with_runs(ds, model, train, suite, chance_margin)?;
            if r.profile.near_chance {
                eprintln!(
                    "warning: {} / {} baseline AUROC {:.3} is near chance",
                    ds.name, model.kind, r.profile.baseline
                );
            }
            records.extend(r.records().cloned());
            profiles.push(r.profile);
        }
    }
    Ok((profiles, records))
}

/// One taxonomy per model; file names carry the model only when the
/// profiles mix several models.
fn write_taxonomies(profiles: &[SensitivityProfile], clusters: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut models: Vec<ModelKind> = Vec::new();
    for p in profiles {
        if !models.contains(&p.model) {
            models.push(p.model);
        }
    }
    let mut files = Vec::new();
    for &m in &models {
        let subset: Vec<SensitivityProfile> = profiles.iter().filter(|p| p.model == m).cloned().collect();
        if subset.len() < 2 {
            eprintln!("note: fewer than two datasets for {m}; no taxonomy written");
            continue;
        }
        let t = cluster_profiles(&subset, clusters)?;
        let (json, svg) = if models.len() == 1 {
            (dir.join("taxonomy.json"), dir.join("heatmap.svg"))
        } else {
            (dir.join(format!("taxonomy-{m}.json")), dir.join(format!("heatmap-{m}.svg")))
        };
        write_taxonomy_json(&t, &json)?;
        write_heatmap_svg(&t, &subset, &svg)?;
        files.push(json);
        files.push(svg);
    }
    Ok(files)
}

fn write_run_log(records: &[RunRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
