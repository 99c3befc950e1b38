//! The `sgf` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal invariant violation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sgf_core::analysis::{self, ScoreTable, DEFAULT_MIN_SUPPORT};
use sgf_core::catalog::{full_release_counts, load_catalog, Catalog};
use sgf_core::enumerator::{enumerate_structures, EnumerationLimits, StructureStore};
use sgf_core::io::write_atomic;
use sgf_core::pipeline::{self, CaptionRecord, GenerationConfig, Predicate};
use sgf_core::realizer::RealizationTemplates;
use sgf_core::taxonomy::{build_tree, load_sense_edges, ConceptId, FlatEntry, Taxonomy};
use sgf_core::{sample, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitStatus {
    pub code: i32,
}

impl ExitStatus {
    pub const SUCCESS: ExitStatus = ExitStatus { code: 0 };
    pub const USAGE: ExitStatus = ExitStatus { code: 1 };
    pub const DATA: ExitStatus = ExitStatus { code: 2 };
    pub const INTERNAL: ExitStatus = ExitStatus { code: 3 };

    pub fn success(self) -> bool {
        self.code == 0
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgf", version, about = "Scene-graph caption generation and score analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or check a concept taxonomy
    #[command(subcommand)]
    Taxonomy(TaxonomyCmd),
    /// Check catalogs against a taxonomy
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Enumerate structure templates and persist them in the store
    Enumerate(EnumerateArgs),
    /// Generate a caption dataset
    Generate(GenerateArgs),
    /// Attach external per-caption properties to a dataset
    Attach(AttachArgs),
    /// Keep records whose property satisfies bounds
    Filter(FilterArgs),
    /// Aggregate external scores
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Select captions or candidates by score
    #[command(subcommand)]
    Select(SelectCmd),
}

#[derive(Debug, Subcommand)]
enum TaxonomyCmd {
    /// Build a taxonomy from a sense-edge TSV
    Build(BuildArgs),
    /// Check a taxonomy file (the built-in sample when none is given)
    Validate {
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Sense edges: child_lemma, child_sense, parent_lemma, parent_sense[, tags]
    #[arg(long)]
    edges: PathBuf,
    #[arg(long, default_value = "entity")]
    root_lemma: String,
    #[arg(long, default_value = "n.01")]
    root_sense: String,
    /// Catalog files whose non-object entries become flat categories
    #[arg(long = "flat")]
    flat: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum CatalogCmd {
    /// Resolve catalogs, print counts and check them against declared totals
    Validate {
        #[command(flatten)]
        data: DataArgs,
        /// Report differences from the full-release counts (non-fatal)
        #[arg(long)]
        reconcile_full: bool,
    },
}

/// Taxonomy and catalog inputs; the built-in sample when omitted.
#[derive(Debug, Args, Clone)]
struct DataArgs {
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long = "catalog", requires = "taxonomy")]
    catalogs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct EnumerateArgs {
    /// One complexity (`5`) or an inclusive range (`3-12`)
    #[arg(long, value_parser = parse_range)]
    complexity: (usize, usize),
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    max_edges: Option<usize>,
    #[arg(long)]
    max_attrs_per_object: Option<usize>,
    #[arg(long, env = "SGF_STORE_DIR")]
    store_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// JSON generation config
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// paper-image or paper-3d
    #[arg(long)]
    preset: Option<String>,
    /// Master seed; overrides the config file's
    #[arg(long)]
    seed: u64,
    /// Override the record count
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output JSONL path (falls back to the config's output_path, then stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scene-attribute templates layered over the defaults
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, env = "SGF_STORE_DIR")]
    store_dir: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct AttachArgs {
    #[arg(long)]
    records: PathBuf,
    /// CSV caption_id,property,value
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    property: String,
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    /// Inclusive nearest-rank percentiles, `lo,hi`
    #[arg(long, value_parser = parse_percentiles)]
    percentile: Option<(f64, f64)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreInputs {
    #[arg(long)]
    records: PathBuf,
    /// CSV caption_id,model_id,metric_id,value
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    metric: String,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCmd {
    /// Mean score over all captions under each taxonomy node
    Rollup {
        #[command(flatten)]
        inputs: ScoreInputs,
        #[arg(long)]
        model: String,
        /// Concept ids such as object/animal/n.01 (repeatable)
        #[arg(long = "node", required = true)]
        nodes: Vec<String>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Per-node means of two models over their shared captions
    Compare {
        #[command(flatten)]
        inputs: ScoreInputs,
        #[arg(long)]
        model_a: String,
        #[arg(long)]
        model_b: String,
        #[arg(long = "node", required = true)]
        nodes: Vec<String>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Concepts where model B leads model A the most
    Gaps {
        #[command(flatten)]
        inputs: ScoreInputs,
        #[arg(long)]
        model_a: String,
        #[arg(long)]
        model_b: String,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
        min_support: usize,
    },
    /// Mean score per percentile bin of a caption property
    Buckets {
        #[command(flatten)]
        inputs: ScoreInputs,
        #[arg(long)]
        model: String,
        #[arg(long)]
        property: String,
        #[arg(long, default_value_t = 10)]
        buckets: usize,
    },
}

#[derive(Debug, Subcommand)]
enum SelectCmd {
    /// Best candidate per caption from a CSV caption_id,candidate_id,score
    Best {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Highest-scoring fraction of captions
    Top {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        metric: String,
        #[arg(long, default_value_t = 0.25)]
        fraction: f64,
        /// Restrict to the captions of this dataset
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let (lo, hi) = match s.split_once('-') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("`{s}` is not a range 1 <= lo <= hi"));
    }
    Ok((lo, hi))
}

fn parse_percentiles(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Runs the CLI with `argv` (program name first), printing to the process
/// streams.
pub fn run<I, S>(argv: I) -> ExitStatus
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    ExitStatus::SUCCESS
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    ExitStatus::USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_internal() {
                ExitStatus::INTERNAL
            } else {
                ExitStatus::DATA
            }
        }
    }
}

type CmdResult = Result<ExitStatus, Error>;

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match command {
        Command::Taxonomy(TaxonomyCmd::Build(args)) => taxonomy_build(args, out),
        Command::Taxonomy(TaxonomyCmd::Validate { taxonomy }) => taxonomy_validate(taxonomy, out),
        Command::Catalog(CatalogCmd::Validate { data, reconcile_full }) => {
            catalog_validate(&data, reconcile_full, out, err)
        }
        Command::Enumerate(args) => enumerate(args, out),
        Command::Generate(args) => generate(args, out, err),
        Command::Attach(args) => attach(args, out, err),
        Command::Filter(args) => filter(args, out),
        Command::Analyze(cmd) => analyze(cmd, out, err),
        Command::Select(cmd) => select(cmd, out),
    }
}

fn say(out: &mut dyn Write, text: impl std::fmt::Display) {
    let _ = writeln!(out, "{text}");
}

fn emit(out: &mut dyn Write, path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => out.write_all(bytes).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy, Error> {
    match path {
        Some(p) => Taxonomy::read_json(p),
        None => Ok(sample::taxonomy()),
    }
}

fn load_data(data: &DataArgs) -> Result<Catalog, Error> {
    match &data.taxonomy {
        None => Ok(sample::catalog()),
        Some(path) => {
            let tax = Arc::new(Taxonomy::read_json(path)?);
            load_catalog(tax, &data.catalogs)
        }
    }
}

fn taxonomy_build(args: BuildArgs, out: &mut dyn Write) -> CmdResult {
    let edges = load_sense_edges(&args.edges)?;
    let (tax, report) = build_tree(&edges, (&args.root_lemma, &args.root_sense))?;
    let mut flat = Vec::new();
    for path in &args.flat {
        for e in sgf_core::catalog::read_catalog_file(path)? {
            if e.category != sgf_core::category::Category::Object {
                flat.push(FlatEntry {
                    lemma: e.lemma,
                    sense: e.sense,
                    category: e.category,
                    tags: e.tags,
                });
            }
        }
    }
    let tax = tax.with_flat_entries(&flat)?;
    write_atomic(&args.out, tax.to_json().as_bytes())?;
    say(out, format_args!("nodes: {}", tax.len()));
    say(
        out,
        format_args!("secondary parents ignored: {}", report.secondary_parents),
    );
    say(out, format_args!("senses collapsed: {}", report.collapsed.len()));
    say(out, format_args!("unreachable nodes dropped: {}", report.unreachable));
    Ok(ExitStatus::SUCCESS)
}

fn taxonomy_validate(path: Option<PathBuf>, out: &mut dyn Write) -> CmdResult {
    let tax = load_taxonomy(path.as_deref())?;
    let report = tax.validate();
    for (kind, n) in report.kind_counts() {
        say(out, format_args!("{kind}: {n}"));
    }
    say(out, format_args!("orphans: {}", report.orphans));
    for v in &report.violations {
        say(out, format_args!("violation: {v}"));
    }
    say(out, format_args!("violations: {}", report.violations.len()));
    Ok(if report.is_valid() {
        ExitStatus::SUCCESS
    } else {
        ExitStatus::DATA
    })
}

fn catalog_validate(data: &DataArgs, reconcile_full: bool, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut catalog = load_data(data)?;
    let report = catalog.taxonomy().validate();
    for (key, n) in catalog.counts() {
        say(out, format_args!("{key}: {n}"));
    }
    if reconcile_full {
        catalog = catalog.with_declared_counts(full_release_counts());
        let mismatches = catalog.reconcile();
        for m in &mismatches {
            say(
                err,
                format_args!(
                    "warning: {} declared {} but catalog has {}",
                    m.key, m.declared, m.actual
                ),
            );
        }
        say(out, format_args!("count mismatches: {}", mismatches.len()));
    }
    for v in &report.violations {
        say(out, format_args!("violation: {v}"));
    }
    say(out, format_args!("violations: {}", report.violations.len()));
    Ok(if report.is_valid() {
        ExitStatus::SUCCESS
    } else {
        ExitStatus::DATA
    })
}

fn enumerate(args: EnumerateArgs, out: &mut dyn Write) -> CmdResult {
    let limits = EnumerationLimits {
        max_objects: args.max_objects,
        max_edges: args.max_edges,
        max_attrs_per_object: args.max_attrs_per_object,
    };
    let (lo, hi) = args.complexity;
    let mut store = StructureStore::new();
    for c in lo..=hi {
        let start = Instant::now();
        let templates = enumerate_structures(c, limits)?;
        say(
            out,
            format_args!(
                "complexity {c}: {} structures ({:.3}s)",
                templates.len(),
                start.elapsed().as_secs_f64()
            ),
        );
        store = sgf_core::enumerator::store_structures(store, templates, limits)?;
    }
    if let Some(dir) = &args.store_dir {
        for path in store.write_dir(dir)? {
            say(out, format_args!("wrote {}", path.display()));
        }
    }
    Ok(ExitStatus::SUCCESS)
}

fn generate(args: GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => GenerationConfig::read_json(path)?,
        (None, Some(name)) => GenerationConfig::preset(name, args.seed)?,
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    config.master_seed = args.seed;
    if let Some(n) = args.count {
        config.count = n;
    }
    let templates = match &args.templates {
        Some(p) => RealizationTemplates::default().merged(&RealizationTemplates::read_json(p)?),
        None => RealizationTemplates::default(),
    };
    let catalog = load_data(&args.data)?;
    let store = pipeline::prepare_store(&config, args.store_dir.as_deref())?;

    let start = Instant::now();
    let records = pipeline::generate_dataset(&config, &store, &catalog, &templates, args.workers)?;
    let bytes = pipeline::to_jsonl(&records);
    let target = args.out.or(config.output_path.clone());
    emit(out, target.as_deref(), &bytes)?;
    say(
        err,
        format_args!(
            "generated {} records in {:.2}s",
            records.len(),
            start.elapsed().as_secs_f64()
        ),
    );
    Ok(ExitStatus::SUCCESS)
}

fn attach(args: AttachArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut records = pipeline::read_jsonl(&args.records)?;
    let report = pipeline::attach_properties(&mut records, &args.scores)?;
    for (line, id) in &report.unknown {
        say(
            err,
            format_args!("warning: {}:{line}: unknown caption_id {id}", args.scores.display()),
        );
    }
    pipeline::emit_jsonl(&records, &args.out)?;
    say(
        out,
        format_args!(
            "applied {} values, {} unknown ids",
            report.applied,
            report.unknown.len()
        ),
    );
    Ok(ExitStatus::SUCCESS)
}

fn filter(args: FilterArgs, out: &mut dyn Write) -> CmdResult {
    let records = pipeline::read_jsonl(&args.records)?;
    let predicate = Predicate {
        min: args.min,
        max: args.max,
        percentile_range: args.percentile,
    };
    let kept = pipeline::filter_records(&records, &args.property, &predicate)?;
    pipeline::emit_jsonl(&kept, &args.out)?;
    say(out, format_args!("kept {} of {} records", kept.len(), records.len()));
    Ok(ExitStatus::SUCCESS)
}

fn load_scored(inputs: &ScoreInputs) -> Result<(Vec<CaptionRecord>, ScoreTable), Error> {
    Ok((
        pipeline::read_jsonl(&inputs.records)?,
        analysis::ingest_scores(&inputs.scores)?,
    ))
}

fn node_ids(nodes: &[String], tax: &Taxonomy) -> Result<Vec<ConceptId>, Error> {
    nodes
        .iter()
        .map(|n| {
            let id = ConceptId::from_raw(n.as_str());
            if tax.contains(&id) {
                Ok(id)
            } else {
                Err(Error::UnknownConcept(n.clone()))
            }
        })
        .collect()
}

fn analyze(cmd: AnalyzeCmd, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        AnalyzeCmd::Rollup {
            inputs,
            model,
            nodes,
            taxonomy,
        } => {
            let (records, table) = load_scored(&inputs)?;
            let tax = load_taxonomy(taxonomy.as_deref())?;
            let rows = node_ids(&nodes, &tax)?
                .into_iter()
                .map(|id| {
                    let stat = analysis::rollup(&table, &records, &tax, &id, &model, &inputs.metric)?;
                    Ok((id, stat))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            emit(out, inputs.out.as_deref(), analysis::rollup_csv(&rows).as_bytes())?;
        }
        AnalyzeCmd::Compare {
            inputs,
            model_a,
            model_b,
            nodes,
            taxonomy,
        } => {
            let (records, table) = load_scored(&inputs)?;
            let tax = load_taxonomy(taxonomy.as_deref())?;
            let ids = node_ids(&nodes, &tax)?;
            let rows = analysis::compare_models(&table, &records, &tax, &model_a, &model_b, &inputs.metric, &ids)?;
            emit(out, inputs.out.as_deref(), analysis::comparison_csv(&rows).as_bytes())?;
        }
        AnalyzeCmd::Gaps {
            inputs,
            model_a,
            model_b,
            k,
            min_support,
        } => {
            let (records, table) = load_scored(&inputs)?;
            let ranking = analysis::gap_ranking(&table, &records, &model_a, &model_b, &inputs.metric, k, min_support)?;
            if let Some(found) = ranking.shortfall {
                say(
                    err,
                    format_args!("note: only {found} concepts meet min_support {min_support} (asked for {k})"),
                );
            }
            emit(out, inputs.out.as_deref(), analysis::gaps_csv(&ranking).as_bytes())?;
        }
        AnalyzeCmd::Buckets {
            inputs,
            model,
            property,
            buckets,
        } => {
            let (records, table) = load_scored(&inputs)?;
            let rows = analysis::percentile_buckets(&records, &table, &model, &inputs.metric, &property, buckets)?;
            emit(out, inputs.out.as_deref(), analysis::buckets_csv(&rows).as_bytes())?;
        }
    }
    Ok(ExitStatus::SUCCESS)
}

fn select(cmd: SelectCmd, out: &mut dyn Write) -> CmdResult {
    match cmd {
        SelectCmd::Best { candidates, out: path } => {
            let file = std::fs::File::open(&candidates).map_err(|e| Error::Io {
                path: candidates.clone(),
                source: e,
            })?;
            let groups = analysis::parse_candidates(file, &candidates)?;
            let best = analysis::select_best_per_group(&groups)?;
            emit(out, path.as_deref(), analysis::best_csv(&best).as_bytes())?;
        }
        SelectCmd::Top {
            scores,
            model,
            metric,
            fraction,
            records,
            out: path,
        } => {
            let table = analysis::ingest_scores(&scores)?;
            let records = records.map(pipeline::read_jsonl).transpose()?;
            let items = analysis::scored_captions(&table, &model, &metric, records.as_deref())?;
            let top = analysis::select_top_fraction(&items, fraction)?;
            emit(out, path.as_deref(), analysis::top_csv(&top).as_bytes())?;
        }
    }
    Ok(ExitStatus::SUCCESS)
}
