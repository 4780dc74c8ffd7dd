//! `sessrec`: build a session graph from edge files and query it.
//!
//! Exit codes: 0 on success, 2 when the graph fails validation, 3 on bad
//! input or usage.

mod config;

use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sessrec_core::batch::batch_recommend;
use sessrec_core::engine::recommend_pathway;
use sessrec_core::evaluation::{
    builtin_handle, efficiency, efficiency_table, simulate_many, ActionLog, BuiltinUser, RecommenderHandle,
};
use sessrec_core::ingest::{
    build_graph, export_vector, load_catalog, parse_date, write_vector, DateFilter, EdgeFileSpec, LoadOptions,
    LoadedGraph, ObjectCatalog,
};
use sessrec_core::{recommend, ClassWeights, DegreeScope, Execution, NodeId, RecommendParams, Variant};
use sessrec_service::{AppState, ServiceConfig};

use config::FileConfig;

const EXIT_INVALID_GRAPH: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "sessrec", version, about = "Session-graph recommendations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print graph statistics and validation results.
    Stats(GraphArgs),
    /// Recommend from one seed object, or from every object.
    Recommend(RecommendArgs),
    /// Recommend from an ordered list of seed objects.
    Pathway(PathwayArgs),
    /// Simulate users against one or more algorithms and write an action log.
    Simulate(SimulateArgs),
    /// Compute efficiency from an action log.
    Evaluate(EvaluateArgs),
    /// Serve recommendations over HTTP.
    Serve(ServeArgs),
}

#[derive(Args, Clone, Default)]
struct GraphArgs {
    /// Edge file as CLASS:PATH[:KERNEL_COL:OBJECT_COL]. Repeatable.
    #[arg(long = "edges", value_name = "SPEC")]
    edges: Vec<String>,
    /// CSV with object_id,name columns.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Keep rows dated on or after this day (YYYY-MM-DD).
    #[arg(long)]
    date_from: Option<String>,
    /// Keep rows dated on or before this day (YYYY-MM-DD).
    #[arg(long)]
    date_to: Option<String>,
    #[arg(long, default_value = "date")]
    date_column: String,
}

#[derive(Args, Clone, Default)]
struct ParamArgs {
    /// Keep only the top K entries.
    #[arg(long)]
    k: Option<usize>,
    /// base, weighted, three-layer or pathway.
    #[arg(long)]
    variant: Option<Variant>,
    /// subgraph or global.
    #[arg(long)]
    scope: Option<DegreeScope>,
    /// Class weights, e.g. K1=1,K2=0.5.
    #[arg(long)]
    weights: Option<ClassWeights>,
}

#[derive(Args)]
struct RecommendArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, required_unless_present = "all_objects", conflicts_with = "all_objects")]
    object: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long, conflicts_with = "all_objects")]
    out: Option<PathBuf>,
    /// Recommend for every object; one CSV per seed in --out-dir.
    #[arg(long, requires = "out_dir")]
    all_objects: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Run the batch on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct PathwayArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated seed objects in pathway order.
    #[arg(long)]
    objects: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated: ars, ars-global, ars-three-layer, ars-weighted,
    /// popularity, random.
    #[arg(long, default_value = "ars,popularity,random")]
    algorithms: String,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with seeds seed, seed+1, ...; logs are concatenated.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// oracle, adversarial, uniform or session.
    #[arg(long, default_value = "session")]
    model: String,
    /// Vector length for the random and popularity baselines.
    #[arg(long, default_value_t = 10)]
    baseline_k: usize,
    /// Action log CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    log: PathBuf,
    /// Report a single algorithm; all of them otherwise.
    #[arg(long)]
    algorithm: Option<String>,
    /// Count a hit only within the first K entries.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<IpAddr>,
    #[arg(long)]
    port: Option<u16>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Stats(args) => stats(&args),
        Command::Recommend(args) => recommend_cmd(&args),
        Command::Pathway(args) => pathway_cmd(&args),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Evaluate(args) => evaluate_cmd(&args),
        Command::Serve(args) => serve_cmd(args),
    }
}

impl GraphArgs {
    fn specs(&self) -> Result<Vec<EdgeFileSpec>> {
        self.edges.iter().map(|s| Ok(EdgeFileSpec::parse(s)?)).collect()
    }

    fn load_options(&self) -> Result<LoadOptions> {
        let date = |s: &Option<String>| s.as_deref().map(parse_date).transpose();
        let (from, to) = (date(&self.date_from)?, date(&self.date_to)?);
        let date_filter = (from.is_some() || to.is_some()).then(|| DateFilter {
            column: self.date_column.clone(),
            from,
            to,
        });
        Ok(LoadOptions {
            strict: self.strict,
            date_filter,
        })
    }

    fn load(&self) -> Result<Loaded> {
        load(&self.specs()?, &self.load_options()?, self.catalog.as_deref())
    }
}

struct Loaded {
    graph: LoadedGraph,
    catalog: Option<ObjectCatalog>,
}

fn load(specs: &[EdgeFileSpec], opts: &LoadOptions, catalog: Option<&Path>) -> Result<Loaded> {
    if specs.is_empty() {
        bail!("no edge files given; pass --edges CLASS:PATH");
    }
    let graph = build_graph(specs, opts)?;
    for report in &graph.reports {
        for row in &report.rejected {
            eprintln!("warning: {}:{}: {}", report.path.display(), row.line, row.reason);
        }
    }
    let catalog = catalog
        .map(|p| {
            let (catalog, report) = load_catalog(p)?;
            for row in &report.rejected {
                eprintln!("warning: {}:{}: {}", p.display(), row.line, row.reason);
            }
            anyhow::Ok(catalog)
        })
        .transpose()?;
    Ok(Loaded { graph, catalog })
}

impl ParamArgs {
    fn over(&self, mut params: RecommendParams) -> Result<RecommendParams> {
        if let Some(k) = self.k {
            params.k = Some(k);
        }
        if let Some(v) = self.variant {
            params.variant = v;
        }
        if let Some(s) = self.scope {
            params.scope = s;
        }
        if let Some(w) = &self.weights {
            params.weights = Some(w.clone());
        }
        params.validate()?;
        Ok(params)
    }

    fn params(&self) -> Result<RecommendParams> {
        self.over(RecommendParams::default())
    }
}

fn stats(args: &GraphArgs) -> Result<ExitCode> {
    let loaded = args.load()?;
    let g = &loaded.graph.graph;
    print!("{}", g.stats());
    for r in &loaded.graph.reports {
        println!(
            "file {} ({}): rows={} edges={} duplicates={} filtered={} rejected={}",
            r.path.display(),
            r.class_id,
            r.rows_read,
            r.edges_added,
            r.duplicates,
            r.filtered,
            r.rejected.len()
        );
    }
    let report = g.validation();
    for class in &report.empty_classes {
        println!("note: class {class} has no kernels");
    }
    if report.is_valid() {
        println!("valid");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &report.violations {
            println!("violation: {v}");
        }
        Ok(ExitCode::from(EXIT_INVALID_GRAPH))
    }
}

fn write_csv_to(
    vec: &sessrec_core::RecommendationVector,
    catalog: Option<&ObjectCatalog>,
    out: Option<&Path>,
) -> Result<()> {
    match out {
        Some(path) => export_vector(vec, catalog, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_vector(vec, catalog, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn recommend_cmd(args: &RecommendArgs) -> Result<ExitCode> {
    let params = args.params.params()?;
    let loaded = args.graph.load()?;
    let g = &loaded.graph.graph;
    let catalog = loaded.catalog.as_ref();

    if args.all_objects {
        let dir = args.out_dir.as_deref().expect("clap requires --out-dir");
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let exec = if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        let results = batch_recommend(g, g.objects(), &params, exec);
        for (seed, result) in g.objects().iter().zip(results) {
            let vec = result?;
            export_vector(&vec, catalog, &dir.join(format!("{}.csv", file_stem(seed.raw()))))?;
        }
        eprintln!("wrote {} vectors to {}", g.object_count(), dir.display());
        return Ok(ExitCode::SUCCESS);
    }

    let raw = args.object.as_deref().expect("clap requires --object");
    let vec = recommend(g, &NodeId::object(raw)?, &params)?;
    write_csv_to(&vec, catalog, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

/// Object ids are arbitrary strings; keep file names portable.
fn file_stem(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn pathway_cmd(args: &PathwayArgs) -> Result<ExitCode> {
    let defaults = RecommendParams::default().with_variant(Variant::Pathway);
    let params = args.params.over(defaults)?;
    let ids = split_list(&args.objects)
        .into_iter()
        .map(NodeId::object)
        .collect::<Result<Vec<_>, _>>()?;
    if ids.is_empty() {
        bail!("--objects must name at least one object");
    }
    let loaded = args.graph.load()?;
    let vec = recommend_pathway(&loaded.graph.graph, &ids, &params)?;
    write_csv_to(&vec, loaded.catalog.as_ref(), args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn simulate_cmd(args: &SimulateArgs) -> Result<ExitCode> {
    let params = args.params.params()?;
    let model: BuiltinUser = args.model.parse()?;
    let handles = split_list(&args.algorithms)
        .into_iter()
        .map(|name| builtin_handle(name, &params, args.baseline_k))
        .collect::<Result<Vec<RecommenderHandle>, _>>()?;
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let loaded = args.graph.load()?;
    let g = &loaded.graph.graph;

    let seeds: Vec<u64> = (0..args.runs).map(|i| args.seed.wrapping_add(i)).collect();
    let mut log = ActionLog::new();
    for run in simulate_many(g, &handles, &model, args.steps, &seeds, Execution::Parallel) {
        for record in run?.records() {
            log.push(record.clone());
        }
    }
    if let Some(out) = &args.out {
        log.save(out)?;
    }
    print_table(&log, params.k);
    Ok(ExitCode::SUCCESS)
}

fn print_table(log: &ActionLog, k: Option<usize>) {
    for (alg, eff) in efficiency_table(log, k) {
        println!("{alg}\t{eff}");
    }
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<ExitCode> {
    if args.k == Some(0) {
        bail!("--k must be at least 1");
    }
    let log = ActionLog::load(&args.log)?;
    match &args.algorithm {
        Some(alg) => println!("{}", efficiency(&log, alg, args.k)?),
        None => print_table(&log, args.k),
    }
    Ok(ExitCode::SUCCESS)
}

fn serve_cmd(args: ServeArgs) -> Result<ExitCode> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let mut defaults = RecommendParams::default();
    defaults.k = file.defaults.k;
    if let Some(v) = &file.defaults.variant {
        defaults.variant = v.parse()?;
    }
    if let Some(s) = &file.defaults.scope {
        defaults.scope = s.parse()?;
    }
    if let Some(w) = &file.defaults.weights {
        defaults.weights = Some(w.parse()?);
    }
    let defaults = args.params.over(defaults)?;

    let mut edges = file.edge_specs();
    edges.extend(args.graph.specs()?);
    let mut load_opts = args.graph.load_options()?;
    load_opts.strict |= file.strict.unwrap_or(false);

    let config = ServiceConfig {
        bind: args.bind.or(file.bind).unwrap_or(IpAddr::from([127, 0, 0, 1])),
        port: args.port.or(file.port).unwrap_or(8080),
        edges,
        catalog: args.graph.catalog.clone().or(file.catalog),
        load: load_opts,
        defaults,
    };
    config.validate()?;

    // Every input problem surfaces here, before anything binds.
    let loaded = load(&config.edges, &config.load, config.catalog.as_deref())?;
    if !loaded.graph.graph.is_valid() {
        for v in &loaded.graph.graph.validation().violations {
            eprintln!("warning: {v}");
        }
    }

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.addr())
            .await
            .with_context(|| format!("cannot bind {}", config.addr()))?;
        eprintln!("listening on {}", listener.local_addr()?);
        let state = AppState::ready(loaded.graph.graph, loaded.catalog, config.defaults);
        sessrec_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}
