use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pathjoin::bench::{self, BenchRow};
use pathjoin::gen::{self, GraphParams, HierarchyParams, Instance, QueryParams};
use pathjoin::oracle::Oracle;
use pathjoin::query::{Query, StarScope};
use pathjoin::store::Store;
use pathjoin::{Engine, EngineConfig, Prepared, TransportKind};

#[derive(Parser)]
#[command(name = "pathjoin", version, about = "Distributed in-memory SPARQL engine with property paths")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Store directory.
    #[arg(long, global = true, env = "PATHJOIN_DATA", default_value = "pathjoin-data")]
    data: PathBuf,
    /// Number of worker partitions.
    #[arg(long, global = true)]
    slaves: Option<usize>,
    /// Vertex-to-partition map, `term<TAB>partition` per line.
    #[arg(long, global = true)]
    partition_file: Option<PathBuf>,
    /// Skip malformed input lines instead of aborting.
    #[arg(long, global = true)]
    lenient: bool,
    /// Sampled pairs per property for reachability selectivity.
    #[arg(long, global = true)]
    sample_size: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Zero-length `*` and `?` matches over all data vertices (vd) or the
    /// property's vertices (vp).
    #[arg(long, global = true, value_enum, default_value_t = Scope::Vd)]
    star_scope: Scope,
    /// Weight of shipped tuples in plan cost.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// inproc, socket or chaos[:seed].
    #[arg(long, global = true, default_value = "inproc")]
    transport: String,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum Scope {
    Vd,
    Vp,
}

#[derive(Args)]
struct QueryInput {
    /// Query text; use --file to read it from a file.
    query: Option<String>,
    #[arg(short, long)]
    file: Option<PathBuf>,
}

impl QueryInput {
    fn text(&self) -> Result<String> {
        match (&self.query, &self.file) {
            (Some(q), None) => Ok(q.clone()),
            (None, Some(f)) => fs::read_to_string(f).with_context(|| format!("reading {}", f.display())),
            (Some(_), Some(_)) => bail!("give either a query or --file, not both"),
            (None, None) => bail!("no query given"),
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Shape {
    Random,
    Hierarchy,
    Chain,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an N-Triples file, build all indexes and write the store.
    Load { input: PathBuf },
    /// Run a query and print the decoded rows.
    Query {
        #[command(flatten)]
        input: QueryInput,
        /// Print per-operator message counts and exchange rounds.
        #[arg(long)]
        audit: bool,
        /// Print the plan without running it.
        #[arg(long)]
        explain_only: bool,
    },
    /// Print the physical plan of a query.
    Explain {
        #[command(flatten)]
        input: QueryInput,
        /// Emit Graphviz DOT instead of text.
        #[arg(long)]
        dot: bool,
    },
    /// Print store statistics.
    Stats,
    /// Strong and weak scaling runs on generated hierarchy data.
    Bench {
        /// Worker counts for strong scaling.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        k_list: Vec<usize>,
        /// `scale:k` pairs for weak scaling.
        #[arg(long, value_delimiter = ',', default_value = "0.2:1,0.6:3,1.0:5")]
        weak: Vec<String>,
        /// Size of the full dataset.
        #[arg(long, default_value_t = 200_000)]
        triples: usize,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a query on the engine and on the reference evaluator and diff.
    OracleCheck {
        #[command(flatten)]
        input: QueryInput,
        #[arg(long, default_value_t = 1_000_000)]
        row_limit: usize,
    },
    /// Write a generated dataset, a query and its reference answers.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Shape::Random)]
        shape: Shape,
        #[arg(long, default_value_t = 200)]
        vertices: usize,
        #[arg(long, default_value_t = 4)]
        properties: usize,
        #[arg(long, default_value_t = 800)]
        edges: usize,
        /// Universities for the hierarchy shape.
        #[arg(long, default_value_t = 4)]
        universities: usize,
    },
}

impl GlobalOpts {
    fn config(&self) -> Result<EngineConfig> {
        let mut c = EngineConfig::default();
        if let Some(k) = self.slaves {
            c.slaves = k;
        }
        c.partition_file = self.partition_file.clone();
        c.strict = !self.lenient;
        if let Some(n) = self.sample_size {
            c.sample_size = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.star_scope = match self.star_scope {
            Scope::Vd => StarScope::DataVertices,
            Scope::Vp => StarScope::PropertyVertices,
        };
        if let Some(g) = self.gamma {
            c.gamma = g;
        }
        c.transport = self.transport.parse::<TransportKind>()?;
        c.validate()?;
        Ok(c)
    }

    fn open(&self) -> Result<Engine> {
        let store = Store::open(&self.data).with_context(|| format!("opening store {}", self.data.display()))?;
        if let Some(k) = self.slaves {
            if k != store.k() {
                bail!("store {} has {} partitions, not {k}; reload it to change the worker count", self.data.display(), store.k());
            }
        }
        Ok(Engine::new(store, self.config()?)?)
    }
}

fn prepare(engine: &Engine, text: &str) -> Result<Prepared> {
    let query = engine.parse(text).context("parse")?;
    engine.plan(query).context("plan")
}

fn print_rows(out: &mut impl Write, vars: &[String], rows: &[Vec<String>]) -> io::Result<()> {
    writeln!(out, "{}", vars.join("\t"))?;
    for r in rows {
        writeln!(out, "{}", r.join("\t"))?;
    }
    Ok(())
}

fn load(opts: &GlobalOpts, input: &Path) -> Result<()> {
    let config = opts.config()?;
    let file = File::open(input).with_context(|| format!("load: opening {}", input.display()))?;
    let (engine, report) = Engine::load(BufReader::new(file), config).context("load")?;
    for e in &report.skipped {
        log::warn!("skipped: {e}");
    }
    engine.store().save(&opts.data).with_context(|| format!("writing store {}", opts.data.display()))?;
    let store = engine.store();
    let m = store.manifest();
    let mut out = io::stdout().lock();
    writeln!(out, "parsed lines      {}", report.parsed)?;
    writeln!(out, "skipped lines     {}", report.skipped.len())?;
    writeln!(out, "distinct triples  {}", m.triples)?;
    writeln!(out, "distinct terms    {}", m.terms)?;
    writeln!(out, "properties        {}", store.catalog.meta.properties.len())?;
    writeln!(out, "partitions        {} ({})", m.k, m.partitioning)?;
    writeln!(out, "part  subject-triples  object-triples  in-boundary  out-boundary  components")?;
    for s in store.summary() {
        writeln!(
            out,
            "{:>4}  {:>15}  {:>14}  {:>11}  {:>12}  {:>10}",
            s.partition, s.subject_triples, s.object_triples, s.in_boundaries, s.out_boundaries, s.compound_components
        )?;
    }
    writeln!(out, "store written to {}", opts.data.display())?;
    Ok(())
}

fn query(opts: &GlobalOpts, input: &QueryInput, audit: bool, explain_only: bool) -> Result<()> {
    let engine = opts.open()?;
    let prepared = prepare(&engine, &input.text()?)?;
    let mut out = io::stdout().lock();
    if explain_only {
        write!(out, "{}", prepared.explain())?;
        return Ok(());
    }
    let result = engine.execute(&prepared).context("execute")?;
    let rows = engine.decode_rows(&result.rows).context("decode")?;
    print_rows(&mut out, &result.vars, &rows)?;
    eprintln!("{} rows in {:.6} s", rows.len(), result.elapsed.as_secs_f64());
    if audit {
        let a = &result.audit;
        writeln!(out, "# messages {}", a.total_messages())?;
        for r in &a.reach {
            writeln!(
                out,
                "# reach node=#{} cond={} frontier-rounds={} frontier-batches={}",
                r.node,
                r.cond,
                a.rounds(r),
                r.frontier_batches
            )?;
        }
        for n in prepared.plan.nodes() {
            for (channel, rounds) in a.reshard_rounds(n.id) {
                writeln!(out, "# reshard node=#{} channel={channel} rounds={rounds}", n.id)?;
            }
        }
    }
    Ok(())
}

fn explain(opts: &GlobalOpts, input: &QueryInput, dot: bool) -> Result<()> {
    let engine = opts.open()?;
    let prepared = prepare(&engine, &input.text()?)?;
    print!("{}", if dot { prepared.to_dot() } else { prepared.explain() });
    Ok(())
}

fn stats(opts: &GlobalOpts) -> Result<()> {
    let engine = opts.open()?;
    let store = engine.store();
    let c = &store.catalog;
    let mut out = io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(&store.manifest())?)?;
    writeln!(out, "vertices {}", c.meta.vertex_count)?;
    writeln!(out, "property\tedges\tvertices\treach-selectivity")?;
    for &p in &c.meta.properties {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}",
            store.dict.decode(p)?,
            c.meta.ep(p),
            c.meta.vp(p),
            c.reach_selectivity(p)
        )?;
    }
    Ok(())
}

fn parse_weak(steps: &[String]) -> Result<Vec<(f64, usize)>> {
    steps
        .iter()
        .map(|s| {
            let (scale, k) = s.split_once(':').with_context(|| format!("weak step {s:?} is not scale:k"))?;
            Ok((scale.parse().with_context(|| format!("bad scale in {s:?}"))?, k.parse().with_context(|| format!("bad k in {s:?}"))?))
        })
        .collect()
}

fn write_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["mode", "k", "scale", "triples", "query", "median_seconds", "rows", "messages"])?;
    for r in rows {
        let head = [r.mode.to_string(), r.k.to_string(), r.scale.to_string(), r.triples.to_string()];
        for t in &r.timings {
            let tail = [t.query.clone(), format!("{:.6}", t.seconds), t.rows.to_string(), t.messages.to_string()];
            w.write_record(head.iter().chain(&tail))?;
        }
        let tail = ["geo-mean".to_string(), format!("{:.6}", r.geo_mean()), String::new(), String::new()];
        w.write_record(head.iter().chain(&tail))?;
    }
    w.flush()?;
    Ok(())
}

fn bench_cmd(opts: &GlobalOpts, ks: &[usize], weak: &[String], triples: usize, runs: usize, csv: Option<&Path>) -> Result<()> {
    let config = opts.config()?;
    let queries = bench::hierarchy_queries();
    let shape = HierarchyParams::default();
    let inst = gen::hierarchy(shape.with_size(triples), config.seed);
    let mut rows = bench::strong_scaling(&inst, ks, &queries, runs, &config).context("strong scaling")?;
    print!("{}", bench::render_table(&rows));
    let weak_rows = bench::weak_scaling(shape, triples, &parse_weak(weak)?, &queries, runs, &config).context("weak scaling")?;
    println!();
    print!("{}", bench::render_table(&weak_rows));
    for r in &rows[1..] {
        let base: Vec<usize> = rows[0].timings.iter().map(|t| t.rows).collect();
        let got: Vec<usize> = r.timings.iter().map(|t| t.rows).collect();
        if base != got {
            bail!("result sizes differ between k={} and k={}: {base:?} vs {got:?}", rows[0].k, r.k);
        }
    }
    rows.extend(weak_rows);
    if let Some(path) = csv {
        write_csv(path, &rows)?;
    }
    Ok(())
}

fn diff(engine: &Engine, label: &str, rows: &[Vec<pathjoin::rdf::TermId>]) -> Result<Vec<Vec<String>>> {
    engine.decode_rows(rows).with_context(|| format!("decoding {label} rows"))
}

fn oracle_check(opts: &GlobalOpts, input: &QueryInput, row_limit: usize) -> Result<bool> {
    let engine = opts.open()?;
    let text = input.text()?;
    let prepared = prepare(&engine, &text)?;
    let got = engine.execute(&prepared).context("execute")?;
    let triples = engine.store().triples();
    let oracle = Oracle::new(&triples, engine.config().star_scope, row_limit);
    let expect = oracle.evaluate(&prepared.query, |t| engine.store().dict.lookup(t)).context("reference evaluation")?;
    if got.rows == expect {
        println!("match: {} rows", expect.len());
        return Ok(true);
    }
    let missing: Vec<_> = expect.iter().filter(|r| got.rows.binary_search(r).is_err()).cloned().collect();
    let extra: Vec<_> = got.rows.iter().filter(|r| expect.binary_search(r).is_err()).cloned().collect();
    println!("MISMATCH: engine {} rows, reference {} rows", got.rows.len(), expect.len());
    for r in diff(&engine, "missing", &missing)? {
        println!("- {}", r.join("\t"));
    }
    for r in diff(&engine, "extra", &extra)? {
        println!("+ {}", r.join("\t"));
    }
    Ok(false)
}

fn gen_cmd(opts: &GlobalOpts, out: &Path, shape: Shape, graph: GraphParams, universities: usize) -> Result<()> {
    let seed = opts.seed.unwrap_or(pathjoin::stats::DEFAULT_SEED);
    let (inst, text): (Instance, String) = match shape {
        Shape::Random => gen::random_case(seed, graph, QueryParams::default()),
        Shape::Hierarchy => {
            (gen::hierarchy(HierarchyParams { universities, ..HierarchyParams::default() }, seed), gen::hierarchy_pair_query())
        }
        Shape::Chain => (gen::chain(graph.vertices), format!("SELECT ?y WHERE {{ <{0}c0> <{0}next>+ ?y }}\n", gen::EX)),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(File::create(out.join("data.nt"))?);
    inst.write_ntriples(&mut w)?;
    w.flush()?;
    fs::write(out.join("query.rq"), &text)?;
    let query = Query::parse(&text).context("parse")?;
    let scope = opts.config()?.star_scope;
    let rows = Oracle::new(&inst.triples, scope, 5_000_000)
        .evaluate(&query, |t| inst.dict.lookup(t))
        .context("reference evaluation")?;
    let mut decoded: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|&id| inst.dict.decode(id).map(|t| t.to_string())).collect())
        .collect::<pathjoin::Result<_>>()?;
    decoded.sort();
    let vars: Vec<String> = query.projection.iter().map(|v| v.to_string()).collect();
    let mut w = BufWriter::new(File::create(out.join("answers.tsv"))?);
    print_rows(&mut w, &vars, &decoded)?;
    w.flush()?;
    println!("{} triples, {} answers written to {}", inst.triples.len(), decoded.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let o = &cli.opts;
    match &cli.command {
        Command::Load { input } => load(o, input)?,
        Command::Query { input, audit, explain_only } => query(o, input, *audit, *explain_only)?,
        Command::Explain { input, dot } => explain(o, input, *dot)?,
        Command::Stats => stats(o)?,
        Command::Bench { k_list, weak, triples, runs, csv } => bench_cmd(o, k_list, weak, *triples, *runs, csv.as_deref())?,
        Command::OracleCheck { input, row_limit } => return oracle_check(o, input, *row_limit),
        Command::Gen { out, shape, vertices, properties, edges, universities } => {
            let graph = GraphParams { vertices: *vertices, properties: *properties, triples: *edges };
            gen_cmd(o, out, *shape, graph, *universities)?
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.opts.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
