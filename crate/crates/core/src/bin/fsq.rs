use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use fsq_core::cache::LandscapeCache;
use fsq_core::error::Error;
use fsq_core::io::{save_fuzzy, write_score_header, write_score_row, Encoding, FiberReader, FiberWriter};
use fsq_core::phantom::{self, PhantomSpec};
use fsq_core::query::{
    atom_landscape, evaluate_set, load_query_file, parse_query, resolve, Expr, QueryFile,
};
use fsq_core::scene::load_scene;

/// Fuzzy spatial queries over anatomical structures and fiber polylines.
#[derive(Parser)]
#[command(name = "fsq", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a query file and print its normalised form.
    Parse {
        query: PathBuf,
        /// Print the syntax tree as S-expressions instead.
        #[arg(long)]
        dump_ast: bool,
    },
    /// Compute one relation landscape and write it as a volume.
    Landscape(LandscapeArgs),
    /// Score fibers against a query and keep those above the threshold.
    Filter(FilterArgs),
    /// Write the synthetic phantom bundle.
    Phantom {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        positives: usize,
        #[arg(long, default_value_t = 30)]
        decoys: usize,
    },
}

#[derive(Args)]
struct CacheArgs {
    /// Landscape cache directory (falls back to FSQ_CACHE_DIR).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct LandscapeArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Reference structure; give it twice for `between`.
    #[arg(long = "structure", required = true)]
    structures: Vec<String>,
    #[arg(long)]
    relation: String,
    /// Cone half-angle in degrees.
    #[arg(long)]
    aperture: Option<f64>,
    /// Contour margin in mm.
    #[arg(long)]
    margin: Option<f64>,
    /// Closing radius in mm (crossing).
    #[arg(long)]
    radius: Option<f64>,
    /// Inner band distance in mm (near).
    #[arg(long)]
    inner: Option<f64>,
    /// Outer band distance in mm (near).
    #[arg(long)]
    outer: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Write a 32-bit float payload instead of ascii.
    #[arg(long)]
    binary: bool,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    fibers: PathBuf,
    /// Accepted fibers, as given in the input.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    cache: CacheArgs,
}

const CHUNK: usize = 2048;

enum Failure {
    Query(String),
    Other(String),
}

impl Failure {
    fn query(path: &Path, e: Error) -> Failure {
        match e {
            Error::Parse { .. } => Failure::Query(format!("{}:{e}", path.display())),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Other(format!("{}: {e}", path.display()))
}

fn open_cache(args: &CacheArgs) -> Result<Option<LandscapeCache>, Failure> {
    if args.no_cache {
        return Ok(None);
    }
    Ok(LandscapeCache::from_flag_or_env(args.cache_dir.as_deref())?)
}

fn run_parse(path: &Path, dump_ast: bool) -> Result<(), Failure> {
    let QueryFile { ast, .. } = load_query_file(path).map_err(|e| Failure::query(path, e))?;
    if dump_ast {
        println!("{}", ast.dump());
    } else {
        println!("# {} clauses", ast.clauses.len());
        println!("{ast}");
    }
    Ok(())
}

fn run_landscape(a: &LandscapeArgs) -> Result<(), Failure> {
    let scene = load_scene(&a.scene)?;
    let cache = open_cache(&a.cache)?;
    let mut text = format!("{}({}", a.relation, a.structures.join(", "));
    for (k, v) in [
        ("aperture", a.aperture),
        ("margin", a.margin),
        ("radius", a.radius),
        ("inner", a.inner),
        ("outer", a.outer),
    ] {
        if let Some(v) = v {
            text.push_str(&format!(", {k}={v}"));
        }
    }
    text.push(')');
    let ast = parse_query(&text).map_err(|e| Failure::Other(format!("{text}: {e}")))?;
    let Some(Expr::Atom(atom)) = ast.clauses.first() else {
        unreachable!("a single atom parses to one atom clause")
    };
    let v = atom_landscape(atom, &scene, cache.as_ref())?;
    let enc = if a.binary { Encoding::Binary } else { Encoding::Ascii };
    save_fuzzy(&v, &a.out, enc)?;
    match &cache {
        Some(c) if c.hits() > 0 => println!("cache hit: {}", a.out.display()),
        Some(_) => println!("computed (cached): {}", a.out.display()),
        None => println!("computed: {}", a.out.display()),
    }
    Ok(())
}

fn run_filter(a: &FilterArgs) -> Result<(), Failure> {
    let scene = load_scene(&a.scene)?;
    let qf = load_query_file(&a.query).map_err(|e| Failure::query(&a.query, e))?;
    let cache = open_cache(&a.cache)?;
    let mut q = resolve(&qf.ast, &qf.options, &scene, cache.as_ref())?;
    if let Some(t) = a.threshold {
        q = q.with_threshold(t)?;
    }
    if let Some(c) = &cache {
        info!("landscape cache: {} hit(s), {} miss(es)", c.hits(), c.misses());
    }

    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| io_failure(p, e));
    let mut kept = FiberWriter::new(create(&a.out)?).map_err(|e| io_failure(&a.out, e))?;
    let mut scores = create(&a.scores)?;
    write_score_header(&mut scores).map_err(|e| io_failure(&a.scores, e))?;

    let mut reader = FiberReader::open(&a.fibers)?;
    let (mut total, mut accepted) = (0usize, 0usize);
    loop {
        let chunk = reader.by_ref().take(CHUNK).collect::<Result<Vec<_>, _>>()?;
        if chunk.is_empty() {
            break;
        }
        let results = evaluate_set(&q, &chunk);
        for (f, r) in chunk.iter().zip(&results) {
            write_score_row(&mut scores, r).map_err(|e| io_failure(&a.scores, e))?;
            if r.accepted {
                kept.write(f).map_err(|e| io_failure(&a.out, e))?;
                accepted += 1;
            }
        }
        total += chunk.len();
    }
    kept.finish().map_err(|e| io_failure(&a.out, e))?;
    scores.flush().map_err(|e| io_failure(&a.scores, e))?;
    println!("accepted {accepted} of {total} fibers (threshold {})", q.options.threshold);
    Ok(())
}

fn run_phantom(seed: u64, out: &Path, positives: usize, decoys: usize) -> Result<(), Failure> {
    let spec = PhantomSpec {
        seed,
        positives,
        decoys,
        ..PhantomSpec::default()
    };
    let p = phantom::generate(&spec)?;
    p.write(out)?;
    println!("wrote {} fibers to {}", p.fibers.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Parse { query, dump_ast } => run_parse(query, *dump_ast),
        Command::Landscape(a) => run_landscape(a),
        Command::Filter(a) => match a.jobs {
            Some(0) => Err(Failure::Other("--jobs must be at least 1".into())),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Other(e.to_string()))
                .and_then(|pool| pool.install(|| run_filter(a))),
            None => run_filter(a),
        },
        Command::Phantom {
            seed,
            out,
            positives,
            decoys,
        } => run_phantom(*seed, out, *positives, *decoys),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Query(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
