use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use meshmsf::experiment::{self, ExperimentConfig, Verdict};
use meshmsf::graph::{gen, Graph};
use meshmsf::MeshError;

#[derive(Parser)]
#[command(name = "meshmsf", version, about = "Spanning forests on a simulated mesh-connected computer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    RandomGnm,
    Grid,
    Tree,
    DisjointUnion,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated graph in edge-list format.
    Gen {
        #[arg(value_enum)]
        kind: Kind,
        /// Vertex count (per part for disjoint-union; rounded down to a square for grid).
        #[arg(long, default_value_t = 64)]
        vertices: usize,
        /// Edge count for random-gnm and disjoint-union parts.
        #[arg(long, default_value_t = 128)]
        edges: usize,
        /// Number of random-gnm parts for disjoint-union.
        #[arg(long, default_value_t = 2)]
        parts: usize,
        /// Weights are drawn from [0, max-weight).
        #[arg(long, default_value_t = 1 << 20)]
        max_weight: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline on a graph file and print a report.
    Run {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Switch::On)]
        verify: Switch,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Measure total steps over a range of mesh sides.
    Bench {
        /// Comma-separated ascending powers of two.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        bench_sides: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Print per-primitive step costs for the sides instead.
        #[arg(long)]
        primitives: bool,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    side: Option<usize>,
    #[arg(long, default_value_t = 6)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn config(&self, verify: bool) -> ExperimentConfig {
        ExperimentConfig { side: self.side, rounds: self.rounds, seed: self.seed, verify, ..ExperimentConfig::default() }
    }
}

fn init_logging() {
    let level = match std::env::var("MESHMSF_LOG").as_deref() {
        Ok("phase") => log::LevelFilter::Info,
        Ok("step") => log::LevelFilter::Trace,
        _ => log::LevelFilter::Off,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn exit_code(e: &MeshError) -> u8 {
    match e {
        MeshError::Parse { .. } | MeshError::Config(_) | MeshError::OutOfRange { .. } => 2,
        _ => 3,
    }
}

fn generate(kind: Kind, vertices: usize, edges: usize, parts: usize, max_w: u64, seed: u64) -> Graph {
    let mut rng = gen::rng(seed);
    match kind {
        Kind::RandomGnm => gen::random_gnm(vertices, edges, max_w, &mut rng),
        Kind::Grid => {
            let s = (vertices as f64).sqrt() as usize;
            gen::grid(s, s, max_w, &mut rng)
        }
        Kind::Tree => gen::tree(vertices, max_w, &mut rng),
        Kind::DisjointUnion => {
            let mut g = Graph::new(0);
            for _ in 0..parts {
                g = g.disjoint_union(&gen::random_gnm(vertices, edges, max_w, &mut rng));
            }
            gen::relabel(&mut g, &mut rng);
            g
        }
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(cmd: Cmd) -> Result<u8, MeshError> {
    match cmd {
        Cmd::Gen { kind, vertices, edges, parts, max_weight, seed, out } => {
            let text = generate(kind, vertices, edges, parts, max_weight, seed).to_string();
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| MeshError::Config(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Cmd::Run { graph, common, verify, format } => {
            if format == Format::Csv {
                return Err(MeshError::Config("run reports are JSON only".into()));
            }
            let text = std::fs::read_to_string(&graph)
                .map_err(|e| MeshError::Parse { line: 0, msg: format!("{}: {e}", graph.display()) })?;
            let g: Graph = text.parse()?;
            let report = experiment::run(&g, &common.config(verify == Switch::On))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(if report.verdict == Verdict::Fail { 1 } else { 0 })
        }
        Cmd::Bench { bench_sides, trials, common, format, primitives } => {
            if primitives {
                print!("{}", experiment::primitive_costs(&bench_sides));
                return Ok(0);
            }
            let report = experiment::bench(&bench_sides, trials, &common.config(true))?;
            match format {
                Format::Csv => print!("{}", report.to_csv()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
            }
            Ok(0)
        }
    }
}
