use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use trickleswap::experiments::{
    format_size, parse_size, predict, run_single, sweep, write_results, LeechPosition, Mode,
    ScenarioConfig, SweepGrid, SweepSummary,
};
use trickleswap::simnet::{run_simulation, Topology, DEFAULT_MAX_TIME_MS};
use trickleswap::{Millis, SpreadingStrategy};

#[derive(Parser)]
#[command(
    name = "trickleswap",
    version,
    about = "Bitswap forwarding and trickling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write runs.csv, summary.csv and config.json.
    Run(RunArgs),
    /// Run a parameter grid (defaults to the full reference grid).
    Sweep(SweepArgs),
    /// Inspect or export the reference topology.
    Topo(TopoArgs),
    /// Simulate a single fetch and dump its message trace as JSON lines.
    Trace(TraceArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Protocol mode: forwarding or baseline (stock Bitswap).
    #[arg(long, default_value = "forwarding")]
    mode: Mode,
    /// Leech position: center (n5) or edge (n0).
    #[arg(long, default_value = "center")]
    leech: LeechPosition,
    /// One-way link latency in milliseconds.
    #[arg(long, default_value_t = 100)]
    latency: Millis,
    /// Trickle delay between rounds in milliseconds [default: 100, or 0 in baseline mode].
    #[arg(long)]
    trickle_delay: Option<Millis>,
    /// Peers per trickle round.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Use diffusion spreading with this mean delay in milliseconds instead of trickling.
    #[arg(long, conflicts_with = "trickle_delay")]
    diffusion_mean: Option<f64>,
    /// Number of eavesdroppers attached to every honest node.
    #[arg(long, default_value_t = 1)]
    eavesdroppers: usize,
    /// File size with optional unit (B, KiB, MiB).
    #[arg(long, default_value = "150KiB", value_parser = parse_size)]
    file_size: usize,
    /// Base seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Provider lookup cost in round trips (baseline only).
    #[arg(long, default_value_t = 1)]
    dht_lookup_rtts: u32,
    /// Block size with optional unit.
    #[arg(long, default_value = "256KiB", value_parser = parse_size)]
    block_size: usize,
    /// Simulated time limit per run in milliseconds.
    #[arg(long, default_value_t = DEFAULT_MAX_TIME_MS)]
    max_time: Millis,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Number of runs.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Output directory.
    #[arg(long, env = "TRICKLESWAP_OUT_DIR", default_value = "results")]
    out: PathBuf,
    /// Maximum concurrent runs [default: available parallelism].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Link latencies in milliseconds.
    #[arg(long, value_delimiter = ',', default_value = "50,100,150")]
    latencies: Vec<Millis>,
    /// Trickle delays in milliseconds.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,50,100,150,200,250,300"
    )]
    delays: Vec<Millis>,
    /// Eavesdropper counts.
    #[arg(long, value_delimiter = ',', default_value = "1,4,7")]
    eavesdroppers: Vec<usize>,
    /// File sizes with optional unit.
    #[arg(long, value_delimiter = ',', default_value = "512B,150KiB,1MiB", value_parser = parse_size)]
    file_sizes: Vec<usize>,
    /// Leech positions.
    #[arg(long, value_delimiter = ',', default_value = "center,edge")]
    leeches: Vec<LeechPosition>,
    /// Repetitions of every cell.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    repetitions: u64,
    /// Runs per repetition [default: 50, 40 or 30 for up to 1, 4 or more eavesdroppers].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
    /// Peers per trickle round.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    batch: u64,
    /// Skip the stock Bitswap cells.
    #[arg(long)]
    no_baseline: bool,
    /// Provider lookup cost in round trips for baseline cells.
    #[arg(long, default_value_t = 1)]
    dht_lookup_rtts: u32,
    /// Base seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "TRICKLESWAP_OUT_DIR", default_value = "results")]
    out: PathBuf,
    /// Maximum concurrent runs [default: available parallelism].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: Option<u64>,
}

#[derive(Args)]
struct TopoArgs {
    /// Validate the topology and print its node and edge counts.
    #[arg(long)]
    check: bool,
    /// Write the edge list ("a b latency" per line) to a file, or - for stdout.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Eavesdroppers to attach before checking or exporting.
    #[arg(long, default_value_t = 0)]
    eavesdroppers: usize,
    /// Link latency in milliseconds.
    #[arg(long, default_value_t = 100)]
    latency: Millis,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Run index within the scenario, selecting the derived run seed.
    #[arg(long, default_value_t = 0)]
    run_id: u64,
    /// Output file, or - for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn usage_error(subcommand: &str, msg: impl std::fmt::Display) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = cmd
        .find_subcommand_mut(subcommand)
        .map(|c| c.clone().bin_name(format!("trickleswap {subcommand}")));
    sub.unwrap_or(cmd)
        .error(ErrorKind::ArgumentConflict, msg)
        .exit()
}

impl ScenarioArgs {
    fn into_config(self, runs: usize, subcommand: &str) -> ScenarioConfig {
        let strategy = match self.mode {
            Mode::Baseline => {
                if self.trickle_delay.is_some_and(|d| d > 0) {
                    usage_error(
                        subcommand,
                        "--trickle-delay > 0 has no effect with --mode baseline",
                    );
                }
                if self.diffusion_mean.is_some() {
                    usage_error(
                        subcommand,
                        "--diffusion-mean cannot be combined with --mode baseline",
                    );
                }
                SpreadingStrategy::Immediate
            }
            Mode::Forwarding => match self.diffusion_mean {
                Some(mean_delay_ms) => SpreadingStrategy::Diffusion { mean_delay_ms },
                None => SpreadingStrategy::Trickle {
                    delay_ms: self.trickle_delay.unwrap_or(100),
                    batch: self.batch,
                },
            },
        };
        let cfg = ScenarioConfig {
            mode: self.mode,
            leech: self.leech,
            latency_ms: self.latency,
            strategy,
            eavesdroppers: self.eavesdroppers,
            file_size: self.file_size,
            runs,
            seed: self.seed,
            dht_lookup_rtts: self.dht_lookup_rtts,
            block_size: self.block_size,
            max_time_ms: self.max_time,
        };
        if let Err(e) = cfg.validate() {
            usage_error(subcommand, e);
        }
        cfg
    }
}

fn with_pool<T: Send>(parallel: Option<u64>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = parallel {
        builder = builder.num_threads(n as usize);
    }
    let pool = builder.build().context("starting worker pool")?;
    Ok(pool.install(f))
}

fn print_summary(summary: &SweepSummary) {
    for s in &summary.summaries {
        let k = &s.key;
        let ttf = s
            .mean_ttf_ms
            .map(|m| format!("{m:.1} ms"))
            .unwrap_or_else(|| "n/a".into());
        let acc = s
            .accuracy
            .map(|a| format!("{a:.3}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "{} {} latency={}ms delay={}ms eavesdroppers={} file={} runs={} failed={} mean_ttf={} accuracy={}",
            k.mode,
            k.leech,
            k.latency_ms,
            k.trickle_delay_ms,
            k.eavesdroppers,
            format_size(k.file_size),
            s.runs,
            s.failures,
            ttf,
            acc
        );
    }
}

fn finish(summary: &SweepSummary, out: &std::path::Path) -> anyhow::Result<()> {
    print_summary(summary);
    write_results(summary, out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = args.scenario.into_config(args.runs as usize, "run");
    let summary = with_pool(args.parallel, || run_single(&cfg))??;
    finish(&summary, &args.out)
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let grid = SweepGrid {
        latencies: args.latencies,
        delays: args.delays,
        eavesdroppers: args.eavesdroppers,
        file_sizes: args.file_sizes,
        leeches: args.leeches,
        repetitions: args.repetitions as usize,
        runs: args.runs.map(|r| r as usize),
        batch: args.batch as usize,
        include_baseline: !args.no_baseline,
        dht_lookup_rtts: args.dht_lookup_rtts,
        ..SweepGrid::reference()
    };
    if let Err(e) = grid.validate() {
        usage_error("sweep", e);
    }
    let seed = args.seed;
    let summary = with_pool(args.parallel, || sweep(&grid, seed))??;
    finish(&summary, &args.out)
}

fn open_output(path: &PathBuf) -> anyhow::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdout().lock()));
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn cmd_topo(args: TopoArgs) -> anyhow::Result<()> {
    let topo = Topology::reference()
        .with_latency(args.latency)
        .attach_eavesdroppers(args.eavesdroppers);
    if args.check || args.export.is_none() {
        topo.validate()?;
        println!("{} nodes / {} edges", topo.node_count(), topo.edge_count());
    }
    if let Some(path) = &args.export {
        let mut out = open_output(path)?;
        out.write_all(topo.to_edge_list().as_bytes())?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> anyhow::Result<()> {
    let cfg = args.scenario.into_config(1, "trace");
    let sim = cfg.sim_config(args.run_id);
    let trace = run_simulation(
        &cfg.topology(),
        &sim,
        &cfg.run_file(args.run_id),
        cfg.leech_id(),
    )?;
    let mut out = open_output(&args.out)?;
    trace
        .write_jsonl(&mut out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    out.flush()?;
    let estimate = predict(&trace, sim.seed);
    eprintln!(
        "ttf={} events={} predicted={}",
        trace
            .ttf()
            .map(|t| format!("{t}ms"))
            .unwrap_or_else(|| "failed".into()),
        trace.events.len(),
        estimate
            .peer()
            .map(|p| trace.name(p).to_string())
            .unwrap_or_else(|| "abstain".into())
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Topo(a) => cmd_topo(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
