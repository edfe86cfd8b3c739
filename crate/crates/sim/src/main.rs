use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use terra_core::baselines;
use terra_core::deployment::{self, DensityQuery};
use terra_core::sweep::{Trace, TRACE_VERSION};
use terra_core::terra::{transition_graph_dot, ProbePurpose};

use terra_sim::report::{self, ProbeReport};
use terra_sim::trace_io::{self, TraceHeader};
use terra_sim::{batch, csv_out, presets, ScenarioFile};

#[derive(Parser)]
#[command(
    name = "terra-sim",
    version,
    about = "Beam management simulator for mmWave mobiles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for several seeds and write traces plus a report.
    Simulate(SimulateArgs),
    /// Base-station density needed for multi-station visibility.
    Density(DensityArgs),
    /// Write a codebook or its beam patterns as CSV.
    Codebook(CodebookArgs),
    /// Recompute the report from saved traces.
    Analyze(AnalyzeArgs),
    /// Measurement overhead of TERRA against search baselines.
    Overhead(OverheadArgs),
    /// Sampled mobile trajectory as CSV.
    Trajectory(TrajectoryArgs),
    /// Protocol state graph in Graphviz DOT.
    Graph,
    /// List bundled scenarios, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file, or the name of a bundled scenario.
    scenario: String,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `sim.runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// First seed; run i uses seed-base + i. Defaults to `sim.seed`.
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long, env = "TERRA_SIM_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DensityArgs {
    /// Comma-separated ranges in metres.
    #[arg(long, default_value = "100,200,300,400,500", value_delimiter = ',')]
    range_list: Vec<f64>,
    #[arg(long, default_value_t = 0.9, value_parser = parse_probability)]
    target_prob: f64,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Densities per km², either comma-separated or start:stop:step.
    #[arg(long, default_value = "0:40:2")]
    grid: String,
    /// Add Monte Carlo columns with this many samples per grid point.
    #[arg(long)]
    monte_carlo: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CodebookArgs {
    scenario: String,
    /// Station index; the mobile codebook when omitted.
    #[arg(long)]
    station: Option<usize>,
    /// Write gain patterns on an azimuth cut with this step instead.
    #[arg(long)]
    pattern_step: Option<f64>,
    /// Elevation of the pattern cut, degrees.
    #[arg(long, default_value_t = 0.0)]
    zen: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverheadArgs {
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrajectoryArgs {
    scenario: String,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_probability(s: &str) -> std::result::Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} is not a probability in (0, 1)"))
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if let [a, b, c] = parts[..] {
        let (start, stop, step): (f64, f64, f64) = (a.parse()?, b.parse()?, c.parse()?);
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("grid {s:?}: need start <= stop and step > 0");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("grid value {x:?}"))
        })
        .collect()
}

fn load_scenario(arg: &str) -> Result<ScenarioFile> {
    let path = Path::new(arg);
    if path.exists() {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return ScenarioFile::parse(&text).with_context(|| format!("{}", path.display()));
    }
    if presets::text(arg).is_some() {
        return presets::load(arg);
    }
    bail!("{arg}: no such file or bundled scenario")
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut f =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let file = load_scenario(&args.scenario)?;
    let runs = args.runs.unwrap_or(file.sim.runs);
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let base = args.seed_base.unwrap_or(file.sim.seed);
    let seeds: Vec<u64> = (0..runs as u64).map(|i| base + i).collect();
    let jobs = args.jobs.unwrap_or_else(batch::default_jobs).max(1);
    let results = batch::run_seeds(&file, &seeds, jobs)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (floor, reference) = (file.floor(), file.reference_rss());
    for (i, r) in results.iter().enumerate() {
        let header = TraceHeader {
            trace: TRACE_VERSION.to_string(),
            scenario: file.name.clone(),
            seed: r.seed,
            horizon: r.summary.trace.horizon,
            slot: file.sim.slot,
            floor,
            reference_rss: reference,
        };
        let path = args.out.join(format!("run_{i:04}.jsonl"));
        let f = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        trace_io::write_trace(f, &header, &r.summary.trace)?;
    }
    let traces: Vec<&Trace> = results.iter().map(|r| &r.summary.trace).collect();
    let rep = report::batch_report(&file.name, &seeds, &traces, floor, reference);
    write_json(&args.out.join("report.json"), &rep)?;

    let mut probes = ProbeReport::default();
    for purpose in [
        ProbePurpose::Adapt,
        ProbePurpose::Refine,
        ProbePurpose::Grd,
        ProbePurpose::GrdFull,
        ProbePurpose::Revert,
        ProbePurpose::NeighborAdapt,
    ] {
        let m = results
            .iter()
            .map(|r| r.summary.max_probes(purpose))
            .max()
            .unwrap_or(0);
        probes.max_probes.insert(format!("{purpose:?}"), m);
    }
    probes.scans = results.iter().map(|r| r.summary.scans.len()).sum();
    write_json(&args.out.join("protocol.json"), &probes)?;

    let cdf = report::operating_cdf(&traces);
    csv_out::cdf(
        BufWriter::new(File::create(args.out.join("cdf.csv"))?),
        &cdf,
    )?;
    eprintln!("{runs} runs written to {}", args.out.display());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut headers = Vec::new();
    let mut traces = Vec::new();
    for p in &args.traces {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        let (h, t) =
            trace_io::read_trace(BufReader::new(f)).with_context(|| format!("{}", p.display()))?;
        headers.push(h);
        traces.push(t);
    }
    let first = &headers[0];
    if headers
        .iter()
        .any(|h| h.floor != first.floor || h.reference_rss != first.reference_rss)
    {
        bail!("traces were recorded with different analysis settings");
    }
    let seeds: Vec<u64> = headers.iter().map(|h| h.seed).collect();
    let refs: Vec<&Trace> = traces.iter().collect();
    let rep = report::batch_report(
        &first.scenario,
        &seeds,
        &refs,
        first.floor,
        first.reference_rss,
    );
    let mut w = output(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &rep)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn density(args: DensityArgs) -> Result<()> {
    let query = DensityQuery {
        range: args.range_list.first().copied().unwrap_or(100.0),
        target_prob: args.target_prob,
        k: args.k,
        lambda_grid: parse_grid(&args.grid)?,
    };
    let rows = deployment::density_table(&args.range_list, &query)?;
    let mc = args.monte_carlo.map(|n| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
        rows.iter()
            .map(|row| {
                row.curve
                    .iter()
                    .map(|&(l, _)| deployment::monte_carlo_prob(l, row.range, args.k, n, &mut rng))
                    .collect()
            })
            .collect::<Vec<Vec<_>>>()
    });
    csv_out::density(output(&args.out)?, &rows, mc.as_deref())
}

fn codebook(args: CodebookArgs) -> Result<()> {
    let file = load_scenario(&args.scenario)?;
    let spec = match args.station {
        None => &file.array.mobile,
        Some(i) => {
            let st = file
                .stations
                .get(i)
                .with_context(|| format!("station {i} does not exist"))?;
            st.codebook.as_ref().unwrap_or(&file.array.station)
        }
    };
    let cb = spec.build()?;
    match args.pattern_step {
        Some(step) if step > 0.0 => csv_out::pattern(output(&args.out)?, &cb, args.zen, step),
        Some(_) => bail!("--pattern-step must be positive"),
        None => csv_out::codebook(output(&args.out)?, &cb),
    }
}

fn overhead(args: OverheadArgs) -> Result<()> {
    let file = load_scenario(&args.scenario)?;
    let seed = args.seed.unwrap_or(file.sim.seed);
    let scenario = file.build(seed)?;
    let summary = terra_core::sweep::run(&scenario)?;
    let terra_max = summary.max_probes(ProbePurpose::Adapt);
    let cb = &scenario.mobile_codebook;
    let rows = baselines::tracking_overhead_report(cb, terra_max)?;
    csv_out::overhead(output(&args.out)?, &rows)
}

fn trajectory(args: TrajectoryArgs) -> Result<()> {
    let file = load_scenario(&args.scenario)?;
    if args.step.is_nan() || args.step <= 0.0 {
        bail!("--step must be positive");
    }
    csv_out::trajectory(
        output(&args.out)?,
        &file.mobility,
        file.sim.horizon,
        args.step,
    )
}

fn presets_cmd(name: Option<String>) -> Result<()> {
    let mut out = io::stdout().lock();
    match name {
        None => {
            for n in presets::names() {
                writeln!(out, "{n}")?;
            }
        }
        Some(n) => {
            let text =
                presets::text(&n).with_context(|| format!("no bundled scenario named {n:?}"))?;
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Density(a) => density(a),
        Command::Codebook(a) => codebook(a),
        Command::Analyze(a) => analyze(a),
        Command::Overhead(a) => overhead(a),
        Command::Trajectory(a) => trajectory(a),
        Command::Graph => {
            print!("{}", transition_graph_dot());
            Ok(())
        }
        Command::Presets { name } => presets_cmd(name),
    }
}
