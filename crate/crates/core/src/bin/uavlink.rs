use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use uavlink::cli::config::ConfigFile;
use uavlink::cli::matrix::{run_matrix, write_cell, RunMatrix};
use uavlink::cli::mission::{synth_trace, MissionArchetype, MissionKind};
use uavlink::cli::report::{self, SummaryRow, Table};
use uavlink::cli::scenario::ScenarioParams;
use uavlink::geo_mobility::{parse_trace, FlightTrace};
use uavlink::stack_sim::run;

#[derive(Parser)]
#[command(name = "uavlink", version, about = "UAV uplink simulator for mmWave and LTE links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic mission trace as lat/lon CSV.
    SynthTrace(SynthArgs),
    /// Simulate one scenario.
    Simulate(Box<SimulateArgs>),
    /// Run a grid of scenarios.
    Matrix(MatrixArgs),
    /// Print summary CSVs as a table, optionally merging them.
    Report(ReportArgs),
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long, default_value = "overwatch-orbit")]
    mission: MissionKind,
    #[arg(long)]
    area_m2: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    altitude: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
}

impl ShapeArgs {
    fn archetype(&self) -> MissionArchetype {
        let mut a = MissionArchetype::new(self.mission);
        a.area_m2 = self.area_m2.unwrap_or(a.area_m2);
        a.speed = self.speed.unwrap_or(a.speed);
        a.altitude = self.altitude.unwrap_or(a.altitude);
        a.duration = self.duration.unwrap_or(a.duration);
        a
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config section to apply on top of the global entries.
    #[arg(long)]
    scenario: Option<String>,
    /// Lat/lon trace CSV. A synthetic mission is used when omitted.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    antennas: Option<String>,
    #[arg(long)]
    rate_mbps: Option<String>,
    #[arg(long)]
    bs: Option<String>,
    #[arg(long)]
    window_s: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory for logs and the summary.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write one CSV row per packet.
    #[arg(long)]
    packets: bool,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window_s: Option<String>,
    /// Worker threads; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    packets: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Summary CSVs written by `simulate` or `matrix`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Write the merged rows here as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let trace = synth_trace(&args.shape.archetype(), args.seed)?;
    match args.out {
        Some(path) => {
            trace.write_csv(BufWriter::new(File::create(&path).with_context(|| path.display().to_string())?))?
        }
        None => trace.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn load_trace(path: &Path) -> anyhow::Result<FlightTrace> {
    let file = File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    parse_trace(io::BufReader::new(file)).with_context(|| format!("parsing trace {}", path.display()))
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut params = ScenarioParams::default();
    let mut trace_path = None;
    let mut shape = args.shape.archetype();
    if let Some(path) = &args.config {
        let cfg = ConfigFile::load(path).with_context(|| format!("reading config {}", path.display()))?;
        for e in cfg.resolved(args.scenario.as_deref())? {
            let ctx = || format!("{}:{}", path.display(), e.line);
            match e.key.as_str() {
                "trace" => trace_path = Some(PathBuf::from(&e.value)),
                "mission" => shape.kind = e.value.parse().with_context(ctx)?,
                key => {
                    if !params.set(key, &e.value).with_context(ctx)? {
                        bail!("{}: unknown key {key:?}", ctx());
                    }
                }
            }
        }
    } else if args.scenario.is_some() {
        bail!("--scenario needs --config");
    }
    let flags = [
        ("profile", &args.profile),
        ("antennas", &args.antennas),
        ("rate_mbps", &args.rate_mbps),
        ("bs", &args.bs),
        ("window_s", &args.window_s),
        ("seed", &args.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            params.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    let trace_path = args.trace.or(trace_path);
    let (label, trace) = match &trace_path {
        Some(path) => {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (name, load_trace(path)?)
        }
        None => (shape.kind.name().to_string(), synth_trace(&shape, params.seed)?),
    };
    let log = run(&params.build(trace)?)?;
    write_cell(&args.out, &log, args.packets)?;
    let row = SummaryRow::new(
        label,
        params.rat,
        params.effective_antennas(),
        params.rate_mbps,
        params.placement,
        &log.summary,
    );
    let rows = [row];
    report::write_csv(&rows, BufWriter::new(File::create(args.out.join("summary.csv"))?))?;
    print!("{}", Table(&rows));
    Ok(())
}

fn matrix(args: MatrixArgs) -> anyhow::Result<()> {
    let mut m = match &args.config {
        Some(path) => {
            let cfg = ConfigFile::load(path).with_context(|| format!("reading config {}", path.display()))?;
            RunMatrix::from_config(&cfg).with_context(|| path.display().to_string())?
        }
        None => RunMatrix::default(),
    };
    if let Some(w) = &args.window_s {
        m.base.set("window_s", w).context("--window-s")?;
    }
    m.packet_logs |= args.packets;
    let outcome = run_matrix(&m, &args.out, args.jobs)?;
    print!("{}", Table(&outcome.rows));
    for f in &outcome.failures {
        eprintln!("cell {} failed: {}", f.cell, f.error);
    }
    if !outcome.failures.is_empty() {
        bail!("{} of {} cells failed", outcome.failures.len(), outcome.failures.len() + outcome.rows.len());
    }
    Ok(())
}

fn report_cmd(args: ReportArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for path in &args.inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        rows.extend(report::read_csv(file).with_context(|| path.display().to_string())?);
    }
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        report::write_csv(&rows, BufWriter::new(File::create(out)?))?;
    }
    let mut stdout = io::stdout().lock();
    write!(stdout, "{}", Table(&rows))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::SynthTrace(a) => synth(a),
        Command::Simulate(a) => simulate(*a),
        Command::Matrix(a) => matrix(a),
        Command::Report(a) => report_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
