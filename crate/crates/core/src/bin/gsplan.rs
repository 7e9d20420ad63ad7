use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gsplan::config::{load_config, parse_emit, ConfigError, RunConfig};
use gsplan::geogrid::ascii::{write_grid, write_mask};
use gsplan::geogrid::GridSpec;
use gsplan::output::{write_artifacts, write_stats_csv};
use gsplan::planner::{
    build_named_layer, inputs_for_layer, load_inputs, run_plan, InputKind, NamedLayer, PlanError, PlanOutcome,
};
use gsplan::synthetic::write_case_study;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

/// Gateway site planning for NGSO satellite constellations.
#[derive(Parser)]
#[command(name = "gsplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full plan and write the requested artifacts.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output.directory` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Artifacts: report, csv, geojson, masks, grids. Repeatable or comma separated.
        #[arg(long)]
        emit: Vec<String>,
    },
    /// Write a single layer as an ESRI ASCII grid.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        layer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the single, pairwise and all-criteria selection fractions.
    Stats {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic input rasters and a matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Grid step in degrees.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 2023)]
        seed: u64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::new(EXIT_CONFIG, e)
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let code = match &e {
            PlanError::Input { .. } | PlanError::Layer { .. } | PlanError::EmptyData(_) => EXIT_DATA,
            PlanError::UnknownLayer { .. } => EXIT_CONFIG,
            PlanError::DuplicateLayer(_) | PlanError::Grid(_) => EXIT_INTERNAL,
        };
        Self::new(code, e)
    }
}

fn io_failure(what: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_DATA, format!("cannot write {}: {e}", what.display()))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("GSPLAN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::new(EXIT_CONFIG, format!("GSPLAN_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(EXIT_INTERNAL, e))
}

fn plan(config: &RunConfig) -> Result<PlanOutcome, Failure> {
    let inputs = load_inputs(config, &InputKind::ALL)?;
    let outcome = run_plan(config, &inputs)?;
    let broken = outcome.invariant_violations();
    if !broken.is_empty() {
        return Err(Failure::new(
            EXIT_INTERNAL,
            format!("plan report failed its invariants: {}", broken.join("; ")),
        ));
    }
    Ok(outcome)
}

fn print_summary(outcome: &PlanOutcome) {
    let r = &outcome.report;
    let g = &r.grid;
    println!(
        "grid      {}x{} cells, lat [{}, {}], lon [{}, {}], step {}x{} deg",
        g.n_lat(),
        g.n_lon(),
        g.lat_min,
        g.lat_max,
        g.lon_min,
        g.lon_max,
        g.step_lat,
        g.step_lon
    );
    for t in &r.rain_thresholds {
        match t.frequency_ghz {
            Some(f) => println!("rain      threshold {:.3} dB at {f} GHz", t.threshold_db),
            None => println!("rain      threshold {:.3} dB (worst case over frequencies)", t.threshold_db),
        }
    }
    println!("criteria  fraction of cells accepted");
    for (name, f) in r.stats_rows() {
        println!("  {name:<32} {:>8.4}%", 100.0 * f);
    }
    println!("regions   {}", r.n_regions);
    println!("sites     {}", r.sites.len());
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Plan { config, out, emit } => {
            let mut cfg = load_config(&config)?;
            if !emit.is_empty() {
                cfg.output.emit = parse_emit(&emit)
                    .map_err(|bad| Failure::new(EXIT_CONFIG, format!("unknown artifact `{bad}` for --emit")))?;
            }
            let dir = out.unwrap_or_else(|| cfg.resolve(&cfg.output.directory.to_string_lossy()));
            let outcome = plan(&cfg)?;
            let written = write_artifacts(&outcome, &dir, &cfg.output.emit).map_err(|e| io_failure(&dir, e))?;
            print_summary(&outcome);
            println!("wrote     {} files to {}", written.len(), dir.display());
        }
        Command::Grid { config, layer, out } => {
            let cfg = load_config(&config)?;
            let inputs = load_inputs(&cfg, &inputs_for_layer(&layer))?;
            let named = build_named_layer(&cfg, &inputs, &layer)?;
            let file = File::create(&out).map_err(|e| io_failure(&out, e))?;
            let mut w = BufWriter::new(file);
            match &named {
                NamedLayer::Scalar(g) => write_grid(g, &mut w),
                NamedLayer::Mask(m) => write_mask(m, &mut w),
            }
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(&out, e))?;
            println!("wrote layer `{layer}` to {}", out.display());
        }
        Command::Stats { config, out } => {
            let cfg = load_config(&config)?;
            let outcome = plan(&cfg)?;
            match out {
                Some(path) => {
                    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
                    write_stats_csv(&outcome.report, BufWriter::new(file)).map_err(|e| io_failure(&path, e))?;
                }
                None => write_stats_csv(&outcome.report, io::stdout().lock())
                    .map_err(|e| io_failure(Path::new("stdout"), e))?,
            }
        }
        Command::Synth { out, step, seed } => {
            let spec = GridSpec::global(step).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
            let path = write_case_study(&out, &spec, seed).map_err(|e| io_failure(&out, e))?;
            println!("wrote synthetic inputs and {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
