//! Subcommand implementations for the `midas` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use midas_ll1::io::config_file::{config_from_entries, parse_entries, parse_num, Entry};
use midas_ll1::io::{self, read_factors, render_config, write_factors, write_trace};
use midas_ll1::metrics::{self, MetricReport};
use midas_ll1::model::{reconstruct, RankVector};
use midas_ll1::{
    als_mu_baseline, palm_baseline, run, DenseTensor3, EstimatorKind, LL1Factors, MidasError, Result, RunTrace,
    SolverConfig, StepSize,
};

#[derive(Parser, Debug)]
#[command(name = "midas", version, about = "Rank-(Lr,Lr,1) block-term decomposition with inertial stochastic solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit an LL1 model to a tensor.
    Decompose(DecomposeArgs),
    /// Generate a synthetic LL1 tensor plus its ground-truth factors.
    Synth(SynthArgs),
    /// Compare a tensor against the reconstruction from a factors directory.
    Metrics(MetricsArgs),
    /// Run a grid of solver configurations on one tensor.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Input tensor (`.dtensor`, or `.csv` with i1,i2,i3,value rows).
    #[arg(long)]
    pub tensor: PathBuf,
    /// key = value run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write 0 in the elapsed_s column so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// I1,I2,I3
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Block ranks L_1,...,L_R (a single value is repeated R times).
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    /// Number of terms R when --ranks has a single entry.
    #[arg(long = "R")]
    pub terms: Option<usize>,
    /// Signal-to-noise ratio in dB; "inf" for no noise.
    #[arg(long, default_value = "inf")]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output tensor; ground truth goes to `<out>.factors/`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    /// Directory holding A1/A2/A3.dtensor and ranks.
    #[arg(long)]
    pub factors: PathBuf,
    /// Print a CSV header and row instead of the table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    /// Grid file: config keys plus estimators, depths, baselines,
    /// baseline_max_iters.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_timing: bool,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose(a) => decompose(&a),
        Command::Synth(a) => synth(&a),
        Command::Metrics(a) => metrics_cmd(&a),
        Command::Bench(a) => bench(&a),
    }
}

fn load_tensor(path: &Path) -> Result<DenseTensor3> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        io::read_csv_tensor(path, None)
    } else {
        io::read_tensor(path)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| MidasError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| MidasError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn metrics_text(report: &MetricReport, trace: &RunTrace) -> String {
    let fin = trace.final_objective();
    format!(
        "{report}\nf    {:>14.6e}\nphi  {:>14.6e}\n",
        fin.f, fin.phi
    )
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    let t = load_tensor(&a.tensor)?;
    let mut config = io::read_config(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    create_dir(&a.out)?;
    write_text(&a.out.join("config.resolved"), &render_config(&config))?;
    let (factors, trace) = run(&config, &t)?;
    write_factors(&a.out, &factors)?;
    write_trace(a.out.join("trace.csv"), &trace, !a.no_timing)?;
    let report = metrics::evaluate(&t, &reconstruct(&factors))?;
    write_text(&a.out.join("metrics.txt"), &metrics_text(&report, &trace))?;
    let fin = trace.final_objective();
    log::info!(
        "{} records, f {:.6e} (initial {:.6e}), psnr {:.3} dB",
        trace.records.len(),
        fin.f,
        trace.initial.f,
        report.psnr
    );
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let dims: [usize; 3] = a
        .dims
        .as_slice()
        .try_into()
        .map_err(|_| MidasError::Config("--dims needs exactly three values".into()))?;
    let ranks = match (a.ranks.as_slice(), a.terms) {
        ([l], Some(r)) => RankVector::uniform(r, *l)?,
        (list, Some(r)) if list.len() != r => {
            return Err(MidasError::Config(format!("--R {r} but --ranks lists {} blocks", list.len())))
        }
        (list, _) => RankVector::new(list.to_vec())?,
    };
    let snr = if a.snr.is_infinite() { None } else { Some(a.snr) };
    let (x, truth) = io::synthesize(dims, ranks, snr, a.seed)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let side = io::write_synth(&a.out, &x, &truth)?;
    log::info!("wrote {} and {}", a.out.display(), side.display());
    Ok(())
}

pub fn metrics_cmd(a: &MetricsArgs) -> Result<()> {
    let t = load_tensor(&a.tensor)?;
    let factors = read_factors(&a.factors)?;
    factors.check_tensor(&t)?;
    let report = metrics::evaluate(&t, &reconstruct(&factors))?;
    if a.csv {
        println!("{}", MetricReport::CSV_HEADER);
        println!("{}", report.to_csv_row());
    } else {
        println!("{report}");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Baseline {
    Palm,
    AlsMu,
}

#[derive(Debug)]
struct Grid {
    base: SolverConfig,
    estimators: Vec<EstimatorKind>,
    depths: Vec<usize>,
    baselines: Vec<Baseline>,
    baseline_max_iters: Option<u64>,
}

fn list<'a>(e: &'a Entry) -> impl Iterator<Item = &'a str> {
    e.value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path).map_err(|e| MidasError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let perr = |line, message| MidasError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let (grid_keys, base_keys): (Vec<Entry>, Vec<Entry>) = parse_entries(&text, path)?
        .into_iter()
        .partition(|e| matches!(e.key.as_str(), "estimators" | "depths" | "baselines" | "baseline_max_iters"));
    let base = config_from_entries(&base_keys, path)?;
    let mut grid = Grid {
        estimators: vec![base.estimator],
        depths: vec![base.depth],
        baselines: Vec::new(),
        baseline_max_iters: None,
        base,
    };
    for e in &grid_keys {
        match e.key.as_str() {
            "estimators" => {
                grid.estimators = list(e)
                    .map(|s| match s.to_ascii_lowercase().as_str() {
                        "sgd" => Ok(EstimatorKind::Sgd),
                        "saga" => Ok(EstimatorKind::Saga),
                        "sarah" => Ok(EstimatorKind::Sarah {
                            period: match grid.base.estimator {
                                EstimatorKind::Sarah { period } => period,
                                _ => None,
                            },
                        }),
                        other => Err(perr(e.line, format!("unknown estimator {other:?}"))),
                    })
                    .collect::<Result<_>>()?
            }
            "depths" => {
                grid.depths = list(e)
                    .map(|s| s.parse().map_err(|_| perr(e.line, format!("bad depth {s:?}"))))
                    .collect::<Result<_>>()?
            }
            "baselines" => {
                grid.baselines = list(e)
                    .map(|s| match s.to_ascii_lowercase().as_str() {
                        "palm" => Ok(Baseline::Palm),
                        "als_mu" | "mu" => Ok(Baseline::AlsMu),
                        other => Err(perr(e.line, format!("unknown baseline {other:?}"))),
                    })
                    .collect::<Result<_>>()?
            }
            _ => grid.baseline_max_iters = Some(parse_num(path, e)?),
        }
    }
    Ok(grid)
}

struct Cell {
    name: String,
    config: SolverConfig,
    baseline: Option<Baseline>,
}

fn cells(grid: &Grid) -> Vec<Cell> {
    let mut out = Vec::new();
    for &est in &grid.estimators {
        for &depth in &grid.depths {
            let mut config = grid.base.clone();
            config.estimator = est;
            config.depth = depth;
            out.push(Cell {
                name: format!("{}-t{depth}", est.name()),
                config,
                baseline: None,
            });
        }
    }
    for &b in &grid.baselines {
        let mut config = grid.base.clone();
        if grid.baseline_max_iters.is_some() {
            config.max_iters = grid.baseline_max_iters;
        }
        let name = match b {
            Baseline::Palm => {
                config.step = StepSize::InverseLipschitz;
                "palm"
            }
            Baseline::AlsMu => "als_mu",
        };
        out.push(Cell {
            name: name.into(),
            config,
            baseline: Some(b),
        });
    }
    out
}

fn run_cell(cell: &Cell, t: &DenseTensor3) -> Result<(LL1Factors, RunTrace)> {
    match cell.baseline {
        None => run(&cell.config, t),
        Some(Baseline::Palm) => palm_baseline(&cell.config, t),
        Some(Baseline::AlsMu) => als_mu_baseline(&cell.config, t),
    }
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let t = load_tensor(&a.tensor)?;
    let mut grid = parse_grid(&a.grid)?;
    if let Some(seed) = a.seed {
        grid.base.seed = seed;
    }
    create_dir(&a.out)?;
    let summary_path = a.out.join("summary.csv");
    let mut summary = csv::Writer::from_path(&summary_path).map_err(|e| MidasError::Io {
        path: summary_path.clone(),
        source: e.into(),
    })?;
    let csv_err = |e: csv::Error| MidasError::Io {
        path: summary_path.clone(),
        source: e.into(),
    };
    summary
        .write_record(["cell", "status", "iters", "final_f", "final_phi", "psnr", "wall_s"])
        .map_err(csv_err)?;
    for cell in cells(&grid) {
        let dir = a.out.join(&cell.name);
        create_dir(&dir)?;
        write_text(&dir.join("config.resolved"), &render_config(&cell.config))?;
        let clock = Instant::now();
        let row = match run_cell(&cell, &t) {
            Ok((factors, trace)) => {
                let wall = if a.no_timing { 0.0 } else { clock.elapsed().as_secs_f64() };
                write_trace(dir.join("trace.csv"), &trace, !a.no_timing)?;
                let psnr = metrics::psnr(&t, &reconstruct(&factors))?;
                let fin = trace.final_objective();
                let iters = trace.last().map_or(0, |r| r.iter);
                log::info!("{}: f {:.6e}, psnr {:.3} dB", cell.name, fin.f, psnr);
                vec![
                    cell.name.clone(),
                    "ok".into(),
                    iters.to_string(),
                    format!("{:?}", fin.f),
                    format!("{:?}", fin.phi),
                    format!("{psnr:?}"),
                    format!("{wall:?}"),
                ]
            }
            Err(e) => {
                log::error!("{}: {e}", cell.name);
                vec![
                    cell.name.clone(),
                    format!("error: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]
            }
        };
        summary.write_record(&row).map_err(csv_err)?;
    }
    summary.flush().map_err(|e| MidasError::Io {
        path: summary_path.clone(),
        source: e,
    })
}
