use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qckmeans::bench::{
    ablation_to_csv, generate, rows_to_csv, run_ablation, run_experiment, write_csv, AblationSpec,
    CsvOptions, CsvSource, DatasetEntry, ExperimentRow, RunManifest, SyntheticSpec,
};
use qckmeans::pipeline::{run_qc_kmeans, Formulation, PipelineConfig, SolverMode};
use qckmeans::statevec::NoiseModel;
use qckmeans::{Error, Result};

#[derive(Parser)]
#[command(name = "qckmeans", version, about = "Sketch-based k-means with simulated QAOA centroid selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset to CSV.
    Generate {
        /// circles, moons, spiral, blobs or vd_blobs.
        #[arg(long, default_value = "circles")]
        family: String,
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coordinate noise for circles, moons and spiral.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster one dataset.
    Run(Box<RunArgs>),
    /// Run a manifest-driven grid.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Compare grouped, coupled and exhaustive selection.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long = "candidates", default_value_t = 4)]
        candidates: usize,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// JSON pipeline config used as the base for every arm.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Synthetic preset name.
    #[arg(long, conflicts_with = "csv")]
    dataset: Option<String>,
    /// Points for the synthetic preset.
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Seed for the synthetic preset.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Numeric CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// The CSV has a header line.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Comma-separated zero-based columns to keep.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
}

impl DataArgs {
    fn entry(&self) -> Result<DatasetEntry> {
        match (&self.dataset, &self.csv) {
            (_, Some(path)) => Ok(DatasetEntry {
                name: path.file_stem().map_or("csv".into(), |s| s.to_string_lossy().into_owned()),
                synthetic: None,
                csv: Some(CsvSource {
                    path: path.clone(),
                    options: CsvOptions {
                        delimiter: self.delimiter,
                        has_header: self.header,
                        columns: self.columns.clone(),
                    },
                }),
            }),
            (name, None) => {
                let name = name.as_deref().unwrap_or("circles");
                Ok(DatasetEntry::synthetic(
                    name,
                    SyntheticSpec::preset(name, self.n, self.data_seed)?,
                ))
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Qaoa,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Grouped,
    Coupled,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON pipeline config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Frequency count (default 4·k·d).
    #[arg(long)]
    m: Option<usize>,
    /// Candidates per cluster D.
    #[arg(long)]
    candidates: Option<usize>,
    /// QAOA layers p.
    #[arg(long)]
    depth: Option<usize>,
    /// QFF subsample size B.
    #[arg(long)]
    subsample: Option<usize>,
    /// Final QAOA shots per solve.
    #[arg(long)]
    shots: Option<u64>,
    /// QFF shots per basis and frequency.
    #[arg(long)]
    qff_shots: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum refinement passes.
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    formulation: Option<FormulationArg>,
    /// Noise as p1,p2,p_ro.
    #[arg(long)]
    noise: Option<NoiseModel>,
    /// Exact expectations instead of sampled shots.
    #[arg(long)]
    analytic: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for result.json and rows.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let mut cfg = read_config(args.config.as_deref())?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.k, args.k);
    set!(cfg.candidates, args.candidates);
    set!(cfg.qaoa.p, args.depth);
    set!(cfg.qff.subsample, args.subsample);
    set!(cfg.qaoa.shots, args.shots);
    set!(cfg.qff.shots_per_basis, args.qff_shots);
    set!(cfg.epsilon, args.epsilon);
    set!(cfg.refinement, args.refine);
    set!(cfg.tau, args.tau);
    if args.m.is_some() {
        cfg.m = args.m;
    }
    if let Some(s) = args.solver {
        cfg.solver = match s {
            SolverArg::Qaoa => SolverMode::Qaoa,
            SolverArg::Exhaustive => SolverMode::Exhaustive,
        };
    }
    if let Some(f) = args.formulation {
        cfg.formulation = match f {
            FormulationArg::Grouped => Formulation::Grouped,
            FormulationArg::Coupled => Formulation::Coupled,
        };
    }
    if args.noise.is_some() {
        cfg.noise = args.noise;
    }
    cfg.analytic |= args.analytic;

    let entry = args.data.entry()?;
    let data = entry.load()?;
    let result = run_qc_kmeans(&data, &cfg, args.seed)?;
    println!(
        "{}: n={} d={} k={} m={} sse={:.6} q_peak={} iterations={} shots={} time={:.3}s",
        entry.name,
        data.rows(),
        data.cols(),
        cfg.k,
        result.m,
        result.sse_original,
        result.q_peak,
        result.iterations,
        result.total_shots,
        result.wall_time_s
    );
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("result.json"), serde_json::to_string_pretty(&result)?)?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
        let row = ExperimentRow {
            dataset: entry.name.clone(),
            n: data.rows(),
            d: data.cols(),
            method: "qc-kmeans".into(),
            k: cfg.k,
            seed: args.seed,
            sse: result.sse_original,
            m: result.m,
            q_peak: result.q_peak,
            time_s: result.wall_time_s,
            total_shots: result.total_shots,
            error: None,
        };
        fs::write(dir.join("rows.csv"), rows_to_csv(&[row], cfg.analytic)?)?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            family,
            n,
            seed,
            noise,
            out,
        } => {
            let mut spec = SyntheticSpec::preset(&family, n, seed)?;
            if let Some(x) = noise {
                spec.noise = x;
            }
            write_csv(&generate(&spec)?, &out)?;
            println!("wrote {n} points to {}", out.display());
            Ok(())
        }
        Command::Run(args) => run(&args),
        Command::Bench { manifest, out } => {
            let m: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest)?)?;
            let output = run_experiment(&m, &out)?;
            let failed = output.rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} rows ({failed} failed), {} ablation rows written to {}",
                output.rows.len(),
                output.ablation.len(),
                out.display()
            );
            Ok(())
        }
        Command::Ablate {
            data,
            k,
            candidates,
            seeds,
            config,
            out,
        } => {
            let spec = AblationSpec {
                dataset: data.entry()?,
                k,
                candidates,
                seeds,
                config: read_config(config.as_deref())?,
            };
            let text = ablation_to_csv(&run_ablation(&spec)?)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("ablation.csv"), text)?;
                    println!("wrote {}", dir.join("ablation.csv").display());
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Parse { .. } | Error::Io(_) = e {
                return ExitCode::from(3);
            }
            ExitCode::from(if e.is_capacity() { 4 } else { 2 })
        }
    }
}
