use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use obstacle_recon::config::PipelineConfig;
use obstacle_recon::dataset::{load_data_points, save_data_points};
use obstacle_recon::filter::cluster_and_count_hashed;
use obstacle_recon::pipeline::{self, to_json};
use obstacle_recon::reconstruct::CandidateSolution;
use obstacle_recon::region::save_cache;
use obstacle_recon::Error;

#[derive(Parser)]
#[command(
    name = "obstacle-recon",
    version,
    about = "Reconstruct moving obstacles from broken-ray travel times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set reconstruction.mode=cached`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from the configured obstacle.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output file (default: <output.dir>/dataset.txt).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run phase 1 and write candidate solutions as JSON.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Dataset to read instead of the configured input or simulation.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run phase 2 on stored candidates.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Simulate or load data, reconstruct, filter and write all artifacts.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 when no point survives the filter.
        #[arg(long)]
        strict: bool,
    },
    /// Compare against the closed-form ray in c = x + y + 1.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Precompute the receiver-ray region table.
    CacheBuild {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_)
        | Error::Parse { .. }
        | Error::SchemaMismatch(_)
        | Error::Io(_)
        | Error::InvalidDomain(_)
        | Error::InvalidField(_)
        | Error::InvalidStepControl(_)
        | Error::InvalidObstacle(_)
        | Error::InvalidMesh(_)
        | Error::InvalidBatch(_)
        | Error::UnknownPeriod(_)
        | Error::StaleCache(_)
        | Error::DanglingCandidate { .. } => 2,
        _ => 4,
    }
}

fn setup(common: &Common) -> Result<PipelineConfig, Error> {
    let level = match common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    PipelineConfig::load(&common.config, &common.set)
}

fn write_out(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn data_for(
    cfg: &PipelineConfig,
    data: Option<&Path>,
) -> Result<Vec<obstacle_recon::dataset::DataPoint>, Error> {
    match data {
        Some(p) => load_data_points(p),
        None => pipeline::load_or_simulate(cfg, &cfg.field.build()?),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { common, out } => {
            let cfg = setup(&common)?;
            let data = pipeline::simulate(&cfg, &cfg.field.build()?)?;
            let out = out.unwrap_or_else(|| cfg.output.dir.join("dataset.txt"));
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            save_data_points(&out, &data)?;
            println!("{} data points -> {}", data.len(), out.display());
        }
        Command::Reconstruct { common, data, out } => {
            let cfg = setup(&common)?;
            let field = cfg.field.build()?;
            let data = data_for(&cfg, data.as_deref())?;
            let (cands, reports) = pipeline::phase_one(&cfg, &data, &field)?;
            let out = out.unwrap_or_else(|| cfg.output.dir.join("candidates.json"));
            write_out(&out, &to_json(&cands))?;
            let solved = reports.iter().filter(|r| r.candidates > 0).count();
            println!(
                "{} candidates from {solved}/{} data points -> {}",
                cands.len(),
                data.len(),
                out.display()
            );
        }
        Command::Filter {
            common,
            data,
            candidates,
            out,
        } => {
            let cfg = setup(&common)?;
            let data = load_data_points(&data)?;
            let text = std::fs::read_to_string(&candidates)
                .map_err(|e| Error::Io(format!("{}: {e}", candidates.display())))?;
            let cands: Vec<CandidateSolution> =
                serde_json::from_str(&text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
            let fcfg = cfg.filter_config();
            let clusters = cluster_and_count_hashed(&cands, &data, &fcfg)?;
            let kept = pipeline::retained(&clusters, &cfg);
            let text = pipeline::solutions_text(&kept, &data, fcfg.pair_quantum);
            match out {
                Some(p) => write_out(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Pipeline { common, strict } => {
            let cfg = setup(&common)?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            let art = pipeline::write_artifacts(&outcome, &cfg.output.dir)?;
            let r = &outcome.report;
            println!(
                "{} data points, {} candidates, {} clusters, {} supported -> {}",
                r.data_points,
                r.candidates,
                r.clusters,
                r.solutions,
                art.solutions.display()
            );
            if strict && r.solutions == 0 {
                eprintln!(
                    "no point reached the support threshold q = {}",
                    cfg.filter_config().q
                );
                return Ok(3);
            }
        }
        Command::Verify { common } => {
            let cfg = setup(&common)?;
            let v = pipeline::verify_oracle(&cfg)?;
            println!(
                "{:>6} {:>10} {:>10} {:>10}",
                "T", "x=y", "trace err", "recon err"
            );
            for r in &v.rows {
                println!(
                    "{:>6.2} {:>10.4} {:>10.2e} {:>10}",
                    r.travel_time,
                    r.closed_form,
                    r.trace_error,
                    r.reconstruction_error
                        .map_or("none".into(), |e| format!("{e:.2e}"))
                );
            }
            println!("{}", if v.pass { "PASS" } else { "FAIL" });
            if !v.pass {
                return Ok(4);
            }
        }
        Command::CacheBuild { common, data, out } => {
            let cfg = setup(&common)?;
            let field = cfg.field.build()?;
            let data = data_for(&cfg, data.as_deref())?;
            let mut cfg = cfg;
            cfg.mesh.cache = None;
            let table = pipeline::build_table(&cfg, &data, &field)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            save_cache(&out, &table)?;
            println!("{} records -> {}", table.records.len(), out.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
