use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airan_sim::engine::AgentProfile;
use airan_sim::harness::config::{ConfigError, ExperimentConfig, SeedRange};
use airan_sim::harness::emit::{self, fmt6, Format};
use airan_sim::harness::{plot, spatial, stats, sweep, temporal, ExperimentError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "airan-sim", version, about = "Memory-centric AI-RAN node simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write an SVG chart.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct SeedArgs {
    /// Run a single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive seed range, e.g. `1..20`.
    #[arg(long)]
    seeds: Option<String>,
}

impl SeedArgs {
    fn range(&self) -> Result<Option<SeedRange>, ConfigError> {
        match (&self.seed, &self.seeds) {
            (Some(s), _) => Ok(Some(SeedRange::new(*s, 1))),
            (None, Some(text)) => SeedRange::parse(text).map(Some),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Single-shot recovery from the three interference regimes.
    Spatial {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Ten recurring events with and without episodic memory.
    Temporal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Spatial gains over a grid of budget factors and depth scales.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.75, 1.0])]
        budget_factors: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.8, 1.0, 1.2])]
        depth_scales: Vec<f64>,
    },
    /// Run the recurring events for one seed and dump the episodic store as JSON lines.
    ExportEpisodes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the default configuration as TOML.
    Defaults,
}

enum Failure {
    Config(String),
    Io(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn write_svg(dir: &Path, name: &str, svg: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, svg)?;
    Ok(path)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Spatial { common, seeds } => {
            let mut cfg = load(&common)?;
            if let Some(r) = seeds.range()? {
                cfg.spatial.seeds = r;
            }
            cfg.validate()?;
            let res = spatial::run_spatial(&cfg)?;
            println!("regime          se_interface  se_memory  gain_pct (mean ± sd)   recovered_db");
            for s in &res.summaries {
                println!(
                    "{:<14}  {:>12}  {:>9}  {:>7.3} ± {:<6.3}       {:>7.3}",
                    s.regime.label(),
                    fmt6(s.se_interface),
                    fmt6(s.se_memory),
                    s.gain_pct_mean,
                    s.gain_pct_stdev,
                    s.recovered_db
                );
            }
            let dir = &cfg.output.dir;
            let mut paths = emit::spatial_table(&res).emit(dir, "spatial", common.format)?;
            paths.extend(emit::spatial_summary_table(&res).emit(dir, "spatial_summary", common.format)?);
            if common.plot {
                paths.push(write_svg(dir, "spatial.svg", &plot::spatial_svg(&res))?);
            }
            report(&paths);
        }
        Command::Temporal { common, seeds } => {
            let mut cfg = load(&common)?;
            if let Some(r) = seeds.range()? {
                cfg.temporal.seeds = r;
            }
            cfg.validate()?;
            let res = temporal::run_temporal(&cfg)?;
            let interface = res.series(AgentProfile::Interface);
            let memory = res.series(AgentProfile::Memory);
            println!("event  interface    memory      ratio");
            for (i, (a, b)) in interface.iter().zip(&memory).enumerate() {
                println!("{:>5}  {:>10.4}  {:>10.4}  {:>7.4}", i + 1, a, b, b / a);
            }
            println!(
                "interface spread {:.2}%",
                100.0 * stats::relative_spread(&interface)
            );
            let dir = &cfg.output.dir;
            let mut paths = emit::temporal_table(&res).emit(dir, "temporal", common.format)?;
            paths.extend(emit::temporal_seed_table(&res).emit(dir, "temporal_seeds", common.format)?);
            if common.plot {
                paths.push(write_svg(dir, "temporal.svg", &plot::temporal_svg(&res))?);
            }
            report(&paths);
        }
        Command::Sweep {
            common,
            seeds,
            budget_factors,
            depth_scales,
        } => {
            let mut cfg = load(&common)?;
            if let Some(r) = seeds.range()? {
                cfg.spatial.seeds = r;
            }
            cfg.validate()?;
            let table = sweep(&cfg, &budget_factors, &depth_scales)?;
            print!("{}", table.to_csv_string());
            report(&table.emit(&cfg.output.dir, "sweep", common.format)?);
        }
        Command::ExportEpisodes { common, seed } => {
            let cfg = load(&common)?;
            cfg.validate()?;
            let seed = seed.unwrap_or(cfg.temporal.seeds.first);
            let run = temporal::run_temporal_seed(&cfg, seed)?;
            std::fs::create_dir_all(&cfg.output.dir)?;
            let path = cfg.output.dir.join(format!("episodes_seed{seed}.jsonl"));
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            run.episodes.export_jsonl(&mut file)?;
            std::io::Write::flush(&mut file)?;
            println!("{} episodes", run.episodes.len());
            report(&[path]);
        }
        Command::Defaults => {
            print!("{}", ExperimentConfig::default().to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
