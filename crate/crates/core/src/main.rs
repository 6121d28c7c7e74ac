//! Command-line front end: `run`, `gen-scene` and `report`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use arna::bench::{self, AlgorithmKind, Mode, ScenarioConfig};
use arna::dpf::Backend;
use arna::synth::{generate_scene, write_scene, RenderMode};

#[derive(Parser)]
#[command(name = "arna", version, about = "Distributed particle filter benchmarks (RNA / ARNA)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tracking or information-sharing scenario and write CSV + JSON summary.
    Run(RunArgs),
    /// Generate a synthetic scene and export it as a binary scene file.
    GenScene(GenSceneArgs),
    /// Summary statistics from result CSVs.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tracking,
    InfoSharing,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Rna,
    Arna,
    SirIndependent,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Sequential,
    Parallel,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with any of the run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Exchange ratio for rna, in [0, 0.5].
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    pes: Option<usize>,
    #[arg(long)]
    particles_per_pe: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Frame width and height in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Output CSV; the summary goes to <stem>.summary.json.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct GenSceneArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    size: Option<usize>,
    /// Store expected counts instead of Poisson draws.
    #[arg(long)]
    noise_free: bool,
    #[arg(long, default_value = "scene.bin")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Result CSVs written by `run`.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn load_config(path: Option<&PathBuf>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn apply_size(cfg: &mut ScenarioConfig, size: Option<usize>) {
    if let Some(s) = size {
        cfg.scene.observation.width = s;
        cfg.scene.observation.height = s;
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Tracking => Mode::Tracking,
            ModeArg::InfoSharing => Mode::InfoSharing,
        };
    }
    if let Some(a) = args.algo {
        cfg.algo = match a {
            AlgoArg::Rna => AlgorithmKind::Rna,
            AlgoArg::Arna => AlgorithmKind::Arna,
            AlgoArg::SirIndependent => AlgorithmKind::SirIndependent,
        };
    }
    if let Some(b) = args.backend {
        cfg.backend = match b {
            BackendArg::Sequential => Backend::Sequential,
            BackendArg::Parallel => Backend::Parallel,
        };
    }
    cfg.ratio = args.ratio.unwrap_or(cfg.ratio);
    cfg.pes = args.pes.unwrap_or(cfg.pes);
    cfg.particles_per_pe = args.particles_per_pe.unwrap_or(cfg.particles_per_pe);
    cfg.frames = args.frames.unwrap_or(cfg.frames);
    cfg.snr = args.snr.unwrap_or(cfg.snr);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.replicates = args.replicates.unwrap_or(cfg.replicates);
    cfg.cutoff = args.cutoff.unwrap_or(cfg.cutoff);
    apply_size(&mut cfg, args.size);
    cfg.validate()?;

    let records = bench::run_scenario(&cfg)?;
    if records.is_empty() {
        eprintln!("no replicates requested; nothing written");
        return Ok(ExitCode::SUCCESS);
    }
    let summary = bench::write_results(&records, &args.out)?;
    for r in &records {
        println!(
            "{:<12} rmse {:>8.4} px  final pe_eff/M {:>6.3}  exchanged {:>8}  bytes {:>10}{}",
            r.run_id,
            r.rmse,
            r.rows.last().map_or(f64::NAN, |row| row.pe_eff_frac),
            r.total_exchanged(),
            r.total_bytes(),
            if r.diverged_iterations() > 0 { "  (diverged)" } else { "" }
        );
    }
    println!("wrote {} and {}", args.out.display(), summary.display());
    if records.iter().all(|r| r.diverged_iterations() > 0) {
        eprintln!("every replicate diverged");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn gen_scene(args: GenSceneArgs) -> Result<ExitCode> {
    let mut cfg = load_config(args.config.as_ref())?;
    cfg.frames = args.frames.unwrap_or(cfg.frames);
    cfg.snr = args.snr.unwrap_or(cfg.snr);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    apply_size(&mut cfg, args.size);
    if args.noise_free {
        cfg.scene.render = RenderMode::NoiseFree;
    }
    if cfg.frames == 0 {
        bail!("frames must be >= 1");
    }
    let scene = generate_scene(&cfg.scene_config(), cfg.seed)?;
    write_scene(&scene, &args.out)?;
    println!(
        "wrote {} ({} frames, {}x{}, i0 {:.3})",
        args.out.display(),
        scene.frames.len(),
        scene.width(),
        scene.height(),
        scene.truth(0).i0
    );
    Ok(ExitCode::SUCCESS)
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let mut rows = Vec::new();
    for path in &args.csv {
        rows.extend(bench::read_csv_path(path)?);
    }
    let rep = bench::report(&rows);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rep)?);
    } else {
        print!("{rep}");
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::GenScene(a) => gen_scene(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
