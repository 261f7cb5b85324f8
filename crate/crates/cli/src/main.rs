use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use econsim::harness::{
    aggregate_runs, curve_csv, run_batch, run_episode, scripted_policy, tool_frequency_csv, write_trace, RunOptions,
    RunSummary,
};
use econsim::memory::MemoryManager;
use econsim::sim::{DEFAULT_HORIZON_DAYS, DEFAULT_WINDOW};
use econsim::vending::catalog::generate_catalog;
use econsim::{EnvKind, EpisodeConfig};
use econsim_gateway::{GatewayConfig, DEFAULT_PORT, PORT_ENV, TRACE_DIR_ENV};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "econsim", version, about = "Run and serve simulated economies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct EpisodeArgs {
    #[arg(long)]
    env: EnvKind,
    /// Policy name, optionally with `:key=value,...` parameters.
    #[arg(long)]
    agent: String,
    #[arg(long, default_value_t = DEFAULT_HORIZON_DAYS)]
    days: u32,
    /// Daily action budget; defaults to the environment's own.
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Environment parameters as inline JSON or `@file.json`.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its trace.
    Run {
        #[command(flatten)]
        episode: EpisodeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "trace.jsonl")]
        out: PathBuf,
        /// Where to write the run summary; printed to stdout otherwise.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Per-day tool-count CSV.
        #[arg(long)]
        tools_csv: Option<PathBuf>,
        /// Attach the three-tier memory to the agent.
        #[arg(long)]
        memory: bool,
    },
    /// Run one policy over a range of seeds.
    Batch {
        #[command(flatten)]
        episode: EpisodeArgs,
        /// Inclusive range `a..b` (also `a..=b`) or a comma list.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Aggregate the run summaries found in a directory.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Mean curve with min/max band as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Generate a product catalog and its demand structure.
    GenCatalog {
        #[arg(long, default_value_t = 37)]
        categories: usize,
        #[arg(long, default_value_t = 17)]
        skus_per_category: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Demand structure output; products go to `products.json` beside it.
        #[arg(long, default_value = "demand_structure.json")]
        out: PathBuf,
    },
    /// Serve episodes over HTTP.
    Serve {
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, env = TRACE_DIR_ENV)]
        trace_dir: Option<PathBuf>,
    },
}

type CliResult<T> = Result<T, String>;

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = |e: std::num::ParseIntError| format!("bad seed list `{s}`: {e}");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(bad)?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(bad)?;
        if b < a {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(bad)).collect()
}

fn load_params(raw: Option<&str>) -> CliResult<Value> {
    let Some(raw) = raw else { return Ok(json!({})) };
    let text = match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("reading {path}: {e}"))?,
        None => raw.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| format!("params are not JSON: {e}"))
}

fn episode_config(args: &EpisodeArgs, seed: u64) -> CliResult<EpisodeConfig> {
    let mut cfg = EpisodeConfig::new(args.env, seed)
        .with_horizon(args.days)
        .with_params(load_params(args.params.as_deref())?);
    if let Some(b) = args.budget {
        cfg = cfg.with_budget(b);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| format!("creating {}: {e}", parent.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run(
    episode: &EpisodeArgs,
    seed: u64,
    out: &Path,
    summary_path: Option<&Path>,
    tools_csv: Option<&Path>,
    memory: bool,
) -> CliResult<()> {
    let cfg = episode_config(episode, seed)?;
    let mut agent = scripted_policy(&episode.agent, seed).map_err(|e| e.to_string())?;
    let run_id = format!("{}-{}-{}", cfg.env, agent.name(), seed);
    let opts = RunOptions {
        window: episode.window,
        ..RunOptions::default()
    };
    let mut mm = memory.then(MemoryManager::default);
    let (summary, ep) = run_episode(cfg, &run_id, agent.as_mut(), mm.as_mut(), &opts).map_err(|e| e.to_string())?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| e.to_string())?;
    }
    write_trace(out, ep.records()).map_err(|e| format!("writing {}: {e}", out.display()))?;
    if let Some(path) = tools_csv {
        write(path, &tool_frequency_csv(&summary))?;
    }
    match summary_path {
        Some(p) => write(p, &pretty(&summary))?,
        None => print!("{}", pretty(&summary)),
    }
    log::info!(
        "{run_id}: {} after {} days, final metric {:.4}",
        summary.status.label(),
        summary.survived_days,
        summary.final_metric
    );
    Ok(())
}

fn batch(episode: &EpisodeArgs, seeds: &str, out: &Path) -> CliResult<()> {
    let seeds = parse_seeds(seeds)?;
    let cfg = episode_config(episode, 0)?;
    let opts = RunOptions {
        window: episode.window,
        ..RunOptions::default()
    };
    let runs = run_batch(&cfg, &episode.agent, &seeds, &opts).map_err(|e| e.to_string())?;
    fs::create_dir_all(out).map_err(|e| format!("creating {}: {e}", out.display()))?;
    for (summary, ep) in &runs {
        let id = &summary.run_id;
        write_trace(&out.join(format!("{id}.jsonl")), ep.records()).map_err(|e| e.to_string())?;
        write(&out.join(format!("{id}.summary.json")), &pretty(summary))?;
        write(&out.join(format!("{id}.tools.csv")), &tool_frequency_csv(summary))?;
    }
    let summaries: Vec<RunSummary> = runs.into_iter().map(|(s, _)| s).collect();
    let stats = aggregate_runs(&summaries).map_err(|e| e.to_string())?;
    write(&out.join("stats.json"), &pretty(&stats))?;
    write(&out.join("curve.csv"), &curve_csv(&stats))?;
    print!("{}", pretty(&stats));
    Ok(())
}

fn stats(input: &Path, curve: Option<&Path>) -> CliResult<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| format!("reading {}: {e}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".summary.json"))
        .collect();
    paths.sort();
    let summaries = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| format!("reading {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect::<CliResult<Vec<RunSummary>>>()?;
    let stats = aggregate_runs(&summaries).map_err(|e| e.to_string())?;
    if let Some(path) = curve {
        write(path, &curve_csv(&stats))?;
    }
    print!("{}", pretty(&stats));
    Ok(())
}

fn gen_catalog(categories: usize, skus: usize, seed: u64, out: &Path) -> CliResult<()> {
    if categories == 0 || skus == 0 {
        return Err("--categories and --skus-per-category must be at least 1".into());
    }
    let (catalog, structure) = generate_catalog(seed, categories, skus);
    structure.validate_ranges()?;
    write(out, &pretty(&structure))?;
    let products = out.with_file_name("products.json");
    write(&products, &pretty(&catalog))?;
    eprintln!(
        "wrote {} groups to {} and {} products to {}",
        structure.groups.len(),
        out.display(),
        catalog.products.len(),
        products.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            episode,
            seed,
            out,
            summary,
            tools_csv,
            memory,
        } => run(episode, *seed, out, summary.as_deref(), tools_csv.as_deref(), *memory),
        Command::Batch { episode, seeds, out } => batch(episode, seeds, out),
        Command::Stats { input, curve } => stats(input, curve.as_deref()),
        Command::GenCatalog {
            categories,
            skus_per_category,
            seed,
            out,
        } => gen_catalog(*categories, *skus_per_category, *seed, out),
        Command::Serve { port, host, trace_dir } => {
            let config = GatewayConfig {
                trace_dir: trace_dir.clone(),
                ..GatewayConfig::default()
            };
            econsim_gateway::run_blocking(SocketAddr::new(*host, *port), config).map_err(|e| e.to_string())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
