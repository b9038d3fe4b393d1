use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Result};
use clap::{Parser, Subcommand, ValueEnum};
use maopf::decision::FcmOptions;
use maopf::knea::{KneaConfig, KneeFractionBase};
use maopf::moea::{MutationParams, SbxParams};
use maopf_cli::archive::load_network;
use maopf_cli::commands::{
    cmd_decide, cmd_metrics, cmd_pf, cmd_run, compare_table, format_metrics, indexed_path,
    parse_weights, resolve_threads, FrontArg, RunRequest,
};

#[derive(Parser)]
#[command(name = "maopf", version, about = "Many-objective optimal power flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KneeBase {
    FirstFront,
    Population,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a Pareto archive with the knee-point driven algorithm.
    Run {
        #[arg(long)]
        case: PathBuf,
        /// Cost and emission curve overrides keyed by generator bus.
        #[arg(long)]
        coefficients: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        pop: usize,
        #[arg(long, default_value_t = 100)]
        gens: usize,
        /// Required unless --repeat is given with --seed-base.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Target knee fraction.
        #[arg(long, default_value_t = 0.5)]
        th: f64,
        /// Neighbours in the weighted distance [default: min(4, N - 1)].
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "first-front")]
        knee_base: KneeBase,
        #[arg(long, default_value_t = 0.9)]
        pc: f64,
        #[arg(long, default_value_t = 20.0)]
        eta_c: f64,
        /// Per-gene mutation probability [default: 1 / adjustable genes].
        #[arg(long)]
        pm: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        eta_m: f64,
        /// Worker threads, 0 for all cores; MAOPF_THREADS takes precedence.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Independent runs with seeds seed-base, seed-base + 1, ...
        #[arg(long)]
        repeat: Option<usize>,
        #[arg(long, requires = "repeat")]
        seed_base: Option<u64>,
    },
    /// Cluster an archive and pick one best-compromise solution per cluster.
    Decide {
        archive: PathBuf,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
        weights: String,
        /// Seed of the cluster-centre initialisation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path [default: <archive>_decision.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generational distance and spacing of fronts, grouped by label.
    Metrics {
        /// Front files as [LABEL=]PATH.
        #[arg(required = true)]
        fronts: Vec<FrontArg>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Skip the shared min-max scaling.
        #[arg(long)]
        raw: bool,
    },
    /// Solve one power flow and print the result as JSON.
    Pf {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Control file [default: nominal controls].
        #[arg(long, conflicts_with = "compare")]
        controls: Option<PathBuf>,
        /// Print a before/after objective table for two control files.
        #[arg(long, num_args = 2, value_names = ["BASE", "AFTER"])]
        compare: Option<Vec<PathBuf>>,
    },
}

const NONCONVERGED: u8 = 2;

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            case,
            coefficients,
            pop,
            gens,
            seed,
            out,
            th,
            k,
            knee_base,
            pc,
            eta_c,
            pm,
            eta_m,
            threads,
            repeat,
            seed_base,
        } => {
            let algorithm = KneaConfig {
                pop_size: pop,
                generations: gens,
                threshold: th,
                neighbors: k,
                crossover: SbxParams {
                    probability: pc,
                    eta: eta_c,
                    ..SbxParams::default()
                },
                mutation: MutationParams {
                    probability: pm,
                    eta: eta_m,
                },
                knee_fraction_base: match knee_base {
                    KneeBase::FirstFront => KneeFractionBase::FirstFront,
                    KneeBase::Population => KneeFractionBase::Population,
                },
                seed: 0,
            };
            let threads = resolve_threads(threads)?;
            let jobs: Vec<(u64, PathBuf)> = match repeat {
                Some(n) => {
                    ensure!(n > 0, "--repeat must be positive");
                    let base = seed_base
                        .or(seed)
                        .ok_or_else(|| anyhow::anyhow!("--repeat needs --seed-base (or --seed)"))?;
                    let width = (n - 1).to_string().len().max(2);
                    (0..n)
                        .map(|i| (base + i as u64, indexed_path(&out, i, width)))
                        .collect()
                }
                None => {
                    let seed = seed.ok_or_else(|| anyhow::anyhow!("--seed is required"))?;
                    vec![(seed, out)]
                }
            };
            let mut total = 0.0;
            for (seed, out) in &jobs {
                let req = RunRequest {
                    case: case.clone(),
                    coefficients: coefficients.clone(),
                    algorithm: KneaConfig {
                        seed: *seed,
                        ..algorithm.clone()
                    },
                    threads,
                    out: out.clone(),
                };
                let o = cmd_run(&req)?;
                total += o.seconds;
                let feasible = o.archive.solutions.iter().filter(|s| s.feasible).count();
                println!(
                    "seed {seed}: {} solutions ({feasible} feasible) -> {} and {}",
                    o.archive.solutions.len(),
                    o.json.display(),
                    o.csv.display()
                );
                println!("wall time {:.2} s", o.seconds);
            }
            if jobs.len() > 1 {
                println!("average wall time {:.2} s", total / jobs.len() as f64);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Decide {
            archive,
            clusters,
            weights,
            seed,
            out,
        } => {
            let weights = parse_weights(&weights)?;
            let opts = FcmOptions {
                clusters,
                seed,
                ..FcmOptions::default()
            };
            let report = cmd_decide(&archive, &opts, &weights)?;
            let out = out.unwrap_or_else(|| {
                let stem = archive
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("archive");
                archive.with_file_name(format!("{stem}_decision.json"))
            });
            let csv = report.write(&out)?;
            let shown: Vec<String> = report.weights.iter().map(|w| w.to_string()).collect();
            println!("weights {}", shown.join(","));
            print!("{}", report.table());
            for note in &report.notes {
                println!("note: {note}");
            }
            println!("report -> {} and {}", out.display(), csv.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics {
            fronts,
            reference,
            raw,
        } => {
            let groups = cmd_metrics(&fronts, reference.as_deref(), raw)?;
            print!("{}", format_metrics(&groups));
            Ok(ExitCode::SUCCESS)
        }
        Command::Pf {
            case,
            coefficients,
            controls,
            compare,
        } => {
            let net = load_network(&case, coefficients.as_deref())?;
            if let Some(files) = compare {
                let before = cmd_pf(&net, Some(&files[0]))?;
                let after = cmd_pf(&net, Some(&files[1]))?;
                print!("{}", compare_table(&before, &after));
                let ok = before.converged && after.converged;
                return Ok(if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(NONCONVERGED)
                });
            }
            let report = cmd_pf(&net, controls.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NONCONVERGED)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit with 1; help and version exit cleanly.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
