//! SmellBench command-line surface.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use smellbench::canonical::to_canonical_string;
use smellbench::clock::{Clock, SystemClock};
use smellbench::optimizer::{
    baseline_candidate, evolve, history_to_ndjson, light_budget, Budget, EchoReflector,
    OptimizerConfig, TokenInsertingGenerator, TokenJudge,
};
use smellbench::packet::{load_playbook_library, PlaybookEntry, PlaybookLibrary};
use smellbench::protocol::{serve_stdio, serve_unix, ServerContext, ShutdownFlag, Transport};
use smellbench::report::{emit_leaderboard, emit_report, round3, score_records, score_simulation};
use smellbench::scoring::{diff_reports, AgentRunRecord};
use smellbench::sim::{load_manifest, run_simulation, write_run_artifacts};
use smellbench::smell::{
    classify_difficulty, parse_detection_report, parse_verdicts, select_benchmark,
    DetectionReport, Difficulty, SmellType,
};
use smellbench::stats::{
    bootstrap_ci, cliffs_delta, cohen_kappa, fleiss_kappa, holm_adjust, kendall_w,
    wilcoxon_signed_rank_with, OrdinalScale, RankTable, Weighting, WilcoxonMethod,
};
use smellbench::store::{
    read_events, replay, CreateOptions, Journal, SharedStore, TaskStore, DEFAULT_LEASE_TTL_MS,
};

#[derive(Parser)]
#[command(name = "smellbench", version, about = "Benchmark orchestration and evaluation for architectural code smell repair agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Easy,
    Medium,
    Hard,
}

impl From<TierArg> for Difficulty {
    fn from(tier: TierArg) -> Self {
        match tier {
            TierArg::Easy => Difficulty::Easy,
            TierArg::Medium => Difficulty::Medium,
            TierArg::Hard => Difficulty::Hard,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate, and normalize a detection report.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the difficulty tier of every benchmark-eligible instance.
    Classify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Select the benchmark slice (tier + allowed types) of a report.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "hard")]
        tier: TierArg,
        /// Comma-separated smell types; defaults to the five eligible ones.
        #[arg(long)]
        types: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the task protocol over stdio or a unix socket.
    Serve {
        /// JSON config with fixture/playbooks (and optionally transport).
        #[arg(long)]
        config: PathBuf,
        /// stdio | unix:<path>; overrides the config.
        #[arg(long)]
        transport: Option<String>,
        /// Append-only journal file for the task store.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Lease TTL in minutes.
        #[arg(long)]
        ttl_minutes: Option<u64>,
        /// Sweep expired leases every N seconds (unix transport only).
        #[arg(long)]
        reclaim_interval_secs: Option<u64>,
    },
    /// Run the simulated-agent harness end to end and emit reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score agent-run records against verdicts and report diffs.
    Score {
        /// Directory of agent-run record JSON files.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        /// The pre-fix detection report.
        #[arg(long)]
        fixture: PathBuf,
        /// Directory of per-agent post-fix reports (<agent>.json).
        #[arg(long)]
        posts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render leaderboard and report files from a scored bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Net smell delta between two detection reports.
    DiffReports {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
    },
    /// Evolve smell-type playbooks with the deterministic mock roles.
    OptimizePrompts {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        generations: Option<u32>,
        #[arg(long)]
        candidates: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the optimizer run log (NDJSON) here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Administratively reset a blocked task to the claimable pool.
    ResetBlocked {
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        task: String,
    },
    /// Statistical utilities over JSON arrays.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Percentile bootstrap CI of the mean. Input: JSON array of numbers.
    Bootstrap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cohen's kappa. Inputs: two JSON arrays of category indices.
    CohenKappa {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 3)]
        categories: usize,
        #[arg(long, value_enum, default_value = "none")]
        weighting: WeightingArg,
    },
    /// Fleiss' kappa. Input: JSON item x category count matrix.
    FleissKappa {
        #[arg(long)]
        input: PathBuf,
    },
    /// Kendall's W. Input: JSON m x n rank matrix (mid-ranks).
    KendallW {
        #[arg(long)]
        input: PathBuf,
    },
    /// Wilcoxon signed-rank test. Inputs: two JSON arrays of paired reals.
    Wilcoxon {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
    /// Holm step-down adjustment. Input: JSON array of p-values.
    Holm {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cliff's delta. Inputs: two JSON arrays of reals.
    CliffsDelta {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    None,
    Quadratic,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    Approx,
}

#[derive(Deserialize)]
struct ServeConfig {
    fixture: PathBuf,
    playbooks: PathBuf,
    #[serde(default)]
    transport: Option<String>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { input, out } => {
            let report = parse_detection_report(&std::fs::read(&input)?)?;
            let json = to_canonical_string(&report)?;
            emit(out.as_deref(), &json)?;
            eprintln!("ingested {} instances", report.instances.len());
        }
        Command::Classify { input } => {
            let report = parse_detection_report(&std::fs::read(&input)?)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for instance in &report.instances {
                let tier = classify_difficulty(instance.smell_type, instance.metric.value)
                    .map(|t| t.to_string())
                    .unwrap_or_else(|_| "ineligible".to_string());
                let line = format!(
                    "{}\t{}\t{}={}\t{}",
                    instance.id,
                    instance.smell_type,
                    instance.metric.name,
                    instance.metric.value,
                    tier
                );
                // stop quietly when the reader goes away (e.g. head)
                use std::io::Write as _;
                if writeln!(out, "{line}").is_err() {
                    break;
                }
            }
        }
        Command::Select {
            input,
            tier,
            types,
            out,
        } => {
            let report = parse_detection_report(&std::fs::read(&input)?)?;
            let allowed = parse_types(types.as_deref())?;
            let selection = select_benchmark(&report, tier.into(), &allowed);
            let json = to_canonical_string(&selection)?;
            emit(out.as_deref(), &json)?;
            eprintln!("selected {} instances", selection.len());
        }
        Command::Serve {
            config,
            transport,
            journal,
            ttl_minutes,
            reclaim_interval_secs,
        } => {
            let cfg: ServeConfig = serde_json::from_slice(&std::fs::read(&config)?)
                .with_context(|| format!("reading {}", config.display()))?;
            let report = parse_detection_report(&std::fs::read(&cfg.fixture)?)?;
            let benchmark = select_benchmark(
                &report,
                Difficulty::Hard,
                &SmellType::BENCHMARK_ELIGIBLE.into_iter().collect(),
            );
            let library = Arc::new(load_playbook_library(&cfg.playbooks)?);
            let clock: Arc<dyn Clock> = Arc::new(SystemClock);
            let options = CreateOptions {
                allow_empty: false,
                lease_ttl_ms: ttl_minutes
                    .map(|m| (m * 60 * 1000) as i64)
                    .unwrap_or(DEFAULT_LEASE_TTL_MS),
            };
            let store = match &journal {
                Some(path) => {
                    let file = OpenOptions::new().create(true).append(true).open(path)?;
                    TaskStore::create_tasks_journaled(
                        &benchmark,
                        options,
                        clock.now_ms(),
                        Journal::new(Box::new(file)),
                    )?
                }
                None => TaskStore::create_tasks(&benchmark, options, clock.now_ms())?,
            };
            let ctx = ServerContext::new(SharedStore::new(store), library, clock);
            let flag = transport.or(cfg.transport).unwrap_or_else(|| "stdio".into());
            match Transport::parse(&flag).map_err(anyhow::Error::msg)? {
                Transport::Stdio => serve_stdio(&ctx)?,
                Transport::Unix(path) => {
                    eprintln!("serving {} tasks on unix:{}", benchmark.len(), path.display());
                    serve_unix(
                        &path,
                        &ctx,
                        &ShutdownFlag::new(),
                        reclaim_interval_secs.map(std::time::Duration::from_secs),
                    )?;
                }
            }
        }
        Command::Simulate { config, seed, out } => {
            let mut manifest = load_manifest(&config)?;
            if let Some(seed) = seed {
                manifest.seed = seed;
            }
            if let Some(out) = out {
                manifest.out = out;
            }
            let output = run_simulation(&manifest)?;
            std::fs::create_dir_all(&manifest.out)?;
            write_run_artifacts(&output, &manifest.out)?;
            let bundle = score_simulation(&output)?;
            std::fs::write(
                manifest.out.join("bundle.json"),
                to_canonical_string(&bundle)?,
            )?;
            let files = emit_report(&bundle, &manifest.out)?;
            for row in emit_leaderboard(&bundle.reports) {
                println!(
                    "{:>2}  {:<24} E={:.3}",
                    row.rank,
                    row.agent_id,
                    round3(row.e)
                );
            }
            eprintln!("wrote {} report files to {}", files.len(), manifest.out.display());
        }
        Command::Score {
            runs,
            verdicts,
            fixture,
            posts,
            out,
        } => {
            let pre = parse_detection_report(&std::fs::read(&fixture)?)?;
            let benchmark = select_benchmark(
                &pre,
                Difficulty::Hard,
                &SmellType::BENCHMARK_ELIGIBLE.into_iter().collect(),
            );
            let verdict_list = parse_verdicts(&std::fs::read(&verdicts)?)?;
            let verdict_map = smellbench::sim::verdict_map(&verdict_list);
            let mut records: Vec<AgentRunRecord> = Vec::new();
            for entry in sorted_json_files(&runs)? {
                records.push(serde_json::from_slice(&std::fs::read(&entry)?)?);
            }
            if records.is_empty() {
                bail!("no run records found under {}", runs.display());
            }
            let mut post_reports: BTreeMap<String, DetectionReport> = BTreeMap::new();
            if let Some(posts) = posts {
                for entry in sorted_json_files(&posts)? {
                    let report = parse_detection_report(&std::fs::read(&entry)?)?;
                    let agent = entry
                        .file_stem()
                        .map(|s| s.to_string_lossy().to_string())
                        .unwrap_or_default();
                    post_reports.insert(agent, report);
                }
            }
            let bundle = score_records(&records, &verdict_map, &benchmark, &pre, &post_reports)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("bundle.json"), to_canonical_string(&bundle)?)?;
            println!("{}", to_canonical_string(&emit_leaderboard(&bundle.reports))?);
        }
        Command::Report { bundle, out } => {
            let bundle: smellbench::report::ScoredBundle =
                serde_json::from_slice(&std::fs::read(&bundle)?)?;
            let files = emit_report(&bundle, &out)?;
            for file in files {
                println!("{}", file.display());
            }
        }
        Command::DiffReports { pre, post } => {
            let pre = parse_detection_report(&std::fs::read(&pre)?)?;
            let post = parse_detection_report(&std::fs::read(&post)?)?;
            println!("{}", to_canonical_string(&diff_reports(&pre, &post))?);
        }
        Command::OptimizePrompts {
            out,
            generations,
            candidates,
            seed,
            log,
        } => {
            let budget = Budget {
                generations: generations.unwrap_or(light_budget().generations),
                candidates_per_generation: candidates.unwrap_or(light_budget().candidates_per_generation),
            };
            let mut entries = BTreeMap::new();
            let mut full_log = String::new();
            for smell_type in SmellType::BENCHMARK_ELIGIBLE {
                let config = OptimizerConfig::new(baseline_candidate(smell_type), budget, seed);
                let judge = TokenJudge::new(judge_tokens(smell_type));
                let outcome = evolve(&config, &TokenInsertingGenerator, &judge, &EchoReflector)?;
                full_log.push_str(&history_to_ndjson(&outcome.history));
                full_log.push('\n');
                entries.insert(
                    smell_type,
                    PlaybookEntry {
                        playbook: outcome.best.playbook,
                        demonstrations: outcome.best.demonstrations,
                    },
                );
                eprintln!("{smell_type}: best compound {:.4}", outcome.best_score);
            }
            let library = PlaybookLibrary::new(entries)?;
            std::fs::write(&out, to_canonical_string(&library)?)?;
            if let Some(log_path) = log {
                std::fs::write(&log_path, full_log)?;
            }
            eprintln!("wrote playbook library to {}", out.display());
        }
        Command::ResetBlocked { journal, task } => {
            let events = read_events(std::io::BufReader::new(std::fs::File::open(&journal)?))?;
            let mut store = replay(&events)?;
            let file = OpenOptions::new().append(true).open(&journal)?;
            store.attach_journal(Journal::new(Box::new(file)));
            store.reset_blocked(&task, SystemClock.now_ms())?;
            println!("task {task} reset to not_handled");
        }
        Command::Stats(stats) => run_stats(stats)?,
    }
    Ok(())
}

fn run_stats(command: StatsCommand) -> Result<()> {
    match command {
        StatsCommand::Bootstrap {
            input,
            resamples,
            alpha,
            seed,
        } => {
            let samples: Vec<f64> = read_json(&input)?;
            let (lo, hi) = bootstrap_ci(&samples, resamples, alpha, seed)?;
            println!("{}", serde_json::json!({"lo": lo, "hi": hi}));
        }
        StatsCommand::CohenKappa {
            a,
            b,
            categories,
            weighting,
        } => {
            let a: Vec<usize> = read_json(&a)?;
            let b: Vec<usize> = read_json(&b)?;
            let scale = OrdinalScale::new((0..categories).map(|i| i.to_string()).collect())?;
            let weighting = match weighting {
                WeightingArg::None => Weighting::None,
                WeightingArg::Quadratic => Weighting::Quadratic,
            };
            let result = cohen_kappa(&a, &b, weighting, &scale)?;
            println!(
                "{}",
                serde_json::json!({"kappa": result.value, "degenerate": result.degenerate})
            );
        }
        StatsCommand::FleissKappa { input } => {
            let counts: Vec<Vec<usize>> = read_json(&input)?;
            let result = fleiss_kappa(&counts)?;
            println!(
                "{}",
                serde_json::json!({"kappa": result.value, "degenerate": result.degenerate})
            );
        }
        StatsCommand::KendallW { input } => {
            let ranks: Vec<Vec<f64>> = read_json(&input)?;
            let result = kendall_w(&RankTable::new(ranks)?);
            println!(
                "{}",
                serde_json::json!({"w": result.w, "chi2": result.chi2, "df": result.df})
            );
        }
        StatsCommand::Wilcoxon { x, y, method } => {
            let x: Vec<f64> = read_json(&x)?;
            let y: Vec<f64> = read_json(&y)?;
            let method = match method {
                MethodArg::Auto => WilcoxonMethod::Auto,
                MethodArg::Exact => WilcoxonMethod::Exact,
                MethodArg::Approx => WilcoxonMethod::Approximate,
            };
            let result = wilcoxon_signed_rank_with(&x, &y, method)?;
            println!(
                "{}",
                serde_json::json!({
                    "statistic": result.statistic,
                    "p": result.p_value,
                    "exact": result.exact,
                    "all_zero": result.all_zero,
                })
            );
        }
        StatsCommand::Holm { input } => {
            let p: Vec<f64> = read_json(&input)?;
            println!("{}", serde_json::to_string(&holm_adjust(&p)?)?);
        }
        StatsCommand::CliffsDelta { a, b } => {
            let a: Vec<f64> = read_json(&a)?;
            let b: Vec<f64> = read_json(&b)?;
            println!(
                "{}",
                serde_json::json!({"delta": cliffs_delta(&a, &b)?})
            );
        }
    }
    Ok(())
}

fn parse_types(spec: Option<&str>) -> Result<BTreeSet<SmellType>> {
    match spec {
        None => Ok(SmellType::BENCHMARK_ELIGIBLE.into_iter().collect()),
        Some(spec) => spec
            .split(',')
            .map(|name| {
                serde_json::from_value(serde_json::Value::String(name.trim().to_string()))
                    .with_context(|| format!("unknown smell type {name:?}"))
            })
            .collect(),
    }
}

fn sorted_json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, contents)?,
        None => println!("{contents}"),
    }
    Ok(())
}


fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = if path == Path::new("-") {
        use std::io::Read;
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        buf
    } else {
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?
    };
    Ok(serde_json::from_slice(&bytes)?)
}

/// Token sets the mock judge rewards per smell type: refinement guidance
/// the evolved playbooks should carry.
fn judge_tokens(smell_type: SmellType) -> Vec<String> {
    let shared = ["verify imports of every touched module"];
    let specific: &[&str] = match smell_type {
        SmellType::ScatteredFunctionality => {
            &["pick one owner module before moving code", "move helpers in dependency order"]
        }
        SmellType::RedundantAbstraction => {
            &["diff the two implementations line by line", "redirect callers before deleting"]
        }
        SmellType::UnstableDependency => {
            &["compute the dependency direction first", "move shared types into a base module"]
        }
        SmellType::ImproperApiUsage => {
            &["design the wrapper signature first", "migrate call sites in batches"]
        }
        SmellType::GodObject => {
            &["group public functions by responsibility", "extract one responsibility at a time"]
        }
        SmellType::HubLikeDependency | SmellType::CyclicDependency => &[],
    };
    shared
        .iter()
        .chain(specific)
        .map(|s| s.to_string())
        .collect()
}
