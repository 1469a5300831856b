use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use ideaforge::corpus::{load_ideas, save_ideas};
use ideaforge::gateway::{
    harmonize_idea, ChatGateway, EchoGateway, EndpointConfig, HttpChatGateway, HARMONIZE_MODEL, HARMONIZE_USER_TEMPLATE,
};
use ideaforge::runner::{
    analyze_paths, build_report, replay, run_experiment, score_files, transcript_files, write_analysis, write_report,
    AnalyzeConfig, GroupBy, ReplayVerdict, ReportOptions, RunConfig, RunMode, RunnerError,
};
use ideaforge::stats::{read_scores, write_scores, CreativityMode, NormalizationMode, TTestVariant};
use ideaforge::trajectory::read_features;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "ideaforge", version, about = "Multi-agent ideation runs, trajectory features and creativity scoring")]
struct Cli {
    /// Log filter, e.g. "info" or "ideaforge=debug". Overrides RUST_LOG.
    #[arg(long, global = true)]
    log: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Source,
    Discussion,
    Condition,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured conditions and write transcripts, ideas and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Force mock mode regardless of the config.
        #[arg(long)]
        mock: bool,
    },
    /// Embed discussion turns and write the trajectory feature CSV.
    Analyze {
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Output directory; defaults to the transcripts directory's parent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalize judge ratings and compute creativity scores.
    Score {
        #[arg(long)]
        ideas: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
        /// Also fill the additive (N + U) creativity column.
        #[arg(long)]
        additive: bool,
        /// Min-max each judge before averaging.
        #[arg(long)]
        per_judge: bool,
        #[arg(long, default_value = "scores.csv")]
        out: PathBuf,
    },
    /// Rewrite final ideas into a uniform style before judging.
    Harmonize {
        #[arg(long)]
        ideas: PathBuf,
        /// Endpoint TOML for the harmonization model.
        #[arg(long, conflicts_with = "mock")]
        endpoint: Option<PathBuf>,
        /// Use an echo gateway instead of a live endpoint.
        #[arg(long)]
        mock: bool,
        /// Defaults to `<ideas stem>.harmonized.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Descriptives, group comparisons, standardized betas, VIF and plot CSVs.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "source")]
        group_by: GroupArg,
        /// Welch's t-test instead of the pooled Student test.
        #[arg(long)]
        welch: bool,
    },
    /// Re-execute a mock run and compare transcripts byte for byte.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    RunnerError::Config(e.to_string()).into()
}

fn run(config: &Path, mock: bool) -> anyhow::Result<u8> {
    let mut config = RunConfig::load(config).map_err(|e| match e {
        RunnerError::Io { .. } => config_error(e),
        e => e.into(),
    })?;
    if mock {
        config.mode = RunMode::Mock;
        config.endpoints.clear();
    }
    let outcome = run_experiment(&config)?;
    println!(
        "{} conversations executed, {} resumed, {} failed; manifest {}",
        outcome.executed,
        outcome.resumed,
        outcome.manifest.failures.len(),
        outcome.manifest_path.display()
    );
    for f in &outcome.manifest.failures {
        eprintln!("failed: {f}");
    }
    Ok(if outcome.has_failures() { EXIT_PARTIAL } else { 0 })
}

fn analyze(transcripts: &Path, embeddings: &Path, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let config = AnalyzeConfig::load(embeddings).map_err(|e| match e {
        RunnerError::Io { .. } => config_error(e),
        e => e.into(),
    })?;
    let paths = if transcripts.is_dir() { transcript_files(transcripts)? } else { vec![transcripts.to_path_buf()] };
    let outcome = analyze_paths(&paths, &config)?;
    let out = out.unwrap_or_else(|| {
        let base = if transcripts.is_dir() { transcripts } else { transcripts.parent().unwrap_or(Path::new(".")) };
        base.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    });
    for path in write_analysis(&outcome, &out)? {
        println!("wrote {}", path.display());
    }
    for e in &outcome.excluded {
        println!("skipped {}: {}", e.conversation_id, e.reason);
    }
    let s = outcome.stats;
    println!(
        "{} conversations featurized; {} texts embedded, {} cache hits, {} requests",
        outcome.rows.len(),
        s.texts_embedded,
        s.cache_hits,
        s.network_requests
    );
    Ok(0)
}

fn score(ideas: &Path, ratings: &Path, additive: bool, per_judge: bool, out: &Path) -> anyhow::Result<u8> {
    let normalization = if per_judge { NormalizationMode::PerJudge } else { NormalizationMode::JudgeMean };
    let mode = if additive { CreativityMode::Additive } else { CreativityMode::Product };
    let outcome = score_files(ideas, ratings, normalization, mode)?;
    let file = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_scores(&outcome.rows, file)?;
    for (id, reason) in &outcome.dropped {
        println!("dropped {id}: {reason:?}");
    }
    for (task, dim) in &outcome.degenerate {
        println!("warning: all {dim} ratings equal in task {task}; normalized to 0");
    }
    println!("{} ideas scored, {} dropped; wrote {}", outcome.rows.len(), outcome.dropped.len(), out.display());
    Ok(0)
}

fn harmonize(ideas_path: &Path, endpoint: Option<PathBuf>, mock: bool, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let gateway: Box<dyn ChatGateway> = if mock {
        Box::new(EchoGateway::stripping(HARMONIZE_USER_TEMPLATE.trim_end_matches("{idea}")))
    } else {
        let path = endpoint.ok_or_else(|| config_error("harmonize needs --endpoint FILE or --mock"))?;
        let text = std::fs::read_to_string(&path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let cfg: EndpointConfig = toml::from_str(&text).map_err(config_error)?;
        Box::new(HttpChatGateway::from_env(cfg).map_err(RunnerError::from)?)
    };
    let file = std::fs::File::open(ideas_path).with_context(|| format!("opening {}", ideas_path.display()))?;
    let ideas = load_ideas(file)?;
    let mut done = Vec::with_capacity(ideas.len());
    let mut failed = 0;
    for idea in &ideas {
        match harmonize_idea(idea, gateway.as_ref(), HARMONIZE_MODEL) {
            Ok(h) => {
                if h.style_violation {
                    println!("style: {} uses first- or second-person wording", h.idea.idea_id);
                }
                done.push(h.idea);
            }
            Err(e) => {
                failed += 1;
                eprintln!("failed: {}: {e}", idea.idea_id);
                done.push(idea.clone());
            }
        }
    }
    let out = out.unwrap_or_else(|| {
        let stem = ideas_path.file_stem().and_then(|s| s.to_str()).unwrap_or("ideas");
        ideas_path.with_file_name(format!("{stem}.harmonized.jsonl"))
    });
    let mut buf = Vec::new();
    save_ideas(&done, &mut buf)?;
    std::fs::write(&out, buf).with_context(|| format!("writing {}", out.display()))?;
    println!("{} ideas harmonized, {failed} failed; wrote {}", ideas.len() - failed, out.display());
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn report(scores: &Path, features: Option<PathBuf>, out: &Path, group_by: GroupArg, welch: bool) -> anyhow::Result<u8> {
    let rows = read_scores(std::fs::File::open(scores).with_context(|| format!("opening {}", scores.display()))?)?;
    let features = match features {
        Some(p) => Some(read_features(std::fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    let options = ReportOptions {
        group_by: match group_by {
            GroupArg::Source => GroupBy::Source,
            GroupArg::Discussion => GroupBy::Discussion,
            GroupArg::Condition => GroupBy::Condition,
        },
        t_test: if welch { TTestVariant::Welch } else { TTestVariant::Pooled },
        ..ReportOptions::default()
    };
    let report = build_report(&rows, features.as_deref(), &options)?;
    for n in &report.notes {
        println!("note: {n}");
    }
    for path in write_report(&report, out)? {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn replay_cmd(manifest: &Path) -> anyhow::Result<u8> {
    match replay(manifest)? {
        ReplayVerdict::Pass { conversations } => {
            println!("PASS: {conversations} transcripts reproduced byte for byte");
            Ok(0)
        }
        ReplayVerdict::Fail { conversation_id, detail } => {
            println!("FAIL at {conversation_id}: {detail}");
            Ok(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config, mock } => run(&config, mock),
        Command::Analyze { transcripts, embeddings, out } => analyze(&transcripts, &embeddings, out),
        Command::Score { ideas, ratings, additive, per_judge, out } => score(&ideas, &ratings, additive, per_judge, &out),
        Command::Harmonize { ideas, endpoint, mock, out } => harmonize(&ideas, endpoint, mock, out),
        Command::Report { scores, features, out, group_by, welch } => report(&scores, features, &out, group_by, welch),
        Command::Replay { manifest } => replay_cmd(&manifest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = cli
        .log
        .clone()
        .map(tracing_subscriber::EnvFilter::new)
        .unwrap_or_else(|| tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<RunnerError>().is_some_and(RunnerError::is_config);
            ExitCode::from(if config { EXIT_CONFIG } else { 1 })
        }
    }
}
