use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rallyanchor::{router, AppState, Config};
use rallyanchor_core::metrics::evaluate;
use rallyanchor_core::pipeline::run_and_store;
use rallyanchor_core::store::{export, replay, ExportFormat, Repository, SystemClock};
use rallyanchor_core::synth::{generate_match, GroundTruth};
use rallyanchor_core::track::{parse_track_file, validate, write_track_file};
use serde::Serialize;
use tower_http::cors::CorsLayer;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "rallyanchor", version, about = "Event anchors for table tennis video annotation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set pipeline.min_conf=0.6`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a track file without storing anything.
    Ingest { track: PathBuf },
    /// Run the full pipeline on a track file and store the match.
    Detect { track: PathBuf },
    /// Serve the HTTP API over the data directory.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Write a stored match, with its log applied, as newline-delimited JSON.
    Export {
        match_id: String,
        /// `anchors` or `annotations`.
        #[arg(long, default_value = "anchors")]
        format: ExportFormat,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Score a stored match against a ground-truth file from `synth`.
    Eval {
        match_id: String,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Generate a synthetic match: a track file and its ground truth.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        games: Option<u32>,
        #[arg(long)]
        rallies_per_game: Option<u32>,
        /// Track file to write.
        #[arg(long)]
        out: PathBuf,
        /// Ground truth JSON to write.
        #[arg(long)]
        truth: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn ingest(track: &Path) -> Result<()> {
    let parsed = parse_track_file(&read(track)?[..]).context("ingest")?;
    let report = validate(&parsed.track_set);
    let ts = &parsed.track_set;
    print_json(&serde_json::json!({
        "frame_count": ts.meta.frame_count,
        "ball_samples": ts.ball.len(),
        "pose_frames": ts.poses.len(),
        "score_readings": ts.scores.len(),
        "scene_labels": ts.scenes.len(),
        "has_court": ts.court.is_some(),
        "issues": parsed.report.issues,
        "violations": report.violations,
    }))
}

fn detect(cfg: &Config, track: &Path) -> Result<()> {
    let repo = Repository::new(&cfg.data_dir);
    let (out, created) = match run_and_store(&repo, &read(track)?, &cfg.pipeline) {
        Ok(v) => v,
        Err(e) => bail!("{e} [{}]", e.code()),
    };
    let events: usize = out.events.iter().map(|(_, e)| e.len()).sum();
    print_json(&serde_json::json!({
        "match_id": out.state.info.match_id,
        "created": created,
        "games": out.games.len(),
        "rallies": out.state.rallies.len(),
        "events": events,
        "ingest_issues": out.ingest.issues.len(),
        "warnings": out.warnings,
    }))
}

fn load_live(cfg: &Config, match_id: &str) -> Result<rallyanchor_core::MatchState> {
    let repo = Repository::new(&cfg.data_dir);
    let base = repo.load_base(match_id)?;
    let log = repo.load_log(match_id)?;
    Ok(replay(&base, &cfg.vocabulary, &log)?)
}

fn synth(cfg: &Config, seed: Option<u64>, games: Option<u32>, rallies: Option<u32>, out: &Path, truth: &Path) -> Result<()> {
    let mut sc = cfg.synth;
    sc.seed = seed.unwrap_or(sc.seed);
    sc.games = games.unwrap_or(sc.games);
    sc.rallies_per_game = rallies.unwrap_or(sc.rallies_per_game);
    let m = generate_match(&sc)?;
    let mut bytes = Vec::new();
    write_track_file(&m.track, &mut bytes)?;
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    let mut json = serde_json::to_vec_pretty(&m.truth)?;
    json.push(b'\n');
    fs::write(truth, json).with_context(|| format!("writing {}", truth.display()))?;
    print_json(&serde_json::json!({
        "seed": sc.seed,
        "rallies": m.truth.rallies.len(),
        "events": m.truth.events.len(),
        "frame_count": m.track.meta.frame_count,
    }))
}

async fn serve(cfg: &Config, listen: Option<String>) -> Result<()> {
    let state = AppState::new(
        Repository::new(&cfg.data_dir),
        cfg.vocabulary.clone(),
        Arc::new(SystemClock),
        cfg.hints,
        cfg.author.clone(),
    );
    let app = router(Arc::new(state)).layer(CorsLayer::permissive());
    let addr = listen.unwrap_or_else(|| cfg.listen.clone());
    let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;

    match cli.command {
        Command::Ingest { track } => ingest(&track),
        Command::Detect { track } => detect(&cfg, &track),
        Command::Serve { listen } => tokio::runtime::Runtime::new()?.block_on(serve(&cfg, listen)),
        Command::Export { match_id, format, out } => {
            let bytes = export(&load_live(&cfg, &match_id)?, format);
            match out {
                Some(p) => fs::write(&p, bytes).with_context(|| format!("writing {}", p.display())),
                None => Ok(std::io::stdout().lock().write_all(&bytes)?),
            }
        }
        Command::Eval { match_id, truth } => {
            let truth: GroundTruth = serde_json::from_slice(&read(&truth)?).context("parsing ground truth")?;
            let state = load_live(&cfg, &match_id)?;
            let report = evaluate(&state, &truth, cfg.tolerance);
            print_json(&serde_json::json!({
                "match_id": match_id,
                "rally_accuracy": report.rally_accuracy(),
                "report": report,
            }))
        }
        Command::Synth { seed, games, rallies_per_game, out, truth } => {
            synth(&cfg, seed, games, rallies_per_game, &out, &truth)
        }
    }
}
