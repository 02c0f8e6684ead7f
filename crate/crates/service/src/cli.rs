//! Command-line interface.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use metablend::blend::{BlendPair, ImagePrompt};
use metablend::studio::{pair_key, Session, Studio};
use serde::{Deserialize, Serialize};

use crate::api::{router, AppState, CanvasView, SessionSummary};
use crate::config::{Config, Flags};
use crate::error::ApiError;
use crate::providers::{build_engine, default_fixtures, slug, Mode};

#[derive(Debug, Parser)]
#[command(name = "metablend", version, about = "Visual-blend ideation from short expressions")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "METABLEND_CONFIG")]
    pub config: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Run the whole pipeline without interaction and write the results.
    Run(RunArgs),
    /// Run the pipeline against live providers, capturing fixtures.
    Record(RecordArgs),
    /// Inspect session files.
    #[command(subcommand)]
    Session(SessionCommand),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory for session files and images.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Replay fixtures instead of calling providers.
    #[arg(long)]
    pub offline: bool,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub expression: String,
    /// Pick pairs automatically. This is the only mode `run` has; the flag
    /// is accepted for explicitness.
    #[arg(long)]
    pub auto: bool,
    /// Replay fixtures instead of calling providers.
    #[arg(long)]
    pub offline: bool,
    /// Fixture directory (default `fixtures/<expression slug>`).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Output directory (default `out/<expression slug>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of blend schemes (1-5).
    #[arg(long)]
    pub schemes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long, short)]
    pub expression: String,
    /// Where to write fixtures (default `fixtures/<expression slug>`).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub schemes: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Print a session file.
    Show {
        file: PathBuf,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
}

/// What `run` and `record` print on success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub session: PathBuf,
    pub pair: BlendPair,
    pub prompts: Vec<ImagePrompt>,
    pub canvas: Vec<CanvasView>,
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_line());
            1
        }
    }
}

fn env_lookup(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

fn resolve(config: Option<&Path>, flags: Flags) -> Result<Config, ApiError> {
    Config::resolve(&flags, &env_lookup, config).map_err(|e| {
        ApiError::new(
            axum::http::StatusCode::INTERNAL_SERVER_ERROR,
            "ConfigError",
            e.to_string(),
        )
    })
}

fn execute(cli: Cli) -> Result<(), ApiError> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Serve(args) => {
            let cfg = resolve(
                config,
                Flags {
                    port: args.port,
                    data_dir: args.data_dir,
                    offline: args.offline,
                    fixtures: args.fixtures,
                    schemes: None,
                },
            )?;
            serve(&cfg, &args.host)
        }
        Command::Run(args) => {
            let out = args
                .out
                .unwrap_or_else(|| Path::new("out").join(slug(&args.expression)));
            let cfg = resolve(
                config,
                Flags {
                    data_dir: Some(out.clone()),
                    offline: args.offline,
                    fixtures: args.fixtures,
                    schemes: args.schemes,
                    ..Flags::default()
                },
            )?;
            let mode = if cfg.offline {
                Mode::Offline {
                    fixtures: cfg
                        .fixtures
                        .clone()
                        .unwrap_or_else(|| default_fixtures(&args.expression)),
                }
            } else {
                Mode::Live
            };
            let report = run_pipeline(&cfg, &mode, &args.expression, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Record(args) => {
            let out = args
                .out
                .unwrap_or_else(|| Path::new("out").join(slug(&args.expression)));
            let fixtures = args.fixtures.unwrap_or_else(|| default_fixtures(&args.expression));
            let cfg = resolve(
                config,
                Flags {
                    data_dir: Some(out.clone()),
                    schemes: args.schemes,
                    ..Flags::default()
                },
            )?;
            let report = run_pipeline(
                &cfg,
                &Mode::Record {
                    fixtures: fixtures.clone(),
                },
                &args.expression,
                &out,
            )?;
            eprintln!("fixtures written to {}", fixtures.display());
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Session(SessionCommand::Show { file, json }) => {
            let session = Session::load(&file).map_err(metablend::Error::from)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&SessionSummary::of(&session)).expect("summary serializes")
                );
            } else {
                print!("{}", describe(&session));
            }
            Ok(())
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> ApiError {
    metablend::Error::from(metablend::studio::StudioError::Io(format!("{}: {e}", path.display()))).into()
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ApiError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Runs the automatic pipeline and writes the session directory:
///
/// ```text
/// <out>/session.json
/// <out>/diagrams/objects.json
/// <out>/diagrams/attributes.json
/// <out>/prompts.json
/// <out>/prompts.txt
/// <out>/images/*.png
/// ```
///
/// The session id is the expression slug, so offline runs are byte-stable.
/// A failed run still writes whatever session state it reached.
pub fn run_pipeline(cfg: &Config, mode: &Mode, expression: &str, out: &Path) -> Result<RunReport, ApiError> {
    let engine = build_engine(cfg, mode)?;
    let studio = Studio::new(Arc::new(engine));
    let mut session = studio.create_session(&slug(expression), expression)?;
    let result = studio.run_auto(&mut session, cfg.schemes);
    let session_path = out.join("session.json");
    session.save(&session_path).map_err(metablend::Error::from)?;
    let auto = result?;

    if let Some(d) = &session.objects_diagram {
        write(&out.join("diagrams/objects.json"), d.to_json().as_bytes())?;
    }
    if let Some(d) = session
        .attribute_diagrams
        .get(&pair_key(&auto.pair.object_a, &auto.pair.object_b))
    {
        write(&out.join("diagrams/attributes.json"), d.to_json().as_bytes())?;
    }
    let prompts: Vec<ImagePrompt> = auto
        .prompt_ids
        .iter()
        .filter_map(|id| session.prompt(id).cloned())
        .collect();
    write(
        &out.join("prompts.json"),
        serde_json::to_string_pretty(&prompts)
            .expect("prompts serialize")
            .as_bytes(),
    )?;
    let text: Vec<&str> = prompts.iter().map(|p| p.text.as_str()).collect();
    write(&out.join("prompts.txt"), format!("{}\n", text.join("\n\n")).as_bytes())?;

    Ok(RunReport {
        session: session_path,
        pair: auto.pair,
        prompts,
        canvas: SessionSummary::of(&session).canvas,
    })
}

fn serve(cfg: &Config, host: &str) -> Result<(), ApiError> {
    let mode = if cfg.offline {
        let fixtures = cfg
            .fixtures
            .clone()
            .ok_or_else(|| ApiError::bad_request("--offline needs --fixtures DIR for serve"))?;
        Mode::Offline { fixtures }
    } else {
        Mode::Live
    };
    let engine = build_engine(cfg, &mode)?;
    let state = Arc::new(AppState::new(Arc::new(Studio::new(Arc::new(engine))), &cfg.data_dir));
    let addr: SocketAddr = format!("{host}:{}", cfg.port)
        .parse()
        .map_err(|e| ApiError::bad_request(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| ApiError::internal(format!("cannot bind {addr}: {e}")))?;
        log::warn!(
            "listening on http://{}",
            listener.local_addr().map_err(|e| ApiError::internal(e.to_string()))?
        );
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| ApiError::internal(e.to_string()))
    })
}

/// Human-readable session listing.
pub fn describe(s: &Session) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k:<12}{v}\n"));
    line(
        "session",
        format!(
            "{} (schema v{}, created {})",
            s.id,
            s.schema_version,
            s.created_at.to_rfc3339()
        ),
    );
    line("expression", format!("{:?}", s.expression.raw));
    line("selected", s.expression.selected_concepts().join(", "));
    if let Some(t) = &s.theme {
        line("theme", t.sentence.clone());
    }
    for (concept, list) in &s.candidates {
        let names: Vec<String> = list
            .iter()
            .map(|c| format!("{} [{}]", c.name, c.attributes.join(", ")))
            .collect();
        line(&format!("  {concept}"), names.join("; "));
    }
    line("prompts", s.prompts.len().to_string());
    for item in &s.canvas {
        line(
            "  canvas",
            format!(
                "{} at ({:.3}, {:.3}) x{}",
                item.prompt_id, item.coords[0], item.coords[1], item.count
            ),
        );
    }
    for h in s.list_history() {
        line(&format!("  #{}", h.seq), h.summary);
    }
    out
}
