mod render;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use threadloom_core::engine::{Engine, EngineConfig, EngineError, ErrorKind, ExportFormat, MetadataMode, OpenPaper};
use threadloom_core::geometry::{PageRect, Rect};
use threadloom_core::linker::{Highlight, ViewportTransform};
use threadloom_core::store::{CommitMode, PaperRef};

#[derive(Parser)]
#[command(name = "threadloom", version, about = "Organize reading into threads of clips and references")]
struct Cli {
    /// Storage root.
    #[arg(long, env = "THREADLOOM_HOME", global = true, default_value = ".threadloom")]
    home: PathBuf,
    #[arg(long, value_enum, global = true, default_value_t = Output::Text)]
    output: Output,
    /// Fail with CONFLICT unless the workspace is at this revision.
    #[arg(long, global = true)]
    expect_revision: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Write a config.toml under the home directory.
    Init(InitArgs),
    /// Ingest a document parse (native JSON or TEI XML).
    Ingest { file: PathBuf },
    /// Register a document as the opened paper.
    Open { doc_id: String },
    /// Highlight a rectangle and load its citation context into the tank.
    Extract {
        doc_id: String,
        #[arg(long)]
        page: u32,
        /// x,y,w,h
        #[arg(long, value_parser = parse_rect)]
        rect: Rect,
        /// Units per document point of the rectangle.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Capture an image region into the tank.
    Area {
        doc_id: String,
        #[arg(long)]
        page: u32,
        #[arg(long, value_parser = parse_rect)]
        rect: Rect,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Inspect or file the holding tank.
    #[command(subcommand)]
    Tank(TankCommand),
    /// Manage threads.
    #[command(subcommand)]
    Thread(ThreadCommand),
    /// Manage paper references inside threads.
    #[command(subcommand)]
    Paper(PaperCommand),
    /// Edit a clip's text.
    Clip { clip_id: String, text: String },
    /// Rank existing threads for a piece of text.
    Suggest {
        text: String,
        #[arg(short, default_value_t = threadloom_core::suggest::DEFAULT_SUGGESTIONS)]
        k: usize,
    },
    /// Show, refresh, or adopt paper recommendations for a thread.
    Recommend {
        thread_id: String,
        #[arg(long)]
        refresh: bool,
        /// Add a recommended paper to the thread.
        #[arg(long, value_name = "PAPER_ID")]
        add: Option<String>,
    },
    /// Thread outline with recommendations.
    Overview { thread_id: String },
    /// Outline of one thread, or of the whole drawer.
    Export {
        thread_id: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Outline)]
        format: Format,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, value_enum, default_value_t = Mode::Http)]
    metadata: Mode,
    #[arg(long)]
    fixture_dir: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    workspace: Option<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Http,
    Corpus,
    Fixture,
    Offline,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Outline,
    Json,
}

#[derive(Subcommand)]
enum TankCommand {
    Show,
    Deselect { key: String },
    Reselect { key: String },
    /// File the tank: exactly one of --new, --refs-to, --clip-to.
    Commit(CommitArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CommitArgs {
    /// New thread; the label defaults to one derived from the context.
    #[arg(long, value_name = "LABEL", num_args = 0..=1, default_missing_value = "")]
    new: Option<String>,
    #[arg(long, value_name = "THREAD_ID")]
    refs_to: Option<String>,
    #[arg(long, value_name = "THREAD_ID")]
    clip_to: Option<String>,
}

#[derive(Subcommand)]
enum ThreadCommand {
    Ls,
    New {
        label: String,
        #[arg(long)]
        parent: Option<String>,
    },
    Show { thread_id: String },
    /// Move under another thread, or to the top level without --parent.
    Mv {
        thread_id: String,
        #[arg(long)]
        parent: Option<String>,
        #[arg(long)]
        position: Option<usize>,
    },
    Rm {
        thread_id: String,
        /// Needed when the thread is not empty.
        #[arg(long)]
        confirm: bool,
    },
    Rename { thread_id: String, label: String },
}

#[derive(Subcommand)]
enum PaperCommand {
    Add {
        thread_id: String,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Remove by identity (`id:<paper_id>` or `title:<normalized title>`).
    Rm { thread_id: String, identity: String },
    Mv { from: String, identity: String, to: String },
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err("expected x,y,w,h".into()),
    }
}

/// Result of one command: a JSON value and its text rendering.
struct Done {
    json: Value,
    text: String,
}

impl Done {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Done { json, text: text.into() }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Invalid => 2,
        ErrorKind::Conflict => 3,
        ErrorKind::NotFound => 4,
        ErrorKind::TooLarge => 5,
        ErrorKind::Upstream => 6,
        ErrorKind::Internal => 7,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("THREADLOOM_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(done) => {
            match cli.output {
                Output::Json => println!("{}", serde_json::to_string_pretty(&done.json).expect("json")),
                Output::Text if done.text.is_empty() => {}
                Output::Text => print!("{}{}", done.text, if done.text.ends_with('\n') { "" } else { "\n" }),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            match cli.output {
                Output::Json => {
                    println!("{}", json!({"error": {"code": e.code(), "message": e.to_string()}}))
                }
                Output::Text => eprintln!("error[{}]: {e}", e.code()),
            }
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn init(cli: &Cli, a: &InitArgs) -> Result<Done, EngineError> {
    let path = cli.home.join(threadloom_core::engine::CONFIG_FILE);
    if path.exists() && !a.force {
        return Err(EngineError::InvalidRequest(format!("{} exists; pass --force to overwrite", path.display())));
    }
    let mut cfg = EngineConfig::default();
    cfg.metadata.mode = match a.metadata {
        Mode::Http => MetadataMode::Http,
        Mode::Corpus => MetadataMode::Corpus,
        Mode::Fixture => MetadataMode::Fixture,
        Mode::Offline => MetadataMode::Offline,
    };
    cfg.metadata.fixture_dir = a.fixture_dir.clone();
    cfg.metadata.corpus = a.corpus.clone();
    if let Some(w) = &a.workspace {
        cfg.workspace = w.clone();
    }
    cfg.validate().map_err(EngineError::Config)?;
    let text = toml::to_string_pretty(&cfg).map_err(|e| EngineError::Config(e.to_string()))?;
    std::fs::create_dir_all(&cli.home).map_err(|e| EngineError::Io(e.to_string()))?;
    std::fs::write(&path, &text).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))?;
    Ok(Done::new(json!({"config": path}), format!("wrote {}", path.display())))
}

fn serve(engine: Engine, bind: Option<&str>, port: Option<u16>) -> Result<Done, EngineError> {
    let svc = &engine.config().service;
    let addr = format!("{}:{}", bind.unwrap_or(&svc.bind), port.unwrap_or(svc.port));
    let addr: std::net::SocketAddr =
        addr.parse().map_err(|e| EngineError::InvalidRequest(format!("bad address `{addr}`: {e}")))?;
    let engine = Arc::new(engine);
    let rt = tokio::runtime::Runtime::new().map_err(|e| EngineError::Io(e.to_string()))?;
    eprintln!("serving on http://{addr}");
    rt.block_on(threadloom_server::serve(engine.clone(), addr)).map_err(|e| EngineError::Io(e.to_string()))?;
    drop(rt);
    Ok(Done::new(json!({"stopped": true}), ""))
}

fn run(cli: &Cli) -> Result<Done, EngineError> {
    if let Command::Init(a) = &cli.command {
        return init(cli, a);
    }
    let e = Engine::open(&cli.home)?;
    let rev = cli.expect_revision;
    Ok(match &cli.command {
        Command::Init(_) => unreachable!(),
        Command::Serve { bind, port } => return serve(e, bind.as_deref(), *port),
        Command::Ingest { file } => {
            let raw = std::fs::read(file).map_err(|err| EngineError::Io(format!("{}: {err}", file.display())))?;
            let s = e.ingest(&raw)?;
            Done::new(to_json(&s), render::summary(&s))
        }
        Command::Open { doc_id } => {
            let m = e.open_paper(rev, &OpenPaper::Document { doc_id: doc_id.clone() })?;
            Done::new(json!({"revision": m.revision, "identity": m.value}), format!("opened {}", m.value))
        }
        Command::Extract { doc_id, page, rect, scale } => {
            let t = e.extract(rev, doc_id, *page, *rect, *scale)?;
            Done::new(to_json(&t), render::tank(&t))
        }
        Command::Area { doc_id, page, rect, image, scale } => {
            let bytes = std::fs::read(image).map_err(|err| EngineError::Io(format!("{}: {err}", image.display())))?;
            let pages = e.document(doc_id)?.pages.len();
            let h = Highlight::area(doc_id, PageRect::new(*page, *rect));
            let t = e.highlight(rev, &h, Some(&ViewportTransform::scaled(*scale, pages)), Some(bytes))?;
            Done::new(to_json(&t), render::tank(&t))
        }
        Command::Tank(cmd) => tank(&e, rev, cmd)?,
        Command::Thread(cmd) => thread(&e, rev, cmd)?,
        Command::Paper(cmd) => paper(&e, rev, cmd)?,
        Command::Clip { clip_id, text } => {
            let m = e.edit_clip(rev, clip_id, text)?;
            Done::new(json!({"revision": m.revision}), format!("edited {clip_id}"))
        }
        Command::Suggest { text, k } => {
            let s = e.suggest(text, *k);
            Done::new(to_json(&s), render::suggestions(&s))
        }
        Command::Recommend { thread_id, refresh, add } => {
            if let Some(paper_id) = add {
                let m = e.add_recommendation(rev, thread_id, paper_id)?;
                Done::new(json!({"revision": m.revision, "identity": m.value}), format!("added {} to {thread_id}", m.value))
            } else {
                let set = if *refresh { Some(e.refresh_recommendations(thread_id)?) } else {
                    e.thread(thread_id)?;
                    e.recommendations(thread_id)?
                };
                let text = match &set {
                    Some(s) => render::recommendations(s),
                    None => format!("no recommendations for {thread_id}; run with --refresh"),
                };
                Done::new(to_json(&set), text)
            }
        }
        Command::Overview { thread_id } => {
            let o = e.overview(thread_id)?;
            Done::new(to_json(&o), threadloom_core::discovery::render_overview(&o))
        }
        Command::Export { thread_id, format } => {
            let format = match format {
                Format::Outline => ExportFormat::Outline,
                Format::Json => ExportFormat::Json,
            };
            let content = e.export(thread_id.as_deref(), format)?;
            let json = match format {
                ExportFormat::Json => serde_json::from_str(&content).expect("export json parses"),
                ExportFormat::Outline => json!({"content": content}),
            };
            Done::new(json, content)
        }
    })
}

fn tank(e: &Engine, rev: Option<u64>, cmd: &TankCommand) -> Result<Done, EngineError> {
    let t = match cmd {
        TankCommand::Show => e.tank(),
        TankCommand::Deselect { key } => e.tank_deselect(rev, key)?,
        TankCommand::Reselect { key } => e.tank_reselect(rev, key)?,
        TankCommand::Commit(a) => {
            let mode = match (&a.new, &a.refs_to, &a.clip_to) {
                (Some(label), _, _) => CommitMode::NewThread { label: Some(label.clone()).filter(|l| !l.is_empty()) },
                (_, Some(target), _) => CommitMode::RefsTo { target: target.clone() },
                (_, _, Some(target)) => CommitMode::ClipTo { target: target.clone() },
                _ => unreachable!("clap requires one mode"),
            };
            let r = e.commit(rev, &mode)?;
            let text = format!("committed to {} (revision {})\n{}", r.thread_id, r.revision, render::drawer(&r.drawer));
            return Ok(Done::new(to_json(&r), text));
        }
    };
    Ok(Done::new(to_json(&t), render::tank(&t)))
}

fn thread(e: &Engine, rev: Option<u64>, cmd: &ThreadCommand) -> Result<Done, EngineError> {
    Ok(match cmd {
        ThreadCommand::Ls => {
            let d = e.drawer();
            Done::new(to_json(&d), render::drawer(&d))
        }
        ThreadCommand::New { label, parent } => {
            let m = e.create_thread(rev, label, parent.as_deref())?;
            Done::new(json!({"revision": m.revision, "thread_id": m.value}), format!("created {}", m.value))
        }
        ThreadCommand::Show { thread_id } => {
            let t = e.thread(thread_id)?;
            Done::new(to_json(&t), e.export(Some(thread_id), ExportFormat::Outline)?)
        }
        ThreadCommand::Mv { thread_id, parent, position } => {
            let m = e.move_thread(rev, thread_id, parent.as_deref(), *position)?;
            let dest = parent.as_deref().unwrap_or("top level");
            Done::new(json!({"revision": m.revision}), format!("moved {thread_id} to {dest}"))
        }
        ThreadCommand::Rm { thread_id, confirm } => {
            let m = e.delete_thread(rev, thread_id, *confirm)?;
            Done::new(json!({"revision": m.revision}), format!("deleted {thread_id}"))
        }
        ThreadCommand::Rename { thread_id, label } => {
            let m = e.rename_thread(rev, thread_id, label)?;
            Done::new(json!({"revision": m.revision}), format!("renamed {thread_id}"))
        }
    })
}

fn paper(e: &Engine, rev: Option<u64>, cmd: &PaperCommand) -> Result<Done, EngineError> {
    Ok(match cmd {
        PaperCommand::Add { thread_id, id, title, year } => {
            let p = PaperRef { paper_id: id.clone(), title: title.clone(), year: *year, ..Default::default() };
            let m = e.add_paper(rev, thread_id, p)?;
            Done::new(json!({"revision": m.revision, "identity": m.value}), format!("added {}", m.value))
        }
        PaperCommand::Rm { thread_id, identity } => {
            let m = e.remove_paper(rev, thread_id, identity)?;
            Done::new(json!({"revision": m.revision}), format!("removed {identity}"))
        }
        PaperCommand::Mv { from, identity, to } => {
            let m = e.move_paper(rev, from, identity, to)?;
            Done::new(json!({"revision": m.revision}), format!("moved {identity} to {to}"))
        }
    })
}
