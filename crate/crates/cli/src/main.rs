//! `dungeon`: play and teach against a running service, administer rounds,
//! and run the offline pipeline (pilot data, training, evaluation,
//! simulated MTD experiments, plots).

mod plot;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dungeon_api::{CreateSession, SessionMode, SessionView};
use dungeon_client::Client;
use dungeon_core::annotators::{generate_pilot, TemplateBank};
use dungeon_core::data::{read_jsonl, write_jsonl};
use dungeon_core::eval::{
    accuracy, accuracy_with, action_f1, breakdown_by_length, hits_at_ks, run_experiment, ExperimentConfig,
};
use dungeon_core::graphworld::{generate_world, render, valid_actions, Catalog};
use dungeon_core::models::{DecodeOptions, Hyperparameters, Model, ModelConfig, ModelFamily, MAX_ACTIONS};
use tokio::io::{AsyncBufReadExt, BufReader};

#[derive(Parser)]
#[command(name = "dungeon", version, about = "Text-adventure instruction following: client and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ServerArgs {
    /// Base URL of the service.
    #[arg(long, env = "DUNGEON_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
}

#[derive(Args)]
struct CatalogArgs {
    /// Catalog JSON; the built-in catalog when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

impl CatalogArgs {
    fn load(&self) -> Result<Catalog> {
        Ok(match &self.catalog {
            Some(p) => Catalog::load(p)?,
            None => Catalog::default(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Interactive session against the service.
    Play {
        #[command(flatten)]
        server: ServerArgs,
        #[arg(long)]
        annotator: String,
        /// Record examples instead of free play.
        #[arg(long)]
        teach: bool,
        /// Fixture world name, e.g. "walkthrough".
        #[arg(long)]
        world: Option<String>,
    },
    /// Current round status.
    Status {
        #[command(flatten)]
        server: ServerArgs,
    },
    /// Latest leaderboard.
    Leaderboard {
        #[command(flatten)]
        server: ServerArgs,
    },
    /// Close the open round, score it and open the next.
    Advance {
        #[command(flatten)]
        server: ServerArgs,
        #[arg(long, env = "ADMIN_TOKEN")]
        token: String,
    },
    /// Run the service in the foreground.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate and print a world.
    GenWorld {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the JSON document instead of the description.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Write template-generated pilot examples as JSON lines.
    Pilot {
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Train a model on JSON-lines examples.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// seq2seq or ac_seq2seq.
        #[arg(long, default_value = "ac_seq2seq")]
        family: ModelFamily,
        /// Use the small, fast hyperparameters.
        #[arg(long)]
        small: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Evaluate a saved model on JSON-lines examples.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulated multi-condition MTD experiment.
    MtdRun {
        /// Experiment config (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Directory for report.json, report.csv, curve.csv and manifests.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Learning-curve SVG from an mtd-run curve.csv.
    Plot {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_templates(path: Option<&Path>) -> Result<TemplateBank> {
    Ok(match path {
        Some(p) => TemplateBank::load(p)?,
        None => TemplateBank::default(),
    })
}

fn print_view(view: &SessionView) {
    println!("{}", view.render);
    if !view.pending.is_empty() {
        println!("[{} of {MAX_ACTIONS}] {}", view.pending.len(), view.pending.join(", "));
    }
}

async fn play(client: Client, annotator: String, teach: bool, world: Option<String>) -> Result<()> {
    let mode = if teach { SessionMode::Teach } else { SessionMode::Play };
    let session = client.create_session(&CreateSession { annotator, mode, round: None, world }).await?;
    println!("session {} (round {})", session.id, session.round);
    print_view(&session);
    if teach {
        println!("Type actions, then `teach <command>` to record them. `reset`, `actions`, `quit`.");
    }
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    loop {
        eprint!("> ");
        let Some(line) = lines.next_line().await? else { break };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "quit" || line == "exit" {
            break;
        }
        let result = if line == "actions" {
            client.session(&session.id).await.map(|v| println!("{}", v.valid_actions.join("\n")))
        } else if let Some(command) = line.strip_prefix("teach ") {
            client.teach(&session.id, command).await.map(|r| {
                println!("recorded {} ({:?})", r.example.id, r.feedback);
                if let Some(p) = r.predicted {
                    println!("model predicted: {}", p.join(", "));
                }
                print_view(&r.session);
            })
        } else {
            client.action(&session.id, line).await.map(|r| {
                println!("{}", r.message);
                if !r.session.pending.is_empty() {
                    println!("[{} of {MAX_ACTIONS}]", r.session.pending.len());
                }
            })
        };
        if let Err(e) = result {
            println!("{e}");
        }
    }
    Ok(())
}

fn train(
    data: &Path,
    out: &Path,
    family: ModelFamily,
    small: bool,
    epochs: Option<usize>,
    seed: u64,
    catalog: &Catalog,
) -> Result<()> {
    let examples = read_jsonl(data)?;
    let mut hyper = if small { Hyperparameters::small() } else { Hyperparameters::default() };
    if let Some(e) = epochs {
        hyper.max_epochs = e;
        hyper.min_epochs = hyper.min_epochs.min(e);
    }
    let (model, report) = Model::fit(ModelConfig::new(family, hyper), catalog, &examples, seed)?;
    model.save(out)?;
    println!(
        "trained {} on {} examples: {} epochs, best {} ({:.3} on {})",
        family.as_str(),
        examples.len(),
        report.epochs_run,
        report.best_epoch,
        report.monitor.get(report.best_epoch.saturating_sub(1)).copied().unwrap_or(0.0),
        if report.monitored_on_dev { "dev" } else { "train" }
    );
    Ok(())
}

fn eval(model: &Path, data: &Path, seed: u64) -> Result<()> {
    let model = Model::load(model)?;
    let test = read_jsonl(data)?;
    println!("examples      {}", test.len());
    println!("accuracy      {:.4}", accuracy(&model, &test)?);
    let unconstrained = DecodeOptions { constrained: false, ..model.default_decode() };
    println!("unconstrained {:.4}", accuracy_with(&model, &test, unconstrained)?);
    println!("action f1     {:.4}", action_f1(&model, &test)?);
    if test.len() >= 100 {
        let ks = [1, 5, 10];
        for (k, v) in ks.iter().zip(hits_at_ks(&model, &test, &ks, seed)?) {
            println!("hits@{k:<9} {v:.4}");
        }
    }
    for (len, b) in breakdown_by_length(&model, &test)? {
        println!("length {len}      {:.4} ({} examples)", b.accuracy, b.count);
    }
    Ok(())
}

fn mtd_run(config: &Path, out: &Path, templates: Option<&Path>, catalog: &Catalog) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let config: ExperimentConfig = if config.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    let bank = load_templates(templates)?;
    let (report, outcomes) = run_experiment(&config, catalog, &bank)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    std::fs::write(out.join("report.csv"), report.to_csv())?;
    std::fs::write(out.join("curve.csv"), report.curve_csv())?;
    for o in &outcomes {
        for (condition, manifest) in &o.manifests {
            std::fs::write(out.join(format!("manifest-{}-{}.json", o.seed, condition.as_str())), manifest.to_json())?;
        }
        write_jsonl(&out.join(format!("held-out-{}.jsonl", o.seed)), &o.held_out)?;
    }
    for c in &report.conditions {
        let acc = &c.metrics["accuracy"];
        println!("{:<22} accuracy {:.4} ± {:.4}", c.condition.as_str(), acc.mean, acc.std);
    }
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Play { server, annotator, teach, world } => play(Client::new(server.server), annotator, teach, world).await,
        Command::Status { server } => {
            let s = Client::new(server.server).round().await?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(())
        }
        Command::Leaderboard { server } => {
            let board = Client::new(server.server).leaderboard().await?;
            match board.round {
                None => println!("no completed rounds"),
                Some(r) => {
                    println!("round {r}");
                    for e in board.entries {
                        println!("{:>3}. {:<20} {:.4}{}", e.rank, e.annotator, e.score, if e.bonus { "  bonus" } else { "" });
                    }
                }
            }
            Ok(())
        }
        Command::Advance { server, token } => {
            let r = Client::new(server.server).with_admin_token(token).advance().await?;
            println!("completed round {}; round {} is open", r.completed_round, r.status.round);
            if !r.excluded.is_empty() {
                println!("excluded from the merge: {}", r.excluded.join(", "));
            }
            Ok(())
        }
        Command::Serve { config } => {
            let config = dungeon_service::ServiceConfig::load(config.as_deref())?;
            let port = config.port;
            let service = tokio::task::spawn_blocking(move || dungeon_service::Service::open(config)).await??;
            let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
            dungeon_service::serve(listener, service).await
        }
        Command::GenWorld { seed, json, catalog } => {
            let world = generate_world(seed, &catalog.load()?)?;
            if json {
                println!("{}", world.to_json());
            } else {
                println!("{}", render(&world));
                println!("\nvalid actions:");
                for a in valid_actions(&world) {
                    println!("  {a}");
                }
            }
            Ok(())
        }
        Command::Pilot { count, seed, out, templates, catalog } => {
            let examples = generate_pilot(count, &catalog.load()?, &load_templates(templates.as_deref())?, seed)?;
            write_jsonl(&out, &examples)?;
            println!("wrote {} examples to {}", examples.len(), out.display());
            Ok(())
        }
        Command::Train { data, out, family, small, epochs, seed, catalog } => {
            train(&data, &out, family, small, epochs, seed, &catalog.load()?)
        }
        Command::Eval { model, data, seed } => eval(&model, &data, seed),
        Command::MtdRun { config, out, templates, catalog } => {
            let catalog = catalog.load()?;
            tokio::task::block_in_place(|| mtd_run(&config, &out, templates.as_deref(), &catalog))
        }
        Command::Plot { curve, out } => {
            let text = std::fs::read_to_string(&curve)?;
            let series = plot::parse_curve(&text)?;
            if series.is_empty() {
                bail!("{} has no curve rows", curve.display());
            }
            plot::learning_curve(&series, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
