use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use qhub::api;
use qhub::pipeline::FileOutcome;
use qhub::store::Store;
use qhub::{Hub, HubConfig};
use qhub_core::submission::{parse_submission, parse_submission_filename, ParseOptions};
use qhub_core::{RoundSpec, TargetKind};

#[derive(Parser)]
#[command(name = "hub", about = "Run a weekly quantile forecasting challenge")]
struct Cli {
    /// Challenge store directory.
    #[arg(long, global = true, default_value = ".")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a new store from a config file.
    Init {
        #[arg(long)]
        config: PathBuf,
    },
    /// Open the round for a Wednesday.
    OpenRound { date: NaiveDate },
    /// Ingest every file in a directory into a round.
    Ingest {
        date: NaiveDate,
        dir: PathBuf,
        /// Sort non-monotone quantile rows instead of rejecting the file.
        #[arg(long)]
        repair_sort: bool,
    },
    /// Merge an index price CSV into the store.
    LoadPrices { file: PathBuf },
    /// Merge a station observation CSV into the store.
    LoadObservations { target: TargetKind, file: PathBuf },
    /// Merge NWP ensemble files (a file or a directory of them).
    LoadNwp { path: PathBuf },
    /// Build reference forecasts, score a round and republish.
    Score { date: NaiveDate },
    /// Recompute the leaderboard and analyses from all scored rounds.
    Leaderboard,
    /// Copy published artifacts and score tables to a directory.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the read-only JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
    },
    /// Check a submission file without storing it.
    Validate {
        file: PathBuf,
        #[arg(long)]
        repair_sort: bool,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Init { config } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = HubConfig::parse(&text).with_context(|| format!("parsing {}", config.display()))?;
            Store::init(&cli.store, &cfg)?;
            println!("initialized store at {}", cli.store.display());
        }
        Command::OpenRound { date } => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            let round = hub.open_round(date)?;
            let targets: Vec<String> = round.targets().iter().map(|t| t.to_string()).collect();
            println!("opened round {date}: {}", targets.join(", "));
        }
        Command::Ingest { date, dir, repair_sort } => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            let summary = hub.ingest_directory(date, &dir, repair_sort)?;
            for (name, outcome) in &summary.files {
                match outcome {
                    FileOutcome::Accepted { alias, warnings, .. } => {
                        println!("accepted  {name} ({alias}, {warnings} warnings)")
                    }
                    FileOutcome::Duplicate { alias, .. } => println!("duplicate {name} ({alias})"),
                    FileOutcome::Rejected { alias, codes, .. } => {
                        println!("rejected  {name} ({alias}): {}", codes.join(", "))
                    }
                    FileOutcome::Skipped { reason } => println!("skipped   {name}: {reason}"),
                }
            }
        }
        Command::LoadPrices { file } => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            println!("{} closes loaded", hub.load_prices(&file)?);
        }
        Command::LoadObservations { target, file } => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            println!("{} observations loaded", hub.load_observations(target, &file)?);
        }
        Command::LoadNwp { path } => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            println!("{} ensemble forecasts loaded", hub.load_nwp(&path)?);
        }
        Command::Score { date } => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            let summary = hub.score_round(date)?;
            println!(
                "round {date}: {} records over {} observed cells, {} skipped",
                summary.records,
                summary.observed_cells,
                summary.skipped.len()
            );
            let publication = hub.publish()?;
            println!("leaderboard updated ({} scored rounds)", publication.leaderboard.scored_rounds.len());
        }
        Command::Leaderboard => {
            let hub = Hub::open(&cli.store)?;
            let _lock = hub.lock()?;
            let publication = hub.publish()?;
            print!("{}", publication.leaderboard.to_csv());
        }
        Command::Export { out } => export(&cli.store, &out)?,
        Command::Serve { port, bind } => {
            api::check_store(&cli.store)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((bind.as_str(), port)).await?;
                println!("serving {} on http://{}", cli.store.display(), listener.local_addr()?);
                axum::serve(listener, api::router(cli.store)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Validate { file, repair_sort } => {
            let name = file.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let Some((date, alias)) = parse_submission_filename(name) else {
                bail!("{name}: file name does not match <YYYYMMDD>_<alias>.csv");
            };
            // Outside a store every target is assumed to be due.
            let targets = match Hub::open(&cli.store) {
                Ok(hub) => hub.targets_for(date),
                Err(_) => TargetKind::ALL.to_vec(),
            };
            let round = RoundSpec::new(date, &targets)?;
            let raw = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let opts = ParseOptions { repair_sort, ..Default::default() };
            let (ok, report) = match parse_submission(&raw, &round, &alias, &opts) {
                Ok(parsed) => (true, parsed.report),
                Err(report) => (false, report),
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !ok {
                bail!("{name} would be rejected");
            }
        }
    }
    Ok(())
}

fn export(store: &Path, out: &Path) -> Result<()> {
    let hub = Hub::open(store)?;
    let s = hub.store();
    fs::create_dir_all(out.join("scores"))?;
    fs::create_dir_all(out.join("analysis"))?;
    let mut copied = 0;
    let mut copy = |from: PathBuf, to: PathBuf| -> Result<()> {
        if from.exists() {
            fs::copy(&from, &to).with_context(|| format!("copying {}", from.display()))?;
            copied += 1;
        }
        Ok(())
    };
    copy(s.leaderboard_json_path(), out.join("leaderboard.json"))?;
    copy(s.leaderboard_csv_path(), out.join("leaderboard.csv"))?;
    for name in ["coverage", "share_beating_benchmark", "sample_count", "participation"] {
        copy(s.analysis_path(name), out.join("analysis").join(format!("{name}.json")))?;
    }
    for &date in s.state()?.rounds.keys() {
        copy(s.scores_path(date), out.join("scores").join(format!("{date}.csv")))?;
    }
    println!("exported {copied} files to {}", out.display());
    Ok(())
}
