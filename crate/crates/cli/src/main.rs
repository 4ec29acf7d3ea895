mod backend;
mod bench;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use epal_client::EpalClient;
use epal_core::api::{MeasurementRequest, OverrideRequest};
use epal_core::campaign::{parse_measurements_csv, Campaign, CampaignConfig};
use epal_service::AppState;

use backend::{Backend, Local, Remote};

/// Pareto active learning campaigns over the spin-coating design grid.
#[derive(Debug, Parser)]
#[command(name = "epal", version)]
struct Cli {
    /// Campaign file used when no server is given.
    #[arg(long, global = true, default_value = "campaign.json")]
    campaign: PathBuf,

    /// Talk to a running `epal serve` instead of the campaign file.
    #[arg(long, global = true, value_name = "URL")]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a campaign file over the default grid.
    Init {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative tolerance, applied to both objectives.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 3)]
        batch: usize,
        /// Total budget, seed measurements included.
        #[arg(long, default_value_t = 120)]
        max_evaluations: usize,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Iteration, class counts and pending suggestions.
    Status {
        #[arg(long)]
        json: bool,
    },
    /// Print every grid point with its class and prediction, one JSON object per line.
    Points,
    /// Print the next batch, one JSON design point per line.
    Suggest {
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Record measurements from a CSV file or a single point.
    Ingest(IngestArgs),
    /// Refit, reclassify and pick the next batch.
    Step,
    /// Put a grid point at the front of the next batch.
    Override {
        #[arg(long, conflicts_with = "coords", required_unless_present = "coords")]
        point_id: Option<usize>,
        /// `c_pvp10,c_pvp40,c_pvp360,S,d`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        coords: Option<Vec<f64>>,
    },
    /// Write the linguistic summary of the current state.
    Explain {
        /// Directory for report.md, statements.jsonl and prompt.txt; prints markdown when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the 2-D embedding as `id,x,y` CSV.
    Embed {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the campaign log as JSON lines.
    Log,
    /// Run the benchmark suites and report PASS/FAIL per criterion.
    Bench {
        #[arg(long, value_enum, default_value = "binh-korn")]
        suite: bench::Suite,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: bench::Format,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Serve the campaign file over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8731)]
        port: u16,
    },
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// CSV with header `point_id,hardness,inverse_elasticity[,note]`.
    #[arg(conflicts_with_all = ["point_id", "hardness", "inverse_elasticity"])]
    file: Option<PathBuf>,
    #[arg(long, requires_all = ["hardness", "inverse_elasticity"])]
    point_id: Option<usize>,
    #[arg(long)]
    hardness: Option<f64>,
    #[arg(long)]
    inverse_elasticity: Option<f64>,
    #[arg(long)]
    note: Option<String>,
}

fn backend(cli: &Cli) -> Result<Box<dyn Backend>> {
    Ok(match &cli.server {
        Some(url) => Box::new(Remote {
            client: EpalClient::new(url.clone())?,
        }),
        None => Box::new(Local {
            path: cli.campaign.clone(),
        }),
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ingest_requests(args: &IngestArgs) -> Result<Vec<MeasurementRequest>> {
    if let Some(file) = &args.file {
        let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
        let rows = parse_measurements_csv(&text).with_context(|| format!("parsing {}", file.display()))?;
        return Ok(rows
            .into_iter()
            .map(|m| MeasurementRequest {
                point_id: m.point_id,
                hardness: m.hardness,
                inverse_elasticity: m.inverse_elasticity,
                note: (!m.note.is_empty()).then_some(m.note),
                timestamp: m.timestamp,
            })
            .collect());
    }
    match (args.point_id, args.hardness, args.inverse_elasticity) {
        (Some(point_id), Some(hardness), Some(inverse_elasticity)) => Ok(vec![MeasurementRequest {
            point_id,
            hardness,
            inverse_elasticity,
            note: args.note.clone(),
            timestamp: None,
        }]),
        _ => bail!("give a CSV file or --point-id with --hardness and --inverse-elasticity"),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Init {
            seed,
            epsilon,
            batch,
            max_evaluations,
            force,
        } => {
            if cli.server.is_some() {
                bail!("init works on a campaign file; drop --server");
            }
            if cli.campaign.exists() && !force {
                bail!("{} already exists (use --force to overwrite)", cli.campaign.display());
            }
            let mut config = CampaignConfig::default();
            config.pal.epsilon = vec![*epsilon; 2];
            config.pal.batch_size = *batch;
            config.pal.max_evaluations = *max_evaluations;
            let campaign = Campaign::new(config, *seed)?;
            campaign.save(&cli.campaign)?;
            println!("created {} with {} grid points", cli.campaign.display(), campaign.points.len());
        }
        Command::Status { json } => {
            let s = backend(&cli)?.status()?;
            if *json {
                print_json(&s)?;
            } else {
                println!("iteration:       {}", s.iteration);
                println!("grid points:     {}", s.grid_size);
                println!("sampled:         {}", s.sampled);
                println!(
                    "pareto optimal:  {}\ndiscarded:       {}\nundecided:       {}",
                    s.counts.pareto_optimal, s.counts.discarded, s.counts.undecided
                );
                println!("converged:       {}", s.converged);
                println!("budget spent:    {}", s.budget_exhausted);
                println!("suggestions:     {:?}", s.suggestions);
                if let Some(t) = s.override_target {
                    println!("override target: {t}");
                }
            }
        }
        Command::Points => {
            for p in backend(&cli)?.points()? {
                println!("{}", serde_json::to_string(&p)?);
            }
        }
        Command::Suggest { batch } => {
            for p in backend(&cli)?.suggestions(*batch)? {
                println!("{}", serde_json::to_string(&p)?);
            }
        }
        Command::Ingest(args) => {
            let requests = ingest_requests(args)?;
            let n = requests.len();
            let s = backend(&cli)?.measure(requests)?;
            println!("ingested {n} measurement(s); {} points sampled", s.sampled);
        }
        Command::Step => print_json(&backend(&cli)?.step()?)?,
        Command::Override { point_id, coords } => {
            let coordinates = match coords {
                Some(c) => Some(<[f64; 5]>::try_from(c.as_slice()).map_err(|_| {
                    anyhow::anyhow!("--coords takes five comma-separated values, got {}", c.len())
                })?),
                None => None,
            };
            let resp = backend(&cli)?.override_point(OverrideRequest {
                point_id: *point_id,
                coordinates,
            })?;
            print_json(&resp)?;
        }
        Command::Explain { out } => {
            let report = backend(&cli)?.report()?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("report.md"), &report.markdown)?;
                    let mut lines = String::new();
                    for r in &report.records {
                        lines.push_str(&serde_json::to_string(r)?);
                        lines.push('\n');
                    }
                    fs::write(dir.join("statements.jsonl"), lines)?;
                    fs::write(dir.join("prompt.txt"), &report.prompt)?;
                    println!("wrote {} statements to {}", report.records.len(), dir.display());
                }
                None => print!("{}", report.markdown),
            }
        }
        Command::Embed { out } => {
            let view = backend(&cli)?.embedding()?;
            let mut csv = String::from("id,x,y\n");
            for r in &view.records {
                csv.push_str(&format!("{},{},{}\n", r.id, r.x, r.y));
            }
            match out {
                Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
        Command::Log => {
            for e in backend(&cli)?.log()?.entries {
                println!("{}", serde_json::to_string(&e)?);
            }
        }
        Command::Bench {
            suite,
            seeds,
            epsilon,
            format,
            out,
        } => {
            let verdicts = bench::run(&bench::BenchArgs {
                suite: *suite,
                seeds: *seeds,
                epsilon: *epsilon,
                format: *format,
                out: out.clone(),
            })?;
            if !verdicts.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Serve { host, port } => {
            if cli.server.is_some() {
                bail!("serve works on a campaign file; drop --server");
            }
            let state = AppState::open(&cli.campaign)
                .with_context(|| format!("opening {}", cli.campaign.display()))?;
            let addr = format!("{host}:{port}")
                .parse()
                .with_context(|| format!("invalid address {host}:{port}"))?;
            tokio::runtime::Runtime::new()?.block_on(epal_service::serve(state, addr))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
