use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfprint::Exec;
use rfprint_cli::commands::{self, MANIFEST_FILE, TRACES_FILE};
use rfprint_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "rfprint", version, about = "Vehicle classification from roadside RSSI fingerprints")]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run batch loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a fleet of passes into traces.csv and manifest.jsonl.
    Synth {
        /// Number of passes (default: synth.passes from the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Extract feature, per-link and raw-vector tables from a synth directory.
    Extract {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train the configured models on extracted tables.
    Train {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cross-validate the configured grid.
    Eval {
        #[arg(long)]
        input: PathBuf,
        /// Also write the per-link table.
        #[arg(long)]
        per_link: bool,
    },
    /// Classify a trace stream (file or `-` for stdin), printing JSON records.
    Stream {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "-")]
        input: String,
    },
    /// Time training and single-sample inference for each configured cell.
    Profile {
        #[arg(long)]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Synth { n } => {
            let n = n.unwrap_or(cfg.synth.passes);
            let s = commands::cmd_synth(&cfg, n, &cli.out, exec)?;
            println!("passes {} cars {} trucks {}", s.passes, s.cars, s.trucks);
            println!("wrote {} and {}", cli.out.join(TRACES_FILE).display(), cli.out.join(MANIFEST_FILE).display());
        }
        Command::Extract { input } => {
            let s = commands::cmd_extract(&cfg, &input, &cli.out, exec)?;
            println!("passes {} rejects {}", s.passes, s.rejects);
        }
        Command::Train { input } => {
            for p in commands::cmd_train(&cfg, &input, &cli.out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Eval { input, per_link } => {
            let grid = commands::cmd_eval(&cfg, &input, &cli.out, per_link, exec)?;
            print!("{}", grid.to_text());
        }
        Command::Stream { model, input } => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            let summary = if input == "-" {
                commands::cmd_stream(&cfg, &model, io::stdin().lock(), &mut out)?
            } else {
                let path = PathBuf::from(&input);
                let f = std::fs::File::open(&path).map_err(|e| CliError::Usage(format!("cannot open {input}: {e}")))?;
                commands::cmd_stream(&cfg, &model, BufReader::new(f), &mut out)?
            };
            for d in &summary.diagnostics {
                eprintln!("diagnostic {}", serde_json::to_string(d).unwrap_or_default());
            }
        }
        Command::Profile { input } => {
            let report = commands::cmd_profile(&cfg, &input, &cli.out)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("{}", CliError::Usage(first).line());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
