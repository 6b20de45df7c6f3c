use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use molrel::adapters::Adapters;
use molrel::compose::{self, registry};
use molrel::dataio::{self, LoadOptions, Loaded, Protocol};
use molrel::experiment::{self, ExperimentConfig};
use molrel::featurize::registry::FeaturizeOptions;
use molrel::featurize::FeaturizerId;
use molrel::metrics;
use molrel::{Error, Result};

/// Composable drug/protein relational-learning models.
#[derive(Parser)]
#[command(name = "molrel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and test the configured model over all repeats.
    Run { config: PathBuf },
    /// Like `run`, with one interaction, encoder or adapter feature removed.
    Ablate {
        config: PathBuf,
        #[arg(long)]
        drop: String,
    },
    /// Print the encoder, interaction and metric inventories.
    ListRegistry,
    /// Write one featurizer's output for every distinct entity of a dataset.
    Featurize {
        /// dti, ddi or ppi
        task: String,
        input: PathBuf,
        #[arg(long)]
        featurizer: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Directory holding `<pdb_id>.pdb` files.
        #[arg(long)]
        structures: Option<PathBuf>,
    },
    /// Count the distinct models buildable from N drug and M protein encoders
    /// using at most K encoders.
    Enumerate {
        #[arg(long)]
        drug: u64,
        #[arg(long)]
        protein: u64,
        #[arg(long)]
        max: u64,
    },
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config } => {
            let (cfg, base) = ExperimentConfig::load(&config)?;
            let res = experiment::run(&cfg, &base)?;
            print!("{}", res.table());
        }
        Command::Ablate { config, drop } => {
            let (cfg, base) = ExperimentConfig::load(&config)?;
            let res = experiment::ablate(&cfg, &base, &drop)?;
            print!("{}", res.table());
        }
        Command::ListRegistry => {
            for (category, names) in registry::inventory() {
                println!("{category} ({}): {}", names.len(), names.join(", "));
            }
            for (task, names) in [
                ("regression", &metrics::REGRESSION_METRICS[..]),
                ("binary", &metrics::BINARY_METRICS[..]),
                ("multiclass", &metrics::MULTICLASS_METRICS[..]),
            ] {
                println!("{task} metrics ({}): {}", names.len(), names.join(", "));
            }
            println!("presets ({}): {}", compose::PRESETS.len(), compose::PRESETS.join(", "));
        }
        Command::Featurize {
            task,
            input,
            featurizer,
            output,
            structures,
        } => {
            let protocol = Protocol::from_name(&task).map_err(|e| Error::config("task", e.to_string()))?;
            let id = FeaturizerId::from_name(&featurizer)
                .ok_or_else(|| Error::config("--featurizer", format!("unknown featurizer `{featurizer}`")))?;
            let opts = LoadOptions {
                task: compose::TaskKind::Regression,
                structures,
            };
            let ds = match dataio::load(&input, protocol, &opts)? {
                Loaded::Single(ds) => ds,
                Loaded::Split { .. } => {
                    return Err(Error::config("input", "expected a single table, not a split directory"))
                }
            };
            let rows = experiment::featurize_table(&ds, id, &Adapters::default(), &FeaturizeOptions::default())?;
            let width = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
            let mut w = csv::Writer::from_path(&output).map_err(Error::from)?;
            let mut header = vec!["entity".to_string()];
            header.extend((0..width).map(|i| format!("f{i}")));
            w.write_record(&header)?;
            for (entity, values) in rows {
                let mut rec = vec![entity];
                rec.extend(values.iter().map(|v| v.to_string()));
                rec.resize(width + 1, String::new());
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io(&output, e))?;
        }
        Command::Enumerate { drug, protein, max } => {
            println!("{}", compose::enumerate_model_space(drug, protein, max));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
