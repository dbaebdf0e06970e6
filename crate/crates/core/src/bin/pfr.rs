use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pfr::dataset::DatasetConfig;
use pfr::experiment::{emit_table_report, prepare, run_experiment, ExperimentConfig};
use pfr::pfr::{pfr_multi, recheck, replay_steps, steps_from_jsonl, MulticlassStrategy, PfrConfig};
use pfr::{PfrError, Result};

#[derive(Parser)]
#[command(name = "pfr", version, about = "Remove proxy features for sensitive attributes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tau sweep described by an experiment config.
    Run { config: PathBuf },
    /// Run the removal loop on a whole dataset and print its trace as JSON lines.
    Pfr {
        dataset: PathBuf,
        #[arg(long = "sensitive", required = true)]
        sensitive: Vec<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Multiclass::OneVsAll)]
        multiclass: Multiclass,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a trace and check that the sensitive attributes are no longer predictable.
    Audit {
        dataset: PathBuf,
        trace: PathBuf,
        /// Threshold to check against; defaults to each attribute's majority share.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Multiclass::OneVsAll)]
        multiclass: Multiclass,
    },
    /// Print the default threshold for a sensitive attribute.
    Tau {
        dataset: PathBuf,
        #[arg(long)]
        sensitive: String,
        #[arg(long, value_enum, default_value_t = Multiclass::OneVsAll)]
        multiclass: Multiclass,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Multiclass {
    OneVsAll,
    PrivilegedVsRest,
}

impl From<Multiclass> for MulticlassStrategy {
    fn from(m: Multiclass) -> Self {
        match m {
            Multiclass::OneVsAll => MulticlassStrategy::OneVsAll,
            Multiclass::PrivilegedVsRest => MulticlassStrategy::PrivilegedVsRest,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let outcome = run_experiment(&cfg)?;
            let failed = outcome.rows().filter(|r| r.error.is_some()).count();
            print!("{}", read(&outcome.output_dir.join("sweep.csv"))?);
            eprintln!(
                "{} points ({failed} failed), outputs in {}",
                outcome.points.len(),
                outcome.output_dir.display()
            );
            Ok(0)
        }
        Command::Pfr {
            dataset,
            sensitive,
            tau,
            seed,
            multiclass,
            out,
        } => {
            let data = prepare(&DatasetConfig::from_file(&dataset)?)?;
            let mut cfg = PfrConfig {
                sensitive_order: sensitive.clone(),
                seed,
                multiclass: multiclass.into(),
                ..PfrConfig::default()
            };
            if let Some(t) = tau {
                for name in &sensitive {
                    cfg.tau_overrides.insert(name.clone(), t);
                }
            }
            let labels = sensitive
                .iter()
                .map(|n| data.sensitive(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            match pfr_multi(&data.matrix, &labels, &cfg) {
                Ok((residual, traces)) => {
                    let jsonl: String = traces.iter().map(|t| t.to_jsonl()).collect();
                    emit(out.as_deref(), &jsonl)?;
                    eprint!("{}", emit_table_report(&traces));
                    let audit = recheck(&residual, &labels, &cfg)?;
                    for t in &traces {
                        let again = audit[&t.sensitive_column];
                        eprintln!(
                            "{}: tau {:.4}, auc {:.4} -> {:.4} after {} removals, recheck {again:.4}{}",
                            t.sensitive_column,
                            t.tau,
                            t.initial_auc,
                            t.final_auc,
                            t.steps.len(),
                            if again > t.tau + cfg.auc_slack { " (above tau + slack)" } else { "" }
                        );
                    }
                    Ok(0)
                }
                Err(e) => {
                    if let PfrError::ExhaustedFeatures {
                        trace: Some(partial),
                        ..
                    } = &e
                    {
                        emit(out.as_deref(), &partial.to_jsonl())?;
                    }
                    Err(e)
                }
            }
        }
        Command::Audit {
            dataset,
            trace,
            tau,
            seed,
            multiclass,
        } => {
            let data = prepare(&DatasetConfig::from_file(&dataset)?)?;
            let steps = steps_from_jsonl(&read(&trace)?)?;
            let residual = replay_steps(&data.matrix, &steps)?;
            let mut names: Vec<&str> = Vec::new();
            for s in &steps {
                if !names.contains(&s.sensitive_column.as_str()) {
                    names.push(&s.sensitive_column);
                }
            }
            let labels = names
                .iter()
                .map(|n| data.sensitive(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            let cfg = PfrConfig {
                seed,
                multiclass: multiclass.into(),
                ..PfrConfig::default()
            };
            let aucs = recheck(&residual, &labels, &cfg)?;
            println!("sensitive\tauc\ttau\tresult");
            let mut ok = true;
            for l in &labels {
                let limit = tau.unwrap_or_else(|| cfg.tau_for(l));
                let auc = aucs[&l.name];
                let pass = auc <= limit + cfg.auc_slack;
                ok &= pass;
                println!(
                    "{}\t{auc:.4}\t{limit:.4}\t{}",
                    l.name,
                    if pass { "pass" } else { "fail" }
                );
            }
            Ok(if ok { 0 } else { 2 })
        }
        Command::Tau {
            dataset,
            sensitive,
            multiclass,
        } => {
            let data = prepare(&DatasetConfig::from_file(&dataset)?)?;
            let labels = data.sensitive(&sensitive)?;
            println!("{}", labels.default_tau(multiclass.into()));
            Ok(0)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| PfrError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| PfrError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| PfrError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}
