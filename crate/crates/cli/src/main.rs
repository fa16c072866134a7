use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use eschil::analysis::Waveform;
use eschil::scenario::{
    compare, run_oracle, run_scenario, step_label, write_outputs, OracleConfig, Prepared, RunOptions,
};

/// Event-synchronized co-simulation of switched power circuits.
#[derive(Parser)]
#[command(name = "simulate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the event-driven engine, the fixed-step sweep and the oracle, then write all outputs.
    Run {
        scenario: PathBuf,
        /// Output directory [default: out/<scenario id>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ignore the scenario's timing model and schedule with zero solver durations.
        #[arg(long)]
        seedless: bool,
        /// Recompute the oracle even if a cached trajectory exists.
        #[arg(long)]
        no_cache: bool,
        /// Run the fixed-step sweep on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Compute only the fine-step reference at step H seconds.
    Oracle {
        scenario: PathBuf,
        /// Step in seconds; must divide the control period.
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep one grid row in N.
        #[arg(long, default_value_t = 1)]
        record_every: u64,
    },
    /// Relative error of waveform A against reference B (CSV files, run directories or their summary.json).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Signals to compare [default: all shared].
        #[arg(long = "signal")]
        signals: Vec<String>,
        #[arg(long, num_args = 2, value_names = ["T1", "T2"])]
        window: Option<Vec<f64>>,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(out: Option<PathBuf>, p: &Prepared) -> PathBuf {
    out.unwrap_or_else(|| Path::new("out").join(&p.scenario.id))
}

fn read_waveform(path: &Path) -> Result<Waveform> {
    let file = if path.is_dir() {
        path.join("es.csv")
    } else if path.extension().is_some_and(|e| e == "json") {
        path.with_file_name("es.csv")
    } else {
        path.to_path_buf()
    };
    let f = fs::File::open(&file).with_context(|| format!("cannot open {}", file.display()))?;
    Waveform::read_csv(BufReader::new(f)).with_context(|| format!("cannot parse {}", file.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seedless,
            no_cache,
            sequential,
        } => {
            let p = Prepared::load(&scenario)?;
            let dir = out_dir(out, &p);
            let opts = RunOptions {
                deterministic: seedless,
                cache_dir: (!no_cache).then(|| dir.join("cache")),
                sequential,
            };
            let started = Instant::now();
            let result = run_scenario(&p, &opts)?;
            write_outputs(&p, &result, &dir)?;
            eprintln!(
                "{}: {} cycles in {:.2} s, outputs in {}",
                p.scenario.id,
                p.n_cycles,
                started.elapsed().as_secs_f64(),
                dir.display()
            );
            println!("{}", serde_json::to_string_pretty(&result.summary)?);
        }
        Command::Oracle {
            scenario,
            h,
            out,
            record_every,
        } => {
            let p = Prepared::load(&scenario)?;
            let dir = out_dir(out, &p);
            let run = run_oracle(&p, &OracleConfig { h, record_every })?;
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("oracle_{}.csv", step_label(h)));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            run.waveform.write_csv(&mut w)?;
            w.flush()?;
            eprintln!("{} rows written to {}", run.waveform.len(), path.display());
        }
        Command::Compare {
            a,
            b,
            signals,
            window,
            out,
        } => {
            let window = match window.as_deref() {
                Some(&[t1, t2]) => Some((t1, t2)),
                Some(_) => bail!("--window takes two times"),
                None => None,
            };
            let cmp = compare(&read_waveform(&a)?, &read_waveform(&b)?, &signals, window)?;
            let text = serde_json::to_string_pretty(&cmp)?;
            match out {
                Some(path) => fs::write(&path, text + "\n")?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
