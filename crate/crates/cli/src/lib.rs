//! Command-line front end: training, pruning, the repeated-holdout
//! experiment, a latency benchmark and a diversity report.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal
//! error.

pub mod args;
pub mod commands;
pub mod experiment;

use std::io::Write;
use std::path::Path;

use clubdrf::container::ModelFile;
use clubdrf::Error;

pub use args::{Cli, Command};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) => EXIT_CONFIG,
        Error::Input(_)
        | Error::Parse { .. }
        | Error::Schema(_)
        | Error::Split(_)
        | Error::EmptyOob(_)
        | Error::Format(_)
        | Error::Io(_) => EXIT_DATA,
        Error::Json(_) => EXIT_INTERNAL,
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> clubdrf::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs one parsed command, writing human-readable output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> clubdrf::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Train(a) => {
            let (model, s) = commands::train(
                &a.data.dataset,
                &a.data.class(),
                a.trees,
                a.subset_size,
                a.train_fraction,
                a.seed,
            )?;
            model.save(&a.out)?;
            writeln!(
                stdout,
                "trees={} train={} test={} subset_size={} mean_oob_accuracy={:.4} -> {}",
                s.trees,
                s.n_train,
                s.n_test,
                s.subset_size,
                s.mean_oob_accuracy,
                a.out.display()
            )?;
        }
        Command::Prune(a) => {
            let model = ModelFile::load(&a.model)?;
            let (pruned, s) = commands::prune(
                &model,
                &a.data.dataset,
                &a.data.class(),
                a.k,
                a.policy,
                a.seed,
            )?;
            pruned.save(&a.out)?;
            writeln!(stdout, "{s} -> {}", a.out.display())?;
        }
        Command::Experiment(a) => {
            let cfg = a.config()?;
            let report = experiment::run_experiment(&cfg)?;
            report.write(&a.out)?;
            for d in &report.datasets {
                let rf = d.rf();
                let best = d.summary[1..]
                    .iter()
                    .fold(None::<&experiment::MethodSummary>, |b, m| match b {
                        Some(b) if b.accuracy.mean >= m.accuracy.mean => Some(b),
                        _ => Some(m),
                    })
                    .expect("k list is non-empty");
                writeln!(
                    stdout,
                    "{}: rf {:.2}%  best club_drf k={} {:.2}%",
                    d.name,
                    100.0 * rf.accuracy.mean,
                    best.k,
                    100.0 * best.accuracy.mean
                )?;
            }
            for f in &report.failures {
                writeln!(stdout, "{}: FAILED: {}", f.dataset, f.error)?;
            }
            writeln!(stdout, "report written to {}", a.out.display())?;
        }
        Command::Bench(a) => {
            let full = ModelFile::load(&a.model)?;
            let pruned = ModelFile::load(&a.pruned)?;
            let r = commands::bench(
                &full,
                &pruned,
                &a.data.dataset,
                &a.data.class(),
                a.iterations,
            )?;
            emit(a.out.as_deref(), &r.to_csv(), stdout)?;
        }
        Command::Diversity(a) => {
            let full = ModelFile::load(&a.model)?;
            let pruned = ModelFile::load(&a.pruned)?;
            let rows =
                commands::diversity(&full, &pruned, &a.data.dataset, &a.data.class(), a.seed)?;
            emit(a.out.as_deref(), &commands::diversity_csv(&rows), stdout)?;
        }
    }
    Ok(())
}
