use std::path::PathBuf;
use std::process::ExitCode;

use attnverify::harness::{cmd_congest, cmd_gen, cmd_verify, GenRequest, Task, TaskParams};
use clap::{Args, Parser, Subcommand};

/// Check explicit attention constructions against brute-force oracles.
#[derive(Parser)]
#[command(name = "attnverify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a task's model and compare it with the oracle.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances when the domain is too large to enumerate.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a task's model on the communication graph.
    Congest {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-instance summary as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a generated instance to a file.
    Gen {
        #[arg(long)]
        task: String,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "M")]
        m: Option<u64>,
        #[arg(long)]
        kind: Option<String>,
        /// DISJ set `a` as hex, least significant bit first.
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    task: String,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "M")]
    m: Option<u64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    m_embed: Option<usize>,
    #[arg(long)]
    d_prime: Option<usize>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    planted: Option<usize>,
}

impl ParamArgs {
    fn split(&self) -> attnverify::Result<(Task, TaskParams)> {
        let task = self.task.parse()?;
        Ok((
            task,
            TaskParams {
                n: self.n,
                m: self.m,
                q: self.q,
                k: self.k,
                eps: self.eps,
                m_embed: self.m_embed,
                d_prime: self.d_prime,
                kind: self.kind.clone(),
                density: self.density,
                planted: self.planted,
            },
        ))
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> attnverify::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> attnverify::Result<bool> {
    match cli.command {
        Command::Verify { params, seed, count, out } => {
            let (task, p) = params.split()?;
            let report = cmd_verify(task, &p, seed, count)?;
            emit(&report.to_json()?, out.as_ref())?;
            if !report.pass {
                eprintln!(
                    "verify {task}: FAIL ({} instances, {} examples shown)",
                    report.instance_count,
                    report.mismatches.len()
                );
                for m in &report.mismatches {
                    eprintln!("  instance {} seed {:?}: {}", m.index, m.seed, m.detail);
                }
            }
            Ok(report.pass)
        }
        Command::Congest { params, seed, count, out, csv } => {
            let (task, p) = params.split()?;
            let report = cmd_congest(task, &p, seed, count)?;
            emit(&report.to_json()?, out.as_ref())?;
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv()?)?;
            }
            for f in report.failures() {
                eprintln!("congest {task}: {f}");
            }
            Ok(report.pass)
        }
        Command::Gen { task, n, m, kind, a, b, seed, out } => {
            let req = GenRequest { task, n, m, kind, a, b, seed };
            cmd_gen(&req, &out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
