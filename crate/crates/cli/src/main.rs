use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use accmc_core::abstraction::InstMode;
use accmc_core::accel::{accelerations, Repository};
use accmc_core::corpus::{self, BenchmarkEntry, Config, Status};
use accmc_core::engine::{backward_search, Options, Outcome, Verdict};
use accmc_core::smt::{Solver, SolverConfig};
use accmc_core::spec_format::{parse_program, transition_to_sexp};
use accmc_core::Program;

#[derive(Parser)]
#[command(name = "accmc", version, about = "Safety checker for array programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inst {
    Evars,
    Terms,
    Index,
}

impl From<Inst> for InstMode {
    fn from(i: Inst) -> InstMode {
        match i {
            Inst::Evars => InstMode::EVars,
            Inst::Terms => InstMode::Terms,
            Inst::Index => InstMode::Index,
        }
    }
}

#[derive(clap::Args)]
struct SearchArgs {
    /// Add accelerated loop transitions before searching.
    #[arg(long)]
    accelerate: bool,
    #[arg(long, default_value_t = 2000)]
    max_nodes: usize,
    #[arg(long, default_value_t = 200)]
    max_depth: usize,
    /// Instantiation terms for abstracting quantified labels.
    #[arg(long, value_enum, default_value = "evars")]
    inst: Inst,
    /// Solver command line, split on whitespace.
    #[arg(long, default_value = "z3 -in -smt2")]
    solver: String,
    /// Wall-clock budget per run, in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

impl SearchArgs {
    fn options(&self) -> Options {
        let total = Duration::from_secs(self.timeout);
        let per_query = SolverConfig::default().timeout_ms.min(total.as_millis() as u64);
        Options {
            accelerate: self.accelerate,
            max_nodes: self.max_nodes,
            max_depth: self.max_depth,
            inst_mode: self.inst.into(),
            timeout: total,
            solver: SolverConfig::default()
                .with_command(&self.solver)
                .with_timeout_ms(per_query),
            ..Options::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check one program.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Write every solver query as a standalone script into DIR.
        #[arg(long, value_name = "DIR")]
        dump_smt: Option<PathBuf>,
        /// Write the search events as JSON lines to FILE.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Run the bundled benchmarks and print a status table.
    Bench {
        /// Only entries whose name contains NAME.
        #[arg(long, value_name = "NAME")]
        filter: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
        /// Entries run concurrently.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Print the accelerated transitions preprocessing would add.
    AccelDump {
        file: PathBuf,
        /// Also check the iterator/selector repository with the solver.
        #[arg(long)]
        check_repository: bool,
        #[arg(long, default_value = "z3 -in -smt2")]
        solver: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Command::Verify {
            file,
            search,
            dump_smt,
            trace,
        } => {
            let p = load(&file)?;
            if search.accelerate {
                check_repository(&search.solver)?;
            }
            let mut opts = search.options();
            opts.solver.dump_dir = dump_smt;
            opts.record_events = trace.is_some();
            let out = backward_search(&p, &opts)?;
            if let Some(path) = trace {
                write_trace(&path, &out)?;
            }
            report(&out);
            Ok(match out.verdict {
                Verdict::Safe => 0,
                Verdict::Unsafe(_) => 1,
                Verdict::Unknown(_) => 2,
            })
        }
        Command::Bench { filter, search, jobs } => {
            if search.accelerate {
                check_repository(&search.solver)?;
            }
            bench(filter.as_deref(), &search, jobs)
        }
        Command::AccelDump {
            file,
            check_repository,
            solver,
        } => {
            let p = load(&file)?;
            if check_repository {
                let mut s = Solver::new(SolverConfig::default().with_command(&solver))?;
                for (name, ok) in Repository::standard().verify(&mut s)? {
                    println!("; {name}: {}", if ok { "verified" } else { "REJECTED" });
                }
            }
            let acc = accelerations(&p);
            if acc.is_empty() {
                println!("; no accelerable transitions");
            }
            for (src, t) in acc {
                println!("; from {}", src.name);
                println!("{}", transition_to_sexp(&t));
            }
            Ok(0)
        }
    }
}

/// Fails unless the solver confirms every repository law.
fn check_repository(solver: &str) -> Result<()> {
    let mut s = Solver::new(SolverConfig::default().with_command(solver))?;
    let rejected: Vec<String> = Repository::standard()
        .verify(&mut s)?
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect();
    if rejected.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("repository entries not verified: {}", rejected.join(", ")))
    }
}

fn load(path: &Path) -> Result<Program> {
    let src = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_program(&src).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn report(out: &Outcome) {
    println!("RESULT: {}", out.verdict);
    println!("nodes: {}", out.stats.nodes);
    println!("solver calls: {}", out.stats.solver_calls);
    println!("time: {:.3}s", out.stats.elapsed_ms as f64 / 1000.0);
    if let Verdict::Unsafe(trace) = &out.verdict {
        println!("trace: {}", trace.join(" "));
    }
}

fn write_trace(path: &Path, out: &Outcome) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    for e in &out.events {
        serde_json::to_writer(&mut f, e)?;
        writeln!(f)?;
    }
    Ok(())
}

struct Row {
    entry: BenchmarkEntry,
    verdict: Result<Verdict>,
    secs: f64,
}

fn bench(filter: Option<&str>, search: &SearchArgs, jobs: usize) -> Result<u8> {
    let entries: Vec<BenchmarkEntry> = corpus::entries()
        .into_iter()
        .filter(|e| filter.is_none_or(|f| e.name.contains(f)))
        .collect();
    if entries.is_empty() {
        return Err(anyhow!("no benchmark matches the filter"));
    }
    let opts = search.options();
    let mut rows: Vec<Option<Row>> = (0..entries.len()).map(|_| None).collect();
    for chunk in entries.chunks(jobs.max(1)).zip(rows.chunks_mut(jobs.max(1))) {
        std::thread::scope(|s| {
            for (entry, slot) in chunk.0.iter().zip(chunk.1.iter_mut()) {
                let opts = &opts;
                s.spawn(move || {
                    let start = Instant::now();
                    let verdict = entry
                        .program()
                        .map_err(|e| anyhow!("{}: {e}", entry.file))
                        .and_then(|p| Ok(backward_search(&p, opts)?.verdict));
                    *slot = Some(Row {
                        entry: entry.clone(),
                        verdict,
                        secs: start.elapsed().as_secs_f64(),
                    });
                });
            }
        });
    }
    let config = if search.accelerate {
        Config::Accel
    } else {
        Config::Plain
    };
    println!(
        "{:<14} {:<7} {:<7} {:<26} {:>8}  check",
        "program", "status", "config", "result", "time"
    );
    let mut wrong = false;
    for row in rows.into_iter().flatten() {
        let e = &row.entry;
        let (result, check) = match &row.verdict {
            Err(err) => (format!("error: {err}"), "error"),
            Ok(v) => {
                let got = match v {
                    Verdict::Safe => Some(Status::Safe),
                    Verdict::Unsafe(_) => Some(Status::Unsafe),
                    Verdict::Unknown(_) => None,
                };
                let check = match got {
                    Some(s) if s == e.expected => "ok",
                    Some(_) => "WRONG",
                    None if e.expects_termination(config) => "no answer",
                    None => "diverges",
                };
                (v.to_string(), check)
            }
        };
        wrong |= check == "WRONG" || check == "error";
        let cfg = if search.accelerate { "accel" } else { "plain" };
        println!(
            "{:<14} {:<7} {:<7} {:<26} {:>7.2}s  {}",
            e.name,
            e.expected.as_str(),
            cfg,
            result,
            row.secs,
            check
        );
    }
    Ok(if wrong { 1 } else { 0 })
}
