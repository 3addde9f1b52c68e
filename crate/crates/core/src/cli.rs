//! Command-line front end.

use std::ffi::OsString;
use std::io::{self, BufRead, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkers::{check_with, CheckOptions, IsolationLevel, Verdict};
use crate::consistency::check_read_consistency;
use crate::generators::{
    gen_ra_reduction, gen_random, gen_range_reduction, gen_rc_reduction, Anomaly, RandomSpec, UndirectedGraph,
};
use crate::io::{load, write_history, ReadError};
use crate::model::History;
use crate::oracle::{oracle_check, OracleBudget, OracleOutcome};
use crate::render;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitCode {
    Consistent = 0,
    Violation = 1,
    InputError = 2,
    UsageError = 3,
    BudgetExceeded = 4,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Parser, Debug)]
#[command(name = "isocheck", version, about = "Check transactional key-value histories against RC, RA and CC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a history; all three levels when --level is omitted.
    Check(CheckArgs),
    /// Decide a small history by exhaustive search over commit orders.
    Oracle(OracleArgs),
    /// Write a generated history.
    Generate(GenerateArgs),
    /// Print size statistics of a history.
    Stats {
        /// History file, or `-` for stdin.
        file: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LevelArg {
    Rc,
    Ra,
    Cc,
}

impl From<LevelArg> for IsolationLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Rc => IsolationLevel::RC,
            LevelArg::Ra => IsolationLevel::RA,
            LevelArg::Cc => IsolationLevel::CC,
        }
    }
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, value_enum)]
    level: Option<LevelArg>,
    /// Drop reads that violate read consistency and keep checking.
    #[arg(long)]
    continue_after_read_errors: bool,
    /// Emit one JSON object per level.
    #[arg(long)]
    json: bool,
    file: String,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, value_enum)]
    level: LevelArg,
    /// Maximum number of committed transactions to search over.
    #[arg(long, default_value_t = OracleBudget::default().max_committed_txns)]
    budget: usize,
    file: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Random,
    TriRange,
    TriRa,
    TriRc,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    sessions: u32,
    #[arg(long, default_value_t = 32)]
    txns: u32,
    #[arg(long, default_value_t = 1)]
    ops_min: u32,
    #[arg(long, default_value_t = 6)]
    ops_max: u32,
    #[arg(long, default_value_t = 8)]
    keys: u32,
    #[arg(long, default_value_t = 0.5)]
    read_fraction: f64,
    #[arg(long, default_value_t = 8)]
    graph_nodes: u32,
    #[arg(long, default_value_t = 0.3)]
    graph_edge_prob: f64,
    /// Comma-separated anomalies to plant.
    #[arg(long, value_delimiter = ',')]
    inject: Vec<Anomaly>,
    /// Output file, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: String,
}

struct Io<'a> {
    stdin: &'a mut dyn BufRead,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    color: bool,
}

pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                ExitCode::Consistent
            } else {
                let _ = write!(stderr, "{}", e.render());
                ExitCode::UsageError
            };
        }
    };
    let color = std::env::var("ISOCHECK_COLOR").is_ok_and(|v| v == "1");
    let mut io = Io {
        stdin,
        stdout,
        stderr,
        color,
    };
    let code = match cli.command {
        Command::Check(a) => cmd_check(a, &mut io),
        Command::Oracle(a) => cmd_oracle(a, &mut io),
        Command::Generate(a) => cmd_generate(a, &mut io),
        Command::Stats { file } => cmd_stats(&file, &mut io),
    };
    let _ = io.stdout.flush();
    code
}

fn load_or_report(file: &str, io: &mut Io) -> Result<History, ExitCode> {
    load(file, io.stdin).map_err(|e| {
        match e {
            ReadError::Parse(p) => {
                let _ = writeln!(io.stderr, "error: {file}: line {}: {}", p.line, p.reason);
            }
            ReadError::Io(e) => {
                let _ = writeln!(io.stderr, "error: {file}: {e}");
            }
        }
        ExitCode::InputError
    })
}

fn cmd_check(a: CheckArgs, io: &mut Io) -> ExitCode {
    let h = match load_or_report(&a.file, io) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let opts = CheckOptions {
        continue_after_read_errors: a.continue_after_read_errors,
    };
    let levels: Vec<IsolationLevel> = match a.level {
        Some(l) => vec![l.into()],
        None => IsolationLevel::ALL.to_vec(),
    };
    let verdicts: Vec<Verdict> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&level| {
                let h = &h;
                scope.spawn(move || check_with(h, level, opts))
            })
            .collect();
        handles.into_iter().map(|j| j.join().expect("checker thread panicked")).collect()
    });

    let mut worst = ExitCode::Consistent;
    for (&level, verdict) in levels.iter().zip(&verdicts) {
        let text = if a.json {
            render::json_line(&h, level, verdict)
        } else {
            render::human(&h, level, verdict, io.color)
        };
        let _ = io.stdout.write_all(text.as_bytes());
        if !verdict.is_consistent() {
            worst = ExitCode::Violation;
        }
    }
    worst
}

fn cmd_oracle(a: OracleArgs, io: &mut Io) -> ExitCode {
    let h = match load_or_report(&a.file, io) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let level: IsolationLevel = a.level.into();
    let budget = OracleBudget {
        max_committed_txns: a.budget,
    };
    match oracle_check(&h, level, budget) {
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            ExitCode::BudgetExceeded
        }
        Ok(OracleOutcome::Consistent(_)) => {
            let _ = io.stdout.write_all(render::consistent_line(level, io.color).as_bytes());
            ExitCode::Consistent
        }
        Ok(OracleOutcome::Violation) => {
            let reads = check_read_consistency(&h);
            let kind = if reads.is_empty() {
                "no-commit-order"
            } else {
                "read-consistency"
            };
            let mut text = render::violation_line(level, kind, io.color);
            for r in &reads {
                text += &render::read_violation_line(&h, r);
            }
            let _ = io.stdout.write_all(text.as_bytes());
            ExitCode::Violation
        }
    }
}

fn cmd_generate(a: GenerateArgs, io: &mut Io) -> ExitCode {
    let h = match a.mode {
        Mode::Random => {
            let spec = RandomSpec {
                seed: a.seed,
                sessions: a.sessions,
                txns: a.txns,
                ops_min: a.ops_min,
                ops_max: a.ops_max,
                keys: a.keys,
                read_fraction: a.read_fraction,
                inject: a.inject.into_iter().collect(),
                ..RandomSpec::default()
            };
            match gen_random(&spec) {
                Ok(g) => {
                    for line in &g.planted {
                        let _ = writeln!(io.stderr, "{line}");
                    }
                    g.history
                }
                Err(e) => {
                    let _ = writeln!(io.stderr, "error: {e}");
                    return ExitCode::UsageError;
                }
            }
        }
        Mode::TriRange | Mode::TriRa | Mode::TriRc => {
            if !(0.0..=1.0).contains(&a.graph_edge_prob) {
                let _ = writeln!(io.stderr, "error: edge probability {} outside [0, 1]", a.graph_edge_prob);
                return ExitCode::UsageError;
            }
            let g = UndirectedGraph::erdos_renyi(a.graph_nodes, a.graph_edge_prob, a.seed);
            match a.mode {
                Mode::TriRange => gen_range_reduction(&g),
                Mode::TriRa => gen_ra_reduction(&g),
                _ => gen_rc_reduction(&g),
            }
        }
    };

    let written = if a.output == "-" {
        write_history(&h, &mut io.stdout)
    } else {
        std::fs::File::create(&a.output).and_then(|f| {
            let mut w = io::BufWriter::new(f);
            write_history(&h, &mut w)?;
            w.flush()
        })
    };
    match written {
        Ok(()) => ExitCode::Consistent,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {}: {e}", a.output);
            ExitCode::InputError
        }
    }
}

fn cmd_stats(file: &str, io: &mut Io) -> ExitCode {
    match load_or_report(file, io) {
        Ok(h) => {
            let _ = write!(io.stdout, "{}", h.stats());
            ExitCode::Consistent
        }
        Err(code) => code,
    }
}
