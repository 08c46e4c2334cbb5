use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chor_core::epp::{emit_system, link, LinkError};
use chor_core::runtime::{check_system_equivalence, enumerate_network_traces, Equivalence, RuntimeError, Side};
use chor_core::semantics::format_trace;
use chor_core::*;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

/// Check, project, run and compare choreographic programs.
#[derive(Debug, Parser)]
#[command(name = "chor", version)]
struct Cli {
    /// Never colour diagnostics.
    #[arg(long, global = true)]
    no_color: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and typecheck modules.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Take builtin signatures from this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Write one endpoint program per process.
    Project {
        file: PathBuf,
        #[arg(long)]
        entry: Option<String>,
        /// Directory for the `.ep` files; standard output if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the projected system once and print its trace.
    Run {
        file: PathBuf,
        #[arg(long)]
        entry: Option<String>,
        #[command(flatten)]
        exec: Exec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the traces of a choreography with those of its projection.
    Equiv {
        file: PathBuf,
        #[arg(long)]
        entry: Option<String>,
        #[command(flatten)]
        exec: Exec,
    },
    /// Link two separately projected modules through their external roles.
    Link {
        left: PathBuf,
        right: PathBuf,
        /// Closed module whose choreography the linked system must match.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Entry procedure of the reference module.
        #[arg(long, requires = "reference")]
        entry: Option<String>,
        #[command(flatten)]
        exec: Exec,
        /// Directory for the linked `.ep` files when no reference is given.
        #[arg(short, long, conflicts_with = "reference")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Exec {
    /// Initial stores and builtin definitions.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Sync)]
    mode: ModeArg,
    /// Maximum number of steps on any execution path.
    #[arg(long, default_value_t = 10_000)]
    bound: usize,
    /// Exploration threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sync,
    Async,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sync => Mode::Sync,
            ModeArg::Async => Mode::Async,
        }
    }
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Diagnostics were already printed.
    #[error("{0} error(s) reported")]
    Rejected(usize),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("deadlock")]
    Deadlock,
    #[error("not equivalent")]
    Inequivalent,
    #[error("exploration exceeded {0} steps")]
    Bound(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Rejected(_) | Failure::Invalid(_) | Failure::Link(_) => 1,
            Failure::Usage(_) | Failure::Io { .. } => 2,
            Failure::Deadlock => 3,
            Failure::Inequivalent => 4,
            Failure::Bound(_) => 5,
        }
    }
}

struct Ctx {
    color: bool,
}

impl Ctx {
    fn report(&self, path: &Path, diags: &[Diagnostic]) {
        let shown = path.display().to_string();
        let mut err = std::io::stderr().lock();
        for d in diags {
            let line = if self.color { d.render_colored(&shown) } else { d.render(&shown) };
            let _ = writeln!(err, "{line}");
        }
    }

    fn read(&self, path: &Path) -> Result<SourceFile, Failure> {
        SourceFile::read(path).map_err(|source| Failure::Io { path: path.to_path_buf(), source })
    }

    /// Parses and typechecks a module, printing any diagnostics.
    fn load(&self, path: &Path, builtins: &Builtins) -> Result<(Module, ModuleTyping), Failure> {
        let src = self.read(path)?;
        let m = parse_module(&src).map_err(|d| {
            self.report(path, &d);
            Failure::Rejected(d.len())
        })?;
        let typing = check_module(&m, &BuiltinSig::of(builtins)).map_err(|d| {
            self.report(path, &d);
            Failure::Rejected(d.len())
        })?;
        Ok((m, typing))
    }

    fn scenario(&self, path: Option<&Path>) -> Result<Scenario, Failure> {
        let Some(path) = path else { return Ok(Scenario::default()) };
        let src = self.read(path)?;
        parse_scenario(&src.text).map_err(|d| {
            self.report(path, &d);
            Failure::Rejected(d.len())
        })
    }
}

/// Writes to standard output, ignoring a closed pipe.
fn out(args: std::fmt::Arguments) {
    let _ = std::io::stdout().lock().write_fmt(args);
}

fn entry_of(m: &Module, requested: Option<&str>, path: &Path) -> Result<String, Failure> {
    match requested {
        Some(e) if m.procedure(e).is_some() => Ok(e.to_string()),
        Some(e) => Err(Failure::Usage(format!("`{}` defines no procedure `{e}`", path.display()))),
        None => m.entry.as_ref().map(|e| e.to_string()).ok_or_else(|| {
            Failure::Usage(format!("`{}` has several procedures; choose one with --entry", path.display()))
        }),
    }
}

fn explore_opts(exec: &Exec) -> Explore {
    let jobs = exec.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    Explore { bound: exec.bound, jobs }
}

fn runtime_failure(e: RuntimeError) -> Failure {
    match e {
        RuntimeError::Deadlock { trace, stuck } => {
            out(format_args!("{}", format_trace(&trace)));
            eprintln!("deadlock after {} event(s)", trace.len());
            for s in stuck {
                eprintln!("  {s}");
            }
            Failure::Deadlock
        }
        RuntimeError::BoundExceeded(n)
        | RuntimeError::Choreography(chor_core::semantics::SemanticsError::BoundExceeded(n)) => Failure::Bound(n),
        other => Failure::Invalid(other.to_string()),
    }
}

fn write_endpoints(sys: &ProjectedSystem, dir: Option<&Path>) -> Result<(), Failure> {
    let files = emit_system(sys);
    let Some(dir) = dir else {
        for (i, (p, text)) in files.iter().enumerate() {
            if i > 0 {
                out(format_args!("\n"));
            }
            out(format_args!("// {p}.ep\n"));
            out(format_args!("{text}"));
        }
        return Ok(());
    };
    let io = |source| Failure::Io { path: dir.to_path_buf(), source };
    std::fs::create_dir_all(dir).map_err(io)?;
    for (p, text) in files {
        let path = dir.join(format!("{p}.ep"));
        std::fs::write(&path, text).map_err(|source| Failure::Io { path, source })?;
    }
    Ok(())
}

fn report_equivalence(eq: Equivalence) -> Result<(), Failure> {
    match eq {
        Equivalence::Equivalent { traces } => {
            out(format_args!("EQUIVALENT ({traces} traces)\n"));
            Ok(())
        }
        Equivalence::Counterexample { trace, side } => {
            let other = match side {
                Side::Choreography => Side::Network,
                Side::Network => Side::Choreography,
            };
            out(format_args!("NOT EQUIVALENT: this trace of the {side} is not a trace of the {other}\n"));
            out(format_args!("{}", format_trace(&trace)));
            Err(Failure::Inequivalent)
        }
    }
}

fn execute(cli: Cli, ctx: &Ctx) -> Result<(), Failure> {
    match cli.command {
        Command::Check { files, scenario } => {
            let builtins = ctx.scenario(scenario.as_deref())?.builtins;
            let mut errors = 0;
            for f in &files {
                match ctx.load(f, &builtins) {
                    Ok(_) => {}
                    Err(Failure::Rejected(n)) => errors += n,
                    Err(e) => return Err(e),
                }
            }
            if errors > 0 {
                return Err(Failure::Rejected(errors));
            }
            Ok(())
        }
        Command::Project { file, entry, output } => {
            let (m, _) = ctx.load(&file, &Builtins::default())?;
            let entry = entry_of(&m, entry.as_deref(), &file)?;
            let sys = project(&m, &entry).map_err(|e| Failure::Invalid(e.to_string()))?;
            write_endpoints(&sys, output.as_deref())
        }
        Command::Run { file, entry, exec, seed } => {
            let sc = ctx.scenario(exec.scenario.as_deref())?;
            let (m, typing) = ctx.load(&file, &sc.builtins)?;
            let entry = entry_of(&m, entry.as_deref(), &file)?;
            if let Some(inputs) = typing.inputs_of(&entry) {
                sc.check_inputs(inputs).map_err(|e| Failure::Invalid(e.to_string()))?;
            }
            let sys = project(&m, &entry).map_err(|e| Failure::Invalid(e.to_string()))?;
            let result = run(&sys, &sc, exec.mode.into(), seed, exec.bound).map_err(runtime_failure)?;
            out(format_args!("{}", format_trace(&result.trace)));
            match result.outcome {
                Outcome::Terminated => Ok(()),
                Outcome::Deadlock(stuck) => {
                    eprintln!("deadlock after {} event(s)", result.trace.len());
                    for s in stuck {
                        eprintln!("  {s}");
                    }
                    Err(Failure::Deadlock)
                }
                Outcome::BoundExceeded => Err(Failure::Bound(exec.bound)),
            }
        }
        Command::Equiv { file, entry, exec } => {
            let sc = ctx.scenario(exec.scenario.as_deref())?;
            let (m, typing) = ctx.load(&file, &sc.builtins)?;
            let entry = entry_of(&m, entry.as_deref(), &file)?;
            if let Some(inputs) = typing.inputs_of(&entry) {
                sc.check_inputs(inputs).map_err(|e| Failure::Invalid(e.to_string()))?;
            }
            let sys = project(&m, &entry).map_err(|e| Failure::Invalid(e.to_string()))?;
            let eq = check_system_equivalence(&m, &entry, &sys, &sc, exec.mode.into(), explore_opts(&exec))
                .map_err(runtime_failure)?;
            report_equivalence(eq)
        }
        Command::Link { left, right, reference, entry, exec, output } => {
            let sc = ctx.scenario(exec.scenario.as_deref())?;
            let mut halves = Vec::new();
            for f in [&left, &right] {
                let (m, _) = ctx.load(f, &sc.builtins)?;
                let e = entry_of(&m, None, f)?;
                halves.push(project(&m, &e).map_err(|e| Failure::Invalid(e.to_string()))?);
            }
            let linked = link(&halves[0], &halves[1])?;
            let Some(reference) = reference else {
                return write_endpoints(&linked, output.as_deref());
            };
            let (m, typing) = ctx.load(&reference, &sc.builtins)?;
            let entry = entry_of(&m, entry.as_deref(), &reference)?;
            if let Some(inputs) = typing.inputs_of(&entry) {
                sc.check_inputs(inputs).map_err(|e| Failure::Invalid(e.to_string()))?;
            }
            let opts = explore_opts(&exec);
            // Surface deadlocks of the linked system before comparing.
            enumerate_network_traces(&linked, &sc, exec.mode.into(), opts).map_err(runtime_failure)?;
            let eq =
                check_system_equivalence(&m, &entry, &linked, &sc, exec.mode.into(), opts).map_err(runtime_failure)?;
            report_equivalence(eq)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { color: !cli.no_color && std::io::stderr().is_terminal() };
    match execute(cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Rejected(_) | Failure::Deadlock | Failure::Inequivalent => {}
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(f.code())
        }
    }
}
