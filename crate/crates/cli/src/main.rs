mod commands;

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncdomain::harness::{
    emit_instance, generate_instance, parse_instance, run_suite, IdealSpec, Instance, Recipe, Report, SuiteConfig,
    SymbolSpec, TargetClass, VarietyShape,
};

use commands::{Options, SimilarKind, TriangulateKind};

const USAGE_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "ncdomain", version, about = "Checks for noncommutative domains, their models and decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Tolerance for pass/fail decisions.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Cap on sequential iterations (probes, Cesàro averages).
    #[arg(long = "k-max", global = true, default_value_t = 10_000)]
    k_max: usize,
    /// Fock model truncation length (default: derived from m, deg f and d).
    #[arg(long = "L", global = true)]
    len: Option<usize>,
    /// Seed for instance generation, the battery and random probes.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Write the report (or generated instance) here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Domain and variety membership, joint spectral radius, cone membership.
    Analyze { instance: PathBuf },
    /// Build the truncated universal model for the instance's symbol and validate it.
    Model { instance: PathBuf },
    /// Berezin kernel identities for R = extras.R or (id−Φ)^m(D), D = extras.D or I.
    Kernel { instance: PathBuf },
    /// Construct a joint similarity of the given kind.
    Similar {
        #[arg(value_enum)]
        kind: SimilarKind,
        instance: PathBuf,
    },
    /// Wold decomposition H = M ⊕ ker Q ⊕ ker(I−Q).
    Wold { instance: PathBuf },
    /// Lower block-triangular forms.
    Triangulate {
        #[arg(value_enum)]
        kind: TriangulateKind,
        instance: PathBuf,
    },
    /// The acceptance battery.
    Suite {
        /// Fewer instances per criterion, same tolerances.
        #[arg(long)]
        quick: bool,
    },
    /// Generate a seeded instance.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RecipeName {
    DomainMember,
    PureNilpotent,
    SimilarPair,
    VarietyMember,
    Strict,
    Blocks,
    Invariant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassName {
    Cc,
    Pure,
    Strict,
    C1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IdealName {
    Free,
    Commuting,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    recipe: RecipeName,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Degree of the random symbol (1 or 2); 0 means f = X_1 + … + X_n.
    #[arg(long, default_value_t = 0)]
    degree: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, value_enum, default_value_t = ClassName::Cc)]
    class: ClassName,
    /// Condition number of the conjugating Y (similar pairs default to 3;
    /// variety members are left unconjugated unless given).
    #[arg(long)]
    cond: Option<f64>,
    #[arg(long = "r-target", default_value_t = 0.5)]
    r_target: f64,
    #[arg(long, value_enum, default_value_t = IdealName::Commuting)]
    ideal: IdealName,
    /// Compress the constrained model to levels ≤ this (variety members); 0 gives a diagonal tuple of size d.
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 2)]
    d0: usize,
    #[arg(long, default_value_t = 2)]
    dc: usize,
    #[arg(long, default_value_t = 2)]
    dcnc: usize,
    /// Couple the blocks through nonzero off-diagonal parts.
    #[arg(long)]
    coupled: bool,
    #[arg(long, default_value_t = 2)]
    dm: usize,
    #[arg(long, default_value_t = 2)]
    drest: usize,
    /// Make the distinguished subspace reducing rather than only invariant.
    #[arg(long)]
    reducing: bool,
}

impl GenArgs {
    fn recipe(&self) -> Recipe {
        let symbol = match self.degree {
            0 => SymbolSpec::Linear(self.n),
            degree => SymbolSpec::Random { n: self.n, degree },
        };
        let (d, m) = (self.d, self.m);
        match self.recipe {
            RecipeName::DomainMember => Recipe::DomainMember { symbol, d, m },
            RecipeName::PureNilpotent => Recipe::PureNilpotent { symbol, d, m },
            RecipeName::SimilarPair => {
                let class = match self.class {
                    ClassName::Cc => TargetClass::Unital,
                    ClassName::Pure => TargetClass::Pure,
                    ClassName::Strict => TargetClass::Strict(self.r_target),
                    ClassName::C1 => TargetClass::C1,
                };
                Recipe::SimilarPair { symbol, d, m, class, cond: self.cond.unwrap_or(3.0) }
            }
            RecipeName::VarietyMember => Recipe::VarietyMember {
                symbol,
                m,
                ideal: match self.ideal {
                    IdealName::Free => IdealSpec::Free,
                    IdealName::Commuting => IdealSpec::Commuting,
                },
                shape: match self.level {
                    0 => VarietyShape::Diagonal { d },
                    level => VarietyShape::Compression { level },
                },
                cond: self.cond,
            },
            RecipeName::Strict => Recipe::Strict { symbol, d, m, r_target: self.r_target },
            RecipeName::Blocks => Recipe::Blocks {
                symbol,
                d0: self.d0,
                dc: self.dc,
                dcnc: self.dcnc,
                coupled: self.coupled,
            },
            RecipeName::Invariant => Recipe::Invariant { symbol, dm: self.dm, drest: self.drest, reducing: self.reducing },
        }
    }
}

/// Usage and schema failures, reported with exit code 2.
struct UsageError(String);

fn load(path: &PathBuf) -> Result<(Instance, String), UsageError> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| UsageError(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
    };
    let inst = parse_instance(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    Ok((inst, text))
}

fn write(out: Option<&PathBuf>, body: &str) -> Result<(), UsageError> {
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| UsageError(format!("{}: {e}", p.display()))),
        None => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{}", body.trim_end());
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool, UsageError> {
    let opts = Options { tol: cli.tol, k_max: cli.k_max, len: cli.len, seed: cli.seed };
    if !(cli.tol > 0.0) || cli.k_max == 0 || cli.len == Some(0) {
        return Err(UsageError("--tol, --k-max and --L must be positive".into()));
    }
    let report: Report = match &cli.command {
        Command::Gen(args) => {
            let inst = generate_instance(cli.seed, &args.recipe()).map_err(|e| UsageError(e.to_string()))?;
            write(cli.out.as_ref(), &emit_instance(&inst))?;
            return Ok(true);
        }
        Command::Suite { quick } => run_suite(&SuiteConfig { seed: cli.seed, quick: *quick }),
        Command::Analyze { instance } => {
            let (inst, text) = load(instance)?;
            commands::analyze(&inst, &text, &opts)
        }
        Command::Model { instance } => {
            let (inst, text) = load(instance)?;
            commands::model(&inst, &text, &opts)
        }
        Command::Kernel { instance } => {
            let (inst, text) = load(instance)?;
            commands::kernel(&inst, &text, &opts)
        }
        Command::Similar { kind, instance } => {
            let (inst, text) = load(instance)?;
            commands::similar(*kind, &inst, &text, &opts)
        }
        Command::Wold { instance } => {
            let (inst, text) = load(instance)?;
            commands::wold(&inst, &text, &opts)
        }
        Command::Triangulate { kind, instance } => {
            let (inst, text) = load(instance)?;
            commands::triangulate(*kind, &inst, &text, &opts)
        }
    };
    let body = match cli.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    write(cli.out.as_ref(), &body)?;
    if cli.out.is_some() {
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}", report.operation);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}
