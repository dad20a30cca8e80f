//! The `sdu` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apps::{run_dpp, run_forward_check, run_villa, Market, VillaVariant, BINOMIAL_SCENARIO};
use crate::axioms::{ActGrid, AxiomChecker, InducedOracle};
use crate::error::{Error, Result};
use crate::random::random_act;
use crate::recovery::{check_relative_uniqueness, recover, RecoveryOptions};
use crate::scenario::Scenario;
use crate::space::{Act, Event, FilteredSpace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Random acts per time triple in `semigroup`.
const SEMIGROUP_SAMPLES: usize = 25;

#[derive(Debug, Parser)]
#[command(
    name = "sdu",
    version,
    about = "Intertemporal preferences and stochastic dynamic utilities on finite trees",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Tolerance for equivalence bands and inversions
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Seed for randomized suites
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,

    /// Scenario variant; the file's first variant when omitted
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Conditional certainty equivalent of a named act
    Cce {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 0)]
        s: usize,
        /// Defaults to the act's own time index
        #[arg(long)]
        t: Option<usize>,
    },
    /// Preference verdict between two named acts
    Compare {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        g: String,
        #[arg(long)]
        f: String,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
    },
    /// Largest |C_{s,v} - C_{s,t} C_{t,v}| over random acts and time triples
    Semigroup {
        #[command(flatten)]
        input: ScenarioArgs,
    },
    /// Exhaustive axiom check of the induced preference
    Axioms {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Outcome grid, comma separated; must contain 0
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Check one time index only
        #[arg(long)]
        t: Option<usize>,
    },
    /// Recover a representation from the induced preference and print it
    Recover {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Largest accepted additivity residual; curves that are not
        /// piecewise linear on the grid need a looser value
        #[arg(long, default_value_t = 1e-8)]
        residual_tol: f64,
    },
    /// Relative uniqueness of two representations
    Uniqueness {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        other: PathBuf,
        #[arg(long)]
        other_variant: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Worked examples
    Example {
        #[arg(value_enum)]
        which: Example,
        /// Binomial scenario for dpp and forward; the shipped one by default
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Example {
    Villa,
    Dpp,
    Forward,
}

fn parse_grid(raw: Option<&str>) -> Result<ActGrid> {
    let Some(raw) = raw else {
        return Ok(ActGrid::default());
    };
    let values = raw
        .split(',')
        .map(str::trim)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::Precondition(format!("bad grid value `{v}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    ActGrid::new(values, ActGrid::default().depth())
}

fn atom_label(space: &FilteredSpace, i: usize, a: usize) -> String {
    Event::new(space.atom(i, a).iter().copied()).names(space)
}

fn act_lines(out: &mut Vec<String>, space: &FilteredSpace, act: &Act, format: Format) {
    let i = act.time_index;
    for a in 0..space.n_atoms(i) {
        let value = act.values[space.atom(i, a)[0]];
        out.push(match format {
            Format::Text => format!("{} = {value}", atom_label(space, i, a)),
            Format::Tsv => format!("{}\t{value}", atom_label(space, i, a)),
        });
    }
}

struct Outcome {
    lines: Vec<String>,
    code: i32,
}

impl Outcome {
    fn ok(lines: Vec<String>) -> Self {
        Outcome { lines, code: EXIT_OK }
    }

    fn checked(lines: Vec<String>, passed: bool) -> Self {
        Outcome {
            lines,
            code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let tol = cli.tol;
    let format = cli.format;
    match &cli.command {
        Command::Cce { input, f, s, t } => {
            let sc = Scenario::load(&input.scenario)?;
            let rep = sc.representation(input.variant.as_deref())?;
            let act = sc.act(f)?;
            let t = t.unwrap_or(act.time_index);
            let cce = rep.cce(*s, t, act, tol)?;
            let mut lines = Vec::new();
            act_lines(&mut lines, rep.space(), &cce, format);
            Ok(Outcome::ok(lines))
        }
        Command::Compare { input, g, f, s, t } => {
            let sc = Scenario::load(&input.scenario)?;
            let rep = sc.representation(input.variant.as_deref())?;
            let (g, f) = (sc.act(g)?, sc.act(f)?);
            let s = s.unwrap_or(g.time_index);
            let t = t.unwrap_or(f.time_index);
            let verdict = rep.compare(s, t, g, f, tol)?;
            let line = match format {
                Format::Text => verdict.tag().to_string(),
                Format::Tsv => {
                    let p = verdict.partition();
                    let space = rep.space();
                    format!(
                        "{}\t{}\t{}\t{}",
                        verdict.tag(),
                        p.equal.names(space),
                        p.above.names(space),
                        p.below.names(space)
                    )
                }
            };
            Ok(Outcome::ok(vec![line]))
        }
        Command::Semigroup { input } => {
            let sc = Scenario::load(&input.scenario)?;
            let rep = sc.representation(input.variant.as_deref())?;
            let space = rep.space();
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut lines = Vec::new();
            let mut worst = 0.0f64;
            for s in 0..space.n_times() {
                for t in s + 1..space.n_times() {
                    for v in t + 1..space.n_times() {
                        let mut triple = 0.0f64;
                        for _ in 0..SEMIGROUP_SAMPLES {
                            let f = random_act(&mut rng, space, v, -2.0, 2.0);
                            triple = triple.max(rep.semigroup_residual(s, t, v, &f, tol)?);
                        }
                        worst = worst.max(triple);
                        lines.push(match format {
                            Format::Text => format!("s={s} t={t} v={v} residual = {triple:e}"),
                            Format::Tsv => format!("{s}\t{t}\t{v}\t{triple:e}"),
                        });
                    }
                }
            }
            let passed = worst <= 10.0 * tol;
            if format == Format::Text {
                lines.push(format!("max residual = {worst:e}"));
                lines.push(if passed { "PASS".into() } else { "FAIL".into() });
            }
            Ok(Outcome::checked(lines, passed))
        }
        Command::Axioms { input, grid, t } => {
            let sc = Scenario::load(&input.scenario)?;
            let rep = sc.representation(input.variant.as_deref())?;
            let last = rep.space().last();
            let grid = parse_grid(grid.as_deref())?;
            let times: Vec<usize> = match t {
                Some(i) if *i < last => vec![*i],
                Some(i) => {
                    return Err(Error::Precondition(format!(
                        "axioms compare times i and i + 1, so --t must be below {last}, got {i}"
                    )))
                }
                None => (0..last).collect(),
            };
            let oracle = InducedOracle::new(rep, tol);
            let checker = AxiomChecker::new(&oracle, grid);
            let mut lines = Vec::new();
            let mut passed = true;
            for i in times {
                for report in checker.check_all(i, cli.seed) {
                    passed &= report.passed();
                    match format {
                        Format::Text => lines.extend(report.render().lines().map(str::to_string)),
                        Format::Tsv => {
                            for c in &report.clauses {
                                lines.push(format!(
                                    "{}\t{}\t{}\t{}",
                                    report.axiom,
                                    i,
                                    c.name,
                                    if c.passed { "PASS" } else { "FAIL" }
                                ));
                            }
                        }
                    }
                }
            }
            Ok(Outcome::checked(lines, passed))
        }
        Command::Recover {
            input,
            grid,
            residual_tol,
        } => {
            let sc = Scenario::load(&input.scenario)?;
            let rep = sc.representation(input.variant.as_deref())?;
            let opts = RecoveryOptions {
                grid: parse_grid(grid.as_deref())?,
                residual_tol: *residual_tol,
                ..RecoveryOptions::default()
            };
            let u0 = rep.u0().clone();
            let oracle = InducedOracle::new(rep, tol);
            let recovered = recover(&oracle, &u0, &opts)?;
            let doc = Scenario::from_representation(&format!("{}-recovered", sc.name), &recovered.representation);
            Ok(Outcome::ok(doc.render().lines().map(str::to_string).collect()))
        }
        Command::Uniqueness {
            input,
            other,
            other_variant,
            grid,
        } => {
            let a = Scenario::load(&input.scenario)?.representation(input.variant.as_deref())?;
            let b = Scenario::load(other)?.representation(other_variant.as_deref())?;
            let grid = parse_grid(grid.as_deref())?;
            let check = check_relative_uniqueness(&a, &b, &grid, 1e-6_f64.max(tol))?;
            let mut lines = Vec::new();
            match format {
                Format::Text => {
                    lines.push(if check.passed { "PASS".into() } else { "FAIL".into() });
                    lines.push(format!("max deviation = {:e}", check.max_deviation));
                    if let Some(w) = &check.witness {
                        lines.push(format!("measures disagree on null state {w}"));
                    }
                }
                Format::Tsv => lines.push(format!(
                    "{}\t{:e}\t{}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.max_deviation,
                    check.witness.as_deref().unwrap_or("-")
                )),
            }
            Ok(Outcome::checked(lines, check.passed))
        }
        Command::Example {
            which,
            scenario,
            variant,
        } => match which {
            Example::Villa => {
                let v = VillaVariant::parse(variant.as_deref().unwrap_or("paper-arithmetic"))?;
                let report = run_villa(v, tol)?;
                Ok(Outcome::ok(report.text.lines().map(str::to_string).collect()))
            }
            Example::Dpp | Example::Forward => {
                let sc = match scenario {
                    Some(path) => Scenario::load(path)?,
                    None => Scenario::parse(BINOMIAL_SCENARIO)?,
                };
                if *which == Example::Dpp {
                    let market = Market::from_scenario(&sc, variant.as_deref())?;
                    let report = run_dpp(&market, tol)?;
                    let passed = report.passed();
                    Ok(Outcome::checked(report.text.lines().map(str::to_string).collect(), passed))
                } else {
                    let market = Market::from_scenario(&sc, Some(variant.as_deref().unwrap_or("martingale")))?;
                    let report = run_forward_check(&market, tol)?;
                    let passed = report.passed();
                    Ok(Outcome::checked(report.text.lines().map(str::to_string).collect(), passed))
                }
            }
        },
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { EXIT_OK } else { EXIT_INPUT };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for line in outcome.lines {
                let _ = writeln!(out, "{line}");
            }
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}
