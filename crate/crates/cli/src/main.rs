//! `cmf`: causal and Markov ordering of `.cmf` equation models.

use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmf_core::error::{EXIT_INVALID, EXIT_OK};
use cmf_core::export::{self, to_pretty};
use cmf_core::extension::{self, Observation, DEFAULT_MAX_CYCLES};
use cmf_core::lab::{self, Method, PatternOptions, SampleOptions};
use cmf_core::matching::maximum_matching;
use cmf_core::model::bipartite_of;
use cmf_core::ordering::{markov_from_clusters, orient};
use cmf_core::query::{self, DEFAULT_MAX_CONDITIONING};
use cmf_core::{causal_ordering, Error, ModelSet};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cmf", version, about = "Causal ordering and Markov ordering of equation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster graph of the causal ordering.
    Order {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
    /// Markov ordering graph.
    Markov {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
    /// d-separation of two vertex sets in the Markov ordering graph.
    Dsep {
        #[command(flatten)]
        target: Target,
        /// Comma-separated vertices; `v_s` and `w_s` stand for `X_s` and `U_s`.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
        #[arg(long, value_enum, default_value_t = AnswerFormat::Text)]
        format: AnswerFormat,
    },
    /// Variables generically affected by an intervention.
    Effects {
        #[command(flatten)]
        input: Target,
        /// Equation, exogenous variable or parameter; with --perfect, a
        /// cluster id `C<i>` or any member of the cluster.
        #[arg(long)]
        target: String,
        /// Pin every variable of the target cluster instead of changing one
        /// equation.
        #[arg(long)]
        perfect: bool,
    },
    /// Conditions under which an extension preserves the base model's
    /// predictions.
    CheckExtension {
        file: PathBuf,
        extension: String,
        /// Check preservation of absent relations instead of present ones.
        #[arg(long)]
        absence: bool,
    },
    /// Whether all variables of both dynamics are self-regulating.
    CheckSelfreg {
        file: PathBuf,
        base: String,
        extended: String,
    },
    /// Feedback loops of extended dynamics through base and added variables.
    Feedback {
        file: PathBuf,
        dynamics: String,
        #[arg(long, value_delimiter = ',', required = true)]
        base_vars: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_CYCLES)]
        max_cycles: usize,
    },
    /// Equilibria for random draws of the exogenous variables.
    Simulate {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dynamics block used when Newton's method fails.
        #[arg(long)]
        dynamics: Option<String>,
        #[arg(long, value_enum, default_value_t = TableFormat::Json)]
        format: TableFormat,
    },
    /// Tests every implied (in)dependence on simulated equilibria.
    Pattern {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = lab::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_CONDITIONING)]
        max_conditioning: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Spearman)]
        method: MethodArg,
        #[arg(long, default_value_t = lab::DEFAULT_PERMUTATIONS)]
        permutations: usize,
        #[arg(long)]
        dynamics: Option<String>,
    },
    /// Independences implied by the Markov ordering graph.
    Table {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = DEFAULT_MAX_CONDITIONING)]
        max_conditioning: usize,
    },
    /// Flags observed independences the base model cannot produce.
    Diagnose {
        #[command(flatten)]
        target: Target,
        /// JSON list of `{x, y, given, independent}` objects.
        #[arg(long)]
        observations: PathBuf,
    },
    /// Writes a graph as DOT or JSON.
    Export {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = GraphKind::Clusters)]
        graph: GraphKind,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
}

#[derive(Args)]
struct Target {
    /// Model file.
    file: PathBuf,
    /// Name of a model, extension or dynamics block.
    model: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnswerFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Spearman,
    Partial,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    /// Bipartite graph oriented by a maximum matching.
    Oriented,
    /// Cluster graph.
    Clusters,
    /// Markov ordering graph.
    Markov,
}

impl From<GraphFormat> for export::Format {
    fn from(f: GraphFormat) -> Self {
        match f {
            GraphFormat::Json => export::Format::Json,
            GraphFormat::Dot => export::Format::Dot,
        }
    }
}

#[derive(Serialize)]
struct DsepAnswer<'a> {
    x: &'a [String],
    y: &'a [String],
    given: &'a [String],
    d_separated: bool,
}

enum Failure {
    Core(Error),
    /// Input that never reached the library: unreadable files, bad JSON.
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn core<E: Into<Error>>(e: E) -> Failure {
    Failure::Core(e.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ModelSet, Failure> {
    let src = read(path)?;
    cmf_core::parse(&src).map_err(|e| Failure::Input(format!("{}:{e}", path.display())))
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Order { target, format } => {
            let model = load(&target.file)?.incidence_model(&target.model).map_err(core)?;
            let co = causal_ordering(&model).map_err(core)?;
            Ok(export::export(export::Graph::Clusters(&co), format.into()))
        }
        Command::Markov { target, format } => {
            let model = load(&target.file)?.incidence_model(&target.model).map_err(core)?;
            let mo = cmf_core::markov_ordering(&model).map_err(core)?;
            Ok(export::export(export::Graph::Markov(&mo), format.into()))
        }
        Command::Dsep {
            target,
            x,
            y,
            given,
            format,
        } => {
            let model = load(&target.file)?.incidence_model(&target.model).map_err(core)?;
            let mo = cmf_core::markov_ordering(&model).map_err(core)?;
            let sep = query::d_separated(&mo, &strs(&x), &strs(&y), &strs(&given)).map_err(core)?;
            Ok(match format {
                AnswerFormat::Text => format!("d-separated: {sep}\n"),
                AnswerFormat::Json => to_pretty(&DsepAnswer {
                    x: &x,
                    y: &y,
                    given: &given,
                    d_separated: sep,
                }),
            })
        }
        Command::Effects {
            input: t,
            target,
            perfect,
        } => {
            let model = load(&t.file)?.incidence_model(&t.model).map_err(core)?;
            let co = causal_ordering(&model).map_err(core)?;
            let report = if perfect {
                let c = query::resolve_cluster(&co, &target).map_err(core)?;
                query::perfect_intervention_effects(&co, c)
            } else {
                query::soft_intervention_effects(&co, &target)
            }
            .map_err(core)?;
            Ok(to_pretty(&report))
        }
        Command::CheckExtension {
            file,
            extension: name,
            absence,
        } => {
            let set = load(&file)?;
            let ext = set.require_extension(&name).map_err(core)?;
            let verdict = if absence {
                extension::check_absence_preservation(ext)
            } else {
                extension::check_presence_preservation(ext)
            };
            Ok(to_pretty(&verdict))
        }
        Command::CheckSelfreg { file, base, extended } => {
            let set = load(&file)?;
            let base = set.require_dynamics(&base).map_err(core)?;
            let extended = set.require_dynamics(&extended).map_err(core)?;
            Ok(to_pretty(&extension::check_self_regulating(base, extended)))
        }
        Command::Feedback {
            file,
            dynamics,
            base_vars,
            max_cycles,
        } => {
            let set = load(&file)?;
            let d = set.require_dynamics(&dynamics).map_err(core)?;
            let report = extension::detect_new_feedback(d, &strs(&base_vars), max_cycles).map_err(core)?;
            Ok(to_pretty(&report))
        }
        Command::Simulate {
            target,
            n,
            seed,
            dynamics,
            format,
        } => {
            let set = load(&target.file)?;
            let model = set.incidence_model(&target.model).map_err(core)?;
            let dynamics = dynamics
                .map(|d| set.require_dynamics(&d))
                .transpose()
                .map_err(core)?;
            let options = SampleOptions::<f64> {
                dynamics,
                ..SampleOptions::default()
            };
            let samples = lab::sample_equilibria_with(&model, n, seed, &options).map_err(core)?;
            Ok(match format {
                TableFormat::Json => samples.to_json(),
                TableFormat::Csv => samples.to_csv(),
            })
        }
        Command::Pattern {
            target,
            n,
            seed,
            alpha,
            max_conditioning,
            method,
            permutations,
            dynamics,
        } => {
            let set = load(&target.file)?;
            let model = set.incidence_model(&target.model).map_err(core)?;
            let dynamics = dynamics
                .map(|d| set.require_dynamics(&d))
                .transpose()
                .map_err(core)?;
            let mo = cmf_core::markov_ordering(&model).map_err(core)?;
            let options = PatternOptions {
                max_conditioning,
                method: match method {
                    MethodArg::Spearman => Method::SpearmanPermutation,
                    MethodArg::Partial => Method::PartialCorrelation,
                },
                permutations,
                dynamics,
            };
            let report =
                lab::pattern_check_with::<f64>(&model, &mo, n, seed, alpha, &options).map_err(core)?;
            Ok(to_pretty(&report))
        }
        Command::Table {
            target,
            max_conditioning,
        } => {
            let model = load(&target.file)?.incidence_model(&target.model).map_err(core)?;
            let mo = cmf_core::markov_ordering(&model).map_err(core)?;
            Ok(to_pretty(&query::implied_independence_table(&mo, max_conditioning)))
        }
        Command::Diagnose { target, observations } => {
            let model = load(&target.file)?.incidence_model(&target.model).map_err(core)?;
            let text = read(&observations)?;
            let obs: Vec<Observation> = serde_json::from_str(&text)
                .map_err(|e| Failure::Input(format!("{}: {e}", observations.display())))?;
            let mo = cmf_core::markov_ordering(&model).map_err(core)?;
            Ok(to_pretty(&extension::diagnose(&mo, &obs).map_err(core)?))
        }
        Command::Export { target, graph, format } => {
            let model = load(&target.file)?.incidence_model(&target.model).map_err(core)?;
            let format = format.into();
            Ok(match graph {
                GraphKind::Oriented => {
                    let g = bipartite_of(&model);
                    let m = maximum_matching(&g);
                    // Orientation needs a perfect matching; ordering reports
                    // the Hall witness when there is none.
                    causal_ordering(&model).map_err(core)?;
                    let o = orient(&g, &m).map_err(core)?;
                    export::export(export::Graph::Oriented(&o), format)
                }
                GraphKind::Clusters => {
                    let co = causal_ordering(&model).map_err(core)?;
                    export::export(export::Graph::Clusters(&co), format)
                }
                GraphKind::Markov => {
                    let co = causal_ordering(&model).map_err(core)?;
                    export::export(export::Graph::Markov(&markov_from_clusters(&co)), format)
                }
            })
        }
    }
}

fn report(message: &str) {
    let mut err = std::io::stderr();
    let color = err.is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty());
    let label = if color { "\x1b[1;31merror\x1b[0m" } else { "error" };
    let _ = writeln!(err, "{label}: {message}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                // Closed pipe; nothing left to report to.
                return ExitCode::from(EXIT_OK as u8);
            }
            EXIT_OK
        }
        Err(Failure::Input(message)) => {
            report(&message);
            EXIT_INVALID
        }
        Err(Failure::Core(e)) => {
            report(&e.to_string());
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
