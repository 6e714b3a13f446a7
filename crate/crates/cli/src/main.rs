use std::path::PathBuf;
use std::process::ExitCode;

use aobkit::{run_scenario, write_error, CliError, Format, RunOptions, Scenario};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "aobkit", version, about = "Kernel-family diagnostics driven by scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Structured,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory for reports, summary.json and error.json
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Run independent analyses concurrently
    #[arg(long)]
    parallel: bool,
}

/// Inline JSON values accepted by the single-analysis subcommands.
#[derive(Args)]
struct Inline {
    /// Frequency spec, e.g. '{"clark":{"a":6.283,"count":16}}' or '{"explicit":[[0,1]]}'
    #[arg(long)]
    frequencies: String,
    /// Symbol as JSON, e.g. '{"type":"singular","a":1}'
    #[arg(long)]
    symbol: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file
    Run {
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Normalized kernel Gram matrix and tail bounds
    Gram {
        #[command(flatten)]
        inline: Inline,
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-pair stability predicates for perturbed frequencies
    Stability {
        #[command(flatten)]
        inline: Inline,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        #[arg(long)]
        gamma: Option<f64>,
        /// Tolerance schedule, e.g. '{"constant":0.1}'
        #[arg(long)]
        eps: String,
        /// Perturbed frequencies, e.g. '{"shift":{"offset":[0,0.01],"exponent":1}}'
        #[arg(long)]
        mu: String,
        /// Sublevel check, e.g. '{"delta":0.5,"grid":{...}}'
        #[arg(long)]
        cls: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exponential-system Gram matrix and decay check
    Exponentials {
        #[command(flatten)]
        inline: Inline,
        #[arg(long)]
        a: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Divisor ratios and projection sums
    Projection {
        #[command(flatten)]
        inline: Inline,
        #[arg(long)]
        b2: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Carleson constant of a measure (default: atoms Im λ at each λ)
    Carleson {
        #[command(flatten)]
        inline: Inline,
        #[arg(long)]
        measure: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn inline_json(flag: &str, text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config { path: format!("--{flag}"), message: e.to_string() })
}

fn inline_scenario(inline: &Inline, mut analysis: Map<String, Value>) -> Result<Scenario, CliError> {
    let mut doc = Map::new();
    doc.insert("frequencies".into(), inline_json("frequencies", &inline.frequencies)?);
    if let Some(s) = &inline.symbol {
        doc.insert("symbol".into(), inline_json("symbol", s)?);
    }
    analysis.retain(|_, v| !v.is_null());
    doc.insert("analyses".into(), json!([analysis]));
    Scenario::parse(&Value::Object(doc).to_string())
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("literal objects"),
    }
}

fn opt_json(flag: &str, text: &Option<String>) -> Result<Value, CliError> {
    text.as_deref().map_or(Ok(Value::Null), |t| inline_json(flag, t))
}

fn scenario_for(command: &Command) -> Result<Scenario, CliError> {
    match command {
        Command::Run { config, .. } => {
            let text = std::fs::read_to_string(config).map_err(|e| CliError::Config {
                path: config.display().to_string(),
                message: e.to_string(),
            })?;
            Scenario::parse(&text)
        }
        Command::Gram { inline, n_max, .. } => inline_scenario(inline, object(json!({ "name": "gram+tails", "n_max": n_max }))),
        Command::Stability { inline, p, gamma, eps, mu, cls, .. } => inline_scenario(
            inline,
            object(json!({
                "name": "stability",
                "p": p,
                "gamma": gamma,
                "eps": inline_json("eps", eps)?,
                "mu": inline_json("mu", mu)?,
                "cls": opt_json("cls", cls)?,
            })),
        ),
        Command::Exponentials { inline, a, .. } => inline_scenario(inline, object(json!({ "name": "prop41", "a": a }))),
        Command::Projection { inline, b2, b, tau, .. } => inline_scenario(
            inline,
            object(json!({
                "name": "projection",
                "b2": inline_json("b2", b2)?,
                "b": inline_json("b", b)?,
                "tau": tau,
            })),
        ),
        Command::Carleson { inline, measure, .. } => {
            inline_scenario(inline, object(json!({ "name": "carleson", "measure": opt_json("measure", measure)? })))
        }
    }
}

fn output_args(command: &Command) -> &OutputArgs {
    match command {
        Command::Run { output, .. }
        | Command::Gram { output, .. }
        | Command::Stability { output, .. }
        | Command::Exponentials { output, .. }
        | Command::Projection { output, .. }
        | Command::Carleson { output, .. } => output,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = output_args(&cli.command);
    let opts = RunOptions {
        format: match output.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Structured => Format::Structured,
        },
        seed: output.seed,
        parallel: output.parallel,
    };
    let result = scenario_for(&cli.command).and_then(|s| run_scenario(&s, &output.out, opts));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = write_error(&output.out, &e);
            eprintln!("aobkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
