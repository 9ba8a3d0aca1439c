//! Operator entry point. Exit codes: 0 success, 1 domain error (and failed
//! validation), 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::{BackendChoice, PolicyChoice, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "uiweave",
    version,
    about = "Explore interactive pages into verified interaction graphs, validate them by task execution, and score the results."
)]
struct Cli {
    /// Key-value config file; flags still override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    backend: Option<BackendChoice>,

    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyChoice>,

    /// Chat endpoint for the vlm policy.
    #[arg(long, global = true, value_name = "URL")]
    endpoint: Option<String>,

    /// Websocket endpoint for the browser backend.
    #[arg(long, global = true, value_name = "URL")]
    browser_endpoint: Option<String>,

    /// Model name sent to the chat endpoint.
    #[arg(long, global = true)]
    model: Option<String>,

    /// Environment variable holding the API key; the key itself is never a flag.
    #[arg(long, global = true, value_name = "VAR")]
    api_key_env: Option<String>,

    /// Run directory whose transcripts the replay policy consumes.
    #[arg(long, global = true, value_name = "DIR")]
    replay_dir: Option<PathBuf>,

    /// Maximum exploration depth from the root state.
    #[arg(long, global = true, value_name = "N")]
    budget_depth: Option<usize>,

    /// Maximum candidates executed per state.
    #[arg(long, global = true, value_name = "N")]
    budget_candidates: Option<usize>,

    /// Maximum executed sequences in the whole run.
    #[arg(long, global = true, value_name = "N")]
    budget_actions: Option<usize>,

    /// Depth-first share of frontier pops, 0.0 to 1.0.
    #[arg(long, global = true, value_name = "X")]
    budget_mix: Option<f64>,

    /// Maximum sequences executed per validation task.
    #[arg(long, global = true, value_name = "N")]
    round_cap: Option<usize>,

    /// Overall-score weight on element coverage
    #[arg(long, global = true, value_name = "W")]
    weight_completeness: Option<f64>,

    /// Overall-score weight on category agreement
    #[arg(long, global = true, value_name = "W")]
    weight_correctness: Option<f64>,

    /// Overall-score weight on non-repeated execution
    #[arg(long, global = true, value_name = "W")]
    weight_dedup: Option<f64>,

    /// Output path; each command has a sensible default.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Run candidates and tasks one at a time instead of in parallel.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the deterministic fixture corpus (or one chosen fixture).
    Synth {
        /// Seed for every random draw the templates make.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated widget kinds for a single combined fixture;
        /// omit to write the full ten-fixture corpus.
        #[arg(long, value_delimiter = ',', value_name = "KIND")]
        widgets: Vec<String>,
    },
    /// Explore a page into an interaction graph plus execution trace.
    Explore {
        /// An html file or a fixture directory holding page.html.
        page: PathBuf,
    },
    /// Execute tasks against a page; exits 0 only when every task passes.
    Validate {
        /// An html file or a fixture directory holding page.html.
        page: PathBuf,
        /// JSON task list; defaults to the fixture manifest's tasks.
        #[arg(long, value_name = "FILE")]
        tasks: Option<PathBuf>,
    },
    /// Score predicted actions and verdicts against gold answers.
    EvalAgent {
        /// Directory of benchmark entry JSON files.
        benchmark: PathBuf,
    },
    /// Score exploration runs against fixture manifests.
    EvalPipeline {
        /// Directory of run directories (each holding trace.json).
        runs: PathBuf,
        /// Directory of fixture directories (each holding manifest.json).
        gold: PathBuf,
    },
    /// Emit training-style datasets from a finished run directory.
    Export {
        /// Run directory holding graph.json and trace.json.
        run: PathBuf,
        /// Page source to pair with the graph as a ui2code record.
        #[arg(long, value_name = "FILE")]
        page: Option<PathBuf>,
    },
}

fn assemble(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        config.apply_file(path).map_err(CliError::Config)?;
    }
    if let Some(backend) = cli.backend {
        config.backend = backend;
    }
    if let Some(policy) = cli.policy {
        config.policy = policy;
    }
    if let Some(endpoint) = &cli.endpoint {
        config.endpoint = Some(endpoint.clone());
    }
    if let Some(endpoint) = &cli.browser_endpoint {
        config.browser_endpoint = Some(endpoint.clone());
    }
    if let Some(model) = &cli.model {
        config.model = model.clone();
    }
    if let Some(var) = &cli.api_key_env {
        config.api_key_env = Some(var.clone());
    }
    if let Some(dir) = &cli.replay_dir {
        config.replay_dir = Some(dir.clone());
    }
    if let Some(depth) = cli.budget_depth {
        config.budget.max_depth = depth;
    }
    if let Some(candidates) = cli.budget_candidates {
        config.budget.max_candidates_per_state = candidates;
    }
    if let Some(actions) = cli.budget_actions {
        config.budget.max_total_actions = actions;
    }
    if let Some(mix) = cli.budget_mix {
        config.budget.strategy_mix = mix;
    }
    if let Some(cap) = cli.round_cap {
        config.round_cap = cap;
    }
    if let Some(weight) = cli.weight_completeness {
        config.weights.completeness = weight;
    }
    if let Some(weight) = cli.weight_correctness {
        config.weights.correctness = weight;
    }
    if let Some(weight) = cli.weight_dedup {
        config.weights.dedup = weight;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if cli.sequential {
        config.parallel = false;
    }
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let config = assemble(cli)?;
    match &cli.command {
        Command::Synth { seed, widgets } => commands::synth(&config, *seed, widgets),
        Command::Explore { page } => commands::explore(&config, page),
        Command::Validate { page, tasks } => {
            commands::validate_page(&config, page, tasks.as_deref())
        }
        Command::EvalAgent { benchmark } => commands::eval_agent(&config, benchmark),
        Command::EvalPipeline { runs, gold } => commands::eval_pipeline(&config, runs, gold),
        Command::Export { run, page } => commands::export(&config, run, page.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(1)
        }
    }
}
