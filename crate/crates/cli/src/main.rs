use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frugal_cli::commands::read_file;
use frugal_cli::{
    cmd_deviations, cmd_run, cmd_sweep, cmd_verify_examples, parse_config_with, CliError, Command,
};

#[derive(Parser)]
#[command(
    name = "frugal",
    version,
    about = "Frugal online incentive mechanisms for crowd sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the selected mechanisms once per seed and report payments.
    Run(Common),
    /// Sweep (L, lambda, mechanism, seed) and write plot-ready rows.
    Sweep(Common),
    /// Replay cost and window deviations for every user.
    Deviations(Common),
    /// Replay both worked examples against the golden decision logs.
    VerifyExamples {
        /// Read golden logs from this directory instead of the built-in copies.
        #[arg(long)]
        golden_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay users from this file instead of generating them.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Output directory; without it results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// wide or long (CSV only).
    #[arg(long)]
    layout: Option<String>,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long)]
    seed_list: Option<String>,
    /// Mechanism to run; repeat for several.
    #[arg(long = "mechanism")]
    mechanisms: Vec<String>,
    /// Extra `key=value` setting applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn overrides(command: Command, c: &Common) -> Vec<String> {
    let mut o = vec![format!("command = {}", command.as_str())];
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            o.push(format!("{k} = {v}"));
        }
    };
    push(
        "instance.file",
        c.instance.as_ref().map(|p| p.display().to_string()),
    );
    push(
        "output.dir",
        c.out.as_ref().map(|p| p.display().to_string()),
    );
    push("output.format", c.format.clone());
    push("output.layout", c.layout.clone());
    push("sweep.seeds", c.seeds.map(|n| n.to_string()));
    push("sweep.seed_list", c.seed_list.clone());
    push(
        "mechanism.names",
        (!c.mechanisms.is_empty()).then(|| c.mechanisms.join(",")),
    );
    o.extend(c.sets.iter().cloned());
    o
}

fn run(cli: Cli) -> Result<String, CliError> {
    let (command, common) = match cli.command {
        Cmd::VerifyExamples { golden_dir } => {
            let report = cmd_verify_examples(golden_dir.as_deref())?;
            return Ok(format!("verified {}\n", report.checked.join(", ")));
        }
        Cmd::Run(c) => (Command::Run, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Deviations(c) => (Command::Deviations, c),
    };
    let text = match &common.config {
        Some(path) => read_file(path)?,
        None => String::new(),
    };
    let spec = parse_config_with(&text, &overrides(command, &common))?;
    let out = match command {
        Command::Run => cmd_run(&spec)?,
        Command::Sweep => cmd_sweep(&spec)?,
        Command::Deviations => cmd_deviations(&spec)?,
        Command::VerifyExamples => unreachable!(),
    };
    let mut stdout = out.stdout;
    for f in out.files {
        stdout.push_str(&format!("wrote {}\n", f.display()));
    }
    Ok(stdout)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
