//! gradeshield: measure how badly a similarity-based short-answer grader can
//! be gamed, then harden it.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "gradeshield",
    version,
    about = "Gaming-robustness toolkit for similarity-based short-answer graders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded synthetic reference corpus and its gaming pools.
    Synth(commands::synth::SynthArgs),
    /// Generate gaming-strategy response pools from a corpus.
    Generate(commands::generate::GenerateArgs),
    /// Run an evaluation protocol (baseline, advt1, advt2, ensemble).
    Experiment(commands::experiment::ExperimentArgs),
    /// Project per-item response embeddings onto two principal components.
    Pca(commands::pca::PcaArgs),
    /// Score responses with an external LLM judge (record/replay cached).
    Llm(commands::llm::LlmArgs),
    /// Compare two experiment reports (FPR before/after).
    Report(commands::report::ReportArgs),
}

/// Die quietly when a downstream pipe closes (`gradeshield ... | head`)
/// instead of panicking on the failed write.
fn reset_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::Experiment(args) => commands::experiment::run(args),
        Command::Pca(args) => commands::pca::run(args),
        Command::Llm(args) => commands::llm::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
